//! Command sections read from the same JSON document as the model.

use serde::Deserialize;

#[derive(Deserialize, Default)]
pub struct Document {
    #[serde(default)]
    pub tongue: TongueSettings,
    #[serde(default)]
    pub qwalk: WalkSettings,
    #[serde(default)]
    pub oracle: OracleSettings,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TongueSettings {
    pub k: Vec<i64>,
    pub half_shift: bool,
    pub delta_max: f64,
    pub steps: usize,
    pub fit_fraction: f64,
}

impl Default for TongueSettings {
    fn default() -> Self {
        Self { k: vec![1], half_shift: false, delta_max: 0.05, steps: 10, fit_fraction: 1.0 }
    }
}

#[derive(Deserialize, Clone, Copy)]
pub struct CoinEntry {
    pub c11: [f64; 2],
    pub c12: [f64; 2],
    pub c21: [f64; 2],
    pub c22: [f64; 2],
}

#[derive(Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    Up,
    Down,
    Balanced,
    Random,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkSettings {
    pub sites: usize,
    pub steps: usize,
    pub snapshots: Vec<usize>,
    pub initial: Initial,
    /// Boundary folding phases, in radians.
    pub boundary_left: f64,
    pub boundary_right: f64,
    pub spectrum: bool,
    /// Explicit coins replace the model-derived ones; repeated cyclically over the window.
    pub coins: Option<Vec<CoinEntry>>,
}

impl Default for WalkSettings {
    fn default() -> Self {
        Self {
            sites: 256,
            steps: 100,
            snapshots: Vec::new(),
            initial: Initial::Balanced,
            boundary_left: 0.0,
            boundary_right: 0.0,
            spectrum: false,
            coins: None,
        }
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    pub n: usize,
    pub boundary_phase: f64,
    pub margin: f64,
    /// Defaults to gaps.json in the output directory.
    pub gaps: Option<String>,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { n: 512, boundary_phase: 0.0, margin: 0.02, gaps: None }
    }
}
