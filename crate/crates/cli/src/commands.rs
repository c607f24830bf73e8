use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;

use cmv_core::dynamics::MIN_ITER;
use cmv_core::model::{ModelKind, ModelSpec};
use cmv_core::qwalk::{
    build_walk, check_coins, cgmv_map, conjugation_residual, state_norm, step_state, walk_spectrum, Coin, CoinModel, WalkState,
};
use cmv_core::spectrum::{detect_gaps, oracle_compare, scan, theta_grid, CMVTruncation, GapParams, GapReport, Label, SpectrumScan};
use cmv_core::tongues::{delta_grid, measure_slopes, p2_coefficients, predicted_slopes, trace_tongue};
use cmv_core::Error as CoreError;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::output::{num, Sink};
use crate::settings::{Document, Initial};
use crate::Common;

const TAU: f64 = 2.0 * PI;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn input(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = match e {
            CoreError::Config { .. }
            | CoreError::InvalidModel(_)
            | CoreError::TruncationSize(_)
            | CoreError::Dimension { .. }
            | CoreError::NotInDisk(_)
            | CoreError::BoundaryPhase(_)
            | CoreError::WrongKind(_) => 2,
            CoreError::Coin { .. } => 3,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure { code: 1, message: format!("{e:#}") }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

struct Run {
    model: ModelSpec,
    doc: Document,
    sink: Sink,
}

fn load(c: &Common, command: &str) -> Result<Run, Failure> {
    let src = fs::read_to_string(&c.config).map_err(|e| input(format!("cannot read {}: {e}", c.config.display())))?;
    let model = ModelSpec::from_json_str(&src)?;
    let doc: Document = serde_json::from_str(&src)
        .map_err(|e| input(format!("config error at line {}, column {}: {e}", e.line(), e.column())))?;
    if c.n_iter < MIN_ITER {
        return Err(input(format!("--n-iter must be at least {MIN_ITER}")));
    }
    if !(c.tol > 0.0) {
        return Err(input("--tol must be positive"));
    }
    if c.kmax < 0 {
        return Err(input("--kmax must be non-negative"));
    }
    let hash = format!("{:x}", Sha256::digest(src.as_bytes()));
    let meta = json!({
        "tool": "cmvq",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_sha256": hash,
        "settings": { "n_iter": c.n_iter, "grid": c.grid, "kmax": c.kmax, "tol": c.tol, "seed": c.seed },
        "conventions": {
            "angles": "radians in [0, 2pi)",
            "rho": "one-step fibered rotation number in revolutions, in [0, 1/2]",
            "labels": "2 rho = <k, omega> mod 1, or <k, omega> + 1/2 mod 1 when half_shift",
            "fourier": "h(x) = sum_k h_k exp(2 pi i <k, x>)",
        },
        "model": model.to_json(),
    });
    let sink = Sink::new(&c.out, meta)?;
    Ok(Run { model, doc, sink })
}

#[derive(Serialize, Deserialize)]
pub struct GapOut {
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub width: f64,
    pub label_k: Option<Vec<i64>>,
    pub half_shift: bool,
    pub rot_value: f64,
    pub le_floor: f64,
    pub collapsed: bool,
    pub warning: Option<String>,
}

impl From<&GapReport> for GapOut {
    fn from(g: &GapReport) -> Self {
        GapOut {
            theta_minus: g.theta_minus.rem_euclid(TAU),
            theta_plus: g.theta_plus.rem_euclid(TAU),
            width: g.width(),
            label_k: g.label.as_ref().map(|l| l.k.clone()),
            half_shift: g.label.as_ref().is_some_and(|l| l.half_shift),
            rot_value: g.rot_value,
            le_floor: g.le_floor,
            collapsed: g.collapsed,
            warning: g.warning.clone(),
        }
    }
}

impl GapOut {
    fn report(&self) -> GapReport {
        let lo = if self.theta_minus > self.theta_plus { self.theta_minus - TAU } else { self.theta_minus };
        GapReport {
            theta_minus: lo,
            theta_plus: self.theta_plus,
            label: self.label_k.clone().map(|k| Label { k, half_shift: self.half_shift }),
            rot_value: self.rot_value,
            le_floor: self.le_floor,
            collapsed: self.collapsed,
            warning: self.warning.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GapsFile {
    gaps: Vec<GapOut>,
}

fn join_k(k: &[i64]) -> String {
    k.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn write_spectrum(sink: &Sink, csv_name: &str, json_name: &str, s: &SpectrumScan, gaps: &[GapReport]) -> anyhow::Result<()> {
    let rows: Vec<Vec<String>> = s
        .thetas
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let g = gaps.iter().find(|g| g.contains(t));
            let label = g.and_then(|g| g.label.as_ref());
            vec![
                num(t),
                num(s.rho[i].clamp(0.0, 0.5)),
                num(s.le[i]),
                u8::from(g.is_some()).to_string(),
                label.map(|l| join_k(&l.k)).unwrap_or_default(),
                u8::from(label.is_some_and(|l| l.half_shift)).to_string(),
            ]
        })
        .collect();
    sink.csv(csv_name, &["theta", "rho", "le", "in_gap", "label_k", "half_shift"], &rows)?;
    sink.json(json_name, &GapsFile { gaps: gaps.iter().map(GapOut::from).collect() })
}

fn gap_params(c: &Common, model: &ModelSpec) -> GapParams {
    GapParams { kmax: c.kmax, refine_tol: c.tol, ..GapParams::for_model(model) }
}

pub fn spectrum(c: &Common) -> Outcome {
    let run = load(c, "spectrum")?;
    if c.grid == 0 {
        return Err(input("empty grid"));
    }
    let s = scan(&run.model, &theta_grid(c.grid), c.n_iter)?;
    let gaps = detect_gaps(&run.model, &s, &gap_params(c, &run.model))?;
    write_spectrum(&run.sink, "spectrum.csv", "gaps.json", &s, &gaps)?;
    println!("{} gaps detected", gaps.len());
    for g in &gaps {
        let label = g.label.as_ref().map(|l| format!("k={:?}{}", l.k, if l.half_shift { " +1/2" } else { "" }));
        println!("  [{:.6}, {:.6}] {}", g.theta_minus.rem_euclid(TAU), g.theta_plus.rem_euclid(TAU), label.unwrap_or_else(|| "unlabelled".into()));
    }
    Ok(())
}

pub fn tongue(c: &Common) -> Outcome {
    let run = load(c, "tongue")?;
    let t = &run.doc.tongue;
    if t.k.len() != run.model.omega.dim() {
        return Err(input(format!("tongue.k has length {}, omega has length {}", t.k.len(), run.model.omega.dim())));
    }
    if t.steps == 0 || !(t.delta_max > 0.0) {
        return Err(input("tongue grid needs steps >= 1 and delta_max > 0"));
    }
    if !(t.fit_fraction > 0.0 && t.fit_fraction <= 1.0) {
        return Err(input("tongue.fit_fraction must lie in (0, 1]"));
    }
    if t.half_shift && !run.model.is_period_two() {
        return Err(input("half-shifted labels need a period-two model"));
    }
    let mut warnings = Vec::new();
    if t.k.iter().all(|&v| v == 0) {
        warnings.push("k=0 gap open at δ=0".to_string());
    }
    if t.delta_max > 0.5 {
        warnings.push(format!("delta_max = {} outside perturbative regime", t.delta_max));
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let label = Label { k: t.k.clone(), half_shift: t.half_shift };
    let base = run.model.with_delta(0.0);
    let deltas = delta_grid(t.delta_max, t.steps);
    let trace = trace_tongue(|d| base.with_delta(d), &label, &deltas, c.tol, c.n_iter)?;

    let measured = measure_slopes(&trace, t.fit_fraction);
    let predicted = predicted_slopes(&base, &label);
    let ratio = match (&measured, &predicted) {
        (Ok(m), Ok(p)) if p.slope_difference() > 0.0 => Some(m.slope / p.slope_difference()),
        _ => None,
    };
    let p2 = match base.kind {
        ModelKind::PeriodTwo { lambda1, lambda2 } => p2_coefficients(lambda1, lambda2, trace.tip, &t.k, &base.h, &base.omega).ok(),
        ModelKind::QuasiPeriodic { .. } => None,
    };
    let failures: Vec<Value> = trace
        .failures
        .iter()
        .map(|(i, m)| json!({ "index": i, "delta": trace.delta[*i], "message": m }))
        .collect();
    let suffix = format!("{}{}", t.k.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("_"), if t.half_shift { "_half" } else { "" });
    let rows: Vec<Vec<String>> = (0..trace.delta.len())
        .map(|i| {
            let wrap = |x: f64| if x.is_finite() { x.rem_euclid(TAU) } else { x };
            vec![num(trace.delta[i]), num(wrap(trace.theta_minus[i])), num(wrap(trace.theta_plus[i])), num(trace.width[i])]
        })
        .collect();
    run.sink.csv(&format!("tongue_{suffix}.csv"), &["delta", "theta_minus", "theta_plus", "width"], &rows)?;
    let body = json!({
        "label": { "k": t.k, "half_shift": t.half_shift },
        "tip": trace.tip.rem_euclid(TAU),
        "delta_max": t.delta_max,
        "steps": t.steps,
        "fit_fraction": t.fit_fraction,
        "measured": measured.as_ref().ok(),
        "measured_error": measured.as_ref().err().map(|e| e.to_string()),
        "predicted": predicted.as_ref().ok(),
        "predicted_slope_difference": predicted.as_ref().ok().map(|p| p.slope_difference()),
        "predicted_error": predicted.as_ref().err().map(|e| e.to_string()),
        "ratio": ratio,
        "p2_coefficients": p2,
        "failures": failures,
        "success_fraction": trace.success_fraction(),
        "warnings": warnings,
    });
    run.sink.json("slopes.json", &body)?;
    match (&measured, ratio) {
        (Ok(m), Some(r)) => println!("measured slope {:.6}, predicted {:.6}, ratio {r:.4}", m.slope, m.slope / r),
        (Ok(m), None) => println!("measured slope {:.6}, no prediction", m.slope),
        (Err(e), _) => println!("no slope fit: {e}"),
    }
    if trace.success_fraction() < 0.8 {
        return Err(Failure {
            code: 1,
            message: format!("only {:.0}% of the delta grid succeeded", 100.0 * trace.success_fraction()),
        });
    }
    Ok(())
}

fn initial_state(kind: Initial, seed: u64) -> [C64; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        Initial::Up => [C64::new(1.0, 0.0), C64::default()],
        Initial::Down => [C64::default(), C64::new(1.0, 0.0)],
        Initial::Balanced => [C64::new(h, 0.0), C64::new(0.0, h)],
        Initial::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: [C64; 2] = [C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))];
            let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
            [v[0] / n, v[1] / n]
        }
    }
}

fn snapshot_rows(state: &WalkState, n_lo: i64) -> Vec<Vec<String>> {
    state
        .iter()
        .enumerate()
        .map(|(i, p)| vec![(n_lo + i as i64).to_string(), num(p[0].re), num(p[0].im), num(p[1].re), num(p[1].im)])
        .collect()
}

pub fn qwalk(c: &Common) -> Outcome {
    let run = load(c, "qwalk")?;
    let w = &run.doc.qwalk;
    if w.sites < 8 {
        return Err(input("qwalk.sites must be at least 8"));
    }
    let n_lo = -((w.sites / 2) as i64);
    let coin_model = match run.model.kind {
        ModelKind::QuasiPeriodic { lambda } => {
            let mut m = CoinModel::new(lambda, run.model.delta, run.model.h.clone(), run.model.omega.clone())?;
            m.x0 = run.model.x0.clone();
            Some(m)
        }
        ModelKind::PeriodTwo { .. } => None,
    };
    let coins: Vec<Coin> = match (&w.coins, &coin_model) {
        (Some(list), _) if !list.is_empty() => (0..w.sites)
            .map(|i| {
                let e = list[i % list.len()];
                let z = |v: [f64; 2]| C64::new(v[0], v[1]);
                Coin::new(z(e.c11), z(e.c12), z(e.c21), z(e.c22))
            })
            .collect(),
        (Some(_), _) => return Err(input("qwalk.coins is empty")),
        (None, Some(m)) => m.coins(n_lo, w.sites),
        (None, None) => return Err(input("qwalk needs a quasi_periodic model or explicit coins")),
    };
    check_coins(&coins, n_lo, true)?;
    let bl = C64::from_polar(1.0, w.boundary_left);
    let br = C64::from_polar(1.0, w.boundary_right);
    let walk = build_walk(&coins, n_lo, bl, br)?;
    let data = cgmv_map(&coins, n_lo)?;
    let residual = conjugation_residual(&walk, &data)?;
    let (cmv_left, cmv_right) = data.boundaries(bl, br);

    let mut snaps = if w.snapshots.is_empty() { vec![0, w.steps] } else { w.snapshots.clone() };
    snaps.sort_unstable();
    snaps.dedup();
    if snaps.last().is_some_and(|&s| s > w.steps) {
        return Err(input("qwalk.snapshots must not exceed qwalk.steps"));
    }
    let mut state: WalkState = vec![[C64::default(); 2]; w.sites];
    state[w.sites / 2] = initial_state(w.initial, c.seed);
    let norm0 = state_norm(&state);
    let mut drift: f64 = 0.0;
    for t in 0..=w.steps {
        if snaps.contains(&t) {
            run.sink.csv(&format!("walk_{t}.csv"), &["site", "re_up", "im_up", "re_down", "im_down"], &snapshot_rows(&state, n_lo))?;
        }
        if t < w.steps {
            state = step_state(&coins, &state).map_err(|_| input(format!("window of {} sites too small for {} steps", w.sites, w.steps)))?;
            drift = drift.max((state_norm(&state) - norm0).abs());
        }
    }

    let mapping = coin_model.as_ref().filter(|_| w.coins.is_none()).map(|m| -> Result<Value, Failure> {
        let mapped = m.mapped_model()?;
        let shifted = mapped.with_x0(m.x0.iter().zip(mapped.omega.as_slice()).map(|(x, o)| x + 2.0 * n_lo as f64 * o).collect())?;
        let dev = data.alphas.iter().enumerate().map(|(i, a)| (a + shifted.alpha(i as i64)).norm()).fold(0.0, f64::max);
        Ok(json!({
            "model": mapped.to_json(),
            "frequency_realignment": "omega_cmv = omega_walk / 2",
            "alpha_sign": "window coefficients equal minus those of the mapped model",
            "max_alpha_deviation": dev,
        }))
    });
    let mapping = mapping.transpose()?;
    let body = json!({
        "sites": w.sites,
        "n_lo": n_lo,
        "steps": w.steps,
        "residual_interior": residual.interior,
        "residual_full": residual.full,
        "walk_unitarity": walk.unitarity_residual(),
        "norm_drift": drift,
        "boundary": { "walk_left": w.boundary_left, "walk_right": w.boundary_right, "cmv_left": [cmv_left.re, cmv_left.im], "cmv_right": [cmv_right.re, cmv_right.im] },
        "mapping": mapping,
    });
    run.sink.json("residual.json", &body)?;
    println!("CGMV residual {:.3e} (interior), {:.3e} (full window)", residual.interior, residual.full);

    if w.spectrum {
        let Some(m) = coin_model.as_ref().filter(|_| w.coins.is_none()) else {
            return Err(input("qwalk.spectrum needs model-derived coins"));
        };
        if c.grid == 0 {
            return Err(input("empty grid"));
        }
        let mapped = m.mapped_model()?;
        let (s, gaps) = walk_spectrum(m, &theta_grid(c.grid), c.n_iter, Some(&gap_params(c, &mapped)))?;
        write_spectrum(&run.sink, "walk_spectrum.csv", "walk_gaps.json", &s, &gaps)?;
        println!("{} walk gaps detected", gaps.len());
    }
    Ok(())
}

pub fn oracle(c: &Common) -> Outcome {
    let run = load(c, "oracle")?;
    let o = &run.doc.oracle;
    if o.n % 2 != 0 || o.n < 8 {
        return Err(input(format!("oracle.n must be even and at least 8, got {}", o.n)));
    }
    if !(o.margin >= 0.0) {
        return Err(input("oracle.margin must be non-negative"));
    }
    let path = o.gaps.as_ref().map(PathBuf::from).unwrap_or_else(|| run.sink.path("gaps.json"));
    let src = fs::read_to_string(&path).map_err(|_| input(format!("missing gaps file {}", path.display())))?;
    let file: GapsFile = serde_json::from_str(&src).map_err(|e| input(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column())))?;
    let gaps: Vec<GapReport> = file.gaps.iter().map(GapOut::report).collect();
    let t = CMVTruncation::from_model(&run.model, o.n, C64::from_polar(1.0, o.boundary_phase))?;
    let eig = t.eigenvalues();
    let report = oracle_compare(&gaps, &eig, o.margin);
    let mut thetas: Vec<f64> = eig.iter().map(|z| cmv_core::spectrum::wrap_arg(*z)).collect();
    thetas.sort_by(f64::total_cmp);
    let rows: Vec<Vec<String>> = thetas.iter().enumerate().map(|(i, t)| vec![i.to_string(), num(*t)]).collect();
    run.sink.csv("eigenvalues.csv", &["index", "theta"], &rows)?;
    let body = json!({
        "n": o.n,
        "boundary_phase": o.boundary_phase,
        "gaps_file": path.display().to_string(),
        "unitarity_residual": t.unitarity_residual(),
        "passed": report.passed(),
        "report": report,
    });
    run.sink.json("violations.json", &body)?;
    println!(
        "{} eigenvalues, {} violations deeper than {} (max depth {:.3e})",
        report.n_eigenvalues,
        report.violations.len(),
        o.margin,
        report.max_depth
    );
    Ok(())
}
