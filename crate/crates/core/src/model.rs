//! Verblunsky-coefficient families sampled along torus translations.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const REALITY_TOL: f64 = 1e-12;

/// Real trigonometric polynomial on the d-torus, h(x) = sum_k c_k e^{2 pi i <k,x>}.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierPoly {
    dim: usize,
    coeffs: Vec<(Vec<i64>, C64)>,
}

impl FourierPoly {
    pub fn new(dim: usize, coeffs: Vec<(Vec<i64>, C64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("torus dimension must be at least 1".into()));
        }
        let mut merged: Vec<(Vec<i64>, C64)> = Vec::with_capacity(coeffs.len());
        for (k, c) in coeffs {
            if k.len() != dim {
                return Err(Error::Dimension { expected: dim, got: k.len() });
            }
            match merged.iter_mut().find(|(q, _)| *q == k) {
                Some(slot) => slot.1 += c,
                None => merged.push((k, c)),
            }
        }
        merged.retain(|(_, c)| c.norm() > 0.0);
        merged.sort_by(|a, b| a.0.cmp(&b.0));
        let p = Self { dim, coeffs: merged };
        for (k, c) in &p.coeffs {
            let neg: Vec<i64> = k.iter().map(|v| -v).collect();
            let partner = p.coeff(&neg);
            if (partner - c.conj()).norm() > REALITY_TOL * (1.0 + c.norm()) {
                return Err(Error::InvalidModel(format!(
                    "coefficient of {:?} is not the conjugate of the coefficient of {:?}",
                    neg, k
                )));
            }
        }
        Ok(p)
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, coeffs: Vec::new() }
    }

    /// amp * cos(2 pi <k,x>).
    pub fn cosine(k: &[i64], amp: f64) -> Self {
        let neg: Vec<i64> = k.iter().map(|v| -v).collect();
        let half = C64::new(amp / 2.0, 0.0);
        Self::new(k.len(), vec![(k.to_vec(), half), (neg, half)]).expect("cosine mode is real")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[(Vec<i64>, C64)] {
        &self.coeffs
    }

    pub fn coeff(&self, k: &[i64]) -> C64 {
        self.coeffs
            .iter()
            .find(|(q, _)| q.as_slice() == k)
            .map(|(_, c)| *c)
            .unwrap_or_default()
    }

    /// Largest |k|_inf in the support.
    pub fn degree(&self) -> i64 {
        self.coeffs
            .iter()
            .flat_map(|(k, _)| k.iter().map(|v| v.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn mass(&self) -> f64 {
        self.coeffs.iter().map(|(_, c)| c.norm()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|(k, c)| (k.clone(), c * s)).collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.len() });
        }
        let v = self.eval_complex(x);
        debug_assert!(v.im.abs() <= 1e-12 * (1.0 + self.mass()));
        Ok(v.re)
    }

    pub(crate) fn eval_complex(&self, x: &[f64]) -> C64 {
        self.coeffs
            .iter()
            .map(|(k, c)| c * C64::from_polar(1.0, 2.0 * PI * dot_i(k, x)))
            .sum()
    }
}

fn dot_i(k: &[i64], x: &[f64]) -> f64 {
    k.iter().zip(x).map(|(a, b)| *a as f64 * b).sum()
}

/// Evaluates h at x.
pub fn eval_h(h: &FourierPoly, x: &[f64]) -> Result<f64> {
    h.eval(x)
}

/// Distance from t to the nearest integer.
pub fn dist_z(t: f64) -> f64 {
    (t - t.round()).abs()
}

/// Distance on the circle R/Z.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    dist_z(a - b)
}

pub fn frac(t: f64) -> f64 {
    let f = t - t.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    omega: Vec<f64>,
    pub kappa: Option<f64>,
    pub tau: Option<f64>,
}

impl Frequency {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::InvalidModel("frequency vector is empty".into()));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidModel("frequency entries must be finite".into()));
        }
        Ok(Self { omega: omega.into_iter().map(frac).collect(), kappa: None, tau: None })
    }

    pub fn golden() -> Self {
        Self::new(vec![(5f64.sqrt() - 1.0) / 2.0]).unwrap()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.omega
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn dot(&self, k: &[i64]) -> f64 {
        dot_i(k, &self.omega)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.omega.iter().map(|w| w * s).collect()).unwrap()
    }
}

/// Every nonzero integer vector with |n|_inf <= radius, in lexicographic order.
pub fn lattice_box(dim: usize, radius: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(dim)];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(out.len() * (2 * radius as usize + 1));
        for v in &out {
            for c in -radius..=radius {
                let mut w = v.clone();
                w.push(c);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// min over 0 < |n|_inf <= n_check of |n|_inf^tau * dist(<n,omega>, Z).
pub fn diophantine_margin(omega: &Frequency, n_check: i64, tau: f64) -> f64 {
    lattice_box(omega.dim(), n_check.max(1))
        .into_iter()
        .filter(|n| n.iter().any(|v| *v != 0))
        .map(|n| {
            let norm = n.iter().map(|v| v.abs()).max().unwrap() as f64;
            norm.powf(tau) * dist_z(omega.dot(&n))
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    QuasiPeriodic { lambda: f64 },
    PeriodTwo { lambda1: f64, lambda2: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub delta: f64,
    pub h: FourierPoly,
    pub omega: Frequency,
    pub x0: Vec<f64>,
}

fn check_modulus(name: &str, v: f64) -> Result<()> {
    if !(0.0..1.0).contains(&v) {
        return Err(Error::InvalidModel(format!("{name} = {v} must lie in [0, 1)")));
    }
    Ok(())
}

impl ModelSpec {
    pub fn new(kind: ModelKind, delta: f64, h: FourierPoly, omega: Frequency, x0: Vec<f64>) -> Result<Self> {
        match kind {
            ModelKind::QuasiPeriodic { lambda } => check_modulus("lambda", lambda)?,
            ModelKind::PeriodTwo { lambda1, lambda2 } => {
                check_modulus("lambda1", lambda1)?;
                check_modulus("lambda2", lambda2)?;
                if lambda1 * lambda1 + lambda2 * lambda2 == 0.0 {
                    return Err(Error::InvalidModel("lambda1 and lambda2 cannot both vanish".into()));
                }
            }
        }
        if !delta.is_finite() {
            return Err(Error::InvalidModel("delta must be finite".into()));
        }
        if h.dim() != omega.dim() {
            return Err(Error::Dimension { expected: omega.dim(), got: h.dim() });
        }
        if x0.len() != omega.dim() {
            return Err(Error::Dimension { expected: omega.dim(), got: x0.len() });
        }
        Ok(Self { kind, delta, h, omega, x0 })
    }

    pub fn quasi_periodic(lambda: f64, delta: f64, h: FourierPoly, omega: Frequency) -> Result<Self> {
        let d = omega.dim();
        Self::new(ModelKind::QuasiPeriodic { lambda }, delta, h, omega, vec![0.0; d])
    }

    pub fn period_two(lambda1: f64, lambda2: f64, delta: f64, h: FourierPoly, omega: Frequency) -> Result<Self> {
        let d = omega.dim();
        Self::new(ModelKind::PeriodTwo { lambda1, lambda2 }, delta, h, omega, vec![0.0; d])
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..self.clone() }
    }

    pub fn with_x0(&self, x0: Vec<f64>) -> Result<Self> {
        Self::new(self.kind, self.delta, self.h.clone(), self.omega.clone(), x0)
    }

    pub fn is_period_two(&self) -> bool {
        matches!(self.kind, ModelKind::PeriodTwo { .. })
    }

    /// Modulus of alpha_n, which depends only on the parity of n.
    pub fn modulus(&self, n: i64) -> f64 {
        match self.kind {
            ModelKind::QuasiPeriodic { lambda } => lambda,
            ModelKind::PeriodTwo { lambda1, lambda2 } => {
                if n.rem_euclid(2) == 0 {
                    lambda1
                } else {
                    lambda2
                }
            }
        }
    }

    pub fn sample_point(&self, n: i64) -> Vec<f64> {
        self.x0
            .iter()
            .zip(self.omega.as_slice())
            .map(|(x, w)| frac(x + n as f64 * w))
            .collect()
    }

    pub fn alpha(&self, n: i64) -> C64 {
        let r = self.modulus(n);
        if self.delta == 0.0 || r == 0.0 {
            return C64::new(r, 0.0);
        }
        let h = self.h.eval_complex(&self.sample_point(n)).re;
        C64::from_polar(r, self.delta * h)
    }

    /// alpha_{start}, ..., alpha_{start + count - 1}.
    pub fn alphas(&self, start: i64, count: usize) -> Vec<C64> {
        (0..count as i64).map(|j| self.alpha(start + j)).collect()
    }
}

/// sqrt(1 - |alpha|^2).
pub fn rho_of(alpha: C64) -> Result<f64> {
    let m = alpha.norm_sqr();
    if !(m < 1.0) {
        return Err(Error::NotInDisk(m.sqrt()));
    }
    Ok((1.0 - m).sqrt())
}

#[derive(Deserialize)]
struct RawCoeff {
    k: Vec<i64>,
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Deserialize)]
struct RawH {
    #[serde(default)]
    coeffs: Vec<RawCoeff>,
}

#[derive(Deserialize)]
struct RawModel {
    kind: String,
    lambda: Option<f64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    #[serde(default)]
    delta: f64,
    omega: Vec<f64>,
    x0: Option<Vec<f64>>,
    h: Option<RawH>,
}

/// Line (1-based) of the first occurrence of `"key"` in the source, or 1.
fn line_of(src: &str, key: &str) -> usize {
    let pat = format!("\"{key}\"");
    src.lines().position(|l| l.contains(&pat)).map(|i| i + 1).unwrap_or(1)
}

fn config_err(src: &str, key: &str, msg: impl Into<String>) -> Error {
    Error::Config { line: line_of(src, key), column: 1, msg: msg.into() }
}

impl ModelSpec {
    /// Parses the JSON model document; errors carry the offending line.
    pub fn from_json_str(src: &str) -> Result<Self> {
        let raw: RawModel = serde_json::from_str(src).map_err(|e| Error::Config {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        let kind = match raw.kind.as_str() {
            "quasi_periodic" | "qp" => ModelKind::QuasiPeriodic {
                lambda: raw.lambda.ok_or_else(|| config_err(src, "kind", "missing field `lambda`"))?,
            },
            "period_two" | "p2" => ModelKind::PeriodTwo {
                lambda1: raw.lambda1.ok_or_else(|| config_err(src, "kind", "missing field `lambda1`"))?,
                lambda2: raw.lambda2.ok_or_else(|| config_err(src, "kind", "missing field `lambda2`"))?,
            },
            other => return Err(config_err(src, "kind", format!("unknown model kind `{other}`"))),
        };
        let check = |key: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(v) if !(0.0..1.0).contains(&v) => {
                    Err(config_err(src, key, format!("{key} = {v} must lie in [0, 1)")))
                }
                _ => Ok(()),
            }
        };
        check("lambda", raw.lambda)?;
        check("lambda1", raw.lambda1)?;
        check("lambda2", raw.lambda2)?;
        if let ModelKind::PeriodTwo { lambda1, lambda2 } = kind {
            if lambda1 == 0.0 && lambda2 == 0.0 {
                return Err(config_err(src, "lambda1", "lambda1 and lambda2 cannot both vanish"));
            }
        }
        let d = raw.omega.len();
        let omega = Frequency::new(raw.omega).map_err(|e| config_err(src, "omega", e.to_string()))?;
        let x0 = raw.x0.unwrap_or_else(|| vec![0.0; d]);
        if x0.len() != d {
            return Err(config_err(src, "x0", format!("x0 has length {}, omega has length {d}", x0.len())));
        }
        let coeffs = raw
            .h
            .map(|h| h.coeffs)
            .unwrap_or_default()
            .into_iter()
            .map(|c| (c.k, C64::new(c.re, c.im)))
            .collect();
        let h = FourierPoly::new(d, coeffs).map_err(|e| config_err(src, "coeffs", e.to_string()))?;
        Self::new(kind, raw.delta, h, omega, x0).map_err(|e| config_err(src, "kind", e.to_string()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let coeffs: Vec<_> = self
            .h
            .coeffs()
            .iter()
            .map(|(k, c)| serde_json::json!({"k": k, "re": c.re, "im": c.im}))
            .collect();
        let mut v = serde_json::json!({
            "delta": self.delta,
            "omega": self.omega.as_slice(),
            "x0": self.x0,
            "h": {"coeffs": coeffs},
        });
        match self.kind {
            ModelKind::QuasiPeriodic { lambda } => {
                v["kind"] = "quasi_periodic".into();
                v["lambda"] = lambda.into();
            }
            ModelKind::PeriodTwo { lambda1, lambda2 } => {
                v["kind"] = "period_two".into();
                v["lambda1"] = lambda1.into();
                v["lambda2"] = lambda2.into();
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    #[test]
    fn cosine_values() {
        let h = FourierPoly::cosine(&[1], 1.0);
        assert!((h.eval(&[0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(h.eval(&[0.25]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn complex_coefficient_matches_direct_sum() {
        let c = C64::new(0.3, 0.4);
        let h = FourierPoly::new(1, vec![(vec![1], c), (vec![-1], c.conj())]).unwrap();
        let x = 0.1f64;
        let ang = 2.0 * PI * x;
        let expect = 2.0 * (0.3 * ang.cos() - 0.4 * ang.sin());
        assert!((h.eval(&[x]).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_real_and_bad_dim() {
        let c = C64::new(0.3, 0.4);
        assert!(FourierPoly::new(1, vec![(vec![1], c)]).is_err());
        let h = FourierPoly::cosine(&[1], 1.0);
        assert!(matches!(h.eval(&[0.0, 0.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn alpha_examples() {
        let h = FourierPoly::cosine(&[1], 1.0);
        let m = ModelSpec::quasi_periodic(0.5, 0.0, h.clone(), Frequency::golden()).unwrap();
        for n in -5..5 {
            assert_eq!(m.alpha(n), C64::new(0.5, 0.0));
        }
        let z = ModelSpec::quasi_periodic(0.0, 0.3, h.clone(), Frequency::golden()).unwrap();
        assert_eq!(z.alpha(7), C64::new(0.0, 0.0));
        let p = ModelSpec::period_two(0.5, 0.0, 0.0, h, Frequency::golden()).unwrap();
        assert_eq!(p.alpha(2), C64::new(0.5, 0.0));
        assert_eq!(p.alpha(3), C64::new(0.0, 0.0));
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho_of(C64::new(0.0, 0.0)).unwrap(), 1.0);
        assert!((rho_of(C64::new(0.5, 0.0)).unwrap() - 0.75f64.sqrt()).abs() < 1e-15);
        assert!(rho_of(C64::new(0.6, 0.8)).is_err());
    }

    #[test]
    fn margin_golden_matches_brute_force() {
        let w = golden();
        let mut best = f64::INFINITY;
        for n in 1..=50i64 {
            let v = (n as f64).powi(2) * dist_z(n as f64 * w);
            best = best.min(v);
        }
        let got = diophantine_margin(&Frequency::golden(), 50, 2.0);
        assert!((got - best).abs() < 1e-15);
        assert!(got > 0.0);
    }

    #[test]
    fn margin_rational_is_zero() {
        let f = Frequency::new(vec![0.5]).unwrap();
        assert_eq!(diophantine_margin(&f, 2, 1.0), 0.0);
    }

    #[test]
    fn margin_two_dim_positive() {
        let f = Frequency::new(vec![golden(), 2f64.sqrt() - 1.0]).unwrap();
        let m = diophantine_margin(&f, 20, 3.0);
        let mut best = f64::INFINITY;
        for a in -20i64..=20 {
            for b in -20i64..=20 {
                if a == 0 && b == 0 {
                    continue;
                }
                let nn = a.abs().max(b.abs()) as f64;
                best = best.min(nn.powi(3) * dist_z(a as f64 * golden() + b as f64 * (2f64.sqrt() - 1.0)));
            }
        }
        assert!(m > 0.0);
        assert!((m - best).abs() < 1e-14);
    }

    #[test]
    fn json_roundtrip_and_errors() {
        let src = r#"{
  "kind": "quasi_periodic",
  "lambda": 0.5,
  "delta": 0.05,
  "omega": [0.6180339887498949],
  "h": {"coeffs": [{"k": [1], "re": 0.5, "im": 0.0}, {"k": [-1], "re": 0.5, "im": 0.0}]}
}"#;
        let m = ModelSpec::from_json_str(src).unwrap();
        assert_eq!(m.kind, ModelKind::QuasiPeriodic { lambda: 0.5 });
        let again = ModelSpec::from_json_str(&m.to_json().to_string()).unwrap();
        assert_eq!(m, again);

        let bad = src.replace("\"lambda\": 0.5", "\"lambda\": 1.5");
        match ModelSpec::from_json_str(&bad) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let broken = src.replace("0.05,", "0.05");
        match ModelSpec::from_json_str(&broken) {
            Err(Error::Config { line, .. }) => assert!(line >= 4),
            other => panic!("unexpected {other:?}"),
        }
        let unreal = src.replace("\"re\": 0.5, \"im\": 0.0}]", "\"re\": 0.4, \"im\": 0.0}]");
        assert!(matches!(ModelSpec::from_json_str(&unreal), Err(Error::Config { .. })));
    }

    proptest! {
        #[test]
        fn modulus_is_exact(lam in 0.0f64..0.99, delta in -2.0f64..2.0, n in -1000i64..1000) {
            let h = FourierPoly::cosine(&[1], 1.0);
            let m = ModelSpec::quasi_periodic(lam, delta, h, Frequency::golden()).unwrap();
            prop_assert!((m.alpha(n).norm() - lam).abs() < 1e-15);
        }

        #[test]
        fn h_is_periodic(x in -3.0f64..3.0, y in -3.0f64..3.0, j in 0usize..2) {
            let h = FourierPoly::new(2, vec![
                (vec![1, 2], C64::new(0.2, -0.1)),
                (vec![-1, -2], C64::new(0.2, 0.1)),
                (vec![0, 1], C64::new(0.5, 0.0)),
                (vec![0, -1], C64::new(0.5, 0.0)),
            ]).unwrap();
            let mut p = vec![x, y];
            let a = h.eval(&p).unwrap();
            p[j] += 1.0;
            prop_assert!((a - h.eval(&p).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn equal_moduli_reproduce_qp(lam in 0.0f64..0.99, delta in -1.0f64..1.0, n in -500i64..500) {
            let h = FourierPoly::cosine(&[1], 1.0);
            let q = ModelSpec::quasi_periodic(lam, delta, h.clone(), Frequency::golden()).unwrap();
            let p = ModelSpec::period_two(lam, lam, delta, h, Frequency::golden()).unwrap();
            prop_assume!(lam > 0.0);
            prop_assert_eq!(q.alpha(n), p.alpha(n));
        }
    }
}
