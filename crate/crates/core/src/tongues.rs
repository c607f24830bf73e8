//! Resonance tongues: boundary tracing, measured opening slopes and first-order predictions.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::{diagonalize_su11, matmul2, szego_unchecked, Diagonalization, SU11Generator, SU11};
use crate::dynamics::{doubled_rotation, rotation_bisect, VerblunskyOrbit};
use crate::error::{Error, Result};
use crate::model::{frac, FourierPoly, Frequency, ModelKind, ModelSpec};
use crate::spectrum::Label;

const TAU: f64 = 2.0 * PI;

/// Tip of the tongue with one-step rotation frac(<k,omega>)/2 for the constant model.
pub fn tip_theta(k: &[i64], omega: &Frequency, lambda: f64) -> f64 {
    let rho = frac(omega.dot(k)) / 2.0;
    2.0 * ((1.0 - lambda * lambda).sqrt() * (TAU * rho).cos()).clamp(-1.0, 1.0).acos()
}

/// Tip of a period-two tongue; the two-step rotation is frac(<k,omega>) or frac(<k,omega> + 1/2).
pub fn p2_tip_theta(label: &Label, omega: &Frequency, lambda1: f64, lambda2: f64) -> f64 {
    let rho2 = label.value(omega);
    let c = (TAU * rho2).cos() * ((1.0 - lambda1 * lambda1) * (1.0 - lambda2 * lambda2)).sqrt() - lambda1 * lambda2;
    let t = c.clamp(-1.0, 1.0).acos();
    if rho2 <= 0.5 {
        t
    } else {
        TAU - t
    }
}

/// Tip for either model kind at delta = 0.
pub fn model_tip(model: &ModelSpec, label: &Label) -> f64 {
    match model.kind {
        ModelKind::QuasiPeriodic { lambda } => tip_theta(&label.k, &model.omega, lambda),
        ModelKind::PeriodTwo { lambda1, lambda2 } => p2_tip_theta(label, &model.omega, lambda1, lambda2),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TongueTrace {
    pub label: Label,
    pub tip: f64,
    pub delta: Vec<f64>,
    pub theta_minus: Vec<f64>,
    pub theta_plus: Vec<f64>,
    pub width: Vec<f64>,
    /// Grid index and message for each delta whose bisection failed.
    pub failures: Vec<(usize, String)>,
    pub refine_tol: f64,
    pub n_iter: usize,
}

impl TongueTrace {
    pub fn ok(&self, i: usize) -> bool {
        !self.failures.iter().any(|(j, _)| *j == i)
    }

    pub fn success_fraction(&self) -> f64 {
        1.0 - self.failures.len() as f64 / self.delta.len().max(1) as f64
    }
}

/// Doubled one-step rotation, continued across theta = 0 so that it is nondecreasing on R.
fn unwrapped_level(orbit: &VerblunskyOrbit, theta: f64, n: usize) -> Result<f64> {
    let wraps = (theta / TAU).floor();
    Ok(doubled_rotation(orbit, theta - wraps * TAU, n)? + wraps)
}

fn edge(orbit: &VerblunskyOrbit, tip: f64, target: f64, w0: f64, tol: f64, n: usize) -> Result<f64> {
    let level = |t: f64| unwrapped_level(orbit, t, n);
    let mut w = w0;
    let lo = loop {
        let t = tip - w;
        if level(t)? < target {
            break t;
        }
        w *= 2.0;
        if w > TAU {
            return Err(Error::Bracket { lo: tip - w, hi: tip, target });
        }
    };
    let mut w = w0;
    let hi = loop {
        let t = tip + w;
        if level(t)? >= target {
            break t;
        }
        w *= 2.0;
        if w > TAU {
            return Err(Error::Bracket { lo: tip, hi: tip + w, target });
        }
    };
    rotation_bisect(level, target, lo, hi, tol, 1.0 / n as f64)
}

/// Boundaries of the tongue with the given label along a delta grid.
pub fn trace_tongue<F>(family: F, label: &Label, deltas: &[f64], refine_tol: f64, n_iter: usize) -> Result<TongueTrace>
where
    F: Fn(f64) -> ModelSpec + Sync,
{
    if deltas.is_empty() {
        return Err(Error::TooFewPoints(0));
    }
    let base = family(deltas[0]);
    let tip = model_tip(&base, label);
    let target = label.value(&base.omega);
    let tau = 1.0 / n_iter as f64;
    let rows: Vec<std::result::Result<(f64, f64), String>> = deltas
        .par_iter()
        .map(|&d| {
            let orbit = VerblunskyOrbit::new(&family(d), n_iter);
            let w0 = 0.005 + 2.0 * d.abs();
            let lo = edge(&orbit, tip, target - tau, w0, refine_tol, n_iter).map_err(|e| e.to_string())?;
            let hi = edge(&orbit, tip, target + tau, w0, refine_tol, n_iter).map_err(|e| e.to_string())?;
            Ok((lo, hi))
        })
        .collect();
    let mut tr = TongueTrace {
        label: label.clone(),
        tip,
        delta: deltas.to_vec(),
        theta_minus: Vec::with_capacity(deltas.len()),
        theta_plus: Vec::with_capacity(deltas.len()),
        width: Vec::with_capacity(deltas.len()),
        failures: Vec::new(),
        refine_tol,
        n_iter,
    };
    for (i, r) in rows.into_iter().enumerate() {
        match r {
            Ok((lo, hi)) => {
                tr.theta_minus.push(lo);
                tr.theta_plus.push(hi);
                tr.width.push((hi - lo).max(0.0));
            }
            Err(msg) => {
                tr.theta_minus.push(f64::NAN);
                tr.theta_plus.push(f64::NAN);
                tr.width.push(f64::NAN);
                tr.failures.push((i, msg));
            }
        }
    }
    Ok(tr)
}

pub fn delta_grid(delta_max: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| delta_max * i as f64 / steps as f64).collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// RMS misfit of width = slope * delta, relative to the largest width used.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares width ~ s * delta through the origin on delta in (0, fit_fraction * delta_max].
pub fn measure_slopes(trace: &TongueTrace, fit_fraction: f64) -> Result<SlopeFit> {
    let dmax = trace.delta.iter().copied().fold(0.0, f64::max);
    let cut = fit_fraction * dmax * (1.0 + 1e-12);
    let window: Vec<usize> = (0..trace.delta.len()).filter(|&i| trace.delta[i] >= 0.0 && trace.delta[i] <= cut).collect();
    if window.len() < 5 {
        return Err(Error::TooFewPoints(window.len()));
    }
    let pts: Vec<(f64, f64)> = window
        .into_iter()
        .filter(|&i| trace.ok(i) && trace.delta[i] > 0.0)
        .map(|i| (trace.delta[i], trace.width[i]))
        .collect();
    if pts.len() < 2 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    fit_through_origin(&pts)
}

pub fn fit_through_origin(pts: &[(f64, f64)]) -> Result<SlopeFit> {
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints(0));
    }
    let s = pts.iter().map(|(x, y)| x * y).sum::<f64>() / sxx;
    let wmax = pts.iter().map(|(_, y)| y.abs()).fold(0.0, f64::max);
    let rms = (pts.iter().map(|(x, y)| (y - s * x).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    Ok(SlopeFit { slope: s, residual: if wmax > 0.0 { rms / wmax } else { 0.0 }, points: pts.len() })
}

/// First-order data of the tongue at its tip: the averaged linearization
/// [[i(a1 eta + b1 beta), a2 eta + b2 beta], [conj, -i(...)]] and the resulting boundary slopes.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SlopePrediction {
    pub a1: f64,
    pub a2: C64,
    pub b1: f64,
    pub b2: C64,
    pub slope_minus: f64,
    pub slope_plus: f64,
    pub transversal: bool,
}

impl SlopePrediction {
    pub fn from_coefficients(a1: f64, a2: C64, b1: f64, b2: C64) -> Self {
        let qa = a1 * a1 - a2.norm_sqr();
        let qb = 2.0 * (a1 * b1 - (a2 * b2.conj()).re);
        let qc = b1 * b1 - b2.norm_sqr();
        let disc = qb * qb - 4.0 * qa * qc;
        let scale = qb * qb + (4.0 * qa * qc).abs();
        let transversal = disc > 1e-14 * scale.max(1e-300);
        let root = disc.max(0.0).sqrt();
        let (s1, s2) = ((-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa));
        Self { a1, a2, b1, b2, slope_minus: s1.min(s2), slope_plus: s1.max(s2), transversal }
    }

    /// d(width)/d(delta) at delta = 0.
    pub fn slope_difference(&self) -> f64 {
        self.slope_plus - self.slope_minus
    }
}

fn one_step_constant(lambda: f64, theta: f64) -> SU11 {
    szego_unchecked(C64::new(lambda, 0.0), (1.0 - lambda * lambda).sqrt(), theta)
}

fn tip_diagonalization(a0: SU11) -> Result<Diagonalization> {
    diagonalize_su11(SU11Generator { t: a0.a.im, z: a0.b })
}

/// Closed-form slopes for the quasi-periodic model at the tip theta0 of label k.
pub fn predicted_slopes_qp(lambda: f64, theta0: f64, k: &[i64], h: &FourierPoly) -> Result<SlopePrediction> {
    let a0 = one_step_constant(lambda, theta0);
    let dg = tip_diagonalization(a0)?;
    let (s, c) = dg.theta_tilde.sin_cos();
    let cos2 = (2.0 * dg.theta_tilde).cos();
    let e2phi = C64::from_polar(1.0, dg.two_phi);
    let l2 = 1.0 - lambda * lambda;
    let a1 = 1.0 / (2.0 * cos2);
    let core = C64::from_polar(s * s, theta0 + 2.0 * dg.two_phi) + C64::from_polar(c * c, -theta0)
        - e2phi * (lambda * (2.0 * dg.theta_tilde).sin());
    let b2 = C64::i() * lambda / l2 * core * h.coeff(k) / cos2;
    let h0 = h.coeff(&vec![0; k.len()]).re;
    let b1 = lambda * h0 / l2 * ((2.0 * dg.theta_tilde).sin() * (e2phi * C64::from_polar(1.0, theta0)).re - lambda) / cos2;
    Ok(SlopePrediction::from_coefficients(a1, C64::new(0.0, 0.0), b1, b2))
}

/// Averages Z(x)^{-1} A0^{-1} dA(x) Z(x) over a torus grid, with Z(x) = U diag(e^{i pi <k,x>}, e^{-i pi <k,x>}).
/// `deriv` returns the theta- and delta-derivatives of the step at delta = 0.
pub fn linearize<F>(a0: SU11, k: &[i64], grid: usize, deriv: F) -> Result<SlopePrediction>
where
    F: Fn(&[f64]) -> ([[C64; 2]; 2], [[C64; 2]; 2]) + Sync,
{
    let dg = tip_diagonalization(a0)?;
    let u = dg.u.matrix();
    let ui = dg.u.inverse().matrix();
    let a0i = a0.inverse().matrix();
    let dim = k.len();
    let pts = grid_points(dim, grid);
    let sums = pts
        .par_iter()
        .map(|x| {
            let (dt, dd) = deriv(x);
            let kx: f64 = k.iter().zip(x).map(|(a, b)| *a as f64 * b).sum();
            let ph = C64::from_polar(1.0, -TAU * kx);
            let conj = |m: [[C64; 2]; 2]| {
                let p = matmul2(matmul2(ui, matmul2(a0i, m)), u);
                (p[0][0].im, p[0][1] * ph)
            };
            let (e11, e12) = conj(dt);
            let (b11, b12) = conj(dd);
            (e11, e12, b11, b12)
        })
        .reduce(
            || (0.0, C64::default(), 0.0, C64::default()),
            |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3),
        );
    let n = pts.len() as f64;
    Ok(SlopePrediction::from_coefficients(sums.0 / n, sums.1 / n, sums.2 / n, sums.3 / n))
}

fn grid_points(dim: usize, m: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..m).map(move |j| {
                    let mut w = v.clone();
                    w.push(j as f64 / m as f64);
                    w
                })
            })
            .collect();
    }
    out
}

fn quad_size(h: &FourierPoly, k: &[i64]) -> usize {
    let kk = k.iter().map(|v| v.abs()).max().unwrap_or(0);
    (2 * (h.degree() + kk) + 8) as usize
}

fn szego_derivs(s: SU11, h: f64) -> ([[C64; 2]; 2], [[C64; 2]; 2]) {
    let i = C64::i();
    let dt = SU11 { a: s.a * i * 0.5, b: -s.b * i * 0.5 };
    let dd = SU11 { a: C64::default(), b: -s.b * i * h };
    (dt.matrix(), dd.matrix())
}

/// Quadrature linearization for the quasi-periodic model.
pub fn linearize_qp(lambda: f64, theta0: f64, k: &[i64], h: &FourierPoly) -> Result<SlopePrediction> {
    let a0 = one_step_constant(lambda, theta0);
    linearize(a0, k, quad_size(h, k), |x| szego_derivs(a0, h.eval_complex(x).re))
}

/// Quadrature linearization for the two-step cocycle S(alpha_1) S(alpha_0) of the period-two model.
pub fn linearize_p2(lambda1: f64, lambda2: f64, theta0: f64, k: &[i64], h: &FourierPoly, omega: &Frequency) -> Result<SlopePrediction> {
    let s0 = one_step_constant(lambda1, theta0);
    let s1 = one_step_constant(lambda2, theta0);
    let a0 = s1 * s0;
    linearize(a0, k, quad_size(h, k), |x| {
        let xp: Vec<f64> = x.iter().zip(omega.as_slice()).map(|(a, w)| a + w).collect();
        let (t0, d0) = szego_derivs(s0, h.eval_complex(x).re);
        let (t1, d1) = szego_derivs(s1, h.eval_complex(&xp).re);
        let add = |p: [[C64; 2]; 2], q: [[C64; 2]; 2]| {
            let mut r = p;
            for i in 0..2 {
                for j in 0..2 {
                    r[i][j] += q[i][j];
                }
            }
            r
        };
        let dt = add(matmul2(t1, s0.matrix()), matmul2(s1.matrix(), t0));
        let dd = add(matmul2(d1, s0.matrix()), matmul2(s1.matrix(), d0));
        (dt, dd)
    })
}

/// Slope prediction for the tongue of `label` in `model`, whichever kind it is.
pub fn predicted_slopes(model: &ModelSpec, label: &Label) -> Result<SlopePrediction> {
    let tip = model_tip(model, label);
    match model.kind {
        ModelKind::QuasiPeriodic { lambda } => predicted_slopes_qp(lambda, tip, &label.k, &model.h),
        ModelKind::PeriodTwo { lambda1, lambda2 } => linearize_p2(lambda1, lambda2, tip, &label.k, &model.h, &model.omega),
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct P2Coefficients {
    pub f11: C64,
    pub f12: C64,
    pub b2: C64,
    pub small_cond: bool,
}

/// Fourier-mode coefficients of the period-two linearization at delta = 0, written for the
/// reversed product S(alpha_0) S(alpha_1), and the resulting b2.
pub fn p2_coefficients(lambda1: f64, lambda2: f64, theta0: f64, k: &[i64], h: &FourierPoly, omega: &Frequency) -> Result<P2Coefficients> {
    let e = C64::from_polar(1.0, TAU * omega.dot(k));
    let (l1, l2) = (lambda1, lambda2);
    let f11 = (e - 1.0) * (l1 * l1 * l2 * l2) - l1 * l1 - e * (l2 * l2) - 2.0 * l1 * l2 * theta0.cos();
    let f12 = C64::from_polar(l1, -2.0 * theta0)
        + C64::from_polar(2.0 * l1 * l1 * l2, -theta0)
        + l1 * l2 * l2
        + C64::from_polar(l2 * (1.0 - l1 * l1), -theta0) * e;
    if f12.norm() == 0.0 {
        return Err(Error::Degenerate("f12 vanishes".into()));
    }
    let s = 1.0 / ((1.0 - l1 * l1) * (1.0 - l2 * l2)).sqrt();
    let a0 = SU11 {
        a: (C64::from_polar(1.0, theta0) + l1 * l2) * s,
        b: -(C64::from_polar(l1, -theta0) + l2) * s,
    };
    let dg = tip_diagonalization(a0)?;
    let (sn, cs) = dg.theta_tilde.sin_cos();
    let p = C64::from_polar(1.0, dg.two_phi);
    let b2 = C64::i() / ((1.0 - l1 * l1) * (1.0 - l2 * l2) * (2.0 * dg.theta_tilde).cos())
        * (p * (2.0 * sn * cs) * f11 + p * p * (sn * sn) * f12.conj() + f12 * (cs * cs))
        * h.coeff(k);
    Ok(P2Coefficients { f11, f12, b2, small_cond: (f11 / f12).norm() < 1.0 })
}
