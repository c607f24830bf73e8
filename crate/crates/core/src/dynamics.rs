//! Fibered rotation number and Lyapunov exponent estimators.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::cocycle::{szego_unchecked, wrap_angle, SU11};
use crate::error::{Error, Result};
use crate::model::{circle_dist, frac, Frequency, ModelSpec};

pub const MIN_ITER: usize = 1000;
pub const SCAN_ITER: usize = 200_000;
pub const REFINE_ITER: usize = 2_000_000;

/// A cocycle sampled along one orbit of the base.
pub trait Cocycle: Sync {
    fn len(&self) -> usize;
    fn step(&self, n: usize) -> SU11;
    /// Angle (in the SU(1,1) phase) around which single-step increments are lifted.
    fn center(&self) -> f64;
}

/// Verblunsky coefficients alpha_0, alpha_1, ... of a model at its base point.
#[derive(Clone, Debug)]
pub struct VerblunskyOrbit {
    pub alphas: Vec<C64>,
    rhos: Vec<f64>,
}

impl VerblunskyOrbit {
    pub fn new(model: &ModelSpec, len: usize) -> Self {
        Self::from_alphas(model.alphas(0, len))
    }

    pub fn from_alphas(alphas: Vec<C64>) -> Self {
        let rhos = alphas.iter().map(|a| (1.0 - a.norm_sqr()).sqrt()).collect();
        Self { alphas, rhos }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn one_step(&self, theta: f64) -> SzegoCocycle<'_> {
        SzegoCocycle { orbit: self, theta: wrap_angle(theta) }
    }

    pub fn two_step(&self, theta: f64) -> TwoStepCocycle<'_> {
        TwoStepCocycle { orbit: self, theta: wrap_angle(theta) }
    }
}

pub struct SzegoCocycle<'a> {
    orbit: &'a VerblunskyOrbit,
    theta: f64,
}

impl Cocycle for SzegoCocycle<'_> {
    fn len(&self) -> usize {
        self.orbit.len()
    }
    #[inline]
    fn step(&self, n: usize) -> SU11 {
        szego_unchecked(self.orbit.alphas[n], self.orbit.rhos[n], self.theta)
    }
    fn center(&self) -> f64 {
        self.theta / 2.0
    }
}

/// Consecutive pairs S(alpha_{2n+1}) S(alpha_{2n}); the base translation is doubled.
pub struct TwoStepCocycle<'a> {
    orbit: &'a VerblunskyOrbit,
    theta: f64,
}

impl Cocycle for TwoStepCocycle<'_> {
    fn len(&self) -> usize {
        self.orbit.len() / 2
    }
    #[inline]
    fn step(&self, n: usize) -> SU11 {
        let o = self.orbit;
        szego_unchecked(o.alphas[2 * n + 1], o.rhos[2 * n + 1], self.theta)
            * szego_unchecked(o.alphas[2 * n], o.rhos[2 * n], self.theta)
    }
    fn center(&self) -> f64 {
        self.theta
    }
}

/// Cocycle given by a step function x -> A(x) along x0 + n omega.
pub struct FnCocycle<F> {
    step: F,
    x0: Vec<f64>,
    omega: Frequency,
    len: usize,
    center: f64,
}

impl<F: Fn(&[f64]) -> SU11 + Sync> FnCocycle<F> {
    pub fn new(step: F, x0: &[f64], omega: &Frequency, len: usize, center: f64) -> Self {
        Self { step, x0: x0.to_vec(), omega: omega.clone(), len, center }
    }
}

impl<F: Fn(&[f64]) -> SU11 + Sync> Cocycle for FnCocycle<F> {
    fn len(&self) -> usize {
        self.len
    }
    fn step(&self, n: usize) -> SU11 {
        let x: Vec<f64> = self
            .x0
            .iter()
            .zip(self.omega.as_slice())
            .map(|(x, w)| frac(x + n as f64 * w))
            .collect();
        (self.step)(&x)
    }
    fn center(&self) -> f64 {
        self.center
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RotationEstimate {
    /// Revolutions mod 1.
    pub value: f64,
    /// Unreduced average increment in revolutions.
    pub lifted: f64,
    pub n_iter: usize,
    /// Circle distance between the half-run and full-run estimates plus 1/n.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub n_iter: usize,
}

#[inline]
fn lift_into(inc: f64, center: f64) -> f64 {
    let mut r = inc - center;
    while r > PI {
        r -= 2.0 * PI;
    }
    while r <= -PI {
        r += 2.0 * PI;
    }
    center + r
}

/// One orbit pass producing both estimates.
pub fn rotation_and_lyapunov<C: Cocycle + ?Sized>(c: &C, n_iter: usize) -> Result<(RotationEstimate, LyapunovEstimate)> {
    if n_iter < MIN_ITER {
        return Err(Error::TooFewIterations { got: n_iter, min: MIN_ITER });
    }
    if c.len() < n_iter {
        return Err(Error::TooFewIterations { got: c.len(), min: n_iter });
    }
    let center = c.center();
    let half = n_iter / 2;
    let (mut v0, mut v1) = (0.8f64, 0.6f64);
    let mut total = 0.0f64;
    let mut total_half = 0.0f64;
    let mut logs = 0.0f64;
    let mut prod = 1.0f64;
    for n in 0..n_iter {
        let s = c.step(n);
        if n == 0 && ((s.det() - 1.0).abs() > 1e-8) {
            return Err(Error::NotSu11(format!("step determinant {}", s.det())));
        }
        let m = s.to_sl2().m;
        let w0 = m[0][0] * v0 + m[0][1] * v1;
        let w1 = m[1][0] * v0 + m[1][1] * v1;
        let d = (v0 * w1 - v1 * w0).atan2(v0 * w0 + v1 * w1);
        total += lift_into(-d, center);
        let nrm = w0.hypot(w1);
        v0 = w0 / nrm;
        v1 = w1 / nrm;
        prod *= nrm;
        if n % 32 == 31 {
            logs += prod.ln();
            prod = 1.0;
        }
        if n + 1 == half {
            total_half = total;
        }
    }
    logs += prod.ln();
    let lifted = total / (2.0 * PI * n_iter as f64);
    let lifted_half = total_half / (2.0 * PI * half as f64);
    let rot = RotationEstimate {
        value: frac(lifted),
        lifted,
        n_iter,
        residual: circle_dist(lifted, lifted_half) + 1.0 / n_iter as f64,
    };
    let le = LyapunovEstimate { value: logs / n_iter as f64, n_iter };
    Ok((rot, le))
}

pub fn rotation_number<C: Cocycle + ?Sized>(c: &C, n_iter: usize) -> Result<RotationEstimate> {
    Ok(rotation_and_lyapunov(c, n_iter)?.0)
}

pub fn lyapunov<C: Cocycle + ?Sized>(c: &C, n_iter: usize) -> Result<LyapunovEstimate> {
    Ok(rotation_and_lyapunov(c, n_iter)?.1)
}

/// Twice the one-step rotation number, unreduced; nondecreasing from 0 to 1 on [0, 2 pi).
pub fn doubled_rotation(orbit: &VerblunskyOrbit, theta: f64, n_iter: usize) -> Result<f64> {
    Ok(2.0 * rotation_number(&orbit.one_step(theta), n_iter)?.lifted)
}

/// Locates the crossing of a nondecreasing level function through `target` by bisection.
pub fn rotation_bisect<F>(level: F, target: f64, lo: f64, hi: f64, tol_theta: f64, tol_level: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if lo == hi {
        let v = level(lo)?;
        return if (v - target).abs() <= tol_level {
            Ok(lo)
        } else {
            Err(Error::Bracket { lo, hi, target })
        };
    }
    let (mut lo, mut hi) = if lo < hi { (lo, hi) } else { (hi, lo) };
    if level(lo)? >= target || level(hi)? < target {
        return Err(Error::Bracket { lo, hi, target });
    }
    while hi - lo > tol_theta {
        let mid = 0.5 * (lo + hi);
        if level(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
