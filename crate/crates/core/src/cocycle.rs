//! SU(1,1) / SL(2,R) algebra and the Szego transfer maps.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{frac, Frequency, ModelKind, ModelSpec};

pub const GROUP_TOL: f64 = 1e-10;

/// [[a, b], [conj(b), conj(a)]] with |a|^2 - |b|^2 = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SU11 {
    pub a: C64,
    pub b: C64,
}

impl SU11 {
    pub const IDENTITY: SU11 = SU11 { a: C64::new(1.0, 0.0), b: C64::new(0.0, 0.0) };

    pub fn new(a: C64, b: C64) -> Result<Self> {
        let m = Self { a, b };
        let d = m.det();
        if (d - 1.0).abs() > GROUP_TOL {
            return Err(Error::NotSu11(format!("|a|^2 - |b|^2 = {d}")));
        }
        Ok(m)
    }

    /// From a complex 2x2 array, checking the SU(1,1) pattern.
    pub fn from_matrix(m: [[C64; 2]; 2]) -> Result<Self> {
        let scale = 1.0 + m[0][0].norm() + m[0][1].norm();
        let off = (m[1][0] - m[0][1].conj()).norm() + (m[1][1] - m[0][0].conj()).norm();
        if off > GROUP_TOL * scale {
            return Err(Error::NotSu11(format!("pattern residual {off}")));
        }
        Self::new(m[0][0], m[0][1])
    }

    pub fn det(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr()
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        [[self.a, self.b], [self.b.conj(), self.a.conj()]]
    }

    pub fn trace(&self) -> f64 {
        2.0 * self.a.re
    }

    pub fn inverse(&self) -> Self {
        Self { a: self.a.conj(), b: -self.b }
    }

    /// Rescales so that |a|^2 - |b|^2 = 1 exactly (up to rounding).
    pub fn renormalized(&self) -> Self {
        let s = self.det().sqrt();
        Self { a: self.a / s, b: self.b / s }
    }

    /// Operator norm from the singular values.
    pub fn op_norm(&self) -> f64 {
        op_norm(self.matrix())
    }

    /// M^{-1} A M with M = (1/(1+i)) [[1, -i], [1, i]].
    pub fn to_sl2(&self) -> SL2R {
        let (a, b) = (self.a, self.b);
        SL2R { m: [[a.re + b.re, a.im - b.im], [-a.im - b.im, a.re - b.re]] }
    }
}

impl Mul for SU11 {
    type Output = SU11;
    fn mul(self, r: SU11) -> SU11 {
        SU11 {
            a: self.a * r.a + self.b * r.b.conj(),
            b: self.a * r.b + self.b * r.a.conj(),
        }
    }
}

pub fn op_norm(m: [[C64; 2]; 2]) -> f64 {
    let fro: f64 = m.iter().flatten().map(|z| z.norm_sqr()).sum();
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).norm();
    ((fro + (fro * fro - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
}

pub fn matmul2(x: [[C64; 2]; 2], y: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut r = [[C64::default(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SL2R {
    pub m: [[f64; 2]; 2],
}

impl SL2R {
    pub const IDENTITY: SL2R = SL2R { m: [[1.0, 0.0], [0.0, 1.0]] };

    pub fn new(m: [[f64; 2]; 2]) -> Result<Self> {
        let s = Self { m };
        if (s.det() - 1.0).abs() > GROUP_TOL {
            return Err(Error::NotSu11(format!("SL(2,R) determinant {}", s.det())));
        }
        Ok(s)
    }

    /// Counterclockwise rotation by phi.
    pub fn rotation(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Self { m: [[c, -s], [s, c]] }
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.m[0][0] * v[0] + self.m[0][1] * v[1], self.m[1][0] * v[0] + self.m[1][1] * v[1]]
    }
}

impl Mul for SL2R {
    type Output = SL2R;
    fn mul(self, r: SL2R) -> SL2R {
        let (x, y) = (self.m, r.m);
        SL2R {
            m: [
                [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
                [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
            ],
        }
    }
}

/// Conjugates a complex 2x2 matrix by M and checks that the result is real.
pub fn to_sl2(m: [[C64; 2]; 2]) -> Result<SL2R> {
    // M = (1/(1+i)) [[1,-i],[1,i]], M^{-1} = ((1+i)/2) [[1,1],[i,-i]]
    let k = C64::new(1.0, 1.0);
    let mm = [[C64::new(1.0, 0.0) / k, C64::new(0.0, -1.0) / k], [C64::new(1.0, 0.0) / k, C64::new(0.0, 1.0) / k]];
    let h = k / 2.0;
    let mi = [[h, h], [h * C64::i(), -h * C64::i()]];
    let r = matmul2(matmul2(mi, m), mm);
    let scale = 1.0 + m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let imag = r.iter().flatten().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > GROUP_TOL * scale {
        return Err(Error::NotSu11(format!("conjugate has imaginary part {imag}")));
    }
    SL2R::new([[r[0][0].re, r[0][1].re], [r[1][0].re, r[1][1].re]])
}

/// Reduces an angle to [0, 2 pi).
pub fn wrap_angle(theta: f64) -> f64 {
    2.0 * PI * frac(theta / (2.0 * PI))
}

/// Szego transfer matrix e^{-i theta/2}/rho [[e^{i theta}, -conj(alpha)], [-alpha e^{i theta}, 1]].
pub fn szego_step(alpha: C64, theta: f64) -> Result<SU11> {
    let r = crate::model::rho_of(alpha)?;
    Ok(szego_unchecked(alpha, r, wrap_angle(theta)))
}

#[inline]
pub(crate) fn szego_unchecked(alpha: C64, rho: f64, theta: f64) -> SU11 {
    let e = C64::from_polar(1.0 / rho, theta / 2.0);
    SU11 { a: e, b: -alpha.conj() * e.conj() }
}

fn p2_params(model: &ModelSpec) -> Result<(f64, f64)> {
    match model.kind {
        ModelKind::PeriodTwo { lambda1, lambda2 } => Ok((lambda1, lambda2)),
        _ => Err(Error::WrongKind("two-step map needs a period-two model")),
    }
}

fn p2_phases(model: &ModelSpec, x: &[f64]) -> Result<(f64, f64)> {
    let xp: Vec<f64> = x.iter().zip(model.omega.as_slice()).map(|(a, w)| a + w).collect();
    Ok((model.delta * model.h.eval(x)?, model.delta * model.h.eval(&xp)?))
}

/// The cocycle iterate S(alpha_1(x)) S(alpha_0(x)) of the period-two model at base point x,
/// with alpha_0 = lambda1 e^{i delta h(x)} and alpha_1 = lambda2 e^{i delta h(x + omega)}.
pub fn two_step(model: &ModelSpec, x: &[f64], theta: f64) -> Result<SU11> {
    let (l1, l2) = p2_params(model)?;
    let (p, pp) = p2_phases(model, x)?;
    let theta = wrap_angle(theta);
    let s = 1.0 / ((1.0 - l1 * l1) * (1.0 - l2 * l2)).sqrt();
    let a = (C64::from_polar(1.0, theta) + C64::from_polar(l1 * l2, p - pp)) * s;
    let b = -(C64::from_polar(l1, -p) + C64::from_polar(l2, -(theta + pp))) * s;
    Ok(SU11 { a, b })
}

/// The product in the opposite order, S(alpha_0) S(alpha_1). Same trace as `two_step`.
pub fn two_step_reversed(model: &ModelSpec, x: &[f64], theta: f64) -> Result<SU11> {
    let (l1, l2) = p2_params(model)?;
    let (p, pp) = p2_phases(model, x)?;
    let theta = wrap_angle(theta);
    let s = 1.0 / ((1.0 - l1 * l1) * (1.0 - l2 * l2)).sqrt();
    let a = (C64::from_polar(1.0, theta) + C64::from_polar(l1 * l2, pp - p)) * s;
    let b = -(C64::from_polar(l1, -(theta + p)) + C64::from_polar(l2, -pp)) * s;
    Ok(SU11 { a, b })
}

pub const RENORM_EVERY: usize = 1000;

/// A(x + (n-1) omega) ... A(x + omega) A(x).
pub fn iterate<F>(step: F, x0: &[f64], omega: &Frequency, n: usize) -> SU11
where
    F: Fn(&[f64]) -> SU11,
{
    let mut acc = SU11::IDENTITY;
    let mut x = x0.to_vec();
    for j in 0..n {
        acc = step(&x) * acc;
        for (xi, w) in x.iter_mut().zip(omega.as_slice()) {
            *xi = frac(*xi + w);
        }
        if (j + 1) % RENORM_EVERY == 0 {
            acc = acc.renormalized();
        }
    }
    acc
}

/// [[i t, z], [conj(z), -i t]] in su(1,1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SU11Generator {
    pub t: f64,
    pub z: C64,
}

impl SU11Generator {
    pub fn det(&self) -> f64 {
        self.t * self.t - self.z.norm_sqr()
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        [[C64::new(0.0, self.t), self.z], [self.z.conj(), C64::new(0.0, -self.t)]]
    }
}

/// Conjugacy data for an elliptic generator.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Diagonalization {
    pub u: SU11,
    /// Signed: U^{-1} G U = diag(i rho, -i rho).
    pub rho: f64,
    pub theta_tilde: f64,
    /// The angle 2 phi = arg z - pi/2.
    pub two_phi: f64,
}

pub fn diagonalize_su11(g: SU11Generator) -> Result<Diagonalization> {
    let det = g.det();
    if !(det > 0.0) {
        return Err(Error::NotElliptic(det));
    }
    let (t, z, sign) = if g.t < 0.0 { (-g.t, -g.z, -1.0) } else { (g.t, g.z, 1.0) };
    let rho = (t * t - z.norm_sqr()).sqrt();
    let two_phi = if z.norm() == 0.0 { -PI / 2.0 } else { z.arg() - PI / 2.0 };
    let theta_tilde = -0.5 * (z.norm() / rho).atan();
    let s = 1.0 / (2.0 * theta_tilde).cos().sqrt();
    let u = SU11 {
        a: C64::new(theta_tilde.cos() * s, 0.0),
        b: C64::from_polar(theta_tilde.sin() * s, two_phi),
    };
    Ok(Diagonalization { u, rho: sign * rho, theta_tilde, two_phi })
}

/// Pair of eigenvalues for a trace-2c unimodular matrix.
fn pair_from_half_trace(c: f64) -> (C64, C64) {
    if c.abs() <= 1.0 {
        let s = (1.0 - c * c).sqrt();
        (C64::new(c, s), C64::new(c, -s))
    } else {
        let s = (c * c - 1.0).sqrt();
        if c > 0.0 {
            (C64::new(c + s, 0.0), C64::new(c - s, 0.0))
        } else {
            (C64::new(c - s, 0.0), C64::new(c + s, 0.0))
        }
    }
}

/// Eigenvalues of the constant one-step matrix; the first has argument in [0, pi] on the band.
pub fn eigenvalues_qp_constant(lambda: f64, theta: f64) -> (C64, C64) {
    pair_from_half_trace((theta / 2.0).cos() / (1.0 - lambda * lambda).sqrt())
}

/// Eigenvalues of the constant two-step matrix.
pub fn eigenvalues_p2_constant(lambda1: f64, lambda2: f64, theta: f64) -> (C64, C64) {
    let c = (lambda1 * lambda2 + theta.cos()) / ((1.0 - lambda1 * lambda1) * (1.0 - lambda2 * lambda2)).sqrt();
    pair_from_half_trace(c)
}
