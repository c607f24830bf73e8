//! Coined quantum walks on Z and their conjugation to extended CMV matrices.
//!
//! Basis order: index 2n is |n, up>, index 2n+1 is |n, down>, with n counted from the
//! first site of the window. The walk matrix is stored row-wise: row j holds the image of
//! basis vector j, so a state evolves as psi' = D^T psi.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{FourierPoly, Frequency, ModelSpec};
use crate::spectrum::{detect_gaps, scan, CMVTruncation, GapParams, GapReport, SpectrumScan};

const TAU: f64 = 2.0 * PI;
const UNITARY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Coin {
    pub c11: C64,
    pub c12: C64,
    pub c21: C64,
    pub c22: C64,
}

impl Coin {
    pub fn new(c11: C64, c12: C64, c21: C64, c22: C64) -> Self {
        Self { c11, c12, c21, c22 }
    }

    pub fn identity() -> Self {
        let (o, z) = (C64::new(1.0, 0.0), C64::default());
        Self::new(o, z, z, o)
    }

    /// [[a, b], [-conj b, conj a]]; unitary when |a|^2 + |b|^2 = 1.
    pub fn symmetric(a: C64, b: C64) -> Self {
        Self::new(a, b, -b.conj(), a.conj())
    }

    pub fn hadamard() -> Self {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::symmetric(s, s)
    }

    /// Coin with off-diagonal modulus `lambda` and phase `phase` on c12.
    pub fn coupled(lambda: f64, phase: f64) -> Self {
        Self::symmetric(C64::new((1.0 - lambda * lambda).sqrt(), 0.0), C64::from_polar(lambda, phase))
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        [[self.c11, self.c12], [self.c21, self.c22]]
    }

    pub fn unitarity_residual(&self) -> f64 {
        let m = self.matrix();
        let mut r: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let g: C64 = (0..2).map(|k| m[k][i].conj() * m[k][j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                r = r.max((g - e).norm());
            }
        }
        r
    }

    pub fn structure_residual(&self) -> f64 {
        (self.c11 - self.c22.conj()).norm().max((self.c12 + self.c21.conj()).norm())
    }
}

pub fn check_coins(coins: &[Coin], n_lo: i64, symmetric: bool) -> Result<()> {
    for (i, c) in coins.iter().enumerate() {
        let site = n_lo + i as i64;
        let r = c.unitarity_residual();
        if r > UNITARY_TOL {
            return Err(Error::Coin { site, reason: format!("not unitary (residual {r:e})") });
        }
        if symmetric {
            let s = c.structure_residual();
            if s > UNITARY_TOL {
                return Err(Error::Coin { site, reason: format!("violates the symmetric structure (residual {s:e})") });
            }
        }
    }
    Ok(())
}

/// Amplitudes (up, down) per window site.
pub type WalkState = Vec<[C64; 2]>;

pub fn state_norm(state: &[[C64; 2]]) -> f64 {
    state.iter().map(|p| p[0].norm_sqr() + p[1].norm_sqr()).sum::<f64>().sqrt()
}

/// One application of the update rule; the state must vanish on the two end sites.
pub fn step_state(coins: &[Coin], state: &[[C64; 2]]) -> Result<WalkState> {
    let w = coins.len();
    if state.len() != w {
        return Err(Error::Dimension { expected: w, got: state.len() });
    }
    let zero = C64::default();
    if w < 3 || [0, w - 1].iter().any(|&i| state[i] != [zero, zero]) {
        return Err(Error::WindowBoundary);
    }
    let mut out = vec![[zero; 2]; w];
    for n in 1..w - 1 {
        let [up, down] = state[n];
        let c = &coins[n];
        out[n + 1][0] += c.c11 * up + c.c12 * down;
        out[n - 1][1] += c.c21 * up + c.c22 * down;
    }
    Ok(out)
}

pub fn state_to_vector(state: &[[C64; 2]]) -> DVector<C64> {
    DVector::from_iterator(2 * state.len(), state.iter().flat_map(|p| p.iter().copied()))
}

pub fn vector_to_state(v: &DVector<C64>) -> WalkState {
    (0..v.len() / 2).map(|n| [v[2 * n], v[2 * n + 1]]).collect()
}

#[derive(Clone, Debug)]
pub struct WalkWindow {
    pub n_lo: i64,
    pub coins: Vec<Coin>,
    pub b_left: C64,
    pub b_right: C64,
    /// Row j is the image of basis vector j.
    pub matrix: DMatrix<C64>,
}

/// Assembles the walk on sites n_lo .. n_lo + coins.len() - 1. The out-of-window columns
/// (|n_lo - 1, down> and |n_hi + 1, up>) are folded onto the end columns with unimodular factors.
pub fn build_walk(coins: &[Coin], n_lo: i64, b_left: C64, b_right: C64) -> Result<WalkWindow> {
    let w = coins.len();
    if w < 4 {
        return Err(Error::TruncationSize(2 * w));
    }
    check_coins(coins, n_lo, false)?;
    for b in [b_left, b_right] {
        if (b.norm() - 1.0).abs() > 1e-14 {
            return Err(Error::BoundaryPhase(b.norm()));
        }
    }
    let n = 2 * w;
    let mut d = DMatrix::<C64>::zeros(n, n);
    for (s, c) in coins.iter().enumerate() {
        let (up, down) = (2 * s, 2 * s + 1);
        let left = if s == 0 { (0, b_left) } else { (2 * s - 1, C64::new(1.0, 0.0)) };
        let right = if s + 1 == w { (n - 1, b_right) } else { (2 * s + 2, C64::new(1.0, 0.0)) };
        d[(up, left.0)] += c.c21 * left.1;
        d[(down, left.0)] += c.c22 * left.1;
        d[(up, right.0)] += c.c11 * right.1;
        d[(down, right.0)] += c.c12 * right.1;
    }
    Ok(WalkWindow { n_lo, coins: coins.to_vec(), b_left, b_right, matrix: d })
}

impl WalkWindow {
    pub fn sites(&self) -> usize {
        self.coins.len()
    }

    /// Column-convention evolution operator.
    pub fn operator(&self) -> DMatrix<C64> {
        self.matrix.transpose()
    }

    pub fn apply(&self, state: &[[C64; 2]]) -> Result<WalkState> {
        if state.len() != self.sites() {
            return Err(Error::Dimension { expected: self.sites(), got: state.len() });
        }
        Ok(vector_to_state(&(self.operator() * state_to_vector(state))))
    }

    pub fn unitarity_residual(&self) -> f64 {
        let n = self.matrix.nrows();
        let g = self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(n, n);
        g.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        crate::spectrum::unitary_eigenvalues(&self.matrix)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CGMVData {
    /// lambda_{-1}, lambda_0, ..., lambda_{2W}.
    pub phases: Vec<C64>,
    /// alpha_0, ..., alpha_{2W-1}; odd entries are zero.
    pub alphas: Vec<C64>,
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl CGMVData {
    /// lambda_i for i >= -1.
    pub fn phase(&self, i: i64) -> C64 {
        self.phases[(i + 1) as usize]
    }

    /// Boundary Verblunsky values matching the walk's folding factors.
    pub fn boundaries(&self, b_left: C64, b_right: C64) -> (C64, C64) {
        let n = self.alphas.len() as i64;
        (-b_left, (b_right * self.phase(n - 1) / self.phase(n)).conj())
    }
}

fn arg_01(z: C64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

pub fn cgmv_map(coins: &[Coin], n_lo: i64) -> Result<CGMVData> {
    check_coins(coins, n_lo, true)?;
    let w = coins.len();
    let mut sigma1 = Vec::with_capacity(w);
    let mut sigma2 = Vec::with_capacity(w);
    for (i, c) in coins.iter().enumerate() {
        if c.c11.norm() == 0.0 || c.c22.norm() == 0.0 {
            return Err(Error::Coin { site: n_lo + i as i64, reason: "vanishing diagonal entry".into() });
        }
        sigma1.push(arg_01(c.c11));
        sigma2.push(arg_01(c.c22));
    }
    let mut phases = vec![C64::default(); 2 * w + 2];
    phases[0] = C64::new(1.0, 0.0);
    phases[1] = C64::new(1.0, 0.0);
    for n in 0..w {
        phases[2 * n + 2] = C64::from_polar(1.0, sigma2[n]) * phases[2 * n];
        phases[2 * n + 3] = C64::from_polar(1.0, -sigma1[n]) * phases[2 * n + 1];
    }
    let mut alphas = vec![C64::default(); 2 * w];
    for m in 0..w {
        alphas[2 * m] = phases[2 * m + 1] / phases[2 * m] * coins[m].c21.conj();
    }
    Ok(CGMVData { phases, alphas, sigma1, sigma2 })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CGMVResidual {
    /// Max entry of |Lambda* D Lambda - E| with a band of 4 indices excluded at each end.
    pub interior: f64,
    pub full: f64,
}

/// Residual of Lambda* D Lambda - E, where E is the truncated CMV matrix built from `data`.
pub fn conjugation_residual(walk: &WalkWindow, data: &CGMVData) -> Result<CGMVResidual> {
    let (left, right) = data.boundaries(walk.b_left, walk.b_right);
    let e = CMVTruncation::from_coefficients(&data.alphas, left, right)?;
    let n = walk.matrix.nrows();
    let (mut interior, mut full) = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            let v = (data.phase(i as i64).conj() * walk.matrix[(i, j)] * data.phase(j as i64) - e.matrix[(i, j)]).norm();
            full = full.max(v);
            if (4..n - 4).contains(&i) && (4..n - 4).contains(&j) {
                interior = interior.max(v);
            }
        }
    }
    Ok(CGMVResidual { interior, full })
}

pub fn verify_cgmv(coins: &[Coin], n_lo: i64, b_left: C64, b_right: C64) -> Result<CGMVResidual> {
    if coins.len() < 8 {
        return Err(Error::TruncationSize(2 * coins.len()));
    }
    let walk = build_walk(coins, n_lo, b_left, b_right)?;
    let data = cgmv_map(coins, n_lo)?;
    conjugation_residual(&walk, &data)
}

/// Walk with coins [[sqrt(1 - l^2), l e^{i delta h_n}], [-l e^{-i delta h_n}, sqrt(1 - l^2)]],
/// h_n = h(x0 + n omega).
#[derive(Clone, Debug)]
pub struct CoinModel {
    pub lambda: f64,
    pub delta: f64,
    pub h: FourierPoly,
    pub omega: Frequency,
    pub x0: Vec<f64>,
}

impl CoinModel {
    pub fn new(lambda: f64, delta: f64, h: FourierPoly, omega: Frequency) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::InvalidModel(format!("coin coupling must lie in [0, 1), got {lambda}")));
        }
        if h.dim() != omega.dim() {
            return Err(Error::Dimension { expected: omega.dim(), got: h.dim() });
        }
        let x0 = vec![0.0; omega.dim()];
        Ok(Self { lambda, delta, h, omega, x0 })
    }

    pub fn coin(&self, n: i64) -> Coin {
        let x: Vec<f64> = self.x0.iter().zip(self.omega.as_slice()).map(|(a, w)| a + n as f64 * w).collect();
        let phase = if self.delta == 0.0 { 0.0 } else { self.delta * self.h.eval_complex(&x).re };
        Coin::coupled(self.lambda, phase)
    }

    pub fn coins(&self, n_lo: i64, sites: usize) -> Vec<Coin> {
        (0..sites as i64).map(|i| self.coin(n_lo + i)).collect()
    }

    /// Period-two model with lambda1 = lambda, lambda2 = 0 and frequency omega / 2.
    /// Its even coefficients are the negatives of the walk's, a unitary equivalence.
    pub fn mapped_model(&self) -> Result<ModelSpec> {
        let m = ModelSpec::period_two(self.lambda, 0.0, self.delta, self.h.clone(), self.omega.scaled(0.5))?;
        m.with_x0(self.x0.clone())
    }
}

/// Scan and gaps of the mapped period-two model; `params` defaults to `GapParams::for_model`.
pub fn walk_spectrum(model: &CoinModel, thetas: &[f64], n_iter: usize, params: Option<&GapParams>) -> Result<(SpectrumScan, Vec<GapReport>)> {
    let m = model.mapped_model()?;
    let s = scan(&m, thetas, n_iter)?;
    let g = detect_gaps(&m, &s, params.unwrap_or(&GapParams::for_model(&m)))?;
    Ok((s, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::circle_dist;
    use crate::spectrum::{theta_grid, wrap_arg};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    fn random_coin(rng: &mut ChaCha8Rng) -> Coin {
        let a = C64::from_polar(rng.gen_range(0.1..1.0), rng.gen_range(0.0..TAU));
        let b = C64::from_polar((1.0 - a.norm_sqr()).sqrt(), rng.gen_range(0.0..TAU));
        Coin::symmetric(a, b)
    }

    fn random_state(rng: &mut ChaCha8Rng, w: usize) -> WalkState {
        let mut s: WalkState = (0..w)
            .map(|_| [C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))])
            .collect();
        s[0] = [C64::default(); 2];
        s[w - 1] = [C64::default(); 2];
        s
    }

    fn delta_state(w: usize, site: usize, spin: usize) -> WalkState {
        let mut s = vec![[C64::default(); 2]; w];
        s[site][spin] = one();
        s
    }

    #[test]
    fn permutation_coin_shifts() {
        let coins = vec![Coin::identity(); 8];
        let s = step_state(&coins, &delta_state(8, 3, 0)).unwrap();
        assert_eq!(s, delta_state(8, 4, 0));
        let s = step_state(&coins, &delta_state(8, 3, 1)).unwrap();
        assert_eq!(s, delta_state(8, 2, 1));
        let w = build_walk(&coins, 0, one(), one()).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let shift = (i % 2 == 0 && j == i + 2) || (i % 2 == 1 && j + 2 == i);
                let fold = (i == 14 && j == 15) || (i == 1 && j == 0);
                let expect = if shift || fold { 1.0 } else { 0.0 };
                assert_eq!(w.matrix[(i, j)], C64::new(expect, 0.0), "{i} {j}");
            }
        }
    }

    #[test]
    fn boundary_contact_rejected() {
        let coins = vec![Coin::hadamard(); 8];
        assert!(matches!(step_state(&coins, &delta_state(8, 0, 0)), Err(Error::WindowBoundary)));
        assert!(matches!(step_state(&coins, &delta_state(8, 7, 1)), Err(Error::WindowBoundary)));
        assert!(step_state(&coins, &delta_state(7, 3, 1)).is_err());
    }

    #[test]
    fn hadamard_three_steps_match_matrix_power() {
        let coins = vec![Coin::hadamard(); 16];
        let w = build_walk(&coins, -8, one(), one()).unwrap();
        let mut s = delta_state(16, 8, 0);
        let mut v = state_to_vector(&s);
        let op = w.operator();
        for _ in 0..3 {
            s = step_state(&coins, &s).unwrap();
            v = &op * v;
        }
        let m = vector_to_state(&v);
        for n in 0..16 {
            for k in 0..2 {
                assert!((m[n][k] - s[n][k]).norm() < 1e-15);
            }
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s[11][0] - C64::new(h * h * h, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn pattern_matches_display() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let coins: Vec<Coin> = (0..64).map(|_| random_coin(&mut rng)).collect();
        let w = build_walk(&coins, 0, one(), one()).unwrap();
        let n = 128;
        for i in 0..n {
            for j in 0..n {
                let s = i / 2;
                let expect = match (i % 2, j as i64 - i as i64) {
                    (0, -1) => Some(coins[s].c21),
                    (0, 2) => Some(coins[s].c11),
                    (1, -2) => Some(coins[s].c22),
                    (1, 1) => Some(coins[s].c12),
                    _ => None,
                };
                let interior = i >= 2 && i < n - 2;
                match expect {
                    Some(c) if interior => assert_eq!(w.matrix[(i, j)], c),
                    None if interior => assert_eq!(w.matrix[(i, j)], C64::default(), "{i} {j}"),
                    _ => {}
                }
            }
        }
        assert!(w.unitarity_residual() < 1e-12);
    }

    #[test]
    fn matrix_equals_update_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let coins: Vec<Coin> = (0..32).map(|_| random_coin(&mut rng)).collect();
        let w = build_walk(&coins, 5, C64::from_polar(1.0, 0.3), C64::from_polar(1.0, -1.1)).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let s = random_state(&mut rng, 32);
            let a = step_state(&coins, &s).unwrap();
            let b = w.apply(&s).unwrap();
            for n in 0..32 {
                for k in 0..2 {
                    worst = worst.max((a[n][k] - b[n][k]).norm());
                }
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn norm_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coins: Vec<Coin> = (0..2100).map(|_| random_coin(&mut rng)).collect();
        let mut s = delta_state(2100, 1050, 0);
        s[1050][1] = C64::new(0.0, 1.0);
        let n0 = state_norm(&s);
        for _ in 0..1000 {
            s = step_state(&coins, &s).unwrap();
        }
        assert!((state_norm(&s) / n0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn non_unitary_coin_rejected() {
        let mut coins = vec![Coin::hadamard(); 8];
        coins[3].c11 *= 1.1;
        match build_walk(&coins, 10, one(), one()) {
            Err(Error::Coin { site, .. }) => assert_eq!(site, 13),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_real_coin() {
        let coins = vec![Coin::coupled(0.4, 0.0); 16];
        let d = cgmv_map(&coins, 0).unwrap();
        for (i, a) in d.alphas.iter().enumerate() {
            let expect = if i % 2 == 0 { C64::new(-0.4, 0.0) } else { C64::default() };
            assert_eq!(*a, expect);
        }
        assert!(d.phases.iter().all(|p| *p == one()));
        let r = verify_cgmv(&coins, 0, one(), one()).unwrap();
        assert!(r.interior < 1e-12 && r.full < 1e-12);
        let flipped: Vec<Coin> = (0..16).map(|_| Coin::new(C64::new(0.6, 0.0), C64::new(-0.8, 0.0), C64::new(0.8, 0.0), C64::new(0.6, 0.0))).collect();
        let d = cgmv_map(&flipped, 0).unwrap();
        assert!(d.alphas.iter().step_by(2).all(|a| (*a - 0.8).norm() < 1e-15));
    }

    #[test]
    fn random_symmetric_coins_conjugate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..50 {
            let coins: Vec<Coin> = (0..64).map(|_| random_coin(&mut rng)).collect();
            let bl = C64::from_polar(1.0, rng.gen_range(0.0..TAU));
            let br = C64::from_polar(1.0, rng.gen_range(0.0..TAU));
            let r = verify_cgmv(&coins, -32, bl, br).unwrap();
            assert!(r.interior < 1e-12 && r.full < 1e-12, "{r:?}");
            let d = cgmv_map(&coins, -32).unwrap();
            assert!(d.phases.iter().all(|p| (p.norm() - 1.0).abs() < 1e-14));
            for m in 0..64 {
                assert_eq!(d.alphas[2 * m + 1], C64::default());
                assert!((d.alphas[2 * m].norm() - coins[m].c21.norm()).abs() < 1e-14);
                let p = |i: i64| d.phase(i);
                let m = m as i64;
                assert!((p(2 * m + 1) - C64::from_polar(1.0, d.sigma2[m as usize]) * p(2 * m - 1)).norm() < 1e-14);
                assert!((p(2 * m + 2) - C64::from_polar(1.0, -d.sigma1[m as usize]) * p(2 * m)).norm() < 1e-14);
            }
            assert!(d.sigma1.iter().chain(&d.sigma2).all(|s| (0.0..TAU).contains(s)));
        }
    }

    #[test]
    fn broken_phases_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coins: Vec<Coin> = (0..32).map(|_| random_coin(&mut rng)).collect();
        let walk = build_walk(&coins, 0, one(), one()).unwrap();
        let mut d = cgmv_map(&coins, 0).unwrap();
        for n in 0..32 {
            d.phases[2 * n + 3] = C64::from_polar(1.0, d.sigma1[n]) * d.phases[2 * n + 1];
        }
        assert!(conjugation_residual(&walk, &d).unwrap().interior > 1e-2);
    }

    #[test]
    fn vanishing_diagonal_names_site() {
        let mut coins = vec![Coin::coupled(0.3, 0.0); 10];
        coins[4] = Coin::symmetric(C64::default(), one());
        match cgmv_map(&coins, 100) {
            Err(Error::Coin { site, reason }) => {
                assert_eq!(site, 104);
                assert!(reason.contains("diagonal"));
            }
            other => panic!("{other:?}"),
        }
        let bad = vec![Coin::new(one(), C64::default(), C64::default(), C64::new(0.0, 1.0)); 10];
        assert!(matches!(cgmv_map(&bad, 0), Err(Error::Coin { site: 0, .. })));
    }

    #[test]
    fn coin_model_maps_to_period_two() {
        let h = FourierPoly::cosine(&[1], 1.0);
        let cm = CoinModel::new(0.5, 0.3, h, Frequency::golden()).unwrap();
        let coins = cm.coins(0, 40);
        let d = cgmv_map(&coins, 0).unwrap();
        let m = cm.mapped_model().unwrap();
        for i in 0..80 {
            assert!((d.alphas[i] + m.alpha(i as i64)).norm() < 1e-14, "{i}");
        }
        let r = verify_cgmv(&coins, 0, one(), one()).unwrap();
        assert!(r.interior < 1e-12);
    }

    fn sorted_args(z: &[C64]) -> Vec<f64> {
        let mut a: Vec<f64> = z.iter().map(|v| wrap_arg(*v)).collect();
        a.sort_by(f64::total_cmp);
        a
    }

    #[test]
    fn walk_and_cmv_share_eigenvalues() {
        let cm = CoinModel::new(0.5, 0.2, FourierPoly::cosine(&[1], 1.0), Frequency::golden()).unwrap();
        let coins = cm.coins(0, 40);
        let bl = C64::from_polar(1.0, 0.7);
        let br = C64::from_polar(1.0, 2.1);
        let walk = build_walk(&coins, 0, bl, br).unwrap();
        let d = cgmv_map(&coins, 0).unwrap();
        let (l, r) = d.boundaries(bl, br);
        let e = CMVTruncation::from_coefficients(&d.alphas, l, r).unwrap();
        let (a, b) = (sorted_args(&walk.eigenvalues()), sorted_args(&e.eigenvalues()));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!(circle_dist(*x / TAU, *y / TAU) * TAU < 1e-10, "{x} {y}");
        }
    }

    #[test]
    fn free_walk_gaps() {
        let cm = CoinModel::new(0.5, 0.0, FourierPoly::zero(1), Frequency::golden()).unwrap();
        let (s, gaps) = walk_spectrum(&cm, &theta_grid(256), 20_000, None).unwrap();
        assert_eq!(s.thetas.len(), 256);
        assert_eq!(gaps.len(), 2, "{gaps:?}");
        let mut edges: Vec<(f64, f64)> = gaps.iter().map(|g| (g.theta_minus, g.theta_plus)).collect();
        edges.sort_by(|a, b| a.0.total_cmp(&b.0));
        let e = PI / 6.0;
        assert!((edges[0].0 + e).abs() < 2e-3 && (edges[0].1 - e).abs() < 2e-3, "{edges:?}");
        assert!((edges[1].0 - (PI - e)).abs() < 2e-3 && (edges[1].1 - (PI + e)).abs() < 2e-3, "{edges:?}");
    }

    #[test]
    fn weak_coupling_fills_circle() {
        let cm = CoinModel::new(1e-3, 0.0, FourierPoly::zero(1), Frequency::golden()).unwrap();
        let (_, gaps) = walk_spectrum(&cm, &theta_grid(128), 20_000, None).unwrap();
        assert!(gaps.iter().all(|g| g.width() < 0.06), "{gaps:?}");
    }
}
