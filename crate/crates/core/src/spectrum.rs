//! Gap detection and labelling from cocycle observables, and the truncated CMV oracle.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{doubled_rotation, rotation_and_lyapunov, rotation_bisect, VerblunskyOrbit};
use crate::error::{Error, Result};
use crate::model::{circle_dist, frac, lattice_box, Frequency, ModelSpec};

const TAU: f64 = 2.0 * PI;

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumScan {
    pub thetas: Vec<f64>,
    /// One-step rotation number, unreduced (in [0, 1/2]).
    pub rho: Vec<f64>,
    pub le: Vec<f64>,
    pub n_iter: usize,
}

/// Cell-centred grid (j + 1/2) 2 pi / m, which avoids theta = 0.
pub fn theta_grid(m: usize) -> Vec<f64> {
    (0..m).map(|j| (j as f64 + 0.5) * TAU / m as f64).collect()
}

pub fn scan(model: &ModelSpec, thetas: &[f64], n_iter: usize) -> Result<SpectrumScan> {
    if thetas.is_empty() {
        return Err(Error::InvalidModel("empty grid".into()));
    }
    if thetas.windows(2).any(|w| w[1] <= w[0]) || thetas[0] < 0.0 || *thetas.last().unwrap() >= TAU {
        return Err(Error::InvalidModel("theta grid must be strictly increasing inside [0, 2 pi)".into()));
    }
    let orbit = VerblunskyOrbit::new(model, n_iter);
    scan_orbit(&orbit, thetas, n_iter)
}

pub fn scan_orbit(orbit: &VerblunskyOrbit, thetas: &[f64], n_iter: usize) -> Result<SpectrumScan> {
    let rows: Vec<(f64, f64)> = thetas
        .par_iter()
        .map(|&t| rotation_and_lyapunov(&orbit.one_step(t), n_iter).map(|(r, l)| (r.lifted, l.value)))
        .collect::<Result<_>>()?;
    Ok(SpectrumScan {
        thetas: thetas.to_vec(),
        rho: rows.iter().map(|r| r.0).collect(),
        le: rows.iter().map(|r| r.1).collect(),
        n_iter,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Label {
    pub k: Vec<i64>,
    pub half_shift: bool,
}

impl Label {
    /// Value of the label on R/Z.
    pub fn value(&self, omega: &Frequency) -> f64 {
        frac(omega.dot(&self.k) + if self.half_shift { 0.5 } else { 0.0 })
    }
}

/// Label whose value is closest to 2 * rot on the circle, within tol.
pub fn label_of(rot: f64, omega: &Frequency, kmax: i64, tol: f64, allow_half_shift: bool) -> Option<Label> {
    let target = 2.0 * rot;
    let mut best: Option<(f64, i64, Label)> = None;
    let shifts: &[bool] = if allow_half_shift { &[false, true] } else { &[false] };
    for k in lattice_box(omega.dim(), kmax.max(0)) {
        let l1: i64 = k.iter().map(|v| v.abs()).sum();
        for &hs in shifts {
            let lab = Label { k: k.clone(), half_shift: hs };
            let d = circle_dist(target, lab.value(omega));
            let better = match &best {
                None => true,
                Some((bd, bl, blab)) => {
                    d < *bd - 1e-15 || ((d - bd).abs() <= 1e-15 && (l1, &lab.k, hs) < (*bl, &blab.k, blab.half_shift))
                }
            };
            if better {
                best = Some((d, l1, lab));
            }
        }
    }
    best.filter(|(d, _, _)| *d <= tol).map(|(_, _, l)| l)
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    /// Endpoints in radians; theta_minus is negative for a gap containing theta = 0.
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub label: Option<Label>,
    /// One-step rotation number on the gap, mod 1/2.
    pub rot_value: f64,
    pub le_floor: f64,
    /// Narrower than twice the refinement tolerance.
    pub collapsed: bool,
    pub warning: Option<String>,
}

impl GapReport {
    pub fn width(&self) -> f64 {
        self.theta_plus - self.theta_minus
    }

    /// Depth of an angle inside the gap (positive inside, negative outside).
    pub fn depth(&self, phi: f64) -> f64 {
        let rel = (phi - self.theta_minus).rem_euclid(TAU);
        if rel <= self.width() {
            rel.min(self.width() - rel)
        } else {
            -(rel - self.width()).min(TAU - rel)
        }
    }

    pub fn contains(&self, phi: f64) -> bool {
        self.depth(phi) > 0.0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GapParams {
    pub le_threshold: f64,
    pub tol_rho: f64,
    pub refine_tol: f64,
    pub kmax: i64,
    pub label_tol: f64,
    pub allow_half_shift: bool,
}

impl Default for GapParams {
    fn default() -> Self {
        Self { le_threshold: 2e-3, tol_rho: 1e-3, refine_tol: 1e-4, kmax: 10, label_tol: 1e-3, allow_half_shift: false }
    }
}

impl GapParams {
    pub fn for_model(model: &ModelSpec) -> Self {
        Self { allow_half_shift: model.is_period_two(), ..Self::default() }
    }
}

/// Uniformly hyperbolic runs of the scan, refined by bisection on the rotation number.
pub fn detect_gaps(model: &ModelSpec, scan: &SpectrumScan, p: &GapParams) -> Result<Vec<GapReport>> {
    let orbit = VerblunskyOrbit::new(model, scan.n_iter);
    detect_gaps_orbit(&orbit, &model.omega, scan, p)
}

pub fn detect_gaps_orbit(orbit: &VerblunskyOrbit, omega: &Frequency, scan: &SpectrumScan, p: &GapParams) -> Result<Vec<GapReport>> {
    let m = scan.thetas.len();
    let n = scan.n_iter;
    let hyper: Vec<bool> = scan.le.iter().map(|&l| l > p.le_threshold).collect();
    if !hyper.iter().any(|&h| h) {
        return Ok(Vec::new());
    }
    if hyper.iter().all(|&h| h) {
        return Err(Error::Degenerate("every grid point is uniformly hyperbolic".into()));
    }
    // unwrap coordinates so that a run crossing the seam is contiguous
    let start = (0..m).find(|&j| !hyper[j]).unwrap();
    let idx: Vec<usize> = (1..=m).map(|j| (start + j) % m).collect();
    let theta_at = |pos: usize| scan.thetas[idx[pos]] + if idx[pos] <= start { TAU } else { 0.0 };
    let level_at = |pos: usize| 2.0 * scan.rho[idx[pos]] + if idx[pos] <= start { 1.0 } else { 0.0 };
    let level = |t: f64| -> Result<f64> {
        let wraps = (t / TAU).floor();
        Ok(doubled_rotation(orbit, t - wraps * TAU, n)? + wraps)
    };
    let prev_theta = |pos: usize| if pos == 0 { scan.thetas[start] } else { theta_at(pos - 1) };

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut pos = 0;
    while pos < m {
        if !hyper[idx[pos]] {
            pos += 1;
            continue;
        }
        let s = pos;
        while pos + 1 < m && hyper[idx[pos + 1]] && (level_at(pos + 1) - level_at(pos)).abs() <= p.tol_rho {
            pos += 1;
        }
        runs.push((s, pos));
        pos += 1;
    }

    let tau = 4.0 / n as f64;
    let mut gaps = Vec::with_capacity(runs.len());
    for (s, e) in runs {
        let mut vals: Vec<f64> = (s..=e).map(level_at).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let r = vals[vals.len() / 2];
        let lo_a = prev_theta(s);
        let lo_b = theta_at(s);
        let hi_a = theta_at(e);
        let hi_b = if e + 1 < m { theta_at(e + 1) } else { theta_at(e) + TAU / m as f64 };
        let mut warning = None;
        let theta_minus = rotation_bisect(level, r - tau, lo_a, lo_b, p.refine_tol, tau).unwrap_or_else(|_| {
            warning = Some("lower edge not refined".to_string());
            0.5 * (lo_a + lo_b)
        });
        let theta_plus = rotation_bisect(level, r + tau, hi_a, hi_b, p.refine_tol, tau).unwrap_or_else(|_| {
            warning = Some("upper edge not refined".to_string());
            0.5 * (hi_a + hi_b)
        });
        let shift = if theta_plus >= TAU { TAU } else { 0.0 };
        let rot_value = frac(r) / 2.0;
        let label = label_of(rot_value, omega, p.kmax, p.label_tol, p.allow_half_shift);
        if label.is_none() {
            warning = Some(format!("no label within {} for 2 rot = {}", p.label_tol, frac(r)));
        }
        let le_floor = (s..=e).map(|q| scan.le[idx[q]]).fold(f64::INFINITY, f64::min);
        gaps.push(GapReport {
            theta_minus: theta_minus - shift,
            theta_plus: theta_plus - shift,
            label,
            rot_value,
            le_floor,
            collapsed: theta_plus - theta_minus < 2.0 * p.refine_tol,
            warning,
        });
    }
    gaps.sort_by(|a, b| a.theta_minus.partial_cmp(&b.theta_minus).unwrap());
    Ok(gaps)
}

/// Finite unitary block of the extended CMV matrix with unimodular boundary coefficients.
#[derive(Clone, Debug)]
pub struct CMVTruncation {
    pub matrix: DMatrix<C64>,
    pub alphas: Vec<C64>,
    pub left: C64,
    pub right: C64,
}

fn theta_block(alpha: C64) -> [[C64; 2]; 2] {
    let r = C64::new((1.0 - alpha.norm_sqr()).max(0.0).sqrt(), 0.0);
    [[alpha.conj(), r], [r, -alpha]]
}

impl CMVTruncation {
    /// Builds L M from alpha_0..alpha_{N-1}; alpha_{-1} and alpha_{N-1} are replaced by
    /// the unimodular values `left` and `right`.
    pub fn from_coefficients(alphas: &[C64], left: C64, right: C64) -> Result<Self> {
        let n = alphas.len();
        if !n.is_multiple_of(2) || n < 8 {
            return Err(Error::TruncationSize(n));
        }
        for b in [left, right] {
            if (b.norm() - 1.0).abs() > 1e-14 {
                return Err(Error::BoundaryPhase(b.norm()));
            }
        }
        for a in &alphas[..n - 1] {
            if a.norm() >= 1.0 {
                return Err(Error::NotInDisk(a.norm()));
            }
        }
        let mut l = DMatrix::<C64>::zeros(n, n);
        let mut mm = DMatrix::<C64>::zeros(n, n);
        for j in 0..n / 2 {
            let t = theta_block(alphas[2 * j]);
            for (p, q) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                l[(2 * j + p, 2 * j + q)] = t[p][q];
            }
        }
        for j in 0..n / 2 - 1 {
            let t = theta_block(alphas[2 * j + 1]);
            for (p, q) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                mm[(2 * j + 1 + p, 2 * j + 1 + q)] = t[p][q];
            }
        }
        mm[(0, 0)] = -left;
        mm[(n - 1, n - 1)] = right.conj();
        let matrix = &l * &mm;
        let mut stored = alphas.to_vec();
        stored[n - 1] = right;
        Ok(Self { matrix, alphas: stored, left, right })
    }

    pub fn from_model(model: &ModelSpec, n: usize, boundary_phase: C64) -> Result<Self> {
        if !n.is_multiple_of(2) || n < 8 {
            return Err(Error::TruncationSize(n));
        }
        Self::from_coefficients(&model.alphas(0, n), boundary_phase, boundary_phase)
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn unitarity_residual(&self) -> f64 {
        let n = self.size();
        let g = self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(n, n);
        g.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        unitary_eigenvalues(&self.matrix)
    }
}

/// Eigenvalues of a unitary matrix via the Hermitian combination Re U + c Im U and
/// Rayleigh quotients; near-degenerate clusters are resolved on their invariant subspace.
pub fn unitary_eigenvalues(u: &DMatrix<C64>) -> Vec<C64> {
    let n = u.nrows();
    let c = C64::new(0.754_877_666_246_692_7, 0.0);
    let ua = u.adjoint();
    let h = (u + &ua).map(|z| z * 0.5) + (u - &ua).map(|z| z * C64::new(0.0, -0.5) * c);
    let h = h.clone().adjoint().map(|z| z * 0.5) + h.map(|z| z * 0.5);
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && eig.eigenvalues[order[j]] - eig.eigenvalues[order[j - 1]] < 1e-7 {
            j += 1;
        }
        let cols: Vec<_> = order[i..j].iter().map(|&q| eig.eigenvectors.column(q).into_owned()).collect();
        let v = DMatrix::from_columns(&cols);
        let small = v.adjoint() * u * &v;
        if small.nrows() == 1 {
            out.push(small[(0, 0)]);
        } else {
            let ev = nalgebra::Schur::new(small).eigenvalues().expect("complex Schur form is triangular");
            out.extend(ev.iter().copied());
        }
        i = j;
    }
    out.sort_by(|a, b| wrap_arg(*a).partial_cmp(&wrap_arg(*b)).unwrap());
    out
}

/// Argument in [0, 2 pi).
pub fn wrap_arg(z: C64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub eigen_theta: f64,
    pub gap_index: usize,
    pub depth: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub n_eigenvalues: usize,
    pub margin: f64,
    pub violations: Vec<Violation>,
    pub max_depth: f64,
    /// (lower bin edge, count) for the signed eigenvalue-to-gap distance; negative inside a gap.
    pub histogram: Vec<(f64, usize)>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const HIST_EDGES: [f64; 9] = [f64::NEG_INFINITY, -0.1, -0.02, -0.01, -0.001, 0.0, 0.001, 0.01, 0.1];

pub fn oracle_compare(gaps: &[GapReport], eigenvalues: &[C64], margin: f64) -> OracleReport {
    let mut violations = Vec::new();
    let mut counts = [0usize; HIST_EDGES.len()];
    let mut max_depth = f64::NEG_INFINITY;
    for z in eigenvalues {
        let phi = wrap_arg(*z);
        let mut best = f64::NEG_INFINITY;
        for (gi, g) in gaps.iter().enumerate() {
            let d = g.depth(phi);
            if d > margin {
                violations.push(Violation { eigen_theta: phi, gap_index: gi, depth: d });
            }
            best = best.max(d);
        }
        if best.is_finite() {
            max_depth = max_depth.max(best);
            let signed = -best;
            let bin = HIST_EDGES.iter().rposition(|&e| signed >= e).unwrap_or(0);
            counts[bin] += 1;
        }
    }
    OracleReport {
        n_eigenvalues: eigenvalues.len(),
        margin,
        violations,
        max_depth: if max_depth.is_finite() { max_depth } else { 0.0 },
        histogram: HIST_EDGES.iter().copied().zip(counts).collect(),
    }
}

/// Hausdorff distance between two finite subsets of the circle (angles in radians).
pub fn circle_hausdorff(a: &[f64], b: &[f64]) -> f64 {
    let d = |x: f64, y: f64| {
        let r = (x - y).rem_euclid(TAU);
        r.min(TAU - r)
    };
    let one = |p: &[f64], q: &[f64]| p.iter().map(|&x| q.iter().map(|&y| d(x, y)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    one(a, b).max(one(b, a))
}

/// Grid points of the scan lying outside every gap.
pub fn spectrum_points(scan: &SpectrumScan, gaps: &[GapReport]) -> Vec<f64> {
    scan.thetas.iter().copied().filter(|&t| !gaps.iter().any(|g| g.contains(t))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FourierPoly;

    fn qp(lambda: f64, delta: f64) -> ModelSpec {
        ModelSpec::quasi_periodic(lambda, delta, FourierPoly::cosine(&[1], 1.0), Frequency::golden()).unwrap()
    }

    #[test]
    fn label_examples() {
        let w = Frequency::golden();
        assert_eq!(label_of(0.0, &w, 10, 1e-3, false), Some(Label { k: vec![0], half_shift: false }));
        let g = w.as_slice()[0];
        assert_eq!(label_of(g / 2.0, &w, 10, 1e-3, false), Some(Label { k: vec![1], half_shift: false }));
        assert_eq!(label_of(0.25, &w, 10, 1e-3, true), Some(Label { k: vec![0], half_shift: true }));
        assert_eq!(label_of(0.25, &w, 0, 1e-3, false), None);
    }

    #[test]
    fn gap_depth_wraps() {
        let g = GapReport {
            theta_minus: -PI / 3.0,
            theta_plus: PI / 3.0,
            label: None,
            rot_value: 0.0,
            le_floor: 0.1,
            collapsed: false,
            warning: None,
        };
        assert!((g.depth(0.0) - PI / 3.0).abs() < 1e-12);
        assert!((g.depth(TAU - 0.1) - (PI / 3.0 - 0.1)).abs() < 1e-12);
        assert!(g.depth(PI) < 0.0);
    }

    #[test]
    fn free_scan_has_no_gaps() {
        let m = qp(0.0, 0.0);
        let s = scan(&m, &theta_grid(64), 20_000).unwrap();
        for (t, r) in s.thetas.iter().zip(&s.rho) {
            assert!((r - t / (4.0 * PI)).abs() < 1e-4);
        }
        assert!(s.le.iter().all(|l| l.abs() < 1e-8));
        assert!(detect_gaps(&m, &s, &GapParams::default()).unwrap().is_empty());
    }

    #[test]
    fn scan_rejects_empty_grid() {
        assert!(scan(&qp(0.5, 0.0), &[], 2000).is_err());
    }

    #[test]
    fn constant_case_single_gap() {
        let m = qp(0.5, 0.0);
        let s = scan(&m, &theta_grid(128), 100_000).unwrap();
        let gaps = detect_gaps(&m, &s, &GapParams::default()).unwrap();
        assert_eq!(gaps.len(), 1, "{gaps:?}");
        let g = &gaps[0];
        assert!((g.theta_minus + PI / 3.0).abs() < 1e-3 && (g.theta_plus - PI / 3.0).abs() < 1e-3, "{g:?}");
        assert_eq!(g.label, Some(Label { k: vec![0], half_shift: false }));
    }

    #[test]
    fn free_truncation_is_unitary() {
        let t = CMVTruncation::from_coefficients(&vec![C64::new(0.0, 0.0); 16], C64::new(1.0, 0.0), C64::new(1.0, 0.0)).unwrap();
        assert!(t.unitarity_residual() < 1e-12);
        let ev = t.eigenvalues();
        assert_eq!(ev.len(), 16);
        assert!(ev.iter().all(|z| (z.norm() - 1.0).abs() < 1e-10));
    }

    #[test]
    fn truncation_pattern_n8() {
        let al: Vec<C64> = (0..8).map(|j| C64::from_polar(0.1 + 0.05 * j as f64, 0.3 * j as f64)).collect();
        let bl = C64::from_polar(1.0, 0.4);
        let br = C64::from_polar(1.0, -1.1);
        let t = CMVTruncation::from_coefficients(&al, bl, br).unwrap();
        let a = |j: i64| match j {
            -1 => bl,
            7 => br,
            _ => al[j as usize],
        };
        let r = |j: i64| C64::new((1.0 - a(j).norm_sqr()).max(0.0).sqrt(), 0.0);
        let mut want = DMatrix::<C64>::zeros(8, 8);
        let mut put = |i: i64, j: i64, v: C64| {
            if (0..8).contains(&i) && (0..8).contains(&j) {
                want[(i as usize, j as usize)] = v;
            }
        };
        for m in 0..4i64 {
            let (e, o) = (2 * m, 2 * m + 1);
            put(e, e - 1, a(e).conj() * r(e - 1));
            put(e, e, -a(e).conj() * a(e - 1));
            put(e, e + 1, r(e) * a(e + 1).conj());
            put(e, e + 2, r(e) * r(e + 1));
            put(o, e - 1, r(e) * r(e - 1));
            put(o, e, -r(e) * a(e - 1));
            put(o, e + 1, -a(e) * a(e + 1).conj());
            put(o, e + 2, -a(e) * r(e + 1));
        }
        let diff = (&t.matrix - &want).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-14, "{diff}");
        assert!(t.unitarity_residual() < 1e-12);
    }

    #[test]
    fn rejects_bad_truncations() {
        let m = qp(0.5, 0.0);
        assert!(matches!(CMVTruncation::from_model(&m, 9, C64::new(1.0, 0.0)), Err(Error::TruncationSize(9))));
        assert!(matches!(CMVTruncation::from_model(&m, 16, C64::new(0.5, 0.0)), Err(Error::BoundaryPhase(_))));
    }

    #[test]
    fn corrupted_gap_is_flagged() {
        let m = qp(0.5, 0.0);
        let t = CMVTruncation::from_model(&m, 64, C64::new(1.0, 0.0)).unwrap();
        let bad = GapReport {
            theta_minus: 2.0,
            theta_plus: 3.0,
            label: None,
            rot_value: 0.0,
            le_floor: 0.1,
            collapsed: false,
            warning: None,
        };
        let rep = oracle_compare(&[bad], &t.eigenvalues(), 0.02);
        assert!(!rep.passed());
        let rep = oracle_compare(&[], &t.eigenvalues(), 0.02);
        assert!(rep.passed());
    }
}
