//! Weyl–Heisenberg displacements and the SIC fiducial search.
//!
//! The displacement operators are `D_jk = tau^(jk) X^j Z^k` with
//! `X|m> = |m+1 mod d>`, `Z|m> = omega^m |m>`, `omega = exp(2 pi i/d)` and
//! `tau = -exp(i pi/d)`. A unit vector `phi` is a SIC fiducial when
//! `|<phi|D_jk|phi>|^2 = 1/(d+1)` for every nonzero `(j, k)`; equivalently when
//! it attains the lower bound `(d-1)/(d+1)` of the frame potential
//! `sum_{(j,k) != 0} |<phi|D_jk|phi>|^4`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator::{
    random_pure_state_from, rng_from_seed, CMatrix, CVector, HilbertDim, Ket, Povm, C64,
};

pub const DEFAULT_CERTIFY_TOL: f64 = 1e-8;
pub const DEFAULT_GRADIENT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

/// Restarts are evaluated in fixed-size batches; the search stops after the
/// first batch containing a certified fiducial.
pub const RESTART_BATCH: usize = 8;

/// Excesses closer than this are treated as tied; the lower restart index wins.
const TIE_WINDOW: f64 = 1e-12;

/// Index `(j, k)` of a displacement operator, both reduced mod `d`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct DisplacementIndex {
    j: usize,
    k: usize,
}

impl DisplacementIndex {
    pub fn new(dim: HilbertDim, j: usize, k: usize) -> Self {
        let d = dim.get();
        DisplacementIndex { j: j % d, k: k % d }
    }

    pub fn j(self) -> usize {
        self.j
    }

    pub fn k(self) -> usize {
        self.k
    }

    pub fn is_identity(self) -> bool {
        self.j == 0 && self.k == 0
    }

    /// All `d^2` indices in orbit order `i = j*d + k`.
    pub fn all(dim: HilbertDim) -> impl Iterator<Item = DisplacementIndex> {
        let d = dim.get();
        (0..d).flat_map(move |j| (0..d).map(move |k| DisplacementIndex { j, k }))
    }
}

/// `tau^n` for `tau = -exp(i pi / d)`.
fn tau_power(d: usize, n: usize) -> C64 {
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    C64::from_polar(sign, PI * (n % (2 * d)) as f64 / d as f64)
}

/// `omega^n` for `omega = exp(2 pi i / d)`.
fn omega_power(d: usize, n: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * (n % d) as f64 / d as f64)
}

pub fn displacement(dim: HilbertDim, idx: DisplacementIndex) -> CMatrix {
    let d = dim.get();
    let phase = tau_power(d, idx.j * idx.k);
    let mut m = CMatrix::zeros(d, d);
    for col in 0..d {
        m[((col + idx.j) % d, col)] = phase * omega_power(d, idx.k * col);
    }
    m
}

/// `D|v>` for the displacement `idx`, without building the matrix.
fn apply_displacement(d: usize, idx: DisplacementIndex, v: &CVector) -> CVector {
    let phase = tau_power(d, idx.j * idx.k);
    let mut out = CVector::zeros(d);
    for m in 0..d {
        out[(m + idx.j) % d] = phase * omega_power(d, idx.k * m) * v[m];
    }
    out
}

/// `D^dagger|v>`.
fn apply_displacement_adjoint(d: usize, idx: DisplacementIndex, v: &CVector) -> CVector {
    let phase = tau_power(d, idx.j * idx.k).conj();
    let mut out = CVector::zeros(d);
    for m in 0..d {
        out[m] = phase * omega_power(d, idx.k * m).conj() * v[(m + idx.j) % d];
    }
    out
}

/// `<phi|D_jk|phi>` for every index in orbit order.
pub fn displacement_overlaps(fiducial: &Ket) -> Vec<C64> {
    let d = fiducial.dim().get();
    let v = fiducial.amplitudes();
    DisplacementIndex::all(fiducial.dim())
        .map(|idx| v.dotc(&apply_displacement(d, idx, v)))
        .collect()
}

/// Orbit projectors `D_jk |phi><phi| D_jk^dagger`, index `j*d + k`.
pub fn wh_orbit(fiducial: &Ket) -> Vec<CMatrix> {
    let d = fiducial.dim().get();
    DisplacementIndex::all(fiducial.dim())
        .map(|idx| {
            let w = apply_displacement(d, idx, fiducial.amplitudes());
            &w * w.adjoint()
        })
        .collect()
}

/// The covariant POVM `{Pi_jk / d}` generated by `fiducial`.
pub fn wh_povm(fiducial: &Ket) -> Result<Povm> {
    let d = fiducial.dim().get() as f64;
    Povm::new(wh_orbit(fiducial).into_iter().map(|p| p.unscale(d)).collect())
}

pub fn frame_potential(fiducial: &Ket) -> f64 {
    potential_of(fiducial.amplitudes())
}

fn potential_of(v: &CVector) -> f64 {
    let d = v.len();
    let dim = HilbertDim::with_cap(d, usize::MAX).expect("dimension checked by Ket");
    DisplacementIndex::all(dim)
        .filter(|idx| !idx.is_identity())
        .map(|idx| v.dotc(&apply_displacement(d, idx, v)).norm_sqr().powi(2))
        .sum()
}

/// Ambient real gradient of `sum |g|^4 - 2 shift |g|^2` over nonzero displacements,
/// packed as a complex vector (`d/dRe + i d/dIm`). `shift = 0` gives the frame
/// potential itself.
fn ambient_gradient_shifted(v: &CVector, shift: f64) -> CVector {
    let d = v.len();
    let dim = HilbertDim::with_cap(d, usize::MAX).expect("dimension checked by Ket");
    let mut grad = CVector::zeros(d);
    for idx in DisplacementIndex::all(dim).filter(|idx| !idx.is_identity()) {
        let dv = apply_displacement(d, idx, v);
        let ddv = apply_displacement_adjoint(d, idx, v);
        let g = v.dotc(&dv);
        let weight = 4.0 * (g.norm_sqr() - shift);
        grad += (dv * g.conj() + ddv * g) * C64::new(weight, 0.0);
    }
    grad
}

fn ambient_gradient(v: &CVector) -> CVector {
    ambient_gradient_shifted(v, 0.0)
}

/// `sum over nonzero (j,k) of (|<v|D_jk|v>|^2 - 1/(d+1))^2`.
///
/// For unit `v` this equals `frame_potential - (d-1)/(d+1)`, because
/// `sum over all (j,k) of |<v|D_jk|v>|^2 = d |v|^4`. It keeps full relative
/// precision near a SIC, where the potential itself has run out of digits.
fn excess_of(v: &CVector) -> f64 {
    let d = v.len();
    let target = 1.0 / (d as f64 + 1.0);
    let dim = HilbertDim::with_cap(d, usize::MAX).expect("dimension checked by Ket");
    DisplacementIndex::all(dim)
        .filter(|idx| !idx.is_identity())
        .map(|idx| (v.dotc(&apply_displacement(d, idx, v)).norm_sqr() - target).powi(2))
        .sum()
}

/// Gradient of the frame potential on the unit sphere.
fn sphere_gradient(v: &CVector) -> CVector {
    let target = 1.0 / (v.len() as f64 + 1.0);
    let g = ambient_gradient_shifted(v, target);
    let radial = v.dotc(&g).re;
    g - v * C64::new(radial, 0.0)
}

/// Ambient gradient of the frame potential, exposed for derivative checks.
pub fn frame_potential_gradient(fiducial: &Ket) -> CVector {
    ambient_gradient(fiducial.amplitudes())
}

/// `max over nonzero (j,k) of | |<phi|D_jk|phi>|^2 - 1/(d+1) |`.
pub fn max_sic_deviation(fiducial: &Ket) -> f64 {
    let target = 1.0 / (fiducial.dim().get() as f64 + 1.0);
    displacement_overlaps(fiducial)
        .iter()
        .skip(1)
        .map(|g| (g.norm_sqr() - target).abs())
        .fold(0.0, f64::max)
}

/// A fiducial candidate together with its figures of merit.
#[derive(Clone, Debug, PartialEq)]
pub struct FiducialCandidate {
    pub dim: HilbertDim,
    pub vector: Ket,
    pub frame_potential: f64,
    pub max_sic_deviation: f64,
    pub seed: u64,
    pub restarts_used: usize,
    pub gradient_norm: f64,
    pub restart_index: usize,
}

impl FiducialCandidate {
    pub fn from_vector(vector: Ket, seed: u64, restarts_used: usize) -> Self {
        let gradient_norm = sphere_gradient(vector.amplitudes()).norm();
        FiducialCandidate {
            dim: vector.dim(),
            frame_potential: frame_potential(&vector),
            max_sic_deviation: max_sic_deviation(&vector),
            vector,
            seed,
            restarts_used,
            gradient_norm,
            restart_index: 0,
        }
    }

    pub fn certify(&self, tolerance: f64) -> SicCertificate {
        SicCertificate {
            passed: self.max_sic_deviation < tolerance,
            tolerance,
            candidate: self.clone(),
        }
    }

    /// `(d-1)/(d+1)`, the minimum of the frame potential.
    pub fn potential_lower_bound(&self) -> f64 {
        potential_lower_bound(self.dim)
    }
}

pub fn potential_lower_bound(dim: HilbertDim) -> f64 {
    let d = dim.get() as f64;
    (d - 1.0) / (d + 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SicCertificate {
    pub candidate: FiducialCandidate,
    pub passed: bool,
    pub tolerance: f64,
}

pub fn sic_certify(fiducial: &Ket, tolerance: f64) -> Result<SicCertificate> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "certification tolerance must be positive, got {tolerance}"
        )));
    }
    Ok(FiducialCandidate::from_vector(fiducial.clone(), 0, 0).certify(tolerance))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOptions {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub certify_tol: f64,
    /// Stop after the first batch that contains a certified fiducial.
    pub stop_when_certified: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            gradient_tol: DEFAULT_GRADIENT_TOL,
            certify_tol: DEFAULT_CERTIFY_TOL,
            stop_when_certified: true,
        }
    }
}

#[derive(Clone, Debug)]
struct RestartOutcome {
    index: usize,
    vector: CVector,
    excess: f64,
    gradient_norm: f64,
    converged: bool,
}

/// Projected gradient descent from one start point.
///
/// The first trial step of each line search is the Barzilai–Borwein length
/// (falling back to the previous accepted step), halved until the Armijo
/// condition holds. The line search works on the excess over the lower bound,
/// which differs from the potential by a constant on the sphere.
///
/// Reaching `gradient_tol` marks the run converged. Descent then continues for
/// at most `max_iterations` more steps, or until the gradient is another
/// three orders smaller: in d = 3 the SIC set is a continuous family and the
/// potential grows only quartically off it, so a small gradient alone leaves
/// the overlaps off by ~1e-8.
fn descend(start: CVector, opts: &SearchOptions) -> Descent {
    const ARMIJO: f64 = 1e-4;
    const MAX_HALVINGS: usize = 60;
    const POLISH_FACTOR: f64 = 1e-3;

    let mut x = start;
    let mut f = excess_of(&x);
    let mut g = sphere_gradient(&x);
    let mut step = 0.1;
    let mut prev: Option<(CVector, CVector)> = None;
    let mut converged_at: Option<usize> = None;
    let mut iterations = 0;

    loop {
        let gnorm = g.norm();
        if converged_at.is_none() && gnorm < opts.gradient_tol {
            converged_at = Some(iterations);
        }
        let done = match converged_at {
            Some(at) => gnorm < opts.gradient_tol * POLISH_FACTOR || iterations - at >= opts.max_iterations || f == 0.0,
            None => iterations >= opts.max_iterations,
        };
        if done {
            break;
        }
        if let Some((px, pg)) = &prev {
            let s = &x - px;
            let y = &g - pg;
            let sy = s.dotc(&y).re;
            if sy > 0.0 {
                step = s.norm_squared() / sy;
            }
        }
        let g2 = gnorm * gnorm;
        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = &x - &g * C64::new(t, 0.0);
            let trial = trial.unscale(trial.norm());
            let ft = excess_of(&trial);
            if ft <= f - ARMIJO * t * g2 {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((nx, nf)) = accepted else {
            break;
        };
        iterations += 1;
        step = t;
        let ng = sphere_gradient(&nx);
        prev = Some((std::mem::replace(&mut x, nx), std::mem::replace(&mut g, ng)));
        f = nf;
    }
    let gradient_norm = g.norm();
    Descent {
        converged: converged_at.is_some() || gradient_norm < opts.gradient_tol,
        vector: x,
        excess: f,
        gradient_norm,
    }
}

struct Descent {
    vector: CVector,
    excess: f64,
    gradient_norm: f64,
    converged: bool,
}

fn run_restart(dim: HilbertDim, seed: u64, index: usize, opts: &SearchOptions) -> RestartOutcome {
    let mut rng = rng_from_seed(seed.wrapping_add(index as u64));
    let start = random_pure_state_from(dim, &mut rng).amplitudes().clone();
    let Descent {
        vector,
        excess,
        gradient_norm,
        converged,
    } = descend(start, opts);
    RestartOutcome {
        index,
        vector,
        excess,
        gradient_norm,
        converged,
    }
}

/// Multi-start minimization of the frame potential.
pub fn sic_search(dim: HilbertDim, seed: u64, restarts: usize) -> Result<FiducialCandidate> {
    sic_search_with(dim, seed, restarts, &SearchOptions::default())
}

pub fn sic_search_with(
    dim: HilbertDim,
    seed: u64,
    restarts: usize,
    opts: &SearchOptions,
) -> Result<FiducialCandidate> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let mut outcomes: Vec<RestartOutcome> = Vec::with_capacity(restarts);
    let mut start = 0;
    while start < restarts {
        let end = (start + RESTART_BATCH).min(restarts);
        let batch: Vec<RestartOutcome> = (start..end)
            .into_par_iter()
            .map(|i| run_restart(dim, seed, i, opts))
            .collect();
        outcomes.extend(batch);
        start = end;
        // cheap pre-screen; the candidate is certified properly below
        let found = outcomes
            .iter()
            .any(|o| o.converged && o.excess.sqrt() < opts.certify_tol);
        if opts.stop_when_certified && found {
            break;
        }
    }
    let restarts_used = outcomes.len();

    let converged: Vec<&RestartOutcome> = outcomes.iter().filter(|o| o.converged).collect();
    if converged.is_empty() {
        let best_gradient_norm = outcomes
            .iter()
            .map(|o| o.gradient_norm)
            .fold(f64::INFINITY, f64::min);
        return Err(Error::NoConvergence { best_gradient_norm });
    }
    let min = converged
        .iter()
        .map(|o| o.excess)
        .fold(f64::INFINITY, f64::min);
    let best = converged
        .iter()
        .find(|o| o.excess <= min + TIE_WINDOW)
        .expect("minimum is attained");

    let vector = Ket::normalized(best.vector.clone())?;
    let mut candidate = FiducialCandidate::from_vector(vector, seed, restarts_used);
    candidate.restart_index = best.index;
    Ok(candidate)
}

fn registry() -> &'static Vec<Ket> {
    static REGISTRY: OnceLock<Vec<Ket>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let s3 = 1.0 / 3f64.sqrt();
        // qubit: Bloch vector (1,1,1)/sqrt(3)
        let qubit = Ket::normalized(CVector::from_vec(vec![
            C64::new(((1.0 + s3) / 2.0).sqrt(), 0.0),
            C64::from_polar(((1.0 - s3) / 2.0).sqrt(), PI / 4.0),
        ]));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let qutrit = Ket::normalized(CVector::from_vec(vec![
            C64::new(0.0, 0.0),
            C64::new(h, 0.0),
            C64::new(-h, 0.0),
        ]));
        [qubit, qutrit]
            .into_iter()
            .filter_map(|k| k.ok())
            .filter(|k| max_sic_deviation(k) < 1e-10)
            .collect()
    })
}

/// Built-in fiducial for `dim`, if one ships (d = 2, 3). Entries are
/// certified at tolerance 1e-10 when the registry is first touched.
pub fn known_fiducial(dim: HilbertDim) -> Option<Ket> {
    registry().iter().find(|k| k.dim() == dim).cloned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{max_abs_diff, random_density, random_pure_state};

    fn d(n: usize) -> HilbertDim {
        HilbertDim::new(n).unwrap()
    }

    #[test]
    fn qubit_displacements() {
        let z = displacement(d(2), DisplacementIndex::new(d(2), 0, 1));
        let mut expected = CMatrix::zeros(2, 2);
        expected[(0, 0)] = C64::new(1.0, 0.0);
        expected[(1, 1)] = C64::new(-1.0, 0.0);
        assert!(max_abs_diff(&z, &expected) < 1e-15);

        let x = displacement(d(2), DisplacementIndex::new(d(2), 1, 0));
        assert!(x[(0, 0)].norm() < 1e-15 && x[(1, 1)].norm() < 1e-15);
        assert!((x[(1, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((x[(0, 1)] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn displacements_are_unitary() {
        for n in 2..=8 {
            for idx in DisplacementIndex::all(d(n)) {
                let m = displacement(d(n), idx);
                let prod = &m * m.adjoint();
                assert!(max_abs_diff(&prod, &CMatrix::identity(n, n)) < 1e-12);
            }
        }
    }

    #[test]
    fn matrix_free_application_matches_matrix() {
        let k = random_pure_state(d(5), 3);
        for idx in DisplacementIndex::all(d(5)) {
            let m = displacement(d(5), idx);
            let a = &m * k.amplitudes();
            let b = apply_displacement(5, idx, k.amplitudes());
            assert!((a - b).norm() < 1e-13);
            let a = m.adjoint() * k.amplitudes();
            let b = apply_displacement_adjoint(5, idx, k.amplitudes());
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn group_average_is_depolarizing() {
        for n in 2..=5 {
            let rho = random_density(d(n), n, 17).unwrap();
            let mut acc = CMatrix::zeros(n, n);
            for idx in DisplacementIndex::all(d(n)) {
                let m = displacement(d(n), idx);
                acc += &m * rho.matrix() * m.adjoint();
            }
            let acc = acc.unscale((n * n) as f64);
            let expected = CMatrix::identity(n, n).unscale(n as f64);
            assert!(max_abs_diff(&acc, &expected) < 1e-10);
        }
    }

    #[test]
    fn orbit_sums_to_identity() {
        for n in 2..=5 {
            let k = random_pure_state(d(n), 40 + n as u64);
            let orbit = wh_orbit(&k);
            assert_eq!(orbit.len(), n * n);
            let sum = orbit.iter().fold(CMatrix::zeros(n, n), |a, p| a + p).unscale(n as f64);
            assert!(max_abs_diff(&sum, &CMatrix::identity(n, n)) < 1e-10);
            for p in &orbit {
                assert!((p.trace().re - 1.0).abs() < 1e-10);
                let ev = crate::operator::eigenvalues(p);
                assert!(ev[n - 2].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn orbit_of_basis_vector() {
        let orbit = wh_orbit(&Ket::basis(d(2), 0));
        let p0 = Ket::basis(d(2), 0).projector();
        let p1 = Ket::basis(d(2), 1).projector();
        let n0 = orbit.iter().filter(|p| max_abs_diff(p, &p0) < 1e-12).count();
        let n1 = orbit.iter().filter(|p| max_abs_diff(p, &p1) < 1e-12).count();
        assert_eq!((n0, n1), (2, 2));
    }

    #[test]
    fn potential_hand_values() {
        assert!((frame_potential(&Ket::basis(d(2), 0)) - 1.0).abs() < 1e-15);
        let tetra = known_fiducial(d(2)).unwrap();
        assert!((frame_potential(&tetra) - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn potential_ignores_global_phase() {
        let k = random_pure_state(d(4), 8);
        let rotated = Ket::new(k.amplitudes() * C64::from_polar(1.0, 0.7)).unwrap();
        assert!((frame_potential(&k) - frame_potential(&rotated)).abs() < 1e-12);
    }

    #[test]
    fn potential_respects_lower_bound() {
        for n in 2..=6 {
            let bound = potential_lower_bound(d(n));
            for seed in 0..1000 {
                let k = random_pure_state(d(n), seed);
                assert!(frame_potential(&k) >= bound - 1e-9);
            }
        }
    }

    /// Central differences, step 1e-6, against the analytic gradient.
    #[test]
    fn gradient_matches_finite_differences() {
        for n in [2usize, 3, 5] {
            let v = random_pure_state(d(n), 77).amplitudes().clone();
            let grad = ambient_gradient(&v);
            let h = 1e-6;
            for i in 0..n {
                for (part, unit) in [(0, C64::new(1.0, 0.0)), (1, C64::new(0.0, 1.0))] {
                    let mut plus = v.clone();
                    let mut minus = v.clone();
                    plus[i] += unit * h;
                    minus[i] -= unit * h;
                    let fd = (potential_of(&plus) - potential_of(&minus)) / (2.0 * h);
                    let an = if part == 0 { grad[i].re } else { grad[i].im };
                    let scale = an.abs().max(1e-3);
                    assert!((fd - an).abs() / scale < 1e-5, "d={n} i={i} part={part}: {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn excess_is_shifted_potential() {
        for n in 2..=6 {
            let k = random_pure_state(d(n), 5);
            let lhs = excess_of(k.amplitudes());
            let rhs = frame_potential(&k) - potential_lower_bound(d(n));
            assert!((lhs - rhs).abs() < 1e-13);
        }
    }

    #[test]
    fn sphere_gradients_agree() {
        let v = random_pure_state(d(4), 12).amplitudes().clone();
        let g = ambient_gradient(&v);
        let tangent = &g - &v * C64::new(v.dotc(&g).re, 0.0);
        assert!((tangent - sphere_gradient(&v)).norm() < 1e-12);
    }

    #[test]
    fn certify_examples() {
        let tetra = known_fiducial(d(2)).unwrap();
        assert!(sic_certify(&tetra, 1e-8).unwrap().passed);
        let zero = sic_certify(&Ket::basis(d(2), 0), 1e-8).unwrap();
        assert!(!zero.passed);
        assert!((zero.candidate.max_sic_deviation - 2.0 / 3.0).abs() < 1e-12);
        assert!(sic_certify(&Ket::basis(d(3), 0), 10.0).unwrap().passed);
        assert!(sic_certify(&tetra, 0.0).is_err());
    }

    #[test]
    fn registry_entries_certify() {
        let q = known_fiducial(d(3)).unwrap();
        assert!(max_sic_deviation(&q) < 1e-10);
        assert!((frame_potential(&q) - 0.5).abs() < 1e-12);
        assert!(known_fiducial(d(4)).is_none());
    }

    #[test]
    fn search_qubit() {
        let c = sic_search(d(2), 0, 10).unwrap();
        assert!((c.frame_potential - 1.0 / 3.0).abs() < 1e-9);
        assert!(c.max_sic_deviation < 1e-8);
        assert!(c.restarts_used <= 10);
    }

    #[test]
    fn search_qutrit() {
        let c = sic_search(d(3), 0, 20).unwrap();
        assert!((c.frame_potential - 0.5).abs() < 1e-9);
    }

    #[test]
    fn search_is_deterministic() {
        let a = sic_search(d(3), 4, 9).unwrap();
        let b = sic_search(d(3), 4, 9).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| sic_search(d(3), 4, 9).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn search_rejects_zero_restarts() {
        assert!(sic_search(d(2), 0, 0).is_err());
    }

    #[test]
    fn tiny_iteration_cap_reports_no_convergence() {
        let opts = SearchOptions {
            max_iterations: 1,
            ..SearchOptions::default()
        };
        assert!(matches!(
            sic_search_with(d(4), 0, 2, &opts),
            Err(Error::NoConvergence { .. })
        ));
    }
}
