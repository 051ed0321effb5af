//! Finite-dimensional operator algebra and validated quantum types.
//!
//! Kets, density operators and POVMs are immutable once constructed; every
//! constructor checks the physical invariants at the tolerances below.
//! Random generators draw from a seeded ChaCha8 stream so that a
//! `(dim, seed, parameters)` triple always yields the same bits.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const MIN_DIM: usize = 2;
pub const DEFAULT_DIM_CAP: usize = 8;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const KET_NORM_TOL: f64 = 1e-12;
pub const PROB_NEG_TOL: f64 = 1e-12;
pub const PROB_SUM_TOL: f64 = 1e-10;

/// Largest condition number tolerated when normalizing a random POVM.
pub const MAX_NORMALIZER_CONDITION: f64 = 1e12;

/// Hilbert-space dimension, `MIN_DIM <= d <= cap`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct HilbertDim(usize);

impl HilbertDim {
    pub fn new(d: usize) -> Result<Self> {
        Self::with_cap(d, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(d: usize, cap: usize) -> Result<Self> {
        if d < MIN_DIM || d > cap {
            return Err(Error::DimensionOutOfRange {
                dim: d,
                min: MIN_DIM,
                max: cap,
            });
        }
        Ok(HilbertDim(d))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    /// Number of outcomes of a minimal informationally complete measurement.
    #[inline]
    pub fn squared(self) -> usize {
        self.0 * self.0
    }
}

impl TryFrom<usize> for HilbertDim {
    type Error = Error;

    fn try_from(d: usize) -> Result<Self> {
        HilbertDim::new(d)
    }
}

impl From<HilbertDim> for usize {
    fn from(d: HilbertDim) -> usize {
        d.0
    }
}

impl std::fmt::Display for HilbertDim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// A unit vector in `C^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    dim: HilbertDim,
    amplitudes: CVector,
}

impl Ket {
    /// Wraps `amplitudes`, requiring unit norm within `KET_NORM_TOL`.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let dim = HilbertDim::new(amplitudes.len())?;
        let deviation = (amplitudes.norm_squared() - 1.0).abs();
        if deviation > KET_NORM_TOL {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(Ket { dim, amplitudes })
    }

    /// Normalizes `amplitudes` before wrapping.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { deviation: 1.0 });
        }
        Ket::new(amplitudes.unscale(norm))
    }

    pub fn from_slice(amplitudes: &[C64]) -> Result<Self> {
        Ket::new(CVector::from_column_slice(amplitudes))
    }

    /// Computational basis vector `|index>`.
    pub fn basis(dim: HilbertDim, index: usize) -> Self {
        let mut v = CVector::zeros(dim.get());
        v[index % dim.get()] = C64::new(1.0, 0.0);
        Ket { dim, amplitudes: v }
    }

    pub fn dim(&self) -> HilbertDim {
        self.dim
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// `|psi><psi|`.
    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `<psi|op|psi>`.
    pub fn expectation(&self, op: &CMatrix) -> C64 {
        self.amplitudes.dotc(&(op * &self.amplitudes))
    }

    /// Tensor product `|self> (x) |other>`, subject to the default dimension cap.
    pub fn tensor(&self, other: &Ket) -> Result<Ket> {
        let d = self.dim.get() * other.dim.get();
        if d > DEFAULT_DIM_CAP {
            return Err(Error::DimensionOverflow {
                dim: d,
                cap: DEFAULT_DIM_CAP,
            });
        }
        Ket::normalized(self.amplitudes.kronecker(&other.amplitudes))
    }
}

/// A Hermitian, positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    dim: HilbertDim,
    matrix: CMatrix,
}

impl DensityOperator {
    pub fn from_ket(ket: &Ket) -> Self {
        DensityOperator {
            dim: ket.dim(),
            matrix: ket.projector(),
        }
    }

    pub fn maximally_mixed(dim: HilbertDim) -> Self {
        let d = dim.get();
        DensityOperator {
            dim,
            matrix: CMatrix::identity(d, d).unscale(d as f64),
        }
    }

    pub fn dim(&self) -> HilbertDim {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        trace_product(&self.matrix, &self.matrix).re
    }
}

/// Validates `matrix` as a density operator.
///
/// Eigenvalues in `[-POSITIVITY_TOL, 0)` are clipped to zero and the result
/// renormalized; anything more negative is rejected.
pub fn validate_density(matrix: CMatrix) -> Result<DensityOperator> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let dim = HilbertDim::new(rows)?;
    let deviation = hermitian_deviation(&matrix);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let matrix = hermitize(&matrix);
    let eigen = matrix.clone().symmetric_eigen();
    let min_eigenvalue = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eigenvalue < -POSITIVITY_TOL {
        return Err(Error::NotPositive { min_eigenvalue });
    }
    let trace = matrix.trace();
    let deviation = ((trace.re - 1.0).powi(2) + trace.im.powi(2)).sqrt();
    if deviation > TRACE_TOL {
        return Err(Error::TraceNotOne { deviation });
    }
    if min_eigenvalue >= 0.0 {
        return Ok(DensityOperator { dim, matrix });
    }
    let clipped = eigen.eigenvalues.map(|v| v.max(0.0));
    let total: f64 = clipped.iter().sum();
    let vecs = &eigen.eigenvectors;
    let diag = CMatrix::from_diagonal(&clipped.map(|v| C64::new(v / total, 0.0)));
    let rebuilt = hermitize(&(vecs * diag * vecs.adjoint()));
    Ok(DensityOperator {
        dim,
        matrix: rebuilt,
    })
}

/// A finite list of positive semidefinite operators summing to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    dim: HilbertDim,
    elements: Vec<CMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        let first = elements.first().ok_or(Error::TooFewOutcomes { min: 1, actual: 0 })?;
        let d = first.nrows();
        let dim = HilbertDim::new(d)?;
        let mut sum = CMatrix::zeros(d, d);
        let mut checked = Vec::with_capacity(elements.len());
        for (index, e) in elements.into_iter().enumerate() {
            let wrap = |reason: Error| Error::InvalidPovmElement {
                index,
                reason: Box::new(reason),
            };
            if e.shape() != (d, d) {
                return Err(wrap(Error::DimensionMismatch {
                    expected: d,
                    actual: e.nrows().max(e.ncols()),
                }));
            }
            let deviation = hermitian_deviation(&e);
            if deviation > HERMITIAN_TOL {
                return Err(wrap(Error::NotHermitian { deviation }));
            }
            let e = hermitize(&e);
            let min_eigenvalue = min_eigenvalue(&e);
            if min_eigenvalue < -POSITIVITY_TOL {
                return Err(wrap(Error::NotPositive { min_eigenvalue }));
            }
            sum += &e;
            checked.push(e);
        }
        let deviation = max_abs_diff(&sum, &CMatrix::identity(d, d));
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotComplete { deviation });
        }
        Ok(Povm {
            dim,
            elements: checked,
        })
    }

    /// Rank-one projective measurement onto an orthonormal basis.
    pub fn from_basis(basis: &[Ket]) -> Result<Self> {
        Povm::new(basis.iter().map(Ket::projector).collect())
    }

    /// Measurement in the computational basis.
    pub fn computational(dim: HilbertDim) -> Self {
        let elements = (0..dim.get())
            .map(|i| Ket::basis(dim, i).projector())
            .collect();
        Povm { dim, elements }
    }

    pub fn trivial(dim: HilbertDim) -> Self {
        let d = dim.get();
        Povm {
            dim,
            elements: vec![CMatrix::identity(d, d)],
        }
    }

    pub fn dim(&self) -> HilbertDim {
        self.dim
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// A probability vector; entries within `PROB_NEG_TOL` below zero are clipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        ProbVector::validated(values, PROB_NEG_TOL, PROB_SUM_TOL)
    }

    /// Accepts a computed distribution whose entries may be off by up to
    /// `tol` (negative entries and total), then clips and renormalizes.
    pub fn from_computed(values: Vec<f64>, tol: f64) -> Result<Self> {
        let tol = tol.max(PROB_SUM_TOL);
        let mut p = ProbVector::validated(values, tol, tol)?;
        let sum: f64 = p.0.iter().sum();
        for v in &mut p.0 {
            *v /= sum;
        }
        Ok(p)
    }

    fn validated(values: Vec<f64>, neg_tol: f64, sum_tol: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidProbabilities {
                reason: "empty".into(),
            });
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < -neg_tol)
        {
            return Err(Error::InvalidProbabilities {
                reason: format!("entry {i} = {v:e}"),
            });
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > sum_tol {
            return Err(Error::InvalidProbabilities {
                reason: format!("sum = {sum:.15}"),
            });
        }
        Ok(ProbVector(values.into_iter().map(|v| v.max(0.0)).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        ProbVector(vec![1.0 / n as f64; n])
    }

    /// Point mass on `index`.
    pub fn delta(n: usize, index: usize) -> Self {
        let mut v = vec![0.0; n];
        v[index] = 1.0;
        ProbVector(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbVector::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Vec<f64> {
        p.0
    }
}

/// Born rule: `q(j) = tr(rho F_j)`.
pub fn born_probabilities(rho: &DensityOperator, povm: &Povm) -> Result<ProbVector> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim().get(),
            actual: povm.dim().get(),
        });
    }
    let q = povm
        .elements()
        .iter()
        .map(|f| trace_product(rho.matrix(), f).re)
        .collect();
    ProbVector::new(q)
}

/// Position of `(i_a, i_b)` in a bipartite space; shared by [`tensor`] and
/// every partial trace in the crate.
#[inline]
pub fn bipartite_index(i_a: usize, i_b: usize, dim_b: usize) -> usize {
    i_a * dim_b + i_b
}

/// Traces out the first factor of an operator on `C^dim_a (x) C^dim_b`.
pub fn partial_trace_first(m: &CMatrix, dim_a: usize, dim_b: usize) -> CMatrix {
    CMatrix::from_fn(dim_b, dim_b, |r, c| {
        (0..dim_a)
            .map(|a| m[(bipartite_index(a, r, dim_b), bipartite_index(a, c, dim_b))])
            .sum()
    })
}

/// Traces out the second factor.
pub fn partial_trace_second(m: &CMatrix, dim_a: usize, dim_b: usize) -> CMatrix {
    CMatrix::from_fn(dim_a, dim_a, |r, c| {
        (0..dim_b)
            .map(|b| m[(bipartite_index(r, b, dim_b), bipartite_index(c, b, dim_b))])
            .sum()
    })
}

/// Kronecker product under the default dimension cap.
///
/// Index convention: `(i_a, i_b) -> i_a * dim(b) + i_b`.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    tensor_with_cap(a, b, DEFAULT_DIM_CAP)
}

pub fn tensor_with_cap(a: &CMatrix, b: &CMatrix, cap: usize) -> Result<CMatrix> {
    let rows = a.nrows() * b.nrows();
    let cols = a.ncols() * b.ncols();
    if rows.max(cols) > cap {
        return Err(Error::DimensionOverflow {
            dim: rows.max(cols),
            cap,
        });
    }
    Ok(a.kronecker(b))
}

/// `tr(AB)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `max |A_ij - conj(A_ji)|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).unscale(2.0)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitize(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn min_eigenvalue(m: &CMatrix) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `m^power` for a Hermitian positive definite `m`, with its condition number.
pub(crate) fn psd_power(m: &CMatrix, power: f64) -> (CMatrix, f64) {
    let eigen = hermitize(m).symmetric_eigen();
    let max = eigen.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    let diag = eigen.eigenvalues.map(|v| C64::new(v.max(0.0).powf(power), 0.0));
    let vecs = &eigen.eigenvectors;
    (vecs * CMatrix::from_diagonal(&diag) * vecs.adjoint(), condition)
}

/// Seeded generator behind every random draw in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 mix of `(base, stream, index)` into an independent seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn complex_normal<R: rand::Rng>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

fn gaussian_matrix<R: rand::Rng>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    // column-major fill, fixed for reproducibility
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Haar-random pure state.
pub fn random_pure_state(dim: HilbertDim, seed: u64) -> Ket {
    let mut rng = rng_from_seed(seed);
    random_pure_state_from(dim, &mut rng)
}

pub(crate) fn random_pure_state_from<R: rand::Rng>(dim: HilbertDim, rng: &mut R) -> Ket {
    loop {
        let v = CVector::from_fn(dim.get(), |_, _| complex_normal(rng));
        if let Ok(k) = Ket::normalized(v) {
            return k;
        }
    }
}

/// `G G^dagger / tr(G G^dagger)` with `G` a `d x rank` complex Gaussian matrix.
pub fn random_density(dim: HilbertDim, rank: usize, seed: u64) -> Result<DensityOperator> {
    if rank == 0 || rank > dim.get() {
        return Err(Error::BadRank {
            rank,
            dim: dim.get(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let g = gaussian_matrix(dim.get(), rank, &mut rng);
    let gg = &g * g.adjoint();
    let tr = gg.trace().re;
    validate_density(hermitize(&gg.unscale(tr)))
}

/// Random POVM `{S^{-1/2} G_k G_k^dagger S^{-1/2}}` with `S = sum_k G_k G_k^dagger`.
pub fn random_povm(dim: HilbertDim, n_outcomes: usize, seed: u64) -> Result<Povm> {
    if n_outcomes < 2 {
        return Err(Error::TooFewOutcomes {
            min: 2,
            actual: n_outcomes,
        });
    }
    let d = dim.get();
    let mut rng = rng_from_seed(seed);
    let positives: Vec<CMatrix> = (0..n_outcomes)
        .map(|_| {
            let g = gaussian_matrix(d, d, &mut rng);
            &g * g.adjoint()
        })
        .collect();
    normalize_to_povm(dim, positives)
}

/// Rescales positive operators so that they sum to the identity.
pub(crate) fn normalize_to_povm(dim: HilbertDim, positives: Vec<CMatrix>) -> Result<Povm> {
    let d = dim.get();
    let s = positives
        .iter()
        .fold(CMatrix::zeros(d, d), |acc, p| acc + p);
    let (s_inv_sqrt, condition) = psd_power(&s, -0.5);
    if !(condition <= MAX_NORMALIZER_CONDITION) {
        return Err(Error::SingularNormalizer { condition });
    }
    let elements = positives
        .iter()
        .map(|p| hermitize(&(&s_inv_sqrt * p * &s_inv_sqrt)))
        .collect();
    Povm::new(elements)
}
