//! Probability-only form of the Born rule.
//!
//! A reference measurement `{E_i}` of `d^2` rank-one effects turns a state into
//! the probability vector `p(i) = tr(rho E_i)` and a measurement `{F_j}` into
//! the conditional probabilities `r(j|i) = tr(F_j Pi_i)`, where
//! `Pi_i = E_i / tr(E_i)` is the post-measurement state after outcome `i`.
//! The Born probabilities are then recovered from `(p, r)` alone through the
//! transfer matrix `M_ik = tr(E_i Pi_k)`:
//!
//! ```text
//! q(j) = sum_k r(j|k) (M^-1 p)_k
//! ```
//!
//! For a SIC this collapses to `q(j) = sum_i ((d+1) p(i) - 1/d) r(j|i)`, which
//! differs from the classical law of total probability `q(j) = sum_i p(i) r(j|i)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operator::{
    derive_seed, eigenvalues, normalize_to_povm, random_pure_state_from, rng_from_seed,
    trace_product, validate_density, CMatrix, DensityOperator, HilbertDim, Ket, Povm, ProbVector,
    C64, PROB_NEG_TOL,
};
use crate::wh;

pub const RANK_ONE_TOL: f64 = 1e-10;
pub const GRAM_RANK_RTOL: f64 = 1e-10;
pub const MAX_REFERENCE_CONDITION: f64 = 1e10;
pub const INVERSE_CHECK_TOL: f64 = 1e-8;

/// Attempts made by [`random_rank1_reference`] before giving up.
const RANDOM_REFERENCE_ATTEMPTS: u64 = 32;

/// A minimal informationally complete, rank-one reference measurement.
#[derive(Clone, Debug)]
pub struct ReferenceMeasurement {
    dim: HilbertDim,
    elements: Povm,
    projectors: Vec<CMatrix>,
    transfer: DMatrix<f64>,
    transfer_inverse: DMatrix<f64>,
    condition_number: f64,
    sic_certified: bool,
}

pub fn make_reference(povm: Povm) -> Result<ReferenceMeasurement> {
    let dim = povm.dim();
    let d = dim.get();
    let n = dim.squared();
    if povm.len() != n {
        return Err(Error::WrongOutcomeCount {
            expected: n,
            actual: povm.len(),
        });
    }
    for (index, e) in povm.elements().iter().enumerate() {
        let ev = eigenvalues(e);
        let second_eigenvalue = ev[d - 2];
        if ev[d - 1] <= RANK_ONE_TOL || second_eigenvalue.abs() > RANK_ONE_TOL {
            return Err(Error::NotRankOne {
                index,
                second_eigenvalue,
            });
        }
    }

    let elements = povm.elements();
    let gram = DMatrix::from_fn(n, n, |i, k| trace_product(&elements[i], &elements[k]).re);
    let sv = gram.singular_values();
    let largest = sv.max();
    let gram_rank = sv.iter().filter(|s| **s > GRAM_RANK_RTOL * largest).count();
    if gram_rank < n {
        return Err(Error::NotInformationallyComplete {
            gram_rank,
            needed: n,
        });
    }

    let traces: Vec<f64> = elements.iter().map(|e| e.trace().re).collect();
    let projectors: Vec<CMatrix> = elements
        .iter()
        .zip(&traces)
        .map(|(e, t)| e.unscale(*t))
        .collect();
    let transfer = DMatrix::from_fn(n, n, |i, k| gram[(i, k)] / traces[k]);
    let sv = transfer.singular_values();
    let condition_number = sv.max() / sv.min();
    if !(condition_number <= MAX_REFERENCE_CONDITION) {
        return Err(Error::IllConditionedReference {
            condition: condition_number,
        });
    }
    let transfer_inverse = transfer
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditionedReference {
            condition: f64::INFINITY,
        })?;
    let residual = (&transfer * &transfer_inverse - DMatrix::<f64>::identity(n, n)).amax();
    if residual > INVERSE_CHECK_TOL {
        return Err(Error::IllConditionedReference {
            condition: condition_number,
        });
    }
    Ok(ReferenceMeasurement {
        dim,
        elements: povm,
        projectors,
        transfer,
        transfer_inverse,
        condition_number,
        sic_certified: false,
    })
}

impl ReferenceMeasurement {
    /// The SIC generated by `fiducial`, which must certify at `tolerance`.
    pub fn sic(fiducial: &Ket, tolerance: f64) -> Result<Self> {
        let cert = wh::sic_certify(fiducial, tolerance)?;
        if !cert.passed {
            return Err(Error::InvalidArgument(format!(
                "fiducial is not a SIC: max deviation {:.3e} >= {tolerance:.1e}",
                cert.candidate.max_sic_deviation
            )));
        }
        let mut reference = make_reference(wh::wh_povm(fiducial)?)?;
        reference.sic_certified = true;
        Ok(reference)
    }

    /// Marks the reference as a SIC after checking `tr(E_i) = 1/d` and
    /// `tr(Pi_i Pi_k) = 1/(d+1)` for `i != k`, all within `tolerance`.
    pub fn certify_as_sic(mut self, tolerance: f64) -> Result<Self> {
        let d = self.dim.get() as f64;
        let mut worst = 0.0f64;
        for (i, e) in self.elements.elements().iter().enumerate() {
            worst = worst.max((e.trace().re - 1.0 / d).abs());
            for k in 0..i {
                let overlap = trace_product(&self.projectors[i], &self.projectors[k]).re;
                worst = worst.max((overlap - 1.0 / (d + 1.0)).abs());
            }
        }
        if !(worst < tolerance) {
            return Err(Error::InvalidArgument(format!(
                "reference is not a SIC: max deviation {worst:.3e} >= {tolerance:.1e}"
            )));
        }
        self.sic_certified = true;
        Ok(self)
    }

    pub fn dim(&self) -> HilbertDim {
        self.dim
    }

    pub fn elements(&self) -> &Povm {
        &self.elements
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    pub fn transfer(&self) -> &DMatrix<f64> {
        &self.transfer
    }

    pub fn transfer_inverse(&self) -> &DMatrix<f64> {
        &self.transfer_inverse
    }

    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    /// Whether this reference was built from a certified SIC fiducial.
    pub fn is_sic_certified(&self) -> bool {
        self.sic_certified
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    /// Expansion coefficients `c = M^-1 p` of the state in the projectors
    /// `Pi_k`. These may be negative.
    pub fn quasi_weights(&self, p: &ProbVector) -> Result<DVector<f64>> {
        self.check_len("p", p.len())?;
        let p = DVector::from_column_slice(p.values());
        let w = &self.transfer_inverse * &p;
        // one step of iterative refinement
        let residual = &p - &self.transfer * &w;
        Ok(w + &self.transfer_inverse * residual)
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "{what} has {len} entries, reference has {}",
                self.len()
            )));
        }
        Ok(())
    }

    fn check_dim(&self, dim: HilbertDim) -> Result<()> {
        if dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim.get(),
                actual: dim.get(),
            });
        }
        Ok(())
    }
}

/// A random rank-one IC reference: `d^2` Haar-random pure states rescaled by
/// `S^{-1/2}` so that they sum to the identity.
///
/// Draws that are ill conditioned are redrawn from derived seeds.
pub fn random_rank1_reference(dim: HilbertDim, seed: u64) -> Result<ReferenceMeasurement> {
    let mut last = None;
    for attempt in 0..RANDOM_REFERENCE_ATTEMPTS {
        let s = if attempt == 0 {
            seed
        } else {
            derive_seed(seed, 0x5245_4645, attempt)
        };
        let mut rng = rng_from_seed(s);
        let positives = (0..dim.squared())
            .map(|_| random_pure_state_from(dim, &mut rng).projector())
            .collect();
        match normalize_to_povm(dim, positives).and_then(make_reference) {
            Ok(r) => return Ok(r),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Conditional probabilities `r(j|i)`: row `i` is the distribution over the
/// actual outcomes `j` given reference outcome `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct CondProbMatrix {
    rows: Vec<ProbVector>,
}

impl CondProbMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if width == 0 {
            return Err(Error::ShapeMismatch("empty conditional matrix".into()));
        }
        let mut checked = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} entries, expected {width}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| **v > 1.0 + PROB_NEG_TOL) {
                return Err(Error::InvalidProbabilities {
                    reason: format!("row {i} has entry {v} > 1"),
                });
            }
            checked.push(ProbVector::new(row)?);
        }
        Ok(CondProbMatrix { rows: checked })
    }

    pub fn rows(&self) -> &[ProbVector] {
        &self.rows
    }

    /// Number of reference outcomes `i`.
    pub fn n_reference(&self) -> usize {
        self.rows.len()
    }

    /// Number of actual outcomes `j`.
    pub fn n_outcomes(&self) -> usize {
        self.rows[0].len()
    }

    /// `r(j|i)`.
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.rows[i].values()[j]
    }
}

/// `p(i) = tr(rho E_i)`.
pub fn state_to_prob(reference: &ReferenceMeasurement, rho: &DensityOperator) -> Result<ProbVector> {
    reference.check_dim(rho.dim())?;
    crate::operator::born_probabilities(rho, reference.elements())
}

/// Inverts `p(i) = tr(rho E_i)`.
pub fn prob_to_state(reference: &ReferenceMeasurement, p: &ProbVector) -> Result<DensityOperator> {
    let weights = reference.quasi_weights(p)?;
    let d = reference.dim.get();
    let rho = reference
        .projectors
        .iter()
        .zip(weights.iter())
        .fold(CMatrix::zeros(d, d), |acc, (pi, c)| acc + pi * C64::new(*c, 0.0));
    validate_density(rho).map_err(|e| Error::NotAValidState {
        reason: Box::new(e),
    })
}

/// `r(j|i) = tr(F_j Pi_i)`.
pub fn povm_to_cond(reference: &ReferenceMeasurement, povm: &Povm) -> Result<CondProbMatrix> {
    reference.check_dim(povm.dim())?;
    let rows = reference
        .projectors
        .iter()
        .map(|pi| {
            povm.elements()
                .iter()
                .map(|f| trace_product(f, pi).re)
                .collect()
        })
        .collect();
    CondProbMatrix::new(rows)
}

/// `q(j) = sum_k r(j|k) (M^-1 p)_k`, valid for any rank-one IC reference.
pub fn urgleichung_general(
    reference: &ReferenceMeasurement,
    p: &ProbVector,
    r: &CondProbMatrix,
) -> Result<ProbVector> {
    reference.check_len("r", r.n_reference())?;
    let weights = reference.quasi_weights(p)?;
    mix(weights.as_slice(), r, COMPUTED_PROB_TOL_PER_CONDITION * reference.condition_number)
}

/// `q(j) = sum_i ((d+1) p(i) - 1/d) r(j|i)`, valid for a SIC reference.
pub fn urgleichung_sic(dim: HilbertDim, p: &ProbVector, r: &CondProbMatrix) -> Result<ProbVector> {
    let n = dim.squared();
    if p.len() != n || r.n_reference() != n {
        return Err(Error::ShapeMismatch(format!(
            "need {n} reference outcomes, got p: {}, r: {}",
            p.len(),
            r.n_reference()
        )));
    }
    let (scale, offset) = sic_coefficients(dim);
    let weights: Vec<f64> = p.values().iter().map(|pi| scale * pi - offset).collect();
    mix(&weights, r, 0.0)
}

/// The pair `(d + 1, 1/d)`.
pub fn sic_coefficients(dim: HilbertDim) -> (f64, f64) {
    let d = dim.get() as f64;
    (d + 1.0, 1.0 / d)
}

/// Law of total probability: `q(j) = sum_i p(i) r(j|i)`.
pub fn classical_law(p: &ProbVector, r: &CondProbMatrix) -> Result<ProbVector> {
    if p.len() != r.n_reference() {
        return Err(Error::ShapeMismatch(format!(
            "p has {} entries, r has {} rows",
            p.len(),
            r.n_reference()
        )));
    }
    mix(p.values(), r, 0.0)
}

/// Rounding in `(p, r)` is amplified by up to the condition number of the
/// transfer matrix; outputs of the general rule are checked with this much
/// slack per unit of condition number.
pub const COMPUTED_PROB_TOL_PER_CONDITION: f64 = 1e-14;

fn mix(weights: &[f64], r: &CondProbMatrix, tol: f64) -> Result<ProbVector> {
    let mut q = vec![0.0; r.n_outcomes()];
    for (w, row) in weights.iter().zip(r.rows()) {
        for (qj, rj) in q.iter_mut().zip(row.values()) {
            *qj += w * rj;
        }
    }
    ProbVector::from_computed(q, tol)
}

/// Both predictions for the same `(rho, F)` and their largest disagreement.
#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub gap: f64,
    pub q_quantum: ProbVector,
    pub q_classical: ProbVector,
}

pub fn classicality_report(
    reference: &ReferenceMeasurement,
    rho: &DensityOperator,
    povm: &Povm,
) -> Result<GapReport> {
    let p = state_to_prob(reference, rho)?;
    let r = povm_to_cond(reference, povm)?;
    let q_quantum = urgleichung_general(reference, &p, &r)?;
    let q_classical = classical_law(&p, &r)?;
    let gap = q_quantum
        .values()
        .iter()
        .zip(q_classical.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(GapReport {
        gap,
        q_quantum,
        q_classical,
    })
}

/// `max_j |q_quantum(j) - q_classical(j)|`.
pub fn classicality_gap(
    reference: &ReferenceMeasurement,
    rho: &DensityOperator,
    povm: &Povm,
) -> Result<f64> {
    Ok(classicality_report(reference, rho, povm)?.gap)
}
