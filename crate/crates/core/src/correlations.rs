//! Correlation tables `p(x,y|a,b) = <psi| A^a_x (x) B^b_y |psi>`, the CHSH
//! expression, no-signalling, steering and the spin-3/2 embedding.
//!
//! Conventions:
//! - bipartite index `(i_a, i_b) -> i_a * d_b + i_b` (see [`bipartite_index`]);
//! - CHSH outcome values: the first effect of each POVM is `+1`, the second `-1`;
//! - the spin-3/2 basis `|0>,|1>,|2>,|3>` is identified with `|00>,|01>,|10>,|11>`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use serde::Serialize;

use crate::born::CondProbMatrix;
use crate::error::{Error, Result};
use crate::operator::{
    bipartite_index, eigenvalues, hermitize, max_abs_diff, partial_trace_first, psd_power, tensor,
    trace_product, validate_density, CMatrix, CVector, DensityOperator, HilbertDim, Ket, Povm,
    ProbVector, C64, PROB_NEG_TOL, PROB_SUM_TOL,
};

/// Settings on the two sides of the canonical CHSH experiment, as equatorial
/// azimuths: `A` at `0, pi/2`, `B` at `pi/4, 3 pi/4`.
pub const CANONICAL_CHSH_AZIMUTHS: [f64; 4] = [0.0, PI / 2.0, PI / 4.0, 3.0 * PI / 4.0];

/// Fidelity above which two conditioned states count as the same member.
const SAME_STATE_FIDELITY: f64 = 1.0 - 1e-9;

/// Conditioned states with smaller probability are dropped from an ensemble.
const MIN_MEMBER_PROBABILITY: f64 = 1e-14;

/// Measurement axis for a qubit.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum QubitAxis {
    X,
    Y,
    Z,
    /// `cos(phi) X + sin(phi) Y`.
    Equatorial(f64),
}

impl QubitAxis {
    /// Projective measurement along the axis; the `+1` eigenprojector comes first.
    pub fn povm(self) -> Povm {
        let h = FRAC_1_SQRT_2;
        let (up, down) = match self {
            QubitAxis::Z => (
                vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            ),
            QubitAxis::X => return QubitAxis::Equatorial(0.0).povm(),
            QubitAxis::Y => return QubitAxis::Equatorial(PI / 2.0).povm(),
            QubitAxis::Equatorial(phi) => (
                vec![C64::new(h, 0.0), C64::from_polar(h, phi)],
                vec![C64::new(h, 0.0), -C64::from_polar(h, phi)],
            ),
        };
        let up = Ket::normalized(CVector::from_vec(up)).expect("unit vector");
        let down = Ket::normalized(CVector::from_vec(down)).expect("unit vector");
        Povm::from_basis(&[up, down]).expect("orthonormal basis")
    }

    pub fn label(self) -> String {
        match self {
            QubitAxis::X => "x".into(),
            QubitAxis::Y => "y".into(),
            QubitAxis::Z => "z".into(),
            QubitAxis::Equatorial(phi) => format!("{phi}"),
        }
    }
}

impl std::str::FromStr for QubitAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(QubitAxis::X),
            "y" => Ok(QubitAxis::Y),
            "z" => Ok(QubitAxis::Z),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(QubitAxis::Equatorial)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown axis `{s}`"))),
        }
    }
}

/// `(|00> + |11>)/sqrt(2)`.
pub fn phi_plus() -> Ket {
    let h = FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    Ket::new(CVector::from_vec(vec![C64::new(h, 0.0), z, z, C64::new(h, 0.0)])).expect("unit")
}

/// `(|01> - |10>)/sqrt(2)`.
pub fn singlet() -> Ket {
    let h = FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    Ket::new(CVector::from_vec(vec![z, C64::new(h, 0.0), C64::new(-h, 0.0), z])).expect("unit")
}

/// A labelled list of measurements on one system.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementFamily {
    labels: Vec<String>,
    povms: Vec<Povm>,
}

impl MeasurementFamily {
    pub fn new(labels: Vec<String>, povms: Vec<Povm>) -> Result<Self> {
        if povms.is_empty() || labels.len() != povms.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} measurements",
                labels.len(),
                povms.len()
            )));
        }
        let dim = povms[0].dim();
        if let Some(p) = povms.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim.get(),
                actual: p.dim().get(),
            });
        }
        Ok(MeasurementFamily { labels, povms })
    }

    pub fn from_axes(axes: &[QubitAxis]) -> Result<Self> {
        MeasurementFamily::new(
            axes.iter().map(|a| a.label()).collect(),
            axes.iter().map(|a| a.povm()).collect(),
        )
    }

    pub fn dim(&self) -> HilbertDim {
        self.povms[0].dim()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn povms(&self) -> &[Povm] {
        &self.povms
    }

    pub fn len(&self) -> usize {
        self.povms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.povms.is_empty()
    }
}

/// `p(x,y|a,b)`, stored as `probs[a][b][x][y]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationTable {
    settings_a: Vec<String>,
    settings_b: Vec<String>,
    probs: Vec<Vec<Vec<Vec<f64>>>>,
}

impl CorrelationTable {
    pub fn new(
        settings_a: Vec<String>,
        settings_b: Vec<String>,
        probs: Vec<Vec<Vec<Vec<f64>>>>,
    ) -> Result<Self> {
        if probs.len() != settings_a.len() || probs.iter().any(|row| row.len() != settings_b.len()) {
            return Err(Error::ShapeMismatch(
                "probability blocks do not match the setting labels".into(),
            ));
        }
        let mut probs = probs;
        for (a, row) in probs.iter_mut().enumerate() {
            for (b, block) in row.iter_mut().enumerate() {
                let width = block.first().map(Vec::len).unwrap_or(0);
                if width == 0 || block.iter().any(|r| r.len() != width) {
                    return Err(Error::ShapeMismatch(format!("block ({a},{b}) is ragged or empty")));
                }
                let mut sum = 0.0;
                for v in block.iter_mut().flatten() {
                    if !v.is_finite() || *v < -PROB_NEG_TOL {
                        return Err(Error::InvalidProbabilities {
                            reason: format!("block ({a},{b}) has entry {v:e}"),
                        });
                    }
                    *v = v.max(0.0);
                    sum += *v;
                }
                if (sum - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::InvalidProbabilities {
                        reason: format!("block ({a},{b}) sums to {sum:.15}"),
                    });
                }
            }
        }
        Ok(CorrelationTable {
            settings_a,
            settings_b,
            probs,
        })
    }

    pub fn settings_a(&self) -> &[String] {
        &self.settings_a
    }

    pub fn settings_b(&self) -> &[String] {
        &self.settings_b
    }

    /// `p(.,.|a,b)` as `[x][y]`.
    pub fn block(&self, a: usize, b: usize) -> &[Vec<f64>] {
        &self.probs[a][b]
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.probs[a][b][x][y]
    }

    /// All entries in `(a, b, x, y)` order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, usize, f64)> + '_ {
        self.probs.iter().enumerate().flat_map(|(a, row)| {
            row.iter().enumerate().flat_map(move |(b, block)| {
                block.iter().enumerate().flat_map(move |(x, r)| {
                    r.iter().enumerate().map(move |(y, p)| (a, b, x, y, *p))
                })
            })
        })
    }

    /// CSV with header `a,b,x,y,p`; settings are written by label.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(["a", "b", "x", "y", "p"]).map_err(io)?;
        for (a, b, x, y, p) in self.entries() {
            w.write_record([
                self.settings_a[a].clone(),
                self.settings_b[b].clone(),
                x.to_string(),
                y.to_string(),
                p.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
    }
}

/// `p(x,y|a,b) = <psi| A^a_x (x) B^b_y |psi>`.
pub fn correlation_table(
    psi: &Ket,
    fam_a: &MeasurementFamily,
    fam_b: &MeasurementFamily,
) -> Result<CorrelationTable> {
    let expected = fam_a.dim().get() * fam_b.dim().get();
    if psi.dim().get() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: psi.dim().get(),
        });
    }
    let mut probs = Vec::with_capacity(fam_a.len());
    for pa in fam_a.povms() {
        let mut row = Vec::with_capacity(fam_b.len());
        for pb in fam_b.povms() {
            let mut block = Vec::with_capacity(pa.len());
            for ax in pa.elements() {
                let mut r = Vec::with_capacity(pb.len());
                for by in pb.elements() {
                    r.push(psi.expectation(&tensor(ax, by)?).re);
                }
                block.push(r);
            }
            row.push(block);
        }
        probs.push(row);
    }
    CorrelationTable::new(fam_a.labels().to_vec(), fam_b.labels().to_vec(), probs)
}

/// Table of a local model driven by a shared distribution `p(i)`:
/// `p(x,y|a,b) = sum_i p(i) r_a(x|i) r_b(y|i)`.
pub fn classical_law_table(
    shared: &ProbVector,
    responses_a: &[CondProbMatrix],
    responses_b: &[CondProbMatrix],
) -> Result<CorrelationTable> {
    let n = shared.len();
    if responses_a.iter().chain(responses_b).any(|r| r.n_reference() != n) {
        return Err(Error::ShapeMismatch(
            "every response matrix needs one row per hidden value".into(),
        ));
    }
    let probs = responses_a
        .iter()
        .map(|ra| {
            responses_b
                .iter()
                .map(|rb| {
                    (0..ra.n_outcomes())
                        .map(|x| {
                            (0..rb.n_outcomes())
                                .map(|y| {
                                    (0..n)
                                        .map(|i| shared.values()[i] * ra.get(x, i) * rb.get(y, i))
                                        .sum()
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let labels = |k: usize| (0..k).map(|i| i.to_string()).collect();
    CorrelationTable::new(labels(responses_a.len()), labels(responses_b.len()), probs)
}

/// The four `+-1` correlators `E(a,b)`.
pub fn chsh_correlators(table: &CorrelationTable) -> Result<[[f64; 2]; 2]> {
    if table.settings_a.len() != 2 || table.settings_b.len() != 2 {
        return Err(Error::WrongArity(format!(
            "{} x {} settings",
            table.settings_a.len(),
            table.settings_b.len()
        )));
    }
    let mut e = [[0.0; 2]; 2];
    for (a, row) in e.iter_mut().enumerate() {
        for (b, slot) in row.iter_mut().enumerate() {
            let block = table.block(a, b);
            if block.len() != 2 || block[0].len() != 2 {
                return Err(Error::WrongArity(format!(
                    "setting ({a},{b}) has {} x {} outcomes",
                    block.len(),
                    block[0].len()
                )));
            }
            *slot = block[0][0] - block[0][1] - block[1][0] + block[1][1];
        }
    }
    Ok(e)
}

/// `|E(a1,b1) + E(a1,b2) + E(a2,b1) - E(a2,b2)|`, maximized over which of the
/// four correlators carries the minus sign. The four placements are the same
/// inequality up to relabelling settings and outcomes.
pub fn chsh_value(table: &CorrelationTable) -> Result<f64> {
    let e = chsh_correlators(table)?;
    let total = e[0][0] + e[0][1] + e[1][0] + e[1][1];
    Ok((0..4)
        .map(|k| (total - 2.0 * e[k / 2][k % 2]).abs())
        .fold(0.0, f64::max))
}

/// Largest change of one party's marginal under the other party's choice of
/// setting.
pub fn no_signalling_check(table: &CorrelationTable) -> f64 {
    let na = table.settings_a.len();
    let nb = table.settings_b.len();
    let spread = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    };
    let mut worst = 0.0f64;
    // B's marginal, varied over A's setting
    for b in 0..nb {
        let ny = table.block(0, b)[0].len();
        for y in 0..ny {
            let mut it = (0..na).map(|a| table.block(a, b).iter().map(|r| r[y]).sum::<f64>());
            worst = worst.max(spread(&mut it));
        }
    }
    // A's marginal, varied over B's setting
    for a in 0..na {
        let nx = table.block(a, 0).len();
        for x in 0..nx {
            let mut it = (0..nb).map(|b| table.block(a, b)[x].iter().sum::<f64>());
            worst = worst.max(spread(&mut it));
        }
    }
    worst
}

/// Squared Uhlmann fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> f64 {
    let (root, _) = psd_power(rho.matrix(), 0.5);
    let inner = hermitize(&(&root * sigma.matrix() * &root));
    let s: f64 = eigenvalues(&inner).iter().map(|v| v.max(0.0).sqrt()).sum();
    s * s
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleMember {
    /// Outcome of the measurement on the first system.
    pub outcome: usize,
    pub probability: f64,
    pub state: DensityOperator,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteeringReport {
    pub ensembles: [Vec<EnsembleMember>; 2],
    pub marginals: [DensityOperator; 2],
    /// `cross_fidelities[m][n]` between member `m` of ensemble 1 and member `n`
    /// of ensemble 2.
    pub cross_fidelities: Vec<Vec<f64>>,
    /// Largest cross fidelity.
    pub overlap: f64,
    /// True when some conditioned state of one ensemble has no counterpart in
    /// the other.
    pub steered: bool,
}

impl SteeringReport {
    /// Largest entry of `|marginal_1 - marginal_2|`.
    pub fn marginal_gap(&self) -> f64 {
        max_abs_diff(self.marginals[0].matrix(), self.marginals[1].matrix())
    }
}

fn require_rank_one_projectors(basis: &Povm) -> Result<()> {
    for (i, e) in basis.elements().iter().enumerate() {
        let squared = e * e;
        if max_abs_diff(&squared, e) > 1e-10 || (e.trace().re - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "element {i} of the steering basis is not a rank-one projector"
            )));
        }
    }
    Ok(())
}

fn conditioned_ensemble(
    rho: &CMatrix,
    basis: &Povm,
    dim_a: usize,
    dim_b: usize,
) -> Result<Vec<EnsembleMember>> {
    let id_b = CMatrix::identity(dim_b, dim_b);
    let mut members = Vec::new();
    for (outcome, effect) in basis.elements().iter().enumerate() {
        let lifted = tensor(effect, &id_b)?;
        let unnormalized = partial_trace_first(&(&lifted * rho * &lifted), dim_a, dim_b);
        let probability = unnormalized.trace().re;
        if probability < MIN_MEMBER_PROBABILITY {
            continue;
        }
        let state = validate_density(hermitize(&unnormalized.unscale(probability)))?;
        members.push(EnsembleMember {
            outcome,
            probability,
            state,
        });
    }
    let total: f64 = members.iter().map(|m| m.probability).sum();
    for m in &mut members {
        m.probability /= total;
    }
    Ok(members)
}

fn ensemble_average(members: &[EnsembleMember], dim_b: usize) -> Result<DensityOperator> {
    let sum = members.iter().fold(CMatrix::zeros(dim_b, dim_b), |acc, m| {
        acc + m.state.matrix() * C64::new(m.probability, 0.0)
    });
    validate_density(sum)
}

/// Conditional states of the second system after measuring `basis_1` or
/// `basis_2` on the first.
pub fn steering_ensembles(psi: &Ket, basis_1: &Povm, basis_2: &Povm) -> Result<SteeringReport> {
    let dim_a = basis_1.dim().get();
    if basis_2.dim().get() != dim_a {
        return Err(Error::DimensionMismatch {
            expected: dim_a,
            actual: basis_2.dim().get(),
        });
    }
    let total = psi.dim().get();
    if total % dim_a != 0 || total / dim_a < 2 {
        return Err(Error::NotBipartite { dim: total, dim_a });
    }
    let dim_b = total / dim_a;
    require_rank_one_projectors(basis_1)?;
    require_rank_one_projectors(basis_2)?;

    let rho = psi.projector();
    let first = conditioned_ensemble(&rho, basis_1, dim_a, dim_b)?;
    let second = conditioned_ensemble(&rho, basis_2, dim_a, dim_b)?;
    let marginals = [
        ensemble_average(&first, dim_b)?,
        ensemble_average(&second, dim_b)?,
    ];
    let cross_fidelities: Vec<Vec<f64>> = first
        .iter()
        .map(|m| second.iter().map(|n| fidelity(&m.state, &n.state)).collect())
        .collect();
    let overlap = cross_fidelities
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max);
    let covered_1 = cross_fidelities
        .iter()
        .all(|row| row.iter().any(|f| *f >= SAME_STATE_FIDELITY));
    let covered_2 = (0..second.len()).all(|n| {
        cross_fidelities
            .iter()
            .any(|row| row[n] >= SAME_STATE_FIDELITY)
    });
    Ok(SteeringReport {
        ensembles: [first, second],
        marginals,
        cross_fidelities,
        overlap,
        steered: !(covered_1 && covered_2),
    })
}

/// Joint measurements `{A^a_x (x) B^b_y}` acting on one four-level system.
#[derive(Clone, Debug, PartialEq)]
pub struct JointFamily {
    settings_a: Vec<String>,
    settings_b: Vec<String>,
    outcomes_a: Vec<usize>,
    outcomes_b: Vec<usize>,
    /// Setting `(a, b)` at index `a * n_b + b`; effect `(x, y)` at `x * n_y + y`.
    family: MeasurementFamily,
}

impl JointFamily {
    pub fn family(&self) -> &MeasurementFamily {
        &self.family
    }

    pub fn povm(&self, a: usize, b: usize) -> &Povm {
        &self.family.povms()[a * self.settings_b.len() + b]
    }
}

/// Embeds a pair of qubit measurement families into a single spin-3/2 system.
///
/// The two qubit factors become two commuting, complementary two-dimensional
/// sub-algebras of the four-dimensional space under the basis identification
/// `|0>,|1>,|2>,|3> <-> |00>,|01>,|10>,|11>`.
pub fn spin32_embedding(fam_a: &MeasurementFamily, fam_b: &MeasurementFamily) -> Result<JointFamily> {
    for fam in [fam_a, fam_b] {
        if fam.dim().get() != 2 {
            return Err(Error::WrongDimension {
                expected: 2,
                actual: fam.dim().get(),
            });
        }
    }
    let mut labels = Vec::new();
    let mut povms = Vec::new();
    for (la, pa) in fam_a.labels().iter().zip(fam_a.povms()) {
        for (lb, pb) in fam_b.labels().iter().zip(fam_b.povms()) {
            let mut elements = Vec::with_capacity(pa.len() * pb.len());
            for ax in pa.elements() {
                for by in pb.elements() {
                    elements.push(embed_pair(ax, by)?);
                }
            }
            labels.push(format!("{la}|{lb}"));
            povms.push(Povm::new(elements)?);
        }
    }
    Ok(JointFamily {
        settings_a: fam_a.labels().to_vec(),
        settings_b: fam_b.labels().to_vec(),
        outcomes_a: fam_a.povms().iter().map(Povm::len).collect(),
        outcomes_b: fam_b.povms().iter().map(Povm::len).collect(),
        family: MeasurementFamily::new(labels, povms)?,
    })
}

/// Image of `A (x) B` under the spin-3/2 basis identification.
fn embed_pair(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let product = tensor(a, b)?;
    Ok(CMatrix::from_fn(4, 4, |r, c| {
        let (ra, rb) = (r / 2, r % 2);
        let (ca, cb) = (c / 2, c % 2);
        product[(bipartite_index(ra, rb, 2), bipartite_index(ca, cb, 2))]
    }))
}

/// Operator of the first sub-algebra, `A (x) I`, on the spin-3/2 space.
pub fn embed_first(a: &CMatrix) -> Result<CMatrix> {
    embed_pair(a, &CMatrix::identity(2, 2))
}

/// Operator of the second sub-algebra, `I (x) B`, on the spin-3/2 space.
pub fn embed_second(b: &CMatrix) -> Result<CMatrix> {
    embed_pair(&CMatrix::identity(2, 2), b)
}

/// Correlations of a single spin-3/2 state under the embedded joint measurements.
pub fn joint_table(psi: &Ket, joint: &JointFamily) -> Result<CorrelationTable> {
    if psi.dim().get() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            actual: psi.dim().get(),
        });
    }
    let rho = psi.projector();
    let mut probs = Vec::with_capacity(joint.settings_a.len());
    for a in 0..joint.settings_a.len() {
        let mut row = Vec::with_capacity(joint.settings_b.len());
        for b in 0..joint.settings_b.len() {
            let povm = joint.povm(a, b);
            let ny = joint.outcomes_b[b];
            let block = (0..joint.outcomes_a[a])
                .map(|x| {
                    (0..ny)
                        .map(|y| trace_product(&rho, &povm.elements()[x * ny + y]).re)
                        .collect()
                })
                .collect();
            row.push(block);
        }
        probs.push(row);
    }
    CorrelationTable::new(joint.settings_a.clone(), joint.settings_b.clone(), probs)
}
