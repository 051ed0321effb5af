//! JSON file formats. Complex numbers are `[re, im]` pairs.
//!
//! - operator: `{"dim": d, "matrix": [[[re, im], ...], ...]}`
//! - ket: `{"dim": d, "vector": [[re, im], ...]}`
//! - POVM: `{"dim": d, "elements": [matrix, ...]}`
//! - reference: a POVM plus `"sic_certified": bool`
//! - fiducial: a ket plus the search diagnostics of [`FiducialCandidate`]

use serde::{Deserialize, Serialize};

use crate::born::{make_reference, ReferenceMeasurement};
use crate::error::{Error, Result};
use crate::operator::{validate_density, CMatrix, CVector, DensityOperator, Ket, Povm, C64};
use crate::wh::FiducialCandidate;

pub type Entry = [f64; 2];
pub type MatrixRows = Vec<Vec<Entry>>;

/// Tolerance used to re-check a reference file that claims SIC provenance.
pub const REFERENCE_SIC_TOL: f64 = 1e-8;

fn entry(z: C64) -> Entry {
    [z.re, z.im]
}

fn complex(e: &Entry) -> C64 {
    C64::new(e[0], e[1])
}

pub fn matrix_to_rows(m: &CMatrix) -> MatrixRows {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| entry(m[(r, c)])).collect())
        .collect()
}

pub fn rows_to_matrix(dim: usize, rows: &MatrixRows) -> Result<CMatrix> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::ShapeMismatch(format!(
            "matrix must be {dim}x{dim}, found {} rows of lengths {:?}",
            rows.len(),
            rows.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    Ok(CMatrix::from_fn(dim, dim, |r, c| complex(&rows[r][c])))
}

pub fn vector_to_entries(v: &CVector) -> Vec<Entry> {
    v.iter().map(|z| entry(*z)).collect()
}

pub fn entries_to_vector(dim: usize, entries: &[Entry]) -> Result<CVector> {
    if entries.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "vector must have {dim} entries, found {}",
            entries.len()
        )));
    }
    Ok(CVector::from_iterator(dim, entries.iter().map(complex)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorFile {
    pub dim: usize,
    pub matrix: MatrixRows,
}

impl OperatorFile {
    pub fn from_density(rho: &DensityOperator) -> Self {
        OperatorFile {
            dim: rho.dim().get(),
            matrix: matrix_to_rows(rho.matrix()),
        }
    }

    pub fn to_density(&self) -> Result<DensityOperator> {
        validate_density(rows_to_matrix(self.dim, &self.matrix)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KetFile {
    pub dim: usize,
    pub vector: Vec<Entry>,
}

impl KetFile {
    pub fn from_ket(ket: &Ket) -> Self {
        KetFile {
            dim: ket.dim().get(),
            vector: vector_to_entries(ket.amplitudes()),
        }
    }

    pub fn to_ket(&self) -> Result<Ket> {
        Ket::new(entries_to_vector(self.dim, &self.vector)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmFile {
    pub dim: usize,
    pub elements: Vec<MatrixRows>,
}

impl PovmFile {
    pub fn from_povm(povm: &Povm) -> Self {
        PovmFile {
            dim: povm.dim().get(),
            elements: povm.elements().iter().map(matrix_to_rows).collect(),
        }
    }

    pub fn to_povm(&self) -> Result<Povm> {
        Povm::new(
            self.elements
                .iter()
                .map(|m| rows_to_matrix(self.dim, m))
                .collect::<Result<_>>()?,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceFile {
    pub dim: usize,
    pub elements: Vec<MatrixRows>,
    #[serde(default)]
    pub sic_certified: bool,
}

impl ReferenceFile {
    pub fn from_reference(reference: &ReferenceMeasurement) -> Self {
        let povm = PovmFile::from_povm(reference.elements());
        ReferenceFile {
            dim: povm.dim,
            elements: povm.elements,
            sic_certified: reference.is_sic_certified(),
        }
    }

    /// Rebuilds the reference; a `sic_certified` claim is re-checked.
    pub fn to_reference(&self) -> Result<ReferenceMeasurement> {
        let povm = PovmFile {
            dim: self.dim,
            elements: self.elements.clone(),
        }
        .to_povm()?;
        let reference = make_reference(povm)?;
        if self.sic_certified {
            reference.certify_as_sic(REFERENCE_SIC_TOL)
        } else {
            Ok(reference)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiducialFile {
    pub dim: usize,
    pub vector: Vec<Entry>,
    pub frame_potential: f64,
    pub max_sic_deviation: f64,
    pub seed: u64,
    pub restarts_used: usize,
    pub restart_index: usize,
    pub gradient_norm: f64,
    pub certified: bool,
    pub tolerance: f64,
}

impl FiducialFile {
    pub fn from_candidate(c: &FiducialCandidate, tolerance: f64) -> Self {
        FiducialFile {
            dim: c.dim.get(),
            vector: vector_to_entries(c.vector.amplitudes()),
            frame_potential: c.frame_potential,
            max_sic_deviation: c.max_sic_deviation,
            seed: c.seed,
            restarts_used: c.restarts_used,
            restart_index: c.restart_index,
            gradient_norm: c.gradient_norm,
            certified: c.certify(tolerance).passed,
            tolerance,
        }
    }

    pub fn to_ket(&self) -> Result<Ket> {
        Ket::new(entries_to_vector(self.dim, &self.vector)?)
    }
}

/// A state file holding either a ket or a density operator.
#[derive(Clone, Debug, PartialEq)]
pub enum StateFile {
    Pure(Ket),
    Mixed(DensityOperator),
}

impl StateFile {
    pub fn density(&self) -> DensityOperator {
        match self {
            StateFile::Pure(k) => DensityOperator::from_ket(k),
            StateFile::Mixed(rho) => rho.clone(),
        }
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Parses a ket file or an operator file, chosen by the `vector`/`matrix` key.
pub fn parse_state(text: &str) -> Result<StateFile> {
    let value: serde_json::Value = parse(text)?;
    let has = |k: &str| value.get(k).is_some();
    match (has("vector"), has("matrix")) {
        (true, false) => Ok(StateFile::Pure(parse::<KetFile>(text)?.to_ket()?)),
        (false, true) => Ok(StateFile::Mixed(parse::<OperatorFile>(text)?.to_density()?)),
        _ => Err(Error::Parse(
            "state file needs exactly one of the fields `vector` or `matrix`".into(),
        )),
    }
}

pub fn parse_povm(text: &str) -> Result<Povm> {
    parse::<PovmFile>(text)?.to_povm()
}

pub fn parse_reference(text: &str) -> Result<ReferenceMeasurement> {
    parse::<ReferenceFile>(text)?.to_reference()
}

pub fn parse_fiducial(text: &str) -> Result<FiducialFile> {
    parse(text)
}
