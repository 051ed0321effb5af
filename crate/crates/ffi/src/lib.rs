//! C ABI for `probrep`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` functions
//! and released by the matching `*_free`. Every fallible function returns a
//! [`ProbrepStatus`]; on failure the message is available from
//! [`probrep_last_error`] on the same thread. Complex inputs are passed as two
//! row-major `double` arrays of real and imaginary parts.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use probrep::born::{
    classicality_gap, povm_to_cond, random_rank1_reference, state_to_prob, urgleichung_general,
    ReferenceMeasurement,
};
use probrep::correlations::{chsh_value, correlation_table, MeasurementFamily, QubitAxis};
use probrep::error::Error;
use probrep::frequency::binomial_interval_prob;
use probrep::operator::{
    born_probabilities, validate_density, CMatrix, CVector, DensityOperator, HilbertDim, Ket,
    Povm, C64,
};
use probrep::wh::{known_fiducial, sic_search, DEFAULT_CERTIFY_TOL};

/// Result of every fallible call.
#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ProbrepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidState = 3,
    InvalidMeasurement = 4,
    NumericalFailure = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Restarts used by [`probrep_reference_sic`] outside the registry.
const SIC_RESTARTS: usize = 100;

pub struct ProbrepDensity(DensityOperator);
pub struct ProbrepPovm(Povm);
pub struct ProbrepReference(ReferenceMeasurement);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn classify(e: &Error) -> ProbrepStatus {
    match e {
        Error::NotHermitian { .. }
        | Error::NotPositive { .. }
        | Error::TraceNotOne { .. }
        | Error::NotNormalized { .. }
        | Error::NotAValidState { .. }
        | Error::NotBipartite { .. } => ProbrepStatus::InvalidState,
        Error::InvalidPovmElement { .. }
        | Error::NotComplete { .. }
        | Error::TooFewOutcomes { .. }
        | Error::WrongOutcomeCount { .. }
        | Error::NotRankOne { .. }
        | Error::NotInformationallyComplete { .. } => ProbrepStatus::InvalidMeasurement,
        Error::NoConvergence { .. }
        | Error::IllConditionedReference { .. }
        | Error::SingularNormalizer { .. } => ProbrepStatus::NumericalFailure,
        _ => ProbrepStatus::InvalidArgument,
    }
}

struct Failure(ProbrepStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(classify(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ProbrepStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ProbrepStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            ProbrepStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ProbrepStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, needed: usize) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null("output buffer"));
    }
    if len < needed {
        return Err(Failure(
            ProbrepStatus::BufferTooSmall,
            format!("output buffer holds {len} values, need {needed}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn matrix(dim: usize, re: *const f64, im: *const f64, offset: usize) -> Result<CMatrix, Failure> {
    let n = dim * dim;
    let re = slice(re, offset + n, "real parts")?;
    let im = slice(im, offset + n, "imaginary parts")?;
    Ok(CMatrix::from_fn(dim, dim, |r, c| {
        let k = offset + r * dim + c;
        C64::new(re[k], im[k])
    }))
}

fn hilbert(dim: usize) -> Result<HilbertDim, Failure> {
    Ok(HilbertDim::new(dim)?)
}

/// Copies the last error message of this thread into `buf` (NUL terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn probrep_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Validates a `dim x dim` density matrix.
///
/// # Safety
/// `re` and `im` must point to `dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn probrep_density_new(
    dim: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut ProbrepDensity,
) -> ProbrepStatus {
    guard(|| {
        hilbert(dim)?;
        let rho = validate_density(matrix(dim, re, im, 0)?)?;
        store(out, ProbrepDensity(rho))
    })
}

/// # Safety
/// `handle` must be null or come from [`probrep_density_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn probrep_density_free(handle: *mut ProbrepDensity) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Validates a POVM of `n_elements` matrices stored back to back.
///
/// # Safety
/// `re` and `im` must point to `n_elements * dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn probrep_povm_new(
    dim: usize,
    n_elements: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut ProbrepPovm,
) -> ProbrepStatus {
    guard(|| {
        hilbert(dim)?;
        let elements = (0..n_elements)
            .map(|k| matrix(dim, re, im, k * dim * dim))
            .collect::<Result<Vec<_>, _>>()?;
        store(out, ProbrepPovm(Povm::new(elements)?))
    })
}

/// # Safety
/// `handle` must be null or come from [`probrep_povm_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn probrep_povm_free(handle: *mut ProbrepPovm) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of outcomes of a POVM, or 0 for a null handle.
///
/// # Safety
/// `povm` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn probrep_povm_len(povm: *const ProbrepPovm) -> usize {
    povm.as_ref().map_or(0, |p| p.0.len())
}

/// A certified Weyl-Heisenberg SIC reference in dimension `dim`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn probrep_reference_sic(
    dim: usize,
    seed: u64,
    out: *mut *mut ProbrepReference,
) -> ProbrepStatus {
    guard(|| {
        let d = hilbert(dim)?;
        let fiducial = match known_fiducial(d) {
            Some(k) => k,
            None => sic_search(d, seed, SIC_RESTARTS)?.vector,
        };
        let reference = ReferenceMeasurement::sic(&fiducial, DEFAULT_CERTIFY_TOL).map_err(|e| {
            Failure(ProbrepStatus::NumericalFailure, e.to_string())
        })?;
        store(out, ProbrepReference(reference))
    })
}

/// A random rank-one informationally complete reference.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn probrep_reference_random(
    dim: usize,
    seed: u64,
    out: *mut *mut ProbrepReference,
) -> ProbrepStatus {
    guard(|| {
        let reference = random_rank1_reference(hilbert(dim)?, seed)?;
        store(out, ProbrepReference(reference))
    })
}

/// # Safety
/// `handle` must be null or come from a `probrep_reference_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn probrep_reference_free(handle: *mut ProbrepReference) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// `q(j) = tr(rho F_j)` into `out[0..len(povm)]`.
///
/// # Safety
/// Handles must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn probrep_born_probabilities(
    rho: *const ProbrepDensity,
    povm: *const ProbrepPovm,
    out: *mut f64,
    len: usize,
) -> ProbrepStatus {
    guard(|| {
        let rho = handle(rho, "density")?;
        let povm = handle(povm, "povm")?;
        let q = born_probabilities(&rho.0, &povm.0)?;
        out_slice(out, len, q.len())?.copy_from_slice(q.values());
        Ok(())
    })
}

/// Outcome probabilities computed only from the reference probabilities of
/// `rho` and the conditional probabilities of `povm`.
///
/// # Safety
/// Handles must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn probrep_urgleichung(
    reference: *const ProbrepReference,
    rho: *const ProbrepDensity,
    povm: *const ProbrepPovm,
    out: *mut f64,
    len: usize,
) -> ProbrepStatus {
    guard(|| {
        let reference = handle(reference, "reference")?;
        let rho = handle(rho, "density")?;
        let povm = handle(povm, "povm")?;
        let p = state_to_prob(&reference.0, &rho.0)?;
        let r = povm_to_cond(&reference.0, &povm.0)?;
        let q = urgleichung_general(&reference.0, &p, &r)?;
        out_slice(out, len, q.len())?.copy_from_slice(q.values());
        Ok(())
    })
}

/// Largest gap between the quantum prediction and the law of total probability.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn probrep_classicality_gap(
    reference: *const ProbrepReference,
    rho: *const ProbrepDensity,
    povm: *const ProbrepPovm,
    out: *mut f64,
) -> ProbrepStatus {
    guard(|| {
        let gap = classicality_gap(
            &handle(reference, "reference")?.0,
            &handle(rho, "density")?.0,
            &handle(povm, "povm")?.0,
        )?;
        out_slice(out, 1, 1)?[0] = gap;
        Ok(())
    })
}

/// Runs a SIC search and writes the fiducial into `out_re`/`out_im`.
/// Returns `NumericalFailure` when the best candidate does not certify.
///
/// # Safety
/// `out_re` and `out_im` must point to `len` doubles; the scalar outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn probrep_sic_search(
    dim: usize,
    seed: u64,
    restarts: usize,
    out_re: *mut f64,
    out_im: *mut f64,
    len: usize,
    out_frame_potential: *mut f64,
    out_max_deviation: *mut f64,
) -> ProbrepStatus {
    guard(|| {
        let c = sic_search(hilbert(dim)?, seed, restarts)?;
        let re = out_slice(out_re, len, dim)?;
        for (slot, z) in re.iter_mut().zip(c.vector.amplitudes().iter()) {
            *slot = z.re;
        }
        let im = out_slice(out_im, len, dim)?;
        for (slot, z) in im.iter_mut().zip(c.vector.amplitudes().iter()) {
            *slot = z.im;
        }
        out_slice(out_frame_potential, 1, 1)?[0] = c.frame_potential;
        out_slice(out_max_deviation, 1, 1)?[0] = c.max_sic_deviation;
        if c.certify(DEFAULT_CERTIFY_TOL).passed {
            Ok(())
        } else {
            Err(Failure(
                ProbrepStatus::NumericalFailure,
                format!("best candidate deviates by {:.3e}", c.max_sic_deviation),
            ))
        }
    })
}

/// Exact `P(lo <= h <= hi)` for `h ~ Binomial(n, p)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn probrep_binomial_interval(
    n: u64,
    p: f64,
    lo: u64,
    hi: u64,
    out: *mut f64,
) -> ProbrepStatus {
    guard(|| {
        let v = binomial_interval_prob(n, p, lo, hi)?;
        out_slice(out, 1, 1)?[0] = v;
        Ok(())
    })
}

/// CHSH value of a two-qubit pure state with equatorial measurement azimuths
/// `angles = [a1, a2, b1, b2]`.
///
/// # Safety
/// `state_re`/`state_im` must point to 4 doubles, `angles` to 4, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn probrep_chsh(
    state_re: *const f64,
    state_im: *const f64,
    angles: *const f64,
    out: *mut f64,
) -> ProbrepStatus {
    guard(|| {
        let re = slice(state_re, 4, "state real parts")?;
        let im = slice(state_im, 4, "state imaginary parts")?;
        let angles = slice(angles, 4, "angles")?;
        let psi = Ket::new(CVector::from_fn(4, |k, _| C64::new(re[k], im[k])))?;
        let axes: Vec<QubitAxis> = angles.iter().map(|a| QubitAxis::Equatorial(*a)).collect();
        let fam_a = MeasurementFamily::from_axes(&axes[..2])?;
        let fam_b = MeasurementFamily::from_axes(&axes[2..])?;
        let value = chsh_value(&correlation_table(&psi, &fam_a, &fam_b)?)?;
        out_slice(out, 1, 1)?[0] = value;
        Ok(())
    })
}
