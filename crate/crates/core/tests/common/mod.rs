//! Brute-force oracles written without the library's linear algebra.
#![allow(dead_code)]

use num_complex::Complex64 as C;
use probrep::operator::CMatrix;

pub type Naive = Vec<Vec<C>>;

pub fn to_naive(m: &CMatrix) -> Naive {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

pub fn naive_mul(a: &Naive, b: &Naive) -> Naive {
    let n = a.len();
    let mut out = vec![vec![C::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

/// `tr(A B)` by explicit double sum.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C {
    let n = a.nrows();
    let mut s = C::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

/// Born probabilities `tr(rho F_j)`.
pub fn born(rho: &CMatrix, effects: &[CMatrix]) -> Vec<f64> {
    effects.iter().map(|f| trace_product(rho, f).re).collect()
}

/// `X^j Z^k` built from its action on basis vectors:
/// `Z|m> = w^m |m>`, `X|m> = |m+1>`.
pub fn shift_clock(d: usize, j: usize, k: usize) -> Naive {
    let w = C::from_polar(1.0, 2.0 * std::f64::consts::PI / d as f64);
    let mut m = vec![vec![C::new(0.0, 0.0); d]; d];
    for col in 0..d {
        m[(col + j) % d][col] = w.powu(((k * col) % d) as u32);
    }
    m
}

/// `|<psi| X^j Z^k |psi>|^2` for every `(j, k) != (0, 0)`.
pub fn overlaps_squared(psi: &[C]) -> Vec<f64> {
    let d = psi.len();
    let mut out = Vec::new();
    for j in 0..d {
        for k in 0..d {
            if j == 0 && k == 0 {
                continue;
            }
            let m = shift_clock(d, j, k);
            let mut s = C::new(0.0, 0.0);
            for r in 0..d {
                for c in 0..d {
                    s += psi[r].conj() * m[r][c] * psi[c];
                }
            }
            out.push(s.norm_sqr());
        }
    }
    out
}

/// `sum |<psi|D|psi>|^4` over the non-identity displacements.
pub fn frame_potential(psi: &[C]) -> f64 {
    overlaps_squared(psi).iter().map(|g| g * g).sum()
}

/// Largest `| |<psi|D|psi>|^2 - 1/(d+1) |`.
pub fn sic_deviation(psi: &[C]) -> f64 {
    let target = 1.0 / (psi.len() as f64 + 1.0);
    overlaps_squared(psi)
        .iter()
        .map(|g| (g - target).abs())
        .fold(0.0, f64::max)
}

/// The CHSH bound of local deterministic models: every assignment of `+-1`
/// to the four settings, every placement of the minus sign.
pub fn deterministic_chsh_bound() -> f64 {
    let mut best = 0.0f64;
    for bits in 0..16u32 {
        let v = |i: u32| if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
        let (a1, a2, b1, b2) = (v(0), v(1), v(2), v(3));
        let e = [[a1 * b1, a1 * b2], [a2 * b1, a2 * b2]];
        for minus in 0..4 {
            let mut s = 0.0f64;
            for (idx, val) in [e[0][0], e[0][1], e[1][0], e[1][1]].iter().enumerate() {
                s += if idx == minus { -val } else { *val };
            }
            best = best.max(s.abs());
        }
    }
    best
}

/// Singlet correlator for equatorial azimuths, `-cos(a - b)`.
pub fn singlet_correlator(a: f64, b: f64) -> f64 {
    -(a - b).cos()
}
