mod common;

use probrep::operator::HilbertDim;
use probrep::wh::{
    frame_potential, known_fiducial, max_sic_deviation, potential_lower_bound, sic_search,
    wh_povm,
};

fn d(n: usize) -> HilbertDim {
    HilbertDim::new(n).unwrap()
}

fn amplitudes(k: &probrep::operator::Ket) -> Vec<num_complex::Complex64> {
    k.amplitudes().iter().copied().collect()
}

#[test]
fn registry_fiducials_pass_the_naive_check() {
    for n in [2, 3] {
        let k = known_fiducial(d(n)).unwrap();
        let psi = amplitudes(&k);
        assert!(common::sic_deviation(&psi) < 1e-12);
        let bound = (n as f64 - 1.0) / (n as f64 + 1.0);
        assert!((common::frame_potential(&psi) - bound).abs() < 1e-12);
    }
}

#[test]
fn searched_fiducials_pass_the_naive_check() {
    for n in 2..=5 {
        let c = sic_search(d(n), 7, 40).unwrap();
        let psi = amplitudes(&c.vector);
        assert!(common::sic_deviation(&psi) < 1e-8, "d={n}");
        assert!((common::frame_potential(&psi) - potential_lower_bound(d(n))).abs() < 1e-8);
        assert!((c.frame_potential - common::frame_potential(&psi)).abs() < 1e-12);
        assert!((c.max_sic_deviation - common::sic_deviation(&psi)).abs() < 1e-12);
        assert!(c.restarts_used >= 1 && c.restarts_used <= 40);
    }
}

#[test]
fn library_potential_matches_oracle_on_random_vectors() {
    for n in 2..=6 {
        for seed in 0..20 {
            let k = probrep::operator::random_pure_state(d(n), seed);
            let psi = amplitudes(&k);
            assert!((frame_potential(&k) - common::frame_potential(&psi)).abs() < 1e-12);
            assert!((max_sic_deviation(&k) - common::sic_deviation(&psi)).abs() < 1e-12);
            assert!(frame_potential(&k) >= potential_lower_bound(d(n)) - 1e-12);
        }
    }
}

#[test]
fn sic_povm_elements_have_equal_overlaps() {
    let k = known_fiducial(d(3)).unwrap();
    let povm = wh_povm(&k).unwrap();
    let e = povm.elements();
    for i in 0..e.len() {
        assert!((common::trace_product(&e[i], &e[i]).re - 1.0 / 9.0).abs() < 1e-12);
        for j in 0..i {
            // tr(E_i E_j) = |<psi_i|psi_j>|^2 / d^2 = 1 / (d^2 (d+1))
            assert!((common::trace_product(&e[i], &e[j]).re - 1.0 / 36.0).abs() < 1e-12);
        }
    }
}

#[test]
fn search_is_reproducible() {
    let a = sic_search(d(4), 3, 16).unwrap();
    let b = sic_search(d(4), 3, 16).unwrap();
    assert_eq!(a, b);
}
