//! Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C;
use probrep::born::{
    classicality_gap, povm_to_cond, random_rank1_reference, state_to_prob, urgleichung_general,
    urgleichung_sic, CondProbMatrix, ReferenceMeasurement,
};
use probrep::cli::{cmd_sic_search, SicSearchArgs};
use probrep::correlations::{
    chsh_value, classical_law_table, correlation_table, joint_table, no_signalling_check,
    phi_plus, singlet, spin32_embedding, steering_ensembles,
    MeasurementFamily, QubitAxis, CANONICAL_CHSH_AZIMUTHS,
};
use probrep::frequency::{binomial_interval_prob, seed_sweep};
use probrep::json::FiducialFile;
use probrep::operator::{
    derive_seed, random_density, random_povm, random_pure_state, rng_from_seed, CVector,
    DensityOperator, HilbertDim, Ket, Povm, ProbVector,
};
use probrep::wh::{known_fiducial, potential_lower_bound};
use rand::Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn d(n: usize) -> HilbertDim {
    HilbertDim::new(n).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut worst_potential = 0.0f64;
    let mut worst_deviation = 0.0f64;
    let mut restarts = Vec::new();
    for n in 2..=6 {
        let args = SicSearchArgs {
            dim: n,
            restarts: 100,
            seed: 0,
            out: None,
            tol: 1e-8,
        };
        let out = match cmd_sic_search(&args) {
            Ok(o) => o,
            Err(e) => return verdict(false, format!("d={n}: {e:?}")),
        };
        let file: FiducialFile = serde_json::from_slice(&out.artifacts[0].bytes).unwrap();
        let psi: Vec<C> = file.vector.iter().map(|e| C::new(e[0], e[1])).collect();
        worst_potential = worst_potential
            .max((common::frame_potential(&psi) - potential_lower_bound(d(n))).abs());
        worst_deviation = worst_deviation.max(common::sic_deviation(&psi));
        restarts.push(file.restarts_used);
    }
    let elapsed = start.elapsed();
    verdict(
        worst_potential < 1e-8 && worst_deviation < 1e-8 && elapsed < Duration::from_secs(120),
        format!(
            "d=2..6: max |potential - (d-1)/(d+1)| = {worst_potential:.2e}, max SIC deviation = {worst_deviation:.2e}, restarts used {restarts:?}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn sic_reference(n: usize) -> ReferenceMeasurement {
    let fiducial = known_fiducial(d(n))
        .unwrap_or_else(|| probrep::wh::sic_search(d(n), 0, 100).unwrap().vector);
    ReferenceMeasurement::sic(&fiducial, 1e-8).unwrap()
}

fn pair(n: usize, t: u64) -> (DensityOperator, Povm) {
    let dim = d(n);
    let rho = random_density(dim, 1 + t as usize % n, derive_seed(1, n as u64, t)).unwrap();
    let povm = random_povm(dim, 2 + t as usize % (n * n), derive_seed(2, n as u64, t)).unwrap();
    (rho, povm)
}

struct SweepResult {
    sic_vs_born: f64,
    random_vs_born: f64,
    sic_form_vs_general: f64,
    elapsed: Duration,
}

fn urgleichung_sweep() -> SweepResult {
    let start = Instant::now();
    let mut r = SweepResult {
        sic_vs_born: 0.0,
        random_vs_born: 0.0,
        sic_form_vs_general: 0.0,
        elapsed: Duration::ZERO,
    };
    for n in 2..=5 {
        let sic = sic_reference(n);
        let random = random_rank1_reference(d(n), 77).unwrap();
        for t in 0..1000 {
            let (rho, povm) = pair(n, t);
            let born = common::born(rho.matrix(), povm.elements());
            for (reference, is_sic) in [(&sic, true), (&random, false)] {
                let p = state_to_prob(reference, &rho).unwrap();
                let cond = povm_to_cond(reference, &povm).unwrap();
                let q = urgleichung_general(reference, &p, &cond).unwrap();
                let dev = max_diff(q.values(), &born);
                if is_sic {
                    r.sic_vs_born = r.sic_vs_born.max(dev);
                    let q_sic = urgleichung_sic(d(n), &p, &cond).unwrap();
                    r.sic_form_vs_general =
                        r.sic_form_vs_general.max(max_diff(q_sic.values(), q.values()));
                } else {
                    r.random_vs_born = r.random_vs_born.max(dev);
                }
            }
        }
    }
    r.elapsed = start.elapsed();
    r
}

fn criterion_2(s: &SweepResult) -> Verdict {
    verdict(
        s.sic_vs_born < 1e-9 && s.random_vs_born < 1e-9 && s.elapsed < Duration::from_secs(60),
        format!(
            "d=2..5 x 1000 pairs: max deviation SIC {:.2e}, random reference {:.2e}, {:.2}s",
            s.sic_vs_born,
            s.random_vs_born,
            s.elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3(s: &SweepResult) -> Verdict {
    verdict(
        s.sic_form_vs_general < 1e-10,
        format!(
            "coefficients (d+1, 1/d) form vs general rule: max difference {:.2e}",
            s.sic_form_vs_general
        ),
    )
}

fn criterion_4() -> Verdict {
    let tetra = ReferenceMeasurement::sic(&known_fiducial(d(2)).unwrap(), 1e-10).unwrap();
    let h = FRAC_1_SQRT_2;
    let plus = Ket::new(CVector::from_vec(vec![C::new(h, 0.0), C::new(h, 0.0)])).unwrap();
    let minus = Ket::new(CVector::from_vec(vec![C::new(h, 0.0), C::new(-h, 0.0)])).unwrap();
    let x = Povm::from_basis(&[plus.clone(), minus]).unwrap();
    let gap = classicality_gap(&tetra, &DensityOperator::from_ket(&plus), &x).unwrap();
    let mixed = classicality_gap(&tetra, &DensityOperator::maximally_mixed(d(2)), &x).unwrap();
    verdict(
        (gap - 1.0 / 3.0).abs() < 1e-9 && mixed < 1e-10,
        format!("|+><+| with x: gap = {gap:.12} (1/3); maximally mixed: gap = {mixed:.2e}"),
    )
}

fn criterion_5() -> Verdict {
    let exact = binomial_interval_prob(100, 0.5, 30, 70).unwrap();
    let q = ProbVector::new(vec![0.5, 0.5]).unwrap();
    let sweep = seed_sweep(&q, 100, 0, 1000).unwrap();
    let hits = sweep.iter().filter(|c| (30..=70).contains(&c.counts[0])).count();
    let rate = hits as f64 / 1000.0;
    let sigma = (exact * (1.0 - exact) / 1000.0).sqrt();
    verdict(
        (exact - 0.999968).abs() < 1e-6 && (rate - exact).abs() <= 5.0 * sigma,
        format!(
            "P(30<=h<=70) = {exact:.7}; 1000 seeds: {hits} in range, |rate - P| = {:.2e} <= 5 sigma = {:.2e}",
            (rate - exact).abs(),
            5.0 * sigma
        ),
    )
}

fn equatorial(angles: &[f64]) -> MeasurementFamily {
    let axes: Vec<QubitAxis> = angles.iter().map(|a| QubitAxis::Equatorial(*a)).collect();
    MeasurementFamily::from_axes(&axes).unwrap()
}

fn random_response(rng: &mut impl Rng, hidden: usize) -> CondProbMatrix {
    CondProbMatrix::new(
        (0..hidden)
            .map(|_| {
                let x: f64 = rng.random();
                vec![x, 1.0 - x]
            })
            .collect(),
    )
    .unwrap()
}

fn criterion_6() -> Verdict {
    let [a1, a2, b1, b2] = CANONICAL_CHSH_AZIMUTHS;
    let t = correlation_table(&singlet(), &equatorial(&[a1, a2]), &equatorial(&[b1, b2])).unwrap();
    let chsh = chsh_value(&t).unwrap();

    let mut rng = rng_from_seed(6);
    let mut signalling = no_signalling_check(&t);
    for s in 0..1000u64 {
        let psi = random_pure_state(d(4), s);
        let angles: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let table = correlation_table(&psi, &equatorial(&angles[..2]), &equatorial(&angles[2..])).unwrap();
        signalling = signalling.max(no_signalling_check(&table));
    }

    let bound = common::deterministic_chsh_bound();
    let mut classical_max = 0.0f64;
    for _ in 0..1000 {
        let hidden = rng.random_range(1..=16);
        let raw: Vec<f64> = (0..hidden).map(|_| rng.random::<f64>() + 1e-12).collect();
        let total: f64 = raw.iter().sum();
        let shared = ProbVector::new(raw.iter().map(|v| v / total).collect()).unwrap();
        let ra: Vec<_> = (0..2).map(|_| random_response(&mut rng, hidden)).collect();
        let rb: Vec<_> = (0..2).map(|_| random_response(&mut rng, hidden)).collect();
        let table = classical_law_table(&shared, &ra, &rb).unwrap();
        classical_max = classical_max.max(chsh_value(&table).unwrap());
    }
    verdict(
        (chsh - 2.0 * 2f64.sqrt()).abs() < 1e-9 && signalling < 1e-10 && classical_max <= bound + 1e-10,
        format!(
            "singlet CHSH = {chsh:.12}; max signalling over 1001 quantum tables = {signalling:.2e}; max classical-law CHSH over 1000 models = {classical_max:.6} (deterministic bound {bound})"
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = rng_from_seed(7);
    let mut worst = 0.0f64;
    for s in 0..100u64 {
        let angles: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let (fa, fb) = (equatorial(&angles[..2]), equatorial(&angles[2..]));
        let psi = random_pure_state(d(4), s);
        let two = correlation_table(&psi, &fa, &fb).unwrap();
        let one = joint_table(&psi, &spin32_embedding(&fa, &fb).unwrap()).unwrap();
        for (p, q) in two.entries().zip(one.entries()) {
            worst = worst.max((p.4 - q.4).abs());
        }
    }
    verdict(worst < 1e-12, format!("100 random settings: max entry difference {worst:.2e}"))
}

fn criterion_8() -> Verdict {
    let r = steering_ensembles(&phi_plus(), &QubitAxis::Z.povm(), &QubitAxis::X.povm()).unwrap();
    let fid_dev = r
        .cross_fidelities
        .iter()
        .flatten()
        .map(|f| (f - 0.5).abs())
        .fold(0.0, f64::max);
    let gap = r.marginal_gap();
    let sizes = (r.ensembles[0].len(), r.ensembles[1].len());
    verdict(
        r.steered && sizes == (2, 2) && fid_dev < 1e-10 && gap < 1e-12,
        format!(
            "ensembles of sizes {sizes:?}, distinct = {}, max |F - 1/2| = {fid_dev:.2e}, marginal difference = {gap:.2e}",
            r.steered
        ),
    )
}

fn run(dir: &Path, args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_probrep"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr).trim()))
    }
}

fn criterion_9() -> Verdict {
    let dir = tempfile::TempDir::new().unwrap();
    let p = dir.path();
    std::fs::write(p.join("plus.json"), r#"{"dim":2,"matrix":[[[0.5,0],[0.5,0]],[[0.5,0],[0.5,0]]]}"#).unwrap();
    std::fs::write(p.join("x.json"), r#"{"dim":2,"elements":[[[[0.5,0],[0.5,0]],[[0.5,0],[0.5,0]]],[[[0.5,0],[-0.5,0]],[[-0.5,0],[0.5,0]]]]}"#).unwrap();
    std::fs::write(p.join("q.json"), "[0.5, 0.5]").unwrap();
    let commands: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (vec!["sic-search", "--dim", "4", "--restarts", "20", "--seed", "3", "--out", "fid.json"], vec!["fid.json"]),
        (vec!["born-check", "--dim", "3", "--trials", "200", "--reference", "random", "--seed", "2", "--report", "born.json"], vec!["born.json"]),
        (vec!["classical-gap", "--state", "plus.json", "--povm", "x.json", "--out", "gap.json"], vec!["gap.json"]),
        (vec!["bell", "--chsh", "--spin32", "--simulate", "5000", "--mode", "per-trial-random", "--seed", "9", "--out", "bell.json", "--table", "table.csv", "--counts", "counts.csv"], vec!["bell.json", "table.csv", "counts.csv"]),
        (vec!["steer", "--state", "phi+", "--basis-a", "z", "--basis-b", "x", "--out", "steer.json"], vec!["steer.json"]),
        (vec!["simulate", "--probs", "q.json", "--n", "100", "--seed", "57", "--out", "sim.json"], vec!["sim.json"]),
        (vec!["interval", "--n", "100", "--p", "0.5", "--lo", "30", "--hi", "70", "--out", "interval.json"], vec!["interval.json"]),
    ];
    let mut checked = 0;
    for (args, outputs) in &commands {
        if let Err(e) = run(p, args) {
            return verdict(false, e);
        }
        for out in outputs {
            let before = std::fs::read(p.join(out)).unwrap();
            if let Err(e) = run(p, &["replay", out, "--out-dir", "replayed"]) {
                return verdict(false, e);
            }
            let again = std::fs::read(p.join("replayed").join(out)).unwrap();
            if before != again {
                return verdict(false, format!("{out} differs after replay"));
            }
            checked += 1;
        }
    }
    verdict(true, format!("{} commands, {checked} artifacts byte-identical after replay", commands.len()))
}

fn main() {
    let sweep = urgleichung_sweep();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("SIC search", Box::new(criterion_1)),
        ("probability-only rule equals Born rule", Box::new(|| criterion_2(&sweep))),
        ("SIC coefficients", Box::new(|| criterion_3(&sweep))),
        ("classicality gap", Box::new(criterion_4)),
        ("coin-toss concentration", Box::new(criterion_5)),
        ("correlations and CHSH", Box::new(criterion_6)),
        ("spin-3/2 embedding", Box::new(criterion_7)),
        ("steering", Box::new(criterion_8)),
        ("reproducibility", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.passed {
            failed += 1;
        }
        println!(
            "criterion {} [{}] {name}: {}",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
