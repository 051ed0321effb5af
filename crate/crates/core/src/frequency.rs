//! Seeded outcome sampling, exact binomial concentration and empirical data
//! tables `d(x,y|a,b)`.
//!
//! All sampling uses ChaCha8 seeded through [`rng_from_seed`]; a draw is one
//! `f64` in `[0, 1)` mapped through the inverse CDF.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::CorrelationTable;
use crate::error::{Error, Result};
use crate::operator::{derive_seed, rng_from_seed, ProbVector};

const SWEEP_STREAM: u64 = 0x5357_4545;
const BLOCK_STREAM: u64 = 0x424c_4f43;

/// Counts of each outcome in `n_trials` draws.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub counts: Vec<u64>,
    pub n_trials: u64,
    pub seed: u64,
}

impl OutcomeCounts {
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n_trials.max(1) as f64;
        self.counts.iter().map(|c| *c as f64 / n).collect()
    }
}

fn draw<R: Rng>(cdf: &[f64], last_positive: usize, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    cdf.iter().position(|c| u < *c).unwrap_or(last_positive)
}

fn cumulative(q: &ProbVector) -> (Vec<f64>, usize) {
    let mut acc = 0.0;
    let cdf = q
        .values()
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    let last = q.values().iter().rposition(|v| *v > 0.0).unwrap_or(0);
    (cdf, last)
}

/// `n` independent draws from `q`.
pub fn sample_outcomes(q: &ProbVector, n: u64, seed: u64) -> Result<OutcomeCounts> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let (cdf, last) = cumulative(q);
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0u64; q.len()];
    for _ in 0..n {
        counts[draw(&cdf, last, &mut rng)] += 1;
    }
    Ok(OutcomeCounts {
        counts,
        n_trials: n,
        seed,
    })
}

/// Runs [`sample_outcomes`] for `n_seeds` seeds derived from `base_seed`.
/// The result is ordered by seed index and independent of thread scheduling.
pub fn seed_sweep(q: &ProbVector, n: u64, base_seed: u64, n_seeds: u64) -> Result<Vec<OutcomeCounts>> {
    (0..n_seeds)
        .into_par_iter()
        .map(|i| sample_outcomes(q, n, derive_seed(base_seed, SWEEP_STREAM, i)))
        .collect()
}

fn ln_factorials(n: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

fn check_binomial(n: u64, p: f64, lo: u64, hi: u64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} is not a probability")));
    }
    if lo > hi || hi > n {
        return Err(Error::InvalidArgument(format!(
            "interval [{lo}, {hi}] is not inside [0, {n}]"
        )));
    }
    Ok(())
}

fn ln_pmf(ln_fact: &[f64], n: u64, p: f64, k: u64) -> f64 {
    let term = |count: u64, prob: f64| {
        if count == 0 {
            0.0
        } else {
            count as f64 * prob.ln()
        }
    };
    let (n_, k_) = (n as usize, k as usize);
    ln_fact[n_] - ln_fact[k_] - ln_fact[n_ - k_] + term(k, p) + term(n - k, 1.0 - p)
}

/// `P(lo <= h <= hi)` for `h ~ Binomial(n, p)`, summed in log space.
pub fn binomial_interval_prob(n: u64, p: f64, lo: u64, hi: u64) -> Result<f64> {
    check_binomial(n, p, lo, hi)?;
    let ln_fact = ln_factorials(n);
    let logs: Vec<f64> = (lo..=hi).map(|k| ln_pmf(&ln_fact, n, p, k)).collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let sum: f64 = logs.iter().map(|l| (l - peak).exp()).sum();
    Ok((peak + sum.ln()).exp().min(1.0))
}

/// `P(h = k)` for `h ~ Binomial(n, p)`.
pub fn binomial_pmf(n: u64, p: f64, k: u64) -> Result<f64> {
    binomial_interval_prob(n, p, k, k)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Every setting gets exactly `n_per_setting` trials.
    Blocked,
    /// Each of `n_per_setting * settings` trials first draws a setting uniformly.
    PerTrialRandom,
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blocked" => Ok(SamplingMode::Blocked),
            "per-trial-random" => Ok(SamplingMode::PerTrialRandom),
            other => Err(Error::InvalidArgument(format!("unknown sampling mode `{other}`"))),
        }
    }
}

/// Counts of joint outcomes per setting pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    pub settings_a: Vec<String>,
    pub settings_b: Vec<String>,
    pub sampling_mode: SamplingMode,
    pub seed: u64,
    pub n_per_setting: u64,
    /// `(outcomes of A, outcomes of B)` per setting pair, `[a][b]`.
    pub shapes: Vec<Vec<(usize, usize)>>,
    /// Joint outcome `(x, y)` is counted at `x * n_y + y`; `[a][b]`.
    pub counts: Vec<Vec<OutcomeCounts>>,
}

impl DataTable {
    pub fn count(&self, a: usize, b: usize, x: usize, y: usize) -> u64 {
        let ny = self.shapes[a][b].1;
        self.counts[a][b].counts[x * ny + y]
    }

    /// Relative frequencies as a correlation table. Fails when some setting
    /// pair was never realized.
    pub fn empirical_table(&self) -> Result<CorrelationTable> {
        let mut probs = Vec::with_capacity(self.settings_a.len());
        for (a, row) in self.counts.iter().enumerate() {
            let mut out_row = Vec::with_capacity(row.len());
            for (b, oc) in row.iter().enumerate() {
                if oc.n_trials == 0 {
                    return Err(Error::InvalidProbabilities {
                        reason: format!("setting ({a},{b}) has no trials"),
                    });
                }
                let (nx, ny) = self.shapes[a][b];
                let freqs = oc.frequencies();
                out_row.push((0..nx).map(|x| freqs[x * ny..(x + 1) * ny].to_vec()).collect());
            }
            probs.push(out_row);
        }
        CorrelationTable::new(self.settings_a.clone(), self.settings_b.clone(), probs)
    }

    /// CSV with header `a,b,x,y,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(["a", "b", "x", "y", "count"]).map_err(io)?;
        for (a, row) in self.shapes.iter().enumerate() {
            for (b, &(nx, ny)) in row.iter().enumerate() {
                for x in 0..nx {
                    for y in 0..ny {
                        w.write_record([
                            self.settings_a[a].clone(),
                            self.settings_b[b].clone(),
                            x.to_string(),
                            y.to_string(),
                            self.count(a, b, x, y).to_string(),
                        ])
                        .map_err(io)?;
                    }
                }
            }
        }
        w.flush()
            .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
    }
}

/// Samples a data table from the joint distributions of `table`.
pub fn data_table_sim(
    table: &CorrelationTable,
    n_per_setting: u64,
    seed: u64,
    mode: SamplingMode,
) -> Result<DataTable> {
    if n_per_setting == 0 {
        return Err(Error::InvalidArgument("need at least one trial per setting".into()));
    }
    let na = table.settings_a().len();
    let nb = table.settings_b().len();
    let mut shapes = vec![vec![(0, 0); nb]; na];
    let mut joint = Vec::with_capacity(na * nb);
    for (a, row) in shapes.iter_mut().enumerate() {
        for (b, shape) in row.iter_mut().enumerate() {
            let block = table.block(a, b);
            *shape = (block.len(), block[0].len());
            let flat: Vec<f64> = block.iter().flatten().copied().collect();
            let total: f64 = flat.iter().sum();
            joint.push(ProbVector::new(flat.iter().map(|v| v / total).collect())?);
        }
    }

    let counts: Vec<OutcomeCounts> = match mode {
        SamplingMode::Blocked => joint
            .iter()
            .enumerate()
            .map(|(s, q)| sample_outcomes(q, n_per_setting, derive_seed(seed, BLOCK_STREAM, s as u64)))
            .collect::<Result<_>>()?,
        SamplingMode::PerTrialRandom => {
            let cdfs: Vec<_> = joint.iter().map(cumulative).collect();
            let mut out: Vec<OutcomeCounts> = joint
                .iter()
                .map(|q| OutcomeCounts {
                    counts: vec![0; q.len()],
                    n_trials: 0,
                    seed,
                })
                .collect();
            let mut rng = rng_from_seed(seed);
            for _ in 0..n_per_setting * (na * nb) as u64 {
                let s = rng.random_range(0..na * nb);
                let (cdf, last) = &cdfs[s];
                let k = draw(cdf, *last, &mut rng);
                out[s].counts[k] += 1;
                out[s].n_trials += 1;
            }
            out
        }
    };
    let mut it = counts.into_iter();
    let counts = (0..na)
        .map(|_| it.by_ref().take(nb).collect())
        .collect();
    Ok(DataTable {
        settings_a: table.settings_a().to_vec(),
        settings_b: table.settings_b().to_vec(),
        sampling_mode: mode,
        seed,
        n_per_setting,
        shapes,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::{correlation_table, phi_plus, MeasurementFamily, QubitAxis};

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn certain_outcome() {
        let c = sample_outcomes(&pv(&[1.0, 0.0]), 100, 3).unwrap();
        assert_eq!(c.counts, vec![100, 0]);
        let c = sample_outcomes(&pv(&[0.0, 1.0]), 100, 3).unwrap();
        assert_eq!(c.counts, vec![0, 100]);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(sample_outcomes(&pv(&[0.5, 0.5]), 0, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let q = pv(&[0.2, 0.3, 0.5]);
        assert_eq!(sample_outcomes(&q, 1000, 9).unwrap(), sample_outcomes(&q, 1000, 9).unwrap());
        assert_ne!(sample_outcomes(&q, 1000, 9).unwrap(), sample_outcomes(&q, 1000, 10).unwrap());
    }

    #[test]
    fn sweep_is_ordered() {
        let q = pv(&[0.5, 0.5]);
        let sweep = seed_sweep(&q, 100, 4, 16).unwrap();
        for (i, c) in sweep.iter().enumerate() {
            assert_eq!(c.seed, derive_seed(4, SWEEP_STREAM, i as u64));
            assert_eq!(*c, sample_outcomes(&q, 100, c.seed).unwrap());
        }
    }

    #[test]
    fn binomial_trivial_values() {
        assert!((binomial_interval_prob(1, 0.5, 1, 1).unwrap() - 0.5).abs() < 1e-15);
        for (n, p) in [(10, 0.3), (100, 0.5), (7, 0.0), (7, 1.0)] {
            assert!((binomial_interval_prob(n, p, 0, n).unwrap() - 1.0).abs() < 1e-12);
        }
        assert_eq!(binomial_pmf(5, 0.0, 1).unwrap(), 0.0);
        assert_eq!(binomial_pmf(5, 1.0, 5).unwrap(), 1.0);
        assert!(binomial_interval_prob(5, 0.5, 3, 2).is_err());
        assert!(binomial_interval_prob(5, 0.5, 0, 6).is_err());
        assert!(binomial_interval_prob(5, 1.5, 0, 5).is_err());
    }

    #[test]
    fn coin_interval() {
        let p = binomial_interval_prob(100, 0.5, 30, 70).unwrap();
        assert!((p - 0.999968).abs() < 1e-6);
        assert!((binomial_pmf(100, 0.5, 57).unwrap() - 0.0301).abs() < 1e-4);
    }

    #[test]
    fn certain_table() {
        let t = CorrelationTable::new(
            vec!["0".into()],
            vec!["0".into()],
            vec![vec![vec![vec![1.0, 0.0], vec![0.0, 0.0]]]],
        )
        .unwrap();
        for mode in [SamplingMode::Blocked, SamplingMode::PerTrialRandom] {
            let d = data_table_sim(&t, 50, 1, mode).unwrap();
            assert_eq!(d.count(0, 0, 0, 0), 50);
            assert_eq!(d.counts[0][0].n_trials, 50);
        }
    }

    #[test]
    fn per_trial_counts_sum() {
        let z = MeasurementFamily::from_axes(&[QubitAxis::Z, QubitAxis::X]).unwrap();
        let t = correlation_table(&phi_plus(), &z, &z).unwrap();
        let d = data_table_sim(&t, 1000, 2, SamplingMode::PerTrialRandom).unwrap();
        let total: u64 = d.counts.iter().flatten().map(|c| c.n_trials).sum();
        assert_eq!(total, 4000);
        for c in d.counts.iter().flatten() {
            assert_eq!(c.counts.iter().sum::<u64>(), c.n_trials);
        }
    }

    #[test]
    fn csv_and_mode_strings() {
        let z = MeasurementFamily::from_axes(&[QubitAxis::Z]).unwrap();
        let t = correlation_table(&phi_plus(), &z, &z).unwrap();
        let d = data_table_sim(&t, 10, 0, SamplingMode::Blocked).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("a,b,x,y,count\n"));
        assert_eq!("per-trial-random".parse::<SamplingMode>().unwrap(), SamplingMode::PerTrialRandom);
        assert_eq!(serde_json::to_string(&SamplingMode::Blocked).unwrap(), "\"blocked\"");
    }
}
