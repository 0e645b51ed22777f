//! Seeded Monte Carlo harness.
//!
//! Trial `i` always receives the seed `trial_seed(seed, i)`, and results are
//! folded in index order, so a report is a pure function of its inputs no
//! matter how many worker threads ran the trials.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::trial_seed;

/// Trials are scheduled in blocks of this size to bound memory.
const BLOCK: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub trials: usize,
    pub seed: u64,
    pub parallelism: usize,
}

impl SimConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        SimConfig {
            trials,
            seed,
            parallelism: 1,
        }
    }

    pub fn with_parallelism(mut self, threads: usize) -> Self {
        self.parallelism = threads;
        self
    }

    fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::InvalidParameter(
                "parallelism must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(trials)`; NaN for one trial.
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub trials: usize,
    pub seed: u64,
}

impl SimReport {
    /// A report for an exactly known value.
    pub fn exact(value: f64, seed: u64) -> Self {
        SimReport {
            mean: value,
            stderr: 0.0,
            ci95: (value, value),
            trials: 1,
            seed,
        }
    }
}

/// Streaming mean and variance.
#[derive(Clone, Copy, Debug, Default)]
pub struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn report(&self, seed: u64) -> SimReport {
        let stderr = if self.count < 2 {
            f64::NAN
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0).sqrt() / (self.count as f64).sqrt()
        };
        let half = if stderr.is_nan() { 0.0 } else { 1.96 * stderr };
        SimReport {
            mean: self.mean,
            stderr,
            ci95: (self.mean - half, self.mean + half),
            trials: self.count,
            seed,
        }
    }
}

/// Summarizes already collected samples.
pub fn summarize(values: &[f64], seed: u64) -> SimReport {
    let mut acc = Welford::default();
    values.iter().for_each(|&x| acc.push(x));
    acc.report(seed)
}

/// Runs `runner(trial_seed, trial_index)` for every trial and feeds each
/// result, in index order, to `sink`.
pub fn run_trials<T, F, S>(config: &SimConfig, runner: F, mut sink: S) -> Result<()>
where
    T: Send,
    F: Fn(u64, usize) -> Result<T> + Sync,
    S: FnMut(T),
{
    config.check()?;
    let call = |i: usize| {
        runner(trial_seed(config.seed, i as u64), i).map_err(|e| Error::Trial {
            trial: i,
            source: Box::new(e),
        })
    };
    if config.parallelism == 1 {
        for i in 0..config.trials {
            sink(call(i)?);
        }
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let mut start = 0;
    while start < config.trials {
        let end = (start + BLOCK).min(config.trials);
        let block: Vec<Result<T>> =
            pool.install(|| (start..end).into_par_iter().map(call).collect());
        for result in block {
            sink(result?);
        }
        start = end;
    }
    Ok(())
}

/// Mean and standard error of a scalar runner.
pub fn estimate_value<F>(runner: F, config: &SimConfig) -> Result<SimReport>
where
    F: Fn(u64, usize) -> Result<f64> + Sync,
{
    let mut acc = Welford::default();
    run_trials(config, runner, |x| acc.push(x))?;
    Ok(acc.report(config.seed))
}

/// Per-coordinate reports of a runner returning `dims` values per trial.
pub fn estimate_vector<F>(runner: F, dims: usize, config: &SimConfig) -> Result<Vec<SimReport>>
where
    F: Fn(u64, usize) -> Result<Vec<f64>> + Sync,
{
    let mut acc = vec![Welford::default(); dims];
    let mut bad = None;
    run_trials(config, runner, |xs: Vec<f64>| {
        if xs.len() != dims && bad.is_none() {
            bad = Some(xs.len());
        }
        for (a, x) in acc.iter_mut().zip(xs) {
            a.push(x);
        }
    })?;
    if let Some(len) = bad {
        return Err(Error::DimensionMismatch(format!(
            "runner returned {len} values, expected {dims}"
        )));
    }
    Ok(acc.iter().map(|a| a.report(config.seed)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioOutcome {
    pub pass: bool,
    /// `mean / denominator`.
    pub ratio: f64,
    /// `mean − (guarantee · denominator − 3 · stderr)`; negative on failure.
    pub slack: f64,
}

/// Passes iff `mean ≥ guarantee · denominator − 3 · stderr`.
pub fn ratio_report(report: &SimReport, denominator: f64, guarantee: f64) -> Result<RatioOutcome> {
    if !(denominator > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "denominator must be positive, got {denominator}"
        )));
    }
    let band = if report.stderr.is_nan() {
        0.0
    } else {
        3.0 * report.stderr
    };
    let slack = report.mean - (guarantee * denominator - band);
    Ok(RatioOutcome {
        pass: slack >= 0.0,
        ratio: report.mean / denominator,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn deterministic_runner() {
        let r = estimate_value(|_, _| Ok(1.0), &SimConfig::new(10, 1)).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.ci95, (1.0, 1.0));
    }

    #[test]
    fn stderr_matches_direct_formula() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let r = summarize(&xs, 0);
        let mean = 15.0 / 4.0;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 3.0;
        assert!((r.mean - mean).abs() < 1e-15);
        assert!((r.stderr - (var / 4.0).sqrt()).abs() < 1e-15);
        assert!((r.ci95.1 - (r.mean + 1.96 * r.stderr)).abs() < 1e-15);
    }

    #[test]
    fn single_trial_has_nan_stderr() {
        let r = estimate_value(|_, _| Ok(2.0), &SimConfig::new(1, 0)).unwrap();
        assert!(r.stderr.is_nan());
    }

    fn coin(seed: u64, _: usize) -> Result<f64> {
        Ok(crate::rng::seeded(seed).gen::<f64>())
    }

    #[test]
    fn identical_across_thread_counts() {
        let one = estimate_value(coin, &SimConfig::new(100_000, 9)).unwrap();
        let four = estimate_value(coin, &SimConfig::new(100_000, 9).with_parallelism(4)).unwrap();
        assert_eq!(one, four);
        assert_eq!(
            one,
            estimate_value(coin, &SimConfig::new(100_000, 9)).unwrap()
        );
    }

    #[test]
    fn failure_reports_trial_index() {
        let err = estimate_value(
            |_, i| {
                if i == 7 {
                    Err(Error::MissingOracle)
                } else {
                    Ok(0.0)
                }
            },
            &SimConfig::new(20, 0).with_parallelism(3),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Trial { trial: 7, .. }));
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(estimate_value(coin, &SimConfig::new(0, 0)).is_err());
    }

    #[test]
    fn doubling_trials_shrinks_stderr() {
        let mut ratios = Vec::new();
        for rep in 0..10 {
            let a = estimate_value(coin, &SimConfig::new(20_000, rep)).unwrap();
            let b = estimate_value(coin, &SimConfig::new(40_000, rep + 100)).unwrap();
            ratios.push(b.stderr / a.stderr);
        }
        let target = std::f64::consts::FRAC_1_SQRT_2;
        for r in ratios {
            assert!((r - target).abs() <= 0.2 * target, "{r}");
        }
    }

    #[test]
    fn ratio_report_examples() {
        let g = 1.0 - (-1.0f64).exp();
        let rep = |mean, stderr| SimReport {
            mean,
            stderr,
            ci95: (mean, mean),
            trials: 2,
            seed: 0,
        };
        assert!(ratio_report(&rep(0.9, 0.0), 1.0, g).unwrap().pass);
        assert!(!ratio_report(&rep(0.5, 0.0), 1.0, g).unwrap().pass);
        assert!(ratio_report(&rep(0.632, 0.001), 1.0, g).unwrap().pass);
        assert!(ratio_report(&rep(0.632, 0.0), 0.0, g).is_err());
    }

    #[test]
    fn vector_estimates() {
        let reps =
            estimate_vector(|_, i| Ok(vec![1.0, i as f64]), 2, &SimConfig::new(5, 0)).unwrap();
        assert_eq!(reps[0].mean, 1.0);
        assert_eq!(reps[1].mean, 2.0);
        assert!(estimate_vector(|_, _| Ok(vec![1.0]), 2, &SimConfig::new(3, 0)).is_err());
    }
}
