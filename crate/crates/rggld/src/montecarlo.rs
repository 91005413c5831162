//! Ensemble simulation confronting the rate functions with sampled graphs.
//!
//! Every operation is a pure function of `(params, trials)`: trial `t` draws
//! from an independent RNG stream keyed by `(seed, t)`, so results do not
//! depend on scheduling or completion order. Trials run in parallel on the
//! ambient rayon pool.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{
    build_coloured_rgg_with, build_rgg, radius_from_c, sample_points_with, ColouredGraph,
    Connectivity, Graph, ModelParams,
};
use crate::io::measure_to_json;
use crate::measures::{neighbourhood_counts, pair_counts, CountableMeasure};
use crate::rates::{rate_j, rho_c, typical_varpi, xi1, RateValue};

/// 95% normal quantile for Wilson intervals.
const WILSON_Z: f64 = 1.959963984540054;

/// Per-trial stream: ChaCha12 keyed by the seed with the trial index as the
/// stream number, so trials are independent and order-insensitive.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Outcome of a single simulated graph.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    /// Isolated-vertex proportion D(0).
    pub isolated: f64,
    pub edges: usize,
    pub degree_counts: BTreeMap<u32, u64>,
}

/// Aggregate statistics over an ensemble of independent trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub n: usize,
    pub trials: usize,
    pub mean_isolated: f64,
    pub se_isolated: f64,
    pub mean_degree: f64,
    pub se_degree: f64,
    pub aggregate_degree_distribution: CountableMeasure<u32>,
    pub seed: u64,
}

impl TrialSummary {
    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "trials": self.trials,
            "mean_isolated": self.mean_isolated,
            "se_isolated": self.se_isolated,
            "mean_degree": self.mean_degree,
            "se_degree": self.se_degree,
            "degree_distribution": measure_to_json(&self.aggregate_degree_distribution),
            "seed": self.seed,
        })
    }
}

/// Tail estimate for the event `D(0) >= y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub y: f64,
    pub n: usize,
    pub trials: usize,
    pub hits: usize,
    pub p_hat: f64,
    /// `-log(p_hat)/n`; undefined (None) when no trial hit the event.
    pub log_rate: Option<f64>,
    pub wilson_ci: (f64, f64),
}

impl TailEstimate {
    pub fn to_json(&self) -> Value {
        json!({
            "y": self.y,
            "n": self.n,
            "trials": self.trials,
            "hits": self.hits,
            "p_hat": self.p_hat,
            "log_rate": self.log_rate,
            "wilson_ci": [self.wilson_ci.0, self.wilson_ci.1],
        })
    }
}

/// Tail estimates across a ladder of graph sizes, with the rate-function
/// value they probe.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeReport {
    pub y: f64,
    pub xi1: f64,
    pub estimates: Vec<TailEstimate>,
}

impl SlopeReport {
    pub fn to_json(&self) -> Value {
        json!({
            "y": self.y,
            "xi1": self.xi1,
            "estimates": self.estimates.iter().map(TailEstimate::to_json).collect::<Vec<_>>(),
        })
    }
}

/// Conditional neighbour-count statistics of a coloured ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ColouredReport {
    pub n: usize,
    pub trials: usize,
    pub colours: usize,
    /// Pooled mean of `l(b)` given own colour `a`, indexed `[a][b]`.
    pub conditional_mean: Vec<Vec<f64>>,
    pub conditional_se: Vec<Vec<f64>>,
    pub conditional_var: Vec<Vec<f64>>,
    /// Limit parameter `rho(d) C(a,b) nu(b)`.
    pub target: Vec<Vec<f64>>,
    pub samples_per_colour: Vec<u64>,
    /// `rate_j` at the pooled empirical pair/neighbourhood measures per
    /// ladder size.
    pub rate_j_ladder: Vec<(usize, f64)>,
    pub seed: u64,
}

impl ColouredReport {
    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "trials": self.trials,
            "colours": self.colours,
            "conditional_mean": self.conditional_mean,
            "conditional_se": self.conditional_se,
            "conditional_var": self.conditional_var,
            "target": self.target,
            "samples_per_colour": self.samples_per_colour,
            "rate_j_ladder": self.rate_j_ladder.iter()
                .map(|(n, j)| json!({"n": n, "rate_j": j}))
                .collect::<Vec<_>>(),
            "seed": self.seed,
        })
    }
}

fn build_trial_graph(params: &ModelParams, stream: u64) -> Result<Graph> {
    let mut rng = trial_rng(params.seed, stream);
    let cloud = sample_points_with(params.n, params.d, &mut rng)?;
    match &params.connectivity {
        Connectivity::Scalar { c } => {
            let r = radius_from_c(params.n, params.d, *c)?;
            build_rgg(&cloud, r, params.mode)
        }
        Connectivity::Coloured { .. } => {
            Ok(build_coloured_rgg_with(&cloud, params, &mut rng)?.graph)
        }
    }
}

fn build_trial_coloured(params: &ModelParams, stream: u64) -> Result<ColouredGraph> {
    let mut rng = trial_rng(params.seed, stream);
    let cloud = sample_points_with(params.n, params.d, &mut rng)?;
    build_coloured_rgg_with(&cloud, params, &mut rng)
}

/// Runs one trial of the ensemble at the given stream index.
pub fn run_single_trial(params: &ModelParams, trial: usize) -> Result<TrialOutcome> {
    let graph = build_trial_graph(params, trial as u64)?;
    let mut degree_counts = BTreeMap::new();
    for v in 0..graph.n() {
        *degree_counts.entry(graph.degree(v) as u32).or_insert(0u64) += 1;
    }
    let isolated = degree_counts.get(&0).copied().unwrap_or(0) as f64 / graph.n() as f64;
    Ok(TrialOutcome {
        trial,
        isolated,
        edges: graph.num_edges(),
        degree_counts,
    })
}

fn validate_run(params: &ModelParams, trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::invalid_parameter("trials", "must be >= 1"));
    }
    if params.n == 0 {
        return Err(Error::invalid_parameter("n", "must be >= 1"));
    }
    Ok(())
}

/// All per-trial outcomes, in trial order.
pub fn run_trial_outcomes(params: &ModelParams, trials: usize) -> Result<Vec<TrialOutcome>> {
    validate_run(params, trials)?;
    (0..trials)
        .into_par_iter()
        .map(|t| run_single_trial(params, t))
        .collect()
}

/// Aggregates outcomes into ensemble statistics. Reductions run in trial
/// order so the result does not depend on how the slice was assembled.
pub fn summarize(params: &ModelParams, outcomes: &[TrialOutcome]) -> TrialSummary {
    let mut ordered: Vec<&TrialOutcome> = outcomes.iter().collect();
    ordered.sort_by_key(|o| o.trial);
    let outcomes = ordered;
    let trials = outcomes.len();
    let n = params.n;
    let isolated: Vec<f64> = outcomes.iter().map(|o| o.isolated).collect();
    let degree: Vec<f64> = outcomes
        .iter()
        .map(|o| 2.0 * o.edges as f64 / n as f64)
        .collect();
    let (mean_isolated, se_isolated) = mean_and_se(&isolated);
    let (mean_degree, se_degree) = mean_and_se(&degree);

    let mut pooled: BTreeMap<u32, u64> = BTreeMap::new();
    for outcome in &outcomes {
        for (&k, &count) in &outcome.degree_counts {
            *pooled.entry(k).or_insert(0) += count;
        }
    }
    let aggregate_degree_distribution =
        CountableMeasure::from_counts(&pooled, (n * trials) as u64)
            .expect("pooled counts nonnegative");

    TrialSummary {
        n,
        trials,
        mean_isolated,
        se_isolated,
        mean_degree,
        se_degree,
        aggregate_degree_distribution,
        seed: params.seed,
    }
}

/// Builds `trials` independent graphs and aggregates D(0), the mean degree
/// `2|E|/n`, and the pooled degree distribution.
pub fn run_trials(params: &ModelParams, trials: usize) -> Result<TrialSummary> {
    let outcomes = run_trial_outcomes(params, trials)?;
    Ok(summarize(params, &outcomes))
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(hits: usize, trials: usize) -> (f64, f64) {
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the score bounds touch the endpoints exactly at p = 0 and p = 1
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

fn tail_estimate_with_base(
    params: &ModelParams,
    y: f64,
    trials: usize,
    stream_base: u64,
) -> Result<TailEstimate> {
    validate_run(params, trials)?;
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::domain("y", format!("{y} outside [0,1]")));
    }
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<usize> {
            let graph = build_trial_graph(params, stream_base | t as u64)?;
            let isolated = (0..graph.n()).filter(|&v| graph.degree(v) == 0).count();
            Ok(usize::from(isolated as f64 / graph.n() as f64 >= y))
        })
        .try_reduce(|| 0usize, |a, b| Ok(a + b))?;
    let p_hat = hits as f64 / trials as f64;
    let log_rate = if hits > 0 {
        Some(-p_hat.ln() / params.n as f64)
    } else {
        None
    };
    Ok(TailEstimate {
        y,
        n: params.n,
        trials,
        hits,
        p_hat,
        log_rate,
        wilson_ci: wilson_interval(hits, trials),
    })
}

/// Plain Monte Carlo estimate of `P(D(0) >= y)` with a Wilson 95% interval.
pub fn estimate_tail_probability(
    params: &ModelParams,
    y: f64,
    trials: usize,
) -> Result<TailEstimate> {
    tail_estimate_with_base(params, y, trials, 0)
}

/// One tail estimate per graph size in `n_list`, radius recomputed per n,
/// together with the `xi1(y)` value the log-rates probe.
pub fn estimate_rate_slope(
    params: &ModelParams,
    y: f64,
    n_list: &[usize],
    trials: usize,
) -> Result<SlopeReport> {
    let c = match &params.connectivity {
        Connectivity::Scalar { c } => *c,
        Connectivity::Coloured { .. } => {
            return Err(Error::invalid_parameter(
                "params",
                "slope estimation targets the scalar model",
            ))
        }
    };
    if n_list.is_empty() {
        return Err(Error::invalid_parameter("n_list", "must be nonempty"));
    }
    let xi = xi1(y, params.d, c)?.value();
    let mut estimates = Vec::with_capacity(n_list.len());
    for (idx, &n) in n_list.iter().enumerate() {
        let mut scoped = params.clone();
        scoped.n = n;
        // disjoint stream ranges per ladder entry
        let base = ((idx as u64) + 1) << 32;
        estimates.push(tail_estimate_with_base(&scoped, y, trials, base)?);
    }
    Ok(SlopeReport {
        y,
        xi1: xi,
        estimates,
    })
}

/// Pools per-vertex neighbour counts by own colour against the product
/// Poisson limit parameters, and evaluates the joint rate at pooled
/// empirical measures over an n-ladder.
pub fn coloured_typical_check(
    params: &ModelParams,
    trials: usize,
    n_ladder: &[usize],
) -> Result<ColouredReport> {
    validate_run(params, trials)?;
    let (kernel, nu) = match &params.connectivity {
        Connectivity::Coloured { kernel, nu } => (kernel.clone(), nu.clone()),
        Connectivity::Scalar { .. } => {
            return Err(Error::invalid_parameter(
                "params",
                "coloured kernel and colour law required",
            ))
        }
    };
    let k = kernel.size();

    // accumulate sum / sumsq of l(b) per own colour over all vertices of
    // all trials
    let stats = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(Vec<f64>, Vec<f64>, Vec<u64>)> {
            let cg = build_trial_coloured(params, t as u64)?;
            let mut sum = vec![0.0f64; k * k];
            let mut sumsq = vec![0.0f64; k * k];
            let mut count = vec![0u64; k];
            for v in 0..cg.n() {
                let a = cg.colours[v] as usize;
                count[a] += 1;
                let mut per_colour = vec![0u32; k];
                for &u in cg.graph.neighbours(v) {
                    per_colour[cg.colours[u as usize] as usize] += 1;
                }
                for (b, &cnt) in per_colour.iter().enumerate() {
                    sum[a * k + b] += cnt as f64;
                    sumsq[a * k + b] += (cnt as f64) * (cnt as f64);
                }
            }
            Ok((sum, sumsq, count))
        })
        .try_reduce(
            || (vec![0.0; k * k], vec![0.0; k * k], vec![0u64; k]),
            |mut acc, item| {
                for i in 0..k * k {
                    acc.0[i] += item.0[i];
                    acc.1[i] += item.1[i];
                }
                for a in 0..k {
                    acc.2[a] += item.2[a];
                }
                Ok(acc)
            },
        )?;
    let (sum, sumsq, samples_per_colour) = stats;

    let t = rho_c(params.d, 1.0)?; // rho(d)
    let mut conditional_mean = vec![vec![0.0; k]; k];
    let mut conditional_se = vec![vec![0.0; k]; k];
    let mut conditional_var = vec![vec![0.0; k]; k];
    let mut target = vec![vec![0.0; k]; k];
    for a in 0..k {
        let count = samples_per_colour[a] as f64;
        for b in 0..k {
            target[a][b] = t * kernel.at(a as u32, b as u32) * nu[b];
            if samples_per_colour[a] == 0 {
                continue;
            }
            let mean = sum[a * k + b] / count;
            conditional_mean[a][b] = mean;
            if samples_per_colour[a] > 1 {
                let var = (sumsq[a * k + b] - count * mean * mean) / (count - 1.0);
                let var = var.max(0.0);
                conditional_var[a][b] = var;
                conditional_se[a][b] = (var / count).sqrt();
            }
        }
    }

    // joint rate at pooled empirical measures across the ladder
    let nu_measure = CountableMeasure::from_entries(
        nu.iter().enumerate().map(|(a, &p)| (a as u32, p)),
    )?;
    let mut rate_j_ladder = Vec::with_capacity(n_ladder.len());
    for (idx, &n) in n_ladder.iter().enumerate() {
        let mut scoped = params.clone();
        scoped.n = n;
        let base = ((idx as u64) + 1) << 32;
        let pooled = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<_> {
                let cg = build_trial_coloured(&scoped, base | t as u64)?;
                Ok((pair_counts(&cg), neighbourhood_counts(&cg)))
            })
            .try_reduce(
                || (BTreeMap::new(), BTreeMap::new()),
                |mut acc, (pairs, neigh)| {
                    for (key, c) in pairs {
                        *acc.0.entry(key).or_insert(0) += c;
                    }
                    for (key, c) in neigh {
                        *acc.1.entry(key).or_insert(0) += c;
                    }
                    Ok(acc)
                },
            )?;
        let denom = (n * trials) as u64;
        let varpi = CountableMeasure::from_counts(&pooled.0, denom)?;
        let mu = CountableMeasure::from_counts(&pooled.1, denom)?;
        let j = match rate_j(&varpi, &mu, &nu_measure, &kernel, params.d)? {
            RateValue::Finite(v) => v,
            RateValue::Infinite => f64::INFINITY,
        };
        rate_j_ladder.push((n, j));
    }

    Ok(ColouredReport {
        n: params.n,
        trials,
        colours: k,
        conditional_mean,
        conditional_se,
        conditional_var,
        target,
        samples_per_colour,
        rate_j_ladder,
        seed: params.seed,
    })
}

/// The typical-law pair reference for a coloured parameter set, exposed for
/// report consumers.
pub fn coloured_reference(params: &ModelParams) -> Result<CountableMeasure<(u32, u32)>> {
    match &params.connectivity {
        Connectivity::Coloured { kernel, nu } => typical_varpi(kernel, nu, params.d),
        Connectivity::Scalar { .. } => Err(Error::invalid_parameter(
            "params",
            "coloured kernel and colour law required",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundaryMode, Kernel};

    fn scalar_params(n: usize, seed: u64) -> ModelParams {
        ModelParams::scalar(
            2,
            n,
            1.0 / std::f64::consts::PI,
            BoundaryMode::Torus,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn run_trials_deterministic() {
        let params = scalar_params(150, 99);
        let a = run_trials(&params, 3).unwrap();
        let b = run_trials(&params, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_trial_reproducible_and_order_free() {
        let params = scalar_params(120, 5);
        let forward = run_trial_outcomes(&params, 4).unwrap();
        // recompute individual trials out of order
        for &t in &[3usize, 1, 0, 2] {
            assert_eq!(run_single_trial(&params, t).unwrap(), forward[t]);
        }
        // aggregation ignores order
        let mut reversed = forward.clone();
        reversed.reverse();
        assert_eq!(summarize(&params, &forward), summarize(&params, &reversed));
    }

    #[test]
    fn aggregate_distribution_is_probability() {
        let params = scalar_params(200, 11);
        let summary = run_trials(&params, 5).unwrap();
        assert!(summary
            .aggregate_degree_distribution
            .is_probability(1e-12));
        assert!(summary.se_isolated >= 0.0);
        assert!(summary.se_degree >= 0.0);
    }

    #[test]
    fn zero_trials_rejected() {
        let params = scalar_params(100, 1);
        assert!(run_trials(&params, 0).is_err());
        assert!(estimate_tail_probability(&params, 0.5, 0).is_err());
    }

    #[test]
    fn tail_below_typical_value_is_certain() {
        // y far below e^{-1}: essentially every trial hits the event
        let params = scalar_params(400, 3);
        let est = estimate_tail_probability(&params, 0.1, 40).unwrap();
        assert_eq!(est.hits, est.trials);
        assert_eq!(est.p_hat, 1.0);
        assert!(est.log_rate.unwrap().abs() < 1e-12);
    }

    #[test]
    fn tail_zero_hits_flagged_not_error() {
        let params = scalar_params(400, 3);
        let est = estimate_tail_probability(&params, 0.99, 20).unwrap();
        assert_eq!(est.hits, 0);
        assert_eq!(est.p_hat, 0.0);
        assert!(est.log_rate.is_none());
        assert_eq!(est.wilson_ci.0, 0.0);
    }

    #[test]
    fn wilson_interval_basics() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && 0.5 < hi);
        let (_, hi) = wilson_interval(100, 100);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn slope_report_deterministic_and_typed() {
        let params = scalar_params(60, 17);
        let a = estimate_rate_slope(&params, 0.55, &[40, 60], 200).unwrap();
        let b = estimate_rate_slope(&params, 0.55, &[40, 60], 200).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.estimates.len(), 2);
        assert_eq!(a.estimates[0].n, 40);
        assert!((a.xi1 - 0.04025023350084086).abs() < 1e-9);
    }

    #[test]
    fn slope_at_typical_value_has_vanishing_rate() {
        let params = scalar_params(0, 23); // n overridden per ladder entry
        let y = (-1.0f64).exp();
        let report = estimate_rate_slope(&params, y, &[200, 400], 60).unwrap();
        for est in &report.estimates {
            let rate = est.log_rate.expect("typical event must be hit");
            assert!(rate < 0.01, "n {}: rate {rate}", est.n);
        }
    }

    #[test]
    fn coloured_check_cross_zero_kernel() {
        let kernel = Kernel::new(vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let params = ModelParams::coloured(
            2,
            300,
            kernel,
            vec![0.5, 0.5],
            BoundaryMode::Torus,
            7,
        )
        .unwrap();
        let report = coloured_typical_check(&params, 5, &[]).unwrap();
        // cross-colour neighbour counts identically zero
        assert_eq!(report.conditional_mean[0][1], 0.0);
        assert_eq!(report.conditional_mean[1][0], 0.0);
        assert_eq!(report.conditional_var[0][1], 0.0);
        assert!(report.conditional_mean[0][0] > 0.0);
    }

    #[test]
    fn coloured_check_deterministic() {
        let kernel = Kernel::constant(2, 0.5).unwrap();
        let params = ModelParams::coloured(
            2,
            200,
            kernel,
            vec![0.5, 0.5],
            BoundaryMode::Torus,
            13,
        )
        .unwrap();
        let a = coloured_typical_check(&params, 4, &[100]).unwrap();
        let b = coloured_typical_check(&params, 4, &[100]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rate_j_ladder.len(), 1);
        assert!(a.rate_j_ladder[0].1.is_finite());
    }
}
