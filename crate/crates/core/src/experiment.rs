//! Monte Carlo harness for neighbourhood recovery and the quadratic-form tail bound.
//!
//! A trial draws a random graph and block model, picks a target node, samples data and
//! runs the estimator. The graph, model and target of trial `t` are keyed by
//! `(master_seed, t)` and shared by every grid point; the samples are keyed by
//! `(master_seed, grid index, t)`. Results are therefore a pure function of the config,
//! whatever the thread count.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;

use crate::concentration::{empirical_tails, tail_bound, QuadraticForm};
use crate::error::{Error, Result};
use crate::graph_model::{build_block_model, random_cig, verify_assumptions, BlockModel, Cig};
use crate::regression::{
    combine_neighborhoods, default_lambda, estimate_all_neighborhoods, estimate_neighborhood_factored,
    rho_condition_holds, sample_size_bound, CombineRule, EstimatorConfig,
};
use crate::rng::{derive_seed, keyed_rng, tag};
use crate::sampler::sample_factors;
use crate::textio::fmt_f64;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExperimentKind {
    #[default]
    Recovery,
    PhaseTransition,
}

/// What a trial counts as an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecoveryTarget {
    /// The estimated neighbourhood of one random node differs from the true one.
    #[default]
    Node,
    /// The combined graph estimate differs from the true graph.
    Graph,
}

/// How the sample size of each grid point is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum SizeGrid {
    BlockLengths(Vec<usize>),
    /// Rounded up to a multiple of `B`.
    SampleSizes(Vec<usize>),
    /// Multiples of the sufficient sample size, rounded up to a multiple of `B`.
    BoundFactors(Vec<f64>),
}

impl SizeGrid {
    fn len(&self) -> usize {
        match self {
            SizeGrid::BlockLengths(v) => v.len(),
            SizeGrid::SampleSizes(v) => v.len(),
            SizeGrid::BoundFactors(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    /// `ρ_min / 6`.
    Default,
    Explicit(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub target: RecoveryTarget,
    pub p: usize,
    /// Degree bound of the generated graphs; 0 gives the empty graph.
    pub s_true: usize,
    /// Estimator budget.
    pub s_est: usize,
    pub blocks: usize,
    pub grid: SizeGrid,
    pub beta: f64,
    pub coupling: f64,
    pub lambda_mode: LambdaMode,
    /// Overrides the achieved minimum partial correlation for the penalty and the bound.
    pub rho_min: Option<f64>,
    pub trials: usize,
    pub eta: f64,
    pub master_seed: u64,
    pub combine_rule: CombineRule,
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    /// Node-recovery config with the given grid and defaults elsewhere.
    pub fn new(p: usize, s: usize, blocks: usize, grid: SizeGrid) -> Self {
        ExperimentConfig {
            kind: ExperimentKind::Recovery,
            target: RecoveryTarget::Node,
            p,
            s_true: s,
            s_est: s,
            blocks,
            grid,
            beta: 2.0,
            coupling: 0.5,
            lambda_mode: LambdaMode::Default,
            rho_min: None,
            trials: 100,
            eta: 0.1,
            master_seed: 0,
            combine_rule: CombineRule::Or,
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.p < 2 {
            return bad(format!("p must be at least 2, got {}", self.p));
        }
        if self.s_true >= self.p {
            return bad(format!("s_true = {} must be below p = {}", self.s_true, self.p));
        }
        if self.s_est < self.s_true {
            return bad(format!("s_est = {} must be at least s_true = {}", self.s_est, self.s_true));
        }
        if self.s_est == 0 {
            return bad("s_est must be positive".into());
        }
        if self.blocks == 0 {
            return bad("B must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.grid.len() == 0 {
            return bad("size grid is empty".into());
        }
        let grid_ok = match &self.grid {
            SizeGrid::BlockLengths(v) | SizeGrid::SampleSizes(v) => v.iter().all(|&x| x > 0),
            SizeGrid::BoundFactors(v) => v.iter().all(|&x| x > 0.0 && x.is_finite()),
        };
        if !grid_ok {
            return bad("grid entries must be positive".into());
        }
        if !(self.beta > 1.0) {
            return bad(format!("beta must exceed 1, got {}", self.beta));
        }
        if !(self.coupling > 0.0 && self.coupling < 1.0) {
            return bad(format!("coupling must lie in (0, 1), got {}", self.coupling));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if let LambdaMode::Explicit(l) = self.lambda_mode {
            if !(l >= 0.0 && l.is_finite()) {
                return bad(format!("lambda must be a nonnegative number, got {l}"));
            }
        }
        if let Some(r) = self.rho_min {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("rho_min must be positive, got {r}"));
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = std::collections::BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", idx + 1)))?;
            let k = k.trim();
            if !CONFIG_KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", idx + 1)));
            }
            if kv.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", idx + 1)));
            }
        }

        fn get<T: FromStr>(kv: &std::collections::BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
            kv.get(key)
                .map(|v| v.parse::<T>().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`"))))
                .transpose()
        }
        fn list<T: FromStr>(kv: &std::collections::BTreeMap<String, String>, key: &str) -> Result<Option<Vec<T>>> {
            kv.get(key)
                .map(|v| {
                    v.split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<T>().map_err(|_| Error::Config(format!("bad entry `{s}` in `{key}`"))))
                        .collect()
                })
                .transpose()
        }
        let require = |key: &str| Error::Config(format!("missing required key `{key}`"));

        let grids = [
            list::<usize>(&kv, "L_grid")?.map(SizeGrid::BlockLengths),
            list::<usize>(&kv, "N_grid")?.map(SizeGrid::SampleSizes),
            list::<f64>(&kv, "bound_factors")?.map(SizeGrid::BoundFactors),
        ];
        let mut grids = grids.into_iter().flatten();
        let grid = grids
            .next()
            .ok_or_else(|| Error::Config("one of `L_grid`, `N_grid`, `bound_factors` is required".into()))?;
        if grids.next().is_some() {
            return Err(Error::Config("give only one of `L_grid`, `N_grid`, `bound_factors`".into()));
        }

        let kind = match kv.get("kind").map(String::as_str) {
            None | Some("recovery") => ExperimentKind::Recovery,
            Some("phase_transition") => ExperimentKind::PhaseTransition,
            Some(other) => return Err(Error::Config(format!("unknown kind `{other}`"))),
        };
        let target = match kv.get("target").map(String::as_str) {
            None | Some("node") => RecoveryTarget::Node,
            Some("graph") => RecoveryTarget::Graph,
            Some(other) => return Err(Error::Config(format!("unknown target `{other}`"))),
        };
        let lambda_mode = match kv.get("lambda_mode").map(String::as_str) {
            None | Some("default") => LambdaMode::Default,
            Some(v) => LambdaMode::Explicit(
                v.parse().map_err(|_| Error::Config(format!("lambda_mode must be `default` or a number, got `{v}`")))?,
            ),
        };
        let combine_rule = match kv.get("combine_rule") {
            None => CombineRule::Or,
            Some(v) => v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
        };

        let p = get(&kv, "p")?.ok_or_else(|| require("p"))?;
        let s_true = get(&kv, "s_true")?.ok_or_else(|| require("s_true"))?;
        let cfg = ExperimentConfig {
            kind,
            target,
            p,
            s_true,
            s_est: get(&kv, "s_est")?.unwrap_or(s_true),
            blocks: get(&kv, "B")?.ok_or_else(|| require("B"))?,
            grid,
            beta: get(&kv, "beta")?.ok_or_else(|| require("beta"))?,
            coupling: get(&kv, "coupling")?.unwrap_or(0.5),
            lambda_mode,
            rho_min: get(&kv, "rho_min")?,
            trials: get(&kv, "trials")?.ok_or_else(|| require("trials"))?,
            eta: get(&kv, "eta")?.unwrap_or(0.1),
            master_seed: get(&kv, "master_seed")?.ok_or_else(|| require("master_seed"))?,
            combine_rule,
            record_wall_time: get(&kv, "record_wall_time")?.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Keys accepted by [`ExperimentConfig::parse`].
pub const CONFIG_KEYS: &[&str] = &[
    "kind",
    "target",
    "p",
    "s_true",
    "s_est",
    "B",
    "L_grid",
    "N_grid",
    "bound_factors",
    "beta",
    "coupling",
    "lambda_mode",
    "rho_min",
    "trials",
    "eta",
    "master_seed",
    "combine_rule",
    "record_wall_time",
];

/// One grid point of a recovery experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub n: usize,
    pub blocks: usize,
    pub block_len: usize,
    pub p: usize,
    pub s_true: usize,
    pub s_est: usize,
    pub beta: f64,
    /// Partial-correlation floor used for the penalty and the bound; infinite when the
    /// graphs have no edges and no override is set.
    pub rho_min: f64,
    pub lambda: f64,
    pub trials: usize,
    pub errors: usize,
    pub error_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound_n: f64,
    pub rho_cond: bool,
    pub wall_ms: u64,
}

pub const CSV_HEADER: &str =
    "N,B,L,p,s_true,s_est,beta,rho_min,lambda,trials,errors,error_rate,ci_low,ci_high,bound_N,rho_cond,wall_ms";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(errors: usize, trials: usize) -> (f64, f64) {
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

struct Trial {
    cig: Cig,
    model: BlockModel,
    node: usize,
    rho_min: Option<f64>,
}

fn prepare_trial(cfg: &ExperimentConfig, t: usize) -> Result<Trial> {
    let seed = derive_seed(cfg.master_seed, &[tag::TRIAL, t as u64]);
    let cig = if cfg.s_true == 0 {
        Cig::empty(cfg.p)
    } else {
        random_cig(cfg.p, cfg.s_true, derive_seed(seed, &[tag::GRAPH]))?
    };
    let model = build_block_model(&cig, cfg.blocks, 1, cfg.beta, cfg.coupling, derive_seed(seed, &[tag::MODEL]))?;
    let rho_min = verify_assumptions(&model, &cig, 0.0, cfg.s_est).rho_min_achieved;
    let candidates: Vec<usize> = (0..cfg.p).filter(|&i| !cig.neighbors(i).is_empty()).collect();
    let mut rng = keyed_rng(seed, &[tag::TARGET]);
    let node = if candidates.is_empty() {
        rng.random_range(0..cfg.p)
    } else {
        candidates[rng.random_range(0..candidates.len())]
    };
    Ok(Trial { cig, model, node, rho_min })
}

fn map_trials<T: Send>(trials: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    (0..trials).map(f).collect()
}

fn run_trial(cfg: &ExperimentConfig, trial: &Trial, est: &EstimatorConfig, block_len: usize, grid_idx: usize, t: usize) -> Result<bool> {
    let model = trial.model.with_block_len(block_len)?;
    let seed = derive_seed(cfg.master_seed, &[tag::SAMPLE, grid_idx as u64, t as u64]);
    let factors = sample_factors(&model, seed)?;
    Ok(match cfg.target {
        RecoveryTarget::Node => {
            let got = estimate_neighborhood_factored(&factors, trial.node, est)?;
            got.selected != trial.cig.neighbors(trial.node)
        }
        RecoveryTarget::Graph => {
            let all = estimate_all_neighborhoods(&factors, est)?;
            combine_neighborhoods(cfg.p, &all, cfg.combine_rule) != trial.cig
        }
    })
}

/// Runs `trials` independent recoveries per grid point and records the error rate.
pub fn run_node_recovery(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let trials = map_trials(cfg.trials, |t| prepare_trial(cfg, t))?;

    let rho_min = cfg.rho_min.or_else(|| {
        trials.iter().filter_map(|t| t.rho_min).fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
    });
    let lambda = match cfg.lambda_mode {
        LambdaMode::Explicit(l) => l,
        LambdaMode::Default => {
            let rho = rho_min.ok_or_else(|| {
                Error::Config("graphs have no edges: set `rho_min` or an explicit `lambda_mode`".into())
            })?;
            default_lambda(rho)?
        }
    };
    let rho_row = rho_min.unwrap_or(f64::INFINITY);
    let bound_n = sample_size_bound(cfg.beta, rho_row, cfg.p, cfg.s_est, cfg.eta)?;
    let est = EstimatorConfig::new(cfg.s_est, lambda)?;

    let block_lens: Vec<usize> = match &cfg.grid {
        SizeGrid::BlockLengths(v) => v.clone(),
        SizeGrid::SampleSizes(v) => v.iter().map(|&n| n.div_ceil(cfg.blocks)).collect(),
        SizeGrid::BoundFactors(v) => {
            if rho_min.is_none() {
                return Err(Error::Config("bound_factors need edges or a `rho_min` override".into()));
            }
            v.iter().map(|&f| ((f * bound_n / cfg.blocks as f64).ceil() as usize).max(1)).collect()
        }
    };

    let mut rows = Vec::with_capacity(block_lens.len());
    for (g, &block_len) in block_lens.iter().enumerate() {
        if 3 * cfg.s_est >= block_len || 3 * cfg.s_est >= cfg.p {
            return Err(Error::InfeasibleConfig(format!(
                "sparsity s = {} must be below p/3 = {:.3} and L/3 = {:.3}",
                cfg.s_est,
                cfg.p as f64 / 3.0,
                block_len as f64 / 3.0
            )));
        }
        let start = Instant::now();
        let outcomes = map_trials(cfg.trials, |t| run_trial(cfg, &trials[t], &est, block_len, g, t))?;
        let errors = outcomes.iter().filter(|&&e| e).count();
        let (ci_low, ci_high) = wilson_interval(errors, cfg.trials);
        rows.push(ResultRow {
            n: block_len * cfg.blocks,
            blocks: cfg.blocks,
            block_len,
            p: cfg.p,
            s_true: cfg.s_true,
            s_est: cfg.s_est,
            beta: cfg.beta,
            rho_min: rho_row,
            lambda,
            trials: cfg.trials,
            errors,
            error_rate: errors as f64 / cfg.trials as f64,
            ci_low,
            ci_high,
            bound_n,
            rho_cond: rho_condition_holds(rho_row, cfg.beta, block_len),
            wall_ms: if cfg.record_wall_time { start.elapsed().as_millis() as u64 } else { 0 },
        });
    }
    Ok(ExperimentResult { rows })
}

/// Error-rate curve over the size grid with its non-increasing least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTransition {
    /// Rows sorted by `N`.
    pub result: ExperimentResult,
    /// Non-increasing fit of the error rates, trial-weighted, aligned with the rows.
    pub isotonic_fit: Vec<f64>,
    /// `rate(N_max) <= rate(N_min) + 0.05`.
    pub trend_ok: bool,
}

/// Weighted least-squares fit constrained to be non-increasing (pool adjacent violators).
pub fn antitonic_fit(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // blocks of (mean, weight, count)
    let mut pools: Vec<(f64, f64, usize)> = Vec::new();
    for (&v, &w) in values.iter().zip(weights) {
        pools.push((v, w, 1));
        while pools.len() > 1 {
            let (m2, w2, c2) = pools[pools.len() - 1];
            let (m1, w1, c1) = pools[pools.len() - 2];
            if m1 >= m2 {
                break;
            }
            pools.pop();
            let w = w1 + w2;
            *pools.last_mut().unwrap() = ((m1 * w1 + m2 * w2) / w, w, c1 + c2);
        }
    }
    pools.into_iter().flat_map(|(m, _, c)| std::iter::repeat_n(m, c)).collect()
}

pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<PhaseTransition> {
    let mut result = run_node_recovery(cfg)?;
    result.rows.sort_by_key(|r| r.n);
    let rates: Vec<f64> = result.rows.iter().map(|r| r.error_rate).collect();
    let weights: Vec<f64> = result.rows.iter().map(|r| r.trials as f64).collect();
    let isotonic_fit = antitonic_fit(&rates, &weights);
    let trend_ok = match (rates.first(), rates.last()) {
        (Some(&lo_n), Some(&hi_n)) => hi_n <= lo_n + 0.05,
        _ => true,
    };
    Ok(PhaseTransition { result, isotonic_fit, trend_ok })
}

/// Runs the configured experiment kind and returns its rows.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    match cfg.kind {
        ExperimentKind::Recovery => run_node_recovery(cfg),
        ExperimentKind::PhaseTransition => Ok(run_phase_transition(cfg)?.result),
    }
}

impl ExperimentResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.blocks,
                r.block_len,
                r.p,
                r.s_true,
                r.s_est,
                fmt_f64(r.beta),
                fmt_f64(r.rho_min),
                fmt_f64(r.lambda),
                r.trials,
                r.errors,
                fmt_f64(r.error_rate),
                fmt_f64(r.ci_low),
                fmt_f64(r.ci_high),
                fmt_f64(r.bound_n),
                r.rho_cond,
                r.wall_ms
            );
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == CSV_HEADER => {}
            _ => return Err(Error::Parse { line: 1, msg: "unexpected CSV header".into() }),
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Parse { line: idx + 1, msg };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 17 {
                return Err(bad(format!("expected 17 fields, found {}", f.len())));
            }
            let u = |k: usize| f[k].parse::<usize>().map_err(|_| bad(format!("bad integer `{}`", f[k])));
            let x = |k: usize| f[k].parse::<f64>().map_err(|_| bad(format!("bad number `{}`", f[k])));
            rows.push(ResultRow {
                n: u(0)?,
                blocks: u(1)?,
                block_len: u(2)?,
                p: u(3)?,
                s_true: u(4)?,
                s_est: u(5)?,
                beta: x(6)?,
                rho_min: x(7)?,
                lambda: x(8)?,
                trials: u(9)?,
                errors: u(10)?,
                error_rate: x(11)?,
                ci_low: x(12)?,
                ci_high: x(13)?,
                bound_n: x(14)?,
                rho_cond: f[15].parse().map_err(|_| bad(format!("bad flag `{}`", f[15])))?,
                wall_ms: f[16].parse().map_err(|_| bad(format!("bad integer `{}`", f[16])))?,
            });
        }
        Ok(ExperimentResult { rows })
    }
}

/// Writes the result as CSV (LF line endings).
pub fn emit_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    std::fs::write(path, result.to_csv())?;
    Ok(())
}

/// One deviation level of a tail-bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaRow {
    pub eta: f64,
    pub bound: f64,
    pub empirical: f64,
    pub trials: usize,
}

impl LemmaRow {
    /// Three binomial standard errors of the empirical frequency.
    pub fn slack(&self) -> f64 {
        let p = self.empirical;
        3.0 * (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Whether the bound dominates the empirical tail up to [`LemmaRow::slack`].
    pub fn dominated(&self) -> bool {
        self.empirical <= self.bound + self.slack()
    }
}

/// Bound and empirical tail frequency for each deviation in `etas`.
pub fn run_lemma_check(form: &QuadraticForm, etas: &[f64], trials: usize, seed: u64) -> Result<Vec<LemmaRow>> {
    let bounds = etas.iter().map(|&e| tail_bound(form, e)).collect::<Result<Vec<_>>>()?;
    let empirical = empirical_tails(form, etas, trials, seed)?;
    Ok(etas
        .iter()
        .zip(bounds)
        .zip(empirical)
        .map(|((&eta, bound), empirical)| LemmaRow { eta, bound, empirical, trials })
        .collect())
}

pub fn lemma_csv(rows: &[LemmaRow]) -> String {
    let mut out = String::from("eta,bound,empirical,trials\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", fmt_f64(r.eta), fmt_f64(r.bound), fmt_f64(r.empirical), r.trials);
    }
    out
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "
        # small recovery run
        p = 6
        s_true = 1
        s_est = 1
        B = 2
        L_grid = 400, 800
        beta = 2
        coupling = 0.5
        lambda_mode = default
        trials = 8
        eta = 0.1
        master_seed = 11
        combine_rule = or
    ";

    #[test]
    fn parses_config() {
        let cfg = ExperimentConfig::parse(BASE).unwrap();
        assert_eq!(cfg.p, 6);
        assert_eq!(cfg.grid, SizeGrid::BlockLengths(vec![400, 800]));
        assert_eq!(cfg.lambda_mode, LambdaMode::Default);
        assert_eq!(cfg.master_seed, 11);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(ExperimentConfig::parse(&format!("{BASE}\nbogus = 1")), Err(Error::Config(_))));
        assert!(ExperimentConfig::parse(&format!("{BASE}\np = 7")).is_err());
        assert!(ExperimentConfig::parse(&BASE.replace("trials = 8", "trials = 0")).is_err());
        assert!(ExperimentConfig::parse(&BASE.replace("s_est = 1", "s_est = 0")).is_err());
        assert!(ExperimentConfig::parse(&format!("{BASE}\nN_grid = 100")).is_err());
        assert!(ExperimentConfig::parse(&BASE.replace("L_grid = 400, 800", "L_grid =")).is_err());
        assert!(ExperimentConfig::parse(&BASE.replace("lambda_mode = default", "lambda_mode = big")).is_err());
    }

    #[test]
    fn wilson_contains_estimate() {
        for (e, n) in [(0, 200), (3, 200), (200, 200), (1, 1), (0, 1)] {
            let (lo, hi) = wilson_interval(e, n);
            let p = e as f64 / n as f64;
            assert!(lo <= p && p <= hi && (0.0..=1.0).contains(&lo) && hi <= 1.0);
        }
        let (_, hi) = wilson_interval(0, 200);
        assert!(hi < 0.02);
    }

    #[test]
    fn antitonic_pools_violators() {
        let fit = antitonic_fit(&[0.9, 0.5, 0.6, 0.1], &[1.0; 4]);
        for (v, e) in fit.iter().zip([0.9, 0.55, 0.55, 0.1]) {
            assert!((v - e).abs() < 1e-15, "{fit:?}");
        }
        let fit = antitonic_fit(&[0.1, 0.3], &[1.0, 3.0]);
        assert!(fit.iter().all(|v| (v - 0.25).abs() < 1e-15));
        let fit = antitonic_fit(&[0.2, 0.4, 0.1, 0.3, 0.0], &[2.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(fit.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn csv_round_trip_and_shape() {
        let cfg = ExperimentConfig::parse(BASE).unwrap();
        let res = run_node_recovery(&cfg).unwrap();
        let csv = res.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(!csv.contains('\r'));
        assert_eq!(ExperimentResult::parse_csv(&csv).unwrap(), res);
        assert_eq!(ExperimentResult::default().to_csv(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn rows_are_consistent() {
        let cfg = ExperimentConfig::parse(BASE).unwrap();
        let res = run_node_recovery(&cfg).unwrap();
        for r in &res.rows {
            assert_eq!(r.n, r.blocks * r.block_len);
            assert!((0.0..=1.0).contains(&r.error_rate));
            assert!(r.ci_low <= r.error_rate && r.error_rate <= r.ci_high);
            assert_eq!(r.bound_n, sample_size_bound(r.beta, r.rho_min, r.p, r.s_est, 0.1).unwrap());
            assert_eq!(r.lambda, r.rho_min / 6.0);
            assert_eq!(r.rho_cond, rho_condition_holds(r.rho_min, r.beta, r.block_len));
            assert_eq!(r.wall_ms, 0);
        }
    }

    #[test]
    fn infeasible_block_length_is_rejected() {
        let cfg = ExperimentConfig::parse(&BASE.replace("L_grid = 400, 800", "L_grid = 3")).unwrap();
        assert!(matches!(run_node_recovery(&cfg), Err(Error::InfeasibleConfig(_))));
    }

    #[test]
    fn empty_graph_needs_rho_or_lambda() {
        let text = BASE.replace("s_true = 1", "s_true = 0");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert!(matches!(run_node_recovery(&cfg), Err(Error::Config(_))));
        let cfg = ExperimentConfig::parse(&format!("{text}\nrho_min = 0.3")).unwrap();
        let res = run_node_recovery(&cfg).unwrap();
        assert!(res.rows.iter().all(|r| r.errors == 0));
    }

    #[test]
    fn lemma_rows() {
        let form = QuadraticForm::new(vec![0.5, -0.2], vec![0.3, 0.0]).unwrap();
        let rows = run_lemma_check(&form, &[0.5, 2.0], 5000, 1).unwrap();
        assert!(rows.iter().all(LemmaRow::dominated));
        let csv = lemma_csv(&rows);
        assert!(csv.starts_with("eta,bound,empirical,trials\n"));
        assert_eq!(csv.lines().count(), 3);
        let zero = QuadraticForm::new(vec![0.0], vec![0.0]).unwrap();
        assert!(matches!(run_lemma_check(&zero, &[1.0], 10, 0), Err(Error::DegenerateForm)));
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.1, 10.0, 10);
        assert_eq!(g.len(), 10);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[9] - 10.0).abs() < 1e-12);
    }
}
