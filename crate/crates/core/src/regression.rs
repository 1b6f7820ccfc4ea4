//! Exhaustive sparse neighbourhood regression.
//!
//! For a node `i` and a candidate set `T`, the residual statistic is
//!
//! ```text
//! Z(T) = (1/N) Σ_b ‖P_b(T)⊥ x_i^(b)‖²
//! ```
//!
//! where `P_b(T)⊥` projects onto the orthogonal complement of the span of the block-`b`
//! components indexed by `T`. The estimate is the minimizer of `Z(T) + λ|T|` over all
//! `|T| ≤ s`, found by scoring every candidate set.

use std::cmp::Ordering;

use itertools::Itertools;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph_model::Cig;
use crate::sampler::{BlockFactors, SampleBlocks};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Budget, penalty and rank threshold for [`estimate_neighborhood`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub s: usize,
    pub lambda: f64,
    pub rank_tol: f64,
}

impl EstimatorConfig {
    pub fn new(s: usize, lambda: f64) -> Result<Self> {
        EstimatorConfig { s, lambda, rank_tol: DEFAULT_RANK_TOL }.validated()
    }

    pub fn with_rank_tol(self, rank_tol: f64) -> Result<Self> {
        EstimatorConfig { rank_tol, ..self }.validated()
    }

    fn validated(self) -> Result<Self> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rank_tol must lie in (0, 1), got {}",
                self.rank_tol
            )));
        }
        Ok(self)
    }
}

/// Selected neighbourhood of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodEstimate {
    pub node: usize,
    /// Sorted indices of the selected set.
    pub selected: Vec<usize>,
    /// `Z(selected) + λ|selected|`.
    pub objective: f64,
    /// `Z(selected)` alone.
    pub residual: f64,
    /// Number of candidate sets scored.
    pub evaluated: usize,
}

impl NeighborhoodEstimate {
    /// `node <i>: {j1,j2,...} objective=<x>`, one-based.
    pub fn to_line(&self) -> String {
        let set = self.selected.iter().map(|j| (j + 1).to_string()).join(",");
        format!(
            "node {}: {{{}}} objective={}",
            self.node + 1,
            set,
            crate::textio::fmt_f64(self.objective)
        )
    }
}

/// How per-node neighbourhoods become one edge set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CombineRule {
    /// Edge if either endpoint selects the other.
    #[default]
    Or,
    /// Edge only if both endpoints select each other.
    And,
}

impl std::str::FromStr for CombineRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(CombineRule::Or),
            "and" => Ok(CombineRule::And),
            other => Err(Error::InvalidParameter(format!("unknown combine rule `{other}`"))),
        }
    }
}

impl std::fmt::Display for CombineRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CombineRule::Or => "or",
            CombineRule::And => "and",
        })
    }
}

/// Squared norm of `x` after removing its projection onto span(`vectors`).
///
/// The basis is built by Gram-Schmidt with one reorthogonalization pass; a vector whose
/// norm after orthogonalization falls below `rank_tol` times its original norm is
/// treated as dependent and dropped.
fn complement_residual<'a>(
    vectors: impl IntoIterator<Item = &'a [f64]>,
    x: &[f64],
    rank_tol: f64,
) -> Vec<f64> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let orig = norm(v);
        if orig == 0.0 {
            continue;
        }
        let mut w = v.to_vec();
        for _ in 0..2 {
            for u in &basis {
                let d = dot(u, &w);
                axpy(-d, u, &mut w);
            }
        }
        let n = norm(&w);
        if n > rank_tol * orig {
            w.iter_mut().for_each(|e| *e /= n);
            basis.push(w);
        }
    }
    let mut r = x.to_vec();
    for _ in 0..2 {
        for u in &basis {
            let d = dot(u, &r);
            axpy(-d, u, &mut r);
        }
    }
    r
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn check_indices(set: &[usize], p: usize) -> Result<()> {
    for &j in set {
        if j >= p {
            return Err(Error::IndexOutOfRange { index: j, dim: p });
        }
    }
    Ok(())
}

/// Applies the complement projector of span{row j of `block` : j ∈ `set`} to `x`.
///
/// `block` is `p × L` with components as rows.
pub fn project_complement(
    block: &DMatrix<f64>,
    set: &[usize],
    x: &[f64],
    rank_tol: f64,
) -> Result<Vec<f64>> {
    let (p, l) = block.shape();
    if x.len() != l {
        return Err(Error::DimensionMismatch(format!("x has length {}, block length is {l}", x.len())));
    }
    check_indices(set, p)?;
    if !set.is_empty() && set.len() >= l {
        return Err(Error::InfeasibleConfig(format!("|T| = {} must be below L = {l}", set.len())));
    }
    let rows: Vec<Vec<f64>> = set.iter().map(|&j| block.row(j).iter().copied().collect()).collect();
    Ok(complement_residual(rows.iter().map(Vec::as_slice), x, rank_tol))
}

/// `Z(T)` computed from the raw samples.
pub fn residual_statistic(
    samples: &SampleBlocks,
    i: usize,
    set: &[usize],
    rank_tol: f64,
) -> Result<f64> {
    let p = samples.p();
    check_indices(&[i], p)?;
    if set.contains(&i) {
        return Err(Error::InvalidParameter(format!("node {i} cannot regress on itself")));
    }
    let mut total = 0.0;
    for b in 0..samples.blocks() {
        let block = samples.block_matrix(b);
        let x = samples.component(b, i);
        let r = project_complement(&block, set, &x, rank_tol)?;
        total += dot(&r, &r);
    }
    Ok(total / samples.sample_count() as f64)
}

/// `Z(T)` computed from per-block triangular factors.
pub fn residual_statistic_factored(
    factors: &BlockFactors,
    i: usize,
    set: &[usize],
    rank_tol: f64,
) -> Result<f64> {
    let p = factors.p();
    check_indices(&[i], p)?;
    check_indices(set, p)?;
    if set.contains(&i) {
        return Err(Error::InvalidParameter(format!("node {i} cannot regress on itself")));
    }
    let columns = factor_columns(factors);
    Ok(z_from_columns(&columns, i, set, rank_tol, factors.sample_count()))
}

fn factor_columns(factors: &BlockFactors) -> Vec<Vec<Vec<f64>>> {
    (0..factors.blocks())
        .map(|b| (0..factors.p()).map(|i| factors.column(b, i)).collect())
        .collect()
}

fn z_from_columns(columns: &[Vec<Vec<f64>>], i: usize, set: &[usize], rank_tol: f64, n: usize) -> f64 {
    let total: f64 = columns
        .iter()
        .map(|cols| {
            let r = complement_residual(set.iter().map(|&j| cols[j].as_slice()), &cols[i], rank_tol);
            dot(&r, &r)
        })
        .sum();
    total / n as f64
}

/// Orders candidates by objective, then size, then the sorted index tuple.
fn candidate_cmp(a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.len().cmp(&b.1.len()))
        .then_with(|| a.1.cmp(&b.1))
}

fn check_budget(s: usize, p: usize, block_len: usize) -> Result<()> {
    if s >= block_len {
        return Err(Error::InfeasibleConfig(format!(
            "budget s = {s} must be below the block length L = {block_len}"
        )));
    }
    if s >= p {
        return Err(Error::InfeasibleConfig(format!("budget s = {s} must be below p = {p}")));
    }
    Ok(())
}

/// Minimizes `Z(T) + λ|T|` over all `T ⊆ V \ {i}` with `|T| ≤ s`.
pub fn estimate_neighborhood(
    samples: &SampleBlocks,
    i: usize,
    config: &EstimatorConfig,
) -> Result<NeighborhoodEstimate> {
    check_budget(config.s, samples.p(), samples.block_len())?;
    estimate_neighborhood_factored(&BlockFactors::from_samples(samples), i, config)
}

/// [`estimate_neighborhood`] on precomputed block factors.
pub fn estimate_neighborhood_factored(
    factors: &BlockFactors,
    i: usize,
    config: &EstimatorConfig,
) -> Result<NeighborhoodEstimate> {
    let p = factors.p();
    check_indices(&[i], p)?;
    check_budget(config.s, p, factors.block_len())?;
    let columns = factor_columns(factors);
    Ok(search(&columns, i, config, factors.sample_count()))
}

fn search(columns: &[Vec<Vec<f64>>], i: usize, config: &EstimatorConfig, n: usize) -> NeighborhoodEstimate {
    let p = columns.first().map_or(0, Vec::len);
    let others: Vec<usize> = (0..p).filter(|&j| j != i).collect();
    let candidates: Vec<Vec<usize>> = (0..=config.s)
        .flat_map(|t| others.iter().copied().combinations(t))
        .collect();
    let evaluated = candidates.len();

    let score = |set: Vec<usize>| {
        let z = z_from_columns(columns, i, &set, config.rank_tol, n);
        (z + config.lambda * set.len() as f64, set)
    };
    let best_of = |a: (f64, Vec<usize>), b: (f64, Vec<usize>)| {
        if candidate_cmp(&b, &a) == Ordering::Less {
            b
        } else {
            a
        }
    };

    #[cfg(feature = "parallel")]
    let best = {
        use rayon::prelude::*;
        candidates.into_par_iter().map(score).reduce_with(best_of)
    };
    #[cfg(not(feature = "parallel"))]
    let best = candidates.into_iter().map(score).reduce(best_of);

    let (objective, selected) = best.expect("the empty set is always a candidate");
    NeighborhoodEstimate {
        node: i,
        residual: objective - config.lambda * selected.len() as f64,
        selected,
        objective,
        evaluated,
    }
}

/// Neighbourhood estimates for every node.
pub fn estimate_all_neighborhoods(
    factors: &BlockFactors,
    config: &EstimatorConfig,
) -> Result<Vec<NeighborhoodEstimate>> {
    check_budget(config.s, factors.p(), factors.block_len())?;
    let columns = factor_columns(factors);
    let n = factors.sample_count();
    let run = |i| search(&columns, i, config, n);
    #[cfg(feature = "parallel")]
    let all = {
        use rayon::prelude::*;
        (0..factors.p()).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let all = (0..factors.p()).map(run).collect();
    Ok(all)
}

/// Merges per-node neighbourhoods into an undirected graph.
pub fn combine_neighborhoods(p: usize, estimates: &[NeighborhoodEstimate], rule: CombineRule) -> Cig {
    let mut selects = vec![vec![false; p]; p];
    for est in estimates {
        for &j in &est.selected {
            selects[est.node][j] = true;
        }
    }
    let edges = (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .filter(|&(i, j)| match rule {
            CombineRule::Or => selects[i][j] || selects[j][i],
            CombineRule::And => selects[i][j] && selects[j][i],
        });
    Cig::from_edges(p, edges).expect("indices are in range")
}

/// Estimates the full graph from per-node neighbourhoods.
pub fn estimate_graph(samples: &SampleBlocks, config: &EstimatorConfig, rule: CombineRule) -> Result<Cig> {
    check_budget(config.s, samples.p(), samples.block_len())?;
    let estimates = estimate_all_neighborhoods(&BlockFactors::from_samples(samples), config)?;
    Ok(combine_neighborhoods(samples.p(), &estimates, rule))
}

/// Penalty weight `ρ_min / 6`.
pub fn default_lambda(rho_min: f64) -> Result<f64> {
    if !(rho_min > 0.0) {
        return Err(Error::NonpositiveInput(rho_min));
    }
    Ok(rho_min / 6.0)
}

/// Sufficient sample size `864 (β/ρ_min) log(6 p s² / η)`.
pub fn sample_size_bound(beta: f64, rho_min: f64, p: usize, s: usize, eta: f64) -> Result<f64> {
    if !(beta > 0.0 && rho_min > 0.0 && eta > 0.0) || p == 0 || s == 0 {
        return Err(Error::InvalidParameter(format!(
            "sample size bound needs positive inputs (beta={beta}, rho_min={rho_min}, p={p}, s={s}, eta={eta})"
        )));
    }
    let s = s as f64;
    Ok(864.0 * (beta / rho_min) * (6.0 * p as f64 * s * s / eta).ln())
}

/// Whether `ρ_min ≥ 24 β / L`.
pub fn rho_condition_holds(rho_min: f64, beta: f64, block_len: usize) -> bool {
    rho_min >= 24.0 * beta / block_len as f64
}
