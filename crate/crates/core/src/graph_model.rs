//! Conditional independence graphs and block-wise Gaussian models.
//!
//! A [`BlockModel`] holds one precision/covariance pair per block. All blocks share the
//! zero pattern of a single [`Cig`]: `K[b][i][j] == 0` for every block whenever `{i, j}`
//! is not an edge. Node indices are zero-based in the API and one-based in text files.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_factor, inverse_from_cholesky};
use crate::rng::{keyed_rng, tag};
use crate::textio::{fmt_f64, parse_header, LineReader};

/// Slack used when checking the covariance spectrum against `[1, beta]`.
pub const SPECTRUM_TOL: f64 = 1e-9;

/// Undirected simple graph on `p` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cig {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Cig {
    pub fn empty(p: usize) -> Self {
        Cig { p, edges: BTreeSet::new() }
    }

    /// Builds a graph from an edge list. Pairs are normalized to `(min, max)`.
    pub fn from_edges(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Cig::empty(p);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        for idx in [i, j] {
            if idx >= self.p {
                return Err(Error::IndexOutOfRange { index: idx, dim: self.p });
            }
        }
        if i == j {
            return Err(Error::InvalidParameter(format!("self-loop at node {i}")));
        }
        self.edges.insert((i.min(j), i.max(j)));
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Edges as sorted `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Sorted neighbourhood of node `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.p];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// `edge i j` lines, one-based, sorted.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (i, j) in self.edges() {
            let _ = writeln!(out, "edge {} {}", i + 1, j + 1);
        }
        out
    }
}

/// Random graph with every degree at most `s_max`, deterministic in `seed`.
///
/// Candidate pairs are visited in a seeded random order and each admissible pair is kept
/// with probability one half. Nodes left isolated are then attached to another node with
/// spare capacity, preferring other isolated nodes. When no such partner exists (odd `p`
/// with `s_max = 1`) the node stays isolated.
pub fn random_cig(p: usize, s_max: usize, seed: u64) -> Result<Cig> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("need p >= 2, got {p}")));
    }
    if s_max < 1 || s_max > p - 1 {
        return Err(Error::InvalidParameter(format!(
            "degree bound {s_max} outside [1, {}]",
            p - 1
        )));
    }
    let mut rng = keyed_rng(seed, &[tag::GRAPH]);
    let mut pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .collect();
    pairs.shuffle(&mut rng);

    let mut g = Cig::empty(p);
    let mut deg = vec![0usize; p];
    for &(i, j) in &pairs {
        if deg[i] < s_max && deg[j] < s_max && rng.random_bool(0.5) {
            g.edges.insert((i, j));
            deg[i] += 1;
            deg[j] += 1;
        }
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    for &i in &order {
        if deg[i] > 0 {
            continue;
        }
        let partner = order
            .iter()
            .copied()
            .filter(|&j| j != i && deg[j] == 0)
            .chain(order.iter().copied().filter(|&j| j != i && deg[j] < s_max))
            .next();
        if let Some(j) = partner {
            g.edges.insert((i.min(j), i.max(j)));
            deg[i] += 1;
            deg[j] += 1;
        }
    }
    Ok(g)
}

/// Per-block precision and covariance matrices sharing one sparsity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockModel {
    pub(crate) p: usize,
    pub(crate) block_len: usize,
    pub(crate) beta: f64,
    pub(crate) precisions: Vec<DMatrix<f64>>,
    pub(crate) covariances: Vec<DMatrix<f64>>,
}

impl BlockModel {
    /// Assembles a model from precision matrices, recomputing the covariances.
    pub fn from_precisions(
        precisions: Vec<DMatrix<f64>>,
        block_len: usize,
        beta: f64,
    ) -> Result<Self> {
        let p = precisions
            .first()
            .map(|k| k.nrows())
            .ok_or_else(|| Error::InvalidParameter("model needs at least one block".into()))?;
        if block_len == 0 {
            return Err(Error::InvalidParameter("block length must be positive".into()));
        }
        let mut covariances = Vec::with_capacity(precisions.len());
        for k in &precisions {
            if k.nrows() != p || k.ncols() != p {
                return Err(Error::DimensionMismatch(format!(
                    "precision is {}x{}, expected {p}x{p}",
                    k.nrows(),
                    k.ncols()
                )));
            }
            covariances.push(invert_checked(k)?);
        }
        Ok(BlockModel { p, block_len, beta, precisions, covariances })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn blocks(&self) -> usize {
        self.precisions.len()
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn sample_count(&self) -> usize {
        self.blocks() * self.block_len
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn precision(&self, b: usize) -> &DMatrix<f64> {
        &self.precisions[b]
    }

    pub fn covariance(&self, b: usize) -> &DMatrix<f64> {
        &self.covariances[b]
    }

    pub fn precisions(&self) -> &[DMatrix<f64>] {
        &self.precisions
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    /// Same precisions with a different block length.
    pub fn with_block_len(&self, block_len: usize) -> Result<Self> {
        if block_len == 0 {
            return Err(Error::InvalidParameter("block length must be positive".into()));
        }
        Ok(BlockModel { block_len, ..self.clone() })
    }

    /// Graph of pairs whose precision entry is nonzero in at least one block.
    pub fn support(&self) -> Cig {
        let mut g = Cig::empty(self.p);
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if self.precisions.iter().any(|k| k[(i, j)] != 0.0 || k[(j, i)] != 0.0) {
                    g.edges.insert((i, j));
                }
            }
        }
        g
    }

    /// Smallest and largest covariance eigenvalue over all blocks.
    pub fn covariance_spectrum(&self) -> (f64, f64) {
        self.covariances.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            let (a, b) = extreme_eigenvalues(c);
            (lo.min(a), hi.max(b))
        })
    }

    /// Text serialization; see [`BlockModel::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "nsgms-model v1 p={} B={} L={} beta={}\n",
            self.p,
            self.blocks(),
            self.block_len,
            fmt_f64(self.beta)
        );
        for (b, k) in self.precisions.iter().enumerate() {
            let _ = writeln!(out, "block {}", b + 1);
            for i in 0..self.p {
                let row: Vec<String> = (0..self.p).map(|j| fmt_f64(k[(i, j)])).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = LineReader::new(text);
        let (line_no, header) = lines.next_line()?;
        let fields = parse_header(line_no, header, "nsgms-model", &["p", "B", "L", "beta"])?;
        let p = fields.usize("p")?;
        let blocks = fields.usize("B")?;
        let block_len = fields.usize("L")?;
        let beta = fields.f64("beta")?;
        let mut precisions = Vec::with_capacity(blocks);
        for b in 0..blocks {
            let (ln, line) = lines.next_line()?;
            if line.trim() != format!("block {}", b + 1) {
                return Err(Error::Parse { line: ln, msg: format!("expected `block {}`", b + 1) });
            }
            let mut k = DMatrix::zeros(p, p);
            for i in 0..p {
                let row = lines.next_floats(p)?;
                for (j, v) in row.into_iter().enumerate() {
                    k[(i, j)] = v;
                }
            }
            precisions.push(k);
        }
        lines.expect_end()?;
        BlockModel::from_precisions(precisions, block_len, beta)
    }
}

/// Achieved structural quantities of a model and the truth values of the three
/// modelling assumptions (edge strength, sparsity, covariance spectrum).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport {
    /// Minimum average partial correlation over edges; `None` for an edgeless graph.
    pub rho_min_achieved: Option<f64>,
    pub max_degree: usize,
    pub eig_min: f64,
    pub eig_max: f64,
    /// `[edge strength, sparsity, spectrum]`.
    pub assumptions_ok: [bool; 3],
}

fn extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    eig.eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn invert_checked(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = k.nrows();
    let g = cholesky_factor(k).map_err(|e| Error::ConstructionFailure(e.to_string()))?;
    let c = inverse_from_cholesky(&g);
    let resid = (&c * k - DMatrix::<f64>::identity(p, p)).abs().max();
    if resid > 1e-8 * p as f64 {
        return Err(Error::ConstructionFailure(format!(
            "inversion residual {resid:e} exceeds tolerance"
        )));
    }
    Ok(c)
}

/// Draws a block model on `cig` whose covariance spectra lie in `[1, beta]`.
///
/// Per block the precision starts as `I + W` with `W` supported on the edges, magnitudes
/// uniform in `[coupling / (2 s), coupling / s]` (`s` the maximum degree) and random signs.
/// The precision spectrum is then mapped affinely onto `[1/beta, 1]`, so the covariance
/// spectrum has its extremes exactly at `1` and `beta`. The affine map acts on the
/// precision, which keeps the zero pattern intact.
pub fn build_block_model(
    cig: &Cig,
    blocks: usize,
    block_len: usize,
    beta: f64,
    coupling: f64,
    seed: u64,
) -> Result<BlockModel> {
    if blocks == 0 || block_len == 0 {
        return Err(Error::InvalidParameter("B and L must be positive".into()));
    }
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must exceed 1, got {beta}")));
    }
    if !(coupling > 0.0 && coupling < 1.0) {
        return Err(Error::InvalidParameter(format!("coupling must lie in (0, 1), got {coupling}")));
    }
    let p = cig.p();
    let s_max = cig.max_degree().max(1) as f64;
    let hi = coupling / s_max;
    let lo = hi / 2.0;

    let mut precisions = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let mut rng = keyed_rng(seed, &[tag::MODEL, b as u64]);
        let mut k = DMatrix::<f64>::identity(p, p);
        for (i, j) in cig.edges() {
            let mag = rng.random_range(lo..=hi);
            let w = if rng.random_bool(0.5) { mag } else { -mag };
            k[(i, j)] = w;
            k[(j, i)] = w;
        }
        let (mu_min, mu_max) = extreme_eigenvalues(&k);
        if !(mu_min > 0.0) {
            return Err(Error::ConstructionFailure(format!(
                "block {b}: precision not positive definite (min eigenvalue {mu_min:e}); coupling too large"
            )));
        }
        let spread = mu_max - mu_min;
        if spread > 1e-12 * mu_max {
            let scale = (1.0 - 1.0 / beta) / spread;
            let shift = 1.0 - scale * mu_max;
            k *= scale;
            for i in 0..p {
                k[(i, i)] += shift;
            }
        } else {
            k /= mu_max;
        }
        precisions.push(k);
    }
    BlockModel::from_precisions(precisions, block_len, beta)
}

/// Block-averaged squared ratio `K[i][j] / K[i][i]`.
pub fn partial_correlation(model: &BlockModel, i: usize, j: usize) -> Result<f64> {
    let p = model.p();
    for idx in [i, j] {
        if idx >= p {
            return Err(Error::IndexOutOfRange { index: idx, dim: p });
        }
    }
    if i == j {
        return Err(Error::InvalidParameter("partial correlation needs i != j".into()));
    }
    let sum: f64 = model
        .precisions
        .iter()
        .map(|k| {
            let r = k[(i, j)] / k[(i, i)];
            r * r
        })
        .sum();
    Ok(sum / model.blocks() as f64)
}

/// Evaluates the three modelling assumptions on `model` for the given constants.
pub fn verify_assumptions(model: &BlockModel, cig: &Cig, rho_min: f64, s: usize) -> ModelReport {
    let rho_min_achieved = cig
        .edges()
        .filter_map(|(i, j)| partial_correlation(model, i, j).ok())
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))));
    let max_degree = cig.max_degree();
    let (eig_min, eig_max) = model.covariance_spectrum();

    let strength_ok = rho_min_achieved.is_none_or(|r| r >= rho_min);
    let s_f = s as f64;
    let sparsity_ok =
        max_degree <= s && s_f < model.p() as f64 / 3.0 && s_f < model.block_len() as f64 / 3.0;
    let spectrum_ok = eig_min >= 1.0 - SPECTRUM_TOL && eig_max <= model.beta() + SPECTRUM_TOL;

    ModelReport {
        rho_min_achieved,
        max_degree,
        eig_min,
        eig_max,
        assumptions_ok: [strength_ok, sparsity_ok, spectrum_ok],
    }
}
