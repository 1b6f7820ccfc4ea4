//! Block-wise Gaussian sampling.
//!
//! Column `n` of block `b` is `G_b z` with `G_b` the Cholesky factor of the block
//! covariance and `z` standard normal. Columns are generated in chunks of
//! [`RNG_CHUNK`]; chunk `c` of block `b` draws from the stream keyed by
//! `(seed, b, c)`, so any schedule over chunks yields the same bits.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph_model::BlockModel;
use crate::linalg::TriangularFactor;
use crate::rng::{keyed_rng, tag};
use crate::textio::{fmt_f64, parse_header, LineReader};

pub use crate::linalg::cholesky_factor;

/// Columns drawn from one keyed stream.
pub const RNG_CHUNK: usize = 1024;

/// `B` blocks of `L` observation vectors in `R^p`.
///
/// Each block is stored column-major: the `L` columns are contiguous runs of `p` values.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlocks {
    p: usize,
    block_len: usize,
    data: Vec<Vec<f64>>,
}

impl SampleBlocks {
    /// Wraps column-major block data; every block must hold `p * block_len` finite values.
    pub fn new(p: usize, block_len: usize, data: Vec<Vec<f64>>) -> Result<Self> {
        if p == 0 || block_len == 0 || data.is_empty() {
            return Err(Error::InvalidParameter("p, B and L must be positive".into()));
        }
        for (b, block) in data.iter().enumerate() {
            if block.len() != p * block_len {
                return Err(Error::DimensionMismatch(format!(
                    "block {b} has {} values, expected {}",
                    block.len(),
                    p * block_len
                )));
            }
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("block {b} has non-finite values")));
            }
        }
        Ok(SampleBlocks { p, block_len, data })
    }

    /// Builds blocks from per-block `p × L` matrices (rows are components).
    pub fn from_matrices(blocks: &[DMatrix<f64>]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidParameter("need at least one block".into()))?;
        let (p, l) = first.shape();
        let data = blocks
            .iter()
            .map(|m| {
                if m.shape() != (p, l) {
                    return Err(Error::DimensionMismatch("blocks differ in shape".into()));
                }
                Ok(m.as_slice().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        SampleBlocks::new(p, l, data)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn blocks(&self) -> usize {
        self.data.len()
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn sample_count(&self) -> usize {
        self.blocks() * self.block_len
    }

    /// Column-major values of block `b`.
    pub fn block(&self, b: usize) -> &[f64] {
        &self.data[b]
    }

    pub fn block_matrix(&self, b: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.p, self.block_len, &self.data[b])
    }

    pub fn column(&self, b: usize, n: usize) -> &[f64] {
        &self.data[b][n * self.p..(n + 1) * self.p]
    }

    /// Component `i` restricted to block `b`, a length-`L` vector.
    pub fn component(&self, b: usize, i: usize) -> Vec<f64> {
        self.data[b].iter().skip(i).step_by(self.p).copied().collect()
    }

    /// Reorders blocks; `order[k]` is the source index of output block `k`.
    pub fn permute_blocks(&self, order: &[usize]) -> Self {
        SampleBlocks {
            p: self.p,
            block_len: self.block_len,
            data: order.iter().map(|&b| self.data[b].clone()).collect(),
        }
    }

    /// Multiplies every value by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        SampleBlocks {
            p: self.p,
            block_len: self.block_len,
            data: self.data.iter().map(|blk| blk.iter().map(|v| v * c).collect()).collect(),
        }
    }

    /// Empirical covariance `(1/L) X Xᵀ` of block `b`.
    pub fn empirical_covariance(&self, b: usize) -> DMatrix<f64> {
        let x = self.block_matrix(b);
        (&x * x.transpose()) / self.block_len as f64
    }

    /// Sum of squared entries over all blocks.
    pub fn energy(&self) -> f64 {
        self.data.iter().flatten().map(|v| v * v).sum()
    }

    pub fn header(&self) -> String {
        format!("nsgms-samples v1 p={} B={} L={}", self.p, self.blocks(), self.block_len)
    }

    /// Text format: header, then per block a `block <b>` line and one line per column.
    pub fn to_text(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for b in 0..self.blocks() {
            let _ = writeln!(out, "block {}", b + 1);
            for n in 0..self.block_len {
                let col: Vec<String> = self.column(b, n).iter().map(|&v| fmt_f64(v)).collect();
                out.push_str(&col.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = LineReader::new(text);
        let (ln, header) = lines.next_line()?;
        let (p, blocks, block_len) = parse_sample_header(ln, header)?;
        let mut data = Vec::with_capacity(blocks);
        for b in 0..blocks {
            let (ln, line) = lines.next_line()?;
            if line.trim() != format!("block {}", b + 1) {
                return Err(Error::Parse { line: ln, msg: format!("expected `block {}`", b + 1) });
            }
            let mut block = Vec::with_capacity(p * block_len);
            for _ in 0..block_len {
                block.extend(lines.next_floats(p)?);
            }
            data.push(block);
        }
        lines.expect_end()?;
        SampleBlocks::new(p, block_len, data)
    }

    /// Little-endian f64 values, blocks in order, each block column-major.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flatten().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(header: &str, bytes: &[u8]) -> Result<Self> {
        let (p, blocks, block_len) = parse_sample_header(1, header.trim())?;
        let per_block = p * block_len;
        if bytes.len() != blocks * per_block * 8 {
            return Err(Error::DimensionMismatch(format!(
                "binary payload has {} bytes, header implies {}",
                bytes.len(),
                blocks * per_block * 8
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let data = values.chunks(per_block).map(<[f64]>::to_vec).collect();
        SampleBlocks::new(p, block_len, data)
    }

    /// Writes the text format, or with `binary` the raw payload at `path` plus the header
    /// in the sidecar `<path>.hdr`.
    pub fn write(&self, path: &Path, binary: bool) -> Result<()> {
        if binary {
            std::fs::write(path, self.to_le_bytes())?;
            std::fs::write(sidecar_path(path), format!("{}\n", self.header()))?;
        } else {
            std::fs::write(path, self.to_text())?;
        }
        Ok(())
    }

    /// Reads either format: text when the file starts with the magic, otherwise binary
    /// with its header sidecar.
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(b"nsgms-samples") {
            let text = String::from_utf8(bytes)
                .map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
            SampleBlocks::parse(&text)
        } else {
            let header = std::fs::read_to_string(sidecar_path(path))?;
            SampleBlocks::from_le_bytes(&header, &bytes)
        }
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    s.into()
}

fn parse_sample_header(line: usize, text: &str) -> Result<(usize, usize, usize)> {
    let h = parse_header(line, text, "nsgms-samples", &["p", "B", "L"])?;
    Ok((h.usize("p")?, h.usize("B")?, h.usize("L")?))
}

fn block_factors(model: &BlockModel) -> Result<Vec<DMatrix<f64>>> {
    model.covariances().iter().map(cholesky_factor).collect()
}

/// Fills `out` (column-major, `cols` columns) with columns `chunk * RNG_CHUNK ..` of block `b`.
fn fill_chunk(g: &DMatrix<f64>, seed: u64, b: usize, chunk: usize, out: &mut [f64]) {
    let p = g.nrows();
    let mut rng = keyed_rng(seed, &[tag::SAMPLE, b as u64, chunk as u64]);
    let mut z = vec![0.0; p];
    for col in out.chunks_exact_mut(p) {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for (i, xi) in col.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in 0..=i {
                s += g[(i, k)] * z[k];
            }
            *xi = s;
        }
    }
}

/// Draws `L` i.i.d. `N(0, C_b)` columns per block.
pub fn sample_process(model: &BlockModel, seed: u64) -> Result<SampleBlocks> {
    let p = model.p();
    let l = model.block_len();
    let factors = block_factors(model)?;
    let mut data: Vec<Vec<f64>> = vec![vec![0.0; p * l]; model.blocks()];

    let mut jobs: Vec<(usize, usize, &mut [f64])> = Vec::new();
    for (b, block) in data.iter_mut().enumerate() {
        for (c, chunk) in block.chunks_mut(RNG_CHUNK * p).enumerate() {
            jobs.push((b, c, chunk));
        }
    }
    let run = |(b, c, chunk): (usize, usize, &mut [f64])| fill_chunk(&factors[b], seed, b, c, chunk);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.into_par_iter().for_each(run);
    }
    #[cfg(not(feature = "parallel"))]
    jobs.into_iter().for_each(run);

    SampleBlocks::new(p, l, data)
}

/// Per-block upper-triangular factors `R_b` with `R_bᵀ R_b = X_b X_bᵀ`.
///
/// Column `i` of `R_b` stands in for component `i` of block `b`: every inner product,
/// and therefore every projection residual norm, agrees with the raw data. This is all
/// the neighbourhood estimator needs, at `O(p²)` memory per block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFactors {
    p: usize,
    block_len: usize,
    // row-major p×p per block
    factors: Vec<Vec<f64>>,
}

impl BlockFactors {
    pub fn from_samples(samples: &SampleBlocks) -> Self {
        let p = samples.p();
        let factor_block = |b: usize| {
            let mut acc = TriangularFactor::new(p);
            for n in 0..samples.block_len() {
                acc.push_row(samples.column(b, n));
            }
            acc.finish()
        };
        BlockFactors {
            p,
            block_len: samples.block_len(),
            factors: map_blocks(samples.blocks(), factor_block),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn blocks(&self) -> usize {
        self.factors.len()
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn sample_count(&self) -> usize {
        self.blocks() * self.block_len
    }

    /// Column `i` of the factor for block `b`, a length-`p` vector.
    pub fn column(&self, b: usize, i: usize) -> Vec<f64> {
        self.factors[b].iter().skip(i).step_by(self.p).copied().collect()
    }
}

fn map_blocks<T: Send>(blocks: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..blocks).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    (0..blocks).map(f).collect()
}

/// Same draws as [`sample_process`], folded straight into [`BlockFactors`] without
/// materializing the columns.
pub fn sample_factors(model: &BlockModel, seed: u64) -> Result<BlockFactors> {
    let p = model.p();
    let l = model.block_len();
    let factors = block_factors(model)?;
    let factor_block = |b: usize| {
        let mut acc = TriangularFactor::new(p);
        let mut buf = vec![0.0; RNG_CHUNK * p];
        let mut start = 0;
        let mut chunk = 0;
        while start < l {
            let cols = RNG_CHUNK.min(l - start);
            let out = &mut buf[..cols * p];
            fill_chunk(&factors[b], seed, b, chunk, out);
            for col in out.chunks_exact(p) {
                acc.push_row(col);
            }
            start += cols;
            chunk += 1;
        }
        acc.finish()
    };
    Ok(BlockFactors { p, block_len: l, factors: map_blocks(model.blocks(), factor_block) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_model::{build_block_model, random_cig, Cig};

    fn identity_model(p: usize, blocks: usize, l: usize) -> BlockModel {
        BlockModel::from_precisions(vec![DMatrix::identity(p, p); blocks], l, 2.0).unwrap()
    }

    #[test]
    fn identity_covariance_gives_unit_variance() {
        let m = identity_model(3, 2, 5000);
        let s = sample_process(&m, 1).unwrap();
        let n = s.sample_count() as f64;
        for i in 0..3 {
            let var: f64 = (0..2)
                .map(|b| s.component(b, i).iter().map(|v| v * v).sum::<f64>())
                .sum::<f64>()
                / n;
            assert!((var - 1.0).abs() < 5.0 / n.sqrt(), "{var}");
        }
    }

    #[test]
    fn blocks_follow_their_own_covariance() {
        let g = Cig::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let m = build_block_model(&g, 2, 4000, 3.0, 0.8, 3).unwrap();
        assert_ne!(m.covariance(0), m.covariance(1));
        let s = sample_process(&m, 3).unwrap();
        let tol = 10.0 * 3.0 / (4000f64).sqrt();
        for b in 0..2 {
            let err = (s.empirical_covariance(b) - m.covariance(b)).norm();
            assert!(err <= tol, "block {b}: {err}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = random_cig(5, 2, 0).unwrap();
        let m = build_block_model(&g, 3, 2500, 2.0, 0.5, 0).unwrap();
        assert_eq!(sample_process(&m, 42).unwrap(), sample_process(&m, 42).unwrap());
        assert_ne!(sample_process(&m, 42).unwrap(), sample_process(&m, 43).unwrap());
    }

    #[test]
    fn streamed_factors_match_materialized_samples() {
        let g = random_cig(6, 2, 8).unwrap();
        let m = build_block_model(&g, 2, 2100, 2.0, 0.5, 8).unwrap();
        let direct = BlockFactors::from_samples(&sample_process(&m, 5).unwrap());
        let streamed = sample_factors(&m, 5).unwrap();
        for b in 0..2 {
            for i in 0..6 {
                let (u, v) = (direct.column(b, i), streamed.column(b, i));
                for (x, y) in u.iter().zip(&v) {
                    assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn text_and_binary_round_trip() {
        let m = identity_model(2, 2, 3);
        let s = sample_process(&m, 7).unwrap();
        assert_eq!(SampleBlocks::parse(&s.to_text()).unwrap(), s);
        assert_eq!(SampleBlocks::from_le_bytes(&s.header(), &s.to_le_bytes()).unwrap(), s);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        s.write(&path, true).unwrap();
        assert_eq!(SampleBlocks::read(&path).unwrap(), s);
        let path = dir.path().join("x.txt");
        s.write(&path, false).unwrap();
        assert_eq!(SampleBlocks::read(&path).unwrap(), s);
    }

    #[test]
    fn rejects_malformed_blocks() {
        assert!(SampleBlocks::new(2, 2, vec![vec![0.0; 3]]).is_err());
        assert!(SampleBlocks::new(1, 1, vec![vec![f64::NAN]]).is_err());
        assert!(SampleBlocks::from_le_bytes("nsgms-samples v1 p=1 B=1 L=2", &[0u8; 8]).is_err());
    }

    #[test]
    fn not_positive_definite_propagates() {
        let bad = BlockModel {
            p: 2,
            block_len: 2,
            beta: 2.0,
            precisions: vec![DMatrix::identity(2, 2)],
            covariances: vec![DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])],
        };
        assert!(matches!(sample_process(&bad, 0), Err(Error::NotPositiveDefinite { .. })));
    }
}
