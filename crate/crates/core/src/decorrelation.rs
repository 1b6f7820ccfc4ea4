//! DFT front-end for stationary vector processes.
//!
//! The unitary DFT of a stationary record yields coefficient vectors that are close to
//! uncorrelated, with covariance close to the spectral density at their frequency. With
//! correlation width `W` the spectrum is nearly flat over `W` contiguous frequency bands,
//! so grouping coefficients by band produces `W` approximately i.i.d. blocks of length
//! `L = N / W`.
//!
//! Complex coefficients are mapped to real columns using conjugate symmetry: the DC term
//! (and the Nyquist term for even `N`) is emitted once as is; every other frequency `k`
//! in the lower half contributes `√2·Re x̂[k]` followed by `√2·Im x̂[k]`. This keeps the
//! total energy and gives each real column the block covariance.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::rng::{keyed_rng, tag};
use crate::sampler::SampleBlocks;

/// A `p × N` record of a stationary process with user-supplied correlation width `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySeries {
    p: usize,
    len: usize,
    width: usize,
    // column-major: N columns of p values
    data: Vec<f64>,
}

impl StationarySeries {
    pub fn new(p: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if p == 0 || data.is_empty() || !data.len().is_multiple_of(p) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not form columns of length {p}",
                data.len()
            )));
        }
        let len = data.len() / p;
        if width == 0 || !len.is_multiple_of(width) {
            return Err(Error::WidthMismatch { width, len });
        }
        Ok(StationarySeries { p, len, width, data })
    }

    /// Reinterprets all blocks of `samples`, in order, as one record.
    pub fn from_samples(samples: &SampleBlocks, width: usize) -> Result<Self> {
        let data = (0..samples.blocks()).flat_map(|b| samples.block(b).iter().copied()).collect();
        StationarySeries::new(samples.p(), width, data)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn column(&self, n: usize) -> &[f64] {
        &self.data[n * self.p..(n + 1) * self.p]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Unitary DFT per coordinate: `x̂[k] = N^{-1/2} Σ_n x[n] exp(-2πi n k / N)`.
///
/// Returns `N` complex vectors of length `p`.
pub fn dft_coefficients(series: &StationarySeries) -> Vec<Vec<Complex64>> {
    let (p, n) = (series.p, series.len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); p]; n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..p {
        for (t, slot) in buf.iter_mut().enumerate() {
            *slot = Complex64::new(series.data[t * p + i], 0.0);
        }
        fft.process(&mut buf);
        for (row, v) in out.iter_mut().zip(&buf) {
            row[i] = v * scale;
        }
    }
    out
}

/// Real frequency-domain blocks: `B = W` blocks of `L = N / W` columns, contiguous in
/// frequency.
pub fn to_block_samples(series: &StationarySeries) -> Result<SampleBlocks> {
    let (p, n, w) = (series.p, series.len, series.width);
    if n % w != 0 {
        return Err(Error::WidthMismatch { width: w, len: n });
    }
    let coeffs = dft_coefficients(series);
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut columns: Vec<f64> = Vec::with_capacity(n * p);
    columns.extend(coeffs[0].iter().map(|c| c.re));
    for coeff in coeffs.iter().take(n.div_ceil(2)).skip(1) {
        columns.extend(coeff.iter().map(|c| sqrt2 * c.re));
        columns.extend(coeff.iter().map(|c| sqrt2 * c.im));
    }
    if n % 2 == 0 && n > 1 {
        columns.extend(coeffs[n / 2].iter().map(|c| c.re));
    }
    debug_assert_eq!(columns.len(), n * p);
    let l = n / w;
    let data = columns.chunks(l * p).map(<[f64]>::to_vec).collect();
    SampleBlocks::new(p, l, data)
}

/// Diagnostics for how closely blocks match the i.i.d.-within, independent-across model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecorrelationReport {
    /// Mean over block pairs `b < b'` and components `i, j` of the squared normalized
    /// inner product between `x_i^(b)` and `x_j^(b')`. About `1/L` for independent
    /// blocks, `1` for identical constant columns.
    pub cross_block_energy: f64,
    /// Max over blocks and halves of `‖Ĉ_half − Ĉ_block‖_F / ‖Ĉ_block‖_F`, where the
    /// `Ĉ` are empirical covariances of the first/second half of a block and of the
    /// whole block.
    pub within_block_flatness: f64,
}

pub fn decorrelation_report(blocks: &SampleBlocks) -> Result<DecorrelationReport> {
    let (p, l, nb) = (blocks.p(), blocks.block_len(), blocks.blocks());
    if l < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 columns per block, got {l}")));
    }
    let comps: Vec<Vec<Vec<f64>>> =
        (0..nb).map(|b| (0..p).map(|i| blocks.component(b, i)).collect()).collect();
    let norms: Vec<Vec<f64>> = comps
        .iter()
        .map(|cs| cs.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect())
        .collect();

    let mut cross_sum = 0.0;
    let mut cross_count = 0usize;
    for b in 0..nb {
        for b2 in (b + 1)..nb {
            for i in 0..p {
                for j in 0..p {
                    let denom = norms[b][i] * norms[b2][j];
                    let r = if denom > 0.0 {
                        comps[b][i].iter().zip(&comps[b2][j]).map(|(x, y)| x * y).sum::<f64>() / denom
                    } else {
                        0.0
                    };
                    cross_sum += r * r;
                    cross_count += 1;
                }
            }
        }
    }
    let cross_block_energy = if cross_count > 0 { cross_sum / cross_count as f64 } else { 0.0 };

    let mut flatness: f64 = 0.0;
    for b in 0..nb {
        let x = blocks.block_matrix(b);
        let cov = |m: DMatrix<f64>| {
            let n = m.ncols() as f64;
            (&m * m.transpose()) / n
        };
        let whole = cov(x.clone());
        let scale = whole.norm();
        if scale == 0.0 {
            continue;
        }
        let half = l / 2;
        for part in [x.columns(0, half).into_owned(), x.columns(half, l - half).into_owned()] {
            flatness = flatness.max((cov(part) - &whole).norm() / scale);
        }
    }
    Ok(DecorrelationReport { cross_block_energy, within_block_flatness: flatness })
}

/// Simulates `x[n] = A x[n-1] + e[n]` with standard normal innovations, discarding a
/// burn-in of `burn_in` steps.
pub fn simulate_var1(
    transition: &DMatrix<f64>,
    len: usize,
    width: usize,
    burn_in: usize,
    seed: u64,
) -> Result<StationarySeries> {
    let p = transition.nrows();
    if transition.ncols() != p {
        return Err(Error::DimensionMismatch("transition matrix must be square".into()));
    }
    let mut rng = keyed_rng(seed, &[tag::SAMPLE]);
    let mut state = nalgebra::DVector::<f64>::zeros(p);
    let mut data = Vec::with_capacity(len * p);
    for step in 0..(burn_in + len) {
        let noise = nalgebra::DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        state = transition * &state + noise;
        if step >= burn_in {
            data.extend(state.iter());
        }
    }
    StationarySeries::new(p, width, data)
}
