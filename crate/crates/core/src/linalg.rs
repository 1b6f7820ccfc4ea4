//! Small dense kernels: Cholesky factorization and a streaming triangular factor.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Lower-triangular `G` with `G Gᵀ = c`.
///
/// Fails with [`Error::NotPositiveDefinite`] at the first nonpositive pivot.
pub fn cholesky_factor(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", n, c.ncols())));
    }
    let mut g = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = c[(j, j)];
        for k in 0..j {
            d -= g[(j, k)] * g[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { row: j, pivot: d });
        }
        let djj = d.sqrt();
        g[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = c[(i, j)];
            for k in 0..j {
                s -= g[(i, k)] * g[(j, k)];
            }
            g[(i, j)] = s / djj;
        }
    }
    Ok(g)
}

/// Inverse of `G Gᵀ` from its Cholesky factor, symmetrized.
pub fn inverse_from_cholesky(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    // columns of G⁻¹ by forward substitution
    let mut ginv = DMatrix::<f64>::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= g[(i, k)] * ginv[(k, col)];
            }
            ginv[(i, col)] = s / g[(i, i)];
        }
    }
    let inv = ginv.transpose() * &ginv;
    (&inv + inv.transpose()) * 0.5
}

/// Upper-triangular `R` (p×p) with `RᵀR = Σ rowᵀ row` over all absorbed rows.
///
/// Rows are buffered and folded in with Householder reflections on the stacked matrix
/// `[R; rows]`, so `R` carries the same column geometry as the raw rows: inner
/// products and residual norms between columns are preserved to rounding.
#[derive(Debug, Clone)]
pub struct TriangularFactor {
    p: usize,
    // row-major (p + capacity) x p work area; the first p rows hold R
    work: Vec<f64>,
    pending: usize,
    capacity: usize,
}

impl TriangularFactor {
    pub fn new(p: usize) -> Self {
        Self::with_capacity(p, 256)
    }

    pub fn with_capacity(p: usize, capacity: usize) -> Self {
        let capacity = capacity.max(1);
        TriangularFactor { p, work: vec![0.0; (p + capacity) * p], pending: 0, capacity }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.p);
        let start = (self.p + self.pending) * self.p;
        self.work[start..start + self.p].copy_from_slice(row);
        self.pending += 1;
        if self.pending == self.capacity {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.pending == 0 {
            return;
        }
        let p = self.p;
        let m = p + self.pending;
        let w = &mut self.work;
        for k in 0..p {
            let mut norm2 = 0.0;
            for r in k..m {
                norm2 += w[r * p + k] * w[r * p + k];
            }
            if norm2 == 0.0 {
                continue;
            }
            let alpha = w[k * p + k];
            let norm = norm2.sqrt();
            let beta = if alpha >= 0.0 { -norm } else { norm };
            // v = x - beta e_k, stored in place with v_k = alpha - beta
            let vk = alpha - beta;
            let vnorm2 = norm2 - alpha * alpha + vk * vk;
            w[k * p + k] = vk;
            for col in (k + 1)..p {
                let mut dot = 0.0;
                for r in k..m {
                    dot += w[r * p + k] * w[r * p + col];
                }
                let f = 2.0 * dot / vnorm2;
                for r in k..m {
                    w[r * p + col] -= f * w[r * p + k];
                }
            }
            w[k * p + k] = beta;
            for r in (k + 1)..m {
                w[r * p + k] = 0.0;
            }
        }
        // sign convention: nonnegative diagonal
        for k in 0..p {
            if w[k * p + k] < 0.0 {
                for col in k..p {
                    w[k * p + col] = -w[k * p + col];
                }
            }
        }
        for v in &mut w[p * p..(p + self.pending) * p] {
            *v = 0.0;
        }
        self.pending = 0;
    }

    /// Returns `R` row-major, p×p.
    pub fn finish(mut self) -> Vec<f64> {
        self.flush();
        self.work.truncate(self.p * self.p);
        self.work
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    use crate::rng::keyed_rng;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = keyed_rng(seed, &[]);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn cholesky_small_cases() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(cholesky_factor(&id).unwrap(), id);
        let d = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        assert_eq!(cholesky_factor(&d).unwrap(), DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]));
    }

    #[test]
    fn cholesky_reconstructs_random_spd() {
        for seed in 0..20 {
            let c = random_spd(5, seed);
            let g = cholesky_factor(&c).unwrap();
            for i in 0..5 {
                for j in (i + 1)..5 {
                    assert_eq!(g[(i, j)], 0.0);
                }
            }
            let err = (&g * g.transpose() - &c).abs().max();
            assert!(err <= 1e-10 * c.abs().max(), "{err:e}");
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky_factor(&c), Err(Error::NotPositiveDefinite { row: 1, .. })));
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(cholesky_factor(&c), Err(Error::NotPositiveDefinite { row: 0, .. })));
    }

    #[test]
    fn inverse_matches() {
        let c = random_spd(6, 3);
        let inv = inverse_from_cholesky(&cholesky_factor(&c).unwrap());
        let err = (&inv * &c - DMatrix::<f64>::identity(6, 6)).abs().max();
        assert!(err < 1e-10);
    }

    #[test]
    fn triangular_factor_reproduces_gram() {
        let p = 5;
        let n = 700;
        let mut rng = keyed_rng(1, &[]);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let mut acc = TriangularFactor::with_capacity(p, 64);
        for r in &rows {
            acc.push_row(r);
        }
        let r = acc.finish();
        for i in 0..p {
            for j in 0..p {
                let direct: f64 = rows.iter().map(|x| x[i] * x[j]).sum();
                let via_r: f64 = (0..p).map(|k| r[k * p + i] * r[k * p + j]).sum();
                assert_relative_eq!(direct, via_r, epsilon = 1e-9, max_relative = 1e-12);
            }
            for k in (i + 1)..p {
                assert_eq!(r[k * p + i], 0.0);
            }
            assert!(r[i * p + i] >= 0.0);
        }
    }

    #[test]
    fn triangular_factor_with_fewer_rows_than_columns() {
        let mut acc = TriangularFactor::new(4);
        acc.push_row(&[1.0, 2.0, 0.0, -1.0]);
        acc.push_row(&[0.0, 1.0, 3.0, 1.0]);
        let r = acc.finish();
        assert!(r[2 * 4..].iter().all(|&v| v == 0.0));
        let g01: f64 = (0..4).map(|k| r[k * 4] * r[k * 4 + 1]).sum();
        assert_relative_eq!(g01, 2.0, epsilon = 1e-14);
    }
}
