//! Large deviations of Gaussian quadratic-plus-linear forms.
//!
//! For `y = Σ_j a_j z_j² + b_j z_j` with i.i.d. standard normal `z_j`,
//!
//! ```text
//! P{|y - E y| ≥ η} ≤ 2 exp(-(η²/8) / (‖a‖₂² + ‖b‖₂² + ‖a‖∞ η))
//! ```
//!
//! The Monte Carlo helpers here draw the form directly and are used to check the
//! bound and the closed-form moment generating function term by term.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{keyed_rng, tag};

const TRIAL_CHUNK: usize = 4096;

/// Coefficients of `y = Σ a_j z_j² + b_j z_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl QuadraticForm {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(format!("a has {} entries, b has {}", a.len(), b.len())));
        }
        if a.is_empty() {
            return Err(Error::InvalidParameter("form needs at least one term".into()));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("form coefficients must be finite".into()));
        }
        Ok(QuadraticForm { a, b })
    }

    /// Random form with entries uniform in `[-1, 1]`.
    pub fn random(len: usize, seed: u64) -> Result<Self> {
        use rand::Rng;
        let mut rng = keyed_rng(seed, &[tag::FORM]);
        let a = (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let b = (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect();
        QuadraticForm::new(a, b)
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn a_norm2_sq(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum()
    }

    pub fn b_norm2_sq(&self) -> f64 {
        self.b.iter().map(|v| v * v).sum()
    }

    pub fn a_norm_inf(&self) -> f64 {
        self.a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `E y = Σ a_j`.
    pub fn mean(&self) -> f64 {
        self.a.iter().sum()
    }

    fn is_degenerate(&self) -> bool {
        self.a.iter().chain(&self.b).all(|&v| v == 0.0)
    }
}

fn check_tail_args(form: &QuadraticForm, eta: f64) -> Result<()> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("deviation must be positive, got {eta}")));
    }
    if form.is_degenerate() {
        return Err(Error::DegenerateForm);
    }
    Ok(())
}

/// The two-sided tail bound; may exceed 1 for small `eta`.
pub fn tail_bound(form: &QuadraticForm, eta: f64) -> Result<f64> {
    check_tail_args(form, eta)?;
    let denom = form.a_norm2_sq() + form.b_norm2_sq() + form.a_norm_inf() * eta;
    Ok(2.0 * (-(eta * eta / 8.0) / denom).exp())
}

/// Variant with `‖b‖₂² / 2` in the denominator, as carried through the Chernoff argument.
/// Always at most [`tail_bound`].
pub fn tail_bound_half_linear(form: &QuadraticForm, eta: f64) -> Result<f64> {
    check_tail_args(form, eta)?;
    let denom = form.a_norm2_sq() + 0.5 * form.b_norm2_sq() + form.a_norm_inf() * eta;
    Ok(2.0 * (-(eta * eta / 8.0) / denom).exp())
}

/// `E exp(λ (a z² + b z)) = exp((λ² b² / 2) / (1 - 2λa)) / sqrt(1 - 2λa)`.
pub fn mgf_term(a: f64, b: f64, lam: f64) -> Result<f64> {
    let d = 1.0 - 2.0 * lam * a;
    if !(d > 0.0) {
        return Err(Error::DomainError(format!("1 - 2*lam*a = {d} must be positive")));
    }
    Ok(((lam * lam * b * b / 2.0) / d).exp() * (1.0 / d).sqrt())
}

/// Product of [`mgf_term`] over the coordinates of `form`.
pub fn form_mgf(form: &QuadraticForm, lam: f64) -> Result<f64> {
    form.a.iter().zip(&form.b).map(|(&a, &b)| mgf_term(a, b, lam)).product()
}

fn chunked_trials<T: Send>(trials: usize, f: impl Fn(usize, usize) -> T + Sync + Send) -> Vec<T> {
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    let run = |c: usize| {
        let len = TRIAL_CHUNK.min(trials - c * TRIAL_CHUNK);
        f(c, len)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    (0..chunks).map(run).collect()
}

/// Fractions of `trials` draws with `|y - E y| ≥ η`, one per entry of `etas`, all from
/// the same draws.
pub fn empirical_tails(form: &QuadraticForm, etas: &[f64], trials: usize, seed: u64) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let counts = chunked_trials(trials, |chunk, len| {
        let mut rng = keyed_rng(seed, &[tag::TRIAL, chunk as u64]);
        let mut counts = vec![0usize; etas.len()];
        for _ in 0..len {
            let dev: f64 = form
                .a
                .iter()
                .zip(&form.b)
                .map(|(&a, &b)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    a * (z * z - 1.0) + b * z
                })
                .sum();
            for (c, &eta) in counts.iter_mut().zip(etas) {
                if dev.abs() >= eta {
                    *c += 1;
                }
            }
        }
        counts
    });
    let totals = counts.into_iter().fold(vec![0usize; etas.len()], |mut acc, c| {
        acc.iter_mut().zip(c).for_each(|(t, v)| *t += v);
        acc
    });
    Ok(totals.into_iter().map(|c| c as f64 / trials as f64).collect())
}

/// Fraction of `trials` draws with `|y - E y| ≥ η`.
pub fn empirical_tail(form: &QuadraticForm, eta: f64, trials: usize, seed: u64) -> Result<f64> {
    Ok(empirical_tails(form, &[eta], trials, seed)?[0])
}

/// Monte Carlo mean of `exp(λ (a z² + b z))` with its standard error.
pub fn mgf_empirical_with_se(a: f64, b: f64, lam: f64, trials: usize, seed: u64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let parts = chunked_trials(trials, |chunk, len| {
        let mut rng = keyed_rng(seed, &[tag::TRIAL, chunk as u64]);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = (lam * (a * z * z + b * z)).exp();
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let (s, s2) = parts.into_iter().fold((0.0, 0.0), |(x, y), (u, v)| (x + u, y + v));
    let m = trials as f64;
    let mean = s / m;
    let var = (s2 / m - mean * mean).max(0.0);
    Ok((mean, (var / m).sqrt()))
}

/// Monte Carlo mean of `exp(λ (a z² + b z))`.
pub fn mgf_empirical(a: f64, b: f64, lam: f64, trials: usize, seed: u64) -> Result<f64> {
    Ok(mgf_empirical_with_se(a, b, lam, trials, seed)?.0)
}

/// Monte Carlo mean of `exp(λ y)` for the whole form, with its standard error.
pub fn form_mgf_empirical(form: &QuadraticForm, lam: f64, trials: usize, seed: u64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let parts = chunked_trials(trials, |chunk, len| {
        let mut rng = keyed_rng(seed, &[tag::TRIAL, chunk as u64]);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            let y: f64 = form
                .a
                .iter()
                .zip(&form.b)
                .map(|(&a, &b)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    a * z * z + b * z
                })
                .sum();
            let v = (lam * y).exp();
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let (s, s2) = parts.into_iter().fold((0.0, 0.0), |(x, y), (u, v)| (x + u, y + v));
    let m = trials as f64;
    let mean = s / m;
    Ok((mean, ((s2 / m - mean * mean).max(0.0) / m).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn form(a: &[f64], b: &[f64]) -> QuadraticForm {
        QuadraticForm::new(a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn bound_example() {
        let f = form(&[1.0], &[0.0]);
        assert_relative_eq!(tail_bound(&f, 2.0).unwrap(), 2.0 * (-1.0f64 / 6.0).exp(), epsilon = 1e-15);
        // 2 exp(-1/6) = 1.69296...
        assert!((tail_bound(&f, 2.0).unwrap() - 1.6925).abs() < 5e-4);
    }

    #[test]
    fn bound_tends_to_two() {
        let f = form(&[0.3, -0.2], &[0.5, 0.1]);
        assert!((tail_bound(&f, 1e-9).unwrap() - 2.0).abs() < 1e-12);
        assert!(tail_bound(&f, 1e-9).unwrap() <= 2.0);
    }

    #[test]
    fn bound_is_homogeneous() {
        let f = form(&[0.3, -0.2, 0.7], &[0.5, 0.1, -0.4]);
        let g = form(&[0.9, -0.6, 2.1], &[1.5, 0.3, -1.2]);
        assert_relative_eq!(tail_bound(&f, 1.3).unwrap(), tail_bound(&g, 3.9).unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn bound_depends_on_b_through_its_norm() {
        let f = form(&[0.3, -0.2, 0.7], &[0.5, 0.1, -0.4]);
        let g = form(&[0.3, -0.2, 0.7], &[-0.4, 0.5, 0.1]);
        assert_eq!(tail_bound(&f, 1.0).unwrap(), tail_bound(&g, 1.0).unwrap());
    }

    #[test]
    fn half_linear_variant_is_tighter() {
        let f = form(&[0.3, -0.2], &[0.5, 0.9]);
        for eta in [0.1, 1.0, 5.0] {
            assert!(tail_bound_half_linear(&f, eta).unwrap() <= tail_bound(&f, eta).unwrap());
        }
    }

    #[test]
    fn bound_errors() {
        assert!(matches!(tail_bound(&form(&[0.0], &[0.0]), 1.0), Err(Error::DegenerateForm)));
        assert!(tail_bound(&form(&[1.0], &[0.0]), 0.0).is_err());
        assert!(QuadraticForm::new(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn mgf_examples() {
        assert_eq!(mgf_term(0.7, -0.3, 0.0).unwrap(), 1.0);
        assert_relative_eq!(mgf_term(0.0, 1.0, 1.0).unwrap(), 0.5f64.exp(), epsilon = 1e-15);
        assert_relative_eq!(mgf_term(0.5, 0.0, 0.5).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(mgf_term(0.5, 0.0, 1.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn mgf_empirical_at_zero_is_one() {
        assert_eq!(mgf_empirical(0.4, 0.2, 0.0, 1000, 1).unwrap(), 1.0);
    }

    #[test]
    fn standard_normal_two_sided_tail() {
        // P(|z| >= 1.96) = 0.04999579...
        let f = form(&[0.0], &[1.0]);
        let p = empirical_tail(&f, 1.96, 100_000, 3).unwrap();
        assert!((p - 0.05).abs() <= 0.005, "{p}");
    }

    #[test]
    fn huge_deviation_never_observed() {
        let f = form(&[0.1, 0.2], &[0.3, 0.1]);
        assert_eq!(empirical_tail(&f, 1e3, 10_000, 4).unwrap(), 0.0);
    }

    #[test]
    fn tails_are_deterministic() {
        let f = form(&[0.5, -0.5], &[1.0, 0.0]);
        let a = empirical_tails(&f, &[0.5, 1.0, 2.0], 20_000, 9).unwrap();
        assert_eq!(a, empirical_tails(&f, &[0.5, 1.0, 2.0], 20_000, 9).unwrap());
        assert!(a.windows(2).all(|w| w[0] >= w[1]));
    }
}
