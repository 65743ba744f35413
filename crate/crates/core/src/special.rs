//! Log-space special functions and the binomial / beta / beta-binomial
//! densities used by the test construction.
//!
//! Every mass and density is assembled as a logarithm and exponentiated
//! last; with `n = 100` the binomial coefficients alone exceed `1e29`.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

/// Lanczos coefficients for `g = 671/128` (14 terms).
const LANCZOS_G: f64 = 5.242_187_5;
const LANCZOS_SERIES_0: f64 = 0.999_999_999_999_997_1;
const LANCZOS_COEFFS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];
const SQRT_TWO_PI: f64 = 2.506_628_274_631_000_5;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

/// `(-1)^k zeta(k) / k` for `k = 2..=30`, the Taylor coefficients of
/// `ln Gamma(1 + x) + gamma x`.
const LN_GAMMA_1P_COEFFS: [f64; 29] = [
    0.822_467_033_424_113_218_24,
    -0.400_685_634_386_531_428_47,
    0.270_580_808_427_784_547_88,
    -0.207_385_551_028_673_985_27,
    0.169_557_176_997_408_189_95,
    -0.144_049_896_768_846_118_12,
    0.125_509_669_524_743_042_42,
    -0.111_334_265_869_564_690_49,
    0.100_099_457_512_781_808_53,
    -0.090_954_017_145_829_042_233,
    0.083_353_840_546_109_004_025,
    -0.076_932_516_411_352_191_473,
    0.071_432_946_295_361_336_059,
    -0.066_668_705_882_420_468_033,
    0.062_500_955_141_213_040_742,
    -0.058_823_978_658_684_582_339,
    0.055_555_767_627_403_611_102,
    -0.052_631_679_379_616_660_734,
    0.050_000_047_698_101_693_64,
    -0.047_619_070_330_142_227_991,
    0.045_454_556_293_204_669_442,
    -0.043_478_266_053_040_259_361,
    0.041_666_669_150_341_210_469,
    -0.040_000_001_192_140_140_586,
    0.038_461_539_034_675_185_706,
    -0.037_037_037_312_989_325_549,
    0.035_714_285_847_333_358_028,
    -0.034_482_758_684_919_300_811,
    0.033_333_333_364_377_581_081,
];

/// Half-width of the windows around 1 and 2 where the Taylor series
/// replaces the Lanczos sum (both roots of `ln Gamma`).
const SERIES_RADIUS: f64 = 0.25;

/// Natural logarithm of the gamma function for `z > 0`.
pub fn log_gamma(z: f64) -> Result<f64> {
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::domain(format!("log_gamma requires z > 0, got {z}")));
    }
    Ok(ln_gamma(z))
}

/// Unchecked `ln Gamma(z)`; callers guarantee `z > 0`.
pub(crate) fn ln_gamma(z: f64) -> f64 {
    let near_one = z - 1.0;
    if near_one.abs() <= SERIES_RADIUS {
        return ln_gamma_1p_series(near_one);
    }
    let near_two = z - 2.0;
    if near_two.abs() <= SERIES_RADIUS {
        // Gamma(2 + x) = (1 + x) Gamma(1 + x)
        return ln_gamma_1p_series(near_two) + near_two.ln_1p();
    }
    if z < 1.0 - SERIES_RADIUS {
        return ln_gamma(z + 1.0) - z.ln();
    }
    ln_gamma_lanczos(z)
}

fn ln_gamma_1p_series(x: f64) -> f64 {
    // Horner over x^2 .. x^30, then the linear term.
    let mut acc = 0.0;
    for c in LN_GAMMA_1P_COEFFS.iter().rev() {
        acc = acc * x + c;
    }
    x * (acc * x - EULER_GAMMA)
}

fn ln_gamma_lanczos(z: f64) -> f64 {
    let t = z + LANCZOS_G;
    let head = (z + 0.5) * t.ln() - t;
    let mut series = LANCZOS_SERIES_0;
    let mut denom = z;
    for c in LANCZOS_COEFFS {
        denom += 1.0;
        series += c / denom;
    }
    head + (SQRT_TWO_PI * series / z).ln()
}

/// `ln B(a, b)`.
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Binomial experiment with a fixed number of trials; outcomes are `0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinomialModel {
    n: u64,
}

impl BinomialModel {
    pub fn new(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("binomial model needs at least one trial"));
        }
        Ok(Self { n })
    }

    pub fn trials(&self) -> u64 {
        self.n
    }

    /// Number of distinct outcomes, `n + 1`.
    pub fn support_len(&self) -> usize {
        self.n as usize + 1
    }

    pub fn outcomes(&self) -> impl Iterator<Item = u64> {
        0..=self.n
    }

    pub(crate) fn check_outcome(&self, x: u64) -> Result<()> {
        if x > self.n {
            return Err(Error::domain(format!(
                "outcome {x} outside support 0..={}",
                self.n
            )));
        }
        Ok(())
    }

    /// `ln C(n, x)` for every outcome, in outcome order.
    pub(crate) fn ln_choose_table(&self) -> Vec<f64> {
        let ln_n_fact = ln_gamma(self.n as f64 + 1.0);
        self.outcomes()
            .map(|x| ln_n_fact - ln_gamma(x as f64 + 1.0) - ln_gamma((self.n - x) as f64 + 1.0))
            .collect()
    }

    pub(crate) fn ln_choose(&self, x: u64) -> f64 {
        ln_gamma(self.n as f64 + 1.0)
            - ln_gamma(x as f64 + 1.0)
            - ln_gamma((self.n - x) as f64 + 1.0)
    }

    /// `ln f_theta(x)` given a precomputed `ln C(n, x)`; `-inf` for impossible outcomes.
    pub(crate) fn ln_pmf_with(&self, ln_choose: f64, x: u64, theta: f64) -> f64 {
        let failures = self.n - x;
        let succ_term = if x == 0 { 0.0 } else { x as f64 * theta.ln() };
        let fail_term = if failures == 0 {
            0.0
        } else {
            failures as f64 * (-theta).ln_1p()
        };
        ln_choose + succ_term + fail_term
    }

    /// Full pmf over `0..=n` at `theta`.
    pub fn pmf_vector(&self, theta: f64) -> Result<Vec<f64>> {
        check_probability(theta, "theta")?;
        let table = self.ln_choose_table();
        Ok(self
            .outcomes()
            .map(|x| self.ln_pmf_with(table[x as usize], x, theta).exp())
            .collect())
    }
}

/// Beta prior with shapes `a, b > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPrior {
    a: f64,
    b: f64,
}

impl BetaPrior {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::config(format!(
                "beta shapes must be positive and finite, got ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }

    /// Beta(0.5, 0.5).
    pub fn non_informative() -> Self {
        Self { a: 0.5, b: 0.5 }
    }

    /// Beta(100, 100), concentrated around 0.5.
    pub fn informative() -> Self {
        Self { a: 100.0, b: 100.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }

    /// Conjugate update after observing `x` successes out of `model.trials()`.
    pub fn posterior(&self, x: u64, model: &BinomialModel) -> Self {
        Self {
            a: self.a + x as f64,
            b: self.b + (model.trials() - x) as f64,
        }
    }

    pub(crate) fn ln_pdf(&self, t: f64) -> f64 {
        (self.a - 1.0) * t.ln() + (self.b - 1.0) * (-t).ln_1p() - ln_beta(self.a, self.b)
    }
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("{what} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn check_open_probability(p: f64, what: &str) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("{what} must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// `C(n, x) theta^x (1 - theta)^(n - x)`. `theta` in `{0, 1}` is a point mass.
pub fn binom_pmf(x: u64, model: &BinomialModel, theta: f64) -> Result<f64> {
    model.check_outcome(x)?;
    check_probability(theta, "theta")?;
    Ok(model.ln_pmf_with(model.ln_choose(x), x, theta).exp())
}

/// Beta density at `t`. Endpoints are accepted only where the density is finite.
pub fn beta_pdf(t: f64, prior: &BetaPrior) -> Result<f64> {
    check_probability(t, "t")?;
    let (a, b) = (prior.a(), prior.b());
    let at_edge = |shape: f64, other: f64| -> Result<f64> {
        if shape < 1.0 {
            Err(Error::domain(format!(
                "beta density unbounded at the boundary (shape {shape})"
            )))
        } else if shape == 1.0 {
            // t^0 term; remaining factor (1)^(other-1) / B(1, other) = other
            Ok(other)
        } else {
            Ok(0.0)
        }
    };
    if t == 0.0 {
        return at_edge(a, b);
    }
    if t == 1.0 {
        return at_edge(b, a);
    }
    Ok(prior.ln_pdf(t).exp())
}

/// `ln P_mix(x)`: log beta-binomial mass.
pub(crate) fn ln_beta_binom(x: u64, model: &BinomialModel, prior: &BetaPrior) -> f64 {
    let n = model.trials();
    model.ln_choose(x) + ln_beta(x as f64 + prior.a(), (n - x) as f64 + prior.b())
        - ln_beta(prior.a(), prior.b())
}

/// Beta-binomial mass `C(n, x) B(x + a, b + n - x) / B(a, b)`: the prior
/// mixture of binomial likelihoods.
pub fn beta_binom_pmf(x: u64, model: &BinomialModel, prior: &BetaPrior) -> Result<f64> {
    model.check_outcome(x)?;
    Ok(ln_beta_binom(x, model, prior).exp())
}

/// Full beta-binomial pmf over `0..=n`.
pub fn beta_binom_vector(model: &BinomialModel, prior: &BetaPrior) -> Vec<f64> {
    model
        .outcomes()
        .map(|x| ln_beta_binom(x, model, prior).exp())
        .collect()
}

/// Posterior density with respect to the prior measure,
/// `g(eta, x) = f_eta(x) / P_mix(x)`, evaluated as a pmf ratio.
pub fn posterior_density(
    eta: f64,
    x: u64,
    model: &BinomialModel,
    prior: &BetaPrior,
) -> Result<f64> {
    model.check_outcome(x)?;
    check_open_probability(eta, "eta")?;
    Ok(ln_posterior_density(eta, x, model, prior).exp())
}

pub(crate) fn ln_posterior_density(
    eta: f64,
    x: u64,
    model: &BinomialModel,
    prior: &BetaPrior,
) -> f64 {
    model.ln_pmf_with(model.ln_choose(x), x, eta) - ln_beta_binom(x, model, prior)
}

/// The same quantity as [`posterior_density`], computed as the ratio of
/// the conjugate posterior density to the prior density.
pub fn posterior_density_beta_ratio(
    eta: f64,
    x: u64,
    model: &BinomialModel,
    prior: &BetaPrior,
) -> Result<f64> {
    model.check_outcome(x)?;
    check_open_probability(eta, "eta")?;
    let post = prior.posterior(x, model);
    Ok((post.ln_pdf(eta) - prior.ln_pdf(eta)).exp())
}

/// Neyman-Pearson statistic `P_mix(x) / f_eta(x)`, the reciprocal of the
/// posterior density. Returns `+inf` when `x` is impossible under `eta`.
pub fn likelihood_ratio(eta: f64, x: u64, model: &BinomialModel, prior: &BetaPrior) -> Result<f64> {
    model.check_outcome(x)?;
    check_probability(eta, "eta")?;
    let ln_f = model.ln_pmf_with(model.ln_choose(x), x, eta);
    if ln_f == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok((ln_beta_binom(x, model, prior) - ln_f).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_err(got: f64, want: f64) -> f64 {
        ((got - want) / want).abs()
    }

    #[test]
    fn log_gamma_trivial_points() {
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert_eq!(log_gamma(2.0).unwrap(), 0.0);
        assert!(rel_err(log_gamma(0.5).unwrap(), 0.572_364_942_924_700_087_07) < 1e-14);
    }

    #[test]
    fn log_gamma_rejects_non_positive() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn log_gamma_factorials() {
        // ln(k!) by direct summation
        let mut ln_fact = 0.0f64;
        for k in 1..170u32 {
            ln_fact += (k as f64).ln();
            let got = log_gamma(k as f64 + 1.0).unwrap();
            assert!((got - ln_fact).abs() <= 1e-12 * ln_fact.max(1.0), "k={k}");
        }
    }

    #[test]
    fn binom_pmf_trivial_cases() {
        let m100 = BinomialModel::new(100).unwrap();
        assert_eq!(binom_pmf(0, &m100, 0.0).unwrap(), 1.0);
        assert_eq!(binom_pmf(1, &m100, 0.0).unwrap(), 0.0);
        assert_eq!(binom_pmf(100, &m100, 1.0).unwrap(), 1.0);
        let m2 = BinomialModel::new(2).unwrap();
        assert!((binom_pmf(1, &m2, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn binom_pmf_rejects_bad_inputs() {
        let m = BinomialModel::new(10).unwrap();
        assert!(binom_pmf(11, &m, 0.5).is_err());
        assert!(binom_pmf(3, &m, 1.5).is_err());
        assert!(BinomialModel::new(0).is_err());
    }

    #[test]
    fn beta_pdf_values_and_edges() {
        let uniform = BetaPrior::new(1.0, 1.0).unwrap();
        assert!((beta_pdf(0.5, &uniform).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(beta_pdf(0.0, &uniform).unwrap(), 1.0);
        let b22 = BetaPrior::new(2.0, 2.0).unwrap();
        assert!((beta_pdf(0.5, &b22).unwrap() - 1.5).abs() < 1e-14);
        assert_eq!(beta_pdf(1.0, &b22).unwrap(), 0.0);
        let jeffreys = BetaPrior::non_informative();
        assert!(beta_pdf(0.0, &jeffreys).is_err());
        assert!(beta_pdf(1.0, &jeffreys).is_err());
        assert!(beta_pdf(-0.1, &b22).is_err());
        assert!(BetaPrior::new(0.0, 1.0).is_err());
    }

    #[test]
    fn beta_binom_flat_prior_is_uniform() {
        let m = BinomialModel::new(100).unwrap();
        let flat = BetaPrior::new(1.0, 1.0).unwrap();
        for x in m.outcomes() {
            assert!(rel_err(beta_binom_pmf(x, &m, &flat).unwrap(), 1.0 / 101.0) < 1e-12);
        }
        let m1 = BinomialModel::new(1).unwrap();
        let sym = BetaPrior::new(3.7, 3.7).unwrap();
        assert!((beta_binom_pmf(0, &m1, &sym).unwrap() - 0.5).abs() < 1e-14);
        assert!(beta_binom_pmf(2, &m1, &sym).is_err());
    }

    #[test]
    fn uniform_prior_posterior_density_is_scaled_pmf() {
        let m = BinomialModel::new(30).unwrap();
        let flat = BetaPrior::new(1.0, 1.0).unwrap();
        for &eta in &[0.01, 0.3, 0.5, 0.77] {
            for x in m.outcomes() {
                let g = posterior_density(eta, x, &m, &flat).unwrap();
                let f = binom_pmf(x, &m, eta).unwrap();
                assert!(rel_err(g, 31.0 * f) < 1e-11);
                let r = likelihood_ratio(eta, x, &m, &flat).unwrap();
                assert!(rel_err(r, 1.0 / (31.0 * f)) < 1e-11);
            }
        }
    }

    #[test]
    fn likelihood_ratio_infinite_for_impossible_outcome() {
        let m = BinomialModel::new(5).unwrap();
        let p = BetaPrior::non_informative();
        assert_eq!(likelihood_ratio(0.0, 3, &m, &p).unwrap(), f64::INFINITY);
        assert!(likelihood_ratio(0.0, 0, &m, &p).unwrap().is_finite());
    }

    #[test]
    fn posterior_density_requires_open_interval() {
        let m = BinomialModel::new(5).unwrap();
        let p = BetaPrior::non_informative();
        assert!(posterior_density(0.0, 1, &m, &p).is_err());
        assert!(posterior_density_beta_ratio(1.0, 1, &m, &p).is_err());
    }
}
