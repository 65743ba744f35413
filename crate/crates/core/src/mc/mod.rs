//! Sampling-based construction of decision rows for models known only
//! through a likelihood, a prior sampler and a data sampler.
//!
//! 1. Draw parameters (from the prior, or from a proposal focused on an
//!    observed data set, with importance weights back to the prior).
//! 2. Draw `n_data_per_param` data sets from each sampled parameter.
//! 3. For a null `eta`, estimate the posterior density of every sampled data
//!    set through the self-normalized mixture estimate
//!    `P_mix(x) ~ sum_i w_i f(x | eta_i) / sum_i w_i`, rank them, and admit
//!    them until the importance-sampled coverage under `f(. | eta)` reaches
//!    `1 - level`.
//!
//! # Random streams
//!
//! Every unit of work owns a ChaCha8 stream derived from the seed:
//! parameter `i` is drawn from stream `2 i`, and the data sets of parameter
//! `i` are drawn in order `j = 0, 1, ...` from stream `2 i + 1`. Results
//! therefore do not depend on how the work is scheduled.

mod binomial;

pub use binomial::{BinomialBetaModel, Proposal};

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decision::{admit_groups, check_level, tie_groups, DecisionMatrix};
use crate::error::{Error, Result};

pub trait GenericModel: Sync {
    type Param: Clone + Send + Sync;
    type Data: Clone + PartialOrd + Send + Sync;

    /// Density (or mass) of `data` under `param`.
    fn likelihood(&self, data: &Self::Data, param: &Self::Param) -> f64;

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Param;

    fn sample_data<R: Rng + ?Sized>(&self, rng: &mut R, param: &Self::Param) -> Self::Data;

    /// Proposal used when an observed data set is available.
    fn sample_focused<R: Rng + ?Sized>(&self, rng: &mut R, _observed: &Self::Data) -> Self::Param {
        self.sample_prior(rng)
    }

    /// Prior density over proposal density at `param`.
    fn prior_density_ratio(&self, _param: &Self::Param, _observed: &Self::Data) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub seed: u64,
    pub n_params: usize,
    pub n_data_per_param: usize,
    pub level: f64,
    /// Rows whose importance weights have a smaller Kish effective sample
    /// size are reported as imprecise.
    pub ess_floor: f64,
}

impl McConfig {
    pub const DEFAULT_ESS_FLOOR: f64 = 100.0;

    pub fn new(seed: u64, n_params: usize, n_data_per_param: usize, level: f64) -> Result<Self> {
        let cfg = Self {
            seed,
            n_params,
            n_data_per_param,
            level,
            ess_floor: Self::DEFAULT_ESS_FLOOR,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_ess_floor(mut self, floor: f64) -> Self {
        self.ess_floor = floor;
        self
    }

    pub fn total_draws(&self) -> usize {
        self.n_params * self.n_data_per_param
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_params == 0 || self.n_data_per_param == 0 {
            return Err(Error::config("Monte Carlo sample counts must be positive"));
        }
        if self.ess_floor.is_nan() || self.ess_floor < 0.0 {
            return Err(Error::config(
                "effective sample size floor must be nonnegative",
            ));
        }
        check_level(self.level)
    }

    fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }
}

/// Sampled parameters with importance weights relative to the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSample<P> {
    pub params: Vec<P>,
    pub weights: Vec<f64>,
}

/// Step (a). Without `observed` the prior is sampled directly and all
/// weights are one.
pub fn mc_sample_params<M: GenericModel>(
    model: &M,
    cfg: &McConfig,
    observed: Option<&M::Data>,
) -> Result<ParamSample<M::Param>> {
    cfg.validate()?;
    let draws: Vec<(M::Param, f64)> = (0..cfg.n_params)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.stream(2 * i as u64);
            match observed {
                None => (model.sample_prior(&mut rng), 1.0),
                Some(x0) => {
                    let p = model.sample_focused(&mut rng, x0);
                    let w = model.prior_density_ratio(&p, x0);
                    (p, w)
                }
            }
        })
        .collect();
    let (params, weights): (Vec<_>, Vec<_>) = draws.into_iter().unzip();
    if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Degenerate(format!(
            "invalid importance weight {bad}"
        )));
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Degenerate("importance weights sum to zero".into()));
    }
    Ok(ParamSample { params, weights })
}

/// Data sets indexed by `(parameter i, replicate j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSample<D> {
    draws: Vec<Vec<D>>,
}

impl<D> DataSample<D> {
    pub fn get(&self, i: usize, j: usize) -> Option<&D> {
        self.draws.get(i).and_then(|row| row.get(j))
    }

    pub fn for_param(&self, i: usize) -> &[D] {
        &self.draws[i]
    }

    pub fn n_params(&self) -> usize {
        self.draws.len()
    }

    pub fn len(&self) -> usize {
        self.draws.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &D> {
        self.draws.iter().flatten()
    }
}

/// Step (b).
pub fn mc_sample_data<M: GenericModel>(
    model: &M,
    params: &ParamSample<M::Param>,
    cfg: &McConfig,
) -> DataSample<M::Data> {
    let draws = params
        .params
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = cfg.stream(2 * i as u64 + 1);
            (0..cfg.n_data_per_param)
                .map(|_| model.sample_data(&mut rng, p))
                .collect()
        })
        .collect();
    DataSample { draws }
}

/// A distinct sampled data set with its sampling statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledOutcome<D> {
    pub data: D,
    pub count: usize,
    /// Self-normalized estimate of the prior mixture `P_mix(data)`.
    pub mixture: f64,
    /// Density the data sets were actually drawn from, `mean_i f(data | eta_i)`.
    pub sampling_density: f64,
}

/// Distinct sampled data with mixture estimates; shared by every null.
#[derive(Debug, Clone, PartialEq)]
pub struct McSample<D> {
    pub outcomes: Vec<SampledOutcome<D>>,
    pub total_draws: usize,
}

fn cmp_data<D: PartialOrd>(a: &D, b: &D) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Collapses repeated data sets and estimates the mixture at each one.
pub fn prepare_sample<M: GenericModel>(
    model: &M,
    params: &ParamSample<M::Param>,
    data: &DataSample<M::Data>,
) -> Result<McSample<M::Data>> {
    if data.is_empty() {
        return Err(Error::Degenerate("no data sampled".into()));
    }
    let mut all: Vec<M::Data> = data.iter().cloned().collect();
    all.sort_by(cmp_data);
    let mut distinct: Vec<(M::Data, usize)> = Vec::new();
    for d in all {
        match distinct.last_mut() {
            Some((prev, count)) if cmp_data(prev, &d) == Ordering::Equal => *count += 1,
            _ => distinct.push((d, 1)),
        }
    }
    let weight_total: f64 = params.weights.iter().sum();
    let n_params = params.params.len() as f64;
    let outcomes = distinct
        .into_par_iter()
        .map(|(d, count)| {
            let (mut weighted, mut plain) = (0.0, 0.0);
            for (p, w) in params.params.iter().zip(&params.weights) {
                let f = model.likelihood(&d, p);
                weighted += w * f;
                plain += f;
            }
            SampledOutcome {
                data: d,
                count,
                mixture: weighted / weight_total,
                sampling_density: plain / n_params,
            }
        })
        .collect();
    Ok(McSample {
        outcomes,
        total_draws: data.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRowEntry<D> {
    pub data: D,
    pub posterior_density: f64,
    pub included: bool,
}

/// Decision row over the sampled data sets.
#[derive(Debug, Clone, PartialEq)]
pub struct McDecisionRow<P, D> {
    pub eta: P,
    pub entries: Vec<McRowEntry<D>>,
    pub threshold: f64,
    /// Self-normalized importance estimate of the coverage under `eta`.
    pub estimated_coverage: f64,
    pub effective_sample_size: f64,
}

impl<P, D: PartialOrd> McDecisionRow<P, D> {
    pub fn includes(&self, data: &D) -> bool {
        self.entries
            .binary_search_by(|e| cmp_data(&e.data, data))
            .map(|i| self.entries[i].included)
            .unwrap_or(false)
    }
}

/// Step (c) for one null.
pub fn mc_build_decision_row<M: GenericModel>(
    model: &M,
    eta: &M::Param,
    sample: &McSample<M::Data>,
    cfg: &McConfig,
) -> Result<McDecisionRow<M::Param, M::Data>> {
    cfg.validate()?;
    if sample.outcomes.is_empty() {
        return Err(Error::Degenerate("empty sample".into()));
    }
    let f: Vec<f64> = sample
        .outcomes
        .iter()
        .map(|o| model.likelihood(&o.data, eta))
        .collect();
    // per-draw importance weight f_eta / q; every copy of an outcome shares it
    let per_draw: Vec<f64> = f
        .iter()
        .zip(&sample.outcomes)
        .map(|(fx, o)| {
            if *fx > 0.0 {
                fx / o.sampling_density
            } else {
                0.0
            }
        })
        .collect();
    let (sum_w, sum_w2) = per_draw
        .iter()
        .zip(&sample.outcomes)
        .fold((0.0, 0.0), |(s, s2), (w, o)| {
            (s + o.count as f64 * w, s2 + o.count as f64 * w * w)
        });
    if sum_w.is_nan() || sum_w <= 0.0 {
        return Err(Error::Degenerate(
            "no sampled data is possible under eta".into(),
        ));
    }
    let ess = sum_w * sum_w / sum_w2;
    if ess < cfg.ess_floor {
        return Err(Error::Precision {
            ess,
            floor: cfg.ess_floor,
        });
    }
    let mass: Vec<f64> = per_draw
        .iter()
        .zip(&sample.outcomes)
        .map(|(w, o)| o.count as f64 * w / sum_w)
        .collect();
    let ln_g: Vec<f64> = f
        .iter()
        .zip(&sample.outcomes)
        .map(|(fx, o)| fx.ln() - o.mixture.ln())
        .collect();
    let groups = tie_groups(&ln_g);
    let (included, last, estimated_coverage) = admit_groups(&groups, &mass, cfg.level);
    let threshold = last
        .map(|gi| {
            groups[gi]
                .iter()
                .map(|&k| ln_g[k])
                .fold(f64::INFINITY, f64::min)
                .exp()
        })
        .unwrap_or(f64::INFINITY);
    let entries = sample
        .outcomes
        .iter()
        .zip(&ln_g)
        .zip(included)
        .map(|((o, lg), inc)| McRowEntry {
            data: o.data.clone(),
            posterior_density: lg.exp(),
            included: inc,
        })
        .collect();
    Ok(McDecisionRow {
        eta: eta.clone(),
        entries,
        threshold,
        estimated_coverage,
        effective_sample_size: ess,
    })
}

/// Per-null agreement between sampled rows and an exact matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct McAgreement {
    pub etas: Vec<f64>,
    /// Fraction of outcomes with matching inclusion; `None` where the row
    /// could not be estimated (counted as full disagreement overall).
    pub per_row: Vec<Option<f64>>,
    pub overall: f64,
    pub failed_rows: usize,
}

/// Runs steps (a) to (c) for every grid null of `exact` and compares cell
/// by cell. Unsampled outcomes count as excluded.
pub fn mc_validate_binomial(
    exact: &DecisionMatrix,
    model: &BinomialBetaModel,
    cfg: &McConfig,
) -> Result<McAgreement> {
    let params = mc_sample_params(model, cfg, None)?;
    let data = mc_sample_data(model, &params, cfg);
    let sample = prepare_sample(model, &params, &data)?;
    let width = exact.config().model().support_len();
    let per_row: Vec<Option<f64>> = exact
        .rows()
        .par_iter()
        .map(|row| {
            mc_build_decision_row(model, &row.eta, &sample, cfg)
                .ok()
                .map(|mc| {
                    let agree = (0..width as u64)
                        .filter(|&x| mc.includes(&x) == row.included[x as usize])
                        .count();
                    agree as f64 / width as f64
                })
        })
        .collect();
    let failed_rows = per_row.iter().filter(|r| r.is_none()).count();
    let overall = per_row.iter().map(|r| r.unwrap_or(0.0)).sum::<f64>() / per_row.len() as f64;
    Ok(McAgreement {
        etas: exact.rows().iter().map(|r| r.eta).collect(),
        per_row,
        overall,
        failed_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{BetaPrior, BinomialModel};

    fn model(n: u64) -> BinomialBetaModel {
        BinomialBetaModel::new(BinomialModel::new(n).unwrap(), BetaPrior::non_informative())
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(1, 0, 10, 0.05).is_err());
        assert!(McConfig::new(1, 10, 0, 0.05).is_err());
        assert!(McConfig::new(1, 10, 10, 1.0).is_err());
        assert_eq!(McConfig::new(1, 10, 20, 0.05).unwrap().total_draws(), 200);
    }

    #[test]
    fn prior_draws_have_unit_weights_and_reproduce() {
        let m = model(10);
        let cfg = McConfig::new(42, 500, 3, 0.05).unwrap();
        let a = mc_sample_params(&m, &cfg, None).unwrap();
        let b = mc_sample_params(&m, &cfg, None).unwrap();
        assert_eq!(a, b);
        assert!(a.weights.iter().all(|&w| w == 1.0));
        let c = mc_sample_params(&m, &McConfig { seed: 43, ..cfg }, None).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn data_streams_are_per_parameter() {
        let m = model(30);
        let cfg = McConfig::new(7, 50, 4, 0.05).unwrap();
        let params = mc_sample_params(&m, &cfg, None).unwrap();
        let data = mc_sample_data(&m, &params, &cfg);
        assert_eq!(data.len(), 200);
        // a larger replicate count extends, not reshuffles, each parameter's stream
        let more = mc_sample_data(
            &m,
            &params,
            &McConfig {
                n_data_per_param: 8,
                ..cfg
            },
        );
        for i in 0..50 {
            assert_eq!(&more.for_param(i)[..4], data.for_param(i));
        }
    }

    #[test]
    fn precision_floor_is_enforced() {
        let m = model(10);
        let cfg = McConfig::new(3, 20, 2, 0.05).unwrap();
        let params = mc_sample_params(&m, &cfg, None).unwrap();
        let data = mc_sample_data(&m, &params, &cfg);
        let sample = prepare_sample(&m, &params, &data).unwrap();
        let err = mc_build_decision_row(&m, &0.5, &sample, &cfg).unwrap_err();
        assert!(matches!(err, Error::Precision { .. }));
        let relaxed = cfg.with_ess_floor(1.0);
        assert!(mc_build_decision_row(&m, &0.5, &sample, &relaxed).is_ok());
    }
}
