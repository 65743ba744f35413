//! Optimal decision sets: for every null `eta` the outcomes are admitted in
//! decreasing order of posterior density (equivalently increasing
//! likelihood ratio against the prior mixture) until the coverage under
//! `f_eta` reaches `1 - level`.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::special::{ln_beta_binom, BetaPrior, BinomialModel};
use crate::util::{format_sig, parse_field};

/// Relative tolerance under which two posterior densities form a tie-group.
pub const TIE_RELATIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TestConfig {
    level: f64,
    model: BinomialModel,
    prior: BetaPrior,
    grid: ParameterGrid,
}

impl TestConfig {
    pub fn new(
        level: f64,
        model: BinomialModel,
        prior: BetaPrior,
        grid: ParameterGrid,
    ) -> Result<Self> {
        check_level(level)?;
        Ok(Self {
            level,
            model,
            prior,
            grid,
        })
    }

    /// `n = 100`, level 0.05, default grid, with the given prior.
    pub fn standard(prior: BetaPrior) -> Self {
        Self {
            level: 0.05,
            model: BinomialModel::new(100).expect("n = 100"),
            prior,
            grid: ParameterGrid::default(),
        }
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn model(&self) -> &BinomialModel {
        &self.model
    }

    pub fn prior(&self) -> &BetaPrior {
        &self.prior
    }

    pub fn grid(&self) -> &ParameterGrid {
        &self.grid
    }

    pub fn with_level(&self, level: f64) -> Result<Self> {
        Self::new(level, self.model, self.prior, self.grid.clone())
    }

    pub fn with_prior(&self, prior: BetaPrior) -> Self {
        Self {
            prior,
            ..self.clone()
        }
    }
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!(
            "test level must lie in (0, 1), got {level}"
        )));
    }
    Ok(())
}

/// `1 - coverage <= level`, evaluated the same way as the type I error.
pub(crate) fn meets_level(coverage: f64, level: f64) -> bool {
    1.0 - coverage <= level
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRow {
    pub eta: f64,
    pub included: Vec<bool>,
    /// Posterior density of the last admitted tie-group.
    pub threshold: f64,
    pub achieved_coverage: f64,
}

impl DecisionRow {
    pub fn included_outcomes(&self) -> impl Iterator<Item = u64> + '_ {
        self.included
            .iter()
            .enumerate()
            .filter(|(_, &inc)| inc)
            .map(|(x, _)| x as u64)
    }
}

/// Outcomes ranked by decreasing `ln g`, split into tie-groups.
pub(crate) fn tie_groups(ln_scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..ln_scores.len()).collect();
    order.sort_by(|&i, &j| ln_scores[j].total_cmp(&ln_scores[i]).then(i.cmp(&j)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut leader = f64::NAN;
    for idx in order {
        let s = ln_scores[idx];
        // |g1 - g2| <= tol * max(g1, g2) in log form
        let tied = match groups.last() {
            Some(_) if s == leader => true,
            Some(_) => (leader - s) <= -(-TIE_RELATIVE_TOLERANCE).ln_1p(),
            None => false,
        };
        if tied {
            groups.last_mut().unwrap().push(idx);
        } else {
            leader = s;
            groups.push(vec![idx]);
        }
    }
    groups
}

/// Greedy admission in tie-group order until `coverage >= 1 - level`.
/// `mass[x]` is `f_eta(x)`; returns inclusion flags, the index of the last
/// admitted group (if any) and the coverage summed in outcome order.
pub(crate) fn admit_groups(
    groups: &[Vec<usize>],
    mass: &[f64],
    level: f64,
) -> (Vec<bool>, Option<usize>, f64) {
    let mut included = vec![false; mass.len()];
    let mut last = None;
    let mut running = 0.0;
    let exact = |inc: &[bool]| -> f64 {
        inc.iter()
            .zip(mass)
            .filter(|(&i, _)| i)
            .map(|(_, &m)| m)
            .sum()
    };
    let mut next = 0;
    while next < groups.len() {
        if meets_level(running, level) {
            // re-check with the canonical summation order before stopping
            let canonical = exact(&included);
            if meets_level(canonical, level) {
                return (included, last, canonical);
            }
            running = canonical;
        }
        for &x in &groups[next] {
            included[x] = true;
            running += mass[x];
        }
        last = Some(next);
        next += 1;
    }
    let canonical = exact(&included);
    (included, last, canonical)
}

/// Builds the optimal decision row for null `eta`.
pub fn build_decision_row(eta: f64, config: &TestConfig) -> Result<DecisionRow> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain(format!("eta must lie in (0, 1), got {eta}")));
    }
    let ln_choose = config.model.ln_choose_table();
    let ln_mix: Vec<f64> = config
        .model
        .outcomes()
        .map(|x| ln_beta_binom(x, &config.model, &config.prior))
        .collect();
    Ok(row_with_tables(eta, config, &ln_choose, &ln_mix))
}

fn row_with_tables(
    eta: f64,
    config: &TestConfig,
    ln_choose: &[f64],
    ln_mix: &[f64],
) -> DecisionRow {
    let model = &config.model;
    let ln_f: Vec<f64> = model
        .outcomes()
        .map(|x| model.ln_pmf_with(ln_choose[x as usize], x, eta))
        .collect();
    let ln_g: Vec<f64> = ln_f.iter().zip(ln_mix).map(|(f, m)| f - m).collect();
    let mass: Vec<f64> = ln_f.iter().map(|v| v.exp()).collect();
    let groups = tie_groups(&ln_g);
    let (included, last, achieved_coverage) = admit_groups(&groups, &mass, config.level);
    let threshold = match last {
        Some(gi) => groups[gi]
            .iter()
            .map(|&x| ln_g[x])
            .fold(f64::INFINITY, f64::min)
            .exp(),
        None => f64::INFINITY,
    };
    DecisionRow {
        eta,
        included,
        threshold,
        achieved_coverage,
    }
}

/// The decision function `d(eta, x)` over grid nulls and all outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMatrix {
    config: TestConfig,
    rows: Vec<DecisionRow>,
}

/// Builds one row per grid point, in parallel, assembled in grid order.
pub fn build_decision_matrix(config: &TestConfig) -> DecisionMatrix {
    let ln_choose = config.model.ln_choose_table();
    let ln_mix: Vec<f64> = config
        .model
        .outcomes()
        .map(|x| ln_beta_binom(x, &config.model, &config.prior))
        .collect();
    let rows = config
        .grid
        .points()
        .par_iter()
        .map(|&eta| row_with_tables(eta, config, &ln_choose, &ln_mix))
        .collect();
    DecisionMatrix {
        config: config.clone(),
        rows,
    }
}

impl DecisionMatrix {
    /// Assembles a matrix from externally supplied rows (e.g. parsed from CSV).
    pub fn from_rows(config: TestConfig, rows: Vec<DecisionRow>) -> Result<Self> {
        if rows.len() != config.grid.len() {
            return Err(Error::config(format!(
                "expected {} rows, got {}",
                config.grid.len(),
                rows.len()
            )));
        }
        let width = config.model.support_len();
        if let Some(bad) = rows.iter().find(|r| r.included.len() != width) {
            return Err(Error::config(format!(
                "row at eta={} has {} outcomes, expected {width}",
                bad.eta,
                bad.included.len()
            )));
        }
        Ok(Self { config, rows })
    }

    /// Every null accepts every outcome.
    pub fn full_acceptance(config: &TestConfig) -> Self {
        let width = config.model.support_len();
        let rows = config
            .grid
            .points()
            .iter()
            .map(|&eta| DecisionRow {
                eta,
                included: vec![true; width],
                threshold: 0.0,
                achieved_coverage: 1.0,
            })
            .collect();
        Self {
            config: config.clone(),
            rows,
        }
    }

    pub fn config(&self) -> &TestConfig {
        &self.config
    }

    pub fn rows(&self) -> &[DecisionRow] {
        &self.rows
    }

    pub fn row(&self, eta_index: usize) -> Result<&DecisionRow> {
        self.config.grid.check_index(eta_index)?;
        Ok(&self.rows[eta_index])
    }

    pub fn includes(&self, eta_index: usize, x: u64) -> bool {
        self.rows[eta_index].included[x as usize]
    }

    /// `gamma_d(theta, eta)`: probability under `theta` that null `eta` is kept.
    pub fn coverage(&self, theta: f64, eta_index: usize) -> Result<f64> {
        let row = self.row(eta_index)?;
        let pmf = self.config.model.pmf_vector(theta)?;
        Ok(covered_mass(&row.included, &pmf))
    }

    pub fn type1_error(&self, eta_index: usize) -> Result<f64> {
        let eta = self.row(eta_index)?.eta;
        Ok(1.0 - self.coverage(eta, eta_index)?)
    }

    pub fn confidence_region(&self, x_observed: u64) -> Result<ConfidenceRegion> {
        self.config.model.check_outcome(x_observed)?;
        let indices: Vec<usize> = (0..self.rows.len())
            .filter(|&i| self.includes(i, x_observed))
            .collect();
        Ok(ConfidenceRegion::from_indices(
            x_observed,
            &indices,
            self.config.grid.points(),
        ))
    }

    /// Long-form CSV: `eta,x,included,threshold`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "eta,x,included,threshold")?;
        for row in &self.rows {
            let threshold = format_sig(row.threshold, 12);
            for (x, &inc) in row.included.iter().enumerate() {
                writeln!(out, "{:.6},{},{},{}", row.eta, x, u8::from(inc), threshold)?;
            }
        }
        Ok(())
    }

    /// Per-row summary: `eta,threshold,achieved_coverage`.
    pub fn write_row_summary<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "eta,threshold,achieved_coverage")?;
        for row in &self.rows {
            writeln!(
                out,
                "{:.6},{},{}",
                row.eta,
                format_sig(row.threshold, 12),
                format_sig(row.achieved_coverage, 12)
            )?;
        }
        Ok(())
    }

    /// Parses a long-form decision CSV written by [`write_csv`](Self::write_csv).
    ///
    /// Grid values are taken from `config`; each printed `eta` must agree with
    /// its grid point to the printed precision. Coverages are recomputed exactly.
    pub fn read_csv<R: BufRead>(config: &TestConfig, input: R) -> Result<Self> {
        let grid = config.grid.points();
        let width = config.model.support_len();
        let mut rows: Vec<DecisionRow> = grid
            .iter()
            .map(|&eta| DecisionRow {
                eta,
                included: vec![false; width],
                threshold: f64::NAN,
                achieved_coverage: 0.0,
            })
            .collect();
        let mut seen = vec![false; grid.len() * width];
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim_end() != "eta,x,included,threshold" {
            return Err(Error::Parse("missing decision CSV header".into()));
        }
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse(format!(
                    "line {}: expected 4 fields",
                    lineno + 2
                )));
            }
            let eta: f64 = parse_field(fields[0], "eta")?;
            let x: usize = parse_field(fields[1], "x")?;
            let included = match fields[2] {
                "1" => true,
                "0" => false,
                other => return Err(Error::Parse(format!("bad inclusion flag `{other}`"))),
            };
            let threshold: f64 = parse_field(fields[3], "threshold")?;
            let i = config.grid.nearest_index(eta);
            if (grid[i] - eta).abs() > 5.1e-7 || x >= width {
                return Err(Error::Parse(format!(
                    "line {}: ({eta}, {x}) is not a grid cell",
                    lineno + 2
                )));
            }
            let cell = i * width + x;
            if seen[cell] {
                return Err(Error::Parse(format!("duplicate cell ({eta}, {x})")));
            }
            seen[cell] = true;
            rows[i].included[x] = included;
            rows[i].threshold = threshold;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Parse(
                "decision CSV does not cover every cell".into(),
            ));
        }
        for row in &mut rows {
            let pmf = config.model.pmf_vector(row.eta)?;
            row.achieved_coverage = covered_mass(&row.included, &pmf);
        }
        Self::from_rows(config.clone(), rows)
    }
}

pub(crate) fn covered_mass(included: &[bool], pmf: &[f64]) -> f64 {
    included
        .iter()
        .zip(pmf)
        .filter(|(&inc, _)| inc)
        .map(|(_, &p)| p)
        .sum()
}

/// Grid nulls accepted for one observed outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceRegion {
    pub x_observed: u64,
    pub accepted: Vec<f64>,
    pub accepted_indices: Vec<usize>,
    /// True iff the region is nonempty and has no gaps on the grid.
    pub contiguous: bool,
}

impl ConfidenceRegion {
    pub(crate) fn from_indices(x_observed: u64, indices: &[usize], grid: &[f64]) -> Self {
        let contiguous = match (indices.first(), indices.last()) {
            (Some(&lo), Some(&hi)) => hi - lo + 1 == indices.len(),
            _ => false,
        };
        Self {
            x_observed,
            accepted: indices.iter().map(|&i| grid[i]).collect(),
            accepted_indices: indices.to_vec(),
            contiguous,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn lower(&self) -> Option<f64> {
        self.accepted.first().copied()
    }

    pub fn upper(&self) -> Option<f64> {
        self.accepted.last().copied()
    }

    /// `upper - lower` on the grid; zero for an empty region.
    pub fn length(&self) -> f64 {
        match (self.lower(), self.upper()) {
            (Some(l), Some(u)) => u - l,
            _ => 0.0,
        }
    }

    /// Every point of `self` is accepted by `other`, and `other` has more.
    pub fn is_strict_subset_of(&self, other: &ConfidenceRegion) -> bool {
        self.accepted_indices.len() < other.accepted_indices.len()
            && self
                .accepted_indices
                .iter()
                .all(|i| other.accepted_indices.binary_search(i).is_ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{binom_pmf, posterior_density};

    fn config(n: u64, a: f64, b: f64, level: f64) -> TestConfig {
        TestConfig::new(
            level,
            BinomialModel::new(n).unwrap(),
            BetaPrior::new(a, b).unwrap(),
            ParameterGrid::default(),
        )
        .unwrap()
    }

    #[test]
    fn two_trial_flat_prior_row() {
        // g(0.5, x) = 3 * f(x): x=1 -> 1.5 alone (mass 0.5), then {0, 2} at 0.75.
        let cfg = config(2, 1.0, 1.0, 0.05);
        let row = build_decision_row(0.5, &cfg).unwrap();
        assert_eq!(row.included, vec![true, true, true]);
        assert!((row.threshold - 0.75).abs() < 1e-12);
        assert!((row.achieved_coverage - 1.0).abs() < 1e-15);
        let groups = tie_groups(
            &(0..=2u64)
                .map(|x| {
                    posterior_density(0.5, x, cfg.model(), cfg.prior())
                        .unwrap()
                        .ln()
                })
                .collect::<Vec<_>>(),
        );
        assert_eq!(groups, vec![vec![1], vec![0, 2]]);
    }

    #[test]
    fn tiny_coverage_demand_admits_single_group() {
        let cfg = config(100, 0.5, 0.5, 0.999_999);
        let row = build_decision_row(0.3, &cfg).unwrap();
        assert_eq!(row.included_outcomes().count(), 1);
        let x = row.included_outcomes().next().unwrap();
        let g_max = (0..=100)
            .map(|x| posterior_density(0.3, x, cfg.model(), cfg.prior()).unwrap())
            .fold(0.0, f64::max);
        assert!(
            (posterior_density(0.3, x, cfg.model(), cfg.prior()).unwrap() - g_max).abs()
                < 1e-12 * g_max
        );
    }

    #[test]
    fn central_row_is_block_with_bounded_overshoot() {
        let cfg = config(100, 0.5, 0.5, 0.05);
        let row = build_decision_row(0.5, &cfg).unwrap();
        let inc: Vec<u64> = row.included_outcomes().collect();
        let (lo, hi) = (inc[0], *inc.last().unwrap());
        assert_eq!(inc.len() as u64, hi - lo + 1);
        assert_eq!(lo + hi, 100);
        assert!(row.achieved_coverage >= 0.95);
        // last tie-group is {lo, hi}
        let last_mass =
            binom_pmf(lo, cfg.model(), 0.5).unwrap() + binom_pmf(hi, cfg.model(), 0.5).unwrap();
        assert!(row.achieved_coverage <= 0.95 + last_mass);
        // independent re-sort and prefix sum
        let mut scored: Vec<(f64, u64)> = (0..=100)
            .map(|x| {
                (
                    posterior_density(0.5, x, cfg.model(), cfg.prior()).unwrap(),
                    x,
                )
            })
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut cum = 0.0;
        let mut k = 0;
        while cum < 0.95 {
            cum += binom_pmf(scored[k].1, cfg.model(), 0.5).unwrap();
            k += 1;
        }
        // the greedy prefix ends mid-pair or on a pair boundary; the row holds the whole pair
        assert!(inc.len() == k || inc.len() == k + 1);
    }

    #[test]
    fn rejects_eta_outside_open_interval() {
        let cfg = config(10, 1.0, 1.0, 0.05);
        assert!(build_decision_row(0.0, &cfg).is_err());
        assert!(build_decision_row(1.0, &cfg).is_err());
    }

    #[test]
    fn matrix_queries_validate_indices() {
        let cfg = config(10, 0.5, 0.5, 0.05);
        let m = build_decision_matrix(&cfg);
        assert_eq!(m.rows().len(), 499);
        assert!(m.coverage(0.5, 499).is_err());
        assert!(m.type1_error(10_000).is_err());
        assert!(m.confidence_region(11).is_err());
    }

    #[test]
    fn full_acceptance_matrix() {
        let cfg = config(20, 0.5, 0.5, 0.05);
        let m = DecisionMatrix::full_acceptance(&cfg);
        for i in [0, 100, 498] {
            assert!((m.coverage(0.37, i).unwrap() - 1.0).abs() < 1e-12);
            assert!(m.type1_error(i).unwrap().abs() < 1e-12);
        }
        let r = m.confidence_region(7).unwrap();
        assert_eq!(r.accepted.len(), 499);
        assert!(r.contiguous);
        assert!((r.length() - 0.996).abs() < 1e-12);
    }

    #[test]
    fn empty_region_is_representable() {
        let cfg = config(4, 1.0, 1.0, 0.05);
        let rows = cfg
            .grid()
            .points()
            .iter()
            .map(|&eta| DecisionRow {
                eta,
                included: vec![true, true, true, true, false],
                threshold: 1.0,
                achieved_coverage: 0.0,
            })
            .collect();
        let m = DecisionMatrix::from_rows(cfg, rows).unwrap();
        let r = m.confidence_region(4).unwrap();
        assert!(r.is_empty());
        assert!(!r.contiguous);
        assert_eq!(r.lower(), None);
        assert_eq!(r.length(), 0.0);
    }

    #[test]
    fn csv_roundtrip_small() {
        let cfg = TestConfig::new(
            0.1,
            BinomialModel::new(6).unwrap(),
            BetaPrior::new(2.0, 3.0).unwrap(),
            ParameterGrid::uniform(17, 0.05, 0.95).unwrap(),
        )
        .unwrap();
        let m = build_decision_matrix(&cfg);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("eta,x,included,threshold\n0.050000,0,"));
        assert_eq!(text.lines().count(), 1 + 17 * 7);
        let back = DecisionMatrix::read_csv(&cfg, &buf[..]).unwrap();
        for (a, b) in m.rows().iter().zip(back.rows()) {
            assert_eq!(a.included, b.included);
            assert_eq!(a.eta, b.eta);
            assert_eq!(a.achieved_coverage, b.achieved_coverage);
            assert!((a.threshold - b.threshold).abs() <= 1e-11 * a.threshold);
        }
        assert!(DecisionMatrix::read_csv(&cfg, &b"eta,x\n"[..]).is_err());
    }
}
