//! Power of a decision matrix and its averages over data-generating
//! parameters and null hypotheses.

use std::io::Write;

use rayon::prelude::*;

use crate::decision::{covered_mass, DecisionMatrix};
use crate::error::{Error, Result};
use crate::special::{beta_binom_vector, BetaPrior};
use crate::util::format_sig;
use crate::weighting::GridWeighting;

/// `G(theta, eta, d) = 1 - gamma_d(theta, eta)`.
pub fn power(matrix: &DecisionMatrix, theta: f64, eta_index: usize) -> Result<f64> {
    Ok(1.0 - matrix.coverage(theta, eta_index)?)
}

/// Power against every grid null for one data-generating `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    pub theta: f64,
    pub etas: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn power_curve(matrix: &DecisionMatrix, theta: f64) -> Result<PowerCurve> {
    let pmf = matrix.config().model().pmf_vector(theta)?;
    let values = matrix
        .rows()
        .iter()
        .map(|row| 1.0 - covered_mass(&row.included, &pmf))
        .collect();
    Ok(PowerCurve {
        theta,
        etas: matrix.config().grid().points().to_vec(),
        values,
    })
}

/// Average over nulls of the power at `theta`, weighted by the matrix's
/// construction prior.
pub fn avg_power_given_theta(
    matrix: &DecisionMatrix,
    theta: f64,
    weighting: &dyn GridWeighting,
) -> Result<f64> {
    let curve = power_curve(matrix, theta)?;
    let w = weighting.weights(matrix.config().grid(), matrix.config().prior());
    Ok(dot(&w, &curve.values))
}

/// Power against the prior mixture, `1 - sum_x d(eta, x) P_mix(x)`, using
/// the beta-binomial closed form for the construction prior.
pub fn mixed_power_given_eta(matrix: &DecisionMatrix, eta_index: usize) -> Result<f64> {
    mixed_power_under(matrix, eta_index, matrix.config().prior())
}

/// Closed-form mixed power where the data-generating mixture uses `prior`.
pub fn mixed_power_under(
    matrix: &DecisionMatrix,
    eta_index: usize,
    prior: &BetaPrior,
) -> Result<f64> {
    let row = matrix.row(eta_index)?;
    let mix = beta_binom_vector(matrix.config().model(), prior);
    Ok(1.0 - covered_mass(&row.included, &mix))
}

/// `cov[i][j] = gamma_d(theta_j, eta_i)` over the grid in both coordinates.
pub fn coverage_table(matrix: &DecisionMatrix) -> Vec<Vec<f64>> {
    let model = matrix.config().model();
    let pmfs: Vec<Vec<f64>> = matrix
        .config()
        .grid()
        .points()
        .iter()
        .map(|&theta| {
            model
                .pmf_vector(theta)
                .expect("grid points are probabilities")
        })
        .collect();
    matrix
        .rows()
        .par_iter()
        .map(|row| {
            pmfs.iter()
                .map(|pmf| covered_mass(&row.included, pmf))
                .collect()
        })
        .collect()
}

/// Grid-integrated powers under one averaging prior.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragePowerReport {
    pub thetas: Vec<f64>,
    /// Average over nulls for each grid `theta`.
    pub per_theta: Vec<f64>,
    /// Average over data-generating `theta` for each grid null, by grid quadrature.
    pub per_eta: Vec<f64>,
    /// Weighted sum of `per_theta`.
    pub overall: f64,
    /// Weighted sum of `per_eta`; equal to `overall` up to rounding.
    pub overall_via_eta: f64,
}

/// Integrates `G(theta, eta, d)` over the grid in both coordinates with the
/// weights `weighting` assigns to `averaging_prior`.
pub fn average_power_report(
    matrix: &DecisionMatrix,
    averaging_prior: &BetaPrior,
    weighting: &dyn GridWeighting,
) -> AveragePowerReport {
    let grid = matrix.config().grid();
    let w = weighting.weights(grid, averaging_prior);
    let cov = coverage_table(matrix);
    let m = grid.len();
    // power[i][j] = 1 - cov[i][j]; i indexes nulls, j data-generating parameters
    let per_eta: Vec<f64> = cov
        .iter()
        .map(|row| row.iter().zip(&w).map(|(c, wj)| wj * (1.0 - c)).sum())
        .collect();
    let per_theta: Vec<f64> = (0..m)
        .map(|j| (0..m).map(|i| w[i] * (1.0 - cov[i][j])).sum())
        .collect();
    AveragePowerReport {
        thetas: grid.points().to_vec(),
        overall: dot(&w, &per_theta),
        overall_via_eta: dot(&w, &per_eta),
        per_theta,
        per_eta,
    }
}

/// Average power over nulls and data-generating parameters both drawn from
/// `averaging_prior`, which may differ from the construction prior.
pub fn overall_avg_power(
    matrix: &DecisionMatrix,
    averaging_prior: &BetaPrior,
    weighting: &dyn GridWeighting,
) -> f64 {
    average_power_report(matrix, averaging_prior, weighting).overall
}

/// Same target as [`overall_avg_power`] but integrating over data-generating
/// parameters exactly through the beta-binomial mixture; only the null
/// average uses grid weights.
pub fn overall_avg_power_closed_form(
    matrix: &DecisionMatrix,
    averaging_prior: &BetaPrior,
    weighting: &dyn GridWeighting,
) -> f64 {
    let w = weighting.weights(matrix.config().grid(), averaging_prior);
    let mix = beta_binom_vector(matrix.config().model(), averaging_prior);
    matrix
        .rows()
        .iter()
        .zip(&w)
        .map(|(row, wi)| wi * (1.0 - covered_mass(&row.included, &mix)))
        .sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Overall average power of two tests under two averaging priors.
/// `cells[r][c]`: averaging prior `r`, test constructed with prior `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1 {
    pub labels: [String; 2],
    pub cells: [[f64; 2]; 2],
}

/// Both matrices must share model, level and grid; each one's construction
/// prior doubles as an averaging prior.
pub fn table1(
    tests: [(&str, &DecisionMatrix); 2],
    weighting: &dyn GridWeighting,
) -> Result<Table1> {
    let (a, b) = (tests[0].1.config(), tests[1].1.config());
    if a.model() != b.model() || a.grid() != b.grid() || a.level() != b.level() {
        return Err(Error::config(
            "table tests must share model, level and grid",
        ));
    }
    let mut cells = [[0.0; 2]; 2];
    for (r, (_, avg_source)) in tests.iter().enumerate() {
        let averaging = *avg_source.config().prior();
        for (c, (_, test)) in tests.iter().enumerate() {
            cells[r][c] = overall_avg_power(test, &averaging, weighting);
        }
    }
    Ok(Table1 {
        labels: [tests[0].0.to_string(), tests[1].0.to_string()],
        cells,
    })
}

impl Table1 {
    /// Rows are averaging distributions, columns are tests.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "hypotheses,{}_test,{}_test",
            self.labels[0], self.labels[1]
        )?;
        for r in 0..2 {
            writeln!(
                out,
                "{},{},{}",
                self.labels[r],
                format_sig(self.cells[r][0], 12),
                format_sig(self.cells[r][1], 12)
            )?;
        }
        Ok(())
    }
}

impl PowerCurve {
    pub fn write_rows<W: Write>(&self, out: &mut W) -> Result<()> {
        for (eta, p) in self.etas.iter().zip(&self.values) {
            writeln!(out, "{:.6},{:.6},{}", self.theta, eta, format_sig(*p, 12))?;
        }
        Ok(())
    }
}
