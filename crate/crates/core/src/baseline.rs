//! Symmetric Clopper-Pearson intervals, obtained by bisection on exact
//! binomial tail sums.

use std::io::Write;

use crate::decision::{check_level, DecisionMatrix};
use crate::error::Result;
use crate::special::BinomialModel;
use crate::util::format_sig;

const BISECTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpInterval {
    pub x: u64,
    pub lower: f64,
    pub upper: f64,
}

impl CpInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.lower <= theta && theta <= self.upper
    }
}

/// `P(X >= x | theta)`.
fn upper_tail(x: u64, model: &BinomialModel, theta: f64) -> f64 {
    let table = model.ln_choose_table();
    (x..=model.trials())
        .map(|k| model.ln_pmf_with(table[k as usize], k, theta).exp())
        .sum::<f64>()
        .min(1.0)
}

/// `P(X <= x | theta)`.
fn lower_tail(x: u64, model: &BinomialModel, theta: f64) -> f64 {
    let table = model.ln_choose_table();
    (0..=x)
        .map(|k| model.ln_pmf_with(table[k as usize], k, theta).exp())
        .sum::<f64>()
        .min(1.0)
}

/// Root of an increasing function on `[0, 1]` crossing `target`.
fn bisect_increasing(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two one-sided tests at `level / 2` each.
pub fn clopper_pearson(x: u64, model: &BinomialModel, level: f64) -> Result<CpInterval> {
    model.check_outcome(x)?;
    check_level(level)?;
    let half = 0.5 * level;
    let lower = if x == 0 {
        0.0
    } else {
        bisect_increasing(|t| upper_tail(x, model, t), half)
    };
    let upper = if x == model.trials() {
        1.0
    } else {
        // lower tail decreases in theta
        bisect_increasing(|t| 1.0 - lower_tail(x, model, t), 1.0 - half)
    };
    Ok(CpInterval { x, lower, upper })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthComparisonRow {
    pub x: u64,
    pub cp: CpInterval,
    pub proposed_lower: Option<f64>,
    pub proposed_upper: Option<f64>,
    pub proposed_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthComparison {
    pub rows: Vec<LengthComparisonRow>,
    pub mean_cp_length: f64,
    /// Mean of `upper - lower` over accepted grid points.
    pub mean_proposed_length: f64,
    /// Grid spacing; proposed lengths are resolved only to this step.
    pub grid_step: f64,
}

impl LengthComparison {
    /// Mean proposed length is at most the mean CP length plus one grid step.
    pub fn proposed_within_grid_slack(&self) -> bool {
        self.mean_proposed_length <= self.mean_cp_length + self.grid_step
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,cp_lower,cp_upper,prop_lower,prop_upper")?;
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.x,
                format_sig(r.cp.lower, 12),
                format_sig(r.cp.upper, 12),
                opt(r.proposed_lower),
                opt(r.proposed_upper)
            )?;
        }
        Ok(())
    }
}

/// Per-outcome interval lengths of `matrix` against symmetric CP at `level`.
pub fn compare_lengths(matrix: &DecisionMatrix, level: f64) -> Result<LengthComparison> {
    let model = matrix.config().model();
    let mut rows = Vec::with_capacity(model.support_len());
    for x in model.outcomes() {
        let cp = clopper_pearson(x, model, level)?;
        let region = matrix.confidence_region(x)?;
        rows.push(LengthComparisonRow {
            x,
            cp,
            proposed_lower: region.lower(),
            proposed_upper: region.upper(),
            proposed_length: region.length(),
        });
    }
    let count = rows.len() as f64;
    Ok(LengthComparison {
        mean_cp_length: rows.iter().map(|r| r.cp.length()).sum::<f64>() / count,
        mean_proposed_length: rows.iter().map(|r| r.proposed_length).sum::<f64>() / count,
        grid_step: matrix.config().grid().step(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_conventions() {
        let m = BinomialModel::new(100).unwrap();
        assert_eq!(clopper_pearson(0, &m, 0.05).unwrap().lower, 0.0);
        assert_eq!(clopper_pearson(100, &m, 0.05).unwrap().upper, 1.0);
        assert!(clopper_pearson(101, &m, 0.05).is_err());
        assert!(clopper_pearson(3, &m, 1.0).is_err());
    }

    #[test]
    fn zero_successes_upper_has_closed_form() {
        // P(X <= 0 | t) = (1 - t)^n = level / 2
        let m = BinomialModel::new(100).unwrap();
        let cp = clopper_pearson(0, &m, 0.05).unwrap();
        let expected = 1.0 - 0.025f64.powf(1.0 / 100.0);
        assert!((cp.upper - expected).abs() < 1e-10);
    }

    #[test]
    fn reflection_symmetry() {
        let m = BinomialModel::new(37).unwrap();
        for x in 0..=37 {
            let a = clopper_pearson(x, &m, 0.1).unwrap();
            let b = clopper_pearson(37 - x, &m, 0.1).unwrap();
            assert!((a.lower - (1.0 - b.upper)).abs() < 1e-10);
            assert!((a.upper - (1.0 - b.lower)).abs() < 1e-10);
        }
    }
}
