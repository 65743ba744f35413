//! Quadrature weights for integrating over the parameter grid against a
//! beta measure.

use crate::grid::ParameterGrid;
use crate::registry::Registry;
use crate::special::BetaPrior;

pub trait GridWeighting: Send + Sync {
    fn name(&self) -> &'static str;

    /// One weight per grid point for integrating against `prior`.
    fn weights(&self, grid: &ParameterGrid, prior: &BetaPrior) -> Vec<f64>;
}

/// Density times cell width, `beta_pdf(eta_i) * step`, with no
/// renormalization. Prior mass outside the grid cells (the Beta(0.5, 0.5)
/// endpoint spikes) is simply not counted.
#[derive(Debug, Clone, Copy, Default)]
pub struct PiecewiseConstant;

/// Piecewise-constant weights rescaled to sum to one.
#[derive(Debug, Clone, Copy, Default)]
pub struct Renormalized;

fn density_times_width(grid: &ParameterGrid, prior: &BetaPrior) -> Vec<f64> {
    grid.points()
        .iter()
        .map(|&eta| prior.ln_pdf(eta).exp() * grid.step())
        .collect()
}

impl GridWeighting for PiecewiseConstant {
    fn name(&self) -> &'static str {
        "piecewise-constant"
    }

    fn weights(&self, grid: &ParameterGrid, prior: &BetaPrior) -> Vec<f64> {
        density_times_width(grid, prior)
    }
}

impl GridWeighting for Renormalized {
    fn name(&self) -> &'static str {
        "renormalized"
    }

    fn weights(&self, grid: &ParameterGrid, prior: &BetaPrior) -> Vec<f64> {
        let mut w = density_times_width(grid, prior);
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }
}

pub const DEFAULT_WEIGHTING: &str = "piecewise-constant";

/// All built-in weightings, keyed by name.
pub fn weightings() -> Registry<dyn GridWeighting> {
    let mut reg: Registry<dyn GridWeighting> = Registry::new("weighting");
    reg.register(PiecewiseConstant.name(), Box::new(PiecewiseConstant));
    reg.register(Renormalized.name(), Box::new(Renormalized));
    reg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renormalized_sums_to_one() {
        let g = ParameterGrid::default();
        for prior in [BetaPrior::non_informative(), BetaPrior::informative()] {
            let w = Renormalized.weights(&g, &prior);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn piecewise_constant_misses_endpoint_mass() {
        let g = ParameterGrid::default();
        let informative: f64 = PiecewiseConstant
            .weights(&g, &BetaPrior::informative())
            .iter()
            .sum();
        assert!((informative - 1.0).abs() < 1e-9);
        let jeffreys: f64 = PiecewiseConstant
            .weights(&g, &BetaPrior::non_informative())
            .iter()
            .sum();
        assert!(jeffreys < 0.97 && jeffreys > 0.9, "{jeffreys}");
    }

    #[test]
    fn registry_lookup() {
        let reg = weightings();
        assert_eq!(reg.get("renormalized").unwrap().name(), "renormalized");
        assert!(reg.get("simpson").is_err());
        assert_eq!(reg.names(), vec!["piecewise-constant", "renormalized"]);
    }
}
