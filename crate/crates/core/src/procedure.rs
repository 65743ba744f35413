//! Interval procedures selectable by name.

use crate::baseline::clopper_pearson;
use crate::decision::{build_decision_matrix, DecisionMatrix, TestConfig};
use crate::error::Result;
use crate::registry::Registry;

/// An interval reported for one observed outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    /// False when the accepted set has holes; bounds then span the hull.
    pub contiguous: bool,
}

pub trait ConfidenceProcedure: Send + Sync {
    fn name(&self) -> &'static str;

    /// `None` when no parameter value is accepted.
    fn interval(&self, x: u64) -> Result<Option<Interval>>;
}

/// Inverts the maximal-average-power decision matrix.
pub struct AveragePowerProcedure {
    matrix: DecisionMatrix,
}

impl AveragePowerProcedure {
    pub fn new(config: &TestConfig) -> Self {
        Self {
            matrix: build_decision_matrix(config),
        }
    }

    pub fn matrix(&self) -> &DecisionMatrix {
        &self.matrix
    }
}

impl ConfidenceProcedure for AveragePowerProcedure {
    fn name(&self) -> &'static str {
        "average-power"
    }

    fn interval(&self, x: u64) -> Result<Option<Interval>> {
        let region = self.matrix.confidence_region(x)?;
        Ok(region
            .lower()
            .zip(region.upper())
            .map(|(lower, upper)| Interval {
                lower,
                upper,
                contiguous: region.contiguous,
            }))
    }
}

pub struct ClopperPearsonProcedure {
    config: TestConfig,
}

impl ClopperPearsonProcedure {
    pub fn new(config: &TestConfig) -> Self {
        Self {
            config: config.clone(),
        }
    }
}

impl ConfidenceProcedure for ClopperPearsonProcedure {
    fn name(&self) -> &'static str {
        "clopper-pearson"
    }

    fn interval(&self, x: u64) -> Result<Option<Interval>> {
        let cp = clopper_pearson(x, self.config.model(), self.config.level())?;
        Ok(Some(Interval {
            lower: cp.lower,
            upper: cp.upper,
            contiguous: true,
        }))
    }
}

pub type ProcedureFactory = dyn Fn(&TestConfig) -> Box<dyn ConfidenceProcedure> + Send + Sync;

pub const DEFAULT_PROCEDURE: &str = "average-power";

pub fn procedures() -> Registry<ProcedureFactory> {
    let mut reg: Registry<ProcedureFactory> = Registry::new("procedure");
    reg.register(
        "average-power",
        Box::new(|cfg: &TestConfig| {
            Box::new(AveragePowerProcedure::new(cfg)) as Box<dyn ConfidenceProcedure>
        }),
    );
    reg.register(
        "clopper-pearson",
        Box::new(|cfg: &TestConfig| {
            Box::new(ClopperPearsonProcedure::new(cfg)) as Box<dyn ConfidenceProcedure>
        }),
    );
    reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ParameterGrid;
    use crate::special::{BetaPrior, BinomialModel};

    #[test]
    fn registered_procedures_by_name() {
        let reg = procedures();
        assert_eq!(reg.names(), vec!["average-power", "clopper-pearson"]);
        let cfg = TestConfig::new(
            0.05,
            BinomialModel::new(20).unwrap(),
            BetaPrior::non_informative(),
            ParameterGrid::uniform(99, 0.01, 0.99).unwrap(),
        )
        .unwrap();
        for name in reg.names() {
            let proc = reg.get(name).unwrap()(&cfg);
            assert_eq!(proc.name(), name);
            let iv = proc.interval(10).unwrap().unwrap();
            assert!(iv.lower < 0.5 && 0.5 < iv.upper);
            assert!(proc.interval(21).is_err());
        }
        assert!(reg.get("wald").is_err());
    }
}
