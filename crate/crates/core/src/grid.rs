use crate::error::{Error, Result};

/// Equally spaced evaluation points for null hypotheses and data-generating
/// parameters, with normalized cell weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
    step: f64,
}

impl ParameterGrid {
    pub const DEFAULT_COUNT: usize = 499;
    pub const DEFAULT_MIN: f64 = 0.002;
    pub const DEFAULT_MAX: f64 = 0.998;

    /// `count` points from `min` to `max` inclusive, `0 < min < max < 1`.
    pub fn uniform(count: usize, min: f64, max: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::config(format!(
                "grid needs at least 2 points, got {count}"
            )));
        }
        if !(min > 0.0 && max < 1.0 && min < max) {
            return Err(Error::config(format!(
                "grid bounds must satisfy 0 < min < max < 1, got [{min}, {max}]"
            )));
        }
        let step = (max - min) / (count - 1) as f64;
        let mut points: Vec<f64> = (0..count).map(|i| min + step * i as f64).collect();
        points[count - 1] = max;
        let weights = vec![1.0 / count as f64; count];
        Ok(Self {
            points,
            weights,
            step,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Cell weights, summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Spacing between neighbouring points (the piecewise-constant cell width).
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.points.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.points.len(),
            });
        }
        Ok(())
    }

    /// Index of the grid point closest to `value`.
    pub fn nearest_index(&self, value: f64) -> usize {
        let raw = ((value - self.min()) / self.step).round();
        raw.clamp(0.0, (self.len() - 1) as f64) as usize
    }
}

impl Default for ParameterGrid {
    fn default() -> Self {
        Self::uniform(Self::DEFAULT_COUNT, Self::DEFAULT_MIN, Self::DEFAULT_MAX)
            .expect("default grid is valid")
    }
}
