//! Piecewise-constant functions of time on a breakpoint grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous piecewise-constant function: `values[k]` applies on
/// `[breakpoints[k-1], breakpoints[k])` with the conventions that the first
/// segment starts at -inf and the last extends to +inf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::domain(
                "piecewise-constant: values must have one more entry than breakpoints",
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain(
                "piecewise-constant: breakpoints must be strictly ascending",
            ));
        }
        Ok(PiecewiseConstant {
            breakpoints,
            values,
        })
    }

    pub fn constant(v: f64) -> Self {
        PiecewiseConstant {
            breakpoints: vec![],
            values: vec![v],
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        self.values[k]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Breakpoints strictly inside (t1, t2), used to split integrals at
    /// segment boundaries.
    pub fn breakpoints_within(&self, t1: f64, t2: f64) -> Vec<f64> {
        self.breakpoints
            .iter()
            .cloned()
            .filter(|&b| b > t1 && b < t2)
            .collect()
    }
}
