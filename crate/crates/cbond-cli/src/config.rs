//! Run configuration: a flat, human-editable JSON document.

use cbond::bond::CouponBondSpec;
use cbond::math::pwc::PiecewiseConstant;
use cbond::term_structure::{OneFactorMarket, VasicekMarket};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    OneFactor,
    TwoFactor,
}

/// Firm volatility: a constant, or piecewise-constant on breakpoints.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FirmVol {
    Constant(f64),
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,

    // Bond contract.
    pub face: f64,
    pub coupon_times: Vec<f64>,
    pub coupon_amounts: Vec<f64>,
    pub recovery: f64,
    pub intensities: Vec<f64>,
    #[serde(default)]
    pub tax_rate: Option<f64>,

    // Market: constant-rate fields.
    #[serde(default)]
    pub r: Option<f64>,
    // Market: Vasicek fields.
    #[serde(default)]
    pub a1: Option<f64>,
    #[serde(default)]
    pub a2: Option<f64>,
    #[serde(default)]
    pub rate_vol: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub r0: Option<f64>,
    // Shared market fields.
    pub dividend: f64,
    #[serde(default)]
    pub firm_vol: Option<FirmVol>,

    // Valuation.
    pub v0: f64,
    #[serde(default)]
    pub t: f64,

    // Monte Carlo settings (overridable from the command line).
    #[serde(default)]
    pub mc_paths: Option<usize>,
    #[serde(default)]
    pub mc_seed: Option<u64>,
    #[serde(default)]
    pub mc_antithetic: Option<bool>,

    /// Quantity groups for `run`: any of "barriers", "price", "duration",
    /// "tax", "mc". Defaults to everything applicable.
    #[serde(default)]
    pub outputs: Option<Vec<String>>,
}

impl RunConfig {
    pub fn load(path: &str) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {path}: {e}")))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {path}: {e}")))
    }

    pub fn bond_spec(&self) -> Result<CouponBondSpec, CliError> {
        let mut spec = CouponBondSpec::new(
            self.face,
            self.coupon_times.clone(),
            self.coupon_amounts.clone(),
            self.recovery,
            self.intensities.clone(),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(tax) = self.tax_rate {
            spec = spec
                .with_tax(tax)
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(spec)
    }

    fn firm_vol(&self) -> Result<PiecewiseConstant, CliError> {
        match &self.firm_vol {
            None => Err(CliError::Config("missing field `firm_vol`".into())),
            Some(FirmVol::Constant(v)) => Ok(PiecewiseConstant::constant(*v)),
            Some(FirmVol::Piecewise {
                breakpoints,
                values,
            }) => PiecewiseConstant::new(breakpoints.clone(), values.clone())
                .map_err(|e| CliError::Config(e.to_string())),
        }
    }

    pub fn one_factor_market(&self) -> Result<OneFactorMarket, CliError> {
        let rate = self
            .r
            .ok_or_else(|| CliError::Config("missing field `r`".into()))?;
        let vol = match self.firm_vol()? {
            v if v
                .breakpoints_within(f64::NEG_INFINITY, f64::INFINITY)
                .is_empty() =>
            {
                v.value_at(0.0)
            }
            _ => {
                return Err(CliError::Config(
                    "field `firm_vol` must be a constant under the one_factor model".into(),
                ))
            }
        };
        OneFactorMarket::new(rate, self.dividend, vol).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn vasicek_market(&self) -> Result<VasicekMarket, CliError> {
        let a1 = self
            .a1
            .ok_or_else(|| CliError::Config("missing field `a1`".into()))?;
        let a2 = self
            .a2
            .ok_or_else(|| CliError::Config("missing field `a2`".into()))?;
        let rate_vol = self
            .rate_vol
            .ok_or_else(|| CliError::Config("missing field `rate_vol`".into()))?;
        let rho = self
            .rho
            .ok_or_else(|| CliError::Config("missing field `rho`".into()))?;
        VasicekMarket::new(a1, a2, rate_vol, rho, self.firm_vol()?, self.dividend)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn r0(&self) -> Result<f64, CliError> {
        self.r0
            .ok_or_else(|| CliError::Config("missing field `r0`".into()))
    }

    pub fn wants(&self, group: &str) -> bool {
        match &self.outputs {
            None => true,
            Some(list) => list.iter().any(|g| g == group),
        }
    }
}
