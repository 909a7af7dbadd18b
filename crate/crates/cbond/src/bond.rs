//! Bond contract description and shared pricing result types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A defaultable discrete-coupon bond: face value `F` due at `T_N`, coupons
/// `C_1..C_N` at strictly ascending dates `T_1..T_N` (years, `T_0 = 0` by
/// convention), fractional recovery `delta`, piecewise-constant unexpected
/// default intensities `lambda_i` on `(T_i, T_{i+1}]`, and an optional tax
/// rate on coupon income.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouponBondSpec {
    pub face: f64,
    pub coupon_times: Vec<f64>,
    pub coupon_amounts: Vec<f64>,
    pub recovery: f64,
    pub intensities: Vec<f64>,
    #[serde(default)]
    pub tax_rate: Option<f64>,
}

impl CouponBondSpec {
    pub fn new(
        face: f64,
        coupon_times: Vec<f64>,
        coupon_amounts: Vec<f64>,
        recovery: f64,
        intensities: Vec<f64>,
    ) -> Result<Self> {
        let spec = CouponBondSpec {
            face,
            coupon_times,
            coupon_amounts,
            recovery,
            intensities,
            tax_rate: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_tax(mut self, tax_rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&tax_rate) {
            return Err(Error::domain("tax rate must lie in [0, 1)"));
        }
        self.tax_rate = Some(tax_rate);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.coupon_times.len();
        if n == 0 {
            return Err(Error::domain("bond needs at least the maturity date"));
        }
        if self.coupon_amounts.len() != n {
            return Err(Error::domain(
                "coupon amounts and dates must have equal length",
            ));
        }
        if self.intensities.len() != n {
            return Err(Error::domain(
                "need one default intensity per interval (T_i, T_{i+1}]",
            ));
        }
        if self.coupon_times[0] <= 0.0 || self.coupon_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain(
                "coupon dates must be strictly ascending and positive",
            ));
        }
        if self.face < 0.0 || self.coupon_amounts.iter().any(|&c| c < 0.0) {
            return Err(Error::domain("face value and coupons must be nonnegative"));
        }
        if self.intensities.iter().any(|&l| l < 0.0) {
            return Err(Error::domain("default intensities must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.recovery) {
            return Err(Error::domain("recovery fraction must lie in [0, 1]"));
        }
        if let Some(tax) = self.tax_rate {
            if !(0.0..1.0).contains(&tax) {
                return Err(Error::domain("tax rate must lie in [0, 1)"));
            }
        }
        Ok(())
    }

    /// Number of payment dates `N`.
    pub fn count(&self) -> usize {
        self.coupon_times.len()
    }

    /// Payment date `T_{k+1}` for 0-based index `k`.
    pub fn time(&self, k: usize) -> f64 {
        self.coupon_times[k]
    }

    pub fn maturity(&self) -> f64 {
        *self.coupon_times.last().unwrap()
    }

    /// Interval start `T_i` for interval index `i` (with `T_0 = 0`).
    pub fn interval_start(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.coupon_times[i - 1]
        }
    }

    /// Index `i` of the interval whose pricing function applies at time `t`:
    /// `T_i <= t < T_{i+1}` (a valuation exactly on a coupon date uses the
    /// ex-coupon interval). Returns `N` at or past maturity.
    pub fn interval_index(&self, t: f64) -> usize {
        self.coupon_times.partition_point(|&ti| ti <= t)
    }

    /// Untaxed payout to bondholders at `T_{k+1}`: the coupon, plus the face
    /// value at maturity.
    pub fn tn_payout(&self, k: usize) -> f64 {
        if k + 1 == self.count() {
            self.face + self.coupon_amounts[k]
        } else {
            self.coupon_amounts[k]
        }
    }

    /// Terminal default barrier `K_N = F + C_N`.
    pub fn terminal_barrier(&self) -> f64 {
        self.face + self.coupon_amounts[self.count() - 1]
    }

    /// Final-period coupon rate `c_N = C_N / F`.
    pub fn final_coupon_rate(&self) -> f64 {
        self.coupon_amounts[self.count() - 1] / self.face
    }

    /// Hazard integral `int_{t1}^{t2} lambda(u) du` of the piecewise-constant
    /// intensity (zero beyond maturity).
    pub fn hazard_integral(&self, t1: f64, t2: f64) -> f64 {
        debug_assert!(t1 <= t2);
        let n = self.count();
        let mut acc = 0.0;
        let mut lo = t1;
        for i in 0..n {
            let hi = self.time(i);
            if lo >= t2 {
                break;
            }
            if hi > lo {
                acc += self.intensities[i] * (hi.min(t2) - lo);
                lo = hi.min(t2);
            }
        }
        acc
    }
}

/// Payouts to bondholders per date in maturity-value units, optionally
/// reduced by the coupon tax. Derived from a `CouponBondSpec`; the taxed
/// variant implements the income-tax payoff rules (tax on coupons only,
/// never on the principal).
#[derive(Debug, Clone)]
pub(crate) struct PayoutSchedule {
    pub cbar: Vec<f64>,
}

impl PayoutSchedule {
    pub fn untaxed(spec: &CouponBondSpec) -> Self {
        let cbar = (0..spec.count()).map(|k| spec.tn_payout(k)).collect();
        PayoutSchedule { cbar }
    }

    pub fn taxed(spec: &CouponBondSpec, tax: f64) -> Self {
        let n = spec.count();
        let cbar = (0..n)
            .map(|k| {
                if k + 1 == n {
                    spec.face + (1.0 - tax) * spec.coupon_amounts[k]
                } else {
                    (1.0 - tax) * spec.coupon_amounts[k]
                }
            })
            .collect();
        PayoutSchedule { cbar }
    }

    /// Default-free value at `t` of payouts strictly after interval `i`
    /// under a constant rate.
    pub fn phi_constant_rate(&self, spec: &CouponBondSpec, rate: f64, t: f64, i: usize) -> f64 {
        (i..spec.count())
            .map(|k| self.cbar[k] * (-rate * (spec.time(k) - t)).exp())
            .sum()
    }

    /// Sensitivity `d/dr` of `phi_constant_rate`.
    pub fn phi_constant_rate_dr(&self, spec: &CouponBondSpec, rate: f64, t: f64, i: usize) -> f64 {
        (i..spec.count())
            .map(|k| -self.cbar[k] * (spec.time(k) - t) * (-rate * (spec.time(k) - t)).exp())
            .sum()
    }

    /// Maturity-unit value of payouts strictly after interval `i` (the
    /// stochastic-rate analogue of the default-free value).
    pub fn phi_maturity_units(&self, i: usize) -> f64 {
        self.cbar[i..].iter().sum()
    }
}

/// Expected-default thresholds `K_1..K_N`; firm-value units under a constant
/// rate, relative-price units under stochastic rates. `K_N = F + C_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSchedule {
    values: Vec<f64>,
}

impl BarrierSchedule {
    pub(crate) fn from_values(values: Vec<f64>) -> Self {
        BarrierSchedule { values }
    }

    /// Barrier `K_{k+1}` for 0-based index `k`.
    pub fn barrier(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Initial bond price split into its premium components; the parts sum to
/// the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBreakdown {
    pub total: f64,
    /// Face and final coupon paid at maturity on full survival.
    pub survival_pv: f64,
    /// Interim coupons paid while alive.
    pub coupon_pv: f64,
    /// Recovery `delta V` paid at expected default or at unexpected default
    /// with loss.
    pub expected_default_pv: f64,
    /// Full default-free value paid at unexpected default without loss.
    pub unexpected_default_pv: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> CouponBondSpec {
        CouponBondSpec::new(
            100.0,
            vec![0.5, 1.0, 1.5, 2.0],
            vec![3.0, 3.0, 3.0, 3.0],
            0.5,
            vec![0.02, 0.02, 0.03, 0.03],
        )
        .unwrap()
    }

    #[test]
    fn interval_conventions() {
        let s = spec();
        assert_eq!(s.interval_index(0.0), 0);
        assert_eq!(s.interval_index(0.49), 0);
        // Exactly on a coupon date: ex-coupon interval.
        assert_eq!(s.interval_index(0.5), 1);
        assert_eq!(s.interval_index(1.99), 3);
        assert_eq!(s.interval_index(2.0), 4);
        assert_eq!(s.interval_start(0), 0.0);
        assert_eq!(s.interval_start(3), 1.5);
    }

    #[test]
    fn payouts_and_barrier() {
        let s = spec();
        assert_eq!(s.tn_payout(0), 3.0);
        assert_eq!(s.tn_payout(3), 103.0);
        assert_eq!(s.terminal_barrier(), 103.0);
        let taxed = PayoutSchedule::taxed(&s, 0.3);
        assert!((taxed.cbar[0] - 2.1).abs() < 1e-12);
        assert!((taxed.cbar[3] - 102.1).abs() < 1e-12);
        let untaxed = PayoutSchedule::untaxed(&s);
        assert_eq!(untaxed.phi_maturity_units(0), 112.0);
        assert_eq!(untaxed.phi_maturity_units(3), 103.0);
    }

    #[test]
    fn hazard_integral_piecewise() {
        let s = spec();
        let h = s.hazard_integral(0.25, 1.25);
        assert!((h - (0.02 * 0.25 + 0.02 * 0.5 + 0.03 * 0.25)).abs() < 1e-15);
        let h2 = s.hazard_integral(0.0, 2.0);
        assert!((h2 - (0.02 + 0.02 + 0.03 + 0.03) * 0.5).abs() < 1e-15);
        // Beyond maturity the intensity is zero.
        assert_eq!(s.hazard_integral(2.0, 3.0), 0.0);
    }

    #[test]
    fn validation_errors() {
        assert!(CouponBondSpec::new(100.0, vec![], vec![], 0.5, vec![]).is_err());
        assert!(
            CouponBondSpec::new(100.0, vec![1.0, 0.5], vec![1.0, 1.0], 0.5, vec![0.0, 0.0])
                .is_err()
        );
        assert!(CouponBondSpec::new(100.0, vec![1.0], vec![-1.0], 0.5, vec![0.0]).is_err());
        assert!(CouponBondSpec::new(100.0, vec![1.0], vec![1.0], 1.5, vec![0.0]).is_err());
        assert!(spec().with_tax(1.0).is_err());
        assert!(spec().with_tax(0.35).is_ok());
    }
}
