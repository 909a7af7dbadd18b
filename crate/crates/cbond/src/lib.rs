//! Pricing library for defaultable corporate bonds with discrete coupons.
//!
//! Default can arrive two ways: at a coupon date when the firm value falls
//! below a solved barrier (the equity can no longer cover the coupon), or at
//! any time as the first jump of a Poisson clock with piecewise-constant
//! intensity. Closed-form equity, bond, bankruptcy-cost, tax-adjusted and
//! duration formulas are provided for a constant short rate and for Vasicek
//! rates via a change of numeraire, all built from higher-order binary option
//! prices over a multivariate normal kernel, and validated against an exact
//! Monte Carlo simulator.

pub mod binaries;
pub mod bond;
pub mod error;
pub mod math;
pub mod mc;
pub mod mvn;
pub mod one_factor;
pub mod term_structure;
pub mod two_factor;

pub use bond::{BarrierSchedule, CouponBondSpec, PriceBreakdown};
pub use error::{Error, Result};
pub use term_structure::{OneFactorMarket, VasicekMarket};
