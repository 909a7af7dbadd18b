//! Market descriptions and default-free term structure.
//!
//! Covers constant-rate discounting, Vasicek zero-coupon bonds
//! `Z(r,t;T) = exp(A(t,T) - B(t,T) r)`, and the effective volatility
//! `S_x(t)` of the relative price `x = V / Z(r,t;T)` together with its
//! accumulated variance, which drives every stochastic-rate closed form.

use serde::{Deserialize, Serialize};

use crate::bond::CouponBondSpec;
use crate::error::{Error, Result};
use crate::math::pwc::PiecewiseConstant;

/// Constant-short-rate market: short rate `r`, dividend payout rate `b`,
/// firm-value volatility `s_v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneFactorMarket {
    pub rate: f64,
    pub dividend: f64,
    pub firm_vol: f64,
}

impl OneFactorMarket {
    pub fn new(rate: f64, dividend: f64, firm_vol: f64) -> Result<Self> {
        if firm_vol <= 0.0 {
            return Err(Error::domain("firm volatility must be positive"));
        }
        if dividend < 0.0 {
            return Err(Error::domain("dividend rate must be nonnegative"));
        }
        Ok(OneFactorMarket {
            rate,
            dividend,
            firm_vol,
        })
    }

    /// Default-free zero-coupon bond price `exp(-r (T - t))`.
    pub fn discount(&self, t: f64, maturity: f64) -> f64 {
        (-self.rate * (maturity - t)).exp()
    }
}

/// Vasicek-rate market: `dr = (a1 - a2 r) dt + s_r dW1`, firm value with
/// piecewise-constant volatility `s_v(t)` correlated with the rate by `rho`,
/// and dividend payout rate `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VasicekMarket {
    pub a1: f64,
    pub a2: f64,
    pub rate_vol: f64,
    pub rho: f64,
    pub firm_vol: PiecewiseConstant,
    pub dividend: f64,
}

impl VasicekMarket {
    pub fn new(
        a1: f64,
        a2: f64,
        rate_vol: f64,
        rho: f64,
        firm_vol: PiecewiseConstant,
        dividend: f64,
    ) -> Result<Self> {
        if rate_vol < 0.0 {
            return Err(Error::domain("rate volatility must be nonnegative"));
        }
        if a2 < 0.0 {
            return Err(Error::domain("mean-reversion speed must be nonnegative"));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::domain("correlation must lie in [-1, 1]"));
        }
        if firm_vol.min_value() <= 0.0 {
            return Err(Error::domain("firm volatility must be positive"));
        }
        if dividend < 0.0 {
            return Err(Error::domain("dividend rate must be nonnegative"));
        }
        Ok(VasicekMarket {
            a1,
            a2,
            rate_vol,
            rho,
            firm_vol,
            dividend,
        })
    }
}

// f1(x) = (x - 1 + e^-x) / x^2 and f2(x) = (x - 2(1-e^-x) + (1-e^-2x)/2) / x^3
// appear in int B du = theta^2 f1(a2 theta) and int B^2 du = theta^3 f2(a2 theta).
// Series branches keep them accurate through the a2 -> 0 limit.
pub(crate) fn f1(x: f64) -> f64 {
    if x.abs() < 0.02 {
        0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0 + x * x * x * x / 720.0
    } else {
        (x - 1.0 + (-x).exp()) / (x * x)
    }
}

pub(crate) fn f2(x: f64) -> f64 {
    if x.abs() < 0.02 {
        1.0 / 3.0 - x / 4.0 + 7.0 * x * x / 60.0 - x * x * x / 24.0 + 31.0 * x * x * x * x / 2520.0
    } else {
        let u = -(-x).exp_m1();
        (x * x * f1(x) - 0.5 * u * u) / (x * x * x)
    }
}

/// Vasicek deterministic duration factor `B(t,T) = (1 - e^{-a2 (T-t)}) / a2`,
/// with the series limit `T - t` as `a2 -> 0`.
pub fn vasicek_b(a2: f64, t: f64, maturity: f64) -> f64 {
    let theta = maturity - t;
    let x = a2 * theta;
    if x.abs() < 1e-12 {
        theta * (1.0 - 0.5 * x)
    } else {
        -(-x).exp_m1() / a2
    }
}

/// Affine coefficients `(A, B)` of the Vasicek zero-coupon bond.
///
/// `A(t,T) = -int_t^T [a1 B(u,T) - 1/2 s_r^2 B(u,T)^2] du`, evaluated in
/// closed form.
pub fn zcb_coeffs(market: &VasicekMarket, t: f64, maturity: f64) -> Result<(f64, f64)> {
    if t > maturity {
        return Err(Error::domain("zcb_coeffs: t must not exceed maturity"));
    }
    let theta = maturity - t;
    let x = market.a2 * theta;
    let b = vasicek_b(market.a2, t, maturity);
    let int_b = theta * theta * f1(x);
    let int_b2 = theta * theta * theta * f2(x);
    let a = -market.a1 * int_b + 0.5 * market.rate_vol * market.rate_vol * int_b2;
    Ok((a, b))
}

/// Vasicek zero-coupon bond price `Z(r,t;T) = e^{A - B r}`.
pub fn zcb_price(market: &VasicekMarket, r: f64, t: f64, maturity: f64) -> Result<f64> {
    let (a, b) = zcb_coeffs(market, t, maturity)?;
    Ok((a - b * r).exp())
}

/// Instantaneous variance rate of the relative price `x = V/Z(r,t;T_ref)`:
/// `S_x^2(t) = s_v^2 + 2 rho s_v s_r B(t,T_ref) + (s_r B(t,T_ref))^2`.
pub fn sx_squared(market: &VasicekMarket, t: f64, t_ref: f64) -> f64 {
    let sv = market.firm_vol.value_at(t);
    let srb = market.rate_vol * vasicek_b(market.a2, t, t_ref);
    sv * sv + 2.0 * market.rho * sv * srb + srb * srb
}

/// Accumulated relative-price variance `int_{t1}^{t2} S_x^2(u) du`, closed
/// form per firm-volatility segment.
pub fn accumulated_variance(market: &VasicekMarket, t1: f64, t2: f64, t_ref: f64) -> Result<f64> {
    if t1 > t2 || t2 > t_ref {
        return Err(Error::domain(
            "accumulated_variance: need t1 <= t2 <= reference maturity",
        ));
    }
    let mut cuts = vec![t1];
    cuts.extend(market.firm_vol.breakpoints_within(t1, t2));
    cuts.push(t2);
    let sr = market.rate_vol;
    let a2 = market.a2;
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (u1, u2) = (pair[0], pair[1]);
        let sv = market.firm_vol.value_at(u1);
        let dt = u2 - u1;
        // int_{u1}^{u2} B(u,T) du = theta1^2 f1(a2 theta1) - theta2^2 f1(a2 theta2)
        let th1 = t_ref - u1;
        let th2 = t_ref - u2;
        let int_b = th1 * th1 * f1(a2 * th1) - th2 * th2 * f1(a2 * th2);
        let int_b2 = th1 * th1 * th1 * f2(a2 * th1) - th2 * th2 * th2 * f2(a2 * th2);
        total += sv * sv * dt + 2.0 * market.rho * sv * sr * int_b + sr * sr * int_b2;
    }
    Ok(total)
}

/// Discounting state for default-free present values.
#[derive(Debug, Clone, Copy)]
pub enum DiscountState<'a> {
    /// Constant short rate.
    OneFactor { rate: f64 },
    /// Stochastic-rate model where coupons are quoted in maturity units;
    /// the default-free value is the plain sum `F + sum C_k` (maturity
    /// units), independent of the current rate.
    TwoFactor { market: &'a VasicekMarket },
}

/// Time-`t` value of the default-free bond cash flows strictly after index
/// `from` (0-based coupon index; pass the interval index `i` to value
/// coupons `i+1..=N` plus the face).
pub fn default_free_pv(
    spec: &CouponBondSpec,
    state: DiscountState<'_>,
    t: f64,
    from: usize,
) -> Result<f64> {
    let n = spec.count();
    if from > n {
        return Err(Error::domain("default_free_pv: index out of range"));
    }
    match state {
        DiscountState::OneFactor { rate } => {
            if from < n && t > spec.time(from) {
                return Err(Error::domain(
                    "default_free_pv: t past the first remaining date",
                ));
            }
            let mut pv = 0.0;
            for k in from..n {
                pv += spec.tn_payout(k) * (-rate * (spec.time(k) - t)).exp();
            }
            Ok(pv)
        }
        DiscountState::TwoFactor { .. } => {
            let mut pv = 0.0;
            for k in from..n {
                pv += spec.tn_payout(k);
            }
            Ok(pv)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::quad::integrate_adaptive;

    fn assert_close(got: f64, want: f64, tol: f64, label: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{label}: got {got}, want {want} (diff {})",
            (got - want).abs()
        );
    }

    fn sample_market() -> VasicekMarket {
        VasicekMarket::new(
            0.005,
            0.1,
            0.01,
            -0.3,
            PiecewiseConstant::constant(0.25),
            0.01,
        )
        .unwrap()
    }

    #[test]
    fn b_examples() {
        let m = sample_market();
        let (_, b) = zcb_coeffs(&m, 0.0, 1.0).unwrap();
        assert_close(
            b,
            (1.0 - (-0.1f64).exp()) / 0.1,
            1e-14,
            "B at a2=0.1, theta=1",
        );
        let (a0, b0) = zcb_coeffs(&m, 2.0, 2.0).unwrap();
        assert_eq!((a0, b0), (0.0, 0.0));
    }

    #[test]
    fn b_small_a2_limit() {
        let m = VasicekMarket::new(0.0, 1e-14, 0.0, 0.0, PiecewiseConstant::constant(0.2), 0.0)
            .unwrap();
        let (_, b) = zcb_coeffs(&m, 0.0, 3.0).unwrap();
        assert_close(b, 3.0, 1e-12, "B -> T - t as a2 -> 0");
    }

    #[test]
    fn zcb_reduces_to_constant_rate() {
        let m =
            VasicekMarket::new(0.0, 0.0, 0.0, 0.0, PiecewiseConstant::constant(0.2), 0.0).unwrap();
        let z = zcb_price(&m, 0.05, 0.0, 2.0).unwrap();
        assert_close(z, (-0.1f64).exp(), 1e-15, "deterministic constant rate");
        assert_eq!(zcb_price(&m, 0.05, 1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn zcb_decreasing_in_rate_and_duration_is_b() {
        let m = sample_market();
        let (maturity, r) = (4.0, 0.03);
        let z = |rr: f64| zcb_price(&m, rr, 0.0, maturity).unwrap();
        assert!(z(r + 0.01) < z(r));
        assert!(z(r) > 0.0 && z(r) <= 1.0);
        let h = 1e-6;
        let fd = -(z(r + h) - z(r - h)) / (2.0 * h) / z(r);
        let (_, b) = zcb_coeffs(&m, 0.0, maturity).unwrap();
        assert_close(fd / b, 1.0, 1e-8, "-dZ/dr / Z = B");
    }

    #[test]
    fn zcb_satisfies_pde() {
        // Finite-difference residual of dZ/dt + 1/2 s^2 Z_rr + (a1 - a2 r) Z_r - r Z.
        let m = sample_market();
        let maturity = 3.0;
        let h = 1e-5;
        let mut worst = 0.0f64;
        for &t in &[0.1, 0.9, 2.1] {
            for &r in &[0.0, 0.02, 0.06] {
                let z = |tt: f64, rr: f64| zcb_price(&m, rr, tt, maturity).unwrap();
                let zt = (z(t + h, r) - z(t - h, r)) / (2.0 * h);
                let zr = (z(t, r + h) - z(t, r - h)) / (2.0 * h);
                let zrr = (z(t, r + h) - 2.0 * z(t, r) + z(t, r - h)) / (h * h);
                let resid =
                    zt + 0.5 * m.rate_vol * m.rate_vol * zrr + (m.a1 - m.a2 * r) * zr - r * z(t, r);
                worst = worst.max(resid.abs());
            }
        }
        assert!(worst < 1e-6, "PDE residual {worst}");
    }

    #[test]
    fn sx_squared_limits() {
        let mut m = sample_market();
        m.rate_vol = 0.0;
        assert_close(sx_squared(&m, 0.7, 5.0), 0.25 * 0.25, 1e-15, "s_r = 0");
        let m2 = sample_market();
        assert_close(
            sx_squared(&m2, 5.0, 5.0),
            0.25 * 0.25,
            1e-15,
            "t = T_ref so B = 0",
        );
        // Perfect hedge: rho = -1 and s_v = s_r B makes S_x vanish.
        let t_ref = 2.0;
        let b = vasicek_b(0.1, 0.0, t_ref);
        let m3 = VasicekMarket::new(
            0.0,
            0.1,
            0.2,
            -1.0,
            PiecewiseConstant::constant(0.2 * b),
            0.0,
        )
        .unwrap();
        assert_close(sx_squared(&m3, 0.0, t_ref), 0.0, 1e-15, "perfect hedge");
    }

    #[test]
    fn accumulated_variance_against_quadrature() {
        let m = VasicekMarket::new(
            0.01,
            0.15,
            0.012,
            -0.4,
            PiecewiseConstant::new(vec![1.0, 2.5], vec![0.3, 0.22, 0.27]).unwrap(),
            0.0,
        )
        .unwrap();
        let t_ref = 4.0;
        for (t1, t2) in [(0.0, 4.0), (0.3, 1.7), (1.0, 2.5), (2.6, 3.9)] {
            let closed = accumulated_variance(&m, t1, t2, t_ref).unwrap();
            // 64-node panels between volatility breakpoints.
            let mut cuts = vec![t1];
            cuts.extend(m.firm_vol.breakpoints_within(t1, t2));
            cuts.push(t2);
            let mut quad = 0.0;
            for w in cuts.windows(2) {
                quad +=
                    integrate_adaptive(w[0], w[1], 64, 1024, 1e-13, |u| sx_squared(&m, u, t_ref));
            }
            assert!(
                (closed / quad - 1.0).abs() < 1e-10,
                "({t1},{t2}): closed {closed} vs quadrature {quad}"
            );
        }
    }

    #[test]
    fn nested_correlation_from_accumulated_variance() {
        // Correlation entries are square roots of accumulated-variance
        // ratios; cross-check the closed form against direct quadrature.
        let m = sample_market();
        let t_ref = 4.0;
        let t = 0.2;
        let times = [1.0, 2.5, 4.0];
        let corr = crate::mvn::nested_corr(t, &times, |until| {
            accumulated_variance(&m, t, until, t_ref).unwrap()
        })
        .unwrap();
        for i in 0..3 {
            for j in i + 1..3 {
                let qi =
                    integrate_adaptive(t, times[i], 64, 1024, 1e-13, |u| sx_squared(&m, u, t_ref));
                let qj =
                    integrate_adaptive(t, times[j], 64, 1024, 1e-13, |u| sx_squared(&m, u, t_ref));
                assert_close(
                    corr.entry(i, j),
                    (qi / qj).sqrt(),
                    1e-10,
                    &format!("entry ({i},{j})"),
                );
            }
        }
    }

    #[test]
    fn accumulated_variance_additive_and_degenerate() {
        let m = sample_market();
        let t_ref = 5.0;
        let a = accumulated_variance(&m, 0.0, 1.3, t_ref).unwrap();
        let b = accumulated_variance(&m, 1.3, 3.1, t_ref).unwrap();
        let c = accumulated_variance(&m, 0.0, 3.1, t_ref).unwrap();
        assert_close(a + b, c, 1e-12 * c.abs().max(1.0), "additivity");
        assert_eq!(accumulated_variance(&m, 1.0, 1.0, t_ref).unwrap(), 0.0);
        let mut flat = sample_market();
        flat.rate_vol = 0.0;
        let v = accumulated_variance(&flat, 0.5, 2.0, t_ref).unwrap();
        assert_close(v, 0.25 * 0.25 * 1.5, 1e-14, "s_r = 0 constant vol");
        assert!(accumulated_variance(&m, 2.0, 1.0, t_ref).is_err());
    }

    #[test]
    fn default_free_pv_examples() {
        let spec =
            CouponBondSpec::new(100.0, vec![1.0, 2.0], vec![5.0, 5.0], 0.4, vec![0.0; 2]).unwrap();
        let pv = default_free_pv(&spec, DiscountState::OneFactor { rate: 0.05 }, 0.0, 0).unwrap();
        let want = 5.0 * (-0.05f64).exp() + 105.0 * (-0.10f64).exp();
        assert_close(pv, want, 1e-12, "two-coupon discounting");

        let zero = CouponBondSpec::new(100.0, vec![3.0], vec![0.0], 0.4, vec![0.0]).unwrap();
        let pv0 = default_free_pv(&zero, DiscountState::OneFactor { rate: 0.0 }, 0.0, 0).unwrap();
        assert_close(pv0, 100.0, 1e-12, "r = 0 face only");

        let m = sample_market();
        let pv2 = default_free_pv(&spec, DiscountState::TwoFactor { market: &m }, 0.0, 0).unwrap();
        assert_close(pv2, 110.0, 1e-12, "maturity units sum");
        assert!(default_free_pv(&spec, DiscountState::OneFactor { rate: 0.0 }, 0.0, 7).is_err());
    }
}
