//! Pricing under Vasicek short rates via change of numeraire.
//!
//! With the zero-coupon bond `Z(r,t;T_N)` as numeraire, the relative price
//! `x = V / Z` diffuses with zero rate, dividend `b` and the deterministic
//! volatility `S_x(t)`, so every closed form is the constant-rate structure
//! evaluated in `x`-space with accumulated-variance clocks; multiplying by
//! `Z` converts back to currency. Coupons are quoted as maturity values
//! (`C_i Z` paid at `T_i`), expected-default barriers live in relative-price
//! units, and the unexpected-default recovery threshold is the constant
//! `Phi_m / delta`.

use crate::binaries::{
    binary_price, binary_price_dx, BinaryKind, BinaryOrder, DiffusionSpec, PRICING_MVN_TOL,
};
use crate::bond::{BarrierSchedule, CouponBondSpec, PayoutSchedule, PriceBreakdown};
use crate::error::{Error, Result};
use crate::math::brent::brent;
use crate::mvn::{corr_from_variances, mvn_cdf, MvnProblem};
use crate::term_structure::{accumulated_variance, vasicek_b, zcb_price, VasicekMarket};

const QUAD_REL_TOL: f64 = 1e-9;
const QUAD_N0: usize = 32;
const QUAD_N_MAX: usize = 256;
const BARRIER_REL_TOL: f64 = 1e-12;

fn survival(spec: &CouponBondSpec, t1: f64, t2: f64) -> f64 {
    (-spec.hazard_integral(t1, t2)).exp()
}

/// Relative-price equity `e_i(x, t)` with barriers above `i` known.
fn equity_rel_in_interval(
    spec: &CouponBondSpec,
    market: &VasicekMarket,
    ks: &[f64],
    i: usize,
    x: f64,
    t: f64,
) -> Result<f64> {
    let n = spec.count();
    let t_n = spec.maturity();
    let payouts = PayoutSchedule::untaxed(spec);
    let var = move |t1: f64, t2: f64| accumulated_variance(market, t1, t2, t_n).unwrap();
    let spec_d = DiffusionSpec::DeterministicVol {
        dividend: market.dividend,
        variance: &var,
    };
    let times: Vec<f64> = (i..n).map(|k| spec.time(k)).collect();
    let barriers: Vec<f64> = ks[i..n].to_vec();
    let asset = BinaryOrder {
        kind: BinaryKind::Asset,
        signs: vec![1.0; n - i],
        barriers: barriers.clone(),
        obs_times: times.clone(),
    };
    let mut value = survival(spec, t, t_n) * binary_price(&asset, &spec_d, x, t)?;
    for m in i..n {
        let cb = payouts.cbar[m];
        if cb == 0.0 {
            continue;
        }
        let bond = BinaryOrder {
            kind: BinaryKind::Bond,
            signs: vec![1.0; m - i + 1],
            barriers: barriers[..=m - i].to_vec(),
            obs_times: times[..=m - i].to_vec(),
        };
        value -= cb * survival(spec, t, spec.time(m)) * binary_price(&bond, &spec_d, x, t)?;
    }
    Ok(value)
}

/// Equity price `E_i(V, r, t) = Z(r,t;T_N) e_i(V/Z, t)`.
pub fn equity_price_2f(
    spec: &CouponBondSpec,
    market: &VasicekMarket,
    barriers: &BarrierSchedule,
    v: f64,
    r: f64,
    t: f64,
) -> Result<f64> {
    spec.validate()?;
    if v <= 0.0 {
        return Err(Error::domain(
            "equity_price_2f: firm value must be positive",
        ));
    }
    if t >= spec.maturity() {
        let k_n = spec.terminal_barrier();
        return Ok(if v >= k_n { v - k_n } else { 0.0 });
    }
    let z = zcb_price(market, r, t, spec.maturity())?;
    let i = spec.interval_index(t);
    Ok(z * equity_rel_in_interval(spec, market, barriers.values(), i, v / z, t)?)
}

/// Expected-default barriers in relative-price units: `K_N = F + C_N` and
/// `K_i` the root of `e_i(x, T_i) = C_i`.
pub fn solve_barriers_2f(spec: &CouponBondSpec, market: &VasicekMarket) -> Result<BarrierSchedule> {
    spec.validate()?;
    let n = spec.count();
    let mut ks = vec![0.0; n];
    ks[n - 1] = spec.terminal_barrier();
    for j in (1..n).rev() {
        let coupon = spec.coupon_amounts[j - 1];
        if coupon == 0.0 {
            ks[j - 1] = 0.0;
            continue;
        }
        let t_j = spec.time(j - 1);
        let f = |x: f64| {
            equity_rel_in_interval(spec, market, &ks, j, x, t_j).unwrap_or(f64::NAN) - coupon
        };
        let scale = spec.face + spec.coupon_amounts.iter().sum::<f64>();
        let lo = 1e-12 * scale.max(1.0);
        let mut hi = (2.0 * coupon).max(ks[j]).max(scale);
        let mut grew = 0;
        while f(hi) <= 0.0 {
            hi *= 2.0;
            grew += 1;
            if grew > 200 {
                return Err(Error::numerical(
                    "solve_barriers_2f: failed to bracket the root",
                ));
            }
        }
        ks[j - 1] = brent(f, lo, hi, BARRIER_REL_TOL, 200)?;
    }
    Ok(BarrierSchedule::from_values(ks))
}

/// One term-group pass over the relative-price bond `u_i(x, t)`: values and
/// optionally x-derivatives, split into the payout group (coupons, survival
/// face, recovery-without-loss integrals) and the `delta V` recovery group.
struct RelBond {
    payout_group: f64,
    recovery_group: f64,
    payout_group_dx: f64,
    recovery_group_dx: f64,
    /// Component split of `payout_group` for reporting.
    survival: f64,
    coupon: f64,
    without_loss: f64,
}

fn rel_bond(
    spec: &CouponBondSpec,
    market: &VasicekMarket,
    payouts: &PayoutSchedule,
    barriers: &BarrierSchedule,
    x: f64,
    t: f64,
    with_dx: bool,
) -> Result<RelBond> {
    let n = spec.count();
    let i = spec.interval_index(t);
    let t_n = spec.maturity();
    let ks = barriers.values();
    let delta = spec.recovery;
    let var = move |t1: f64, t2: f64| accumulated_variance(market, t1, t2, t_n).unwrap();
    let spec_d = DiffusionSpec::DeterministicVol {
        dividend: market.dividend,
        variance: &var,
    };
    let times: Vec<f64> = (i..n).map(|k| spec.time(k)).collect();
    let kslice: Vec<f64> = ks[i..n].to_vec();

    let price = |order: &BinaryOrder| -> Result<(f64, f64)> {
        if with_dx {
            binary_price_dx(order, &spec_d, x, t)
        } else {
            Ok((binary_price(order, &spec_d, x, t)?, 0.0))
        }
    };

    let mut out = RelBond {
        payout_group: 0.0,
        recovery_group: 0.0,
        payout_group_dx: 0.0,
        recovery_group_dx: 0.0,
        survival: 0.0,
        coupon: 0.0,
        without_loss: 0.0,
    };
    for m in i..n {
        let surv = survival(spec, t, spec.time(m));
        let cb = payouts.cbar[m];
        if cb > 0.0 {
            let bond = BinaryOrder {
                kind: BinaryKind::Bond,
                signs: vec![1.0; m - i + 1],
                barriers: kslice[..=m - i].to_vec(),
                obs_times: times[..=m - i].to_vec(),
            };
            let (p, dp) = price(&bond)?;
            out.payout_group += surv * cb * p;
            out.payout_group_dx += surv * cb * dp;
            if m == n - 1 {
                out.survival += surv * cb * p;
            } else {
                out.coupon += surv * cb * p;
            }
        }
        if delta > 0.0 && ks[m] > 0.0 {
            let mut signs = vec![1.0; m - i + 1];
            *signs.last_mut().unwrap() = -1.0;
            let asset = BinaryOrder {
                kind: BinaryKind::Asset,
                signs,
                barriers: kslice[..=m - i].to_vec(),
                obs_times: times[..=m - i].to_vec(),
            };
            let (p, dp) = price(&asset)?;
            out.recovery_group += surv * delta * p;
            out.recovery_group_dx += surv * delta * dp;
        }
        let lam = spec.intensities[m];
        let phi = payouts.phi_maturity_units(m);
        if lam > 0.0 && delta > 0.0 && phi > 0.0 {
            let lo = if m == i { t } else { spec.interval_start(m) };
            let hi = spec.time(m);
            let surv_lo = survival(spec, t, lo);
            let m_barrier = phi / delta;
            let k_coords: Vec<f64> = kslice[..m - i].to_vec();
            let t_coords: Vec<f64> = times[..m - i].to_vec();
            let vals = integrate_vec(lo, hi, |tau| {
                let weight = lam * surv_lo * (-lam * (tau - lo)).exp();
                let mut barr = k_coords.clone();
                barr.push(m_barrier);
                let mut obs = t_coords.clone();
                obs.push(tau);
                let bond = BinaryOrder {
                    kind: BinaryKind::Bond,
                    signs: vec![1.0; obs.len()],
                    barriers: barr.clone(),
                    obs_times: obs.clone(),
                };
                let mut signs = vec![1.0; obs.len()];
                *signs.last_mut().unwrap() = -1.0;
                let asset = BinaryOrder {
                    kind: BinaryKind::Asset,
                    signs,
                    barriers: barr,
                    obs_times: obs,
                };
                let (pb, dpb) = price(&bond).unwrap_or((f64::NAN, f64::NAN));
                let (pa, dpa) = price(&asset).unwrap_or((f64::NAN, f64::NAN));
                [
                    weight * phi * pb,
                    weight * delta * pa,
                    weight * phi * dpb,
                    weight * delta * dpa,
                ]
            });
            out.payout_group += vals[0];
            out.without_loss += vals[0];
            out.recovery_group += vals[1];
            out.payout_group_dx += vals[2];
            out.recovery_group_dx += vals[3];
        }
    }
    Ok(out)
}

/// Adaptive Gauss-Legendre on a 4-vector integrand with shared nodes.
fn integrate_vec<F: Fn(f64) -> [f64; 4]>(a: f64, b: f64, f: F) -> [f64; 4] {
    if a == b {
        return [0.0; 4];
    }
    let eval = |n: usize| {
        let rule = crate::math::quad::GaussLegendre::get(n);
        let c = 0.5 * (b + a);
        let h = 0.5 * (b - a);
        let mut acc = [0.0; 4];
        for (&xn, &w) in rule.nodes.iter().zip(&rule.weights) {
            let v = f(c + h * xn);
            for (a, vi) in acc.iter_mut().zip(v) {
                *a += w * vi;
            }
        }
        acc.map(|v| v * h)
    };
    let mut n = QUAD_N0;
    let mut prev = eval(n);
    loop {
        n *= 2;
        let cur = eval(n);
        let diff: f64 = cur.iter().zip(&prev).map(|(c, p)| (c - p).abs()).sum();
        let scale: f64 = cur.iter().map(|c| c.abs()).sum::<f64>().max(1e-300);
        if diff <= QUAD_REL_TOL * scale || n >= QUAD_N_MAX {
            return cur;
        }
        prev = cur;
    }
}

fn terminal_payoff(payouts: &PayoutSchedule, spec: &CouponBondSpec, v: f64) -> f64 {
    if v >= spec.terminal_barrier() {
        payouts.cbar[spec.count() - 1]
    } else {
        spec.recovery * v
    }
}

/// Defaultable bond price `B_i(V, r, t) = Z(r,t;T_N) u_i(V/Z, t)`.
pub fn bond_price_2f(
    spec: &CouponBondSpec,
    market: &VasicekMarket,
    barriers: &BarrierSchedule,
    v: f64,
    r: f64,
    t: f64,
) -> Result<f64> {
    spec.validate()?;
    if v <= 0.0 {
        return Err(Error::domain("bond_price_2f: firm value must be positive"));
    }
    let payouts = PayoutSchedule::untaxed(spec);
    if t >= spec.maturity() {
        return Ok(terminal_payoff(&payouts, spec, v));
    }
    let z = zcb_price(market, r, t, spec.maturity())?;
    let rb = rel_bond(spec, market, &payouts, barriers, v / z, t, false)?;
    Ok(z * (rb.payout_group + rb.recovery_group))
}

/// Tax-adjusted bond price (coupon income taxed, principal not, untaxed
/// barriers); requires the regime `delta <= 1 / (1 + c_N)`.
pub fn taxed_bond_price_2f(
    spec: &CouponBondSpec,
    market: &VasicekMarket,
    barriers: &BarrierSchedule,
    v: f64,
    r: f64,
    t: f64,
) -> Result<f64> {
    spec.validate()?;
    if v <= 0.0 {
        return Err(Error::domain(
            "taxed_bond_price_2f: firm value must be positive",
        ));
    }
    crate::one_factor::check_tax_case(spec)?;
    let tax = spec.tax_rate.unwrap_or(0.0);
    let payouts = PayoutSchedule::taxed(spec, tax);
    if t >= spec.maturity() {
        return Ok(terminal_payoff(&payouts, spec, v));
    }
    let z = zcb_price(market, r, t, spec.maturity())?;
    let rb = rel_bond(spec, market, &payouts, barriers, v / z, t, false)?;
    Ok(z * (rb.payout_group + rb.recovery_group))
}

/// Initial price split into premium components (currency units).
pub fn bond_initial_breakdown_2f(
    spec: &CouponBondSpec,
    market: &VasicekMarket,
    barriers: &BarrierSchedule,
    v0: f64,
    r0: f64,
) -> Result<PriceBreakdown> {
    spec.validate()?;
    if v0 <= 0.0 {
        return Err(Error::domain(
            "bond_initial_breakdown_2f: firm value must be positive",
        ));
    }
    let payouts = PayoutSchedule::untaxed(spec);
    let g = g_terms_2f(spec, market, &payouts, barriers, v0, r0)?;
    let z0 = zcb_price(market, r0, 0.0, spec.maturity())?;
    let n = spec.count();
    let survival_pv = z0 * payouts.cbar[n - 1] * g.g_minus[n - 1];
    let coupon_pv: f64 = (0..n - 1)
        .map(|k| z0 * payouts.cbar[k] * g.g_minus[k])
        .sum();
    let unexpected_default_pv: f64 = (0..n)
        .map(|m| z0 * spec.intensities[m] * payouts.phi_maturity_units(m) * g.int_gbar[m])
        .sum();
    let expected_default_pv: f64 = (0..n)
        .map(|m| spec.recovery * v0 * (g.g_tilde[m] + spec.intensities[m] * g.int_gtilde[m]))
        .sum();
    let total = survival_pv + coupon_pv + unexpected_default_pv + expected_default_pv;
    Ok(PriceBreakdown {
        total,
        survival_pv,
        coupon_pv,
        expected_default_pv,
        unexpected_default_pv,
    })
}

/// Bankruptcy cost: the gap in `V = equity + debt + cost`.
pub fn bankruptcy_cost_2f(
    spec: &CouponBondSpec,
    market: &VasicekMarket,
    barriers: &BarrierSchedule,
    v0: f64,
    r0: f64,
) -> Result<f64> {
    spec.validate()?;
    if v0 <= 0.0 {
        return Err(Error::domain(
            "bankruptcy_cost_2f: firm value must be positive",
        ));
    }
    let payouts = PayoutSchedule::untaxed(spec);
    let g = g_terms_2f(spec, market, &payouts, barriers, v0, r0)?;
    let z0 = zcb_price(market, r0, 0.0, spec.maturity())?;
    let n = spec.count();
    let mut cost = v0 - v0 * g.g_plus_full;
    for m in 0..n {
        let lam = spec.intensities[m];
        let phi = payouts.phi_maturity_units(m);
        cost -= v0 * spec.recovery * g.g_tilde[m]
            + lam * (v0 * spec.recovery * g.int_gtilde[m] + z0 * phi * g.int_gbar[m]);
    }
    Ok(cost)
}

struct GTerms2f {
    g_minus: Vec<f64>,
    g_tilde: Vec<f64>,
    g_plus_full: f64,
    int_gbar: Vec<f64>,
    int_gtilde: Vec<f64>,
}

fn g_terms_2f(
    spec: &CouponBondSpec,
    market: &VasicekMarket,
    payouts: &PayoutSchedule,
    barriers: &BarrierSchedule,
    v0: f64,
    r0: f64,
) -> Result<GTerms2f> {
    let n = spec.count();
    let t_n = spec.maturity();
    let b = market.dividend;
    let delta = spec.recovery;
    let z0 = zcb_price(market, r0, 0.0, t_n)?;
    let x0 = v0 / z0;
    let mut vars = Vec::with_capacity(n);
    let mut d_plus = Vec::with_capacity(n);
    let mut d_minus = Vec::with_capacity(n);
    for k in 0..n {
        let nu = accumulated_variance(market, 0.0, spec.time(k), t_n)?;
        vars.push(nu);
        let kk = barriers.barrier(k);
        if kk <= 0.0 {
            d_plus.push(f64::INFINITY);
            d_minus.push(f64::INFINITY);
        } else {
            let core = (x0 / kk).ln() - b * spec.time(k);
            d_plus.push((core + 0.5 * nu) / nu.sqrt());
            d_minus.push((core - 0.5 * nu) / nu.sqrt());
        }
    }

    let mvn = |limits: Vec<f64>, signs: &[f64], vars: &[f64]| -> Result<f64> {
        let corr = corr_from_variances(vars, Some(signs));
        Ok(mvn_cdf(&MvnProblem::new(limits, corr)?, PRICING_MVN_TOL)?.value)
    };

    let mut g_minus = Vec::with_capacity(n);
    let mut g_tilde = Vec::with_capacity(n);
    for m in 0..n {
        let surv = survival(spec, 0.0, spec.time(m));
        g_minus.push(surv * mvn(d_minus[..=m].to_vec(), &vec![1.0; m + 1], &vars[..=m])?);
        let mut flip_signs = vec![1.0; m + 1];
        flip_signs[m] = -1.0;
        let mut lims = d_plus[..=m].to_vec();
        lims[m] = -lims[m];
        g_tilde.push(surv * (-b * spec.time(m)).exp() * mvn(lims, &flip_signs, &vars[..=m])?);
    }
    let g_plus_full =
        survival(spec, 0.0, t_n) * (-b * t_n).exp() * mvn(d_plus.clone(), &vec![1.0; n], &vars)?;

    let mut int_gbar = Vec::with_capacity(n);
    let mut int_gtilde = Vec::with_capacity(n);
    for m in 0..n {
        let lam = spec.intensities[m];
        let phi = payouts.phi_maturity_units(m);
        if lam == 0.0 || delta == 0.0 || phi <= 0.0 {
            int_gbar.push(0.0);
            int_gtilde.push(0.0);
            continue;
        }
        let lo = spec.interval_start(m);
        let hi = spec.time(m);
        let surv_lo = survival(spec, 0.0, lo);
        let m_barrier = phi / delta;
        let vals = integrate_vec(lo, hi, |tau| {
            let nu = accumulated_variance(market, 0.0, tau, t_n).unwrap();
            let core = (x0 / m_barrier).ln() - b * tau;
            let d_t_plus = (core + 0.5 * nu) / nu.sqrt();
            let d_t_minus = (core - 0.5 * nu) / nu.sqrt();
            let mut tau_vars = vars[..m].to_vec();
            tau_vars.push(nu);
            let mut lim_bar = d_minus[..m].to_vec();
            lim_bar.push(d_t_minus);
            let gbar_tau = mvn(lim_bar, &vec![1.0; m + 1], &tau_vars).unwrap_or(f64::NAN);
            let mut lim_tilde = d_plus[..m].to_vec();
            lim_tilde.push(-d_t_plus);
            let mut flip_signs = vec![1.0; m + 1];
            flip_signs[m] = -1.0;
            let gtilde_tau = mvn(lim_tilde, &flip_signs, &tau_vars).unwrap_or(f64::NAN);
            let w_bar = surv_lo * (-lam * (tau - lo)).exp();
            let w_tilde = w_bar * (-b * tau).exp();
            [w_bar * gbar_tau, w_tilde * gtilde_tau, 0.0, 0.0]
        });
        int_gbar.push(vals[0]);
        int_gtilde.push(vals[1]);
    }
    Ok(GTerms2f {
        g_minus,
        g_tilde,
        g_plus_full,
        int_gbar,
        int_gtilde,
    })
}

/// Analytic duration with the Proposition-1 style comparison against the
/// default-free duration `B(0, T_N)`.
#[derive(Debug, Clone, Copy)]
pub struct Duration2f {
    pub duration: f64,
    /// Default-free duration of the maturity-matched zero-coupon bond.
    pub zcb_duration: f64,
    /// Whether the sufficient condition for `duration <= zcb_duration`
    /// holds (equivalent to the relative price being x-increasing).
    pub prop1_holds: bool,
}

/// Duration `-(dB_0/dr)/B_0` at `t = 0`. Since the relative-price barriers
/// and volatility clock do not depend on the short rate, the rate enters
/// only through the numeraire: `dB_0/dr = -B(0,T) Z_0 [u_0 - x du_0/dx]`.
pub fn duration_2f(
    spec: &CouponBondSpec,
    market: &VasicekMarket,
    barriers: &BarrierSchedule,
    v0: f64,
    r0: f64,
) -> Result<Duration2f> {
    spec.validate()?;
    if v0 <= 0.0 {
        return Err(Error::domain("duration_2f: firm value must be positive"));
    }
    let t_n = spec.maturity();
    let z0 = zcb_price(market, r0, 0.0, t_n)?;
    let x0 = v0 / z0;
    let payouts = PayoutSchedule::untaxed(spec);
    let rb = rel_bond(spec, market, &payouts, barriers, x0, 0.0, true)?;
    let u0 = rb.payout_group + rb.recovery_group;
    if u0 <= 0.0 {
        return Err(Error::domain("duration_2f: bond price must be positive"));
    }
    let du0 = rb.payout_group_dx + rb.recovery_group_dx;
    let b0t = vasicek_b(market.a2, 0.0, t_n);
    let duration = b0t * (u0 - x0 * du0) / u0;
    let prop1_holds = x0 * du0 >= -1e-12 * u0;
    debug_assert!(!prop1_holds || duration <= b0t * (1.0 + 1e-12));
    Ok(Duration2f {
        duration,
        zcb_duration: b0t,
        prop1_holds,
    })
}
