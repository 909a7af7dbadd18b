//! Computation engine: builds the report rows for a configuration.

use cbond::mc::{
    mc_equity_one_factor, mc_equity_two_factor, mc_price_one_factor, mc_price_two_factor,
    McEstimate, SimConfig,
};
use cbond::one_factor;
use cbond::term_structure::{default_free_pv, DiscountState};
use cbond::two_factor;

use crate::config::{Model, RunConfig};
use crate::report::Report;
use crate::CliError;

/// Quantity groups to compute.
#[derive(Debug, Clone, Copy, Default)]
pub struct Selection {
    pub barriers: bool,
    pub price: bool,
    pub duration: bool,
    pub tax: bool,
    pub mc: bool,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub tax: Option<f64>,
}

fn map_err(e: cbond::Error) -> CliError {
    match e {
        cbond::Error::Domain(m) => CliError::Config(m),
        cbond::Error::Dimension { dim, max } => {
            CliError::Config(format!("problem dimension {dim} exceeds the cap {max}"))
        }
        cbond::Error::Numerical(m) => CliError::Numerical(m),
        cbond::Error::UnsupportedCase(m) => CliError::Unsupported(m),
    }
}

pub fn compute(cfg: &RunConfig, sel: Selection, over: &Overrides) -> Result<Report, CliError> {
    let mut spec = cfg.bond_spec()?;
    if let Some(tax) = over.tax {
        spec = spec.with_tax(tax).map_err(map_err)?;
    }
    let sim = SimConfig {
        n_paths: over.paths.or(cfg.mc_paths).unwrap_or(1_000_000),
        seed: over.seed.or(cfg.mc_seed).unwrap_or(42),
        substeps_per_interval: 1,
        antithetic: cfg.mc_antithetic.unwrap_or(false),
    };
    let mut report = Report::default();
    let t = cfg.t;
    let v0 = cfg.v0;
    let at_start = t == 0.0;

    match cfg.model {
        Model::OneFactor => {
            let market = cfg.one_factor_market()?;
            let ks = one_factor::solve_barriers(&spec, &market).map_err(map_err)?;
            if sel.barriers {
                for k in 0..spec.count() {
                    report.push(format!("K_{}", k + 1), ks.barrier(k), "currency", "barrier");
                }
            }
            if sel.price {
                let equity =
                    one_factor::equity_price(&spec, &market, &ks, v0, t).map_err(map_err)?;
                let bond = one_factor::bond_price(&spec, &market, &ks, v0, t).map_err(map_err)?;
                report.push("E_0", equity, "currency", "price");
                report.push("B_0", bond, "currency", "price");
                let phi = default_free_pv(
                    &spec,
                    DiscountState::OneFactor { rate: market.rate },
                    t,
                    spec.interval_index(t),
                )
                .map_err(map_err)?;
                report.push("default_free_pv", phi, "currency", "reference");
                if at_start {
                    let bc =
                        one_factor::bankruptcy_cost(&spec, &market, &ks, v0).map_err(map_err)?;
                    report.push("bankruptcy_cost", bc, "currency", "price");
                    let bd = one_factor::bond_initial_breakdown(&spec, &market, &ks, v0)
                        .map_err(map_err)?;
                    report.push("survival_pv", bd.survival_pv, "currency", "breakdown");
                    report.push("coupon_pv", bd.coupon_pv, "currency", "breakdown");
                    report.push(
                        "expected_default_pv",
                        bd.expected_default_pv,
                        "currency",
                        "breakdown",
                    );
                    report.push(
                        "unexpected_default_pv",
                        bd.unexpected_default_pv,
                        "currency",
                        "breakdown",
                    );
                }
            }
            if sel.tax && spec.tax_rate.is_some() {
                let taxed =
                    one_factor::taxed_bond_price(&spec, &market, &ks, v0, t).map_err(map_err)?;
                report.push("taxed_B_0", taxed, "currency", "price");
            }
            if sel.duration && at_start {
                let d = one_factor::duration(&spec, &market, &ks, v0).map_err(map_err)?;
                report.push("duration", d, "years", "risk");
                if spec.time(0) > 0.0 {
                    let df = one_factor::default_free_duration(&spec, market.rate, 0.0)
                        .map_err(map_err)?;
                    report.push("default_free_duration", df, "years", "risk");
                }
            }
            if sel.mc {
                let bond = one_factor::bond_price(&spec, &market, &ks, v0, t).map_err(map_err)?;
                let equity =
                    one_factor::equity_price(&spec, &market, &ks, v0, t).map_err(map_err)?;
                let mc_b = mc_price_one_factor(&spec, &market, &ks, v0, &sim).map_err(map_err)?;
                let mc_e = mc_equity_one_factor(&spec, &market, &ks, v0, &sim).map_err(map_err)?;
                push_mc(&mut report, "bond", bond, &mc_b);
                push_mc(&mut report, "equity", equity, &mc_e);
            }
        }
        Model::TwoFactor => {
            let market = cfg.vasicek_market()?;
            let r0 = cfg.r0()?;
            let ks = two_factor::solve_barriers_2f(&spec, &market).map_err(map_err)?;
            if sel.barriers {
                for k in 0..spec.count() {
                    report.push(format!("K_{}", k + 1), ks.barrier(k), "relative", "barrier");
                }
            }
            if sel.price {
                let equity =
                    two_factor::equity_price_2f(&spec, &market, &ks, v0, r0, t).map_err(map_err)?;
                let bond =
                    two_factor::bond_price_2f(&spec, &market, &ks, v0, r0, t).map_err(map_err)?;
                report.push("E_0", equity, "currency", "price");
                report.push("B_0", bond, "currency", "price");
                let phi = default_free_pv(
                    &spec,
                    DiscountState::TwoFactor { market: &market },
                    t,
                    spec.interval_index(t),
                )
                .map_err(map_err)?;
                report.push("default_free_pv", phi, "maturity_units", "reference");
                if at_start {
                    let bc = two_factor::bankruptcy_cost_2f(&spec, &market, &ks, v0, r0)
                        .map_err(map_err)?;
                    report.push("bankruptcy_cost", bc, "currency", "price");
                    let bd = two_factor::bond_initial_breakdown_2f(&spec, &market, &ks, v0, r0)
                        .map_err(map_err)?;
                    report.push("survival_pv", bd.survival_pv, "currency", "breakdown");
                    report.push("coupon_pv", bd.coupon_pv, "currency", "breakdown");
                    report.push(
                        "expected_default_pv",
                        bd.expected_default_pv,
                        "currency",
                        "breakdown",
                    );
                    report.push(
                        "unexpected_default_pv",
                        bd.unexpected_default_pv,
                        "currency",
                        "breakdown",
                    );
                }
            }
            if sel.tax && spec.tax_rate.is_some() {
                let taxed = two_factor::taxed_bond_price_2f(&spec, &market, &ks, v0, r0, t)
                    .map_err(map_err)?;
                report.push("taxed_B_0", taxed, "currency", "price");
            }
            if sel.duration && at_start {
                let d = two_factor::duration_2f(&spec, &market, &ks, v0, r0).map_err(map_err)?;
                report.push("duration", d.duration, "years", "risk");
                report.push("zcb_duration", d.zcb_duration, "years", "risk");
                report.push(
                    "duration_bounded_by_zcb",
                    if d.prop1_holds { 1.0 } else { 0.0 },
                    "boolean",
                    "risk",
                );
            }
            if sel.mc {
                let bond =
                    two_factor::bond_price_2f(&spec, &market, &ks, v0, r0, t).map_err(map_err)?;
                let equity =
                    two_factor::equity_price_2f(&spec, &market, &ks, v0, r0, t).map_err(map_err)?;
                let mc_b =
                    mc_price_two_factor(&spec, &market, &ks, v0, r0, &sim).map_err(map_err)?;
                let mc_e =
                    mc_equity_two_factor(&spec, &market, &ks, v0, r0, &sim).map_err(map_err)?;
                push_mc(&mut report, "bond", bond, &mc_b);
                push_mc(&mut report, "equity", equity, &mc_e);
            }
        }
    }
    Ok(report)
}

fn push_mc(report: &mut Report, what: &str, closed: f64, est: &McEstimate) {
    report.push(format!("mc_{what}_mean"), est.mean, "currency", "mc");
    report.push(
        format!("mc_{what}_std_error"),
        est.std_error,
        "currency",
        "mc",
    );
    let ratio = if est.std_error > 0.0 {
        (closed - est.mean).abs() / est.std_error
    } else {
        0.0
    };
    report.push(format!("mc_{what}_ratio"), ratio, "dimensionless", "mc");
}
