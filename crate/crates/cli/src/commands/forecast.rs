//! Expanding-window one-step-ahead forecasts: each curve is regressed on the
//! curve before it.

use fpqr::basis::DiscreteCurveSet;
use fpqr::fpqr::FpqrFit;
use fpqr::metrics::{cpd, interval_score, rmspe};
use fpqr::quantreg::QuantileLevel;

use super::{csv_err, csv_writer, fit_model, quantile_level};
use crate::args::{ForecastArgs, ModelArgs};
use crate::curves::read_curves;
use crate::error::{usage, CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRow {
    /// Position of the forecast curve in the series.
    pub index: usize,
    pub rmspe: f64,
    pub cpd: f64,
    pub interval_score: f64,
    pub k_y: usize,
    pub k_x: usize,
    pub h: usize,
}

pub struct ForecastPlan<'a> {
    pub model: &'a ModelArgs,
    pub tau: QuantileLevel,
    pub tau_lo: QuantileLevel,
    pub tau_hi: QuantileLevel,
    pub refit_every: usize,
}

fn rows(series: &DiscreteCurveSet, from: usize, to: usize) -> DiscreteCurveSet {
    series.select(&(from..to).collect::<Vec<_>>())
}

/// Forecasts curves `split..n`. The models are refitted on all lag pairs
/// available before the target at the first forecast and then every
/// `refit_every` forecasts.
pub fn forecast_series(series: &DiscreteCurveSet, split: usize, plan: &ForecastPlan) -> CliResult<Vec<ForecastRow>> {
    let n = series.n_curves();
    if plan.refit_every == 0 {
        return usage("--refit-every must be at least 1");
    }
    if split < 2 || n < split + 2 {
        return usage(format!(
            "forecasting from index {split} needs split >= 2 and at least {} curves (series has {n})",
            split + 2
        ));
    }
    if plan.tau_lo.value() > plan.tau_hi.value() {
        return usage("--tau-lo exceeds --tau-hi");
    }
    let level = 1.0 - (plan.tau_hi.value() - plan.tau_lo.value());
    let nominal = plan.tau_hi.value() - plan.tau_lo.value();

    let mut models: Option<[FpqrFit; 3]> = None;
    let mut out = Vec::with_capacity(n - split);
    for t in split..n {
        if (t - split).is_multiple_of(plan.refit_every) {
            // Pairs (curve i-1, curve i) for i < t.
            let x = rows(series, 0, t - 1);
            let y = rows(series, 1, t);
            let fit_at = |tau| fit_model(plan.model, &y, &x, tau).map(|(f, _)| f);
            models = Some([fit_at(plan.tau)?, fit_at(plan.tau_lo)?, fit_at(plan.tau_hi)?]);
        }
        let [mid, lo, hi] = models.as_ref().expect("fitted at the first step");
        let prev = rows(series, t - 1, t);
        let actual = rows(series, t, t + 1);
        let stage = |e| CliError::stage("forecast", e);
        let q = mid.predict(&prev).map_err(stage)?;
        let ql = lo.predict(&prev).map_err(stage)?;
        let qh = hi.predict(&prev).map_err(stage)?;

        // Crossed bounds are swapped pointwise before scoring.
        let (a, b) = (ql.values().row(0), qh.values().row(0));
        let lower: Vec<f64> = a.iter().zip(b.iter()).map(|(p, q)| p.min(*q)).collect();
        let upper: Vec<f64> = a.iter().zip(b.iter()).map(|(p, q)| p.max(*q)).collect();
        let y_t: Vec<f64> = actual.values().row(0).iter().copied().collect();

        let c = mid.config;
        out.push(ForecastRow {
            index: t,
            rmspe: rmspe(&actual, &q).map_err(stage)?,
            cpd: cpd(&y_t, &lower, &upper, nominal).map_err(stage)?,
            interval_score: interval_score(&y_t, &lower, &upper, level).map_err(stage)?,
            k_y: c.k_y,
            k_x: c.k_x,
            h: c.n_components,
        });
    }
    Ok(out)
}

pub fn run(a: &ForecastArgs) -> CliResult<()> {
    let plan = ForecastPlan {
        model: &a.model,
        tau: quantile_level(a.tau, "tau")?,
        tau_lo: quantile_level(a.tau_lo, "tau-lo")?,
        tau_hi: quantile_level(a.tau_hi, "tau-hi")?,
        refit_every: a.refit_every,
    };
    let series = read_curves(&a.series)?.curves;
    let rows = forecast_series(&series, a.split, &plan)?;

    let mut w = csv_writer(&a.out)?;
    w.write_record(["index", "rmspe", "cpd", "interval_score", "k_y", "k_x", "h"])
        .map_err(csv_err(&a.out))?;
    for r in &rows {
        w.write_record([
            r.index.to_string(),
            r.rmspe.to_string(),
            r.cpd.to_string(),
            r.interval_score.to_string(),
            r.k_y.to_string(),
            r.k_x.to_string(),
            r.h.to_string(),
        ])
        .map_err(csv_err(&a.out))?;
    }
    w.flush().map_err(|e| CliError::io(&a.out, e))
}
