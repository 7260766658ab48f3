use std::io::Write;

use fpqr::metrics::{cpd, interval_score, rmspe, rrispee, rrispee_surface, MetricName, MetricReport};

use crate::args::EvaluateArgs;
use crate::curves::{read_curves, CurveTable};
use crate::error::{usage, CliError, CliResult};

fn same_shape(a: &CurveTable, b: &CurveTable, what: &str) -> CliResult<()> {
    if a.curves.values().shape() != b.curves.values().shape() || !a.curves.same_grid(b.curves.grid()) {
        return usage(format!("{what}: files differ in shape or grid"));
    }
    Ok(())
}

fn stage(e: fpqr::FpqrError) -> CliError {
    CliError::stage("evaluate", e)
}

pub fn compute(a: &EvaluateArgs) -> CliResult<Vec<MetricReport>> {
    let mut out = Vec::new();
    if let Some(truth) = &a.truth {
        let y = read_curves(truth)?;
        if a.pred.is_none() && a.lo.is_none() {
            return usage("--truth needs --pred or --lo/--hi");
        }
        if let Some(pred) = &a.pred {
            let q = read_curves(pred)?;
            same_shape(&y, &q, "truth/pred")?;
            out.push(MetricReport {
                name: MetricName::Rmspe,
                value: rmspe(&y.curves, &q.curves).map_err(stage)?,
                grid_points: y.curves.n_points(),
            });
        }
        if let (Some(lo), Some(hi)) = (&a.lo, &a.hi) {
            let lo = read_curves(lo)?;
            let hi = read_curves(hi)?;
            same_shape(&y, &lo, "truth/lo")?;
            same_shape(&y, &hi, "truth/hi")?;
            let n = y.curves.n_curves();
            let (mut c, mut s) = (0.0, 0.0);
            for i in 0..n {
                let row = |t: &CurveTable| -> Vec<f64> { t.curves.values().row(i).iter().copied().collect() };
                let (yi, li, hi_) = (row(&y), row(&lo), row(&hi));
                c += cpd(&yi, &li, &hi_, a.nominal).map_err(stage)?;
                s += interval_score(&yi, &li, &hi_, a.level)
                    .map_err(|e| CliError::stage(&format!("evaluate (curve {})", y.ids[i]), e))?;
            }
            let j = y.curves.n_points();
            out.push(MetricReport { name: MetricName::Cpd, value: c / n as f64, grid_points: j });
            out.push(MetricReport { name: MetricName::IntervalScore, value: s / n as f64, grid_points: j });
        }
    }
    if let (Some(t), Some(e)) = (&a.alpha_true, &a.alpha_est) {
        let t = read_curves(t)?;
        let e = read_curves(e)?;
        same_shape(&t, &e, "alpha")?;
        let row = |c: &CurveTable| -> Vec<f64> { c.curves.values().row(0).iter().copied().collect() };
        out.push(MetricReport {
            name: MetricName::RrispeeAlpha,
            value: rrispee(t.curves.grid(), &row(&t), &row(&e)).map_err(stage)?,
            grid_points: t.curves.n_points(),
        });
    }
    if let (Some(t), Some(e)) = (&a.beta_true, &a.beta_est) {
        let t = read_curves(t)?;
        let e = read_curves(e)?;
        same_shape(&t, &e, "beta")?;
        let v: Vec<f64> = t
            .ids
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage("beta files need numeric row labels (predictor grid)".into()))?;
        out.push(MetricReport {
            name: MetricName::RrispeeBeta,
            value: rrispee_surface(&v, t.curves.grid(), t.curves.values(), e.curves.values()).map_err(stage)?,
            grid_points: t.curves.values().len(),
        });
    }
    if out.is_empty() {
        return usage("nothing to evaluate: give --truth with --pred or --lo/--hi, --alpha-true/--alpha-est or --beta-true/--beta-est");
    }
    Ok(out)
}

pub fn run(a: &EvaluateArgs) -> CliResult<()> {
    let reports = compute(a)?;
    let mut text = String::from("dataset,metric,value\n");
    for r in &reports {
        text.push_str(&format!("{},{},{}\n", a.dataset, r.name, r.value));
    }
    match &a.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}
