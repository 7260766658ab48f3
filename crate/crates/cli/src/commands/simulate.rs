use std::fs;

use fpqr::basis::DiscreteCurveSet;
use fpqr::simulate::{generate, predictor_grid, DgpSpec};
use nalgebra::DMatrix;

use crate::args::SimulateArgs;
use crate::curves::{default_ids, write_curves, write_table};
use crate::error::{usage, CliError, CliResult};

pub fn run(a: &SimulateArgs) -> CliResult<()> {
    if a.n == 0 {
        return usage("--n must be at least 1");
    }
    let dist = a.errors.dist();
    dist.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let spec = DgpSpec {
        n: a.n,
        seed: a.seed,
        error_dist: dist,
        predictor_noise: !a.errors.no_predictor_noise,
        shared_error: a.shared_error,
    };
    let out = generate(&spec).map_err(|e| CliError::stage("simulate", e))?;

    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let ids = default_ids(a.n);
    write_curves(&a.out_dir.join("y.csv"), &out.y, &ids)?;
    write_curves(&a.out_dir.join("x.csv"), &out.x_noisy, &ids)?;
    write_curves(&a.out_dir.join("x_clean.csv"), &out.x_clean, &ids)?;
    let alpha = DiscreteCurveSet::new(
        out.y.grid().to_vec(),
        DMatrix::from_row_slice(1, out.alpha_true.len(), &out.alpha_true),
    )
    .map_err(|e| CliError::stage("simulate", e))?;
    write_curves(&a.out_dir.join("alpha_true.csv"), &alpha, &["alpha".to_string()])?;
    let v_ids: Vec<String> = predictor_grid().iter().map(f64::to_string).collect();
    write_table(&a.out_dir.join("beta_true.csv"), out.y.grid(), &v_ids, &out.beta_true)?;
    println!("wrote {} curves to {}", a.n, a.out_dir.display());
    Ok(())
}
