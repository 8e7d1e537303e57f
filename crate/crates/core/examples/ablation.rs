// Miniature SL / SSL / SSL_AL ablation through the experiment runner,
// writing the same CSV files as `segssl ablate`.
//
// For the desk-scale table use `segssl ablate --config configs/desk.conf`.

use std::error::Error;

use segssl::experiment::{run_ablate, ExperimentConfig, ABLATION_HEADER};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cfg = ExperimentConfig::parse(
        "count=40\nheight=16\nwidth=16\nval_count=4\ntest_count=8\nlabeled_ratio=0.1\n\
         max_epochs=6\nwarmup_epochs=2\nfilter_interval=2\niters_per_epoch=3\nbatch_size=4\n\
         stage_channels=4,8\n",
    )?;
    let out = tempfile::tempdir()?;
    println!("{ABLATION_HEADER}");
    run_ablate(&cfg, &[1, 2], out.path(), |row| println!("{}", row.csv()))?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
