// Contrast-to-noise, signal-to-noise and foreground ratio of a synthetic
// corpus at two noise levels.

use std::error::Error;

use segssl::data::{generate_synthetic, GenConfig};
use segssl::datastats::{analyze_dataset, DatasetStats};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    println!("{}", DatasetStats::CSV_HEADER);
    for sigma in [0.4f32, 0.8] {
        let gen = GenConfig {
            count: 50,
            noise_sigma: sigma,
            ..GenConfig::default()
        };
        let stats = analyze_dataset(&generate_synthetic(&gen, 1)?)?;
        println!("{}", stats.csv_row(&format!("synthetic_sigma{sigma}")));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
