// Short SSL_AL run on a small synthetic split: supervised warm-up,
// weak-to-strong pseudo-label batches, then entropy filtering every few
// epochs. Prints the history CSV and the filter log.

use std::error::Error;

use segssl::data::{generate_synthetic, split_dataset, GenConfig};
use segssl::ssl::{filter_events_csv, history_csv, train, Mode, TrainConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let gen = GenConfig {
        count: 40,
        height: 16,
        width: 16,
        ..GenConfig::default()
    };
    let split = split_dataset(generate_synthetic(&gen, 1)?, 3, 0.1, 4, 4, 1)?;
    let config = TrainConfig {
        mode: Mode::SslAl,
        max_epochs: 12,
        warmup_epochs: 3,
        filter_interval: 4,
        drop_fraction: 0.25,
        batch_size: 4,
        iters_per_epoch: 4,
        stage_channels: vec![4, 8],
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(&config, &split)?;
    print!("{}", history_csv(&out.history));
    print!("{}", filter_events_csv(&out.filter_events));
    println!(
        "{} of {} unlabeled samples still active",
        out.active_unlabeled.len(),
        split.unlabeled.len()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
