// Checks the analytic gradient of the combined cross-entropy + soft Dice
// loss against central differences over every network parameter, on a
// batch with one labeled and one pseudo-labeled sample.
//
// ```text
// cargo run --release --example gradient_check [SIZE]
// ```

use std::error::Error;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use segssl::augment::WeakAugConfig;
use segssl::data::{generate_synthetic, GenConfig};
use segssl::network::{init_network, NetworkSpec};
use segssl::ssl::gradcheck::check_gradients;
use segssl::ssl::{pseudo_label_pair, BatchItem};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let size: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    let gen = GenConfig {
        count: 2,
        height: size,
        width: size,
        ..GenConfig::default()
    };
    let samples = generate_synthetic(&gen, 1)?;
    let params = init_network(&NetworkSpec::default(), 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let labeled = BatchItem {
        image: samples[0].image.clone(),
        target: samples[0].label().expect("labeled").clone(),
        pseudo: false,
    };
    let (pseudo, _) = pseudo_label_pair(&params, &samples[1].image, &WeakAugConfig::default(), &mut rng)?;

    let start = std::time::Instant::now();
    let r = check_gradients(&params, &[labeled, pseudo], 1e-5)?;
    println!(
        "{} parameters, max relative error {:.3e} at #{} (analytic {:.6e}, numeric {:.6e}), {:.1?}",
        r.params_checked,
        r.max_rel_error,
        r.worst_index,
        r.analytic_at_worst,
        r.numeric_at_worst,
        start.elapsed()
    );
    assert!(r.max_rel_error < 1e-4);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
