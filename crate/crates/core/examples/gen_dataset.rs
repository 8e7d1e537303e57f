// Generates a small synthetic corpus, splits it, writes it to disk and
// reads it back.
//
// ```text
// cargo run --example gen_dataset [OUT_DIR]
// ```

use std::error::Error;

use segssl::data::{generate_synthetic, load_dataset, save_dataset, split_dataset, GenConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let out = match std::env::args().nth(1) {
        Some(p) => std::path::PathBuf::from(p),
        None => std::env::temp_dir().join("segssl_gen_dataset"),
    };
    let gen = GenConfig {
        count: 40,
        height: 16,
        width: 16,
        ..GenConfig::default()
    };
    let samples = generate_synthetic(&gen, 3)?;
    let split = split_dataset(samples, gen.num_classes, 0.1, 5, 5, 3)?;
    save_dataset(&split, &out)?;

    let back = load_dataset(&out, true)?;
    println!(
        "labeled {} / unlabeled {} / validation {} / test {}",
        back.labeled.len(),
        back.unlabeled.len(),
        back.validation.len(),
        back.test.len()
    );
    let first = &back.labeled[0];
    let label = first.label().expect("labeled");
    for y in 0..label.height() {
        let row: String = (0..label.width()).map(|x| char::from(b'0' + label.get(y, x))).collect();
        println!("  {row}");
    }
    assert_eq!(back.labeled[0].image, split.labeled[0].image);
    println!("written to {}", out.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
