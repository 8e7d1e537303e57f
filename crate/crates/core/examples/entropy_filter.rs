// Pseudo-labels, per-image entropy and one reverse-filtering round on an
// untrained network: the most confident unlabeled images are dropped.

use std::error::Error;

use segssl::data::{generate_synthetic, GenConfig};
use segssl::network::{init_network, predict, NetworkSpec};
use segssl::ssl::{filter_unlabeled, image_entropy, make_pseudo_label, UncertaintyScore};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let gen = GenConfig {
        count: 8,
        height: 16,
        width: 16,
        ..GenConfig::default()
    };
    let samples = generate_synthetic(&gen, 2)?;
    let params = init_network(&NetworkSpec::default(), 5)?;

    let mut scores = Vec::new();
    for s in &samples {
        let p = predict(&params, &s.image)?;
        let pseudo = make_pseudo_label(&p);
        let fg = pseudo.data().iter().filter(|&&v| v != 0).count();
        let h = image_entropy(&p);
        println!("{}: entropy {h:.4} nats, pseudo foreground {fg} px", s.id);
        scores.push(UncertaintyScore::new(s.id.clone(), h));
    }
    let out = filter_unlabeled(&scores, 0.25);
    for d in &out.dropped {
        println!("dropped {} ({:.4})", d.sample_id, d.score);
    }
    println!("retained {:?}", out.retained);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
