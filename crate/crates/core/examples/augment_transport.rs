// Weak and strong views of one sample, and a pseudo-label carried onto
// the strong view with the same geometric transform.

use std::error::Error;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use segssl::augment::{strong_augment, transport_label, weak_augment, GeoTransform, WeakAugConfig};
use segssl::data::{Image, LabelMap};

fn show(label: &LabelMap) {
    for y in 0..label.height() {
        let row: String = (0..label.width()).map(|x| if label.get(y, x) == 0 { '.' } else { '#' }).collect();
        println!("    {row}");
    }
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    // an L-shaped mask, so every rotation/flip looks different
    let mut mask = vec![0u8; 25];
    for i in [1, 6, 11, 16, 17, 18] {
        mask[i] = 1;
    }
    let label = LabelMap::new(5, 5, mask)?;
    let image = Image::new(5, 5, 1, label.data().iter().map(|&v| f32::from(v)).collect())?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (weak, weak_label) = weak_augment(&image, Some(&label), &WeakAugConfig::default(), &mut rng)?;
    let weak_label = weak_label.expect("label given");
    println!("weak view label (translation only):");
    show(&weak_label);

    let (strong, t) = strong_augment(&weak, &mut rng)?;
    let moved = transport_label(&weak_label, &t)?;
    println!("strong transform {t:?}; transported label:");
    show(&moved);
    assert_eq!(t.apply_image(&weak)?, strong);
    assert_eq!(transport_label(&moved, &t.inverse())?, weak_label);

    println!("every rotation/flip combination of the original:");
    for t in GeoTransform::all() {
        println!("  {t:?}");
        show(&transport_label(&label, &t)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
