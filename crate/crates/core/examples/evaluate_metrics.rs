// Dice, IoU, 95th-percentile Hausdorff and average surface distance on
// hand-made masks.

use std::error::Error;

use segssl::data::LabelMap;
use segssl::metrics::{evaluate, extract_surface};

fn square(n: usize, top: usize, left: usize, side: usize, class: u8) -> Vec<u8> {
    let mut v = vec![0u8; n * n];
    for y in top..top + side {
        for x in left..left + side {
            v[y * n + x] = class;
        }
    }
    v
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let n = 12;
    let gt = LabelMap::new(n, n, square(n, 2, 2, 6, 1))?;
    let pred = LabelMap::new(n, n, square(n, 3, 3, 6, 1))?;
    println!("surface points: gt {}, pred {}", extract_surface(&gt).len(), extract_surface(&pred).len());

    let r = evaluate(&pred, &gt, 3)?;
    for c in &r.per_class {
        println!(
            "class {}: dice {:.2} iou {:.2} hd95 {:?} asd {:?} ({})",
            c.class_id,
            c.dice,
            c.iou,
            c.hd95,
            c.asd,
            c.flag.as_str()
        );
    }
    // overlap 5x5 = 25 of 36 each: dice = 2*25/72
    assert!((r.per_class[0].dice - 100.0 * 50.0 / 72.0).abs() < 1e-9);
    let iou = r.per_class[0].iou;
    assert!((r.per_class[0].dice - 200.0 * iou / (100.0 + iou)).abs() < 1e-9);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
