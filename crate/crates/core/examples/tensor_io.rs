// Round-trips images, labels and probability maps through the binary
// tensor format and shows the header bytes.

use std::error::Error;

use segssl::data::{load_tensor, save_tensor, Image, LabelMap, ProbMap, Tensor};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let image = Image::new(2, 3, 1, vec![0.0, 0.5, 1.0, -1.0, 2.5, 3.0])?;
    let label = LabelMap::new(2, 3, vec![0, 1, 1, 0, 2, 2])?;
    let probs = ProbMap::new(1, 2, 2, vec![0.25, 0.75, 1.0, 0.0])?;

    for (name, t) in [
        ("image", Tensor::from(&image)),
        ("label", Tensor::from(&label)),
        ("probs", Tensor::from(&probs)),
    ] {
        let path = dir.path().join(format!("{name}.segt"));
        save_tensor(&t, &path)?;
        let bytes = std::fs::read(&path)?;
        println!("{name}: {} bytes, header {:02x?}", bytes.len(), &bytes[..10]);
        assert_eq!(load_tensor(&path)?, t);
    }
    let back = Image::try_from(load_tensor(dir.path().join("image.segt"))?)?;
    assert_eq!(back, image);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
