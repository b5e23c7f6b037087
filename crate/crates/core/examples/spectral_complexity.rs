//! Spectral complexity of smooth, textured and noisy images, and a
//! finite-difference check of its gradient.
//!
//!     cargo run --release --example spectral_complexity

use attr_forge::eval::toy::toy_dataset;
use attr_forge::grid::{ImageGrid, RngStream};
use attr_forge::guidance::{complexity_gradient, complexity_value, complexity_value_band, FrequencyBand};
use attr_forge::metrics::{glcm_features, GlcmParams};

fn main() -> attr_forge::Result<()> {
    let size = 32;
    let mut rng = RngStream::new(7, 0);
    let scene = toy_dataset(0, 1, size).remove(0);
    let checker = ImageGrid::from_fn(size, size, 1, |_, y, x| if (x / 2 + y / 2) % 2 == 0 { 0.8 } else { -0.8 });
    let noise = rng.uniform_image(size, size, 1, -1.0, 1.0);
    let glcm = GlcmParams::default();
    let high = FrequencyBand::HighPass { cutoff: 0.5 };

    println!("{:<12} {:>10} {:>12} {:>10}", "image", "L_c", "L_c (>0.5)", "contrast");
    for (name, img) in [
        ("constant", ImageGrid::filled(size, size, 1, 0.3)),
        ("background", scene.background.clone()),
        ("scene", scene.image.clone()),
        ("checker", checker),
        ("noise", noise),
    ] {
        let (contrast, _) = glcm_features(&img, &glcm)?;
        println!(
            "{name:<12} {:>10.2} {:>12.2} {:>10.4}",
            complexity_value(&img),
            complexity_value_band(&img, high),
            contrast
        );
    }

    // The analytic gradient against central differences at a few pixels.
    let x = &scene.image;
    let g = complexity_gradient(x);
    let h = 1e-5;
    for i in [0, 37, 511, 1000] {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        let fd = (complexity_value(&plus) - complexity_value(&minus)) / (2.0 * h);
        println!("pixel {i:>4}: analytic {:>10.5}, central difference {fd:>10.5}", g.data()[i]);
    }
    Ok(())
}
