//! Procedural toy scenes: one bright shape on a smooth background.

use std::f64::consts::PI;

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::grid::io::{write_atomic, write_mask_png, write_png};
use crate::grid::{ImageGrid, MaskGrid, RngStream};

pub const TOY_CLASSES: [&str; 4] = ["disk", "square", "diamond", "cross"];

#[derive(Debug, Clone)]
pub struct ToyScene {
    pub image: ImageGrid,
    pub mask: MaskGrid,
    /// The scene without its object.
    pub background: ImageGrid,
    pub label: usize,
}

pub fn toy_class_names() -> Vec<String> {
    TOY_CLASSES.iter().map(|s| s.to_string()).collect()
}

/// Sum of a few low-frequency plane waves around a dark base level.
pub fn smooth_background(size: usize, rng: &mut RngStream) -> ImageGrid {
    let base = rng.uniform_range(-0.6, -0.1);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.uniform_range(0.05, 0.2),
                rng.uniform_range(0.5, 2.0),
                rng.uniform_range(0.0, PI),
                rng.uniform_range(0.0, 2.0 * PI),
            )
        })
        .collect();
    let n = size as f64;
    ImageGrid::from_fn(size, size, 1, |_, y, x| {
        let (u, v) = (x as f64 / n, y as f64 / n);
        base + waves
            .iter()
            .map(|&(a, f, dir, ph)| a * (2.0 * PI * f * (u * dir.cos() + v * dir.sin()) + ph).sin())
            .sum::<f64>()
    })
}

/// Membership of offset `(dx, dy)` from the shape center at radius `r`.
fn inside(label: usize, dx: f64, dy: f64, r: f64) -> bool {
    match label {
        0 => dx * dx + dy * dy <= r * r,
        1 => dx.abs() <= r && dy.abs() <= r,
        2 => dx.abs() + dy.abs() <= r,
        _ => {
            let arm = r / 3.0;
            (dx.abs() <= r && dy.abs() <= arm) || (dy.abs() <= r && dx.abs() <= arm)
        }
    }
}

/// Area of the class shape at unit radius.
fn unit_area(label: usize) -> f64 {
    match label {
        0 => PI,
        1 => 4.0,
        2 => 2.0,
        _ => 20.0 / 9.0,
    }
}

/// Square scene of side `size` with an object of class `label` covering
/// 10–40% of the pixels, centered up to 2 px off.
pub fn toy_scene(size: usize, label: usize, rng: &mut RngStream) -> ToyScene {
    assert!(label < TOY_CLASSES.len());
    let background = smooth_background(size, rng);
    let rate = rng.uniform_range(0.10, 0.40);
    let r = (rate * (size * size) as f64 / unit_area(label)).sqrt();
    let c = (size as f64 - 1.0) / 2.0;
    let (cx, cy) = (c + rng.uniform_range(-2.0, 2.0), c + rng.uniform_range(-2.0, 2.0));
    let level = rng.uniform_range(0.4, 0.9);
    let grain_phase = rng.uniform_range(0.0, 2.0 * PI);
    let mask = MaskGrid::from_fn(size, size, |y, x| {
        if inside(label, x as f64 - cx, y as f64 - cy, r) {
            1.0
        } else {
            0.0
        }
    });
    let image = ImageGrid::from_fn(size, size, 1, |_, y, x| {
        if mask.is_on(y, x) {
            level + 0.05 * ((x + y) as f64 * 0.9 + grain_phase).sin()
        } else {
            background.get(0, y, x)
        }
    });
    ToyScene {
        image,
        mask,
        background,
        label,
    }
}

/// `n` scenes with labels cycling through the classes; scene `i` draws from
/// stream `i` of `seed`.
pub fn toy_dataset(seed: u64, n: usize, size: usize) -> Vec<ToyScene> {
    (0..n)
        .map(|i| toy_scene(size, i % TOY_CLASSES.len(), &mut RngStream::new(seed, i as u64)))
        .collect()
}

/// Writes `scenes` under `dir` as `images/`, `masks/` and `backgrounds/`
/// PNGs plus `list.csv` (`image,mask,label`, relative to `dir`). Returns the
/// list path.
pub fn write_toy_dataset(dir: &Path, scenes: &[ToyScene]) -> Result<PathBuf> {
    let mut list = String::from("image,mask,label\n");
    for (i, s) in scenes.iter().enumerate() {
        let (img, mask) = (format!("images/{i:04}.png"), format!("masks/{i:04}.png"));
        write_png(dir.join(&img), &s.image)?;
        write_mask_png(dir.join(&mask), &s.mask)?;
        write_png(dir.join(format!("backgrounds/{i:04}.png")), &s.background)?;
        list.push_str(&format!("{img},{mask},{}\n", s.label));
    }
    let path = dir.join("list.csv");
    write_atomic(&path, list.as_bytes())?;
    Ok(path)
}
