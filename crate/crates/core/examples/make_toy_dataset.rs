//! Writes a toy scene set to disk in the layout `attr-forge generate` reads.
//!
//!     cargo run --release --example make_toy_dataset -- OUT_DIR [N] [SIZE] [SEED]

use std::path::PathBuf;

use attr_forge::eval::toy::{toy_dataset, write_toy_dataset, TOY_CLASSES};

fn main() -> attr_forge::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = PathBuf::from(args.first().map(String::as_str).unwrap_or("toy-data"));
    let n = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(12);
    let size = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(32);
    let seed = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let scenes = toy_dataset(seed, n, size);
    let list = write_toy_dataset(&dir, &scenes)?;
    println!("{n} scenes of {size}x{size} ({}) -> {}", TOY_CLASSES.join(", "), list.display());
    Ok(())
}
