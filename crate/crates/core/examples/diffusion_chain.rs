//! Forward noising, exact inversion and full reverse chains under a Gaussian
//! and an empirical prior.
//!
//!     cargo run --release --example diffusion_chain [OUT_DIR]

use std::path::PathBuf;

use attr_forge::diffusion::{
    estimate_x0, forward_sample, sample, EmpiricalDenoiser, GaussianDenoiser, NoiseSchedule,
};
use attr_forge::eval::toy::toy_dataset;
use attr_forge::grid::io::write_png;
use attr_forge::grid::{ImageGrid, RngStream};

fn main() -> attr_forge::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/diffusion_chain".into()));
    std::fs::create_dir_all(&out).map_err(|e| attr_forge::Error::io(&out, e))?;
    let sched = NoiseSchedule::scaled_linear(100)?;
    println!(
        "{} steps, beta {:.5} .. {:.5}, alpha_bar(T) = {:.4}",
        sched.steps(),
        sched.beta(1),
        sched.beta(sched.steps()),
        sched.alpha_bar(sched.steps())
    );

    let scenes = toy_dataset(5, 16, 32);
    let x0 = &scenes[0].image;
    let mut rng = RngStream::new(1, 0);
    for t in [10, 50, 100] {
        let eps = rng.normal_like(x0);
        let xt = forward_sample(x0, t, &eps, &sched)?;
        let back = estimate_x0(&xt, &eps, t, &sched)?;
        println!("t = {t:>3}: |x_t - x_0| mean {:.4}, inversion error {:.1e}", xt.mean_abs_diff(x0), back.max_abs_diff(x0));
        write_png(out.join(format!("noised-{t:03}.png")), &xt.clamped(-1.0, 1.0))?;
    }

    // A Gaussian prior: sample statistics should match its mean and variance.
    let mean = ImageGrid::new(1, 2, 1, vec![0.5, -0.5])?;
    let gauss = GaussianDenoiser::new(mean, 0.25)?;
    let draws: Vec<ImageGrid> = (0..500)
        .map(|i| sample(&gauss, (1, 2, 1), &sched, &mut RngStream::new(2, i)))
        .collect::<attr_forge::Result<_>>()?;
    for p in 0..2 {
        let v: Vec<f64> = draws.iter().map(|d| d.data()[p]).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        println!("gaussian prior, pixel {p}: mean {m:.3}, variance {var:.3} (target 0.25)");
    }

    // An empirical prior over sixteen scenes samples one of them.
    let data: Vec<ImageGrid> = scenes.iter().map(|s| s.image.clone()).collect();
    let den = EmpiricalDenoiser::new(data.clone())?;
    let x = sample(&den, (32, 32, 1), &sched, &mut RngStream::new(3, 0))?;
    let nearest = data
        .iter()
        .map(|d| d.mean_abs_diff(&x))
        .fold(f64::INFINITY, f64::min);
    println!("empirical prior sample: mean abs distance to nearest training image {nearest:.4}");
    write_png(out.join("empirical-sample.png"), &x.clamped(-1.0, 1.0))?;
    println!("images in {}", out.display());
    Ok(())
}
