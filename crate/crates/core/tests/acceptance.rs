//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use attr_forge::diffusion::{
    blended_chain, eps_empirical, estimate_x0, forward_sample, reverse_step, sample, GaussianDenoiser,
    NoiseSchedule,
};
use attr_forge::editor::{
    apply_edit, composite_edit_traced, generate_suite, generate_variants, transform_matrix,
    EditContext, EditKind, EditSpec, EditorPrior, Geometry, SceneDecomposition, SizeTarget, SuiteConfig,
    SuiteModels, SuiteVariant, VARIANT_NAMES,
};
use attr_forge::eval::toy::{toy_class_names, toy_dataset, write_toy_dataset, ToyScene};
use attr_forge::eval::{
    evaluate_images, ood_report, train_toy_classifier, AttributeReport, FeatureMap, Inference,
    ToyClassifier, TrainConfig, DEFAULT_CROP_FRACTION, ORIGINAL,
};
use attr_forge::diffusion::EmpiricalDenoiser;
use attr_forge::grid::{AffineMatrix, ImageGrid, MaskGrid, ObjectRect, RngStream};
use attr_forge::guidance::{
    adversarial_gradient, adversarial_value, background_edit, background_edit_traced, complexity_gradient,
    complexity_value, FrequencyBand, GuidanceConfig, SpectralComplexity,
};
use attr_forge::math::mean_se;
use attr_forge::metrics::{energy_score, frechet_distance, glcm_features, FeatureStats, GlcmParams};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- 1

fn diffusion_correctness() -> Outcome {
    let start = Instant::now();
    let sched = NoiseSchedule::scaled_linear(100).map_err(err)?;
    // Pixel sd 0.5, the scale of images in [-1, 1].
    let target = ImageGrid::new(2, 2, 1, vec![0.5, -0.3, 0.1, -0.8]).map_err(err)?;
    let var = 0.25;
    let den = GaussianDenoiser::new(target.clone(), var).map_err(err)?;
    let n = 2000;
    let draws: Vec<ImageGrid> = (0..n)
        .map(|i| sample(&den, (2, 2, 1), &sched, &mut RngStream::new(11, i)))
        .collect::<attr_forge::Result<_>>()
        .map_err(err)?;
    let mut worst_mean = 0.0f64;
    let mut pooled = 0.0;
    for p in 0..4 {
        let xs: Vec<f64> = draws.iter().map(|d| d.data()[p]).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        pooled += xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64 / 4.0;
        worst_mean = worst_mean.max((m - target.data()[p]).abs());
    }
    let worst_var = (pooled / var - 1.0).abs();
    ensure(worst_mean <= 0.05, format!("mean error {worst_mean:.4}"))?;
    ensure(worst_var <= 0.10, format!("variance error {:.1}%", worst_var * 100.0))?;

    // Forward sample, then invert it with the true noise, at every level.
    let mut rng = RngStream::new(12, 0);
    let mut worst_rt = 0.0f64;
    for t in 1..=100 {
        let x0 = rng.uniform_image(4, 4, 3, -1.0, 1.0);
        let eps = rng.normal_like(&x0);
        let xt = forward_sample(&x0, t, &eps, &sched).map_err(err)?;
        let back = estimate_x0(&xt, &eps, t, &sched).map_err(err)?;
        worst_rt = worst_rt.max(back.max_abs_diff(&x0));
    }
    ensure(worst_rt <= 1e-9, format!("round trip error {worst_rt:e}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 120.0, format!("took {secs:.1}s"))?;
    Ok(format!(
        "mean err {worst_mean:.4}, var err {:.2}%, round trip {worst_rt:.1e}, {secs:.1}s",
        worst_var * 100.0
    ))
}

// ---------------------------------------------------------------- 2

fn denoiser_optimality() -> Outcome {
    let start = Instant::now();
    let sched = NoiseSchedule::scaled_linear(100).map_err(err)?;
    let data: Vec<ImageGrid> = [[-0.8, -0.5], [0.7, 0.0], [0.0, 0.9]]
        .iter()
        .map(|p| ImageGrid::new(1, 2, 1, p.to_vec()).unwrap())
        .collect();
    let mut rng = RngStream::new(21, 0);
    let n = 10_000;
    // Perturbations: ε̂·(1 ± 0.1), and each coordinate alone by ±10%.
    let perturb: Vec<[f64; 2]> = vec![
        [1.1, 1.1],
        [0.9, 0.9],
        [1.1, 1.0],
        [0.9, 1.0],
        [1.0, 1.1],
        [1.0, 0.9],
    ];
    let mut diffs = vec![Vec::with_capacity(n); perturb.len()];
    for _ in 0..n {
        let x0 = &data[rng.below(3)];
        let t = 1 + rng.below(100);
        let eps = rng.normal_like(x0);
        let xt = forward_sample(x0, t, &eps, &sched).map_err(err)?;
        let pred = eps_empirical(&xt, t, &data, &sched).map_err(err)?.eps_pred;
        let loss = |k: &[f64; 2]| -> f64 {
            pred.data()
                .iter()
                .zip(eps.data())
                .zip(k)
                .map(|((p, e), k)| (k * p - e).powi(2))
                .sum()
        };
        let base = loss(&[1.0, 1.0]);
        for (d, k) in diffs.iter_mut().zip(&perturb) {
            d.push(loss(k) - base);
        }
    }
    let mut worst = f64::INFINITY;
    for (d, k) in diffs.iter().zip(&perturb) {
        let (m, se) = mean_se(d);
        let z = m / se;
        ensure(z >= 3.0, format!("perturbation {k:?}: margin {m:.2e} is only {z:.2} SE"))?;
        worst = worst.min(z);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("{} perturbed predictors lose by >= {worst:.1} SE, {secs:.1}s", perturb.len()))
}

// ---------------------------------------------------------------- 3

fn random_classifier(seed: u64) -> ToyClassifier {
    let mut rng = RngStream::new(seed, 0);
    let fm = FeatureMap::default();
    let d = fm.dim(1);
    let k = 4;
    ToyClassifier {
        feature_map: fm,
        channels: 1,
        classes: toy_class_names(),
        feature_mean: (0..d).map(|_| 0.1 * rng.normal()).collect(),
        feature_std: (0..d).map(|_| rng.uniform_range(0.5, 1.5)).collect(),
        weights: (0..k * d).map(|_| 0.3 * rng.normal()).collect(),
        bias: (0..k).map(|_| rng.normal()).collect(),
    }
}

fn directional_fd(f: &dyn Fn(&ImageGrid) -> f64, x: &ImageGrid, v: &ImageGrid, h: f64) -> f64 {
    let mut plus = x.clone();
    plus.add_scaled(v, h);
    let mut minus = x.clone();
    minus.add_scaled(v, -h);
    (f(&plus) - f(&minus)) / (2.0 * h)
}

fn gradient_fidelity() -> Outcome {
    let clf = random_classifier(31);
    let mut rng = RngStream::new(32, 0);
    let (images, probes) = (20, 10);
    let mut worst_c = 0.0f64;
    let mut worst_a = 0.0f64;
    for i in 0..images {
        let x = rng.uniform_image(8, 8, 1, -1.0, 1.0);
        let label = i % 4;
        let gc = complexity_gradient(&x);
        let ga = adversarial_gradient(&x, &clf, label).map_err(err)?;
        let fc = |y: &ImageGrid| complexity_value(y);
        let fa = |y: &ImageGrid| adversarial_value(y, &clf, label).unwrap();
        for _ in 0..probes {
            let i = rng.below(x.len());
            let mut v = x.zeros_like();
            v.data_mut()[i] = 1.0;
            let (an, fd) = (gc.data()[i], directional_fd(&fc, &x, &v, 1e-5));
            worst_c = worst_c.max((an - fd).abs() / fd.abs().max(1e-8));
            let (an, fd) = (ga.data()[i], directional_fd(&fa, &x, &v, 1e-5));
            worst_a = worst_a.max((an - fd).abs() / fd.abs().max(1e-8));
        }
    }
    ensure(worst_c <= 1e-4, format!("complexity gradient rel err {worst_c:e}"))?;
    ensure(worst_a <= 1e-4, format!("adversarial gradient rel err {worst_a:e}"))?;
    Ok(format!(
        "{images} images x {probes} pixel probes; rel err complexity {worst_c:.1e}, adversarial {worst_a:.1e}"
    ))
}

// ---------------------------------------------------------------- 4

fn guided_steering() -> Outcome {
    let start = Instant::now();
    let sched = NoiseSchedule::scaled_linear(100).map_err(err)?;
    let lib: Vec<ImageGrid> = toy_dataset(3, 32, 32).into_iter().map(|s| s.image).collect();
    let scenes = toy_dataset(40, 50, 32);
    let suite = SuiteConfig::default();
    let objective = SpectralComplexity::new(FrequencyBand::All);
    let glcm = GlcmParams::default();
    let lambdas = [-20.0, 0.0, 20.0];
    let mut lc = vec![Vec::new(); 3];
    let mut contrast = vec![Vec::new(); 3];
    for (run, s) in scenes.iter().enumerate() {
        let editor = EditorPrior::Library(&lib).denoiser(&s.image, &suite).map_err(err)?;
        for (j, &lambda) in lambdas.iter().enumerate() {
            let cfg = GuidanceConfig::new(lambda, suite.t0_background);
            let mut rng = RngStream::new(run as u64, 4);
            let out = background_edit(&s.image, &s.mask, editor.as_ref(), &objective, &cfg, &sched, &mut rng)
                .map_err(err)?;
            if lambda == 0.0 {
                let mut rng = RngStream::new(run as u64, 4);
                let plain = blended_chain(
                    &s.image,
                    &s.image,
                    &s.mask,
                    suite.t0_background,
                    &sched,
                    &mut rng,
                    |x, t, rng| reverse_step(x, editor.as_ref(), t, &sched, rng),
                    &mut |_| {},
                )
                .map_err(err)?;
                ensure(plain == out, format!("run {run}: lambda 0 differs from the unguided sampler"))?;
            }
            lc[j].push(complexity_value(&out));
            contrast[j].push(glcm_features(&out, &glcm).map_err(err)?.0);
        }
    }
    let mut parts = Vec::new();
    for (name, v) in [("L_c", &lc), ("contrast", &contrast)] {
        let s: Vec<(f64, f64)> = v.iter().map(|x| mean_se(x)).collect();
        for (lo, hi) in [(0, 1), (1, 2)] {
            let gap = s[hi].0 - s[lo].0;
            let se = (s[hi].1.powi(2) + s[lo].1.powi(2)).sqrt();
            ensure(
                gap >= 2.0 * se,
                format!("{name}: lambda {} vs {} gap {gap:.4} < 2 SE ({se:.4})", lambdas[hi], lambdas[lo]),
            )?;
        }
        parts.push(format!(
            "{name} {:.4}/{:.4}/{:.4}",
            s[0].0, s[1].0, s[2].0
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 600.0, format!("took {secs:.1}s"))?;
    Ok(format!("50 runs, means at -20/0/+20: {}; {secs:.1}s", parts.join(", ")))
}

// ---------------------------------------------------------------- 5

fn blend_anchoring() -> Outcome {
    let sched = NoiseSchedule::scaled_linear(100).map_err(err)?;
    let scenes = toy_dataset(50, 6, 32);
    let bgs: Vec<ImageGrid> = toy_dataset(4, 16, 32).into_iter().map(|s| s.background).collect();
    let den = EmpiricalDenoiser::new(bgs.clone()).map_err(err)?;
    let mut steps = 0usize;
    let mut worst_final = 0.0f64;
    for (i, s) in scenes.iter().enumerate() {
        let rect = attr_forge::grid::bbox(&s.mask).map_err(err)?;
        let t = transform_matrix(&Geometry::Scale { s: 0.7 }, rect).map_err(err)?;
        let decomp = SceneDecomposition::transformed(&s.image, &s.mask, bgs[i].clone(), &t).map_err(err)?;
        let mut bad = None;
        let mut observer = |b: &attr_forge::diffusion::BlendStep<'_>| {
            steps += 1;
            for y in 0..32 {
                for x in 0..32 {
                    if decomp.mask.is_on(y, x) && b.latent.get(0, y, x) != b.noised_anchor.get(0, y, x) {
                        bad.get_or_insert(b.t);
                    }
                }
            }
        };
        let mut rng = RngStream::new(i as u64, 5);
        let out = composite_edit_traced(&decomp, &den, 25, &sched, &mut rng, &mut observer).map_err(err)?;
        if let Some(t) = bad {
            return Err(format!("scene {i}: object region drifted at step {t}"));
        }
        worst_final = worst_final.max(masked_mean_abs(&out, &decomp.object, &decomp.mask));

        // Same check for guided background edits.
        let editor = EmpiricalDenoiser::new(vec![s.image.clone()]).map_err(err)?;
        let cfg = GuidanceConfig::new(20.0, 50);
        let mut bad = None;
        let mut observer = |b: &attr_forge::diffusion::BlendStep<'_>| {
            steps += 1;
            for y in 0..32 {
                for x in 0..32 {
                    if s.mask.is_on(y, x) && b.latent.get(0, y, x) != b.noised_anchor.get(0, y, x) {
                        bad.get_or_insert(b.t);
                    }
                }
            }
        };
        let mut rng = RngStream::new(i as u64, 6);
        let out = background_edit_traced(
            &s.image,
            &s.mask,
            &editor,
            &SpectralComplexity::new(FrequencyBand::All),
            &cfg,
            &sched,
            &mut rng,
            &mut observer,
        )
        .map_err(err)?;
        if let Some(t) = bad {
            return Err(format!("scene {i}: background edit object drifted at step {t}"));
        }
        worst_final = worst_final.max(masked_mean_abs(&out, &s.image, &s.mask));
    }
    ensure(worst_final <= 0.1, format!("final object error {worst_final}"))?;
    Ok(format!("{steps} blended steps bit-exact; final masked error {worst_final:.2e}"))
}

fn masked_mean_abs(a: &ImageGrid, b: &ImageGrid, mask: &MaskGrid) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for c in 0..a.channels() {
        for y in 0..a.height() {
            for x in 0..a.width() {
                if mask.is_on(y, x) {
                    s += (a.get(c, y, x) - b.get(c, y, x)).abs();
                    n += 1;
                }
            }
        }
    }
    s / n.max(1) as f64
}

// ---------------------------------------------------------------- 6

fn geometry() -> Outcome {
    let rect = ObjectRect::new(10, 20, 40, 60);
    let t = transform_matrix(&Geometry::Scale { s: 0.5 }, rect).map_err(err)?;
    let (dx, dy) = (t.entries()[2], t.entries()[5]);
    ensure((dx, dy) == (15.0, 25.0), format!("translation ({dx}, {dy}), expected (15, 25)"))?;
    // Exact whenever the arithmetic is: dyadic scales, half-integer centers.
    let mut rng = RngStream::new(61, 0);
    let mut drift = 0.0f64;
    for _ in 0..200 {
        let r = ObjectRect::new(rng.below(40), rng.below(40), 1 + rng.below(40), 1 + rng.below(40));
        let (cx, cy) = r.center();
        let s = (1 + rng.below(64)) as f64 / 16.0;
        let m = transform_matrix(&Geometry::Scale { s }, r).map_err(err)?;
        ensure(m.apply(cx, cy) == (cx, cy), format!("center of {r:?} moved under s = {s}"))?;
        let s = rng.uniform_range(0.2, 3.0);
        let m = transform_matrix(&Geometry::Scale { s }, r).map_err(err)?;
        let (x, y) = m.apply(cx, cy);
        drift = drift.max((x - cx).abs().max((y - cy).abs()));
    }
    ensure(drift <= 1e-12, format!("center drift {drift:e} under arbitrary scales"))?;

    let scenes = toy_dataset(60, 20, 32);
    let mut worst_area = 0.0f64;
    for s in &scenes {
        let rect = attr_forge::grid::bbox(&s.mask).map_err(err)?;
        let n0 = s.mask.count_on() as f64;
        for scale in [0.5, 0.75, 1.25] {
            let (cx, cy) = rect.center();
            let t = AffineMatrix::scale_about(scale, cx, cy);
            let m = SceneDecomposition::transformed(&s.image, &s.mask, s.background.clone(), &t)
                .map_err(err)?
                .mask;
            let ratio = m.count_on() as f64 / n0;
            let b = attr_forge::grid::bbox(&m).map_err(err)?;
            let (bx, by) = b.center();
            ensure(
                (bx - cx).abs() <= 1.0 && (by - cy).abs() <= 1.0,
                format!("resized mask drifted to ({bx}, {by}) from ({cx}, {cy})"),
            )?;
            worst_area = worst_area.max((ratio / (scale * scale) - 1.0).abs());
        }
    }
    ensure(worst_area <= 0.10, format!("area ratio off s^2 by {:.1}%", worst_area * 100.0))?;

    let sched = NoiseSchedule::scaled_linear(100).map_err(err)?;
    let bgs: Vec<ImageGrid> = toy_dataset(4, 8, 32).into_iter().map(|s| s.background).collect();
    let inpainter = EmpiricalDenoiser::new(bgs.clone()).map_err(err)?;
    let clf = random_classifier(62);
    let mut worst_rate = 0.0f64;
    for (i, s) in scenes.iter().enumerate() {
        let editor = EmpiricalDenoiser::new(vec![s.image.clone()]).map_err(err)?;
        let ctx = EditContext {
            sched: &sched,
            editor: &editor,
            inpainter: &inpainter,
            backgrounds: &bgs,
            policy: Default::default(),
            adversary: Some((&clf, s.label)),
            band: FrequencyBand::All,
            guidance_unit: None,
            adversarial_unit: None,
            remove_t0: Some(50),
        };
        for rate in [0.1, 0.08, 0.05] {
            let spec = EditSpec {
                edit: EditKind::Size { size: SizeTarget::Rate { rate } },
                t0: 25,
                seed: i as u64,
            };
            let out = apply_edit(&s.image, &s.mask, &spec, &ctx).map_err(err)?;
            let got = attr_forge::grid::pixel_rate(&out.mask);
            worst_rate = worst_rate.max((got / rate - 1.0).abs());
        }
    }
    ensure(worst_rate <= 0.10, format!("pixel rate off by {:.1}%", worst_rate * 100.0))?;
    Ok(format!(
        "(15, 25) exact; centers fixed exactly on dyadic scales, within {drift:.0e} otherwise; area vs s^2 within {:.1}%, rates within {:.1}%",
        worst_area * 100.0,
        worst_rate * 100.0
    ))
}

// ---------------------------------------------------------------- shared toy setup

struct Toy {
    clf: ToyClassifier,
    test: Vec<ToyScene>,
    library: Vec<ImageGrid>,
    backgrounds: Vec<ImageGrid>,
}

fn toy_setup() -> Result<Toy, String> {
    let train: Vec<(ImageGrid, usize)> =
        toy_dataset(1, 600, 32).into_iter().map(|s| (s.image, s.label)).collect();
    let (clf, _) = train_toy_classifier(&train, toy_class_names(), FeatureMap::default(), &TrainConfig::default())
        .map_err(err)?;
    Ok(Toy {
        clf,
        test: toy_dataset(2, 200, 32),
        library: toy_dataset(3, 32, 32).into_iter().map(|s| s.image).collect(),
        backgrounds: toy_dataset(4, 32, 32).into_iter().map(|s| s.background).collect(),
    })
}

fn toy_suites(toy: &Toy) -> Result<Vec<Vec<SuiteVariant>>, String> {
    let sched = NoiseSchedule::scaled_linear(100).map_err(err)?;
    let models = SuiteModels {
        editor: EditorPrior::Library(&toy.library),
        backgrounds: &toy.backgrounds,
        adversary: &toy.clf,
    };
    let config = SuiteConfig::default();
    toy.test
        .iter()
        .enumerate()
        .map(|(i, s)| generate_suite(&s.image, &s.mask, s.label, i as u64, &models, &config, &sched).map_err(err))
        .collect()
}

// ---------------------------------------------------------------- 7

fn suite_integrity(toy: &Toy, suites: &[Vec<SuiteVariant>], bin: &Path, work: &Path) -> Outcome {
    for v in suites {
        let names: Vec<&str> = v.iter().map(|x| x.name).collect();
        ensure(names == VARIANT_NAMES, format!("variant names {names:?}"))?;
    }
    let sched = NoiseSchedule::scaled_linear(100).map_err(err)?;
    let models = SuiteModels {
        editor: EditorPrior::Library(&toy.library),
        backgrounds: &toy.backgrounds,
        adversary: &toy.clf,
    };
    let config = SuiteConfig::default();
    for i in [0usize, 7, 123] {
        let s = &toy.test[i];
        let again = generate_suite(&s.image, &s.mask, s.label, i as u64, &models, &config, &sched).map_err(err)?;
        ensure(again == suites[i], format!("scene {i}: rerun differs"))?;
        let part = generate_variants(&s.image, &s.mask, s.label, i as u64, &models, &config, &sched, &["rp", "inver"])
            .map_err(err)?;
        ensure(part[0] == suites[i][9] && part[1] == suites[i][0], format!("scene {i}: subset differs"))?;
    }

    // Resume through the command line: delete outputs, rerun, compare.
    let dir = work.join("resume");
    let (list, out) = cli_fixture(bin, &dir, 3)?;
    let generate = |d: &Path| cli(bin, &generate_args(&list, &d.join("out"), &dir), &dir);
    generate(&dir)?;
    let before = snapshot(&out)?;
    let files = before.keys().filter(|k| k.ends_with(".png")).count();
    ensure(files == 33 && before.contains_key("manifest.json"), format!("{files} variant files"))?;
    let keep = out.join("0000-0000/inver.png");
    let keep_ino = inode(&keep)?;
    std::fs::remove_file(out.join("0001-0001/rp.png")).map_err(err)?;
    std::fs::remove_file(out.join("0002-0002/size-0.05.png")).map_err(err)?;
    generate(&dir)?;
    ensure(snapshot(&out)? == before, "resumed run differs from the first run")?;
    ensure(inode(&keep)? == keep_ino, "an up-to-date output was rewritten")?;
    Ok("11 canonical variants on 200 scenes; reruns and subsets identical; CLI resume restores 33 files + manifest byte-for-byte".into())
}

#[cfg(unix)]
fn inode(p: &Path) -> Result<u64, String> {
    use std::os::unix::fs::MetadataExt;
    Ok(std::fs::metadata(p).map_err(err)?.ino())
}

#[cfg(not(unix))]
fn inode(p: &Path) -> Result<u64, String> {
    std::fs::metadata(p).map(|_| 0).map_err(err)
}

// ---------------------------------------------------------------- 8

fn da_identity(report: &AttributeReport) -> Result<(), String> {
    let csv = report.to_csv();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().ok_or("empty CSV")?.split(',').collect();
    ensure(header[..4] == ["variant", "n", "top1", "da"], format!("header {header:?}"))?;
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    ensure(rows.len() == VARIANT_NAMES.len() + 1, format!("{} rows", rows.len()))?;
    ensure(rows[0][0] == ORIGINAL, "first row is not the original")?;
    let num = |s: &str| s.parse::<f64>().map_err(err);
    let orig = num(rows[0][2])?;
    for r in &rows {
        let (top1, da) = (num(r[2])?, num(r[3])?);
        ensure(da == orig - top1, format!("{}: da {da} != {orig} - {top1}", r[0]))?;
    }
    for r in &report.rows {
        ensure(r.da == report.rows[0].top1 - r.top1, format!("{}: JSON da mismatch", r.variant))?;
    }
    Ok(())
}

fn evaluation(toy: &Toy, suites: &[Vec<SuiteVariant>]) -> Result<(Outcome, AttributeReport), String> {
    let items: Vec<(ImageGrid, usize, Vec<(String, ImageGrid)>)> = toy
        .test
        .iter()
        .zip(suites)
        .map(|(s, v)| {
            (
                s.image.clone(),
                s.label,
                v.iter().map(|x| (x.name.to_string(), x.image.clone())).collect(),
            )
        })
        .collect();
    let classes = toy_class_names();
    let single = evaluate_images(&toy.clf, &classes, &items, Inference::Single).map_err(err)?;
    let ten = evaluate_images(
        &toy.clf,
        &classes,
        &items,
        Inference::TenCrop {
            crop_fraction: DEFAULT_CROP_FRACTION,
        },
    )
    .map_err(err)?;
    let outcome = (|| {
        da_identity(&single)?;
        da_identity(&ten)?;
        let da = |n: &str| single.row(n).map(|r| r.da).unwrap_or(f64::NAN);
        let sizes = ["size-full", "size-0.1", "size-0.08", "size-0.05"].map(da);
        ensure(
            sizes.windows(2).all(|w| w[0] <= w[1]),
            format!("size DA not monotone: {sizes:?}"),
        )?;
        let (a1, a10) = (single.rows[0].top1, ten.rows[0].top1);
        ensure(a10 >= a1 - 0.01, format!("ten-crop {a10} < single {a1} - 1%"))?;
        Ok(format!(
            "{} scenes; DA identity holds; size DA {:.3} -> {:.3} -> {:.3} -> {:.3}; accuracy single {a1:.3}, ten-crop {a10:.3}",
            toy.test.len(),
            sizes[0],
            sizes[1],
            sizes[2],
            sizes[3]
        ))
    })();
    Ok((outcome, single))
}

// ---------------------------------------------------------------- 9

fn ood(toy: &Toy, suites: &[Vec<SuiteVariant>]) -> Outcome {
    let originals: Vec<ImageGrid> = toy.test.iter().map(|s| s.image.clone()).collect();
    let inver: Vec<ImageGrid> = suites.iter().map(|v| v[0].image.clone()).collect();
    let mut rng = RngStream::new(91, 0);
    let noise: Vec<ImageGrid> = (0..originals.len()).map(|_| rng.normal_image(32, 32, 1)).collect();
    let near = ood_report(&toy.clf, &originals, &inver, 20).map_err(err)?;
    let far = ood_report(&toy.clf, &originals, &noise, 20).map_err(err)?;
    ensure(near.energy_overlap >= 0.8, format!("Inver energy overlap {}", near.energy_overlap))?;
    ensure(near.gradnorm_overlap >= 0.8, format!("Inver GradNorm overlap {}", near.gradnorm_overlap))?;
    ensure(far.energy_overlap <= 0.3, format!("noise energy overlap {}", far.energy_overlap))?;
    ensure(far.gradnorm_overlap <= 0.3, format!("noise GradNorm overlap {}", far.gradnorm_overlap))?;

    // E(z + c) = E(z) + c, up to the final rounding.
    let mut worst_ulps = 0.0f64;
    for _ in 0..1000 {
        let z: Vec<f64> = (0..5).map(|_| 10.0 * rng.normal()).collect();
        let c = 50.0 * rng.normal();
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        let a = energy_score(&z, 1.0).map_err(err)?.value + c;
        let b = energy_score(&shifted, 1.0).map_err(err)?.value;
        let ulp = f64::EPSILON * a.abs().max(b.abs()).max(c.abs());
        worst_ulps = worst_ulps.max((a - b).abs() / ulp);
    }
    ensure(worst_ulps <= 8.0, format!("energy shift off by {worst_ulps} ulps"))?;

    let mut worst = 0.0f64;
    for _ in 0..20 {
        let set = |rng: &mut RngStream, n: usize| -> Vec<Vec<f64>> {
            let shift = rng.normal();
            (0..n).map(|_| (0..4).map(|_| rng.normal() + shift).collect()).collect()
        };
        let a = FeatureStats::from_samples(&set(&mut rng, 30)).map_err(err)?;
        let b = FeatureStats::from_samples(&set(&mut rng, 30)).map_err(err)?;
        let ab = frechet_distance(&a, &b).map_err(err)?;
        let ba = frechet_distance(&b, &a).map_err(err)?;
        let aa = frechet_distance(&a, &a).map_err(err)?;
        ensure((ab - ba).abs() <= 1e-6, format!("asymmetric: {ab} vs {ba}"))?;
        ensure(ab >= -1e-6, format!("negative distance {ab}"))?;
        ensure(aa.abs() <= 1e-6, format!("d(a, a) = {aa}"))?;
        worst = worst.max((ab - ba).abs()).max(aa.abs());
    }
    Ok(format!(
        "Inver overlap energy {:.3} / GradNorm {:.3}; noise {:.3} / {:.3}; shift error <= {worst_ulps:.0} ulp; Frechet axioms within {worst:.1e}",
        near.energy_overlap, near.gradnorm_overlap, far.energy_overlap, far.gradnorm_overlap
    ))
}

// ---------------------------------------------------------------- 10 and CLI helpers

fn cli(bin: &Path, args: &[String], dir: &Path) -> Result<String, String> {
    let out = Command::new(bin)
        .args(args)
        .current_dir(dir)
        .env("ATTRFORGE_THREADS", "2")
        .output()
        .map_err(err)?;
    if !out.status.success() {
        return Err(format!(
            "`attr-forge {}` failed ({}): {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn s(v: &str) -> String {
    v.to_string()
}

/// Scenes, backgrounds, library and a trained checkpoint under `dir`.
fn cli_fixture(bin: &Path, dir: &Path, n: usize) -> Result<(PathBuf, PathBuf), String> {
    let list = write_toy_dataset(&dir.join("data"), &toy_dataset(2, n, 32)).map_err(err)?;
    write_toy_dataset(&dir.join("prior"), &toy_dataset(4, 16, 32)).map_err(err)?;
    std::fs::write(dir.join("run.toml"), "[schedule]\nT = 100\n[suite]\nseed = 5\n").map_err(err)?;
    cli(
        bin,
        &[s("train"), s("--out"), s("clf.bin"), s("--n"), s("200"), s("--epochs"), s("100")],
        dir,
    )?;
    Ok((list, dir.join("out")))
}

fn generate_args(list: &Path, out: &Path, dir: &Path) -> Vec<String> {
    let rel = |p: &Path| p.strip_prefix(dir).unwrap_or(p).to_string_lossy().into_owned();
    vec![
        s("--config"),
        s("run.toml"),
        s("generate"),
        s("--list"),
        rel(list),
        s("--out-dir"),
        rel(out),
        s("--classifier"),
        s("clf.bin"),
        s("--backgrounds"),
        s("prior/backgrounds"),
        s("--library"),
        s("prior/images"),
    ]
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).map_err(err)? {
            let p = e.map_err(err)?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(key, std::fs::read(&p).map_err(err)?);
            }
        }
    }
    Ok(out)
}

fn pipeline(bin: &Path, dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    std::fs::create_dir_all(dir).map_err(err)?;
    let (list, out) = cli_fixture(bin, dir, 8)?;
    cli(bin, &generate_args(&list, &out, dir), dir)?;
    cli(
        bin,
        &[s("evaluate"), s("--manifest"), s("out/manifest.json"), s("--classifier"), s("clf.bin"), s("--tencrop")],
        dir,
    )?;
    cli(
        bin,
        &[
            s("metrics"),
            s("--images"),
            s("out/0000-0000"),
            s("--reference"),
            s("data/images"),
            s("--classifier"),
            s("clf.bin"),
            s("--out"),
            s("metrics.csv"),
            s("--summary"),
            s("metrics.json"),
        ],
        dir,
    )?;
    snapshot(dir)
}

fn determinism(bin: &Path, work: &Path) -> Outcome {
    let a = pipeline(bin, &work.join("run-a"))?;
    let b = pipeline(bin, &work.join("run-b"))?;
    let keys_a: Vec<&String> = a.keys().collect();
    let keys_b: Vec<&String> = b.keys().collect();
    ensure(keys_a == keys_b, "the two runs wrote different file sets")?;
    let diff: Vec<&String> = a.iter().filter(|(k, v)| b[*k] != **v).map(|(k, _)| k).collect();
    ensure(diff.is_empty(), format!("differing files: {diff:?}"))?;
    for need in ["out/manifest.json", "out/report.csv", "out/report.json", "metrics.csv", "clf.bin"] {
        ensure(a.contains_key(need), format!("{need} missing"))?;
    }
    // The CLI report obeys the DA identity too.
    let csv = String::from_utf8_lossy(&a["out/report.csv"]).into_owned();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let orig: f64 = rows[0][2].parse().map_err(err)?;
    for r in &rows {
        let (top1, da): (f64, f64) = (r[2].parse().map_err(err)?, r[3].parse().map_err(err)?);
        ensure(da == orig - top1, format!("CLI report {}: DA identity broken", r[0]))?;
    }
    let images = a.keys().filter(|k| k.starts_with("out/") && k.ends_with(".png")).count();
    Ok(format!("{} files identical across two full runs ({images} suite images)", a.len()))
}

// ---------------------------------------------------------------- main

fn report(n: usize, name: &str, outcome: Outcome, took: Duration, failures: &mut usize) {
    match outcome {
        Ok(detail) => println!("PASS criterion {n:>2} ({name}): {detail} [{:.1}s]", took.as_secs_f64()),
        Err(why) => {
            *failures += 1;
            println!("FAIL criterion {n:>2} ({name}): {why} [{:.1}s]", took.as_secs_f64());
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn main() {
    let bin = PathBuf::from(env!("CARGO_BIN_EXE_attr-forge"));
    let work = tempfile::tempdir().expect("temp dir");
    let mut failures = 0;

    let (o, d) = timed(diffusion_correctness);
    report(1, "diffusion correctness", o, d, &mut failures);
    let (o, d) = timed(denoiser_optimality);
    report(2, "denoiser optimality", o, d, &mut failures);
    let (o, d) = timed(gradient_fidelity);
    report(3, "gradient fidelity", o, d, &mut failures);
    let (o, d) = timed(guided_steering);
    report(4, "guided steering", o, d, &mut failures);
    let (o, d) = timed(blend_anchoring);
    report(5, "blend anchoring", o, d, &mut failures);
    let (o, d) = timed(geometry);
    report(6, "geometry", o, d, &mut failures);

    let (setup, d_setup) = timed(|| toy_setup().and_then(|t| toy_suites(&t).map(|s| (t, s))));
    match setup {
        Ok((toy, suites)) => {
            let (o, d) = timed(|| suite_integrity(&toy, &suites, &bin, work.path()));
            report(7, "suite integrity", o, d + d_setup, &mut failures);
            let (r, d) = timed(|| evaluation(&toy, &suites));
            let o = r.map(|(o, _)| o).unwrap_or_else(Err);
            report(8, "evaluation identity and trend", o, d, &mut failures);
            let (o, d) = timed(|| ood(&toy, &suites));
            report(9, "OOD proximity", o, d, &mut failures);
        }
        Err(e) => {
            for (n, name) in [(7, "suite integrity"), (8, "evaluation identity and trend"), (9, "OOD proximity")] {
                report(n, name, Err(format!("toy setup failed: {e}")), d_setup, &mut failures);
            }
        }
    }
    let (o, d) = timed(|| determinism(&bin, work.path()));
    report(10, "determinism audit", o, d, &mut failures);

    println!("{} of 10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
