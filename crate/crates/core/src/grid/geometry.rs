//! Homogeneous affine transforms, bilinear warping and object rectangles.

use serde::{Deserialize, Serialize};

use super::{ImageGrid, MaskGrid};
use crate::error::{Error, Result};

/// 3×3 row-major homogeneous transform acting on `p = [x, y, 1]ᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMatrix([f64; 9]);

const DET_EPS: f64 = 1e-12;

impl AffineMatrix {
    pub fn new(m: [f64; 9]) -> Result<Self> {
        if m[6] != 0.0 || m[7] != 0.0 || m[8] != 1.0 {
            return Err(Error::InvalidArgument(
                "affine bottom row must be [0, 0, 1]".into(),
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite affine entry".into()));
        }
        Ok(Self(m))
    }

    /// Builds from the upper 2×3 block `[[a, b, tx], [c, d, ty]]`.
    pub fn from_rows(a: f64, b: f64, tx: f64, c: f64, d: f64, ty: f64) -> Self {
        Self([a, b, tx, c, d, ty, 0.0, 0.0, 1.0])
    }

    pub fn identity() -> Self {
        Self::from_rows(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self::from_rows(1.0, 0.0, tx, 0.0, 1.0, ty)
    }

    /// Uniform scale `s` about `(cx, cy)`: `[[s, 0, (1-s)cx], [0, s, (1-s)cy]]`.
    pub fn scale_about(s: f64, cx: f64, cy: f64) -> Self {
        Self::from_rows(s, 0.0, (1.0 - s) * cx, 0.0, s, (1.0 - s) * cy)
    }

    /// `[[cos θ, sin θ, 0], [-sin θ, cos θ, 0]]` about the origin, θ in degrees.
    pub fn rotation_deg(theta: f64) -> Self {
        let (s, c) = theta.to_radians().sin_cos();
        Self::from_rows(c, s, 0.0, -s, c, 0.0)
    }

    /// Rotation conjugated by a translation so `(cx, cy)` stays fixed.
    pub fn rotation_about(theta: f64, cx: f64, cy: f64) -> Self {
        Self::translation(cx, cy)
            .then_after(&Self::rotation_deg(theta))
            .then_after(&Self::translation(-cx, -cy))
    }

    pub fn entries(&self) -> &[f64; 9] {
        &self.0
    }

    pub fn det2(&self) -> f64 {
        self.0[0] * self.0[4] - self.0[1] * self.0[3]
    }

    /// Matrix product `self · rhs` (apply `rhs` first).
    pub fn then_after(&self, rhs: &AffineMatrix) -> AffineMatrix {
        let a = &self.0;
        let b = &rhs.0;
        let mut m = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                m[r * 3 + c] = (0..3).map(|k| a[r * 3 + k] * b[k * 3 + c]).sum();
            }
        }
        AffineMatrix(m)
    }

    pub fn inverse(&self) -> Result<AffineMatrix> {
        let det = self.det2();
        if det.abs() <= DET_EPS || !det.is_finite() {
            return Err(Error::SingularTransform(det));
        }
        let [a, b, tx, c, d, ty, ..] = self.0;
        let ia = d / det;
        let ib = -b / det;
        let ic = -c / det;
        let id = a / det;
        Ok(Self::from_rows(
            ia,
            ib,
            -(ia * tx + ib * ty),
            ic,
            id,
            -(ic * tx + id * ty),
        ))
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.0;
        (m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5])
    }
}

/// Enclosing rectangle `[x, y, w, h]` (x = column, y = row).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl ObjectRect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }

    pub fn fits_in(&self, height: usize, width: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x + self.w <= width && self.y + self.h <= height
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }
}

#[inline]
fn bilinear(plane: &[f64], height: usize, width: usize, px: f64, py: f64, fill: f64) -> f64 {
    let x0 = px.floor();
    let y0 = py.floor();
    let fx = px - x0;
    let fy = py - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let taps = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ];
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height;
    if !taps.iter().any(|&(x, y, wt)| wt != 0.0 && inside(x, y)) {
        return fill;
    }
    let mut acc = 0.0;
    for &(x, y, wt) in &taps {
        if wt == 0.0 {
            continue;
        }
        let v = if inside(x, y) {
            plane[y as usize * width + x as usize]
        } else {
            fill
        };
        acc += wt * v;
    }
    acc
}

fn warp_plane(
    src: &[f64],
    dst: &mut [f64],
    height: usize,
    width: usize,
    inv: &AffineMatrix,
    fill: f64,
) {
    // Pixel (x, y) covers [x, x+1) × [y, y+1), the convention of
    // `ObjectRect`, so it is sampled at its center.
    for y in 0..height {
        for x in 0..width {
            let (sx, sy) = inv.apply(x as f64 + 0.5, y as f64 + 0.5);
            dst[y * width + x] = bilinear(src, height, width, sx - 0.5, sy - 0.5, fill);
        }
    }
}

/// Forward-maps the image by `transform`: output pixel `q` takes the bilinear
/// sample of the input at `T⁻¹ q`; samples that miss the source take `fill`.
pub fn warp(image: &ImageGrid, transform: &AffineMatrix, fill: f64) -> Result<ImageGrid> {
    let inv = transform.inverse()?;
    let (h, w, c) = image.shape();
    let mut out = image.zeros_like();
    for ch in 0..c {
        let src = image.channel(ch);
        warp_plane(src, out.channel_mut(ch), h, w, &inv, fill);
    }
    Ok(out)
}

/// Mask warp with the same kernel, fill 0, re-clamped to `[0, 1]`.
pub fn warp_mask(mask: &MaskGrid, transform: &AffineMatrix) -> Result<MaskGrid> {
    let inv = transform.inverse()?;
    let (h, w) = (mask.height(), mask.width());
    let mut out = vec![0.0; h * w];
    warp_plane(mask.data(), &mut out, h, w, &inv, 0.0);
    MaskGrid::new(h, w, out)
}

/// Warps a mask and binarizes it at its expected area: the `n` pixels with
/// the largest warped weight stay on, where `n` is `|det|` times the number of
/// on pixels whose centers land inside the image. A fixed 0.5 threshold would
/// drop the thin parts of a shrinking object. Ties go to the pixel nearer the
/// warped centroid, then to raster order.
pub fn warp_mask_binary(mask: &MaskGrid, transform: &AffineMatrix) -> Result<MaskGrid> {
    let (h, w) = (mask.height(), mask.width());
    let on = MaskGrid::from_fn(h, w, |y, x| if mask.is_on(y, x) { 1.0 } else { 0.0 });
    let soft = warp_mask(&on, transform)?;
    let mut inside = 0usize;
    for y in 0..h {
        for x in 0..w {
            if on.is_on(y, x) {
                let (px, py) = transform.apply(x as f64 + 0.5, y as f64 + 0.5);
                if px >= 0.0 && px < w as f64 && py >= 0.0 && py < h as f64 {
                    inside += 1;
                }
            }
        }
    }
    let n = (transform.det2().abs() * inside as f64).round() as usize;
    let v = soft.data();
    let mass: f64 = v.iter().sum();
    let (mut cx, mut cy) = (0.0, 0.0);
    if mass > 0.0 {
        for (i, m) in v.iter().enumerate() {
            cx += (i % w) as f64 * m / mass;
            cy += (i / w) as f64 * m / mass;
        }
    }
    let dist = |i: usize| ((i % w) as f64 - cx).powi(2) + ((i / w) as f64 - cy).powi(2);
    let mut order: Vec<usize> = (0..h * w).filter(|&i| v[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        v[b].total_cmp(&v[a])
            .then(dist(a).total_cmp(&dist(b)))
            .then(a.cmp(&b))
    });
    let mut out = vec![0.0; h * w];
    for &i in order.iter().take(n) {
        out[i] = 1.0;
    }
    MaskGrid::new(h, w, out)
}

/// Tight rectangle over pixels with `M > 0.5`.
pub fn bbox(mask: &MaskGrid) -> Result<ObjectRect> {
    let (mut x0, mut y0) = (usize::MAX, usize::MAX);
    let (mut x1, mut y1) = (0, 0);
    let mut any = false;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.is_on(y, x) {
                any = true;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    if !any {
        return Err(Error::EmptyMask);
    }
    Ok(ObjectRect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

/// `count(M > 0.5) / (H·W)`.
pub fn pixel_rate(mask: &MaskGrid) -> f64 {
    mask.count_on() as f64 / (mask.height() * mask.width()) as f64
}
