//! Raster, spectrum and geometry primitives.
//!
//! Images are stored channel-planar (`c * H * W + y * W + x`) in the
//! canonical intensity range `[-1, 1]`. Coordinates follow `x = column`,
//! `y = row`, origin top-left.

pub mod geometry;
pub mod io;
pub mod rng;
pub mod spectrum;

pub use geometry::{bbox, pixel_rate, warp, warp_mask, warp_mask_binary, AffineMatrix, ObjectRect};
pub use rng::RngStream;
pub use spectrum::{fft2, ifft2, Spectrum};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidGrid(format!(
                "data length {} != {height}*{width}*{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "empty grid");
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    /// Builds a grid from `f(channel, row, col)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut g = Self::zeros(height, width, channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    let i = g.index(c, y, x);
                    g.data[i] = f(c, y, x);
                }
            }
        }
        g
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.height, self.width, self.channels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        let i = self.index(c, y, x);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn ensure_same_shape(&self, other: &ImageGrid) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.shape()),
                actual: format!("{:?}", other.shape()),
            });
        }
        Ok(())
    }

    pub fn ensure_mask_fits(&self, mask: &MaskGrid) -> Result<()> {
        if (self.height, self.width) != (mask.height(), mask.width()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.height, self.width),
                actual: format!("mask {}x{}", mask.height(), mask.width()),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    /// Element-wise `f(self, other)`. Panics on shape mismatch.
    pub fn zip_map(&self, other: &ImageGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            ..*self
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    /// `self += k * other`
    pub fn add_scaled(&mut self, other: &ImageGrid, k: f64) {
        assert_eq!(self.shape(), other.shape(), "add_scaled shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn mean_abs_diff(&self, other: &ImageGrid) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &ImageGrid) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn clamped(&self, lo: f64, hi: f64) -> Self {
        self.map(|v| v.clamp(lo, hi))
    }

    /// Channel average as a single-channel grid.
    pub fn to_gray(&self) -> Self {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.plane_len();
        let mut out = vec![0.0; n];
        for c in 0..self.channels {
            for (o, v) in out.iter_mut().zip(self.channel(c)) {
                *o += v;
            }
        }
        let k = 1.0 / self.channels as f64;
        out.iter_mut().for_each(|v| *v *= k);
        Self {
            height: self.height,
            width: self.width,
            channels: 1,
            data: out,
        }
    }

    /// Sub-rectangle copy; `rect` must lie inside the grid.
    pub fn crop(&self, rect: ObjectRect) -> Self {
        assert!(rect.x + rect.w <= self.width && rect.y + rect.h <= self.height);
        Self::from_fn(rect.h, rect.w, self.channels, |c, y, x| {
            self.get(c, rect.y + y, rect.x + x)
        })
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.height, self.width, self.channels, |c, y, x| {
            self.get(c, y, self.width - 1 - x)
        })
    }

    /// `M ⊙ inside + (1 − M) ⊙ outside`, broadcasting the mask over channels.
    pub fn blend(mask: &MaskGrid, inside: &ImageGrid, outside: &ImageGrid) -> Self {
        assert_eq!(inside.shape(), outside.shape(), "blend shape mismatch");
        assert_eq!((inside.height, inside.width), (mask.height(), mask.width()));
        let n = inside.plane_len();
        let mut out = inside.zeros_like();
        for c in 0..inside.channels {
            for i in 0..n {
                let m = mask.data()[i];
                let k = c * n + i;
                out.data[k] = m * inside.data[k] + (1.0 - m) * outside.data[k];
            }
        }
        out
    }
}

/// Soft object mask with values clamped to `[0, 1]`; `> 0.5` counts as object.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl MaskGrid {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidGrid("mask dimensions must be positive".into()));
        }
        if data.len() != height * width {
            return Err(Error::InvalidGrid(format!(
                "mask length {} != {height}*{width}",
                data.len()
            )));
        }
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidGrid("mask contains NaN".into()));
        }
        Ok(Self {
            height,
            width,
            data: data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x).clamp(0.0, 1.0));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self::from_fn(height, width, |_, _| value)
    }

    /// Axis-aligned rectangle of ones.
    pub fn from_rect(height: usize, width: usize, rect: ObjectRect) -> Self {
        Self::from_fn(height, width, |y, x| {
            let inside = x >= rect.x && x < rect.x + rect.w && y >= rect.y && y < rect.y + rect.h;
            if inside {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn is_on(&self, y: usize, x: usize) -> bool {
        self.get(y, x) > 0.5
    }

    /// Object pixel count `N_o = count(M > 0.5)`.
    pub fn count_on(&self) -> usize {
        self.data.iter().filter(|&&v| v > 0.5).count()
    }

    pub fn invert(&self) -> Self {
        Self {
            data: self.data.iter().map(|v| 1.0 - v).collect(),
            ..*self
        }
    }

    /// Single-channel image view (`0 → -1`, `1 → +1`).
    pub fn to_image(&self) -> ImageGrid {
        ImageGrid {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.data.iter().map(|v| 2.0 * v - 1.0).collect(),
        }
    }

    pub fn crop(&self, rect: ObjectRect) -> Self {
        Self::from_fn(rect.h, rect.w, |y, x| self.get(rect.y + y, rect.x + x))
    }
}
