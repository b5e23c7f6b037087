//! Unnormalized 2-D DFT per channel.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::ImageGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_parts(height: usize, width: usize, channels: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            data,
        }
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

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, c: usize, ky: usize, kx: usize) -> Complex64 {
        self.data[(c * self.height + ky) * self.width + kx]
    }

    pub fn amplitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().map(|z| z.norm())
    }

    /// Radial frequency of bin `(ky, kx)`, normalized so the on-axis Nyquist
    /// frequency is 1 (corners reach √2).
    pub fn radius(&self, ky: usize, kx: usize) -> f64 {
        radius(self.height, self.width, ky, kx)
    }
}

pub(crate) fn signed_freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

pub(crate) fn radius(height: usize, width: usize, ky: usize, kx: usize) -> f64 {
    let fy = if height > 1 {
        signed_freq(ky, height) / (height as f64 / 2.0)
    } else {
        0.0
    };
    let fx = if width > 1 {
        signed_freq(kx, width) / (width as f64 / 2.0)
    } else {
        0.0
    };
    (fy * fy + fx * fx).sqrt()
}

/// Radial band of bin `(ky, kx)` when `(0, √2]` is split into `bands` equal
/// shells of width `1/bands` (the last one absorbs the corners). `None` for DC.
pub fn band_index(height: usize, width: usize, ky: usize, kx: usize, bands: usize) -> Option<usize> {
    if (ky == 0 && kx == 0) || bands == 0 {
        return None;
    }
    let r = radius(height, width, ky, kx);
    Some(((r * bands as f64).ceil() as usize).clamp(1, bands) - 1)
}

fn transform_planes(
    height: usize,
    width: usize,
    channels: usize,
    data: &mut [Complex64],
    inverse: bool,
) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    let plane = height * width;
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for c in 0..channels {
        let p = &mut data[c * plane..(c + 1) * plane];
        for row in p.chunks_exact_mut(width) {
            row_fft.process(row);
        }
        for x in 0..width {
            for y in 0..height {
                column[y] = p[y * width + x];
            }
            col_fft.process(&mut column);
            for y in 0..height {
                p[y * width + x] = column[y];
            }
        }
    }
}

/// Forward DFT with no normalization: the DC bin equals the channel sum.
pub fn fft2(image: &ImageGrid) -> Spectrum {
    let (h, w, c) = image.shape();
    let mut data: Vec<Complex64> = image.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_planes(h, w, c, &mut data, false);
    Spectrum::from_parts(h, w, c, data)
}

/// Inverse of [`fft2`] (carries the `1/(H·W)` factor); returns the real part.
pub fn ifft2(spectrum: &Spectrum) -> ImageGrid {
    let (h, w, c) = (spectrum.height, spectrum.width, spectrum.channels);
    let mut data = spectrum.data.clone();
    transform_planes(h, w, c, &mut data, true);
    let k = 1.0 / (h * w) as f64;
    let real = data.iter().map(|z| z.re * k).collect();
    ImageGrid::new(h, w, c, real).expect("inverse transform of a finite spectrum")
}

/// Complex inverse DFT (with `1/(H·W)`), returning only real parts into a grid.
/// Used by analytic gradients of spectral objectives.
pub(crate) fn ifft2_real_of(
    height: usize,
    width: usize,
    channels: usize,
    mut data: Vec<Complex64>,
) -> ImageGrid {
    transform_planes(height, width, channels, &mut data, true);
    let k = 1.0 / (height * width) as f64;
    let real = data.iter().map(|z| z.re * k).collect();
    ImageGrid::new(height, width, channels, real).expect("finite spectrum")
}
