//! Harmonic phase extraction and its sinusoidal transform.
//!
//! A Gaussian window centred on the positive first harmonic of the tag
//! pattern isolates one spectral peak; the angle of the inverse transform is
//! the harmonic phase.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imgcore::{bin_frequency, dft2_complex, idft2, ComplexImage2D, Image2D};
use crate::par;
use crate::phantom::Movie;
use crate::spamm::TagDirection;

/// Window width across the tag axis, cycles/pixel.
pub const ORTHOGONAL_SIGMA: f64 = 0.25;

/// Largest admissible window value at zero frequency, relative to the peak.
pub const MAX_DC_LEAK: f64 = 0.01;

/// Default window width as a fraction of the centre frequency.
pub const DEFAULT_BANDWIDTH_RATIO: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarpFilter {
    /// Centre of the pass band along the tag axis, cycles/pixel.
    pub center_freq: f64,
    /// Gaussian width of the pass band, cycles/pixel.
    pub bandwidth_sigma: f64,
}

impl HarpFilter {
    /// Window matched to a known tag period.
    pub fn for_period(tag_period: f64) -> Self {
        let center_freq = 1.0 / tag_period;
        Self {
            center_freq,
            bandwidth_sigma: DEFAULT_BANDWIDTH_RATIO * center_freq,
        }
    }

    /// Window value at zero frequency relative to its peak.
    pub fn dc_leak(&self) -> f64 {
        let z = self.center_freq / self.bandwidth_sigma;
        (-0.5 * z * z).exp()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_freq > 0.0 && self.center_freq < 0.5) {
            return Err(invalid(format!(
                "centre frequency {} outside (0, 0.5)",
                self.center_freq
            )));
        }
        if !(self.bandwidth_sigma > 0.0 && self.bandwidth_sigma < self.center_freq) {
            return Err(invalid("bandwidth must be positive and below the centre frequency"));
        }
        let leak = self.dc_leak();
        if leak >= MAX_DC_LEAK {
            return Err(invalid(format!(
                "window leaks {leak:.4} of its peak into DC"
            )));
        }
        Ok(())
    }

    #[inline]
    fn weight(&self, f_axis: f64, f_orth: f64) -> f64 {
        if f_axis <= 0.0 {
            return 0.0;
        }
        let d = f_axis - self.center_freq;
        (-0.5 * d * d / (self.bandwidth_sigma * self.bandwidth_sigma)).exp()
            * (-0.5 * f_orth * f_orth / (ORTHOGONAL_SIGMA * ORTHOGONAL_SIGMA)).exp()
    }
}

/// Wrapped phase raster with values in `[-pi, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl PhaseImage {
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(crate::Error::BadLength {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data: data.into_iter().map(wrap_phase).collect(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Maps an angle into `[-pi, pi)`.
#[inline]
pub fn wrap_phase(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Complex harmonic image: one spectral peak of `img` isolated by the
/// bandpass window and transformed back.
pub fn harmonic_image(img: &ComplexImage2D, filter: &HarpFilter, direction: TagDirection) -> Result<ComplexImage2D> {
    filter.validate()?;
    let (w, h) = img.dims();
    let mut k = dft2_complex(img);
    {
        let (re, im) = k.parts_mut();
        for ky in 0..h {
            let fy = bin_frequency(ky, h);
            for kx in 0..w {
                let fx = bin_frequency(kx, w);
                let g = match direction {
                    TagDirection::Vertical => filter.weight(fx, fy),
                    TagDirection::Horizontal => filter.weight(fy, fx),
                };
                re[ky * w + kx] *= g;
                im[ky * w + kx] *= g;
            }
        }
    }
    Ok(idft2(&k))
}

/// Band-passes one harmonic of a complex image and returns its angle.
pub fn extract_harmonic_phase_complex(
    img: &ComplexImage2D,
    filter: &HarpFilter,
    direction: TagDirection,
) -> Result<PhaseImage> {
    let band = harmonic_image(img, filter, direction)?;
    let (w, h) = band.dims();
    let data = band
        .re()
        .iter()
        .zip(band.im())
        .map(|(&re, &im)| wrap_phase(im.atan2(re)))
        .collect();
    Ok(PhaseImage {
        width: w,
        height: h,
        data,
    })
}

/// Harmonic phase of a real tagged image.
pub fn extract_harmonic_phase(img: &Image2D, filter: &HarpFilter, direction: TagDirection) -> Result<PhaseImage> {
    extract_harmonic_phase_complex(&ComplexImage2D::from_real(img), filter, direction)
}

/// `sin(phase)`: continuous across the wrap points, values in `[-1, 1]`.
pub fn sharp_transform(phase: &PhaseImage) -> Image2D {
    Image2D::from_raw(phase.width, phase.height, phase.data.iter().map(|p| p.sin()).collect())
}

/// sHARP images of one frame, horizontal channel first.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpFrame {
    pub h: Image2D,
    pub v: Image2D,
}

/// sHARP images for every frame of a movie, computed from the complex
/// reconstructions.
pub fn movie_to_sharp(movie: &Movie, filter_h: &HarpFilter, filter_v: &HarpFilter) -> Result<Vec<SharpFrame>> {
    filter_h.validate()?;
    filter_v.validate()?;
    par::map_range(movie.num_frames(), |n| {
        let ph = extract_harmonic_phase_complex(&movie.complex_h[n], filter_h, TagDirection::Horizontal)?;
        let pv = extract_harmonic_phase_complex(&movie.complex_v[n], filter_v, TagDirection::Vertical)?;
        Ok(SharpFrame {
            h: sharp_transform(&ph),
            v: sharp_transform(&pv),
        })
    })
    .into_iter()
    .collect()
}
