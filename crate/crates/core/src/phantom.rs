//! Synthetic tagged movies: random disk anatomy, smooth random motion, tag
//! fading and Rician noise.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imgcore::{
    gaussian_blur, invert_field, warp_image, BinaryMask2D, ComplexImage2D, Image2D, VectorField2D,
};
use crate::spamm::{frame_intensity, SpammParams, TagDirection};

/// Edge softening applied to the binary anatomy, pixels.
pub const ANATOMY_EDGE_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnatomyParams {
    /// Inclusive range of the disk count.
    pub num_disks: (usize, usize),
    /// Range of disk radii, pixels.
    pub radius: (f64, f64),
    /// Square image side, pixels.
    pub size: usize,
}

impl AnatomyParams {
    pub fn for_size(size: usize) -> Self {
        let s = size as f64;
        Self {
            num_disks: (2, 4),
            radius: (0.15 * s, 0.3 * s),
            size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (dmin, dmax) = self.num_disks;
        let (rmin, rmax) = self.radius;
        if dmin == 0 || dmin > dmax {
            return Err(invalid(format!("bad disk count range {dmin}..={dmax}")));
        }
        if !(rmin > 0.0 && rmin <= rmax) {
            return Err(invalid(format!("bad radius range {rmin}..{rmax}")));
        }
        if self.size < 8 || 2.0 * rmax > (self.size - 1) as f64 {
            return Err(invalid(format!(
                "radius {rmax} does not fit in a {}-pixel image",
                self.size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    /// Largest displacement magnitude reached at the last frame, pixels.
    pub amplitude: f64,
    /// Gaussian smoothing scale of the random field, pixels.
    pub smoothness_sigma: f64,
    pub num_frames: usize,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            amplitude: 3.0,
            smoothness_sigma: 12.0,
            num_frames: 40,
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(invalid("motion amplitude must be non-negative"));
        }
        if self.smoothness_sigma.is_nan() || self.smoothness_sigma < 2.0 {
            return Err(invalid("motion smoothness sigma must be at least 2 px"));
        }
        if self.num_frames < 2 {
            return Err(invalid("a movie needs at least two frames"));
        }
        Ok(())
    }
}

/// A simulated tagged sequence with its ground truth.
///
/// `gt_fields[n]` maps frame-0 coordinates into frame `n`: material at `x` in
/// frame 0 sits at `x + gt(x)` in frame `n`, which is what registration of
/// fixed frame 0 against moving frame `n` estimates. `synth_fields[n]` is its
/// inverse and is the backward warp used to render frame `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Movie {
    /// Magnitude images, horizontal tags.
    pub frames_h: Vec<Image2D>,
    /// Magnitude images, vertical tags.
    pub frames_v: Vec<Image2D>,
    /// Complex reconstructions whose magnitudes are `frames_h`.
    pub complex_h: Vec<ComplexImage2D>,
    /// Complex reconstructions whose magnitudes are `frames_v`.
    pub complex_v: Vec<ComplexImage2D>,
    pub gt_fields: Vec<VectorField2D>,
    pub synth_fields: Vec<VectorField2D>,
    pub anatomy: Image2D,
    /// Anatomy support at frame 0.
    pub mask: BinaryMask2D,
    pub params_h: SpammParams,
    pub params_v: SpammParams,
    pub noise_sigma: f64,
}

impl Movie {
    pub fn num_frames(&self) -> usize {
        self.frames_h.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }
}

fn rasterize_disks(size: usize, disks: &[(f64, f64, f64)]) -> BinaryMask2D {
    BinaryMask2D::from_fn(size, size, |x, y| {
        disks.iter().any(|&(cx, cy, r)| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            dx * dx + dy * dy <= r * r
        })
    })
}

fn soften(mask: &BinaryMask2D) -> Image2D {
    gaussian_blur(&mask.to_image(), ANATOMY_EDGE_SIGMA)
        .expect("positive sigma")
        .map(|v| v.clamp(0.0, 1.0))
}

/// Union of random disks and its edge-softened intensity image.
pub fn generate_anatomy<R: Rng + ?Sized>(
    rng: &mut R,
    params: &AnatomyParams,
) -> Result<(Image2D, BinaryMask2D)> {
    params.validate()?;
    let (dmin, dmax) = params.num_disks;
    let (rmin, rmax) = params.radius;
    let count = rng.random_range(dmin..=dmax);
    let lo = rmax;
    let hi = (params.size - 1) as f64 - rmax;
    let disks: Vec<(f64, f64, f64)> = (0..count)
        .map(|_| {
            let r = if rmax > rmin { rng.random_range(rmin..=rmax) } else { rmin };
            let cx = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let cy = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            (cx, cy, r)
        })
        .collect();
    let mask = rasterize_disks(params.size, &disks);
    Ok((soften(&mask), mask))
}

/// Smooth random displacement ramped linearly in time from zero at frame 0
/// to peak magnitude `amplitude` at the last frame.
pub fn generate_motion<R: Rng + ?Sized>(
    rng: &mut R,
    params: &MotionParams,
    width: usize,
    height: usize,
) -> Result<Vec<VectorField2D>> {
    params.validate()?;
    let noise = |rng: &mut R| {
        let data: Vec<f64> = (0..width * height).map(|_| StandardNormal.sample(rng)).collect();
        let img = Image2D::from_vec(width, height, data).expect("finite normals");
        gaussian_blur(&img, params.smoothness_sigma).expect("validated sigma")
    };
    let bu = noise(rng);
    let bv = noise(rng);
    let base = VectorField2D::from_images(&bu, &bv)?;
    let peak = base.max_magnitude();
    let base = if peak > 0.0 {
        base.scaled(params.amplitude / peak)
    } else {
        VectorField2D::zeros(width, height)
    };
    let last = (params.num_frames - 1) as f64;
    Ok((0..params.num_frames)
        .map(|n| {
            if n == 0 || params.amplitude == 0.0 {
                VectorField2D::zeros(width, height)
            } else {
                base.scaled(n as f64 / last)
            }
        })
        .collect())
}

/// Adds independent `N(0, sigma^2)` noise to the real and imaginary channels
/// of a real signal.
pub fn add_complex_noise<R: Rng + ?Sized>(img: &Image2D, sigma: f64, rng: &mut R) -> Result<ComplexImage2D> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("noise sigma must be non-negative, got {sigma}")));
    }
    let (w, h) = img.dims();
    if sigma == 0.0 {
        return Ok(ComplexImage2D::from_real(img));
    }
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let mut re = Vec::with_capacity(img.len());
    let mut im = Vec::with_capacity(img.len());
    for &s in img.data() {
        re.push(s + normal.sample(rng));
        im.push(normal.sample(rng));
    }
    ComplexImage2D::from_vecs(w, h, re, im)
}

/// Rician magnitude `|(img + g1) + i g2|`.
pub fn add_rician_noise<R: Rng + ?Sized>(img: &Image2D, sigma: f64, rng: &mut R) -> Result<Image2D> {
    Ok(add_complex_noise(img, sigma, rng)?.magnitude())
}

fn render<R: Rng + ?Sized>(
    anatomy: &Image2D,
    mask: BinaryMask2D,
    gt_fields: Vec<VectorField2D>,
    params_h: &SpammParams,
    params_v: &SpammParams,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<Movie> {
    params_h.validate()?;
    params_v.validate()?;
    let synth_fields: Vec<VectorField2D> = gt_fields
        .iter()
        .map(|f| if f.is_zero() { f.clone() } else { invert_field(f) })
        .collect();
    let nf = gt_fields.len();
    let (mut complex_h, mut complex_v) = (Vec::with_capacity(nf), Vec::with_capacity(nf));
    for (n, synth) in synth_fields.iter().enumerate() {
        for (params, out) in [(params_h, &mut complex_h), (params_v, &mut complex_v)] {
            let signed = frame_intensity(anatomy, params, n as u32)?;
            let moved = warp_image(&signed, synth)?;
            out.push(add_complex_noise(&moved, noise_sigma, rng)?);
        }
    }
    Ok(Movie {
        frames_h: complex_h.iter().map(ComplexImage2D::magnitude).collect(),
        frames_v: complex_v.iter().map(ComplexImage2D::magnitude).collect(),
        complex_h,
        complex_v,
        gt_fields,
        synth_fields,
        anatomy: anatomy.clone(),
        mask,
        params_h: *params_h,
        params_v: *params_v,
        noise_sigma,
    })
}

/// Full pipeline: anatomy, motion, fading tags per direction, warp, noise.
pub fn simulate_movie<R: Rng + ?Sized>(
    anatomy_params: &AnatomyParams,
    motion_params: &MotionParams,
    spamm_h: &SpammParams,
    spamm_v: &SpammParams,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<Movie> {
    if spamm_h.direction != TagDirection::Horizontal || spamm_v.direction != TagDirection::Vertical {
        return Err(invalid("expected one horizontal and one vertical tag parameter set"));
    }
    let (anatomy, mask) = generate_anatomy(rng, anatomy_params)?;
    let size = anatomy_params.size;
    let gt = generate_motion(rng, motion_params, size, size)?;
    render(&anatomy, mask, gt, spamm_h, spamm_v, noise_sigma, rng)
}

/// Motionless single centred disk with fading and noise active.
pub fn simulate_static_phantom<R: Rng + ?Sized>(
    size: usize,
    spamm_h: &SpammParams,
    spamm_v: &SpammParams,
    num_frames: usize,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<Movie> {
    if num_frames < 2 || size < 8 {
        return Err(invalid("static phantom needs >= 2 frames and size >= 8"));
    }
    let c = (size - 1) as f64 / 2.0;
    let mask = rasterize_disks(size, &[(c, c, 0.35 * size as f64)]);
    let anatomy = soften(&mask);
    let gt = vec![VectorField2D::zeros(size, size); num_frames];
    render(&anatomy, mask, gt, spamm_h, spamm_v, noise_sigma, rng)
}
