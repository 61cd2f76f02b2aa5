//! Deformation mechanics and the evaluation metrics built on them.

use crate::error::{Error, Result};
use crate::imgcore::{gradient, same_dims, BinaryMask2D, Image2D, VectorField2D};

/// Erosion applied to masks before strain statistics, in pixels.
pub const STRAIN_MASK_EROSION: usize = 2;
pub const MPS_PERCENTILE: f64 = 0.95;

/// Per-pixel deformation gradient `F = I + grad(u)`, stored row-major as
/// `[F11, F12, F21, F22] = [1 + u_x, u_y, v_x, 1 + v_y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationGradient {
    width: usize,
    height: usize,
    tensors: Vec<[f64; 4]>,
}

impl DeformationGradient {
    pub fn from_tensors(width: usize, height: usize, tensors: Vec<[f64; 4]>) -> Result<Self> {
        if tensors.len() != width * height {
            return Err(Error::BadLength {
                width,
                height,
                len: tensors.len(),
            });
        }
        Ok(Self {
            width,
            height,
            tensors,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn tensors(&self) -> &[[f64; 4]] {
        &self.tensors
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 4] {
        self.tensors[y * self.width + x]
    }
}

/// Green-Lagrange strain components.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainField {
    pub width: usize,
    pub height: usize,
    pub exx: Vec<f64>,
    pub exy: Vec<f64>,
    pub eyy: Vec<f64>,
}

pub fn deformation_gradient(field: &VectorField2D) -> Result<DeformationGradient> {
    let (w, h) = field.dims();
    let gu = gradient(&field.u_image())?;
    let gv = gradient(&field.v_image())?;
    let tensors = (0..w * h)
        .map(|i| [1.0 + gu.u()[i], gu.v()[i], gv.u()[i], 1.0 + gv.v()[i]])
        .collect();
    Ok(DeformationGradient {
        width: w,
        height: h,
        tensors,
    })
}

/// `E = (F^T F - I) / 2` at every pixel.
pub fn green_lagrange(f: &DeformationGradient) -> StrainField {
    let n = f.tensors.len();
    let (mut exx, mut exy, mut eyy) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &[a, b, c, d] in &f.tensors {
        exx.push(0.5 * (a * a + c * c - 1.0));
        exy.push(0.5 * (a * b + c * d));
        eyy.push(0.5 * (b * b + d * d - 1.0));
    }
    StrainField {
        width: f.width,
        height: f.height,
        exx,
        exy,
        eyy,
    }
}

/// Larger eigenvalue of the strain tensor at every pixel.
pub fn max_principal_strain(e: &StrainField) -> Image2D {
    let data = (0..e.exx.len())
        .map(|i| {
            let mean = 0.5 * (e.exx[i] + e.eyy[i]);
            let half = 0.5 * (e.exx[i] - e.eyy[i]);
            mean + (half * half + e.exy[i] * e.exy[i]).sqrt()
        })
        .collect();
    Image2D::from_raw(e.width, e.height, data)
}

/// Maximum principal strain image of a displacement field.
pub fn mps_map(field: &VectorField2D) -> Result<Image2D> {
    Ok(max_principal_strain(&green_lagrange(&deformation_gradient(field)?)))
}

/// Mean end-point error over the mask.
pub fn epe(est: &VectorField2D, gt: &VectorField2D, mask: &BinaryMask2D) -> Result<f64> {
    same_dims(est.dims(), gt.dims())?;
    same_dims(est.dims(), mask.dims())?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (eu, ev, gu, gv) = (est.u(), est.v(), gt.u(), gt.v());
    let total: f64 = mask
        .indices()
        .map(|i| (eu[i] - gu[i]).hypot(ev[i] - gv[i]))
        .sum();
    Ok(total / mask.count() as f64)
}

/// Nearest-rank percentile, `p` in `(0, 1]`. `values` must be non-empty.
pub fn nearest_rank(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let rank = (p * values.len() as f64).ceil() as usize;
    values[rank.clamp(1, values.len()) - 1]
}

/// Per-pixel `|MPS(est) - MPS(gt)|`.
pub fn mps_error_map(est: &VectorField2D, gt: &VectorField2D) -> Result<Image2D> {
    same_dims(est.dims(), gt.dims())?;
    let a = mps_map(est)?;
    let b = mps_map(gt)?;
    let (w, h) = a.dims();
    let data = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).collect();
    Ok(Image2D::from_raw(w, h, data))
}

/// 95th percentile of the strain error over the eroded mask.
pub fn mps95(est: &VectorField2D, gt: &VectorField2D, mask: &BinaryMask2D) -> Result<f64> {
    same_dims(est.dims(), mask.dims())?;
    let eroded = mask.eroded(STRAIN_MASK_EROSION);
    if eroded.is_empty() {
        return Err(Error::EmptyMask);
    }
    let err = mps_error_map(est, gt)?;
    let mut vals: Vec<f64> = eroded.indices().map(|i| err.data()[i]).collect();
    Ok(nearest_rank(&mut vals, MPS_PERCENTILE))
}

pub fn dice(a: &BinaryMask2D, b: &BinaryMask2D) -> Result<f64> {
    same_dims(a.dims(), b.dims())?;
    let (na, nb) = (a.count(), b.count());
    if na + nb == 0 {
        return Err(Error::EmptyMask);
    }
    let both = a.data().iter().zip(b.data()).filter(|(x, y)| **x && **y).count();
    Ok(2.0 * both as f64 / (na + nb) as f64)
}
