use crate::error::Result;
use crate::imgcore::{gradient, gradient_adjoint, Image2D};
use crate::losses::{LossConfig, LossEval};

/// Normalized gradient fields: negated mean of the squared cosine between
/// the regularized gradients of the two images.
pub fn ngf(fixed: &Image2D, moving: &Image2D, config: &LossConfig) -> Result<LossEval> {
    fixed.ensure_same_dims(moving)?;
    let (w, h) = fixed.dims();
    let eps2 = config.ngf_epsilon * config.ngf_epsilon;
    let gf = gradient(fixed)?;
    let gm = gradient(moving)?;
    let (fx, fy, mx, my) = (gf.u(), gf.v(), gm.u(), gm.v());
    let len = w * h;
    let mut gx = vec![0.0; len];
    let mut gy = vec![0.0; len];
    let mut total = 0.0;
    for i in 0..len {
        let nf = (fx[i] * fx[i] + fy[i] * fy[i] + eps2).sqrt();
        let (nx, ny) = (fx[i] / nf, fy[i] / nf);
        let r = mx[i] * mx[i] + my[i] * my[i] + eps2;
        let d = nx * mx[i] + ny * my[i];
        total += d * d / r;
        let a = 2.0 * d / r;
        let b = 2.0 * d * d / (r * r);
        gx[i] = a * nx - b * mx[i];
        gy[i] = a * ny - b * my[i];
    }
    let scale = -1.0 / len as f64;
    let grad = gradient_adjoint(&gx, &gy, w, h)
        .into_iter()
        .map(|g| g * scale)
        .collect();
    Ok(LossEval {
        value: -total / len as f64,
        grad: Image2D::from_raw(w, h, grad),
    })
}
