use crate::error::Result;
use crate::imgcore::{window_sum, Image2D};
use crate::losses::{LossConfig, LossEval};

/// Variance guard in the squared-correlation denominator.
pub const NCC_EPSILON: f64 = 1e-5;

/// Negated mean of the local squared correlation coefficient over square
/// windows truncated at the border.
pub fn ncc_local(fixed: &Image2D, moving: &Image2D, config: &LossConfig) -> Result<LossEval> {
    fixed.ensure_same_dims(moving)?;
    let (w, h) = fixed.dims();
    let r = config.ncc_window / 2;
    let f = fixed.data();
    let m = moving.data();
    let ones = vec![1.0; w * h];
    let ff: Vec<f64> = f.iter().map(|a| a * a).collect();
    let mm: Vec<f64> = m.iter().map(|a| a * a).collect();
    let fm: Vec<f64> = f.iter().zip(m).map(|(a, b)| a * b).collect();
    let cnt = window_sum(&ones, w, h, r);
    let sf = window_sum(f, w, h, r);
    let sm = window_sum(m, w, h, r);
    let sff = window_sum(&ff, w, h, r);
    let smm = window_sum(&mm, w, h, r);
    let sfm = window_sum(&fm, w, h, r);

    let len = w * h;
    let (mut alpha, mut alpha_mf) = (vec![0.0; len], vec![0.0; len]);
    let (mut beta, mut beta_mm) = (vec![0.0; len], vec![0.0; len]);
    let mut total = 0.0;
    for i in 0..len {
        let n = cnt[i];
        let cross = sfm[i] - sf[i] * sm[i] / n;
        let vf = sff[i] - sf[i] * sf[i] / n;
        let vm = smm[i] - sm[i] * sm[i] / n;
        let d = vf * vm + NCC_EPSILON;
        total += cross * cross / d;
        let a = 2.0 * cross / d;
        let b = 2.0 * cross * cross * vf / (d * d);
        alpha[i] = a;
        alpha_mf[i] = a * sf[i] / n;
        beta[i] = b;
        beta_mm[i] = b * sm[i] / n;
    }
    // every window containing p is a window centred within r of p
    let wa = window_sum(&alpha, w, h, r);
    let waf = window_sum(&alpha_mf, w, h, r);
    let wb = window_sum(&beta, w, h, r);
    let wbm = window_sum(&beta_mm, w, h, r);
    let scale = -1.0 / len as f64;
    let grad = (0..len)
        .map(|p| scale * (f[p] * wa[p] - waf[p] - m[p] * wb[p] + wbm[p]))
        .collect();
    Ok(LossEval {
        value: -total / len as f64,
        grad: Image2D::from_raw(w, h, grad),
    })
}
