use crate::error::Result;
use crate::imgcore::{gaussian_kernel, Image2D};
use crate::losses::{LossConfig, LossEval};

/// Floor on the local variance estimate.
const VARIANCE_FLOOR: f64 = 1e-6;

struct Patch {
    /// (dx, dy, weight) with weights summing to one.
    taps: Vec<(isize, isize, f64)>,
}

impl Patch {
    fn new(radius: usize) -> Self {
        let k = gaussian_kernel(radius.max(1) as f64, radius);
        let r = radius as isize;
        let mut taps = Vec::with_capacity(k.len() * k.len());
        for (j, ky) in k.iter().enumerate() {
            for (i, kx) in k.iter().enumerate() {
                taps.push((i as isize - r, j as isize - r, kx * ky));
            }
        }
        Self { taps }
    }
}

#[inline]
fn clamp(p: isize, n: usize) -> usize {
    p.clamp(0, n as isize - 1) as usize
}

/// Per-pixel descriptors plus the raw patch distances and variances needed
/// for backpropagation. Layout is `[pixel * K + k]`.
struct Descriptors {
    desc: Vec<f64>,
    dist: Vec<f64>,
    var: Vec<f64>,
    var_active: Vec<bool>,
    argmin: Vec<usize>,
}

fn compute(img: &Image2D, patch: &Patch, offsets: &[(isize, isize)]) -> Descriptors {
    let (w, h) = img.dims();
    let data = img.data();
    let nk = offsets.len();
    let len = w * h;
    let mut dist = vec![0.0; len * nk];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let px = (y as usize) * w + x as usize;
            for (k, &(ox, oy)) in offsets.iter().enumerate() {
                let mut acc = 0.0;
                for &(dx, dy, wt) in &patch.taps {
                    let a = data[clamp(y + dy, h) * w + clamp(x + dx, w)];
                    let b = data[clamp(y + dy + oy, h) * w + clamp(x + dx + ox, w)];
                    acc += wt * (a - b) * (a - b);
                }
                dist[px * nk + k] = acc;
            }
        }
    }
    let mut desc = vec![0.0; len * nk];
    let mut var = vec![0.0; len];
    let mut var_active = vec![false; len];
    let mut argmin = vec![0; len];
    for px in 0..len {
        let d = &dist[px * nk..(px + 1) * nk];
        let mean = d.iter().sum::<f64>() / nk as f64;
        var_active[px] = mean > VARIANCE_FLOOR;
        var[px] = mean.max(VARIANCE_FLOOR);
        let (amin, dmin) = d
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
        argmin[px] = amin;
        for k in 0..nk {
            desc[px * nk + k] = (-(d[k] - dmin) / var[px]).exp();
        }
    }
    Descriptors {
        desc,
        dist,
        var,
        var_active,
        argmin,
    }
}

/// Self-similarity descriptors of an image, `[pixel * K + k]`, normalised so
/// the largest entry at each pixel is one.
pub fn mind_descriptors(img: &Image2D, config: &LossConfig) -> Vec<f64> {
    let patch = Patch::new(config.mind_patch_radius);
    compute(img, &patch, config.mind_neighborhood.offsets()).desc
}

/// Mean squared difference between the MIND descriptors of the two images.
pub fn mind(fixed: &Image2D, moving: &Image2D, config: &LossConfig) -> Result<LossEval> {
    fixed.ensure_same_dims(moving)?;
    let (w, h) = fixed.dims();
    let offsets = config.mind_neighborhood.offsets();
    let nk = offsets.len();
    let patch = Patch::new(config.mind_patch_radius);
    let df = compute(fixed, &patch, offsets);
    let dm = compute(moving, &patch, offsets);
    let len = w * h;
    let norm = 1.0 / (len * nk) as f64;

    let mut value = 0.0;
    // gradient with respect to the patch distances of the moving image
    let mut g_dist = vec![0.0; len * nk];
    let mut t = vec![0.0; nk];
    for px in 0..len {
        let base = px * nk;
        let v = dm.var[px];
        let d = &dm.dist[base..base + nk];
        let dmin = d[dm.argmin[px]];
        let mut t_sum = 0.0;
        let mut td_sum = 0.0;
        for k in 0..nk {
            let diff = df.desc[base + k] - dm.desc[base + k];
            value += diff * diff;
            // dL/ddesc * ddesc/de, with desc = exp(-e)
            t[k] = 2.0 * diff * norm * dm.desc[base + k];
            t_sum += t[k];
            td_sum += t[k] * (d[k] - dmin);
        }
        let dv = if dm.var_active[px] { 1.0 / nk as f64 } else { 0.0 };
        for k in 0..nk {
            let mut g = t[k] / v - td_sum / (v * v) * dv;
            if k == dm.argmin[px] {
                g -= t_sum / v;
            }
            g_dist[base + k] = g;
        }
    }

    let data = moving.data();
    let mut grad = vec![0.0; len];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let px = (y as usize) * w + x as usize;
            for (k, &(ox, oy)) in offsets.iter().enumerate() {
                let gd = g_dist[px * nk + k];
                if gd == 0.0 {
                    continue;
                }
                for &(dx, dy, wt) in &patch.taps {
                    let ia = clamp(y + dy, h) * w + clamp(x + dx, w);
                    let ib = clamp(y + dy + oy, h) * w + clamp(x + dx + ox, w);
                    let g = gd * wt * 2.0 * (data[ia] - data[ib]);
                    grad[ia] += g;
                    grad[ib] -= g;
                }
            }
        }
    }
    Ok(LossEval {
        value: value * norm,
        grad: Image2D::from_raw(w, h, grad),
    })
}
