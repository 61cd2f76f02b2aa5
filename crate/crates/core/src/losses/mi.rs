use crate::error::Result;
use crate::imgcore::Image2D;
use crate::losses::{LossConfig, LossEval};

/// Parzen weights of one sample: first bin index, normalised weights and
/// their derivatives with respect to the bin coordinate.
struct Parzen {
    first: usize,
    w: Vec<f64>,
    dw: Vec<f64>,
}

fn parzen(s: f64, bins: usize, sigma: f64, reach: usize) -> Parzen {
    let center = s.round() as isize;
    let first = (center - reach as isize).max(0) as usize;
    let last = ((center + reach as isize) as usize).min(bins - 1);
    let inv = 1.0 / (sigma * sigma);
    let mut w = Vec::with_capacity(last - first + 1);
    let mut g = Vec::with_capacity(last - first + 1);
    for b in first..=last {
        let d = s - b as f64;
        w.push((-0.5 * d * d * inv).exp());
        g.push(-d * inv);
    }
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    let gbar: f64 = w.iter().zip(&g).map(|(a, b)| a * b).sum();
    let dw = w.iter().zip(&g).map(|(a, b)| a * (b - gbar)).collect();
    Parzen { first, w, dw }
}

/// Negated mutual information of a Parzen-windowed joint histogram.
/// Intensities are clamped to `[0, 1]` before binning.
pub fn mutual_information(fixed: &Image2D, moving: &Image2D, config: &LossConfig) -> Result<LossEval> {
    fixed.ensure_same_dims(moving)?;
    let bins = config.mi_bins;
    let sigma = config.mi_parzen_sigma;
    let reach = (6.0 * sigma).ceil() as usize + 1;
    let scale = (bins - 1) as f64;
    let to_bin = |t: f64| t.clamp(0.0, 1.0) * scale;
    let n = fixed.len();
    let inv_n = 1.0 / n as f64;

    let pf: Vec<Parzen> = fixed.data().iter().map(|&t| parzen(to_bin(t), bins, sigma, reach)).collect();
    let pm: Vec<Parzen> = moving.data().iter().map(|&t| parzen(to_bin(t), bins, sigma, reach)).collect();

    let mut joint = vec![0.0; bins * bins];
    for (a, b) in pf.iter().zip(&pm) {
        for (i, wi) in a.w.iter().enumerate() {
            let row = (a.first + i) * bins + b.first;
            for (j, wj) in b.w.iter().enumerate() {
                joint[row + j] += wi * wj * inv_n;
            }
        }
    }
    let mut marg_f = vec![0.0; bins];
    let mut marg_m = vec![0.0; bins];
    for i in 0..bins {
        for j in 0..bins {
            marg_f[i] += joint[i * bins + j];
            marg_m[j] += joint[i * bins + j];
        }
    }
    let mut mi = 0.0;
    let mut log_joint = vec![0.0; bins * bins];
    for i in 0..bins {
        for j in 0..bins {
            let p = joint[i * bins + j];
            if p > 0.0 {
                log_joint[i * bins + j] = p.ln();
                mi += p * (p / (marg_f[i] * marg_m[j])).ln();
            }
        }
    }
    let log_m: Vec<f64> = marg_m.iter().map(|&p| if p > 0.0 { p.ln() } else { 0.0 }).collect();

    let grad = moving
        .data()
        .iter()
        .zip(pf.iter().zip(&pm))
        .map(|(&t, (a, b))| {
            if !(0.0..=1.0).contains(&t) || t == 0.0 || t == 1.0 {
                return 0.0;
            }
            let mut acc = 0.0;
            for (j, dwj) in b.dw.iter().enumerate() {
                let col = b.first + j;
                let mut s = 0.0;
                for (i, wi) in a.w.iter().enumerate() {
                    s += wi * log_joint[(a.first + i) * bins + col];
                }
                acc += dwj * (s - log_m[col]);
            }
            -acc * scale * inv_n
        })
        .collect();
    let (w, h) = fixed.dims();
    Ok(LossEval {
        value: -mi,
        grad: Image2D::from_raw(w, h, grad),
    })
}
