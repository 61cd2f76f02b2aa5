use crate::error::Result;
use crate::imgcore::{gaussian_kernel, Image2D};
use crate::losses::{LossConfig, LossEval};

/// Added to local variances before taking square roots.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Truncated separable Gaussian window. `apply` computes the locally
/// normalised weighted mean; `adjoint` is its transpose.
struct Window {
    k: Vec<f64>,
    r: usize,
    w: usize,
    h: usize,
    zx: Vec<f64>,
    zy: Vec<f64>,
}

impl Window {
    fn new(size: usize, sigma: f64, w: usize, h: usize) -> Self {
        let r = size / 2;
        let k = gaussian_kernel(sigma, r);
        let norm = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    (0..=2 * r)
                        .filter(|&j| {
                            let p = i as isize + j as isize - r as isize;
                            p >= 0 && p < n as isize
                        })
                        .map(|j| k[j])
                        .sum()
                })
                .collect()
        };
        let (zx, zy) = (norm(w), norm(h));
        Self { k, r, w, h, zx, zy }
    }

    /// Unnormalised truncated (symmetric) convolution.
    fn conv(&self, data: &[f64]) -> Vec<f64> {
        let (w, h, r) = (self.w, self.h, self.r as isize);
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, kv) in self.k.iter().enumerate() {
                    let p = x as isize + j as isize - r;
                    if p >= 0 && p < w as isize {
                        acc += kv * data[y * w + p as usize];
                    }
                }
                tmp[y * w + x] = acc;
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, kv) in self.k.iter().enumerate() {
                    let p = y as isize + j as isize - r;
                    if p >= 0 && p < h as isize {
                        acc += kv * tmp[p as usize * w + x];
                    }
                }
                out[y * w + x] = acc;
            }
        }
        out
    }

    fn apply(&self, data: &[f64]) -> Vec<f64> {
        let mut out = self.conv(data);
        for y in 0..self.h {
            for x in 0..self.w {
                out[y * self.w + x] /= self.zx[x] * self.zy[y];
            }
        }
        out
    }

    fn adjoint(&self, data: &[f64]) -> Vec<f64> {
        let mut scaled = data.to_vec();
        for y in 0..self.h {
            for x in 0..self.w {
                scaled[y * self.w + x] /= self.zx[x] * self.zy[y];
            }
        }
        self.conv(&scaled)
    }
}

/// Odd power `sign(s) |s|^g` and its derivative.
#[inline]
fn signed_pow(s: f64, g: f64) -> (f64, f64) {
    if g == 1.0 {
        return (s, 1.0);
    }
    let a = s.abs();
    if a == 0.0 {
        return (0.0, 0.0);
    }
    (s.signum() * a.powf(g), g * a.powf(g - 1.0))
}

/// Negated mean of the Gaussian-windowed SSIM map
/// `l^alpha * c^beta * s^gamma` with `C3 = C2 / 2`.
pub fn ssim(fixed: &Image2D, moving: &Image2D, config: &LossConfig) -> Result<LossEval> {
    fixed.ensure_same_dims(moving)?;
    let (w, h) = fixed.dims();
    let win = Window::new(config.ssim_window, config.ssim_sigma, w, h);
    let f = fixed.data();
    let m = moving.data();
    let ff: Vec<f64> = f.iter().map(|a| a * a).collect();
    let mm: Vec<f64> = m.iter().map(|a| a * a).collect();
    let fm: Vec<f64> = f.iter().zip(m).map(|(a, b)| a * b).collect();
    let mu_f = win.apply(f);
    let mu_m = win.apply(m);
    let e_ff = win.apply(&ff);
    let e_mm = win.apply(&mm);
    let e_fm = win.apply(&fm);

    let (c1, c2) = (config.ssim_c1, config.ssim_c2);
    let c3 = 0.5 * c2;
    let (ea, eb, eg) = (config.ssim_alpha, config.ssim_beta, config.ssim_gamma);
    let len = w * h;
    let (mut da, mut db, mut dc) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut total = 0.0;
    for i in 0..len {
        let (muf, mum) = (mu_f[i], mu_m[i]);
        let vf = (e_ff[i] - muf * muf).max(0.0);
        let vm = (e_mm[i] - mum * mum).max(0.0);
        let cov = e_fm[i] - muf * mum;
        let sf = (vf + VARIANCE_FLOOR).sqrt();
        let sm = (vm + VARIANCE_FLOOR).sqrt();

        let l_num = 2.0 * muf * mum + c1;
        let l_den = muf * muf + mum * mum + c1;
        let l = l_num / l_den;
        let c_num = 2.0 * sf * sm + c2;
        let c_den = vf + vm + c2;
        let c = c_num / c_den;
        let s_den = sf * sm + c3;
        let s = (cov + c3) / s_den;

        let lp = l.powf(ea);
        let cp = c.powf(eb);
        let (sp, dsp) = signed_pow(s, eg);
        total += lp * cp * sp;

        let dlp = ea * l.powf(ea - 1.0);
        let dcp = eb * c.powf(eb - 1.0);
        // partials of the factors
        let dl_dmum = (2.0 * muf * l_den - l_num * 2.0 * mum) / (l_den * l_den);
        let dsm_dvm = 0.5 / sm;
        let dc_dvm = 2.0 * sf * dsm_dvm / c_den - c_num / (c_den * c_den);
        let ds_dvm = -(cov + c3) * sf * dsm_dvm / (s_den * s_den);
        let ds_dcov = 1.0 / s_den;
        let d_mum = dlp * dl_dmum * cp * sp;
        let d_vm = lp * (dcp * dc_dvm * sp + cp * dsp * ds_dvm);
        let d_cov = lp * cp * dsp * ds_dcov;
        // var_m = E[mm] - mu_m^2 and cov = E[fm] - mu_f mu_m
        let vm_active = if e_mm[i] - mum * mum > 0.0 { 1.0 } else { 0.0 };
        da[i] = d_mum - vm_active * d_vm * 2.0 * mum - d_cov * muf;
        db[i] = vm_active * d_vm;
        dc[i] = d_cov;
    }
    let ga = win.adjoint(&da);
    let gb = win.adjoint(&db);
    let gc = win.adjoint(&dc);
    let scale = -1.0 / len as f64;
    let grad = (0..len)
        .map(|p| scale * (ga[p] + 2.0 * m[p] * gb[p] + f[p] * gc[p]))
        .collect();
    Ok(LossEval {
        value: -total / len as f64,
        grad: Image2D::from_raw(w, h, grad),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::testutil::*;
    use crate::losses::LossKind;

    fn cfg(window: usize, exps: (f64, f64, f64)) -> LossConfig {
        LossConfig {
            ssim_window: window,
            ssim_alpha: exps.0,
            ssim_beta: exps.1,
            ssim_gamma: exps.2,
            ..LossConfig::of(LossKind::Ssim)
        }
    }

    /// Direct per-pixel SSIM with explicit window loops.
    fn reference_ssim(f: &Image2D, m: &Image2D, c: &LossConfig) -> f64 {
        let (w, h) = f.dims();
        let r = (c.ssim_window / 2) as isize;
        let mut total = 0.0;
        for y in 0..h as isize {
            for x in 0..w as isize {
                let (mut z, mut sf, mut sm, mut sff, mut smm, mut sfm) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (xx, yy) = (x + dx, y + dy);
                        if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                            continue;
                        }
                        let g = (-((dx * dx + dy * dy) as f64) / (2.0 * c.ssim_sigma * c.ssim_sigma)).exp();
                        let (a, b) = (f.get(xx as usize, yy as usize), m.get(xx as usize, yy as usize));
                        z += g;
                        sf += g * a;
                        sm += g * b;
                        sff += g * a * a;
                        smm += g * b * b;
                        sfm += g * a * b;
                    }
                }
                let (mf, mm) = (sf / z, sm / z);
                let vf = (sff / z - mf * mf).max(0.0);
                let vm = (smm / z - mm * mm).max(0.0);
                let cov = sfm / z - mf * mm;
                let (df, dm) = ((vf + 1e-12).sqrt(), (vm + 1e-12).sqrt());
                let l = (2.0 * mf * mm + c.ssim_c1) / (mf * mf + mm * mm + c.ssim_c1);
                let cc = (2.0 * df * dm + c.ssim_c2) / (vf + vm + c.ssim_c2);
                let s = (cov + c.ssim_c2 / 2.0) / (df * dm + c.ssim_c2 / 2.0);
                total += l.powf(c.ssim_alpha) * cc.powf(c.ssim_beta) * s.signum() * s.abs().powf(c.ssim_gamma);
            }
        }
        -total / (w * h) as f64
    }

    #[test]
    fn identical_images() {
        let f = textured(24, 24);
        let e = ssim(&f, &f, &cfg(11, (1.0, 1.0, 1.0))).unwrap();
        assert!((e.value + 1.0).abs() < 1e-6);
        assert!(e.grad.data().iter().all(|g| g.abs() < 1e-9));
    }

    #[test]
    fn constant_images_closed_form() {
        let c = cfg(11, (1.0, 1.0, 1.0));
        let (a, b) = (0.3, 0.7);
        let v = ssim(&Image2D::constant(16, 16, a), &Image2D::constant(16, 16, b), &c).unwrap().value;
        let want = (2.0 * a * b + c.ssim_c1) / (a * a + b * b + c.ssim_c1);
        assert!((v + want).abs() < 1e-6);
    }

    #[test]
    fn matches_direct_formula() {
        let f = random_image(32, 32, 1, 0.0, 1.0);
        let m = random_image(32, 32, 2, 0.0, 1.0);
        for exps in [(1.0, 1.0, 1.0), (0.5, 1.0, 0.5)] {
            let c = cfg(11, exps);
            let v = ssim(&f, &m, &c).unwrap().value;
            assert!((v - reference_ssim(&f, &m, &c)).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_matches_fd() {
        let f = random_image(8, 8, 3, 0.0, 1.0);
        let noise = random_image(8, 8, 4, -0.2, 0.2);
        let m = Image2D::from_fn(8, 8, |x, y| f.get(x, y) + noise.get(x, y));
        for (win, exps) in [(11, (1.0, 1.0, 1.0)), (7, (0.5, 1.0, 0.5)), (5, (1.0, 0.5, 1.0))] {
            let c = cfg(win, exps);
            let err = gradient_error(&f, &m, |a, b| ssim(a, b, &c).unwrap(), 1e-4);
            assert!(err < 1e-4, "{win} {exps:?}: {err}");
        }
    }
}
