use crate::error::{invalid, Error, Result};
use crate::imgcore::types::{Image2D, VectorField2D};

/// One-dimensional difference stencil: central inside, one-sided at the ends.
#[inline]
fn diff_1d(get: impl Fn(usize) -> f64, n: usize, i: usize) -> f64 {
    if i == 0 {
        get(1) - get(0)
    } else if i == n - 1 {
        get(n - 1) - get(n - 2)
    } else {
        0.5 * (get(i + 1) - get(i - 1))
    }
}

/// Spatial derivatives `(d/dx, d/dy)` packed into a vector field.
pub fn gradient(img: &Image2D) -> Result<VectorField2D> {
    let (w, h) = img.dims();
    if w < 3 || h < 3 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let d = img.data();
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            gx.push(diff_1d(|k| d[y * w + k], w, x));
            gy.push(diff_1d(|k| d[k * w + x], h, y));
        }
    }
    Ok(VectorField2D::from_raw(w, h, gx, gy))
}

/// Adjoint of [`gradient`]: returns `Dx^T gx + Dy^T gy`.
pub fn gradient_adjoint(gx: &[f64], gy: &[f64], w: usize, h: usize) -> Vec<f64> {
    debug_assert!(w >= 3 && h >= 3);
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let row = y * w;
        let a = gx[row];
        out[row + 1] += a;
        out[row] -= a;
        for x in 1..w - 1 {
            let a = 0.5 * gx[row + x];
            out[row + x + 1] += a;
            out[row + x - 1] -= a;
        }
        let a = gx[row + w - 1];
        out[row + w - 1] += a;
        out[row + w - 2] -= a;
    }
    for x in 0..w {
        let a = gy[x];
        out[w + x] += a;
        out[x] -= a;
        for y in 1..h - 1 {
            let a = 0.5 * gy[y * w + x];
            out[(y + 1) * w + x] += a;
            out[(y - 1) * w + x] -= a;
        }
        let a = gy[(h - 1) * w + x];
        out[(h - 1) * w + x] += a;
        out[(h - 2) * w + x] -= a;
    }
    out
}

/// 2x2 box average; odd trailing rows/columns are dropped.
pub fn downsample2(img: &Image2D) -> Result<Image2D> {
    let (w, h) = img.dims();
    if w < 2 || h < 2 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: 2,
        });
    }
    let (cw, ch) = (w / 2, h / 2);
    let d = img.data();
    let mut out = Vec::with_capacity(cw * ch);
    for y in 0..ch {
        for x in 0..cw {
            let (x0, y0) = (2 * x, 2 * y);
            let s = d[y0 * w + x0] + d[y0 * w + x0 + 1] + d[(y0 + 1) * w + x0] + d[(y0 + 1) * w + x0 + 1];
            out.push(0.25 * s);
        }
    }
    Ok(Image2D::from_raw(cw, ch, out))
}

/// Bilinear upsampling of a coarse displacement field onto the grid it was
/// downsampled from, with magnitudes doubled into fine-grid pixel units.
///
/// Fine pixel `i` maps to coarse coordinate `(i - 0.5) / 2`, consistent with
/// [`downsample2`].
pub fn upsample2(field: &VectorField2D, target_w: usize, target_h: usize) -> Result<VectorField2D> {
    let (w, h) = field.dims();
    let ok = |src: usize, dst: usize| dst + 1 >= 2 * src && dst <= 2 * src + 1;
    if !ok(w, target_w) || !ok(h, target_h) {
        return Err(invalid(format!(
            "cannot upsample {w}x{h} onto {target_w}x{target_h}"
        )));
    }
    let u = field.u_image();
    let v = field.v_image();
    let n = target_w * target_h;
    let (mut fu, mut fv) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for y in 0..target_h {
        let yc = (y as f64 - 0.5) * 0.5;
        for x in 0..target_w {
            let xc = (x as f64 - 0.5) * 0.5;
            fu.push(2.0 * super::bilinear_sample(&u, xc, yc));
            fv.push(2.0 * super::bilinear_sample(&v, xc, yc));
        }
    }
    Ok(VectorField2D::from_raw(target_w, target_h, fu, fv))
}

pub(crate) fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-0.5 * d * d / (sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|a| *a /= s);
    k
}

/// Separable Gaussian smoothing with clamp-to-edge boundaries.
pub fn gaussian_blur(img: &Image2D, sigma: f64) -> Result<Image2D> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let (w, h) = img.dims();
    let radius = (4.0 * sigma).ceil() as usize;
    let k = gaussian_kernel(sigma, radius);
    let r = radius as isize;
    let src = img.data();
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                acc += kv * src[y * w + clamp(x as isize + j as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                acc += kv * tmp[clamp(y as isize + j as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    Ok(Image2D::from_raw(w, h, out))
}

/// Sums of `data` over `(2r+1)^2` windows truncated at the raster border.
pub(crate) fn window_sum(data: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let sw = w + 1;
    let mut sat = vec![0.0; sw * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += data[y * w + x];
            sat[(y + 1) * sw + x + 1] = sat[y * sw + x + 1] + row;
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(r);
            let x1 = (x + r + 1).min(w);
            out.push(sat[y1 * sw + x1] - sat[y0 * sw + x1] - sat[y1 * sw + x0] + sat[y0 * sw + x0]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradient_closed_forms() {
        let g = gradient(&Image2D::constant(5, 5, 3.0)).unwrap();
        assert!(g.is_zero());
        let g = gradient(&Image2D::from_fn(6, 5, |x, _| 2.0 * x as f64)).unwrap();
        assert!(g.u().iter().all(|&a| a == 2.0) && g.v().iter().all(|&a| a == 0.0));
        let g = gradient(&Image2D::from_fn(7, 4, |x, _| (x * x) as f64)).unwrap();
        assert_eq!(g.get(3, 1).0, 6.0);
        assert!(gradient(&Image2D::zeros(2, 5)).is_err());
    }

    #[test]
    fn gradient_adjoint_dot_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (w, h) = (7, 5);
        let img = Image2D::from_fn(w, h, |_, _| rng.random::<f64>());
        let gx: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
        let gy: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
        let g = gradient(&img).unwrap();
        let lhs: f64 = g.u().iter().zip(&gx).map(|(a, b)| a * b).sum::<f64>()
            + g.v().iter().zip(&gy).map(|(a, b)| a * b).sum::<f64>();
        let adj = gradient_adjoint(&gx, &gy, w, h);
        let rhs: f64 = img.data().iter().zip(&adj).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn downsample_cases() {
        let d = downsample2(&Image2D::constant(20, 16, 0.7)).unwrap();
        assert_eq!(d.dims(), (10, 8));
        assert!(d.data().iter().all(|&a| (a - 0.7).abs() < 1e-15));
        let d = downsample2(&Image2D::from_vec(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(d.data(), &[1.5]);
        assert_eq!(downsample2(&Image2D::zeros(96, 96)).unwrap().dims(), (48, 48));
        assert_eq!(downsample2(&Image2D::zeros(97, 95)).unwrap().dims(), (48, 47));
        assert!(downsample2(&Image2D::zeros(1, 4)).is_err());
    }

    #[test]
    fn downsample_preserves_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let img = Image2D::from_fn(32, 18, |_, _| rng.random::<f64>());
        let d = downsample2(&img).unwrap();
        assert!((img.mean() - d.mean()).abs() < 1e-14);
    }

    #[test]
    fn upsample_cases() {
        let z = upsample2(&VectorField2D::zeros(48, 48), 96, 96).unwrap();
        assert!(z.is_zero() && z.dims() == (96, 96));
        let c = upsample2(&VectorField2D::constant(48, 48, 1.0, 0.0), 96, 96).unwrap();
        assert!(c.u().iter().all(|&a| a == 2.0) && c.v().iter().all(|&a| a == 0.0));
        assert!(upsample2(&VectorField2D::zeros(48, 48), 100, 96).is_err());
        assert_eq!(upsample2(&VectorField2D::zeros(48, 47), 97, 95).unwrap().dims(), (97, 95));
    }

    #[test]
    fn upsample_linear_field_matches_closed_form() {
        let (a, b, c) = (0.05, -0.02, 0.3);
        let coarse = VectorField2D::from_fn(12, 10, |x, y| (a * x as f64 + b * y as f64 + c, -c));
        let fine = upsample2(&coarse, 24, 20).unwrap();
        for y in 1..19 {
            for x in 1..23 {
                let (xc, yc) = ((x as f64 - 0.5) / 2.0, (y as f64 - 0.5) / 2.0);
                let (u, v) = fine.get(x, y);
                assert!((u - 2.0 * (a * xc + b * yc + c)).abs() < 1e-12);
                assert!((v + 2.0 * c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn window_sum_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (w, h, r) = (9, 6, 2);
        let d: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
        let s = window_sum(&d, w, h, r);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
                    for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                        acc += d[yy * w + xx];
                    }
                }
                assert!((acc - s[y * w + x]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn blur_preserves_constant() {
        let b = gaussian_blur(&Image2D::constant(10, 10, 2.5), 1.3).unwrap();
        assert!(b.data().iter().all(|&a| (a - 2.5).abs() < 1e-12));
        assert!(gaussian_blur(&Image2D::zeros(4, 4), 0.0).is_err());
    }
}
