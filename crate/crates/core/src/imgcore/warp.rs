use crate::error::Result;
use crate::imgcore::types::{same_dims, BinaryMask2D, Image2D, VectorField2D};

/// Bracketing grid indices along one axis for a clamped coordinate.
/// Returns `(i0, i1, frac, inside)`; `inside` is false when clamping was applied.
#[inline]
fn axis(x: f64, n: usize) -> (usize, usize, f64, bool) {
    if n == 1 {
        return (0, 0, 0.0, false);
    }
    let hi = (n - 1) as f64;
    let inside = (0.0..=hi).contains(&x);
    let xc = x.clamp(0.0, hi);
    let i0 = (xc.floor() as usize).min(n - 2);
    (i0, i0 + 1, xc - i0 as f64, inside)
}

#[inline]
fn sample_slice(data: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let (x0, x1, fx, _) = axis(x, w);
    let (y0, y1, fy, _) = axis(y, h);
    let top = (1.0 - fx) * data[y0 * w + x0] + fx * data[y0 * w + x1];
    let bot = (1.0 - fx) * data[y1 * w + x0] + fx * data[y1 * w + x1];
    (1.0 - fy) * top + fy * bot
}

/// Value and spatial derivatives of the bilinear interpolant; derivatives
/// vanish along an axis where the coordinate was clamped.
#[inline]
fn sample_slice_grad(data: &[f64], w: usize, h: usize, x: f64, y: f64) -> (f64, f64, f64) {
    let (x0, x1, fx, inx) = axis(x, w);
    let (y0, y1, fy, iny) = axis(y, h);
    let a = data[y0 * w + x0];
    let b = data[y0 * w + x1];
    let c = data[y1 * w + x0];
    let d = data[y1 * w + x1];
    let top = (1.0 - fx) * a + fx * b;
    let bot = (1.0 - fx) * c + fx * d;
    let val = (1.0 - fy) * top + fy * bot;
    let dx = if inx { (1.0 - fy) * (b - a) + fy * (d - c) } else { 0.0 };
    let dy = if iny { bot - top } else { 0.0 };
    (val, dx, dy)
}

/// Bilinear interpolation with clamp-to-edge boundary handling.
pub fn bilinear_sample(img: &Image2D, x: f64, y: f64) -> f64 {
    sample_slice(img.data(), img.width(), img.height(), x, y)
}

/// Backward warp: `out(x) = img(x + field(x))`.
pub fn warp_image(img: &Image2D, field: &VectorField2D) -> Result<Image2D> {
    same_dims(img.dims(), field.dims())?;
    let (w, h) = img.dims();
    let (u, v) = (field.u(), field.v());
    let src = img.data();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            out.push(sample_slice(src, w, h, x as f64 + u[i], y as f64 + v[i]));
        }
    }
    Ok(Image2D::from_raw(w, h, out))
}

/// Backward warp together with the derivative of each output pixel with
/// respect to its own displacement components.
pub fn warp_image_with_jacobian(
    img: &Image2D,
    field: &VectorField2D,
) -> Result<(Image2D, Image2D, Image2D)> {
    same_dims(img.dims(), field.dims())?;
    let (w, h) = img.dims();
    let (u, v) = (field.u(), field.v());
    let src = img.data();
    let n = w * h;
    let (mut out, mut jx, mut jy) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (val, dx, dy) = sample_slice_grad(src, w, h, x as f64 + u[i], y as f64 + v[i]);
            out.push(val);
            jx.push(dx);
            jy.push(dy);
        }
    }
    Ok((
        Image2D::from_raw(w, h, out),
        Image2D::from_raw(w, h, jx),
        Image2D::from_raw(w, h, jy),
    ))
}

/// Nearest-neighbour backward warp of a mask.
pub fn warp_mask(mask: &BinaryMask2D, field: &VectorField2D) -> Result<BinaryMask2D> {
    same_dims(mask.dims(), field.dims())?;
    let (w, h) = mask.dims();
    let (u, v) = (field.u(), field.v());
    Ok(BinaryMask2D::from_fn(w, h, |x, y| {
        let i = y * w + x;
        let xs = (x as f64 + u[i]).round().clamp(0.0, (w - 1) as f64) as usize;
        let ys = (y as f64 + v[i]).round().clamp(0.0, (h - 1) as f64) as usize;
        mask.get(xs, ys)
    }))
}

/// Displacement of the composite map `x -> y + outer(y)` with `y = x + inner(x)`,
/// so that `warp(warp(img, outer), inner)` samples `img` at `x + compose(outer, inner)(x)`.
pub fn compose(outer: &VectorField2D, inner: &VectorField2D) -> Result<VectorField2D> {
    same_dims(outer.dims(), inner.dims())?;
    let (w, h) = outer.dims();
    let (iu, iv) = (inner.u(), inner.v());
    let (ou, ov) = (outer.u(), outer.v());
    let n = w * h;
    let (mut cu, mut cv) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (px, py) = (x as f64 + iu[i], y as f64 + iv[i]);
            cu.push(iu[i] + sample_slice(ou, w, h, px, py));
            cv.push(iv[i] + sample_slice(ov, w, h, px, py));
        }
    }
    Ok(VectorField2D::from_raw(w, h, cu, cv))
}

/// Field `g` with `g(y) = -field(y + g(y))` at every grid point, found by
/// fixed-point iteration. For smooth, non-folding fields warping by `g` undoes
/// a warp by `field` up to interpolation error.
pub fn invert_field(field: &VectorField2D) -> VectorField2D {
    const MAX_ITERS: usize = 500;
    const TOL: f64 = 1e-12;
    let (w, h) = field.dims();
    let (fu, fv) = (field.u(), field.v());
    let mut gu: Vec<f64> = fu.iter().map(|a| -a).collect();
    let mut gv: Vec<f64> = fv.iter().map(|a| -a).collect();
    for _ in 0..MAX_ITERS {
        let mut change = 0.0f64;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let (px, py) = (x as f64 + gu[i], y as f64 + gv[i]);
                let nu = -sample_slice(fu, w, h, px, py);
                let nv = -sample_slice(fv, w, h, px, py);
                change = change.max((nu - gu[i]).abs()).max((nv - gv[i]).abs());
                gu[i] = nu;
                gv[i] = nv;
            }
        }
        if change < TOL {
            break;
        }
    }
    VectorField2D::from_raw(w, h, gu, gv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> Image2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image2D::from_fn(w, h, |_, _| rng.random::<f64>())
    }

    #[test]
    fn sample_midpoint_and_grid() {
        let img = Image2D::from_vec(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(bilinear_sample(&img, 0.5, 0.0), 0.5);
        let r = random_image(5, 4, 1);
        for y in 0..4 {
            for x in 0..5 {
                assert_eq!(bilinear_sample(&r, x as f64, y as f64), r.get(x, y));
            }
        }
    }

    #[test]
    fn sample_clamps_to_edge() {
        let img = random_image(3, 3, 2);
        assert_eq!(bilinear_sample(&img, -2.0, -2.0), img.get(0, 0));
        assert_eq!(bilinear_sample(&img, 7.0, 1.0), img.get(2, 1));
    }

    #[test]
    fn sample_exact_on_affine() {
        let img = Image2D::from_fn(9, 7, |x, y| 0.3 * x as f64 - 1.7 * y as f64 + 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (x, y) = (rng.random::<f64>() * 8.0, rng.random::<f64>() * 6.0);
            let want = 0.3 * x - 1.7 * y + 2.0;
            assert!((bilinear_sample(&img, x, y) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_warp_is_bit_identical() {
        let img = random_image(12, 9, 4);
        let out = warp_image(&img, &VectorField2D::zeros(12, 9)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn constant_shift_on_ramp() {
        let img = Image2D::from_fn(10, 10, |x, _| x as f64);
        let out = warp_image(&img, &VectorField2D::constant(10, 10, 1.0, 0.0)).unwrap();
        for y in 0..10 {
            for x in 0..9 {
                assert_eq!(out.get(x, y), x as f64 + 1.0);
            }
        }
    }

    #[test]
    fn integer_shift_matches_index_arithmetic() {
        let img = random_image(16, 16, 5);
        let out = warp_image(&img, &VectorField2D::constant(16, 16, 3.0, 2.0)).unwrap();
        for y in 0..14 {
            for x in 0..13 {
                assert_eq!(out.get(x, y), img.get(x + 3, y + 2));
            }
        }
    }

    #[test]
    fn warp_rejects_mismatch() {
        let img = random_image(8, 8, 6);
        assert!(warp_image(&img, &VectorField2D::zeros(8, 9)).is_err());
        assert!(warp_mask(&BinaryMask2D::filled(8, 8, true), &VectorField2D::zeros(9, 8)).is_err());
    }

    #[test]
    fn mask_warps() {
        let m = BinaryMask2D::from_fn(8, 8, |x, y| {
            let (dx, dy) = (x as f64 - 4.0, y as f64 - 4.0);
            dx * dx + dy * dy <= 4.0
        });
        assert_eq!(warp_mask(&m, &VectorField2D::zeros(8, 8)).unwrap(), m);
        let full = BinaryMask2D::filled(8, 8, true);
        let f = VectorField2D::from_fn(8, 8, |x, y| (x as f64 * 0.7 - 3.0, y as f64 * -1.1));
        assert_eq!(warp_mask(&full, &f).unwrap(), full);
        let shifted = warp_mask(&m, &VectorField2D::constant(8, 8, 2.0, 0.0)).unwrap();
        for y in 0..8 {
            for x in 0..6 {
                assert_eq!(shifted.get(x, y), m.get(x + 2, y));
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let img = random_image(8, 8, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = VectorField2D::from_fn(8, 8, |_, _| (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let (_, jx, _) = warp_image_with_jacobian(&img, &f).unwrap();
        let h = 1e-6;
        for y in 1..7 {
            for x in 1..7 {
                let (u, v) = f.get(x, y);
                let (px, py) = (x as f64 + u, y as f64 + v);
                let fd = (bilinear_sample(&img, px + h, py) - bilinear_sample(&img, px - h, py)) / (2.0 * h);
                assert!((fd - jx.get(x, y)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn inverse_undoes_smooth_warp() {
        let d = VectorField2D::from_fn(24, 24, |x, y| {
            let (x, y) = (x as f64, y as f64);
            (1.5 * (x / 7.0).sin() * (y / 9.0).cos(), -1.2 * (y / 8.0).sin())
        });
        let g = invert_field(&d);
        let c = compose(&g, &d).unwrap();
        assert!(c.max_magnitude() < 0.05, "{}", c.max_magnitude());
        let c2 = compose(&d, &g).unwrap();
        assert!(c2.u().iter().chain(c2.v()).all(|a| a.abs() < 1e-10));
    }
}
