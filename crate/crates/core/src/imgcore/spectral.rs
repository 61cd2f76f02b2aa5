use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::imgcore::types::{ComplexImage2D, Image2D};

fn transform(src: &ComplexImage2D, inverse: bool) -> ComplexImage2D {
    let (w, h) = src.dims();
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    let mut buf: Vec<Complex64> = src
        .re()
        .iter()
        .zip(src.im())
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();
    // Rows are contiguous.
    row_fft.process(&mut buf);
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
    let scale = if inverse { 1.0 / (w * h) as f64 } else { 1.0 };
    ComplexImage2D::from_raw(
        w,
        h,
        buf.iter().map(|c| c.re * scale).collect(),
        buf.iter().map(|c| c.im * scale).collect(),
    )
}

/// Unnormalised forward 2D DFT of a real image.
pub fn dft2(img: &Image2D) -> ComplexImage2D {
    transform(&ComplexImage2D::from_real(img), false)
}

/// Unnormalised forward 2D DFT of a complex image.
pub fn dft2_complex(img: &ComplexImage2D) -> ComplexImage2D {
    transform(img, false)
}

/// Inverse 2D DFT carrying the `1/(WH)` factor.
pub fn idft2(k: &ComplexImage2D) -> ComplexImage2D {
    transform(k, true)
}

/// Signed frequency in cycles/pixel of DFT bin `k` out of `n`.
#[inline]
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    if 2 * k < n {
        k as f64 / n as f64
    } else {
        (k as f64 - n as f64) / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Direct O(N^2) DFT used as the reference.
    fn naive_dft(img: &Image2D) -> (Vec<f64>, Vec<f64>) {
        let (w, h) = img.dims();
        let mut re = vec![0.0; w * h];
        let mut im = vec![0.0; w * h];
        for ky in 0..h {
            for kx in 0..w {
                let (mut sr, mut si) = (0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let ph = -2.0 * PI * ((kx * x) as f64 / w as f64 + (ky * y) as f64 / h as f64);
                        sr += img.get(x, y) * ph.cos();
                        si += img.get(x, y) * ph.sin();
                    }
                }
                re[ky * w + kx] = sr;
                im[ky * w + kx] = si;
            }
        }
        (re, im)
    }

    #[test]
    fn matches_naive_dft_on_odd_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let img = Image2D::from_fn(12, 9, |_, _| rng.random::<f64>());
        let k = dft2(&img);
        let (re, im) = naive_dft(&img);
        for i in 0..re.len() {
            assert!((k.re()[i] - re[i]).abs() < 1e-9 && (k.im()[i] - im[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_has_only_dc() {
        let k = dft2(&Image2D::constant(10, 6, 0.5));
        assert!((k.re()[0] - 30.0).abs() < 1e-9);
        for i in 1..60 {
            assert!(k.re()[i].abs() < 1e-9 && k.im()[i].abs() < 1e-9);
        }
    }

    #[test]
    fn cosine_has_two_peaks() {
        let (w, h, p) = (96, 8, 8.0);
        let img = Image2D::from_fn(w, h, |x, _| (2.0 * PI * x as f64 / p).cos());
        let k = dft2(&img);
        let peak = (w as f64 / p) as usize;
        for (i, (&re, &im)) in k.re().iter().zip(k.im()).enumerate() {
            let mag = re.hypot(im);
            if i == peak || i == w - peak {
                assert!((mag - (w * h) as f64 / 2.0).abs() < 1e-9);
            } else {
                assert!(mag < 1e-9);
            }
        }
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for (w, h) in [(32, 32), (96, 96), (128, 128), (17, 30)] {
            let img = Image2D::from_fn(w, h, |_, _| rng.random::<f64>());
            let back = idft2(&dft2(&img));
            for i in 0..img.len() {
                assert!((back.re()[i] - img.data()[i]).abs() < 1e-9);
                assert!(back.im()[i].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn signed_frequencies() {
        assert_eq!(bin_frequency(0, 8), 0.0);
        assert_eq!(bin_frequency(3, 8), 0.375);
        assert_eq!(bin_frequency(4, 8), -0.5);
        assert_eq!(bin_frequency(7, 8), -0.125);
    }
}
