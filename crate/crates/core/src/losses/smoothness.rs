use crate::imgcore::VectorField2D;

/// Sum of squared forward differences of both displacement channels, with the
/// difference taken as zero past the last column or row. Returns the value
/// and its gradient with respect to every displacement component.
pub fn smoothness(field: &VectorField2D) -> (f64, VectorField2D) {
    let (w, h) = (field.width(), field.height());
    let mut total = 0.0;
    let mut grads = [vec![0.0; w * h], vec![0.0; w * h]];
    for (c, data) in [field.u(), field.v()].into_iter().enumerate() {
        let g = &mut grads[c];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w {
                    let d = data[i + 1] - data[i];
                    total += d * d;
                    g[i + 1] += 2.0 * d;
                    g[i] -= 2.0 * d;
                }
                if y + 1 < h {
                    let d = data[i + w] - data[i];
                    total += d * d;
                    g[i + w] += 2.0 * d;
                    g[i] -= 2.0 * d;
                }
            }
        }
    }
    let [gu, gv] = grads;
    (total, VectorField2D::from_raw(w, h, gu, gv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_is_free() {
        let (v, g) = smoothness(&VectorField2D::constant(7, 5, 1.5, -2.0));
        assert_eq!(v, 0.0);
        assert!(g.is_zero());
    }

    #[test]
    fn linear_ramp_value() {
        // u = x on a 4x3 grid: 3 unit steps per row, 3 rows
        let f = VectorField2D::from_fn(4, 3, |x, _| (x as f64, 0.0));
        let (v, _) = smoothness(&f);
        assert!((v - 9.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_fd() {
        let f = VectorField2D::from_fn(6, 5, |x, y| {
            (((x * 7 + y * 3) % 5) as f64 * 0.3, ((x * 2 + y * 5) % 7) as f64 * -0.2)
        });
        let (_, g) = smoothness(&f);
        let step = 1e-6;
        for c in 0..2 {
            for i in 0..30 {
                let bump = |s: f64| {
                    let (mut u, mut v) = (f.u().to_vec(), f.v().to_vec());
                    if c == 0 { u[i] += s } else { v[i] += s }
                    smoothness(&VectorField2D::from_vecs(6, 5, u, v).unwrap()).0
                };
                let fd = (bump(step) - bump(-step)) / (2.0 * step);
                let an = if c == 0 { g.u()[i] } else { g.v()[i] };
                assert!((fd - an).abs() < 1e-5 * an.abs().max(1.0));
            }
        }
    }
}
