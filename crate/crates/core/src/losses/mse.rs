use crate::error::Result;
use crate::imgcore::Image2D;
use crate::losses::LossEval;

/// Mean squared intensity difference.
pub fn mse(fixed: &Image2D, moving: &Image2D) -> Result<LossEval> {
    fixed.ensure_same_dims(moving)?;
    let n = fixed.len() as f64;
    let mut value = 0.0;
    let grad: Vec<f64> = fixed
        .data()
        .iter()
        .zip(moving.data())
        .map(|(f, m)| {
            let d = m - f;
            value += d * d;
            2.0 * d / n
        })
        .collect();
    let (w, h) = fixed.dims();
    Ok(LossEval {
        value: value / n,
        grad: Image2D::from_raw(w, h, grad),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::testutil::*;

    #[test]
    fn closed_forms() {
        let f = random_image(6, 5, 1, 0.0, 1.0);
        let e = mse(&f, &f).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.grad.data().iter().all(|&g| g == 0.0));
        let a = Image2D::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let b = Image2D::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        assert_eq!(mse(&a, &b).unwrap().value, 0.5);
        assert!(mse(&a, &Image2D::zeros(1, 2)).is_err());
    }

    #[test]
    fn not_scale_invariant() {
        let f = random_image(8, 8, 2, 0.1, 1.0);
        assert!(mse(&f, &f.map(|v| 0.5 * v)).unwrap().value > 0.0);
    }

    #[test]
    fn gradient_matches_fd() {
        let f = random_image(8, 8, 3, 0.0, 1.0);
        let m = random_image(8, 8, 4, 0.0, 1.0);
        assert!(gradient_error(&f, &m, |a, b| mse(a, b).unwrap(), 1e-4) < 1e-4);
    }
}
