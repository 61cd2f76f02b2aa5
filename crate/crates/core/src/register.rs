//! Multi-resolution dense registration.
//!
//! The field is optimised directly with adaptive-moment gradient descent on
//! `sim(F, M o phi) + lambda * smooth(phi)`. A candidate step that would raise
//! the objective is rejected and retried with half the learning rate, so the
//! recorded trace never increases within a level.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::imgcore::{downsample2, upsample2, warp_image_with_jacobian, Image2D, VectorField2D};
use crate::losses::{evaluate, smoothness, LossConfig};
use crate::par;

/// Coarsest pyramid level kept, in pixels along the shorter side.
const MIN_LEVEL_SIZE: usize = 8;
/// Attempts per iteration before the level is declared converged.
const MAX_STEP_ATTEMPTS: usize = 8;
const LR_GROWTH: f64 = 1.1;
/// Final step cap of a level as a fraction of `step_size`.
const LR_FLOOR: f64 = 0.01;
const ADAM_EPSILON: f64 = 1e-8;
/// Denominator floor of the adaptive step as a fraction of the RMS gradient.
const ADAM_RELATIVE_EPSILON: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegConfig {
    pub loss: LossConfig,
    pub lambda: f64,
    pub levels: usize,
    pub iters_per_level: usize,
    /// Initial (and largest) per-pixel step, in pixels.
    pub step_size: f64,
    pub adaptive_moments: (f64, f64),
    pub convergence_tol: f64,
}

impl Default for RegConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::default(),
            lambda: 1.0,
            levels: 3,
            iters_per_level: 200,
            step_size: 0.1,
            adaptive_moments: (0.9, 0.999),
            convergence_tol: 1e-6,
        }
    }
}

impl RegConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.levels == 0 || self.iters_per_level == 0 {
            return Err(invalid("levels and iters_per_level must be >= 1"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(invalid(format!("step_size must be > 0, got {}", self.step_size)));
        }
        let (b1, b2) = self.adaptive_moments;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return Err(invalid("moment decay rates must lie in [0, 1)"));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol < 0.0 {
            return Err(invalid("convergence_tol must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegResult {
    /// Fixed-to-moving displacement at full resolution.
    pub field: VectorField2D,
    pub objective_trace: Vec<f64>,
    pub similarity_trace: Vec<f64>,
    pub smoothness_trace: Vec<f64>,
    /// Trace index at which each pyramid level starts, coarsest first.
    pub level_starts: Vec<usize>,
}

impl RegResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// Objective value, its two terms, and the gradient with respect to the field.
#[derive(Debug, Clone)]
pub struct Objective {
    pub total: f64,
    pub similarity: f64,
    pub smoothness: f64,
    pub grad: VectorField2D,
}

fn check_channels(fixed: &[Image2D], moving: &[Image2D]) -> Result<(usize, usize)> {
    if fixed.is_empty() {
        return Err(invalid("at least one channel is required"));
    }
    if fixed.len() != moving.len() {
        return Err(invalid(format!(
            "channel count mismatch: {} fixed vs {} moving",
            fixed.len(),
            moving.len()
        )));
    }
    let dims = fixed[0].dims();
    for img in fixed.iter().chain(moving) {
        if img.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: img.dims(),
            });
        }
    }
    Ok(dims)
}

/// Full registration objective at `field`: similarity averaged over
/// channels plus `lambda` times the per-pixel mean of the smoothness sum.
pub fn objective(
    fixed: &[Image2D],
    moving: &[Image2D],
    field: &VectorField2D,
    lambda: f64,
    loss: &LossConfig,
) -> Result<Objective> {
    let (w, h) = check_channels(fixed, moving)?;
    let n = w * h;
    let inv_c = 1.0 / fixed.len() as f64;
    let mut gu = vec![0.0; n];
    let mut gv = vec![0.0; n];
    let mut sim = 0.0;
    for (f, m) in fixed.iter().zip(moving) {
        let (warped, jx, jy) = warp_image_with_jacobian(m, field)?;
        let eval = evaluate(f, &warped, loss)?;
        sim += eval.value * inv_c;
        let (g, jx, jy) = (eval.grad.data(), jx.data(), jy.data());
        for i in 0..n {
            gu[i] += g[i] * jx[i] * inv_c;
            gv[i] += g[i] * jy[i] * inv_c;
        }
    }
    // per-pixel mean, so lambda means the same thing at every pyramid level
    let (smooth_sum, sg) = smoothness(field);
    let smooth = smooth_sum / n as f64;
    if lambda != 0.0 {
        let k = lambda / n as f64;
        for (g, s) in gu.iter_mut().zip(sg.u()) {
            *g += k * s;
        }
        for (g, s) in gv.iter_mut().zip(sg.v()) {
            *g += k * s;
        }
    }
    Ok(Objective {
        total: sim + lambda * smooth,
        similarity: sim,
        smoothness: smooth,
        grad: VectorField2D::from_raw(w, h, gu, gv),
    })
}

fn pyramid(channels: &[Image2D], levels: usize) -> Result<Vec<Vec<Image2D>>> {
    let mut out = vec![channels.to_vec()];
    while out.len() < levels {
        let last = out.last().expect("non-empty");
        let (w, h) = last[0].dims();
        if w / 2 < MIN_LEVEL_SIZE || h / 2 < MIN_LEVEL_SIZE {
            break;
        }
        let next = last.iter().map(downsample2).collect::<Result<Vec<_>>>()?;
        out.push(next);
    }
    out.reverse();
    Ok(out)
}

struct Trace<'a> {
    result: &'a mut RegResult,
}

impl Trace<'_> {
    fn push(&mut self, obj: &Objective, level: usize, iteration: usize) -> Result<()> {
        self.result.objective_trace.push(obj.total);
        self.result.similarity_trace.push(obj.similarity);
        self.result.smoothness_trace.push(obj.smoothness);
        if !obj.total.is_finite() {
            return Err(Error::NonFiniteObjective {
                level,
                iteration,
                trace: self.result.objective_trace.clone(),
            });
        }
        Ok(())
    }
}

fn optimise_level(
    fixed: &[Image2D],
    moving: &[Image2D],
    mut field: VectorField2D,
    config: &RegConfig,
    level: usize,
    trace: &mut Trace<'_>,
) -> Result<VectorField2D> {
    let (w, h) = field.dims();
    let n = w * h;
    let (b1, b2) = config.adaptive_moments;
    let (mut mu, mut mv) = (vec![0.0; n], vec![0.0; n]);
    let (mut su, mut sv) = (vec![0.0; n], vec![0.0; n]);
    let mut lr = config.step_size;
    let mut obj = objective(fixed, moving, &field, config.lambda, &config.loss)?;
    trace.push(&obj, level, 0)?;

    let iters = config.iters_per_level;
    for t in 1..=iters {
        // cosine-annealed cap so per-pixel adaptive steps settle instead of
        // jittering at the full step size
        let progress = (t - 1) as f64 / iters.max(2) as f64;
        let cap = config.step_size * (LR_FLOOR + (1.0 - LR_FLOOR) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
        lr = lr.min(cap);
        let c1 = 1.0 - b1.powi(t as i32);
        let c2 = 1.0 - b2.powi(t as i32);
        let (gu, gv) = (obj.grad.u(), obj.grad.v());
        let mut du = vec![0.0; n];
        let mut dv = vec![0.0; n];
        for i in 0..n {
            mu[i] = b1 * mu[i] + (1.0 - b1) * gu[i];
            mv[i] = b1 * mv[i] + (1.0 - b1) * gv[i];
            su[i] = b2 * su[i] + (1.0 - b2) * gu[i] * gu[i];
            sv[i] = b2 * sv[i] + (1.0 - b2) * gv[i] * gv[i];
        }
        // pixels whose gradient is far below the typical magnitude (flat
        // background, noise) take proportionally small steps
        let rms = ((su.iter().sum::<f64>() + sv.iter().sum::<f64>()) / (2 * n) as f64 / c2).sqrt();
        let eps = (ADAM_RELATIVE_EPSILON * rms).max(ADAM_EPSILON);
        for i in 0..n {
            du[i] = (mu[i] / c1) / ((su[i] / c2).sqrt() + eps);
            dv[i] = (mv[i] / c1) / ((sv[i] / c2).sqrt() + eps);
        }

        let mut accepted = None;
        for _ in 0..MAX_STEP_ATTEMPTS {
            let cu: Vec<f64> = field.u().iter().zip(&du).map(|(x, d)| x - lr * d).collect();
            let cv: Vec<f64> = field.v().iter().zip(&dv).map(|(x, d)| x - lr * d).collect();
            let cand = VectorField2D::from_raw(w, h, cu, cv);
            let cobj = objective(fixed, moving, &cand, config.lambda, &config.loss)?;
            if !cobj.total.is_finite() {
                trace.push(&cobj, level, t)?;
            }
            if cobj.total < obj.total {
                lr = (lr * LR_GROWTH).min(cap);
                accepted = Some((cand, cobj));
                break;
            }
            lr *= 0.5;
        }
        let Some((cand, cobj)) = accepted else { break };
        let rel = (obj.total - cobj.total) / obj.total.abs().max(1e-12);
        field = cand;
        obj = cobj;
        trace.push(&obj, level, t)?;
        if rel < config.convergence_tol {
            break;
        }
    }
    Ok(field)
}

/// Registers `moving` onto `fixed`, returning the fixed-to-moving field:
/// warping the moving channels by it aligns them with the fixed channels.
pub fn register_pair(fixed: &[Image2D], moving: &[Image2D], config: &RegConfig) -> Result<RegResult> {
    config.validate()?;
    check_channels(fixed, moving)?;
    let fp = pyramid(fixed, config.levels)?;
    let mp = pyramid(moving, config.levels)?;
    let mut result = RegResult {
        field: VectorField2D::zeros(1, 1),
        objective_trace: Vec::new(),
        similarity_trace: Vec::new(),
        smoothness_trace: Vec::new(),
        level_starts: Vec::new(),
    };
    let (w0, h0) = fp[0][0].dims();
    let mut field = VectorField2D::zeros(w0, h0);
    for (level, (f, m)) in fp.iter().zip(&mp).enumerate() {
        let (w, h) = f[0].dims();
        if field.dims() != (w, h) {
            field = upsample2(&field, w, h)?;
        }
        result.level_starts.push(result.objective_trace.len());
        let mut trace = Trace { result: &mut result };
        field = optimise_level(f, m, field, config, level, &mut trace)?;
    }
    result.field = field;
    Ok(result)
}

/// Registers frame 0 against every later frame. Entry `n - 1` holds the
/// result for moving frame `n`.
pub fn register_movie(frames: &[Vec<Image2D>], config: &RegConfig) -> Result<Vec<RegResult>> {
    if frames.len() < 2 {
        return Err(invalid("a movie needs at least two frames"));
    }
    par::map_range(frames.len() - 1, |i| register_pair(&frames[0], &frames[i + 1], config))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::warp_image;
    use crate::losses::{optimum_value, LossKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tags(size: usize) -> Image2D {
        Image2D::from_fn(size, size, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.5 + 0.2 * (0.6 * x).cos() + 0.2 * (0.6 * y).cos()
        })
    }

    fn cfg(kind: LossKind) -> RegConfig {
        RegConfig {
            loss: LossConfig::of(kind),
            ..Default::default()
        }
    }

    #[test]
    fn identical_pairs_stay_put() {
        // MI and NGF are not exactly stationary at identity under a dense
        // field, so they need firm regularisation to stay put
        let f = tags(32);
        for kind in LossKind::ALL {
            let c = RegConfig { lambda: 10.0, ..cfg(kind) };
            let r = register_pair(std::slice::from_ref(&f), std::slice::from_ref(&f), &c).unwrap();
            assert!(r.field.max_magnitude() < 0.05, "{kind}: {}", r.field.max_magnitude());
        }
    }

    #[test]
    fn zero_lambda_self_registration_is_optimal() {
        let f = tags(24);
        for kind in [LossKind::Mse, LossKind::Ncc, LossKind::Ssim, LossKind::Mind] {
            let c = RegConfig { lambda: 0.0, ..cfg(kind) };
            let r = register_pair(std::slice::from_ref(&f), std::slice::from_ref(&f), &c).unwrap();
            let opt = optimum_value(kind).unwrap();
            let last = *r.similarity_trace.last().unwrap();
            let tol = if kind == LossKind::Ncc { 1e-3 } else { 1e-4 };
            assert!((last - opt).abs() < tol, "{kind}: {last}");
        }
    }

    #[test]
    fn recovers_constant_shift() {
        let f = tags(48);
        let shift = VectorField2D::constant(48, 48, 1.5, -1.0);
        // moving = f shifted so that warping it by `shift` gives back f
        let m = warp_image(&f, &shift.scaled(-1.0)).unwrap();
        let r = register_pair(&[f], &[m], &cfg(LossKind::Ncc)).unwrap();
        let (u, v) = r.field.get(24, 24);
        assert!((u - 1.5).abs() < 0.2 && (v + 1.0).abs() < 0.2, "{u} {v}");
    }

    #[test]
    fn smoothness_shrinks_as_lambda_grows() {
        let f = tags(32);
        let m = warp_image(&f, &VectorField2D::from_fn(32, 32, |x, y| {
            (0.8 * (x as f64 / 5.0).sin(), 0.6 * (y as f64 / 4.0).cos())
        }))
        .unwrap();
        let mut prev = f64::INFINITY;
        for lambda in [0.01, 0.1, 1.0, 10.0] {
            let c = RegConfig { lambda, ..cfg(LossKind::Mse) };
            let r = register_pair(std::slice::from_ref(&f), std::slice::from_ref(&m), &c).unwrap();
            let s = *r.smoothness_trace.last().unwrap();
            assert!(s <= prev + 1e-12, "lambda {lambda}: {s} > {prev}");
            prev = s;
        }
    }

    #[test]
    fn traces_are_consistent_and_monotone() {
        let f = tags(32);
        let m = warp_image(&f, &VectorField2D::constant(32, 32, 0.7, 0.4)).unwrap();
        for kind in LossKind::ALL {
            let c = RegConfig { lambda: 0.05, ..cfg(kind) };
            let r = register_pair(std::slice::from_ref(&f), std::slice::from_ref(&m), &c).unwrap();
            for i in 0..r.objective_trace.len() {
                let sum = r.similarity_trace[i] + c.lambda * r.smoothness_trace[i];
                assert!((r.objective_trace[i] - sum).abs() < 1e-9);
            }
            let mut bounds = r.level_starts.clone();
            bounds.push(r.objective_trace.len());
            for win in bounds.windows(2) {
                let level = &r.objective_trace[win[0]..win[1]];
                assert!(level.windows(2).all(|p| p[1] <= p[0]), "{kind}");
            }
        }
    }

    #[test]
    fn objective_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut img = || Image2D::from_fn(8, 8, |_, _| rng.random_range(0.0..1.0));
        let fixed = vec![img(), img()];
        let moving = vec![img(), img()];
        let field = VectorField2D::from_fn(8, 8, |x, y| {
            (0.3 + 0.05 * x as f64 - 0.02 * y as f64, -0.2 + 0.03 * y as f64)
        });
        for kind in LossKind::ALL {
            let loss = LossConfig::of(kind);
            let obj = objective(&fixed, &moving, &field, 0.1, &loss).unwrap();
            let step = 1e-5;
            let (mut num, mut den) = (0.0, 0.0);
            for c in 0..2 {
                for i in 0..64 {
                    let eval = |s: f64| {
                        let (mut u, mut v) = (field.u().to_vec(), field.v().to_vec());
                        if c == 0 { u[i] += s } else { v[i] += s }
                        let f = VectorField2D::from_vecs(8, 8, u, v).unwrap();
                        objective(&fixed, &moving, &f, 0.1, &loss).unwrap().total
                    };
                    let fd = (eval(step) - eval(-step)) / (2.0 * step);
                    let an = if c == 0 { obj.grad.u()[i] } else { obj.grad.v()[i] };
                    num += (fd - an).powi(2);
                    den += fd * fd;
                }
            }
            let err = (num / den).sqrt();
            assert!(err < 1e-3, "{kind}: {err}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = Image2D::zeros(16, 16);
        let b = Image2D::zeros(16, 12);
        assert!(register_pair(std::slice::from_ref(&a), &[b], &RegConfig::default()).is_err());
        assert!(register_pair(std::slice::from_ref(&a), &[], &RegConfig::default()).is_err());
        let bad = RegConfig { levels: 0, ..Default::default() };
        assert!(register_pair(std::slice::from_ref(&a), std::slice::from_ref(&a), &bad).is_err());
        assert!(register_movie(&[vec![a]], &RegConfig::default()).is_err());
    }

    #[test]
    fn movie_results_follow_frames() {
        let f = tags(16);
        let frames: Vec<Vec<Image2D>> = (0..4).map(|_| vec![f.clone()]).collect();
        let c = RegConfig { iters_per_level: 5, ..Default::default() };
        let rs = register_movie(&frames, &c).unwrap();
        assert_eq!(rs.len(), 3);
        assert_eq!(rs[0], register_pair(&frames[0], &frames[1], &c).unwrap());
    }
}
