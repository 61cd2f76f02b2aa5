//! Longitudinal magnetisation under a 1:1 SPAMM tag followed by a train of
//! imaging RF tips.
//!
//! Just before the `n`-th tip the magnetisation is `a_n cos(k x) + b_n`, where
//! each repetition interval scales the modulated part by `cos(alpha) exp(-TR/T1)`
//! and relaxes the DC part toward equilibrium.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imgcore::Image2D;

/// Orientation of the tag lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagDirection {
    /// Lines run along x; the modulation varies along y.
    Horizontal,
    /// Lines run along y; the modulation varies along x.
    Vertical,
}

impl TagDirection {
    /// Coordinate along which the tag pattern is modulated.
    #[inline]
    pub fn axis_coord(self, x: usize, y: usize) -> f64 {
        match self {
            TagDirection::Horizontal => y as f64,
            TagDirection::Vertical => x as f64,
        }
    }
}

/// Pulse-sequence physics for one tagged acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpammParams {
    /// Longitudinal relaxation time, ms.
    pub t1: f64,
    /// Repetition time, ms.
    pub tr: f64,
    /// Imaging tip angle, radians.
    pub alpha: f64,
    /// Equilibrium magnetisation.
    pub m0: f64,
    /// Spatial tag period, pixels.
    pub tag_period: f64,
    pub direction: TagDirection,
}

impl SpammParams {
    pub fn new(t1: f64, tr: f64, alpha_deg: f64, tag_period: f64, direction: TagDirection) -> Result<Self> {
        let p = Self {
            t1,
            tr,
            alpha: alpha_deg.to_radians(),
            m0: 1.0,
            tag_period,
            direction,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.t1, self.tr, self.alpha, self.m0, self.tag_period]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("spamm parameters must be finite"));
        }
        if !(self.t1 > 0.0 && self.tr > 0.0 && self.tr < self.t1) {
            return Err(invalid(format!(
                "need 0 < tr < t1, got tr={} t1={}",
                self.tr, self.t1
            )));
        }
        // alpha = 0 is admitted: it is the pure-relaxation reference model.
        if !(self.alpha >= 0.0 && self.alpha < PI / 2.0) {
            return Err(invalid(format!("tip angle {} rad outside [0, pi/2)", self.alpha)));
        }
        if self.m0 <= 0.0 {
            return Err(invalid("m0 must be positive"));
        }
        if self.tag_period < 4.0 {
            return Err(invalid(format!("tag period {} px below 4", self.tag_period)));
        }
        Ok(())
    }

    /// Tag wavenumber in radians per pixel.
    #[inline]
    pub fn k_tag(&self) -> f64 {
        2.0 * PI / self.tag_period
    }

    /// `exp(-tr / t1)`.
    #[inline]
    pub fn relaxation(&self) -> f64 {
        (-self.tr / self.t1).exp()
    }

    /// Per-interval decay of the modulated component, `cos(alpha) exp(-tr/t1)`.
    #[inline]
    pub fn decay_ratio(&self) -> f64 {
        self.alpha.cos() * self.relaxation()
    }

    pub fn with_direction(mut self, direction: TagDirection) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }
}

/// Modulation amplitude `a` and DC offset `b` of `M_z = a cos(k x) + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingCoeffs {
    pub a: f64,
    pub b: f64,
}

/// Initial cosine magnetisation pattern, values in `[-1, 1]`.
pub fn tag_pattern(params: &SpammParams, width: usize, height: usize) -> Image2D {
    let k = params.k_tag();
    Image2D::from_fn(width, height, |x, y| (k * params.direction.axis_coord(x, y)).cos())
}

/// Closed-form coefficients after `n` repetition intervals.
pub fn fading_coeffs(params: &SpammParams, n: u32) -> FadingCoeffs {
    let q = params.relaxation();
    let cq = params.decay_ratio();
    let pow = cq.powi(n as i32);
    let b = if n == 0 {
        0.0
    } else if cq == 1.0 {
        params.m0 * (1.0 - q) * n as f64
    } else {
        params.m0 * (1.0 - q) * (1.0 - pow) / (1.0 - cq)
    };
    FadingCoeffs {
        a: params.m0 * pow,
        b,
    }
}

/// Literal recurrence: relax-and-tip applied `n` times to the cosine and DC
/// coefficients separately.
pub fn fading_coeffs_iterative(params: &SpammParams, n: u32) -> FadingCoeffs {
    let q = params.relaxation();
    let c = params.alpha.cos();
    let (mut a, mut b) = (params.m0, 0.0);
    for _ in 0..n {
        // tip scales M_z by cos(alpha); relaxation then recovers toward m0
        a = a * c * q;
        b = b * c * q + params.m0 * (1.0 - q);
    }
    FadingCoeffs { a, b }
}

/// Fixed point of the DC recurrence.
pub fn steady_state(params: &SpammParams) -> f64 {
    let q = params.relaxation();
    params.m0 * (1.0 - q) / (1.0 - params.decay_ratio())
}

/// Signed tagged intensity at frame `n`: `anatomy * (a_n cos(k s) + b_n) / m0`.
pub fn frame_intensity(anatomy: &Image2D, params: &SpammParams, n: u32) -> Result<Image2D> {
    const TOL: f64 = 1e-12;
    if anatomy.data().iter().any(|&v| !(-TOL..=1.0 + TOL).contains(&v)) {
        return Err(invalid("anatomy values must lie in [0, 1]"));
    }
    let FadingCoeffs { a, b } = fading_coeffs(params, n);
    let k = params.k_tag();
    let (w, h) = anatomy.dims();
    Ok(Image2D::from_fn(w, h, |x, y| {
        let s = params.direction.axis_coord(x, y);
        anatomy.get(x, y) * (a * (k * s).cos() + b) / params.m0
    }))
}
