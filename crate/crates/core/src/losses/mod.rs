//! Similarity objectives and the displacement smoothness penalty.
//!
//! Every similarity is expressed as a value to minimise (similarities are
//! negated) together with its gradient with respect to the warped moving
//! image.

mod mi;
mod mind;
mod mse;
mod ncc;
mod ngf;
mod smoothness;
mod ssim;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imgcore::Image2D;

pub use mi::mutual_information;
pub use mind::{mind, mind_descriptors};
pub use mse::mse;
pub use ncc::ncc_local;
pub use ngf::ngf;
pub use smoothness::smoothness;
pub use ssim::ssim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    Ncc,
    Mi,
    Ssim,
    Ngf,
    Mind,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::Mse,
        LossKind::Ncc,
        LossKind::Mi,
        LossKind::Ssim,
        LossKind::Ngf,
        LossKind::Mind,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Ncc => "ncc",
            LossKind::Mi => "mi",
            LossKind::Ssim => "ssim",
            LossKind::Ngf => "ngf",
            LossKind::Mind => "mind",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown loss '{s}'")))
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MindNeighborhood {
    FourNeighbor,
}

impl MindNeighborhood {
    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            MindNeighborhood::FourNeighbor => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
        }
    }
}

/// Loss selection and the hyperparameters of every loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub kind: LossKind,
    /// Side of the square NCC window, odd.
    pub ncc_window: usize,
    pub mi_bins: usize,
    /// Parzen kernel width in bins.
    pub mi_parzen_sigma: f64,
    /// Side of the Gaussian SSIM window, odd.
    pub ssim_window: usize,
    pub ssim_sigma: f64,
    pub ssim_c1: f64,
    pub ssim_c2: f64,
    /// Exponent on the luminance factor.
    pub ssim_alpha: f64,
    /// Exponent on the contrast factor.
    pub ssim_beta: f64,
    /// Exponent on the structure factor.
    pub ssim_gamma: f64,
    pub ngf_epsilon: f64,
    pub mind_patch_radius: usize,
    pub mind_neighborhood: MindNeighborhood,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            kind: LossKind::Mse,
            ncc_window: 9,
            mi_bins: 32,
            mi_parzen_sigma: 1.0,
            ssim_window: 11,
            ssim_sigma: 1.5,
            ssim_c1: 0.01 * 0.01,
            ssim_c2: 0.03 * 0.03,
            ssim_alpha: 1.0,
            ssim_beta: 1.0,
            ssim_gamma: 1.0,
            ngf_epsilon: 0.01,
            mind_patch_radius: 1,
            mind_neighborhood: MindNeighborhood::FourNeighbor,
        }
    }
}

impl LossConfig {
    pub fn of(kind: LossKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let odd = |w: usize| w >= 3 && w % 2 == 1;
        if !odd(self.ncc_window) {
            return Err(invalid(format!("ncc_window {} must be odd and >= 3", self.ncc_window)));
        }
        if !odd(self.ssim_window) {
            return Err(invalid(format!("ssim_window {} must be odd and >= 3", self.ssim_window)));
        }
        if self.mi_bins < 8 {
            return Err(invalid(format!("mi_bins {} below 8", self.mi_bins)));
        }
        let positive = [
            ("mi_parzen_sigma", self.mi_parzen_sigma),
            ("ssim_sigma", self.ssim_sigma),
            ("ssim_c1", self.ssim_c1),
            ("ssim_c2", self.ssim_c2),
            ("ssim_alpha", self.ssim_alpha),
            ("ssim_beta", self.ssim_beta),
            ("ssim_gamma", self.ssim_gamma),
            ("ngf_epsilon", self.ngf_epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.mind_patch_radius == 0 {
            return Err(invalid("mind_patch_radius must be at least 1"));
        }
        Ok(())
    }
}

/// Loss value and its gradient with respect to the warped moving image.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: Image2D,
}

/// Evaluates the loss selected by `config.kind`.
pub fn evaluate(fixed: &Image2D, moving: &Image2D, config: &LossConfig) -> Result<LossEval> {
    config.validate()?;
    match config.kind {
        LossKind::Mse => mse(fixed, moving),
        LossKind::Ncc => ncc_local(fixed, moving, config),
        LossKind::Mi => mutual_information(fixed, moving, config),
        LossKind::Ssim => ssim(fixed, moving, config),
        LossKind::Ngf => ngf(fixed, moving, config),
        LossKind::Mind => mind(fixed, moving, config),
    }
}

/// Value at a loss's optimum for identical textured inputs, where one exists
/// independently of the image.
pub fn optimum_value(kind: LossKind) -> Option<f64> {
    match kind {
        LossKind::Mse | LossKind::Mind => Some(0.0),
        LossKind::Ncc | LossKind::Ssim => Some(-1.0),
        LossKind::Mi | LossKind::Ngf => None,
    }
}
