//! Raster types plus sampling, warping, differencing, pyramid and spectral primitives.
//!
//! Pixel `(i, j)` sits at continuous coordinate `(i, j)` and displacements are
//! in pixel units of the raster they live on. All samplers clamp to the edge.

mod filter;
mod spectral;
mod types;
mod warp;

pub use filter::{downsample2, gaussian_blur, gradient, gradient_adjoint, upsample2};
pub(crate) use filter::{gaussian_kernel, window_sum};
pub use spectral::{bin_frequency, dft2, dft2_complex, idft2};
pub use types::{BinaryMask2D, ComplexImage2D, Image2D, VectorField2D};
pub(crate) use types::same_dims;
pub use warp::{bilinear_sample, compose, invert_field, warp_image, warp_image_with_jacobian, warp_mask};
