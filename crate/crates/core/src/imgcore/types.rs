use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 || len != width * height {
        return Err(Error::BadLength { width, height, len });
    }
    Ok(())
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// Row-major scalar raster. Pixel `(x, y)` sits at continuous coordinate `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image2D {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image2D {
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        check_finite(&data)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Internal constructor for buffers already known to be valid.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0 && value.is_finite());
        Self::from_raw(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    ///
    /// Panics if `f` produces a non-finite value.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0);
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                assert!(v.is_finite(), "non-finite pixel at ({x}, {y})");
                data.push(v);
            }
        }
        Self::from_raw(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Pointwise map. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        assert!(data.iter().all(|v| v.is_finite()), "map produced a non-finite value");
        Self::from_raw(self.width, self.height, data)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn ensure_same_dims(&self, other: &Image2D) -> Result<()> {
        same_dims(self.dims(), other.dims())
    }
}

pub(crate) fn same_dims(expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Dense per-pixel displacement in pixel units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField2D {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl VectorField2D {
    pub fn from_vecs(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        check_len(width, height, u.len())?;
        check_len(width, height, v.len())?;
        check_finite(&u)?;
        check_finite(&v)?;
        Ok(Self { width, height, u, v })
    }

    pub(crate) fn from_raw(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Self {
        debug_assert!(u.len() == width * height && v.len() == width * height);
        Self { width, height, u, v }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, u: f64, v: f64) -> Self {
        assert!(width > 0 && height > 0 && u.is_finite() && v.is_finite());
        let n = width * height;
        Self::from_raw(width, height, vec![u; n], vec![v; n])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (f64, f64)) -> Self {
        assert!(width > 0 && height > 0);
        let n = width * height;
        let (mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                assert!(a.is_finite() && b.is_finite(), "non-finite displacement at ({x}, {y})");
                u.push(a);
                v.push(b);
            }
        }
        Self::from_raw(width, height, u, v)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    #[inline]
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn into_vecs(self) -> (Vec<f64>, Vec<f64>) {
        (self.u, self.v)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn u_image(&self) -> Image2D {
        Image2D::from_raw(self.width, self.height, self.u.clone())
    }

    pub fn v_image(&self) -> Image2D {
        Image2D::from_raw(self.width, self.height, self.v.clone())
    }

    pub fn from_images(u: &Image2D, v: &Image2D) -> Result<Self> {
        u.ensure_same_dims(v)?;
        Ok(Self::from_raw(u.width(), u.height(), u.data().to_vec(), v.data().to_vec()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        assert!(s.is_finite());
        Self::from_raw(
            self.width,
            self.height,
            self.u.iter().map(|a| a * s).collect(),
            self.v.iter().map(|a| a * s).collect(),
        )
    }

    /// Pointwise sum of two fields (not a composition).
    pub fn add(&self, other: &VectorField2D) -> Result<Self> {
        same_dims(self.dims(), other.dims())?;
        Ok(Self::from_raw(
            self.width,
            self.height,
            self.u.iter().zip(&other.u).map(|(a, b)| a + b).collect(),
            self.v.iter().zip(&other.v).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.u.iter().zip(&self.v).map(|(a, b)| a.hypot(*b))
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitudes().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().chain(&self.v).all(|&a| a == 0.0)
    }
}

/// Complex raster; the k-space carrier and the complex-valued reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage2D {
    width: usize,
    height: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ComplexImage2D {
    pub fn from_vecs(width: usize, height: usize, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        check_len(width, height, re.len())?;
        check_len(width, height, im.len())?;
        check_finite(&re)?;
        check_finite(&im)?;
        Ok(Self { width, height, re, im })
    }

    pub(crate) fn from_raw(width: usize, height: usize, re: Vec<f64>, im: Vec<f64>) -> Self {
        Self { width, height, re, im }
    }

    pub fn from_real(img: &Image2D) -> Self {
        Self::from_raw(img.width(), img.height(), img.data().to_vec(), vec![0.0; img.len()])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn re(&self) -> &[f64] {
        &self.re
    }

    #[inline]
    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.re, &mut self.im)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.re[i], self.im[i])
    }

    pub fn real_part(&self) -> Image2D {
        Image2D::from_raw(self.width, self.height, self.re.clone())
    }

    pub fn magnitude(&self) -> Image2D {
        Image2D::from_raw(
            self.width,
            self.height,
            self.re.iter().zip(&self.im).map(|(a, b)| a.hypot(*b)).collect(),
        )
    }

    /// Scales both parts by a real constant.
    pub fn scaled(&self, s: f64) -> Self {
        Self::from_raw(
            self.width,
            self.height,
            self.re.iter().map(|a| a * s).collect(),
            self.im.iter().map(|a| a * s).collect(),
        )
    }
}

/// Per-pixel boolean support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask2D {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask2D {
    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_len(width, height, data.len())?;
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(width > 0 && height > 0);
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        assert!(width > 0 && height > 0);
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Square-neighbourhood erosion; pixels outside the raster count as background.
    pub fn eroded(&self, radius: usize) -> Self {
        let (w, h) = (self.width as isize, self.height as isize);
        let r = radius as isize;
        Self::from_fn(self.width, self.height, |x, y| {
            let (x, y) = (x as isize, y as isize);
            (-r..=r).all(|dy| {
                (-r..=r).all(|dx| {
                    let (xx, yy) = (x + dx, y + dy);
                    xx >= 0 && yy >= 0 && xx < w && yy < h && self.data[(yy * w + xx) as usize]
                })
            })
        })
    }

    pub fn to_image(&self) -> Image2D {
        Image2D::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }

    /// Indices of set pixels in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.data.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
}
