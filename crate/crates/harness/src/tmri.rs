//! Header-prefixed binary storage for images and fields.
//!
//! Layout, little-endian: magic `TMRI`, version `u16`, dtype tag `u8`,
//! channel count `u8`, width `u32`, height `u32`, then the channels one
//! after another, each row-major `f32`.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use tmri_core::imgcore::{BinaryMask2D, ComplexImage2D, Image2D, VectorField2D};

pub const MAGIC: &[u8; 4] = b"TMRI";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 4 + 4;

/// Raw multi-channel array as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TmriArray {
    pub width: usize,
    pub height: usize,
    pub channels: Vec<Vec<f64>>,
}

pub fn encode(array: &TmriArray) -> Result<Vec<u8>> {
    let n = array.width * array.height;
    ensure!(!array.channels.is_empty() && array.channels.len() <= u8::MAX as usize, "bad channel count");
    ensure!(array.channels.iter().all(|c| c.len() == n), "channel length does not match dimensions");
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * array.channels.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(array.channels.len() as u8);
    out.extend_from_slice(&u32::try_from(array.width)?.to_le_bytes());
    out.extend_from_slice(&u32::try_from(array.height)?.to_le_bytes());
    for c in &array.channels {
        for &v in c {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<TmriArray> {
    ensure!(bytes.len() >= HEADER_LEN, "truncated header");
    ensure!(&bytes[0..4] == MAGIC, "bad magic bytes");
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    ensure!(version == VERSION, "unsupported version {version}");
    ensure!(bytes[6] == DTYPE_F32, "unsupported dtype tag {}", bytes[6]);
    let nc = bytes[7] as usize;
    let width = u32::from_le_bytes(bytes[8..12].try_into()?) as usize;
    let height = u32::from_le_bytes(bytes[12..16].try_into()?) as usize;
    let n = width * height;
    let expected = HEADER_LEN + 4 * n * nc;
    if bytes.len() != expected {
        bail!("payload is {} bytes, expected {expected}", bytes.len());
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let channels = values.chunks(n.max(1)).take(nc).map(|c| c.to_vec()).collect();
    Ok(TmriArray { width, height, channels })
}

pub fn write(path: &Path, array: &TmriArray) -> Result<()> {
    fs::write(path, encode(array)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read(path: &Path) -> Result<TmriArray> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn expect_channels(a: &TmriArray, n: usize, path: &Path) -> Result<()> {
    ensure!(a.channels.len() == n, "{} has {} channels, expected {n}", path.display(), a.channels.len());
    Ok(())
}

pub fn write_image(path: &Path, img: &Image2D) -> Result<()> {
    write(path, &TmriArray { width: img.width(), height: img.height(), channels: vec![img.data().to_vec()] })
}

pub fn read_image(path: &Path) -> Result<Image2D> {
    let a = read(path)?;
    expect_channels(&a, 1, path)?;
    let data = a.channels.into_iter().next().expect("one channel");
    Ok(Image2D::from_vec(a.width, a.height, data)?)
}

pub fn write_complex(path: &Path, img: &ComplexImage2D) -> Result<()> {
    write(path, &TmriArray { width: img.width(), height: img.height(), channels: vec![img.re().to_vec(), img.im().to_vec()] })
}

pub fn read_complex(path: &Path) -> Result<ComplexImage2D> {
    let a = read(path)?;
    expect_channels(&a, 2, path)?;
    let mut it = a.channels.into_iter();
    let (re, im) = (it.next().expect("re"), it.next().expect("im"));
    Ok(ComplexImage2D::from_vecs(a.width, a.height, re, im)?)
}

pub fn write_field(path: &Path, field: &VectorField2D) -> Result<()> {
    write(path, &TmriArray { width: field.width(), height: field.height(), channels: vec![field.u().to_vec(), field.v().to_vec()] })
}

pub fn read_field(path: &Path) -> Result<VectorField2D> {
    let a = read(path)?;
    expect_channels(&a, 2, path)?;
    let mut it = a.channels.into_iter();
    let (u, v) = (it.next().expect("u"), it.next().expect("v"));
    Ok(VectorField2D::from_vecs(a.width, a.height, u, v)?)
}

pub fn write_mask(path: &Path, mask: &BinaryMask2D) -> Result<()> {
    write_image(path, &mask.to_image())
}

pub fn read_mask(path: &Path) -> Result<BinaryMask2D> {
    let img = read_image(path)?;
    Ok(BinaryMask2D::from_vec(img.width(), img.height(), img.data().iter().map(|v| *v > 0.5).collect())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let a = TmriArray { width: 3, height: 2, channels: vec![vec![1.0; 6], vec![-0.5; 6]] };
        let bytes = encode(&a).unwrap();
        assert_eq!(&bytes[0..4], b"TMRI");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(bytes[6], DTYPE_F32);
        assert_eq!(bytes[7], 2);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 16 + 4 * 12);
        // second channel starts after the whole first channel
        assert_eq!(f32::from_le_bytes(bytes[16 + 24..16 + 28].try_into().unwrap()), -0.5);
        assert_eq!(decode(&bytes).unwrap(), a);
    }

    #[test]
    fn rejects_corruption() {
        let a = TmriArray { width: 2, height: 2, channels: vec![vec![0.25; 4]] };
        let mut bytes = encode(&a).unwrap();
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(decode(&bytes).is_err());
    }

    #[test]
    fn typed_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let field = VectorField2D::from_fn(5, 4, |x, y| (x as f64 * 0.5, -(y as f64) * 0.25));
        let p = dir.path().join("f.tmri");
        write_field(&p, &field).unwrap();
        assert_eq!(read_field(&p).unwrap(), field);
        let mask = BinaryMask2D::from_fn(5, 4, |x, y| x > y);
        write_mask(&p, &mask).unwrap();
        assert_eq!(read_mask(&p).unwrap(), mask);
        assert!(read_field(&p).is_err());
    }

    proptest::proptest! {
        #[test]
        fn f32_values_survive_encoding(w in 1usize..6, h in 1usize..6, nc in 1usize..4, seed in proptest::prelude::any::<u32>()) {
            let channels: Vec<Vec<f64>> = (0..nc)
                .map(|c| (0..w * h).map(|i| ((seed as f32) * 1e-3 - (c * 31 + i) as f32 * 0.37) as f64).collect())
                .collect();
            let a = TmriArray { width: w, height: h, channels };
            let bytes = encode(&a).unwrap();
            proptest::prop_assert_eq!(bytes.len(), HEADER_LEN + 4 * w * h * nc);
            proptest::prop_assert_eq!(decode(&bytes).unwrap(), a);
        }
    }
}
