//! Minimal binary tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "SEGT"            4 bytes magic
//! version: u8       always 1
//! dtype:   u8       1 = f32, 2 = u8, 3 = f64
//! rank:    u32
//! dims:    rank * u32
//! payload: row-major elements, little-endian
//! ```
//!
//! Images are stored as rank 3 `[height, width, channels]` f32, label maps
//! as rank 2 `[height, width]` u8, probability maps and network weights as
//! f64 (rank 3 `[height, width, classes]` for probability maps).

use std::fs;
use std::path::Path;

use super::{Image, LabelMap, ProbMap};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SEGT";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Dtype {
    F32 = 1,
    U8 = 2,
    F64 = 3,
}

impl Dtype {
    fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(Dtype::F32),
            2 => Ok(Dtype::U8),
            3 => Ok(Dtype::F64),
            other => Err(Error::UnknownDtype(other)),
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    F32 { shape: Vec<usize>, data: Vec<f32> },
    U8 { shape: Vec<usize>, data: Vec<u8> },
    F64 { shape: Vec<usize>, data: Vec<f64> },
}

impl Tensor {
    pub fn shape(&self) -> &[usize] {
        match self {
            Tensor::F32 { shape, .. } | Tensor::U8 { shape, .. } | Tensor::F64 { shape, .. } => shape,
        }
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            Tensor::F32 { .. } => Dtype::F32,
            Tensor::U8 { .. } => Dtype::U8,
            Tensor::F64 { .. } => Dtype::F64,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let shape = self.shape();
        let numel: usize = shape.iter().product();
        let mut out = Vec::with_capacity(10 + 4 * shape.len() + numel * self.dtype().size());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.dtype() as u8);
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match self {
            Tensor::F32 { data, .. } => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            Tensor::U8 { data, .. } => out.extend_from_slice(data),
            Tensor::F64 { data, .. } => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic: [u8; 4] = cur.take(4)?.try_into().unwrap();
        if &magic != MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let version = cur.take(1)?[0];
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dtype = Dtype::from_code(cur.take(1)?[0])?;
        let rank = cur.u32()? as usize;
        let shape = (0..rank).map(|_| cur.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::shape("tensor dimensions overflow"))?;
        let expected = numel
            .checked_mul(dtype.size())
            .ok_or_else(|| Error::shape("tensor dimensions overflow"))?;
        let payload = &bytes[cur.pos..];
        if payload.len() != expected {
            return Err(Error::Truncated {
                expected,
                found: payload.len(),
            });
        }
        Ok(match dtype {
            Dtype::F32 => Tensor::F32 {
                shape,
                data: payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            },
            Dtype::U8 => Tensor::U8 {
                shape,
                data: payload.to_vec(),
            },
            Dtype::F64 => Tensor::F64 {
                shape,
                data: payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            },
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                expected: end,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn save_tensor(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a tensor file. Format errors are reported without path context;
/// I/O errors carry the path.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes)
}

impl From<&Image> for Tensor {
    fn from(img: &Image) -> Self {
        Tensor::F32 {
            shape: vec![img.height(), img.width(), img.channels()],
            data: img.data().to_vec(),
        }
    }
}

impl From<&LabelMap> for Tensor {
    fn from(l: &LabelMap) -> Self {
        Tensor::U8 {
            shape: vec![l.height(), l.width()],
            data: l.data().to_vec(),
        }
    }
}

impl From<&ProbMap> for Tensor {
    fn from(p: &ProbMap) -> Self {
        Tensor::F64 {
            shape: vec![p.height(), p.width(), p.num_classes()],
            data: p.data().to_vec(),
        }
    }
}

impl TryFrom<Tensor> for Image {
    type Error = Error;

    fn try_from(t: Tensor) -> Result<Self> {
        match t {
            Tensor::F32 { shape, data } if shape.len() == 3 => Image::new(shape[0], shape[1], shape[2], data),
            other => Err(Error::TensorKind(format!(
                "expected rank-3 f32 image, got {:?} rank {}",
                other.dtype(),
                other.shape().len()
            ))),
        }
    }
}

impl TryFrom<Tensor> for LabelMap {
    type Error = Error;

    fn try_from(t: Tensor) -> Result<Self> {
        match t {
            Tensor::U8 { shape, data } if shape.len() == 2 => LabelMap::new(shape[0], shape[1], data),
            other => Err(Error::TensorKind(format!(
                "expected rank-2 u8 label map, got {:?} rank {}",
                other.dtype(),
                other.shape().len()
            ))),
        }
    }
}

impl TryFrom<Tensor> for ProbMap {
    type Error = Error;

    fn try_from(t: Tensor) -> Result<Self> {
        match t {
            Tensor::F64 { shape, data } if shape.len() == 3 => ProbMap::new(shape[0], shape[1], shape[2], data),
            other => Err(Error::TensorKind(format!(
                "expected rank-3 f64 probability map, got {:?} rank {}",
                other.dtype(),
                other.shape().len()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header_len(rank: usize) -> usize {
        4 + 1 + 1 + 4 + 4 * rank
    }

    #[test]
    fn label_payload_is_raw_bytes() {
        let l = LabelMap::new(2, 2, vec![0, 1, 1, 0]).unwrap();
        let bytes = Tensor::from(&l).to_bytes();
        assert_eq!(&bytes[..4], b"SEGT");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 2);
        assert_eq!(&bytes[6..10], &2u32.to_le_bytes());
        assert_eq!(&bytes[10..14], &2u32.to_le_bytes());
        assert_eq!(&bytes[14..18], &2u32.to_le_bytes());
        assert_eq!(&bytes[header_len(2)..], &[0, 1, 1, 0]);
    }

    #[test]
    fn probmap_payload_is_ieee_le() {
        let p = ProbMap::new(1, 1, 2, vec![0.25, 0.75]).unwrap();
        let bytes = Tensor::from(&p).to_bytes();
        let payload = &bytes[header_len(3)..];
        let mut expected = 0.25f64.to_le_bytes().to_vec();
        expected.extend_from_slice(&0.75f64.to_le_bytes());
        assert_eq!(payload, expected.as_slice());
    }

    #[test]
    fn image_file_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.segt");
        let img = Image::new(3, 4, 1, (0..12).map(|v| v as f32 * 0.5 - 1.0).collect()).unwrap();
        save_tensor(&Tensor::from(&img), &path).unwrap();
        let first = fs::read(&path).unwrap();
        let back = Image::try_from(load_tensor(&path).unwrap()).unwrap();
        assert_eq!(back, img);
        save_tensor(&Tensor::from(&back), &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = Tensor::from(&LabelMap::zeros(2, 2)).to_bytes();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(Tensor::from_bytes(&bytes), Err(Error::BadMagic { found }) if &found == b"XXXX"));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = Tensor::from(&LabelMap::zeros(2, 2)).to_bytes();
        bytes.pop();
        assert!(matches!(
            Tensor::from_bytes(&bytes),
            Err(Error::Truncated { expected: 4, found: 3 })
        ));
        // truncated inside the header
        assert!(matches!(Tensor::from_bytes(b"SEGT\x01"), Err(Error::Truncated { .. })));
    }

    #[test]
    fn unknown_dtype() {
        let mut bytes = Tensor::from(&LabelMap::zeros(2, 2)).to_bytes();
        bytes[5] = 9;
        assert!(matches!(Tensor::from_bytes(&bytes), Err(Error::UnknownDtype(9))));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let t = Tensor::from(&LabelMap::zeros(2, 2));
        assert!(matches!(Image::try_from(t), Err(Error::TensorKind(_))));
    }

    #[test]
    fn missing_file_has_path_context() {
        let err = load_tensor("/nonexistent/dir/x.segt").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/x.segt"));
    }

    proptest! {
        #[test]
        fn round_trip_all_kinds(h in 1usize..6, w in 1usize..6, c in 1usize..4, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let img = Image::new(h, w, c, (0..h * w * c).map(|_| rng.random_range(-1e3f32..1e3)).collect()).unwrap();
            let lbl = LabelMap::new(h, w, (0..h * w).map(|_| rng.random()).collect()).unwrap();
            let k = c + 1;
            let mut probs = Vec::new();
            for _ in 0..h * w {
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
                let s: f64 = raw.iter().sum();
                probs.extend(raw.iter().map(|v| v / s));
            }
            let pm = ProbMap::from_raw(h, w, k, probs);

            let t = Tensor::from_bytes(&Tensor::from(&img).to_bytes()).unwrap();
            prop_assert_eq!(Image::try_from(t).unwrap(), img);
            let t = Tensor::from_bytes(&Tensor::from(&lbl).to_bytes()).unwrap();
            prop_assert_eq!(LabelMap::try_from(t).unwrap(), lbl);
            let t = Tensor::from_bytes(&Tensor::from(&pm).to_bytes()).unwrap();
            let back = match t { Tensor::F64 { data, .. } => data, _ => unreachable!() };
            prop_assert!(back.iter().zip(pm.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
