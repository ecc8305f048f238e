//! `FVT1` tensor files: magic `"FVT1"`, `u32` LE rank, `rank` × `u32` LE
//! dims, then the row-major payload as LE IEEE-754 `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::tensor::{element_count, Tensor, TensorError};

pub const MAGIC: [u8; 4] = *b"FVT1";

#[derive(Debug, Error)]
pub enum TensorIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {found:?}, expected \"FVT1\"")]
    BadMagic { found: Vec<u8> },
    #[error("truncated tensor file: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("tensor dimensions {dims:?} overflow the addressable size")]
    DimOverflow { dims: Vec<u64> },
    #[error("non-finite value {value} at flat index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("{0} unexpected trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("invalid shape: {0}")]
    InvalidShape(#[from] TensorError),
}

impl TensorIoError {
    /// Stable machine-readable code for each failure class.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::BadMagic { .. } => "bad_magic",
            Self::Truncated { .. } => "truncated",
            Self::DimOverflow { .. } => "dim_overflow",
            Self::NonFinite { .. } => "non_finite",
            Self::TrailingBytes(_) => "trailing_bytes",
            Self::InvalidShape(_) => "invalid_shape",
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.rank() + 8 * t.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn take(bytes: &[u8], at: usize, n: usize) -> Result<&[u8], TensorIoError> {
    let end = at.checked_add(n).ok_or(TensorIoError::Truncated { needed: usize::MAX, found: bytes.len() })?;
    bytes.get(at..end).ok_or(TensorIoError::Truncated { needed: end, found: bytes.len() })
}

fn u32_at(bytes: &[u8], at: usize) -> Result<u32, TensorIoError> {
    let b = take(bytes, at, 4)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

/// Parses the header, returning the shape and the payload offset.
fn decode_header(bytes: &[u8]) -> Result<(Vec<usize>, usize), TensorIoError> {
    let magic = bytes.get(..4).unwrap_or(bytes);
    if magic != MAGIC {
        // A short file whose prefix is still "FVT1"-compatible is truncation, not bad magic.
        if magic.len() < 4 && MAGIC.starts_with(magic) {
            return Err(TensorIoError::Truncated { needed: 4, found: bytes.len() });
        }
        return Err(TensorIoError::BadMagic { found: magic.to_vec() });
    }
    let rank = u32_at(bytes, 4)? as usize;
    let dims_bytes = rank.checked_mul(4).ok_or(TensorIoError::DimOverflow { dims: vec![rank as u64] })?;
    take(bytes, 8, dims_bytes)?;
    let raw: Vec<u64> = (0..rank).map(|i| u32_at(bytes, 8 + 4 * i).map(u64::from)).collect::<Result<_, _>>()?;
    let shape: Vec<usize> = raw.iter().map(|&d| d as usize).collect();
    let count = match element_count(&shape) {
        Err(TensorError::Overflow(_)) => return Err(TensorIoError::DimOverflow { dims: raw }),
        other => other?,
    };
    if count.checked_mul(8).is_none() {
        return Err(TensorIoError::DimOverflow { dims: raw });
    }
    Ok((shape, 8 + dims_bytes))
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor, TensorIoError> {
    let (shape, offset) = decode_header(bytes)?;
    let count = element_count(&shape)?;
    let payload = take(bytes, offset, count * 8)?;
    let trailing = bytes.len() - offset - count * 8;
    if trailing > 0 {
        return Err(TensorIoError::TrailingBytes(trailing));
    }
    let mut data = Vec::with_capacity(count);
    for (index, chunk) in payload.chunks_exact(8).enumerate() {
        let value = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        if !value.is_finite() {
            return Err(TensorIoError::NonFinite { index, value });
        }
        data.push(value);
    }
    Ok(Tensor::new(shape, data)?)
}

pub fn write_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<(), TensorIoError> {
    let path = path.as_ref();
    if let Some((index, &value)) = t.data().iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(TensorIoError::NonFinite { index, value });
    }
    if t.shape().iter().any(|&d| d > u32::MAX as usize) {
        return Err(TensorIoError::DimOverflow { dims: t.shape().iter().map(|&d| d as u64).collect() });
    }
    let mut f = fs::File::create(path).map_err(|e| TensorIoError::io(path, e))?;
    f.write_all(&encode_tensor(t)).map_err(|e| TensorIoError::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor, TensorIoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| TensorIoError::io(path, e))?;
    decode_tensor(&bytes)
}

/// Reads only the header and checks the file is long enough for its payload.
pub fn read_tensor_shape(path: impl AsRef<Path>) -> Result<Vec<usize>, TensorIoError> {
    let path = path.as_ref();
    let mut f = fs::File::open(path).map_err(|e| TensorIoError::io(path, e))?;
    let file_len = f.metadata().map_err(|e| TensorIoError::io(path, e))?.len() as usize;
    let mut head = vec![0u8; 8];
    let n = f.read(&mut head).map_err(|e| TensorIoError::io(path, e))?;
    head.truncate(n);
    if head.len() == 8 {
        let rank = u32::from_le_bytes([head[4], head[5], head[6], head[7]]) as usize;
        let mut dims = vec![0u8; rank.saturating_mul(4).min(file_len)];
        f.read_exact(&mut dims).map_err(|e| TensorIoError::io(path, e))?;
        head.extend_from_slice(&dims);
    }
    let (shape, offset) = decode_header(&head)?;
    let needed = offset + element_count(&shape)? * 8;
    if file_len < needed {
        return Err(TensorIoError::Truncated { needed, found: file_len });
    }
    if file_len > needed {
        return Err(TensorIoError::TrailingBytes(file_len - needed));
    }
    Ok(shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Encodes the positive rational `num/den` as IEEE-754 binary64 bits with
    /// round-half-to-even, using integer arithmetic only.
    fn ieee754_bits_of_ratio(num: u128, den: u128) -> u64 {
        assert!(num > 0 && den > 0);
        // Find e with 2^e <= num/den < 2^(e+1).
        let mut e: i32 = 0;
        while num >= den << (e + 1) as u32 && e < 60 {
            e += 1;
        }
        while (num << (-e) as u32) < den {
            e -= 1;
        }
        // mantissa = round(num/den * 2^(52 - e))
        let shift = 52 - e;
        assert!((0..70).contains(&shift));
        let scaled = num << shift as u32;
        let (q, r) = (scaled / den, scaled % den);
        let twice = 2 * r;
        let m = if twice > den || (twice == den && q % 2 == 1) { q + 1 } else { q };
        let biased = (e + 1023) as u64;
        (biased << 52) | ((m as u64) & ((1u64 << 52) - 1))
    }

    #[test]
    fn zeros_round_trip() {
        let t = Tensor::zeros(vec![2, 3]).unwrap();
        assert_eq!(decode_tensor(&encode_tensor(&t)).unwrap(), t);
    }

    #[test]
    fn one_third_payload_matches_reference_encoding() {
        let t = Tensor::new(vec![1], vec![1.0 / 3.0]).unwrap();
        let bytes = encode_tensor(&t);
        let expected = ieee754_bits_of_ratio(1, 3);
        assert_eq!(expected, 0x3FD5_5555_5555_5555);
        assert_eq!(&bytes[12..], &expected.to_le_bytes());
    }

    #[test]
    fn golden_bytes_decode() {
        // [2] tensor holding 1.0 and -2.5
        let golden: [u8; 28] = [
            b'F', b'V', b'T', b'1', 1, 0, 0, 0, 2, 0, 0, 0, //
            0, 0, 0, 0, 0, 0, 0xF0, 0x3F, //
            0, 0, 0, 0, 0, 0, 0x04, 0xC0,
        ];
        let t = decode_tensor(&golden).unwrap();
        assert_eq!(t.shape(), &[2]);
        assert_eq!(t.data(), &[1.0, -2.5]);
        assert_eq!(encode_tensor(&t), golden);
    }

    #[test]
    fn distinct_error_codes() {
        let bad = decode_tensor(b"FVT2").unwrap_err();
        assert_eq!(bad.code(), "bad_magic");

        let t = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let bytes = encode_tensor(&t);
        assert_eq!(decode_tensor(&bytes[..bytes.len() - 3]).unwrap_err().code(), "truncated");
        assert_eq!(decode_tensor(&bytes[..6]).unwrap_err().code(), "truncated");

        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(decode_tensor(&long).unwrap_err().code(), "trailing_bytes");

        let mut nan = bytes.clone();
        nan[12..20].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_tensor(&nan).unwrap_err(), TensorIoError::NonFinite { index: 0, .. }));

        let mut huge = Vec::from(MAGIC);
        huge.extend_from_slice(&3u32.to_le_bytes());
        for _ in 0..3 {
            huge.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert_eq!(decode_tensor(&huge).unwrap_err().code(), "dim_overflow");

        let mut zero_dim = Vec::from(MAGIC);
        zero_dim.extend_from_slice(&1u32.to_le_bytes());
        zero_dim.extend_from_slice(&0u32.to_le_bytes());
        assert_eq!(decode_tensor(&zero_dim).unwrap_err().code(), "invalid_shape");
    }

    #[test]
    fn write_rejects_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor::new(vec![1], vec![f64::INFINITY]).unwrap();
        let err = write_tensor(&t, dir.path().join("x.fvt")).unwrap_err();
        assert_eq!(err.code(), "non_finite");
    }

    #[test]
    fn header_only_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.fvt");
        let t = Tensor::zeros(vec![3, 4, 5]).unwrap();
        write_tensor(&t, &path).unwrap();
        assert_eq!(read_tensor_shape(&path).unwrap(), vec![3, 4, 5]);
        assert_eq!(read_tensor(&path).unwrap(), t);
    }

    fn finite_tensor() -> impl Strategy<Value = Tensor> {
        prop::collection::vec(1usize..=16, 1..=4).prop_flat_map(|shape| {
            let n: usize = shape.iter().product();
            let values = prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO;
            prop::collection::vec(values, n).prop_map(move |data| Tensor::new(shape.clone(), data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(t in finite_tensor()) {
            let back = decode_tensor(&encode_tensor(&t)).unwrap();
            prop_assert_eq!(back.shape(), t.shape());
            for (a, b) in back.data().iter().zip(t.data()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
