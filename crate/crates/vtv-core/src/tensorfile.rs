//! Minimal self-describing binary tensor container.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic   8 bytes  "VTFv0001"
//! dtype   1 byte   0 = f32, 1 = u8
//! ndim    1 byte
//! dims    ndim × u64
//! payload product(dims) × sizeof(dtype), row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"VTFv0001";

#[derive(Debug, Error)]
pub enum TensorFileError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected VTFv0001")]
    BadMagic,
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("payload length {found} does not match shape (expected {expected})")]
    PayloadMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    U8,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::U8 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self, TensorFileError> {
        match code {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::U8),
            other => Err(TensorFileError::UnknownDtype(other)),
        }
    }
}

/// An in-memory tensor with its shape; payload is row-major.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorFile {
    F32 { shape: Vec<usize>, data: Vec<f32> },
    U8 { shape: Vec<usize>, data: Vec<u8> },
}

impl TensorFile {
    pub fn shape(&self) -> &[usize] {
        match self {
            TensorFile::F32 { shape, .. } => shape,
            TensorFile::U8 { shape, .. } => shape,
        }
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            TensorFile::F32 { .. } => Dtype::F32,
            TensorFile::U8 { .. } => Dtype::U8,
        }
    }

    fn check_len(&self) -> Result<(), TensorFileError> {
        let expected: usize = self.shape().iter().product();
        let found = match self {
            TensorFile::F32 { data, .. } => data.len(),
            TensorFile::U8 { data, .. } => data.len(),
        };
        if expected != found {
            return Err(TensorFileError::PayloadMismatch { expected, found });
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), TensorFileError> {
        self.check_len()?;
        w.write_all(MAGIC)?;
        w.write_all(&[self.dtype().code(), self.shape().len() as u8])?;
        for &d in self.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        match self {
            TensorFile::F32 { data, .. } => {
                for &v in data {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            TensorFile::U8 { data, .. } => w.write_all(data)?,
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, TensorFileError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(TensorFileError::BadMagic);
        }
        let mut head = [0u8; 2];
        r.read_exact(&mut head)?;
        let dtype = Dtype::from_code(head[0])?;
        let ndim = head[1] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            shape.push(u64::from_le_bytes(buf) as usize);
        }
        let count: usize = shape.iter().product();
        match dtype {
            Dtype::F32 => {
                let mut raw = vec![0u8; count * 4];
                r.read_exact(&mut raw)?;
                let data = raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                Ok(TensorFile::F32 { shape, data })
            }
            Dtype::U8 => {
                let mut data = vec![0u8; count];
                r.read_exact(&mut data)?;
                Ok(TensorFile::U8 { shape, data })
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TensorFileError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TensorFileError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
