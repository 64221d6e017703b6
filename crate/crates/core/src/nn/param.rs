use std::fs;
use std::path::Path;

use crate::error::{Error, ParseError, Result};

/// Magic bytes opening a parameter checkpoint file.
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FPSIMPV1";

/// Flat, fixed-length vector of model parameters.
///
/// This is the unit exchanged between clients and the server. The length is
/// set at construction and never changes; entries can be mutated in place.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.0.iter().position(|v| !v.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        match self.first_non_finite() {
            None => Ok(()),
            Some(i) => Err(Error::Numerical {
                context: context.to_string(),
                param_index: Some(i),
            }),
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sq_distance(&self, other: &ParamVector) -> f64 {
        sq_distance(&self.0, &other.0)
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        self.sq_distance(other).sqrt()
    }

    /// Serialize as `FPSIMPV1`, u32 LE length, then LE f64 values.
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for v in &self.0 {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self, ParseError> {
        if bytes.len() < 12 {
            return Err(ParseError::Truncated {
                offset: bytes.len(),
                needed: 12 - bytes.len(),
            });
        }
        if &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(ParseError::BadMagic {
                found: u32::from_be_bytes(bytes[..4].try_into().unwrap()),
                expected: u32::from_be_bytes(CHECKPOINT_MAGIC[..4].try_into().unwrap()),
            });
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12..];
        if body.len() < 8 * len {
            return Err(ParseError::Truncated {
                offset: bytes.len(),
                needed: 8 * len - body.len(),
            });
        }
        let values = body[..8 * len]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self(values))
    }

    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_checkpoint_bytes())?;
        Ok(())
    }

    pub fn read_checkpoint(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_checkpoint_bytes(&bytes).map_err(|kind| Error::Parse {
            path: path.to_path_buf(),
            kind,
        })
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

pub(crate) fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
