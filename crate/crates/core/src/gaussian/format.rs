//! Binary covariance files.
//!
//! Layout (little-endian): magic `GCOV`, version `u16`, family `u8`,
//! layers `u8`, gamma `f64`, rho `f64`, then the lower triangle row-major as
//! `f64`.

use std::io::{BufReader, BufWriter, Read, Write};

use super::{CovarianceModel, Family, GaussianError, Hierarchy, Result};
use crate::linalg::SymmetricMatrix;

pub const GCOV_MAGIC: &[u8; 4] = b"GCOV";
pub const GCOV_VERSION: u16 = 1;

pub fn write_gcov<W: Write>(model: &CovarianceModel, out: W) -> Result<()> {
    let h = model.hierarchy().ok_or(GaussianError::NotHierarchical)?;
    let layers = u8::try_from(h.layers)
        .map_err(|_| GaussianError::Format(format!("layers {} exceed u8", h.layers)))?;
    let mut w = BufWriter::new(out);
    w.write_all(GCOV_MAGIC)?;
    w.write_all(&GCOV_VERSION.to_le_bytes())?;
    w.write_all(&[h.family.code(), layers])?;
    w.write_all(&h.gamma.to_le_bytes())?;
    w.write_all(&h.rho.to_le_bytes())?;
    for v in model.covariance().packed() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a covariance file and revalidates it (unit diagonal, positive
/// definite). The stored matrix is used as-is, not rebuilt.
pub fn read_gcov<R: Read>(input: R) -> Result<CovarianceModel> {
    let mut r = BufReader::new(input);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != GCOV_MAGIC {
        return Err(GaussianError::Format(format!("bad magic {magic:?}")));
    }
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2)?;
    let version = u16::from_le_bytes(b2);
    if version != GCOV_VERSION {
        return Err(GaussianError::Format(format!("unsupported version {version}")));
    }
    r.read_exact(&mut b2)?;
    let family = Family::from_code(b2[0])
        .ok_or_else(|| GaussianError::Format(format!("unknown family code {}", b2[0])))?;
    let layers = u32::from(b2[1]);
    if layers == 0 || layers > 15 {
        return Err(GaussianError::Format(format!("implausible layer count {layers}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let gamma = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let rho = f64::from_le_bytes(b8);
    let dim = 4usize.pow(layers);
    let count = dim * (dim + 1) / 2;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b8).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => {
                GaussianError::Format(format!("truncated: expected {count} entries"))
            }
            _ => e.into(),
        })?;
        data.push(f64::from_le_bytes(b8));
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(GaussianError::Format("trailing bytes".into()));
    }
    let cov = SymmetricMatrix::from_packed(dim, data)?;
    CovarianceModel::from_parts(
        Hierarchy {
            family,
            layers,
            gamma,
            rho,
        },
        cov,
    )
}
