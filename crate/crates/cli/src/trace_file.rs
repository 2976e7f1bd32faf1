//! Binary trace files.
//!
//! `trace_<k>.bin`: magic `PXMC`, then little-endian `u32` version, `T` and
//! sample count (16 bytes), then per sample `2T` little-endian `f64`, `R`
//! before `O`.
//!
//! `path_<k>.bin`: magic `PXMR`, then `u32` version, `T`, row count and
//! stride (20 bytes), then per row `T` little-endian `f64`; row `j` is the
//! state of `R` after iteration `(j + 1)·stride`, burn-in included.

use std::io::{Read, Write};

use crate::error::CliError;

pub const TRACE_MAGIC: &[u8; 4] = b"PXMC";
pub const PATH_MAGIC: &[u8; 4] = b"PXMR";
pub const VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn to_u32(v: usize, what: &str) -> Result<u32, CliError> {
    u32::try_from(v).map_err(|_| CliError::Usage(format!("{what} {v} does not fit the trace header")))
}

fn put_values<W: Write>(w: &mut W, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_values<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>, CliError> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)
        .map_err(|e| CliError::Data(format!("truncated trace payload: {e}")))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(CliError::Data("trailing bytes after trace payload".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn check_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<(), CliError> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)
        .map_err(|_| CliError::Data("file too short for a trace header".into()))?;
    if &m != magic {
        return Err(CliError::Data(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(CliError::Data(format!("unsupported trace version {version}")));
    }
    Ok(())
}

/// Post-burn-in samples of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace {
    pub dim: usize,
    pub samples: Vec<f64>,
}

pub fn write_trace<W: Write>(w: &mut W, dim: usize, samples: &[f64]) -> Result<(), CliError> {
    let count = samples.len() / (2 * dim);
    w.write_all(TRACE_MAGIC)?;
    put_u32(w, VERSION)?;
    put_u32(w, to_u32(dim, "dimension")?)?;
    put_u32(w, to_u32(count, "sample count")?)?;
    put_values(w, samples)?;
    Ok(())
}

pub fn read_trace<R: Read>(r: &mut R) -> Result<SampleTrace, CliError> {
    check_magic(r, TRACE_MAGIC)?;
    let dim = get_u32(r)? as usize;
    let count = get_u32(r)? as usize;
    if dim == 0 {
        return Err(CliError::Data("trace with zero days".into()));
    }
    let samples = get_values(r, count * 2 * dim)?;
    Ok(SampleTrace { dim, samples })
}

/// Strided path of `R`, burn-in included.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTrace {
    pub dim: usize,
    pub stride: usize,
    pub rows: Vec<f64>,
}

pub fn write_path<W: Write>(w: &mut W, dim: usize, stride: usize, rows: &[f64]) -> Result<(), CliError> {
    w.write_all(PATH_MAGIC)?;
    put_u32(w, VERSION)?;
    put_u32(w, to_u32(dim, "dimension")?)?;
    put_u32(w, to_u32(rows.len() / dim, "row count")?)?;
    put_u32(w, to_u32(stride, "stride")?)?;
    put_values(w, rows)?;
    Ok(())
}

pub fn read_path<R: Read>(r: &mut R) -> Result<PathTrace, CliError> {
    check_magic(r, PATH_MAGIC)?;
    let dim = get_u32(r)? as usize;
    let count = get_u32(r)? as usize;
    let stride = get_u32(r)? as usize;
    if dim == 0 || stride == 0 {
        return Err(CliError::Data("path with zero days or zero stride".into()));
    }
    let rows = get_values(r, count * dim)?;
    Ok(PathTrace { dim, stride, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_roundtrip_and_layout() {
        let samples = vec![1.0, 2.0, -0.5, 0.25, 3.0, 4.0, 1e-300, -7.0];
        let mut buf = Vec::new();
        write_trace(&mut buf, 2, &samples).unwrap();
        assert_eq!(&buf[..4], b"PXMC");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        assert_eq!(buf.len(), 16 + 8 * 8);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 1.0);
        let back = read_trace(&mut buf.as_slice()).unwrap();
        assert_eq!(back.samples, samples);
    }

    #[test]
    fn path_roundtrip() {
        let rows = vec![1.0, 1.1, 0.9, 1.2, 1.0, 0.8];
        let mut buf = Vec::new();
        write_path(&mut buf, 3, 50, &rows).unwrap();
        let back = read_path(&mut buf.as_slice()).unwrap();
        assert_eq!((back.dim, back.stride), (3, 50));
        assert_eq!(back.rows, rows);
    }

    #[test]
    fn corrupt_files() {
        let mut buf = Vec::new();
        write_trace(&mut buf, 1, &[1.0, 2.0]).unwrap();
        assert!(read_trace(&mut &buf[..buf.len() - 1]).is_err());
        let mut longer = buf.clone();
        longer.push(0);
        assert!(read_trace(&mut longer.as_slice()).is_err());
        buf[0] = b'X';
        assert!(read_trace(&mut buf.as_slice()).is_err());
        assert!(read_path(&mut &b"PXMC"[..]).is_err());
    }
}
