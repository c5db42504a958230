//! Flat binary parameter serialization.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "GLANPRM1"
//! version  u32
//! precision u8 (32 or 64), 3 zero pad bytes
//! count    u32
//! record*  name_len u16, name bytes, rank u8, extents u32 × rank,
//!          values (4 or 8 bytes each, raw IEEE-754 bits)
//! ```
//!
//! Values round-trip bit-exactly; reading validates that record names,
//! order, and shapes match the receiving parameter set.

use super::real::{Precision, Real};
use super::{NumericsError, NumericsResult, ParamVisit};
use std::io::{Read, Write};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"GLANPRM1";

pub fn write_params<T: Real, P: ParamVisit<T>>(
    params: &P,
    w: &mut impl Write,
) -> NumericsResult<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.push(T::PRECISION.bits());
    buf.extend_from_slice(&[0u8; 3]);
    buf.extend_from_slice(&(params.param_count() as u32).to_le_bytes());
    let mut err = None;
    params.visit_params(&mut |name, t| {
        if err.is_some() {
            return;
        }
        if name.len() > u16::MAX as usize {
            err = Some(NumericsError::InvalidCheckpoint(format!(
                "parameter name too long: {name}"
            )));
            return;
        }
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(t.rank() as u8);
        for &e in t.shape() {
            buf.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for &v in t.data() {
            v.write_le(&mut buf);
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    w.write_all(&buf)?;
    Ok(())
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> NumericsResult<&'a [u8]> {
    if bytes.len() < n {
        return Err(NumericsError::InvalidCheckpoint(format!(
            "truncated while reading {what}"
        )));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn read_all(r: &mut impl Read) -> NumericsResult<Vec<u8>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    Ok(buf)
}

/// Peek the stored precision so callers can dispatch to the right width.
pub fn read_precision(r: &mut impl Read) -> NumericsResult<Precision> {
    let buf = read_all(r)?;
    let mut bytes = buf.as_slice();
    parse_header(&mut bytes)
}

fn parse_header(bytes: &mut &[u8]) -> NumericsResult<Precision> {
    let magic = take(bytes, 8, "magic")?;
    if magic != MAGIC {
        return Err(NumericsError::InvalidCheckpoint(
            "bad magic; not a parameter file".to_string(),
        ));
    }
    let version = u32::from_le_bytes(take(bytes, 4, "version")?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(NumericsError::InvalidCheckpoint(format!(
            "unsupported version {version}"
        )));
    }
    let prec_byte = take(bytes, 1, "precision")?[0];
    take(bytes, 3, "padding")?;
    Precision::from_bits(prec_byte).ok_or_else(|| {
        NumericsError::InvalidCheckpoint(format!("bad precision byte {prec_byte}"))
    })
}

/// Fill `params` (already constructed with the correct shapes) from a
/// parameter file. Name order, shapes, and precision must all match.
pub fn read_params<T: Real, P: ParamVisit<T>>(
    params: &mut P,
    r: &mut impl Read,
) -> NumericsResult<()> {
    let buf = read_all(r)?;
    let mut bytes = buf.as_slice();
    let precision = parse_header(&mut bytes)?;
    if precision != T::PRECISION {
        return Err(NumericsError::InvalidCheckpoint(format!(
            "file precision {precision} but runtime precision {}",
            T::PRECISION
        )));
    }
    let count = u32::from_le_bytes(take(&mut bytes, 4, "count")?.try_into().unwrap()) as usize;
    if count != params.param_count() {
        return Err(NumericsError::InvalidCheckpoint(format!(
            "file has {count} parameters, receiver expects {}",
            params.param_count()
        )));
    }

    let mut err: Option<NumericsError> = None;
    params.visit_params_mut(&mut |name, t| {
        if err.is_some() {
            return;
        }
        let record = (|| -> NumericsResult<()> {
            let name_len =
                u16::from_le_bytes(take(&mut bytes, 2, "name length")?.try_into().unwrap())
                    as usize;
            let file_name = std::str::from_utf8(take(&mut bytes, name_len, "name")?)
                .map_err(|_| {
                    NumericsError::InvalidCheckpoint("non-utf8 parameter name".to_string())
                })?;
            if file_name != name {
                return Err(NumericsError::InvalidCheckpoint(format!(
                    "parameter order mismatch: file has {file_name}, expected {name}"
                )));
            }
            let rank = take(&mut bytes, 1, "rank")?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(
                    u32::from_le_bytes(take(&mut bytes, 4, "extent")?.try_into().unwrap())
                        as usize,
                );
            }
            if shape != t.shape() {
                return Err(NumericsError::InvalidCheckpoint(format!(
                    "shape mismatch for {name}: file {shape:?}, expected {:?}",
                    t.shape()
                )));
            }
            let raw = take(&mut bytes, t.len() * T::BYTES, "values")?;
            let dst = t.data_mut();
            for (i, chunk) in raw.chunks_exact(T::BYTES).enumerate() {
                dst[i] = T::read_le(chunk);
            }
            Ok(())
        })();
        if let Err(e) = record {
            err = Some(e);
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    if !bytes.is_empty() {
        return Err(NumericsError::InvalidCheckpoint(format!(
            "{} trailing bytes after last record",
            bytes.len()
        )));
    }
    Ok(())
}
