//! Checkpoints: a "TPLF" field file followed by the optimizer state as
//! "ADAM", `u64` LE step, `u64` LE count, then `count` `f64` LE first
//! moments and `count` second moments.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::field::{read_field_from, write_field_to, FieldError, RadianceField};

use super::{AdamState, FitError};

pub const ADAM_MAGIC: &[u8; 4] = b"ADAM";

pub fn write_checkpoint(path: &Path, field: &RadianceField, adam: &AdamState) -> Result<(), FitError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field_to(&mut w, field)?;
    w.write_all(ADAM_MAGIC)?;
    w.write_all(&adam.step.to_le_bytes())?;
    w.write_all(&(adam.m.len() as u64).to_le_bytes())?;
    let mut bytes = Vec::with_capacity(16 * adam.m.len());
    for v in adam.m.iter().chain(&adam.v) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint. A bare field file yields a fresh optimizer state.
pub fn read_checkpoint(path: &Path) -> Result<(RadianceField, AdamState), FitError> {
    let mut r = BufReader::new(File::open(path)?);
    let field = read_field_from(&mut r)?;
    let n = field.parameter_count();
    let mut magic = [0u8; 4];
    match r.read(&mut magic)? {
        0 => return Ok((field, AdamState::new(n))),
        4 if &magic == ADAM_MAGIC => {}
        _ => return Err(FieldError::Format("bad optimizer block".into()).into()),
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let step = u64::from_le_bytes(word);
    r.read_exact(&mut word)?;
    let count = u64::from_le_bytes(word) as usize;
    if count != n {
        return Err(FitError::Shape(format!("optimizer state has {count} entries, field has {n} parameters")));
    }
    let mut bytes = vec![0u8; 16 * n];
    r.read_exact(&mut bytes)?;
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok((
        field,
        AdamState {
            step,
            m: vals[..n].to_vec(),
            v: vals[n..].to_vec(),
        },
    ))
}
