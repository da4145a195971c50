//! "TPLF" field files: magic, then `u32` LE N, C, H, C_out, then the xy, yz,
//! xz planes and the decoder's w1, b1, w2, b2 as `f32` LE, row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Decoder, FieldError, RadianceField, TriPlane};

pub const TPLF_MAGIC: &[u8; 4] = b"TPLF";

pub fn write_field_to(w: &mut impl Write, field: &RadianceField) -> Result<(), FieldError> {
    let s = field.shape();
    w.write_all(TPLF_MAGIC)?;
    for v in [s.resolution, s.channels, s.hidden, s.out_features] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for buf in field.buffers() {
        write_f32s(w, buf)?;
    }
    Ok(())
}

pub fn read_field_from(r: &mut impl Read) -> Result<RadianceField, FieldError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| FieldError::Format("truncated header".into()))?;
    if &magic != TPLF_MAGIC {
        return Err(FieldError::Format(format!("bad magic {magic:?}")));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = read_u32(r)? as usize;
    }
    let [n, c, h, c_out] = dims;
    if n == 0 || c == 0 || h == 0 {
        return Err(FieldError::Format(format!("invalid dimensions {dims:?}")));
    }
    let planes = read_f32s(r, 3 * n * n * c)?;
    let w1 = read_f32s(r, c * h)?;
    let b1 = read_f32s(r, h)?;
    let w2 = read_f32s(r, h * (1 + c_out))?;
    let b2 = read_f32s(r, 1 + c_out)?;
    RadianceField::new(
        TriPlane::from_data(n, c, planes)?,
        Decoder::from_parts(c, h, c_out, w1, b1, w2, b2)?,
    )
}

pub fn write_field(path: &Path, field: &RadianceField) -> Result<(), FieldError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field_to(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<RadianceField, FieldError> {
    read_field_from(&mut BufReader::new(File::open(path)?))
}

pub(crate) fn write_f32s(w: &mut impl Write, values: &[f32]) -> std::io::Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)
}

pub(crate) fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>, FieldError> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| FieldError::Format(format!("truncated data, expected {n} floats")))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32, FieldError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| FieldError::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldShape;

    #[test]
    fn round_trip_and_layout() {
        let shape = FieldShape {
            resolution: 3,
            channels: 2,
            hidden: 4,
            out_features: 3,
        };
        let f = RadianceField::init(shape, 1.0, 8);
        let mut bytes = Vec::new();
        write_field_to(&mut bytes, &f).unwrap();
        assert_eq!(&bytes[..4], b"TPLF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 3);
        let n_floats = 3 * 9 * 2 + 2 * 4 + 4 + 4 * 4 + 4;
        assert_eq!(bytes.len(), 20 + 4 * n_floats);
        // first plane value follows the header
        assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()), f.planes.data()[0]);
        let back = read_field_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_field_from(&mut &b"NOPE"[..]).is_err());
        let f = RadianceField::init(FieldShape { resolution: 2, channels: 1, hidden: 1, out_features: 1 }, 1.0, 0);
        let mut bytes = Vec::new();
        write_field_to(&mut bytes, &f).unwrap();
        bytes.truncate(bytes.len() - 2);
        assert!(matches!(read_field_from(&mut bytes.as_slice()), Err(FieldError::Format(_))));
    }
}
