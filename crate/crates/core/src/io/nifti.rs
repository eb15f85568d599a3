//! Uncompressed single-file NIfTI-1 for real volumes and masks.
//!
//! Storage order `(ny, nz, nx)` with `x` fastest maps to NIfTI `dim = [3, nx, nz, ny]`,
//! so the payload is written unchanged. Reading accepts little-endian `uint8`, `int16`,
//! `uint16`, `int32`, `float32` and `float64` data with optional intensity scaling.

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::volume::{Dims, Volume};
use std::io::{Read, Write};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;
const DT_FLOAT32: i16 = 16;

fn put_i16(h: &mut [u8], at: usize, v: i16) {
    h[at..at + 2].copy_from_slice(&v.to_le_bytes());
}

fn put_f32(h: &mut [u8], at: usize, v: f32) {
    h[at..at + 4].copy_from_slice(&v.to_le_bytes());
}

fn get_i16(h: &[u8], at: usize) -> i16 {
    i16::from_le_bytes([h[at], h[at + 1]])
}

fn get_f32(h: &[u8], at: usize) -> f32 {
    f32::from_le_bytes([h[at], h[at + 1], h[at + 2], h[at + 3]])
}

/// Write a `float32` NIfTI-1 file with 1 mm isotropic voxels.
pub fn write<T: Real, W: Write>(w: &mut W, vol: &Volume<T>) -> Result<()> {
    let d = vol.dims();
    let dims = [d.nx, d.nz, d.ny];
    if dims.iter().any(|&n| n > i16::MAX as usize) {
        return invalid(format!("dims {d} exceed the NIfTI-1 limit"));
    }
    let mut h = vec![0u8; VOX_OFFSET];
    h[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    put_i16(&mut h, 40, 3);
    for (i, n) in dims.iter().enumerate() {
        put_i16(&mut h, 42 + 2 * i, *n as i16);
    }
    for i in 3..8 {
        put_i16(&mut h, 42 + 2 * i, 1);
    }
    put_i16(&mut h, 70, DT_FLOAT32);
    put_i16(&mut h, 72, 32);
    for i in 0..4 {
        put_f32(&mut h, 76 + 4 * i, 1.0);
    }
    put_f32(&mut h, 108, VOX_OFFSET as f32);
    put_f32(&mut h, 112, 1.0);
    h[123] = 2; // millimetres
    h[344..348].copy_from_slice(b"n+1\0");
    w.write_all(&h)?;
    let mut buf = Vec::with_capacity(vol.len() * 4);
    for v in vol.data() {
        buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read<T: Real, R: Read>(r: &mut R) -> Result<Volume<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_SIZE {
        return invalid("NIfTI file shorter than its header");
    }
    let h = &bytes[..HEADER_SIZE];
    if i32::from_le_bytes([h[0], h[1], h[2], h[3]]) != HEADER_SIZE as i32 {
        return invalid("not a little-endian NIfTI-1 file");
    }
    if &h[344..348] != b"n+1\0" {
        return invalid("only single-file NIfTI-1 (n+1) is supported");
    }
    let ndim = get_i16(h, 40);
    let dim: Vec<i16> = (1..8).map(|i| get_i16(h, 40 + 2 * i)).collect();
    if !(3..=7).contains(&ndim) || dim[3..ndim as usize].iter().any(|&n| n != 1) {
        return invalid(format!(
            "expected a 3D NIfTI volume, got {ndim} dims {dim:?}"
        ));
    }
    if dim[..3].iter().any(|&n| n < 1) {
        return invalid(format!("NIfTI dims {dim:?} must be positive"));
    }
    let dims = Dims::new(dim[2] as usize, dim[1] as usize, dim[0] as usize);
    let n = dims.len();
    let offset = get_f32(h, 108).max(HEADER_SIZE as f32) as usize;
    let (slope, inter) = (get_f32(h, 112) as f64, get_f32(h, 116) as f64);
    let (slope, inter) = if slope == 0.0 || !slope.is_finite() {
        (1.0, 0.0)
    } else {
        (slope, inter)
    };
    let datatype = get_i16(h, 70);
    let width = match datatype {
        2 => 1,
        4 | 512 => 2,
        8 | 16 => 4,
        64 => 8,
        other => return invalid(format!("unsupported NIfTI datatype {other}")),
    };
    let Some(payload) = bytes.get(offset..offset + n * width) else {
        return invalid("NIfTI payload shorter than its dims");
    };
    let raw: Vec<f64> = payload
        .chunks_exact(width)
        .map(|b| match datatype {
            2 => b[0] as f64,
            4 => i16::from_le_bytes([b[0], b[1]]) as f64,
            512 => u16::from_le_bytes([b[0], b[1]]) as f64,
            8 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            16 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            _ => f64::from_le_bytes(b.try_into().expect("8-byte chunk")),
        })
        .collect();
    Volume::from_vec(
        dims,
        raw.into_iter().map(|v| T::lit(v * slope + inter)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn round_trip_keeps_dims_and_values() {
        let v = Volume::from_fn(Dims::new(3, 4, 5), |y, z, x| (y * 100 + z * 10 + x) as f64);
        let mut buf = Vec::new();
        write(&mut buf, &v).unwrap();
        assert_eq!(buf.len(), 352 + 60 * 4);
        assert_eq!(get_i16(&buf, 42), 5);
        assert_eq!(get_i16(&buf, 46), 3);
        let back: Volume<f64> = read(&mut Cursor::new(buf)).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn integer_data_with_scaling() {
        let v = Volume::<f32>::zeros(Dims::new(1, 1, 2));
        let mut buf = Vec::new();
        write(&mut buf, &v).unwrap();
        buf.truncate(352);
        put_i16(&mut buf, 70, 2);
        put_i16(&mut buf, 72, 8);
        put_f32(&mut buf, 112, 0.5);
        put_f32(&mut buf, 116, 1.0);
        buf.extend_from_slice(&[2, 4]);
        let back: Volume<f64> = read(&mut Cursor::new(buf)).unwrap();
        assert_eq!(back.data(), &[2.0, 3.0]);
    }

    #[test]
    fn rejects_truncated_and_foreign_files() {
        assert!(read::<f64, _>(&mut Cursor::new(vec![0u8; 10])).is_err());
        let mut buf = Vec::new();
        write(&mut buf, &Volume::<f32>::zeros(Dims::new(2, 2, 2))).unwrap();
        assert!(read::<f64, _>(&mut Cursor::new(buf[..buf.len() - 4].to_vec())).is_err());
        buf[344] = b'x';
        assert!(read::<f64, _>(&mut Cursor::new(buf)).is_err());
    }
}
