//! PMV1 volume container: one JSON header line followed by raw little-endian samples.

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::volume::{Dims, Volume};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Read, Write};

pub const MAGIC: &str = "PMV1";
const MAX_HEADER_BYTES: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    /// Interleaved `(re, im)` 32-bit floats.
    C64,
    F32,
}

impl Dtype {
    pub fn bytes(self) -> usize {
        match self {
            Dtype::C64 => 8,
            Dtype::F32 => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub magic: String,
    pub dtype: Dtype,
    pub dims: [usize; 3],
    pub endianness: String,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl VolumeHeader {
    pub fn new(dtype: Dtype, dims: Dims, meta: serde_json::Value) -> Self {
        Self {
            magic: MAGIC.into(),
            dtype,
            dims: dims.as_array(),
            endianness: "little".into(),
            meta,
        }
    }

    pub fn payload_len(&self) -> usize {
        self.dims.iter().product::<usize>() * self.dtype.bytes()
    }
}

/// A decoded PMV1 payload.
#[derive(Clone, Debug)]
pub enum VolumeData {
    Real(Volume<f32>),
    Complex(Volume<Complex<f32>>),
}

impl VolumeData {
    pub fn dims(&self) -> Dims {
        match self {
            VolumeData::Real(v) => v.dims(),
            VolumeData::Complex(v) => v.dims(),
        }
    }
}

fn write_header<W: Write>(w: &mut W, h: &VolumeHeader) -> Result<()> {
    serde_json::to_writer(&mut *w, h)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_real<T: Real, W: Write>(
    w: &mut W,
    vol: &Volume<T>,
    meta: serde_json::Value,
) -> Result<()> {
    write_header(w, &VolumeHeader::new(Dtype::F32, vol.dims(), meta))?;
    let mut buf = Vec::with_capacity(vol.len() * 4);
    for v in vol.data() {
        buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_complex<T: Real, W: Write>(
    w: &mut W,
    vol: &Volume<Complex<T>>,
    meta: serde_json::Value,
) -> Result<()> {
    write_header(w, &VolumeHeader::new(Dtype::C64, vol.dims(), meta))?;
    let mut buf = Vec::with_capacity(vol.len() * 8);
    for c in vol.data() {
        buf.extend_from_slice(&(c.re.as_f64() as f32).to_le_bytes());
        buf.extend_from_slice(&(c.im.as_f64() as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_header<R: BufRead>(r: &mut R) -> Result<VolumeHeader> {
    let mut line = Vec::new();
    r.take(MAX_HEADER_BYTES).read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return invalid("PMV1 header is missing or not newline-terminated");
    }
    let h: VolumeHeader = serde_json::from_slice(&line[..line.len() - 1])
        .map_err(|e| Error::InvalidInput(format!("PMV1 header: {e}")))?;
    if h.magic != MAGIC {
        return invalid(format!("bad magic '{}', expected {MAGIC}", h.magic));
    }
    if h.endianness != "little" {
        return invalid(format!("unsupported endianness '{}'", h.endianness));
    }
    if h.dims.contains(&0) {
        return invalid(format!("PMV1 dims {:?} contain a zero", h.dims));
    }
    Ok(h)
}

pub fn read<R: BufRead>(r: &mut R) -> Result<(VolumeHeader, VolumeData)> {
    let h = read_header(r)?;
    let mut payload = vec![0u8; h.payload_len()];
    r.read_exact(&mut payload).map_err(|e| {
        Error::InvalidInput(format!(
            "PMV1 payload shorter than {} bytes: {e}",
            h.payload_len()
        ))
    })?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return invalid("PMV1 payload has trailing bytes");
    }
    let dims = Dims::from_array(h.dims);
    let floats = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    let data = match h.dtype {
        Dtype::F32 => VolumeData::Real(Volume::from_vec(dims, floats.collect())?),
        Dtype::C64 => {
            let f: Vec<f32> = floats.collect();
            let c = f
                .chunks_exact(2)
                .map(|p| Complex::new(p[0], p[1]))
                .collect();
            VolumeData::Complex(Volume::from_vec(dims, c)?)
        }
    };
    Ok((h, data))
}
