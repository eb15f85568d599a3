//! File formats: the PMV1 volume container, NIfTI-1 for real volumes, JSON side files
//! and simulated data-set directories.

pub mod nifti;
pub mod pmv;

mod dataset;

pub use dataset::{Dataset, DatasetMeta};
pub use pmv::{Dtype, VolumeData, VolumeHeader};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::volume::Volume;
use num_complex::Complex;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

fn is_nifti(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("nii"))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        Error::InvalidInput(m) => Error::InvalidInput(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Write a real volume as NIfTI-1 (`.nii`) or PMV1 `f32` (any other extension).
pub fn save_real<T: Real>(path: &Path, vol: &Volume<T>, meta: serde_json::Value) -> Result<()> {
    with_path(
        path,
        (|| {
            let mut w = create(path)?;
            if is_nifti(path) {
                nifti::write(&mut w, vol)?;
            } else {
                pmv::write_real(&mut w, vol, meta)?;
            }
            w.flush()?;
            Ok(())
        })(),
    )
}

pub fn save_complex<T: Real>(
    path: &Path,
    vol: &Volume<Complex<T>>,
    meta: serde_json::Value,
) -> Result<()> {
    if is_nifti(path) {
        return invalid(format!(
            "{}: complex volumes are stored as PMV1 only",
            path.display()
        ));
    }
    with_path(
        path,
        (|| {
            let mut w = create(path)?;
            pmv::write_complex(&mut w, vol, meta)?;
            w.flush()?;
            Ok(())
        })(),
    )
}

/// Read a PMV1 file of either dtype, or a NIfTI-1 file as real data.
pub fn load(path: &Path) -> Result<(VolumeHeader, VolumeData)> {
    with_path(
        path,
        (|| {
            if path
                .to_string_lossy()
                .to_ascii_lowercase()
                .ends_with(".nii.gz")
            {
                return invalid("compressed NIfTI is not supported; decompress to .nii first");
            }
            let mut r = BufReader::new(File::open(path)?);
            if is_nifti(path) {
                let v: Volume<f32> = nifti::read(&mut r)?;
                let h = VolumeHeader::new(Dtype::F32, v.dims(), serde_json::Value::Null);
                Ok((h, VolumeData::Real(v)))
            } else {
                pmv::read(&mut r)
            }
        })(),
    )
}

/// A real volume; complex files are reduced to their magnitude.
pub fn load_magnitude<T: Real>(path: &Path) -> Result<Volume<T>> {
    Ok(match load(path)?.1 {
        VolumeData::Real(v) => v.cast(),
        VolumeData::Complex(c) => c.map(|z| T::lit(z.norm() as f64)),
    })
}

pub fn load_complex<T: Real>(path: &Path) -> Result<Volume<Complex<T>>> {
    Ok(match load(path)?.1 {
        VolumeData::Complex(c) => c.map(|z| Complex::new(T::lit(z.re as f64), T::lit(z.im as f64))),
        VolumeData::Real(v) => v.map(|&r| Complex::new(T::lit(r as f64), T::zero())),
    })
}

/// A binary mask: any nonzero voxel becomes 1.
pub fn load_mask<T: Real>(path: &Path) -> Result<Volume<T>> {
    if !path.exists() {
        return invalid(format!("mask file {} does not exist", path.display()));
    }
    let v: Volume<T> = load_magnitude(path)?;
    Ok(v.map(|&m| if m != T::zero() { T::one() } else { T::zero() }))
}

pub fn save_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    with_path(
        path,
        (|| {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, value)?;
            w.write_all(b"\n")?;
            w.flush()?;
            Ok(())
        })(),
    )
}

pub fn load_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    with_path(
        path,
        (|| {
            let r = BufReader::new(File::open(path)?);
            serde_json::from_reader(r).map_err(|e| Error::InvalidInput(format!("json: {e}")))
        })(),
    )
}

/// One compact JSON object per line.
pub fn to_jsonl<S: Serialize>(items: &[S]) -> Result<String> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_text(path: &Path, text: &str) -> Result<()> {
    with_path(
        path,
        (|| {
            let mut w = create(path)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
            Ok(())
        })(),
    )
}

pub fn load_text(path: &Path) -> Result<String> {
    with_path(path, std::fs::read_to_string(path).map_err(Error::from))
}
