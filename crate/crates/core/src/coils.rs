//! Receive-coil sensitivity maps.

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::volume::{Dims, Volume};
use num_complex::Complex;

/// One complex sensitivity map per receive coil, all sharing the same dims.
#[derive(Clone, Debug)]
pub struct CoilSet<T: Real> {
    maps: Vec<Volume<Complex<T>>>,
}

impl<T: Real> CoilSet<T> {
    pub fn new(maps: Vec<Volume<Complex<T>>>) -> Result<Self> {
        let Some(first) = maps.first() else {
            return invalid("a coil set needs at least one map");
        };
        let dims = first.dims();
        if maps.iter().any(|m| m.dims() != dims) {
            return invalid("coil maps must share dims");
        }
        if !maps.iter().all(|m| m.is_finite()) {
            return invalid("coil maps must be finite");
        }
        Ok(Self { maps })
    }

    /// A single coil with unit sensitivity everywhere.
    pub fn unit(dims: Dims) -> Self {
        Self {
            maps: vec![Volume::filled(dims, Complex::new(T::one(), T::zero()))],
        }
    }

    /// Smooth synthetic maps from coils placed evenly on a ring in the y-z plane,
    /// normalized so that `sum_c |S_c|^2 = 1` at every voxel.
    pub fn synthetic(dims: Dims, n_coils: usize) -> Result<Self> {
        if n_coils == 0 {
            return invalid("n_coils must be at least 1");
        }
        if n_coils == 1 {
            return Ok(Self::unit(dims));
        }
        let n = dims.as_array().map(|v| v as f64);
        let c = n.map(|v| (v - 1.0) / 2.0);
        let radius = 0.75 * n[0].max(n[1]);
        let width = 0.6 * n[0].max(n[1]);
        let mut maps: Vec<Volume<Complex<f64>>> = (0..n_coils)
            .map(|k| {
                let ang = 2.0 * std::f64::consts::PI * k as f64 / n_coils as f64;
                let pos = [c[0] + radius * ang.cos(), c[1] + radius * ang.sin(), c[2]];
                Volume::from_fn(dims, |iy, iz, ix| {
                    let d = [
                        iy as f64 - pos[0],
                        iz as f64 - pos[1],
                        (ix as f64 - pos[2]) * 0.5,
                    ];
                    let r2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (width * width);
                    let mag = (-r2).exp();
                    let phase = ang + 0.5 * (ix as f64 - c[2]) / n[2];
                    Complex::from_polar(mag, phase)
                })
            })
            .collect();
        let len = dims.len();
        for i in 0..len {
            let s: f64 = maps
                .iter()
                .map(|m| m.data()[i].norm_sqr())
                .sum::<f64>()
                .sqrt();
            for m in maps.iter_mut() {
                m.data_mut()[i] /= s;
            }
        }
        Ok(Self {
            maps: maps
                .into_iter()
                .map(|m| m.map(|v| Complex::new(T::lit(v.re), T::lit(v.im))))
                .collect(),
        })
    }

    pub fn n_coils(&self) -> usize {
        self.maps.len()
    }

    pub fn dims(&self) -> Dims {
        self.maps[0].dims()
    }

    pub fn maps(&self) -> &[Volume<Complex<T>>] {
        &self.maps
    }

    /// `sum_c |S_c|^2` per voxel.
    pub fn sum_of_squares(&self) -> Volume<T> {
        let mut out = Volume::<T>::zeros(self.dims());
        for m in &self.maps {
            for (o, v) in out.data_mut().iter_mut().zip(m.data()) {
                *o = *o + v.norm_sqr();
            }
        }
        out
    }
}
