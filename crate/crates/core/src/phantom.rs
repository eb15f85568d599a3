//! Synthetic head-like phantoms for desk-scale experiments.

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::volume::{Dims, Volume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MIN_PHANTOM_SIZE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    /// Modified 3D Shepp-Logan ellipsoids.
    Shepp3d,
    /// Smoothed random Gaussian blobs inside an ellipsoidal head.
    Blobs,
}

impl std::str::FromStr for PhantomKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "shepp3d" => Ok(Self::Shepp3d),
            "blobs" => Ok(Self::Blobs),
            other => Err(format!(
                "unknown phantom kind '{other}' (expected shepp3d or blobs)"
            )),
        }
    }
}

// intensity, semi-axes (x, y, z), center (x, y, z), in-plane angle (deg)
const SHEPP: [(f64, [f64; 3], [f64; 3], f64); 10] = [
    (1.0, [0.69, 0.92, 0.81], [0.0, 0.0, 0.0], 0.0),
    (-0.8, [0.6624, 0.874, 0.78], [0.0, -0.0184, 0.0], 0.0),
    (-0.2, [0.11, 0.31, 0.22], [0.22, 0.0, 0.0], -18.0),
    (-0.2, [0.16, 0.41, 0.28], [-0.22, 0.0, 0.0], 18.0),
    (0.1, [0.21, 0.25, 0.41], [0.0, 0.35, -0.15], 0.0),
    (0.1, [0.046, 0.046, 0.05], [0.0, 0.1, 0.25], 0.0),
    (0.1, [0.046, 0.046, 0.05], [0.0, -0.1, 0.25], 0.0),
    (0.1, [0.046, 0.023, 0.05], [-0.08, -0.605, 0.0], 0.0),
    (0.1, [0.023, 0.023, 0.02], [0.0, -0.606, 0.0], 0.0),
    (0.1, [0.023, 0.046, 0.02], [0.06, -0.605, 0.0], 0.0),
];

/// Normalized coordinates in [-1, 1] as (x, y, z) for a voxel.
fn unit_coords(dims: Dims, iy: usize, iz: usize, ix: usize) -> [f64; 3] {
    let f = |i: usize, n: usize| 2.0 * (i as f64 + 0.5) / n as f64 - 1.0;
    [f(ix, dims.nx), f(iy, dims.ny), f(iz, dims.nz)]
}

fn shepp3d(dims: Dims) -> Volume<f64> {
    Volume::from_fn(dims, |iy, iz, ix| {
        let p = unit_coords(dims, iy, iz, ix);
        let mut v = 0.0;
        for (amp, axes, c, deg) in SHEPP {
            let (s, co) = deg.to_radians().sin_cos();
            let (dx, dy, dz) = (p[0] - c[0], p[1] - c[1], p[2] - c[2]);
            let (rx, ry) = (co * dx + s * dy, -s * dx + co * dy);
            let r = (rx / axes[0]).powi(2) + (ry / axes[1]).powi(2) + (dz / axes[2]).powi(2);
            if r <= 1.0 {
                v += amp;
            }
        }
        v.clamp(0.0, 1.0)
    })
}

fn blobs(dims: Dims, seed: u64) -> Volume<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let head = [0.72, 0.85, 0.78];
    let n_blobs = 24;
    let blobs: Vec<([f64; 3], f64, f64)> = (0..n_blobs)
        .map(|_| {
            let c = [
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.6..0.6),
                rng.random_range(-0.55..0.55),
            ];
            let width = rng.random_range(0.06..0.22);
            let amp = rng.random_range(0.2..1.0);
            (c, width, amp)
        })
        .collect();
    let raw = Volume::from_fn(dims, |iy, iz, ix| {
        let p = unit_coords(dims, iy, iz, ix);
        let r = (p[0] / head[0]).powi(2) + (p[1] / head[1]).powi(2) + (p[2] / head[2]).powi(2);
        if r > 1.0 {
            return 0.0;
        }
        let inner = if r > 0.85 { 0.9 } else { 0.25 };
        let mut v = inner;
        for (c, w, a) in &blobs {
            let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2);
            v += a * (-d2 / (2.0 * w * w)).exp();
        }
        v
    });
    let peak = raw.max();
    raw.map(|&v| {
        if peak > 0.0 {
            (v / peak).clamp(0.0, 1.0)
        } else {
            0.0
        }
    })
}

/// Deterministic phantom with values in [0, 1].
pub fn make_phantom<T: Real>(kind: PhantomKind, dims: Dims, seed: u64) -> Result<Volume<T>> {
    if dims.as_array().iter().any(|&n| n < MIN_PHANTOM_SIZE) {
        return invalid(format!(
            "phantom dims {dims} below the minimum of {MIN_PHANTOM_SIZE} per axis"
        ));
    }
    let v = match kind {
        PhantomKind::Shepp3d => shepp3d(dims),
        PhantomKind::Blobs => blobs(dims, seed),
    };
    Ok(v.cast())
}
