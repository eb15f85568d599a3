use crate::error::{Error, Result};
use crate::rigid::{rotate_real, RigidParams};
use crate::scalar::Real;
use crate::volume::{Dims, Volume};

/// Downsampling factors, coarse to fine.
const LEVELS: [usize; 3] = [4, 2, 1];
/// Coarsest level dimension still worth searching.
const MIN_LEVEL_SIZE: usize = 8;
const MAX_EVALS_PER_LEVEL: usize = 600;

fn ncc(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (p, q) = (x - ma, y - mb);
        ab += p * q;
        aa += p * p;
        bb += q * q;
    }
    (aa > 0.0 && bb > 0.0).then(|| ab / (aa * bb).sqrt())
}

fn downsample(v: &Volume<f64>, f: usize) -> Volume<f64> {
    if f == 1 {
        return v.clone();
    }
    let d = v.dims();
    let out = Dims::new(d.ny / f, d.nz / f, d.nx / f);
    let w = 1.0 / (f * f * f) as f64;
    Volume::from_fn(out, |y, z, x| {
        let mut s = 0.0;
        for a in 0..f {
            for b in 0..f {
                for c in 0..f {
                    s += v.get(y * f + a, z * f + b, x * f + c);
                }
            }
        }
        s * w
    })
}

fn is_flat(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Rigid parameters `p` such that `moving` is approximately `T_p(fixed)`, maximizing
/// normalized cross-correlation by coordinate descent at 4x, 2x and full resolution.
pub fn register_rigid<T: Real>(moving: &Volume<T>, fixed: &Volume<T>) -> Result<RigidParams> {
    moving.check_same_dims(fixed)?;
    moving.require_finite()?;
    fixed.require_finite()?;
    let m = moving.cast::<f64>();
    let f = fixed.cast::<f64>();
    if m.is_empty() || is_flat(m.data()) || is_flat(f.data()) {
        return Err(Error::RegistrationUndefined(
            "a volume has zero variance".into(),
        ));
    }
    let mut p = [0.0f64; 6];
    for factor in LEVELS {
        if factor > 1
            && m.dims()
                .as_array()
                .iter()
                .any(|&n| n / factor < MIN_LEVEL_SIZE)
        {
            continue;
        }
        let ml = downsample(&m, factor);
        let fl = downsample(&f, factor);
        if is_flat(ml.data()) || is_flat(fl.data()) {
            continue;
        }
        let k = factor as f64;
        let score = |q: &[f64; 6]| -> f64 {
            let t = [q[3] / k, q[4] / k, q[5] / k];
            let warped = rotate_real(&fl, &[q[0], q[1], q[2]], &t);
            ncc(ml.data(), warped.data()).unwrap_or(-1.0)
        };
        // steps in degrees and full-resolution voxels
        let mut step = [2.0, 2.0, 2.0, k, k, k];
        let min_step = [0.02, 0.02, 0.02, 0.02 * k, 0.02 * k, 0.02 * k];
        let mut best = score(&p);
        let mut evals = 1;
        while evals < MAX_EVALS_PER_LEVEL && step.iter().zip(&min_step).any(|(s, m)| s >= m) {
            let mut improved = false;
            for i in 0..6 {
                for dir in [1.0, -1.0] {
                    let mut q = p;
                    q[i] += dir * step[i];
                    let s = score(&q);
                    evals += 1;
                    if s > best {
                        best = s;
                        p = q;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step.iter_mut().for_each(|s| *s *= 0.5);
            }
        }
        log::debug!("registration level {factor}: ncc {best:.6} after {evals} evaluations");
    }
    Ok(RigidParams::from(p))
}

/// Bring `moving` back onto the fixed frame given `moving ~ T_p(fixed)`.
pub fn align_to<T: Real>(moving: &Volume<T>, p: &RigidParams) -> Volume<T> {
    let inv = p.inverse();
    rotate_real(moving, &inv.rot_deg, &inv.trans_vox)
}
