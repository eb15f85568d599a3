use super::preprocess::percentile;
use crate::error::Result;
use crate::scalar::Real;
use crate::volume::Volume;

const SMOOTH: [f64; 3] = [1.0, 2.0, 1.0];

/// Mean squared 3D Sobel gradient magnitude over voxels whose full 3x3x3
/// neighborhood lies inside the volume; 0 when there are none.
pub fn tenengrad<T: Real>(x: &Volume<T>) -> f64 {
    let d = x.dims();
    if d.ny < 3 || d.nz < 3 || d.nx < 3 {
        return 0.0;
    }
    let v = x.data();
    let mut total = 0.0;
    for y in 1..d.ny - 1 {
        for z in 1..d.nz - 1 {
            for xx in 1..d.nx - 1 {
                let at = |a: usize, b: usize, c: usize| {
                    v[d.index(y + a - 1, z + b - 1, xx + c - 1)].as_f64()
                };
                // Central differences first, so equal neighbours cancel exactly.
                let mut g = [0.0f64; 3];
                for (i, si) in SMOOTH.iter().enumerate() {
                    for (j, sj) in SMOOTH.iter().enumerate() {
                        let w = si * sj;
                        g[0] += w * (at(2, i, j) - at(0, i, j));
                        g[1] += w * (at(i, 2, j) - at(i, 0, j));
                        g[2] += w * (at(i, j, 2) - at(i, j, 0));
                    }
                }
                total += g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
            }
        }
    }
    total / ((d.ny - 2) * (d.nz - 2) * (d.nx - 2)) as f64
}

/// Average edge strength over all voxels; see [`average_edge_strength_masked`].
pub fn average_edge_strength<T: Real>(x: &Volume<T>) -> Result<f64> {
    average_edge_strength_masked(x, None)
}

/// Average edge strength on axial (`y`-`z`) slices.
///
/// Each slice gets a 2D Sobel gradient magnitude on interior pixels. Edge pixels are the
/// nonzero magnitudes at or above the slice's 90th percentile of in-mask magnitudes; the
/// slice score is their mean. The result averages the slices that have edge pixels and
/// is 0 for a flat image.
pub fn average_edge_strength_masked<T: Real>(
    x: &Volume<T>,
    mask: Option<&Volume<T>>,
) -> Result<f64> {
    if let Some(m) = mask {
        x.check_same_dims(m)?;
    }
    let d = x.dims();
    if d.ny < 3 || d.nz < 3 {
        return Ok(0.0);
    }
    let v = x.data();
    let (mut total, mut slices) = (0.0, 0usize);
    let mut mags = Vec::with_capacity((d.ny - 2) * (d.nz - 2));
    for xx in 0..d.nx {
        mags.clear();
        for y in 1..d.ny - 1 {
            for z in 1..d.nz - 1 {
                if let Some(m) = mask {
                    if m.data()[d.index(y, z, xx)] == T::zero() {
                        continue;
                    }
                }
                let at = |a: usize, b: usize| v[d.index(y + a - 1, z + b - 1, xx)].as_f64();
                let (mut gy, mut gz) = (0.0, 0.0);
                for (i, w) in SMOOTH.iter().enumerate() {
                    gy += w * (at(2, i) - at(0, i));
                    gz += w * (at(i, 2) - at(i, 0));
                }
                mags.push((gy * gy + gz * gz).sqrt());
            }
        }
        if mags.is_empty() {
            continue;
        }
        let thr = percentile(&mags, 90.0)?;
        let (sum, n) = mags
            .iter()
            .filter(|&&g| g > 0.0 && g >= thr)
            .fold((0.0, 0usize), |(s, n), g| (s + g, n + 1));
        if n > 0 {
            total += sum / n as f64;
            slices += 1;
        }
    }
    Ok(if slices == 0 {
        0.0
    } else {
        total / slices as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{circshift, Dims};

    /// Box with a sharp edge, zero margin of several voxels.
    fn edge_phantom() -> Volume<f64> {
        Volume::from_fn(Dims::cube(20), |y, z, x| {
            if (5..15).contains(&y) && (6..14).contains(&z) && (4..16).contains(&x) {
                1.0
            } else {
                0.0
            }
        })
    }

    fn box_blur(v: &Volume<f64>) -> Volume<f64> {
        let d = v.dims();
        Volume::from_fn(d, |y, z, x| {
            let mut s = 0.0;
            let mut n = 0.0;
            for a in y.saturating_sub(1)..(y + 2).min(d.ny) {
                for b in z.saturating_sub(1)..(z + 2).min(d.nz) {
                    for c in x.saturating_sub(1)..(x + 2).min(d.nx) {
                        s += v.get(a, b, c);
                        n += 1.0;
                    }
                }
            }
            s / n
        })
    }

    #[test]
    fn constants_score_zero() {
        for level in [3.5, 0.3, 1.0 / 3.0] {
            let c = Volume::filled(Dims::cube(8), level);
            assert_eq!(tenengrad(&c), 0.0);
            assert_eq!(average_edge_strength(&c).unwrap(), 0.0);
        }
    }

    #[test]
    fn ramp_tenengrad_matches_kernel_sum() {
        // the x-derivative kernel sums to 2 * 4 * 4 = 32 per unit slope
        let s = 0.25;
        let ramp = Volume::from_fn(Dims::new(6, 5, 7), |_, _, x| s * x as f64);
        assert!((tenengrad(&ramp) - (32.0 * s).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn step_edge_strength_is_sobel_response() {
        let h = 0.8;
        let step = Volume::from_fn(Dims::new(12, 10, 3), |y, _, _| if y >= 6 { h } else { 0.0 });
        assert!((average_edge_strength(&step).unwrap() - 4.0 * h).abs() < 1e-12);
    }

    #[test]
    fn blurring_lowers_sharpness() {
        let p = edge_phantom();
        let b = box_blur(&p);
        assert!(tenengrad(&b) < tenengrad(&p));
        assert!(average_edge_strength(&b).unwrap() < average_edge_strength(&p).unwrap());
    }

    #[test]
    fn circular_shift_invariance() {
        let p = edge_phantom();
        let s = circshift(&p, [2, -1, 2]);
        assert!((tenengrad(&p) - tenengrad(&s)).abs() < 1e-6);
        assert!(
            (average_edge_strength(&p).unwrap() - average_edge_strength(&s).unwrap()).abs() < 1e-6
        );
    }

    #[test]
    fn mask_restricts_edges() {
        let p = edge_phantom();
        let mask = Volume::from_fn(p.dims(), |y, _, _| if y < 10 { 1.0 } else { 0.0 });
        let m = average_edge_strength_masked(&p, Some(&mask)).unwrap();
        assert!(m > 0.0);
        assert!(average_edge_strength_masked(&p, Some(&Volume::zeros(p.dims()))).unwrap() == 0.0);
    }
}
