use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::volume::{Dims, Volume};

/// PSNR reported when the mean squared error is below `1e-10`.
pub const PSNR_CAP: f64 = 100.0;

/// `10 log10(1 / MSE)` for data in `[0, 1]`, capped at [`PSNR_CAP`].
pub fn psnr<T: Real>(x: &Volume<T>, reference: &Volume<T>) -> Result<f64> {
    x.check_same_dims(reference)?;
    if x.is_empty() {
        return invalid("psnr of empty volumes");
    }
    let mse = x
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
        .sum::<f64>()
        / x.len() as f64;
    Ok(if mse < 1e-10 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    })
}

/// `sum |x - ref|^2 / sum |ref|^2`.
pub fn artifact_power<T: Real>(x: &Volume<T>, reference: &Volume<T>) -> Result<f64> {
    x.check_same_dims(reference)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in x.data().iter().zip(reference.data()) {
        let (a, b) = (a.as_f64(), b.as_f64());
        num += (a - b) * (a - b);
        den += b * b;
    }
    if den == 0.0 {
        return invalid("artifact power needs a reference with nonzero energy");
    }
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimOptions {
    /// Side of the cubic (or square, slice-wise) uniform window.
    pub window: usize,
    /// Score each `y`-`z` slice with a 2D window and average, instead of a 3D window.
    pub slice_wise: bool,
    pub data_range: f64,
}

impl Default for SsimOptions {
    fn default() -> Self {
        Self {
            window: 7,
            slice_wise: false,
            data_range: 1.0,
        }
    }
}

/// 3D SSIM with a 7-voxel uniform window, averaged over window centers.
pub fn ssim<T: Real>(
    x: &Volume<T>,
    reference: &Volume<T>,
    mask: Option<&Volume<T>>,
) -> Result<f64> {
    ssim_with(x, reference, mask, &SsimOptions::default())
}

/// Summed-volume table with one zero pad plane on each leading face.
struct Integral {
    n: [usize; 3],
    s: Vec<f64>,
}

impl Integral {
    fn new(dims: Dims, f: impl Fn(usize) -> f64) -> Self {
        let n = [dims.ny + 1, dims.nz + 1, dims.nx + 1];
        let mut s = vec![0.0; n[0] * n[1] * n[2]];
        let at = |y: usize, z: usize, x: usize| (y * n[1] + z) * n[2] + x;
        for y in 1..n[0] {
            for z in 1..n[1] {
                for x in 1..n[2] {
                    let v = f(dims.index(y - 1, z - 1, x - 1));
                    s[at(y, z, x)] =
                        v + s[at(y - 1, z, x)] + s[at(y, z - 1, x)] + s[at(y, z, x - 1)]
                            - s[at(y - 1, z - 1, x)]
                            - s[at(y - 1, z, x - 1)]
                            - s[at(y, z - 1, x - 1)]
                            + s[at(y - 1, z - 1, x - 1)];
                }
            }
        }
        Self { n, s }
    }

    /// Sum over the box `[lo, hi)`.
    fn sum(&self, lo: [usize; 3], hi: [usize; 3]) -> f64 {
        let n = self.n;
        let at = |y: usize, z: usize, x: usize| self.s[(y * n[1] + z) * n[2] + x];
        at(hi[0], hi[1], hi[2])
            - at(lo[0], hi[1], hi[2])
            - at(hi[0], lo[1], hi[2])
            - at(hi[0], hi[1], lo[2])
            + at(lo[0], lo[1], hi[2])
            + at(lo[0], hi[1], lo[2])
            + at(hi[0], lo[1], lo[2])
            - at(lo[0], lo[1], lo[2])
    }
}

/// SSIM with explicit options. Window statistics use population (co)variances; only
/// window centers inside `mask` contribute when a mask is given.
pub fn ssim_with<T: Real>(
    x: &Volume<T>,
    reference: &Volume<T>,
    mask: Option<&Volume<T>>,
    opts: &SsimOptions,
) -> Result<f64> {
    x.check_same_dims(reference)?;
    if let Some(m) = mask {
        x.check_same_dims(m)?;
    }
    let dims = x.dims();
    let w = opts.window;
    if w == 0 || w.is_multiple_of(2) {
        return invalid(format!("ssim window must be odd, got {w}"));
    }
    let win = if opts.slice_wise {
        [w, w, 1]
    } else {
        [w, w, w]
    };
    if dims.as_array().iter().zip(win).any(|(&n, k)| n < k) {
        return invalid(format!("volume {dims} is smaller than the ssim window"));
    }
    let a: Vec<f64> = x.data().iter().map(|v| v.as_f64()).collect();
    let b: Vec<f64> = reference.data().iter().map(|v| v.as_f64()).collect();
    let sa = Integral::new(dims, |i| a[i]);
    let sb = Integral::new(dims, |i| b[i]);
    let saa = Integral::new(dims, |i| a[i] * a[i]);
    let sbb = Integral::new(dims, |i| b[i] * b[i]);
    let sab = Integral::new(dims, |i| a[i] * b[i]);
    let c1 = (0.01 * opts.data_range).powi(2);
    let c2 = (0.03 * opts.data_range).powi(2);
    let count = (win[0] * win[1] * win[2]) as f64;
    let n = dims.as_array();
    let (mut total, mut used) = (0.0, 0usize);
    for y in 0..=n[0] - win[0] {
        for z in 0..=n[1] - win[1] {
            for xx in 0..=n[2] - win[2] {
                let lo = [y, z, xx];
                let hi = [y + win[0], z + win[1], xx + win[2]];
                if let Some(m) = mask {
                    let c = dims.index(y + win[0] / 2, z + win[1] / 2, xx + win[2] / 2);
                    if m.data()[c] == T::zero() {
                        continue;
                    }
                }
                let mu_a = sa.sum(lo, hi) / count;
                let mu_b = sb.sum(lo, hi) / count;
                let var_a = (saa.sum(lo, hi) / count - mu_a * mu_a).max(0.0);
                let var_b = (sbb.sum(lo, hi) / count - mu_b * mu_b).max(0.0);
                let cov = sab.sum(lo, hi) / count - mu_a * mu_b;
                total += (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
                    / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                used += 1;
            }
        }
    }
    if used == 0 {
        return invalid("no ssim window center inside the mask");
    }
    Ok(total / used as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured(d: Dims, seed: u64) -> Volume<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Volume::from_fn(d, |_, _, _| rng.random::<f64>())
    }

    /// Direct per-window evaluation used as an oracle for the integral-image version.
    fn ssim_naive(a: &Volume<f64>, b: &Volume<f64>, w: usize) -> f64 {
        let d = a.dims();
        let (c1, c2) = (1e-4, 9e-4);
        let mut total = 0.0;
        let mut cnt = 0;
        for y in 0..=d.ny - w {
            for z in 0..=d.nz - w {
                for x in 0..=d.nx - w {
                    let mut va = Vec::new();
                    let mut vb = Vec::new();
                    for i in 0..w {
                        for j in 0..w {
                            for k in 0..w {
                                va.push(*a.get(y + i, z + j, x + k));
                                vb.push(*b.get(y + i, z + j, x + k));
                            }
                        }
                    }
                    let n = va.len() as f64;
                    let ma = va.iter().sum::<f64>() / n;
                    let mb = vb.iter().sum::<f64>() / n;
                    let sa = va.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / n;
                    let sb = vb.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / n;
                    let cov = va
                        .iter()
                        .zip(&vb)
                        .map(|(p, q)| (p - ma) * (q - mb))
                        .sum::<f64>()
                        / n;
                    total += (2.0 * ma * mb + c1) * (2.0 * cov + c2)
                        / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
                    cnt += 1;
                }
            }
        }
        total / cnt as f64
    }

    #[test]
    fn psnr_closed_forms() {
        let d = Dims::cube(4);
        let r = textured(d, 1);
        assert_eq!(psnr(&r, &r).unwrap(), PSNR_CAP);
        let x = r.map(|v| v + 0.1);
        assert!((psnr(&x, &r).unwrap() - 20.0).abs() < 1e-9);
        let y = r.map(|v| v + 0.2);
        assert!(psnr(&y, &r).unwrap() < psnr(&x, &r).unwrap());
        assert!(psnr(&r, &Volume::zeros(Dims::cube(3))).is_err());
    }

    #[test]
    fn artifact_power_closed_forms() {
        let d = Dims::cube(5);
        let r = textured(d, 2);
        assert_eq!(artifact_power(&r, &r).unwrap(), 0.0);
        assert!((artifact_power(&Volume::zeros(d), &r).unwrap() - 1.0).abs() < 1e-12);
        assert!((artifact_power(&r.map(|v| 0.5 * v), &r).unwrap() - 0.25).abs() < 1e-12);
        assert!(artifact_power(&r, &Volume::zeros(d)).is_err());
    }

    #[test]
    fn ssim_identity_and_inversion() {
        let d = Dims::cube(10);
        let r = textured(d, 3);
        assert!((ssim(&r, &r, None).unwrap() - 1.0).abs() < 1e-9);
        assert!(ssim(&r.map(|v| 1.0 - v), &r, None).unwrap() < 1.0);
    }

    #[test]
    fn ssim_of_constants_is_luminance_term() {
        let d = Dims::cube(8);
        let (c1v, c2v) = (0.3, 0.7);
        let got = ssim(&Volume::filled(d, c1v), &Volume::filled(d, c2v), None).unwrap();
        let c1 = 1e-4;
        let expect = (2.0 * c1v * c2v + c1) / (c1v * c1v + c2v * c2v + c1);
        assert!((got - expect).abs() < 1e-9);
    }

    #[test]
    fn ssim_matches_direct_windows_and_is_symmetric() {
        let d = Dims::new(9, 8, 10);
        let a = textured(d, 4);
        let b = a
            .zip_map(&textured(d, 5), |p, q| 0.7 * p + 0.3 * q)
            .unwrap();
        let fast = ssim(&a, &b, None).unwrap();
        assert!((fast - ssim_naive(&a, &b, 7)).abs() < 1e-9);
        assert!((fast - ssim(&b, &a, None).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn ssim_masks_window_centers_and_checks_size() {
        let d = Dims::cube(9);
        let a = textured(d, 6);
        let b = a
            .zip_map(&textured(d, 7), |p, q| 0.8 * p + 0.2 * q)
            .unwrap();
        let mut mask = Volume::zeros(d);
        *mask.get_mut(4, 4, 4) = 1.0;
        let crop =
            |v: &Volume<f64>| Volume::from_fn(Dims::cube(7), |y, z, x| *v.get(y + 1, z + 1, x + 1));
        let only_center = ssim(&a, &b, Some(&mask)).unwrap();
        assert!((only_center - ssim_naive(&crop(&a), &crop(&b), 7)).abs() < 1e-9);
        assert!(ssim(&a, &b, Some(&Volume::zeros(d))).is_err());
        assert!(ssim(
            &Volume::<f64>::zeros(Dims::cube(6)),
            &Volume::zeros(Dims::cube(6)),
            None
        )
        .is_err());
    }

    #[test]
    fn slice_wise_ssim() {
        let d = Dims::new(8, 8, 3);
        let a = textured(d, 8);
        let opts = SsimOptions {
            slice_wise: true,
            ..Default::default()
        };
        assert!((ssim_with(&a, &a, None, &opts).unwrap() - 1.0).abs() < 1e-9);
        assert!(ssim(&a, &a, None).is_err());
        let b = a.map(|v| 0.5 * v);
        let s = ssim_with(&a, &b, None, &opts).unwrap();
        assert!(s < 1.0 && s > -1.0);
    }
}
