use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::volume::Volume;

/// Percentile used as the normalization maximum.
pub const NORM_PERCENTILE: f64 = 99.9;

/// Which percentile scales the reconstruction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Normalization {
    /// Each volume is divided by its own in-mask percentile.
    #[default]
    Own,
    /// Both volumes are divided by the reference's in-mask percentile.
    SharedReference,
}

/// Percentile `q` in `[0, 100]` with linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return invalid("percentile of an empty set");
    }
    if !(0.0..=100.0).contains(&q) {
        return invalid(format!("percentile {q} outside [0, 100]"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

fn in_mask<T: Real>(vol: &Volume<T>, mask: &Volume<T>) -> Vec<f64> {
    vol.data()
        .iter()
        .zip(mask.data())
        .filter(|(_, m)| **m != T::zero())
        .map(|(v, _)| v.as_f64())
        .collect()
}

fn scaled<T: Real>(vol: &Volume<T>, mask: &Volume<T>, peak: f64) -> Volume<T> {
    let inv = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    vol.zip_map(mask, |v, m| {
        if *m == T::zero() {
            T::zero()
        } else {
            T::lit((v.as_f64() * inv).min(1.0))
        }
    })
    .expect("dims checked by caller")
}

/// Mask both volumes, scale by the in-mask 99.9th percentile and clip above 1.
///
/// A volume whose percentile is zero is left at zero.
pub fn preprocess_pair<T: Real>(
    recon: &Volume<T>,
    reference: &Volume<T>,
    mask: &Volume<T>,
    norm: Normalization,
) -> Result<(Volume<T>, Volume<T>)> {
    recon.check_same_dims(reference)?;
    recon.check_same_dims(mask)?;
    if !mask.is_binary() {
        return invalid("mask must be binary");
    }
    recon.require_finite()?;
    reference.require_finite()?;
    let ref_vals = in_mask(reference, mask);
    if ref_vals.is_empty() {
        return invalid("mask is empty");
    }
    let ref_peak = percentile(&ref_vals, NORM_PERCENTILE)?;
    let rec_peak = match norm {
        Normalization::Own => percentile(&in_mask(recon, mask), NORM_PERCENTILE)?,
        Normalization::SharedReference => ref_peak,
    };
    Ok((
        scaled(recon, mask, rec_peak),
        scaled(reference, mask, ref_peak),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;

    #[test]
    fn percentile_matches_linear_interpolation() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert!((percentile(&v, 99.9).unwrap() - 999.001).abs() < 1e-9);
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 1000.0);
        assert_eq!(percentile(&[3.0, 1.0, 2.0, 4.0], 50.0).unwrap(), 2.5);
        assert!(percentile(&[], 50.0).is_err());
    }

    #[test]
    fn uniform_values_normalize_to_one() {
        let d = Dims::new(10, 10, 12);
        let vol = Volume::from_fn(d, |y, z, x| {
            let i = d.index(y, z, x);
            if i < 1000 {
                (i + 1) as f64
            } else {
                5e3
            }
        });
        let mask = Volume::from_fn(d, |y, z, x| if d.index(y, z, x) < 1000 { 1.0 } else { 0.0 });
        let (a, b) = preprocess_pair(&vol, &vol, &mask, Normalization::Own).unwrap();
        assert_eq!(a, b);
        let vals: Vec<f64> = a.data()[..1000].to_vec();
        assert!((percentile(&vals, 99.9).unwrap() - 1.0).abs() < 1e-6);
        assert!(a.data()[1000..].iter().all(|&v| v == 0.0));
        assert!(a.max() <= 1.0);
    }

    #[test]
    fn empty_mask_is_rejected() {
        let d = Dims::cube(4);
        let v = Volume::filled(d, 1.0);
        assert!(preprocess_pair(&v, &v, &Volume::zeros(d), Normalization::Own).is_err());
        assert!(preprocess_pair(&v, &v, &Volume::filled(d, 0.5), Normalization::Own).is_err());
    }

    #[test]
    fn shared_normalization_uses_reference_scale() {
        let d = Dims::cube(4);
        let r = Volume::from_fn(d, |y, z, x| (y + z + x) as f64);
        let half = r.map(|v| v * 0.5);
        let mask = Volume::filled(d, 1.0);
        let (own, _) = preprocess_pair(&half, &r, &mask, Normalization::Own).unwrap();
        let (shared, rn) =
            preprocess_pair(&half, &r, &mask, Normalization::SharedReference).unwrap();
        assert_eq!(own, rn);
        let peak = percentile(r.data(), NORM_PERCENTILE).unwrap();
        for (s, v) in shared.data().iter().zip(r.data()) {
            assert!((s - 0.5 * v / peak).abs() < 1e-12);
        }
    }
}
