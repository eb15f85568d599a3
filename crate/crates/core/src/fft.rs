//! Unitary, centered 3D discrete Fourier transform.
//!
//! The zero frequency sits at index `floor(n / 2)` on every axis (fftshift convention),
//! and both directions are scaled by `1 / sqrt(n)` so the transform is unitary.

use crate::error::Result;
use crate::scalar::Real;
use crate::volume::{Dims, Volume};
use num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

/// Planned centered FFT for one set of dimensions.
pub struct Fft3<T: Real> {
    dims: Dims,
    forward: [Arc<dyn Fft<T>>; 3],
    inverse: [Arc<dyn Fft<T>>; 3],
    scratch_len: usize,
}

impl<T: Real> Fft3<T> {
    pub fn new(dims: Dims) -> Self {
        let mut planner = FftPlanner::<T>::new();
        let n = dims.as_array();
        let forward = n.map(|len| planner.plan_fft_forward(len));
        let inverse = n.map(|len| planner.plan_fft_inverse(len));
        let scratch_len = forward
            .iter()
            .chain(inverse.iter())
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            dims,
            forward,
            inverse,
            scratch_len,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Forward transform in place.
    pub fn forward(&self, vol: &mut Volume<Complex<T>>) {
        self.transform(vol, FftDirection::Forward)
    }

    /// Inverse transform in place.
    pub fn inverse(&self, vol: &mut Volume<Complex<T>>) {
        self.transform(vol, FftDirection::Inverse)
    }

    fn transform(&self, vol: &mut Volume<Complex<T>>, dir: FftDirection) {
        assert_eq!(vol.dims(), self.dims, "fft plan built for different dims");
        let n = self.dims.as_array();
        let strides = self.dims.strides();
        let plans = match dir {
            FftDirection::Forward => &self.forward,
            FftDirection::Inverse => &self.inverse,
        };
        let max_n = *n.iter().max().unwrap_or(&1);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); max_n];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.scratch_len];
        let data = vol.data_mut();

        for axis in 0..3 {
            let len = n[axis];
            if len == 1 {
                continue;
            }
            let stride = strides[axis];
            let half = len / 2;
            let scale = T::one() / T::from_usize_(len).sqrt();
            let plan = &plans[axis];
            let line = &mut buf[..len];
            for start in line_starts(n, axis) {
                // ifftshift on gather
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + ((i + half) % len) * stride];
                }
                plan.process_with_scratch(line, &mut scratch);
                // fftshift on scatter
                for (i, v) in line.iter().enumerate() {
                    data[start + ((i + half) % len) * stride] = *v * scale;
                }
            }
        }
    }
}

/// Offsets of the first element of every line running along `axis`.
fn line_starts(n: [usize; 3], axis: usize) -> impl Iterator<Item = usize> {
    let strides = [n[1] * n[2], n[2], 1];
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (na, nb, sa, sb) = (n[a], n[b], strides[a], strides[b]);
    (0..na).flat_map(move |i| (0..nb).map(move |j| i * sa + j * sb))
}

/// Unitary centered forward 3D FFT.
pub fn fft3_centered<T: Real>(vol: &Volume<Complex<T>>) -> Result<Volume<Complex<T>>> {
    vol.require_finite()?;
    let mut out = vol.clone();
    Fft3::new(vol.dims()).forward(&mut out);
    Ok(out)
}

/// Exact inverse of [`fft3_centered`].
pub fn ifft3_centered<T: Real>(vol: &Volume<Complex<T>>) -> Result<Volume<Complex<T>>> {
    vol.require_finite()?;
    let mut out = vol.clone();
    Fft3::new(vol.dims()).inverse(&mut out);
    Ok(out)
}

/// Centered frequency index of position `i` on an axis of length `n`.
#[inline]
pub fn centered_freq(i: usize, n: usize) -> isize {
    i as isize - (n / 2) as isize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Real;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type C = Complex<f64>;

    fn random(d: Dims, seed: u64) -> Volume<C> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Volume::from_fn(d, |_, _, _| {
            C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    /// Direct O(n^2) centered DFT along each axis.
    fn naive_dft(vol: &Volume<C>) -> Volume<C> {
        let d = vol.dims();
        let n = d.as_array();
        let mut cur = vol.clone();
        for axis in 0..3 {
            let prev = cur.clone();
            let len = n[axis];
            let c = (len / 2) as f64;
            cur = Volume::from_fn(d, |iy, iz, ix| {
                let idx = [iy, iz, ix];
                let k = idx[axis] as f64 - c;
                let mut acc = C::new(0.0, 0.0);
                for r in 0..len {
                    let mut src = idx;
                    src[axis] = r;
                    let x = r as f64 - c;
                    let ph = -2.0 * std::f64::consts::PI * k * x / len as f64;
                    acc += *prev.get(src[0], src[1], src[2]) * C::new(ph.cos(), ph.sin());
                }
                acc / (len as f64).sqrt()
            });
        }
        cur
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let d = Dims::new(6, 5, 7);
        let mut v = Volume::<C>::zeros(d);
        *v.get_mut(3, 2, 3) = C::new(1.0, 0.0);
        let k = fft3_centered(&v).unwrap();
        let expect = 1.0 / (d.len() as f64).sqrt();
        for s in k.data() {
            assert!((s.norm() - expect).abs() < 1e-12);
            assert!(
                (s.re - expect).abs() < 1e-12,
                "center impulse has zero phase"
            );
        }
    }

    #[test]
    fn matches_naive_dft_odd_and_even() {
        for d in [Dims::new(4, 5, 6), Dims::new(3, 3, 2)] {
            let v = random(d, 3);
            let fast = fft3_centered(&v).unwrap();
            let slow = naive_dft(&v);
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn inverse_and_parseval() {
        let v = random(Dims::cube(16), 11);
        let k = fft3_centered(&v).unwrap();
        let rel = (k.norm() - v.norm()).abs() / v.norm();
        assert!(rel < 1e-6);
        let back = ifft3_centered(&k).unwrap();
        let mut diff = back.clone();
        diff.axpy(C::new(-1.0, 0.0), &v);
        assert!(diff.norm() / v.norm() < 1e-6);
    }

    #[test]
    fn single_precision_roundtrip() {
        let v =
            random(Dims::new(8, 6, 10), 5).map(|c| Complex::<f32>::new(c.re as f32, c.im as f32));
        let back = ifft3_centered(&fft3_centered(&v).unwrap()).unwrap();
        let err: f32 = back
            .data()
            .iter()
            .zip(v.data())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        assert!(err.sqrt() / v.norm() < 1e-5);
        assert!(f32::lit(0.5) == 0.5);
    }

    #[test]
    fn rejects_non_finite() {
        let mut v = Volume::<C>::zeros(Dims::cube(2));
        v.data_mut()[0] = C::new(f64::NAN, 0.0);
        assert!(fft3_centered(&v).is_err());
    }
}
