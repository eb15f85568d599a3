//! Single-level orthonormal 3D Haar transform and the wavelet L1 penalty.
//!
//! Each axis is split into an approximation half followed by a detail half. Odd axes
//! are zero-padded to even length before the transform.

use crate::scalar::Real;
use crate::volume::{Dims, Volume};
use num_complex::Complex;

fn padded(dims: Dims) -> Dims {
    Dims::from_array(dims.as_array().map(|n| n + n % 2))
}

fn pad<T: Real>(img: &Volume<Complex<T>>) -> Volume<Complex<T>> {
    let d = img.dims();
    let p = padded(d);
    if p == d {
        return img.clone();
    }
    let zero = Complex::new(T::zero(), T::zero());
    Volume::from_fn(p, |y, z, x| {
        if y < d.ny && z < d.nz && x < d.nx {
            *img.get(y, z, x)
        } else {
            zero
        }
    })
}

fn crop<T: Real>(img: Volume<Complex<T>>, d: Dims) -> Volume<Complex<T>> {
    if img.dims() == d {
        return img;
    }
    Volume::from_fn(d, |y, z, x| *img.get(y, z, x))
}

fn along_axes<T: Real>(vol: &mut Volume<Complex<T>>, inverse: bool) {
    let d = vol.dims();
    let n = d.as_array();
    let strides = d.strides();
    let s = T::FRAC_1_SQRT_2();
    let data = vol.data_mut();
    let mut buf = vec![Complex::new(T::zero(), T::zero()); *n.iter().max().unwrap_or(&0)];
    for axis in 0..3 {
        let len = n[axis];
        let half = len / 2;
        let stride = strides[axis];
        let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
        for i in 0..n[others[0]] {
            for j in 0..n[others[1]] {
                let start = i * strides[others[0]] + j * strides[others[1]];
                let line = &mut buf[..len];
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[start + k * stride];
                }
                for k in 0..half {
                    let (a, b) = if inverse {
                        let (lo, hi) = (line[k], line[half + k]);
                        ((lo + hi) * s, (lo - hi) * s)
                    } else {
                        let (e, o) = (line[2 * k], line[2 * k + 1]);
                        ((e + o) * s, (e - o) * s)
                    };
                    if inverse {
                        data[start + 2 * k * stride] = a;
                        data[start + (2 * k + 1) * stride] = b;
                    } else {
                        data[start + k * stride] = a;
                        data[start + (half + k) * stride] = b;
                    }
                }
            }
        }
    }
}

/// Haar coefficients `W x` (on the even-padded grid).
pub fn haar_forward<T: Real>(img: &Volume<Complex<T>>) -> Volume<Complex<T>> {
    let mut w = pad(img);
    along_axes(&mut w, false);
    w
}

/// `W^H c`, cropped back to `dims`.
pub fn haar_adjoint<T: Real>(coeffs: &Volume<Complex<T>>, dims: Dims) -> Volume<Complex<T>> {
    let mut x = coeffs.clone();
    along_axes(&mut x, true);
    crop(x, dims)
}

/// `||W x||_1` summed over real and imaginary parts, with the subgradient `W^H sign(W x)`.
pub fn wavelet_l1<T: Real>(img: &Volume<Complex<T>>) -> (f64, Volume<Complex<T>>) {
    let w = haar_forward(img);
    let value: f64 = w
        .data()
        .iter()
        .map(|c| c.re.abs().as_f64() + c.im.abs().as_f64())
        .sum();
    let sgn = |v: T| {
        if v > T::zero() {
            T::one()
        } else if v < T::zero() {
            -T::one()
        } else {
            T::zero()
        }
    };
    let signs = w.map(|c| Complex::new(sgn(c.re), sgn(c.im)));
    (value, haar_adjoint(&signs, img.dims()))
}
