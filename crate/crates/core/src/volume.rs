//! Dense 3D voxel containers.
//!
//! Volumes are stored row-major with the first phase-encode axis (`y`) outermost and
//! the readout axis (`x`) innermost, so a k-space line at fixed `(ky, kz)` is a
//! contiguous run of `nx` samples.

use crate::error::{invalid, Result};
use crate::scalar::Real;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

/// Voxel counts ordered phase-encode `y` × phase-encode `z` × readout `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub ny: usize,
    pub nz: usize,
    pub nx: usize,
}

impl Dims {
    pub const fn new(ny: usize, nz: usize, nx: usize) -> Self {
        Self { ny, nz, nx }
    }

    pub const fn cube(n: usize) -> Self {
        Self::new(n, n, n)
    }

    /// Sizes in storage order `[ny, nz, nx]`.
    pub const fn as_array(&self) -> [usize; 3] {
        [self.ny, self.nz, self.nx]
    }

    pub fn from_array(a: [usize; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub const fn len(&self) -> usize {
        self.ny * self.nz * self.nx
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of phase-encode lines (`ny * nz`).
    pub const fn n_lines(&self) -> usize {
        self.ny * self.nz
    }

    /// Storage strides for `[y, z, x]`.
    pub const fn strides(&self) -> [usize; 3] {
        [self.nz * self.nx, self.nx, 1]
    }

    #[inline]
    pub const fn index(&self, iy: usize, iz: usize, ix: usize) -> usize {
        (iy * self.nz + iz) * self.nx + ix
    }

    #[inline]
    pub const fn coords(&self, idx: usize) -> [usize; 3] {
        let ix = idx % self.nx;
        let rest = idx / self.nx;
        [rest / self.nz, rest % self.nz, ix]
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.ny, self.nz, self.nx)
    }
}

/// A 3D array of voxels of element type `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume<E> {
    dims: Dims,
    data: Vec<E>,
}

impl<E: Copy + Default> Volume<E> {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            data: vec![E::default(); dims.len()],
        }
    }

    pub fn filled(dims: Dims, value: E) -> Self {
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }
}

impl<E> Volume<E> {
    pub fn from_vec(dims: Dims, data: Vec<E>) -> Result<Self> {
        if data.len() != dims.len() {
            return invalid(format!(
                "volume of dims {dims} needs {} samples, got {}",
                dims.len(),
                data.len()
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for iy in 0..dims.ny {
            for iz in 0..dims.nz {
                for ix in 0..dims.nx {
                    data.push(f(iy, iz, ix));
                }
            }
        }
        Self { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[E] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<E> {
        self.data
    }

    #[inline]
    pub fn get(&self, iy: usize, iz: usize, ix: usize) -> &E {
        &self.data[self.dims.index(iy, iz, ix)]
    }

    #[inline]
    pub fn get_mut(&mut self, iy: usize, iz: usize, ix: usize) -> &mut E {
        let i = self.dims.index(iy, iz, ix);
        &mut self.data[i]
    }

    pub fn map<F, R>(&self, f: F) -> Volume<R>
    where
        F: FnMut(&E) -> R,
    {
        Volume {
            dims: self.dims,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn zip_map<F, B, R>(&self, other: &Volume<B>, mut f: F) -> Result<Volume<R>>
    where
        F: FnMut(&E, &B) -> R,
    {
        self.check_same_dims(other)?;
        Ok(Volume {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_dims<B>(&self, other: &Volume<B>) -> Result<()> {
        if self.dims != other.dims {
            return invalid(format!(
                "dimension mismatch: {} vs {}",
                self.dims, other.dims
            ));
        }
        Ok(())
    }
}

impl<T: Real> Volume<Complex<T>> {
    pub fn from_real(real: &Volume<T>) -> Self {
        real.map(|&v| Complex::new(v, T::zero()))
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn magnitude(&self) -> Volume<T> {
        self.map(|c| c.norm())
    }

    pub fn norm_sqr(&self) -> T {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// Inner product `<self, other> = sum conj(self) * other`.
    pub fn dot(&self, other: &Self) -> Complex<T> {
        debug_assert_eq!(self.dims, other.dims);
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| {
                acc + a.conj() * b
            })
    }

    pub fn scale(&mut self, s: T) {
        for v in self.data.iter_mut() {
            *v = *v * s;
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: Complex<T>, other: &Self) {
        debug_assert_eq!(self.dims, other.dims);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = *a + alpha * b;
        }
    }

    pub fn require_finite(&self) -> Result<()> {
        if !self.is_finite() {
            return invalid("volume contains non-finite samples");
        }
        Ok(())
    }
}

impl<T: Real> Volume<T> {
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// True if every entry is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == T::zero() || v == T::one())
    }

    pub fn to_complex(&self) -> Volume<Complex<T>> {
        Volume::<Complex<T>>::from_real(self)
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn max(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn require_finite(&self) -> Result<()> {
        if !self.is_finite() {
            return invalid("volume contains non-finite samples");
        }
        Ok(())
    }

    /// Cast to another floating point precision.
    pub fn cast<U: Real>(&self) -> Volume<U> {
        self.map(|&v| U::lit(v.as_f64()))
    }
}

/// Circularly shift a volume by integer offsets along `[y, z, x]`: `out[i] = in[i - shift]`.
pub fn circshift<E: Copy>(vol: &Volume<E>, shift: [isize; 3]) -> Volume<E> {
    let d = vol.dims();
    let n = d.as_array();
    let wrap = |i: usize, s: isize, n: usize| -> usize {
        let n = n as isize;
        ((i as isize - s).rem_euclid(n)) as usize
    };
    Volume::from_fn(d, |iy, iz, ix| {
        *vol.get(
            wrap(iy, shift[0], n[0]),
            wrap(iz, shift[1], n[1]),
            wrap(ix, shift[2], n[2]),
        )
    })
}
