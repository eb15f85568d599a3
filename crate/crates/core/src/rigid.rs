//! Rigid-body transforms of image volumes.
//!
//! A pose is applied as a rotation about the volume center (trilinear resampling in
//! image space, zero fill outside the field of view) followed by a translation
//! implemented as a linear phase ramp in k-space, which gives circular-shift
//! semantics and exact sub-voxel shifts.
//!
//! All six parameters are ordered by storage axis `[y, z, x]`: `rot_deg[2]` rotates
//! about the readout `x` axis, `trans_vox[2]` shifts along `x`. The rotation matrix
//! is composed as `Rx * Ry * Rz`.

use crate::error::{invalid, Result};
use crate::fft::{centered_freq, Fft3};
use crate::scalar::Real;
use crate::volume::{Dims, Volume};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

/// Six rigid-motion parameters: rotations in degrees and translations in voxels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 6]", into = "[f64; 6]")]
pub struct RigidParams {
    pub rot_deg: [f64; 3],
    pub trans_vox: [f64; 3],
}

impl From<[f64; 6]> for RigidParams {
    fn from(a: [f64; 6]) -> Self {
        Self {
            rot_deg: [a[0], a[1], a[2]],
            trans_vox: [a[3], a[4], a[5]],
        }
    }
}

impl From<RigidParams> for [f64; 6] {
    fn from(p: RigidParams) -> Self {
        p.to_array()
    }
}

impl RigidParams {
    pub const IDENTITY: Self = Self {
        rot_deg: [0.0; 3],
        trans_vox: [0.0; 3],
    };

    pub fn new(rot_deg: [f64; 3], trans_vox: [f64; 3]) -> Self {
        Self { rot_deg, trans_vox }
    }

    pub fn translation(trans_vox: [f64; 3]) -> Self {
        Self {
            rot_deg: [0.0; 3],
            trans_vox,
        }
    }

    pub fn rotation(rot_deg: [f64; 3]) -> Self {
        Self {
            rot_deg,
            trans_vox: [0.0; 3],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        let (r, t) = (self.rot_deg, self.trans_vox);
        [r[0], r[1], r[2], t[0], t[1], t[2]]
    }

    pub fn is_identity(&self) -> bool {
        self.to_array().iter().all(|&v| v == 0.0)
    }

    pub fn has_rotation(&self) -> bool {
        self.rot_deg.iter().any(|&v| v != 0.0)
    }

    pub fn has_translation(&self) -> bool {
        self.trans_vox.iter().any(|&v| v != 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Self {
        let a = self.to_array();
        let b = other.to_array();
        Self::from(std::array::from_fn::<f64, 6, _>(|i| a[i] + b[i]))
    }

    /// Pose of applying `first` and then `self`, up to boundary effects.
    pub fn compose(&self, first: &Self) -> Self {
        let r2 = rotation_matrix(&self.rot_deg);
        let r = matmul(&r2, &rotation_matrix(&first.rot_deg));
        let t1 = mul_t(&r2, &first.trans_vox);
        Self {
            rot_deg: euler_from_matrix(&r),
            trans_vox: std::array::from_fn(|i| t1[i] + self.trans_vox[i]),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = transpose(&rotation_matrix(&self.rot_deg));
        let t = mul_t(&rt, &self.trans_vox);
        Self {
            rot_deg: euler_from_matrix(&rt),
            trans_vox: t.map(|v| -v),
        }
    }

    /// This pose expressed in the frame of `reference`.
    pub fn relative_to(&self, reference: &Self) -> Self {
        self.compose(&reference.inverse())
    }
}

pub type Mat3 = [[f64; 3]; 3];

/// Plane rotated by a rotation about storage axis `a`, as an ordered index pair.
const fn rotation_plane(axis: usize) -> (usize, usize) {
    ((axis + 1) % 3, (axis + 2) % 3)
}

fn axis_rotation(axis: usize, deg: f64) -> Mat3 {
    let (s, c) = deg.to_radians().sin_cos();
    let (u, v) = rotation_plane(axis);
    let mut m = identity3();
    m[u][u] = c;
    m[u][v] = -s;
    m[v][u] = s;
    m[v][v] = c;
    m
}

/// Derivative of [`axis_rotation`] with respect to the angle in degrees.
fn axis_rotation_deriv(axis: usize, deg: f64) -> Mat3 {
    let (s, c) = deg.to_radians().sin_cos();
    let k = std::f64::consts::PI / 180.0;
    let (u, v) = rotation_plane(axis);
    let mut m = [[0.0; 3]; 3];
    m[u][u] = -s * k;
    m[u][v] = -c * k;
    m[v][u] = c * k;
    m[v][v] = -s * k;
    m
}

fn identity3() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

pub fn transpose(a: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

// x, y, z live at storage indices 2, 0, 1
const X: usize = 2;
const Y: usize = 0;
const Z: usize = 1;

/// Rotation matrix `Rx * Ry * Rz` acting on `[y, z, x]` coordinates.
pub fn rotation_matrix(rot_deg: &[f64; 3]) -> Mat3 {
    let rx = axis_rotation(X, rot_deg[X]);
    let ry = axis_rotation(Y, rot_deg[Y]);
    let rz = axis_rotation(Z, rot_deg[Z]);
    matmul(&matmul(&rx, &ry), &rz)
}

/// Angles `[y, z, x]` (degrees) of a rotation matrix built by [`rotation_matrix`].
pub fn euler_from_matrix(r: &Mat3) -> [f64; 3] {
    // R = Rx Ry Rz is an X-Y-Z sequence over the cyclic axis order (x, y, z) = (2, 0, 1)
    let b = r[X][Z].clamp(-1.0, 1.0).asin();
    let a = (-r[Y][Z]).atan2(r[Z][Z]);
    let g = (-r[X][Y]).atan2(r[X][X]);
    let mut out = [0.0; 3];
    out[X] = a.to_degrees();
    out[Y] = b.to_degrees();
    out[Z] = g.to_degrees();
    out
}

/// Partial derivatives of [`rotation_matrix`] with respect to each angle (degrees), in
/// storage-axis order.
pub fn rotation_matrix_derivs(rot_deg: &[f64; 3]) -> [Mat3; 3] {
    let rx = axis_rotation(X, rot_deg[X]);
    let ry = axis_rotation(Y, rot_deg[Y]);
    let rz = axis_rotation(Z, rot_deg[Z]);
    let dx = axis_rotation_deriv(X, rot_deg[X]);
    let dy = axis_rotation_deriv(Y, rot_deg[Y]);
    let dz = axis_rotation_deriv(Z, rot_deg[Z]);
    let mut out = [[[0.0; 3]; 3]; 3];
    out[X] = matmul(&matmul(&dx, &ry), &rz);
    out[Y] = matmul(&matmul(&rx, &dy), &rz);
    out[Z] = matmul(&matmul(&rx, &ry), &dz);
    out
}

/// Rotation center of each axis.
pub fn center(dims: Dims) -> [f64; 3] {
    dims.as_array().map(|n| (n as f64 - 1.0) / 2.0)
}

/// Trilinear corner indices and weights for a sample position; corners outside the
/// grid are reported with `None`.
#[derive(Clone, Copy)]
struct Stencil {
    base: [isize; 3],
    frac: [f64; 3],
}

impl Stencil {
    #[inline]
    fn at(q: [f64; 3]) -> Self {
        let f = q.map(f64::floor);
        Stencil {
            base: [f[0] as isize, f[1] as isize, f[2] as isize],
            frac: [q[0] - f[0], q[1] - f[1], q[2] - f[2]],
        }
    }

    /// Visit the eight corners as `(linear index, weight)` for in-range corners.
    #[inline]
    fn for_each(&self, dims: Dims, mut f: impl FnMut(usize, f64)) {
        let n = dims.as_array();
        for cy in 0..2 {
            let iy = self.base[0] + cy;
            if iy < 0 || iy >= n[0] as isize {
                continue;
            }
            let wy = if cy == 0 {
                1.0 - self.frac[0]
            } else {
                self.frac[0]
            };
            if wy == 0.0 {
                continue;
            }
            for cz in 0..2 {
                let iz = self.base[1] + cz;
                if iz < 0 || iz >= n[1] as isize {
                    continue;
                }
                let wz = if cz == 0 {
                    1.0 - self.frac[1]
                } else {
                    self.frac[1]
                };
                if wz == 0.0 {
                    continue;
                }
                for cx in 0..2 {
                    let ix = self.base[2] + cx;
                    if ix < 0 || ix >= n[2] as isize {
                        continue;
                    }
                    let wx = if cx == 0 {
                        1.0 - self.frac[2]
                    } else {
                        self.frac[2]
                    };
                    if wx == 0.0 {
                        continue;
                    }
                    f(
                        dims.index(iy as usize, iz as usize, ix as usize),
                        wy * wz * wx,
                    );
                }
            }
        }
    }
}

/// Maps every output voxel to its source position `R^T (r - c) + c`.
struct PullMap {
    rt: Mat3,
    c: [f64; 3],
}

impl PullMap {
    fn new(dims: Dims, rot: &Mat3) -> Self {
        Self {
            rt: transpose(rot),
            c: center(dims),
        }
    }

    #[inline]
    fn source(&self, r: [usize; 3]) -> [f64; 3] {
        let d = [
            r[0] as f64 - self.c[0],
            r[1] as f64 - self.c[1],
            r[2] as f64 - self.c[2],
        ];
        std::array::from_fn(|i| {
            self.rt[i][0] * d[0] + self.rt[i][1] * d[1] + self.rt[i][2] * d[2] + self.c[i]
        })
    }
}

/// Rotate a complex volume about its center by pull-back trilinear interpolation.
pub fn rotate<T: Real>(img: &Volume<Complex<T>>, rot_deg: &[f64; 3]) -> Volume<Complex<T>> {
    let dims = img.dims();
    let map = PullMap::new(dims, &rotation_matrix(rot_deg));
    let src = img.data();
    Volume::from_fn(dims, |iy, iz, ix| {
        let st = Stencil::at(map.source([iy, iz, ix]));
        let mut acc = Complex::new(T::zero(), T::zero());
        st.for_each(dims, |i, w| acc = acc + src[i] * T::lit(w));
        acc
    })
}

/// Exact adjoint of [`rotate`]: scatters each voxel back along the interpolation weights.
pub fn rotate_adjoint<T: Real>(img: &Volume<Complex<T>>, rot_deg: &[f64; 3]) -> Volume<Complex<T>> {
    let dims = img.dims();
    let map = PullMap::new(dims, &rotation_matrix(rot_deg));
    let mut out = Volume::<Complex<T>>::zeros(dims);
    let dst = out.data_mut();
    for (idx, v) in img.data().iter().enumerate() {
        if v.re == T::zero() && v.im == T::zero() {
            continue;
        }
        let st = Stencil::at(map.source(dims.coords(idx)));
        st.for_each(dims, |i, w| dst[i] = dst[i] + *v * T::lit(w));
    }
    out
}

/// Rotate a real volume (used by registration).
pub fn rotate_real<T: Real>(img: &Volume<T>, rot_deg: &[f64; 3], shift: &[f64; 3]) -> Volume<T> {
    let dims = img.dims();
    let map = PullMap::new(dims, &rotation_matrix(rot_deg));
    let src = img.data();
    Volume::from_fn(dims, |iy, iz, ix| {
        let mut q = map.source([iy, iz, ix]);
        // pull-back of a translation by `shift` after the rotation
        let back = mul_t(&map.rt, shift);
        for a in 0..3 {
            q[a] -= back[a];
        }
        let st = Stencil::at(q);
        let mut acc = T::zero();
        st.for_each(dims, |i, w| acc = acc + src[i] * T::lit(w));
        acc
    })
}

fn mul_t(m: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

/// Derivative of the rotated volume with respect to each rotation angle (degrees).
///
/// Returns `(rotated, [d/d rot_y, d/d rot_z, d/d rot_x])`. Where a sample falls exactly
/// on a grid plane the spatial derivative uses the mean of both one-sided slopes.
pub fn rotate_with_derivs<T: Real>(
    img: &Volume<Complex<T>>,
    rot_deg: &[f64; 3],
) -> (Volume<Complex<T>>, [Volume<Complex<T>>; 3]) {
    let dims = img.dims();
    let rot = rotation_matrix(rot_deg);
    let map = PullMap::new(dims, &rot);
    let drt = rotation_matrix_derivs(rot_deg).map(|d| transpose(&d));
    let src = img.data();
    let n = dims.as_array();
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = Volume::<Complex<T>>::zeros(dims);
    let mut derivs = [
        Volume::zeros(dims),
        Volume::zeros(dims),
        Volume::zeros(dims),
    ];

    let fetch = |iy: isize, iz: isize, ix: isize| -> Complex<T> {
        if iy < 0
            || iz < 0
            || ix < 0
            || iy >= n[0] as isize
            || iz >= n[1] as isize
            || ix >= n[2] as isize
        {
            zero
        } else {
            src[dims.index(iy as usize, iz as usize, ix as usize)]
        }
    };

    for idx in 0..dims.len() {
        let r = dims.coords(idx);
        let q = map.source(r);
        let st = Stencil::at(q);
        let mut val = zero;
        st.for_each(dims, |i, w| val = val + src[i] * T::lit(w));
        out.data_mut()[idx] = val;

        // spatial gradient of the interpolant at q
        let mut grad = [zero; 3];
        if st.frac.iter().all(|&f| f != 0.0) {
            let b = st.base;
            let mut c = [[[zero; 2]; 2]; 2];
            for (dy, cy) in c.iter_mut().enumerate() {
                for (dz, cz) in cy.iter_mut().enumerate() {
                    for (dx, v) in cz.iter_mut().enumerate() {
                        *v = fetch(b[0] + dy as isize, b[1] + dz as isize, b[2] + dx as isize);
                    }
                }
            }
            let w = st.frac.map(|f| [T::lit(1.0 - f), T::lit(f)]);
            for i in 0..2 {
                for j in 0..2 {
                    grad[0] = grad[0] + (c[1][i][j] - c[0][i][j]) * (w[1][i] * w[2][j]);
                    grad[1] = grad[1] + (c[i][1][j] - c[i][0][j]) * (w[0][i] * w[2][j]);
                    grad[2] = grad[2] + (c[i][j][1] - c[i][j][0]) * (w[0][i] * w[1][j]);
                }
            }
        } else {
            // Some coordinates lie on grid planes. Work on offsets -1..=1 around the base:
            // interpolation weights and derivative stencils per axis, where on-grid axes
            // use the mean of both one-sided slopes.
            let b = st.base;
            let mut interp = [[0.0f64; 3]; 3];
            let mut deriv = [[0.0f64; 3]; 3];
            for a in 0..3 {
                let f = st.frac[a];
                if f == 0.0 {
                    interp[a] = [0.0, 1.0, 0.0];
                    deriv[a] = [-0.5, 0.0, 0.5];
                } else {
                    interp[a] = [0.0, 1.0 - f, f];
                    deriv[a] = [0.0, -1.0, 1.0];
                }
            }
            for oy in 0..3 {
                for oz in 0..3 {
                    for ox in 0..3 {
                        let o = [oy, oz, ox];
                        let wg = [
                            deriv[0][oy] * interp[1][oz] * interp[2][ox],
                            interp[0][oy] * deriv[1][oz] * interp[2][ox],
                            interp[0][oy] * interp[1][oz] * deriv[2][ox],
                        ];
                        if wg.iter().all(|&v| v == 0.0) {
                            continue;
                        }
                        let v = fetch(
                            b[0] + o[0] as isize - 1,
                            b[1] + o[1] as isize - 1,
                            b[2] + o[2] as isize - 1,
                        );
                        for a in 0..3 {
                            if wg[a] != 0.0 {
                                grad[a] = grad[a] + v * T::lit(wg[a]);
                            }
                        }
                    }
                }
            }
        }

        let d = [
            r[0] as f64 - map.c[0],
            r[1] as f64 - map.c[1],
            r[2] as f64 - map.c[2],
        ];
        for (j, m) in drt.iter().enumerate() {
            let dq = mul_t(m, &d);
            let v = grad[0] * T::lit(dq[0]) + grad[1] * T::lit(dq[1]) + grad[2] * T::lit(dq[2]);
            derivs[j].data_mut()[idx] = v;
        }
    }
    (out, derivs)
}

/// Phase ramp `exp(-i 2 pi sum_a k_a t_a / n_a)` that shifts an image by `t` voxels.
pub fn phase_ramp<T: Real>(dims: Dims, trans_vox: &[f64; 3]) -> Volume<Complex<T>> {
    let n = dims.as_array();
    let tau = 2.0 * std::f64::consts::PI;
    let axis_phase = |a: usize| -> Vec<f64> {
        (0..n[a])
            .map(|i| -tau * centered_freq(i, n[a]) as f64 * trans_vox[a] / n[a] as f64)
            .collect()
    };
    let (py, pz, px) = (axis_phase(0), axis_phase(1), axis_phase(2));
    Volume::from_fn(dims, |iy, iz, ix| {
        let (s, c) = (py[iy] + pz[iz] + px[ix]).sin_cos();
        Complex::new(T::lit(c), T::lit(s))
    })
}

/// Applies rigid poses using a planned FFT for the translation component.
pub struct RigidTransformer<T: Real> {
    fft: Fft3<T>,
}

impl<T: Real> RigidTransformer<T> {
    pub fn new(dims: Dims) -> Self {
        Self {
            fft: Fft3::new(dims),
        }
    }

    pub fn fft(&self) -> &Fft3<T> {
        &self.fft
    }

    /// Circular sub-voxel translation by `t` voxels.
    pub fn translate(&self, img: &Volume<Complex<T>>, t: &[f64; 3]) -> Volume<Complex<T>> {
        if t.iter().all(|&v| v == 0.0) {
            return img.clone();
        }
        let mut k = img.clone();
        self.fft.forward(&mut k);
        let ramp = phase_ramp::<T>(img.dims(), t);
        for (a, r) in k.data_mut().iter_mut().zip(ramp.data()) {
            *a = *a * r;
        }
        self.fft.inverse(&mut k);
        k
    }

    /// `T_p(img)`: rotation about the center, then translation.
    pub fn apply(&self, img: &Volume<Complex<T>>, p: &RigidParams) -> Volume<Complex<T>> {
        let rotated = if p.has_rotation() {
            rotate(img, &p.rot_deg)
        } else {
            img.clone()
        };
        self.translate(&rotated, &p.trans_vox)
    }

    /// Exact adjoint `T_p^H`: inverse translation, then the transpose of the interpolation.
    pub fn adjoint(&self, img: &Volume<Complex<T>>, p: &RigidParams) -> Volume<Complex<T>> {
        let neg = p.trans_vox.map(|v| -v);
        let shifted = self.translate(img, &neg);
        if p.has_rotation() {
            rotate_adjoint(&shifted, &p.rot_deg)
        } else {
            shifted
        }
    }

    /// Approximate inverse of `T_p`: inverse translation, then resampling with the
    /// inverse rotation.
    pub fn inverse(&self, img: &Volume<Complex<T>>, p: &RigidParams) -> Volume<Complex<T>> {
        let neg = p.trans_vox.map(|v| -v);
        let shifted = self.translate(img, &neg);
        if p.has_rotation() {
            rotate_inverse(&shifted, &p.rot_deg)
        } else {
            shifted
        }
    }
}

/// Resample with the inverse of [`rotation_matrix`].
pub fn rotate_inverse<T: Real>(img: &Volume<Complex<T>>, rot_deg: &[f64; 3]) -> Volume<Complex<T>> {
    let dims = img.dims();
    let inv = transpose(&rotation_matrix(rot_deg));
    let map = PullMap::new(dims, &inv);
    let src = img.data();
    Volume::from_fn(dims, |iy, iz, ix| {
        let st = Stencil::at(map.source([iy, iz, ix]));
        let mut acc = Complex::new(T::zero(), T::zero());
        st.for_each(dims, |i, w| acc = acc + src[i] * T::lit(w));
        acc
    })
}

/// Apply a rigid pose to an image (see module docs for conventions).
pub fn apply_rigid<T: Real>(
    img: &Volume<Complex<T>>,
    p: &RigidParams,
) -> Result<Volume<Complex<T>>> {
    img.require_finite()?;
    if !p.is_finite() {
        return invalid("rigid parameters must be finite");
    }
    if p.is_identity() {
        return Ok(img.clone());
    }
    Ok(RigidTransformer::new(img.dims()).apply(img, p))
}
