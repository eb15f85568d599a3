//! Motion-aware multi-coil Cartesian encoding operator.
//!
//! For shot `s` with pose `p` the forward model is `A_s x = M_s F S_c T_p x`: rigid
//! transform, coil weighting, centered unitary FFT, then selection of the shot's
//! phase-encode lines (full readout).

use crate::coils::CoilSet;
use crate::error::{invalid, Result};
use crate::fft::{centered_freq, Fft3};
use crate::rigid::{
    phase_ramp, rotate, rotate_adjoint, rotate_with_derivs, RigidParams, RigidTransformer,
};
use crate::sampling::SamplingPlan;
use crate::scalar::Real;
use crate::volume::{Dims, Volume};
use num_complex::Complex;

/// Per-coil k-space on the full `(ky, kz, kx)` grid.
pub type KSpace<T> = Vec<Volume<Complex<T>>>;

/// Samples acquired during one shot: for every coil, the shot's lines in ascending
/// line order, each `nx` samples long.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotSamples<T: Real> {
    pub shot: usize,
    pub coils: Vec<Vec<Complex<T>>>,
}

impl<T: Real> ShotSamples<T> {
    pub fn n_entries(&self) -> usize {
        self.coils.iter().map(Vec::len).sum()
    }

    pub fn norm_sqr(&self) -> T {
        self.coils.iter().flatten().map(|c| c.norm_sqr()).sum()
    }
}

/// Loss and pose gradient of one shot's data term `||A_s(p) x - y_s||^2`.
#[derive(Clone, Debug)]
pub struct ShotGradient {
    pub loss: f64,
    /// `d loss / d params` in `[rot_deg..., trans_vox...]` order.
    pub grad: [f64; 6],
}

pub struct EncodingOperator<'a, T: Real> {
    coils: &'a CoilSet<T>,
    plan: &'a SamplingPlan,
    dims: Dims,
    rigid: RigidTransformer<T>,
}

impl<'a, T: Real> EncodingOperator<'a, T> {
    pub fn new(coils: &'a CoilSet<T>, plan: &'a SamplingPlan) -> Result<Self> {
        let dims = coils.dims();
        if dims.ny != plan.ny() || dims.nz != plan.nz() {
            return invalid(format!(
                "coil dims {dims} do not match the {}x{} sampling grid",
                plan.ny(),
                plan.nz()
            ));
        }
        Ok(Self {
            coils,
            plan,
            dims,
            rigid: RigidTransformer::new(dims),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn plan(&self) -> &SamplingPlan {
        self.plan
    }

    pub fn coils(&self) -> &CoilSet<T> {
        self.coils
    }

    pub fn n_shots(&self) -> usize {
        self.plan.n_shots()
    }

    fn fft(&self) -> &Fft3<T> {
        self.rigid.fft()
    }

    pub fn transformer(&self) -> &RigidTransformer<T> {
        &self.rigid
    }

    fn check_image(&self, x: &Volume<Complex<T>>) -> Result<()> {
        if x.dims() != self.dims {
            return invalid(format!(
                "image dims {} do not match operator dims {}",
                x.dims(),
                self.dims
            ));
        }
        Ok(())
    }

    fn check_shot(&self, shot: usize) -> Result<()> {
        if shot >= self.n_shots() {
            return invalid(format!(
                "shot {shot} out of range (plan has {})",
                self.n_shots()
            ));
        }
        Ok(())
    }

    pub fn check_kspace(&self, ksp: &KSpace<T>) -> Result<()> {
        if ksp.len() != self.coils.n_coils() {
            return invalid(format!(
                "{} k-space coils for {} sensitivity maps",
                ksp.len(),
                self.coils.n_coils()
            ));
        }
        if ksp.iter().any(|k| k.dims() != self.dims) {
            return invalid("k-space dims do not match the operator");
        }
        Ok(())
    }

    /// Full-grid coil k-spaces `F (S_c u)` of an already posed image.
    fn coil_kspaces(&self, u: &Volume<Complex<T>>) -> KSpace<T> {
        self.coils
            .maps()
            .iter()
            .map(|s| {
                let mut k = u.zip_map(s, |a, b| a * b).expect("dims checked");
                self.fft().forward(&mut k);
                k
            })
            .collect()
    }

    /// `sum_c conj(S_c) F^H k_c`.
    fn coil_combine(&self, ksp: KSpace<T>) -> Volume<Complex<T>> {
        let mut acc = Volume::<Complex<T>>::zeros(self.dims);
        for (mut k, s) in ksp.into_iter().zip(self.coils.maps()) {
            self.fft().inverse(&mut k);
            for ((a, v), sv) in acc.data_mut().iter_mut().zip(k.data()).zip(s.data()) {
                *a = *a + sv.conj() * v;
            }
        }
        acc
    }

    fn gather_lines(&self, k: &Volume<Complex<T>>, lines: &[usize]) -> Vec<Complex<T>> {
        let nx = self.dims.nx;
        let mut out = Vec::with_capacity(lines.len() * nx);
        for &l in lines {
            out.extend_from_slice(&k.data()[l * nx..(l + 1) * nx]);
        }
        out
    }

    /// `A_s(p) x`: the shot's lines of every coil's k-space.
    pub fn encode_shot(
        &self,
        x: &Volume<Complex<T>>,
        shot: usize,
        p: &RigidParams,
    ) -> Result<ShotSamples<T>> {
        self.check_image(x)?;
        self.check_shot(shot)?;
        let u = self.rigid.apply(x, p);
        let lines = self.plan.shot_lines(shot);
        let coils = self
            .coil_kspaces(&u)
            .iter()
            .map(|k| self.gather_lines(k, lines))
            .collect();
        Ok(ShotSamples { shot, coils })
    }

    /// `A_s(p)^H y_s`.
    pub fn adjoint_shot(
        &self,
        samples: &ShotSamples<T>,
        shot: usize,
        p: &RigidParams,
    ) -> Result<Volume<Complex<T>>> {
        self.check_shot(shot)?;
        let lines = self.plan.shot_lines(shot);
        let nx = self.dims.nx;
        if samples.coils.len() != self.coils.n_coils()
            || samples.coils.iter().any(|c| c.len() != lines.len() * nx)
        {
            return invalid("shot samples do not match the shot's line count and coil count");
        }
        let ksp = samples
            .coils
            .iter()
            .map(|c| {
                let mut k = Volume::<Complex<T>>::zeros(self.dims);
                for (j, &l) in lines.iter().enumerate() {
                    k.data_mut()[l * nx..(l + 1) * nx].copy_from_slice(&c[j * nx..(j + 1) * nx]);
                }
                k
            })
            .collect();
        Ok(self.rigid.adjoint(&self.coil_combine(ksp), p))
    }

    /// Shots grouped by bitwise-identical pose, restricted to `keep`.
    fn pose_groups(
        &self,
        traj: &[RigidParams],
        keep: Option<&[bool]>,
    ) -> Vec<(RigidParams, Vec<usize>)> {
        let mut groups: Vec<(RigidParams, Vec<usize>)> = Vec::new();
        for (s, p) in traj.iter().enumerate() {
            if keep.is_some_and(|k| !k[s]) {
                continue;
            }
            match groups
                .iter_mut()
                .find(|(q, _)| q.to_array().map(f64::to_bits) == p.to_array().map(f64::to_bits))
            {
                Some((_, shots)) => shots.push(s),
                None => groups.push((*p, vec![s])),
            }
        }
        groups
    }

    fn check_traj(&self, traj: &[RigidParams], keep: Option<&[bool]>) -> Result<()> {
        if traj.len() != self.n_shots() {
            return invalid(format!(
                "trajectory has {} poses for {} shots",
                traj.len(),
                self.n_shots()
            ));
        }
        if keep.is_some_and(|k| k.len() != self.n_shots()) {
            return invalid("shot selection length does not match the plan");
        }
        Ok(())
    }

    /// Forward model over all (kept) shots, scattered onto the full grid.
    pub fn forward(
        &self,
        x: &Volume<Complex<T>>,
        traj: &[RigidParams],
        keep: Option<&[bool]>,
    ) -> Result<KSpace<T>> {
        self.check_image(x)?;
        self.check_traj(traj, keep)?;
        let nx = self.dims.nx;
        let mut out: KSpace<T> = (0..self.coils.n_coils())
            .map(|_| Volume::zeros(self.dims))
            .collect();
        for (p, shots) in self.pose_groups(traj, keep) {
            let ks = self.coil_kspaces(&self.rigid.apply(x, &p));
            for (o, k) in out.iter_mut().zip(&ks) {
                for &s in &shots {
                    for &l in self.plan.shot_lines(s) {
                        o.data_mut()[l * nx..(l + 1) * nx]
                            .copy_from_slice(&k.data()[l * nx..(l + 1) * nx]);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Adjoint of [`forward`](Self::forward); entries of `ksp` off the kept shots are ignored.
    pub fn adjoint(
        &self,
        ksp: &KSpace<T>,
        traj: &[RigidParams],
        keep: Option<&[bool]>,
    ) -> Result<Volume<Complex<T>>> {
        self.check_kspace(ksp)?;
        self.check_traj(traj, keep)?;
        let nx = self.dims.nx;
        let mut acc = Volume::<Complex<T>>::zeros(self.dims);
        for (p, shots) in self.pose_groups(traj, keep) {
            let masked: KSpace<T> = ksp
                .iter()
                .map(|k| {
                    let mut m = Volume::<Complex<T>>::zeros(self.dims);
                    for &s in &shots {
                        for &l in self.plan.shot_lines(s) {
                            m.data_mut()[l * nx..(l + 1) * nx]
                                .copy_from_slice(&k.data()[l * nx..(l + 1) * nx]);
                        }
                    }
                    m
                })
                .collect();
            let back = self.rigid.adjoint(&self.coil_combine(masked), &p);
            acc.axpy(Complex::new(T::one(), T::zero()), &back);
        }
        Ok(acc)
    }

    /// Data-term gradient `A^H (A x - y)` and loss `||A x - y||^2` over kept shots.
    pub fn normal_residual(
        &self,
        x: &Volume<Complex<T>>,
        ksp: &KSpace<T>,
        traj: &[RigidParams],
        keep: Option<&[bool]>,
    ) -> Result<(Volume<Complex<T>>, f64)> {
        self.check_image(x)?;
        self.check_kspace(ksp)?;
        self.check_traj(traj, keep)?;
        let nx = self.dims.nx;
        let mut grad = Volume::<Complex<T>>::zeros(self.dims);
        let mut loss = 0.0;
        for (p, shots) in self.pose_groups(traj, keep) {
            let ks = self.coil_kspaces(&self.rigid.apply(x, &p));
            let resid: KSpace<T> = ks
                .iter()
                .zip(ksp)
                .map(|(k, y)| {
                    let mut r = Volume::<Complex<T>>::zeros(self.dims);
                    for &s in &shots {
                        for &l in self.plan.shot_lines(s) {
                            for i in l * nx..(l + 1) * nx {
                                let d = k.data()[i] - y.data()[i];
                                loss += d.norm_sqr().as_f64();
                                r.data_mut()[i] = d;
                            }
                        }
                    }
                    r
                })
                .collect();
            let back = self.rigid.adjoint(&self.coil_combine(resid), &p);
            grad.axpy(Complex::new(T::one(), T::zero()), &back);
        }
        Ok((grad, loss))
    }

    /// Per-shot squared residuals `||A_s x - y_s||^2` and `||y_s||^2`.
    pub fn shot_residuals(
        &self,
        x: &Volume<Complex<T>>,
        ksp: &KSpace<T>,
        traj: &[RigidParams],
    ) -> Result<Vec<(f64, f64)>> {
        self.check_image(x)?;
        self.check_kspace(ksp)?;
        self.check_traj(traj, None)?;
        let nx = self.dims.nx;
        let mut out = vec![(0.0, 0.0); self.n_shots()];
        for (p, shots) in self.pose_groups(traj, None) {
            let ks = self.coil_kspaces(&self.rigid.apply(x, &p));
            for (k, y) in ks.iter().zip(ksp) {
                for &s in &shots {
                    for &l in self.plan.shot_lines(s) {
                        for i in l * nx..(l + 1) * nx {
                            out[s].0 += (k.data()[i] - y.data()[i]).norm_sqr().as_f64();
                            out[s].1 += y.data()[i].norm_sqr().as_f64();
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Loss of one shot and its analytic gradient with respect to the six pose parameters.
    ///
    /// Translation derivatives follow from the phase ramp; rotation derivatives chain
    /// the trilinear interpolant's spatial gradient through the rotation matrix.
    pub fn shot_pose_gradient(
        &self,
        x: &Volume<Complex<T>>,
        ksp: &KSpace<T>,
        shot: usize,
        p: &RigidParams,
    ) -> Result<ShotGradient> {
        self.check_image(x)?;
        self.check_kspace(ksp)?;
        self.check_shot(shot)?;
        let nx = self.dims.nx;
        let lines = self.plan.shot_lines(shot);

        let (u, du) = rotate_with_derivs(x, &p.rot_deg);
        let ramp = phase_ramp::<T>(self.dims, &p.trans_vox);
        let mut big_v = u;
        self.fft().forward(&mut big_v);
        for (a, r) in big_v.data_mut().iter_mut().zip(ramp.data()) {
            *a = *a * r;
        }
        let mut v = big_v.clone();
        self.fft().inverse(&mut v);

        let mut loss = 0.0;
        let resid: KSpace<T> = self
            .coil_kspaces(&v)
            .into_iter()
            .zip(ksp)
            .map(|(k, y)| {
                let mut r = Volume::<Complex<T>>::zeros(self.dims);
                for &l in lines {
                    for i in l * nx..(l + 1) * nx {
                        let d = k.data()[i] - y.data()[i];
                        loss += d.norm_sqr().as_f64();
                        r.data_mut()[i] = d;
                    }
                }
                r
            })
            .collect();
        let mut b = self.coil_combine(resid);
        self.fft().forward(&mut b);

        let mut grad = [0.0; 6];
        let n = self.dims.as_array();
        let tau = 2.0 * std::f64::consts::PI;
        let mut tsum = [0.0f64; 3];
        for idx in 0..self.dims.len() {
            // 2 Re( conj(B) * (-i w) V ) = 2 w Im( conj(B) V )
            let prod = b.data()[idx].conj() * big_v.data()[idx];
            let im = prod.im.as_f64();
            if im == 0.0 {
                continue;
            }
            let c = self.dims.coords(idx);
            for a in 0..3 {
                let w = tau * centered_freq(c[a], n[a]) as f64 / n[a] as f64;
                tsum[a] += 2.0 * w * im;
            }
        }
        grad[3..6].copy_from_slice(&tsum);

        for (a, r) in b.data_mut().iter_mut().zip(ramp.data()) {
            *a = *a * r.conj();
        }
        self.fft().inverse(&mut b);
        for (j, d) in du.iter().enumerate() {
            grad[j] = 2.0 * b.dot(d).re.as_f64();
        }
        Ok(ShotGradient { loss, grad })
    }

    /// Rotation part of the pose only (no translation), exposed for diagnostics.
    pub fn rotate_image(&self, x: &Volume<Complex<T>>, rot_deg: &[f64; 3]) -> Volume<Complex<T>> {
        rotate(x, rot_deg)
    }

    pub fn rotate_image_adjoint(
        &self,
        x: &Volume<Complex<T>>,
        rot_deg: &[f64; 3],
    ) -> Volume<Complex<T>> {
        rotate_adjoint(x, rot_deg)
    }
}

/// `A_s(p) x` for one shot (convenience wrapper around [`EncodingOperator`]).
pub fn encode_shot<T: Real>(
    img: &Volume<Complex<T>>,
    coils: &CoilSet<T>,
    plan: &SamplingPlan,
    shot: usize,
    p: &RigidParams,
) -> Result<ShotSamples<T>> {
    EncodingOperator::new(coils, plan)?.encode_shot(img, shot, p)
}

/// `A_s(p)^H y_s` for one shot.
pub fn adjoint_shot<T: Real>(
    samples: &ShotSamples<T>,
    coils: &CoilSet<T>,
    plan: &SamplingPlan,
    shot: usize,
    p: &RigidParams,
) -> Result<Volume<Complex<T>>> {
    EncodingOperator::new(coils, plan)?.adjoint_shot(samples, shot, p)
}
