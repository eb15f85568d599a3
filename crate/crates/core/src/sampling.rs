//! Cartesian phase-encode undersampling and the shot schedule.
//!
//! The mask lives on the `(ky, kz)` grid; every sampled phase-encode line is read out
//! in full along `kx`. Sampled lines are partitioned into shots of near-equal size,
//! with the central 3x3 block of lines acquired in shot 0.

use crate::error::{invalid, Error, Result};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Relative tolerance on the achieved acceleration.
pub const ACCEL_TOLERANCE: f64 = 0.02;

/// Parameters of [`generate_plan`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    pub ny: usize,
    pub nz: usize,
    pub accel: f64,
    pub acs: (usize, usize),
    pub pf_z: f64,
    pub n_shots: usize,
    pub seed: u64,
}

impl PlanParams {
    /// The acquisition geometry of the paired in-vivo dataset: 222x236 phase-encode
    /// grid, acceleration 4.94, 37x37 ACS, partial Fourier 0.85 in kz, 52 shots.
    pub fn pmoc3d(seed: u64) -> Self {
        Self {
            ny: 222,
            nz: 236,
            accel: 4.94,
            acs: (37, 37),
            pf_z: 0.85,
            n_shots: 52,
            seed,
        }
    }

    /// The same geometry rescaled to a smaller phase-encode grid (ACS scales with the grid).
    pub fn pmoc3d_scaled(ny: usize, nz: usize, n_shots: usize, seed: u64) -> Self {
        let ay = ((37.0 * ny as f64 / 222.0).round() as usize).max(3).min(ny);
        let az = ((37.0 * nz as f64 / 236.0).round() as usize).max(3).min(nz);
        Self {
            ny,
            nz,
            accel: 4.94,
            acs: (ay, az),
            pf_z: 0.85,
            n_shots,
            seed,
        }
    }

    pub fn full(ny: usize, nz: usize, n_shots: usize, seed: u64) -> Self {
        Self {
            ny,
            nz,
            accel: 1.0,
            acs: (0, 0),
            pf_z: 1.0,
            n_shots,
            seed,
        }
    }
}

/// Undersampling mask plus the assignment of sampled lines to shots.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPlan {
    params: PlanParams,
    mask: Vec<bool>,
    /// Shot index of each sampled line, in raster order of the mask.
    shot_of_line: Vec<u32>,
    /// Line indices (`ky * nz + kz`) per shot, ascending.
    shots: Vec<Vec<usize>>,
}

fn acs_range(n: usize, a: usize) -> std::ops::Range<usize> {
    let start = (n / 2).saturating_sub(a / 2);
    start..(start + a).min(n)
}

/// Number of kz rows kept by partial Fourier, counted from the low-index end.
pub fn pf_retained(nz: usize, pf_z: f64) -> usize {
    ((pf_z * nz as f64 - 1e-9).ceil() as usize).clamp(1, nz)
}

/// Build a sampling plan (mask and shot schedule); seeded and reproducible.
pub fn generate_plan(p: &PlanParams) -> Result<SamplingPlan> {
    let PlanParams {
        ny,
        nz,
        accel,
        acs,
        pf_z,
        n_shots,
        seed,
    } = *p;
    if ny == 0 || nz == 0 {
        return invalid("phase-encode grid must be non-empty");
    }
    if !(accel.is_finite() && accel >= 1.0) {
        return Err(Error::Config(format!(
            "acceleration must be >= 1, got {accel}"
        )));
    }
    if acs.0 > ny || acs.1 > nz {
        return Err(Error::Config(format!(
            "ACS {acs:?} does not fit grid {ny}x{nz}"
        )));
    }
    if !(pf_z > 0.5 && pf_z <= 1.0) {
        return Err(Error::Config(format!(
            "partial Fourier fraction must be in (0.5, 1], got {pf_z}"
        )));
    }
    if n_shots == 0 {
        return Err(Error::Config("n_shots must be at least 1".into()));
    }

    let n_lines = ny * nz;
    let kz_keep = pf_retained(nz, pf_z);
    let (acs_y, acs_z) = (acs_range(ny, acs.0), acs_range(nz, acs.1));
    let in_acs = |iy: usize, iz: usize| acs_y.contains(&iy) && acs_z.contains(&iz);

    let mut acs_lines = Vec::new();
    let mut candidates = Vec::new();
    for iy in 0..ny {
        for iz in 0..nz {
            let line = iy * nz + iz;
            if in_acs(iy, iz) {
                acs_lines.push(line);
            } else if iz < kz_keep {
                candidates.push(line);
            }
        }
    }
    let capacity = acs_lines.len() + candidates.len();

    let target = n_lines as f64 / accel;
    let budget = target.round() as usize;
    if acs_lines.len() > budget {
        return Err(Error::Config(format!(
            "ACS block alone ({} lines) exceeds the sampling budget of {budget} lines",
            acs_lines.len()
        )));
    }
    if budget > capacity {
        return Err(Error::Config(format!(
            "budget of {budget} lines exceeds the {capacity} lines available under partial Fourier"
        )));
    }
    // Prefer shots of identical size when rounding up keeps the acceleration in tolerance.
    let equal = n_shots * ((target / n_shots as f64 - 1e-9).ceil() as usize);
    let total = if equal.min(capacity) as f64 >= acs_lines.len() as f64
        && ((n_lines as f64 / equal.min(capacity) as f64) - accel).abs() / accel <= ACCEL_TOLERANCE
    {
        equal.min(capacity)
    } else {
        budget
    };
    if total < n_shots {
        return Err(Error::Config(format!(
            "{total} sampled lines cannot fill {n_shots} shots"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; n_lines];
    for &l in &acs_lines {
        mask[l] = true;
    }
    let extra = total - acs_lines.len();
    for i in index::sample(&mut rng, candidates.len(), extra).into_iter() {
        mask[candidates[i]] = true;
    }

    // shot quotas differ by at most one; shot 0 takes the remainder first
    let base = total / n_shots;
    let rem = total % n_shots;
    let quota = |s: usize| base + usize::from(s < rem);

    let (cy, cz) = (ny / 2, nz / 2);
    let is_center = |line: usize| {
        let (iy, iz) = (line / nz, line % nz);
        iy + 1 >= cy && iy <= cy + 1 && iz + 1 >= cz && iz <= cz + 1
    };
    let mut center = Vec::new();
    let mut rest = Vec::new();
    for (line, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        if is_center(line) {
            center.push(line);
        } else {
            rest.push(line);
        }
    }
    if center.len() > quota(0) {
        return Err(Error::Config(format!(
            "shot 0 holds {} lines but the k-space center needs {}",
            quota(0),
            center.len()
        )));
    }
    rest.shuffle(&mut rng);

    let mut shots: Vec<Vec<usize>> = vec![Vec::new(); n_shots];
    shots[0].extend(center);
    let mut it = rest.into_iter();
    for (s, shot) in shots.iter_mut().enumerate() {
        while shot.len() < quota(s) {
            shot.push(it.next().expect("quotas sum to the sampled total"));
        }
        shot.sort_unstable();
    }

    SamplingPlan::from_shots(p.clone(), mask, &shots)
}

impl SamplingPlan {
    fn from_shots(params: PlanParams, mask: Vec<bool>, shots: &[Vec<usize>]) -> Result<Self> {
        let mut shot_at = vec![u32::MAX; mask.len()];
        for (s, lines) in shots.iter().enumerate() {
            for &l in lines {
                shot_at[l] = s as u32;
            }
        }
        let shot_of_line = mask
            .iter()
            .zip(&shot_at)
            .filter(|(m, _)| **m)
            .map(|(_, &s)| s)
            .collect();
        Ok(Self {
            params,
            mask,
            shot_of_line,
            shots: shots.to_vec(),
        })
    }

    /// Rebuild from a mask and the per-sampled-line shot list, validating the partition.
    pub fn from_parts(params: PlanParams, mask: Vec<bool>, shot_of_line: Vec<u32>) -> Result<Self> {
        if mask.len() != params.ny * params.nz {
            return invalid("mask size does not match the phase-encode grid");
        }
        let sampled = mask.iter().filter(|m| **m).count();
        if sampled != shot_of_line.len() {
            return invalid(format!(
                "{} shot indices for {sampled} sampled lines",
                shot_of_line.len()
            ));
        }
        let mut shots = vec![Vec::new(); params.n_shots];
        let lines = mask.iter().enumerate().filter(|(_, m)| **m).map(|(l, _)| l);
        for (line, &s) in lines.zip(&shot_of_line) {
            let Some(shot) = shots.get_mut(s as usize) else {
                return invalid(format!("shot index {s} out of range"));
            };
            shot.push(line);
        }
        Ok(Self {
            params,
            mask,
            shot_of_line,
            shots,
        })
    }

    pub fn params(&self) -> &PlanParams {
        &self.params
    }

    pub fn ny(&self) -> usize {
        self.params.ny
    }

    pub fn nz(&self) -> usize {
        self.params.nz
    }

    pub fn n_shots(&self) -> usize {
        self.params.n_shots
    }

    /// Phase-encode mask in raster order (`ky * nz + kz`).
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_sampled(&self, ky: usize, kz: usize) -> bool {
        self.mask[ky * self.params.nz + kz]
    }

    pub fn shot_of_line(&self) -> &[u32] {
        &self.shot_of_line
    }

    /// Sampled line indices of one shot.
    pub fn shot_lines(&self, shot: usize) -> &[usize] {
        &self.shots[shot]
    }

    pub fn shots(&self) -> &[Vec<usize>] {
        &self.shots
    }

    pub fn n_sampled(&self) -> usize {
        self.shot_of_line.len()
    }

    pub fn stats(&self) -> PlanStats {
        plan_stats(self)
    }
}

/// Invariant quantities of a plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub achieved_accel: f64,
    pub lines_per_shot: Vec<usize>,
    pub total_lines: usize,
    pub acs_complete: bool,
    pub pf_respected: bool,
    pub center_in_first_shot: bool,
}

pub fn plan_stats(plan: &SamplingPlan) -> PlanStats {
    let p = &plan.params;
    let total = plan.n_sampled();
    let (acs_y, acs_z) = (acs_range(p.ny, p.acs.0), acs_range(p.nz, p.acs.1));
    let acs_complete = acs_y
        .clone()
        .all(|iy| acs_z.clone().all(|iz| plan.is_sampled(iy, iz)));
    let kz_keep = pf_retained(p.nz, p.pf_z);
    let pf_respected = (0..p.ny).all(|iy| {
        (kz_keep..p.nz)
            .all(|iz| !plan.is_sampled(iy, iz) || (acs_y.contains(&iy) && acs_z.contains(&iz)))
    });
    let (cy, cz) = (p.ny / 2, p.nz / 2);
    let mut center_in_first_shot = true;
    for iy in cy.saturating_sub(1)..(cy + 2).min(p.ny) {
        for iz in cz.saturating_sub(1)..(cz + 2).min(p.nz) {
            let line = iy * p.nz + iz;
            if plan.mask[line] && !plan.shots[0].contains(&line) {
                center_in_first_shot = false;
            }
        }
    }
    PlanStats {
        achieved_accel: (p.ny * p.nz) as f64 / total as f64,
        lines_per_shot: plan.shots.iter().map(Vec::len).collect(),
        total_lines: total,
        acs_complete,
        pf_respected,
        center_in_first_shot,
    }
}

#[derive(Serialize, Deserialize)]
struct PlanFile {
    dims: [usize; 2],
    accel: f64,
    acs: [usize; 2],
    pf_z: f64,
    n_shots: usize,
    seed: u64,
    /// Alternating run lengths of unsampled / sampled lines, starting with unsampled.
    mask_rle: Vec<usize>,
    shot_of_line: Vec<u32>,
}

fn rle_encode(mask: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut cur = false;
    let mut len = 0;
    for &m in mask {
        if m == cur {
            len += 1;
        } else {
            runs.push(len);
            cur = m;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

fn rle_decode(runs: &[usize]) -> Vec<bool> {
    runs.iter()
        .enumerate()
        .flat_map(|(i, &n)| std::iter::repeat_n(i % 2 == 1, n))
        .collect()
}

impl Serialize for SamplingPlan {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let p = &self.params;
        PlanFile {
            dims: [p.ny, p.nz],
            accel: p.accel,
            acs: [p.acs.0, p.acs.1],
            pf_z: p.pf_z,
            n_shots: p.n_shots,
            seed: p.seed,
            mask_rle: rle_encode(&self.mask),
            shot_of_line: self.shot_of_line.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SamplingPlan {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = PlanFile::deserialize(d)?;
        let params = PlanParams {
            ny: f.dims[0],
            nz: f.dims[1],
            accel: f.accel,
            acs: (f.acs[0], f.acs[1]),
            pf_z: f.pf_z,
            n_shots: f.n_shots,
            seed: f.seed,
        };
        SamplingPlan::from_parts(params, rle_decode(&f.mask_rle), f.shot_of_line)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pmoc3d_geometry() {
        let plan = generate_plan(&PlanParams::pmoc3d(0)).unwrap();
        let st = plan.stats();
        assert_eq!(st.total_lines, 52 * 204);
        assert!(st.lines_per_shot.iter().all(|&n| n == 204));
        assert!(st.achieved_accel >= 4.84 && st.achieved_accel <= 5.04);
        assert!(st.acs_complete && st.pf_respected && st.center_in_first_shot);
    }

    #[test]
    fn excluded_band_is_empty_outside_acs() {
        let plan = generate_plan(&PlanParams::pmoc3d(3)).unwrap();
        let keep = pf_retained(236, 0.85);
        assert_eq!(keep, 201);
        for iy in 0..222 {
            for iz in keep..236 {
                assert!(!plan.is_sampled(iy, iz));
            }
        }
    }

    #[test]
    fn full_sampling_covers_everything() {
        let plan = generate_plan(&PlanParams {
            acs: (4, 4),
            ..PlanParams::full(10, 10, 3, 1)
        })
        .unwrap();
        assert!(plan.mask().iter().all(|&m| m));
        let st = plan.stats();
        assert_eq!(st.achieved_accel, 1.0);
        assert_eq!(st.lines_per_shot.iter().sum::<usize>(), 100);
    }

    #[test]
    fn acs_exceeding_budget_is_rejected() {
        let p = PlanParams {
            ny: 20,
            nz: 20,
            accel: 8.0,
            acs: (10, 10),
            pf_z: 1.0,
            n_shots: 2,
            seed: 0,
        };
        assert!(matches!(generate_plan(&p), Err(Error::Config(_))));
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let ok = PlanParams::full(8, 8, 2, 0);
        assert!(generate_plan(&PlanParams {
            accel: 0.5,
            ..ok.clone()
        })
        .is_err());
        assert!(generate_plan(&PlanParams {
            pf_z: 0.5,
            ..ok.clone()
        })
        .is_err());
        assert!(generate_plan(&PlanParams {
            n_shots: 0,
            ..ok.clone()
        })
        .is_err());
        assert!(generate_plan(&PlanParams { acs: (9, 1), ..ok }).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let plan = generate_plan(&PlanParams::pmoc3d_scaled(32, 34, 8, 9)).unwrap();
        let s = serde_json::to_string(&plan).unwrap();
        let back: SamplingPlan = serde_json::from_str(&s).unwrap();
        assert_eq!(back, plan);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn plan_invariants(ny in 12usize..48, nz in 12usize..48, accel in 1.0f64..5.0,
                           pf in 0.6f64..=1.0, n_shots in 1usize..12, seed in any::<u64>()) {
            let p = PlanParams { ny, nz, accel, acs: (5, 5), pf_z: pf, n_shots, seed };
            if let Ok(plan) = generate_plan(&p) {
                let st = plan.stats();
                prop_assert!(st.acs_complete);
                prop_assert!(st.pf_respected);
                prop_assert!(st.center_in_first_shot);
                let (mn, mx) = (st.lines_per_shot.iter().min().unwrap(), st.lines_per_shot.iter().max().unwrap());
                prop_assert!(mx - mn <= 1);
                prop_assert_eq!(st.lines_per_shot.iter().sum::<usize>(), plan.mask().iter().filter(|m| **m).count());
                let budget = ((ny * nz) as f64 / accel).round();
                if budget >= 50.0 {
                    prop_assert!((st.achieved_accel - accel).abs() / accel <= ACCEL_TOLERANCE + 0.5 / budget * accel);
                }
                // disjoint: every sampled line appears in exactly one shot
                let mut seen = vec![0u8; ny * nz];
                for s in plan.shots() { for &l in s { seen[l] += 1; } }
                for (l, &m) in plan.mask().iter().enumerate() { prop_assert_eq!(seen[l], u8::from(m)); }
                prop_assert_eq!(generate_plan(&p).unwrap(), plan);
            }
        }
    }
}
