//! Simulated data-set directories.
//!
//! ```text
//! <dir>/meta.json          DatasetMeta
//! <dir>/plan.json          SamplingPlan
//! <dir>/coils/coil_NNN.pmv sensitivity maps (c64)
//! <dir>/kspace/coil_NNN.pmv k-space per coil (c64)
//! <dir>/trajectory.json    true per-shot poses, when known
//! <dir>/ground_truth.pmv   motion-free image (f32), when known
//! ```

use super::{load_complex, load_json, load_magnitude, save_complex, save_json, save_real};
use crate::coils::CoilSet;
use crate::encode::KSpace;
use crate::error::{invalid, Result};
use crate::motion::{MotionEvent, MotionTrajectory};
use crate::sampling::SamplingPlan;
use crate::scalar::Real;
use crate::volume::Volume;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub id: String,
    pub n_coils: usize,
    #[serde(default)]
    pub severity: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub events: Vec<MotionEvent>,
}

#[derive(Clone, Debug)]
pub struct Dataset<T: Real> {
    pub meta: DatasetMeta,
    pub plan: SamplingPlan,
    pub coils: CoilSet<T>,
    pub kspace: KSpace<T>,
    pub trajectory: Option<MotionTrajectory>,
    pub ground_truth: Option<Volume<T>>,
}

fn coil_file(dir: &Path, sub: &str, c: usize) -> std::path::PathBuf {
    dir.join(sub).join(format!("coil_{c:03}.pmv"))
}

impl<T: Real> Dataset<T> {
    pub fn save(&self, dir: &Path) -> Result<()> {
        if self.kspace.len() != self.coils.n_coils() {
            return invalid("k-space and coil counts differ");
        }
        let mut meta = self.meta.clone();
        meta.n_coils = self.coils.n_coils();
        std::fs::create_dir_all(dir)?;
        save_json(&dir.join("meta.json"), &meta)?;
        save_json(&dir.join("plan.json"), &self.plan)?;
        for (c, (s, k)) in self.coils.maps().iter().zip(&self.kspace).enumerate() {
            save_complex(
                &coil_file(dir, "coils", c),
                s,
                serde_json::json!({"coil": c}),
            )?;
            save_complex(
                &coil_file(dir, "kspace", c),
                k,
                serde_json::json!({"coil": c, "id": meta.id}),
            )?;
        }
        if let Some(t) = &self.trajectory {
            save_json(&dir.join("trajectory.json"), t)?;
        }
        if let Some(g) = &self.ground_truth {
            save_real(
                &dir.join("ground_truth.pmv"),
                g,
                serde_json::json!({"id": meta.id}),
            )?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return invalid(format!(
                "data set directory {} does not exist",
                dir.display()
            ));
        }
        let meta: DatasetMeta = load_json(&dir.join("meta.json"))?;
        let plan: SamplingPlan = load_json(&dir.join("plan.json"))?;
        let maps = (0..meta.n_coils)
            .map(|c| load_complex(&coil_file(dir, "coils", c)))
            .collect::<Result<Vec<_>>>()?;
        let kspace = (0..meta.n_coils)
            .map(|c| load_complex(&coil_file(dir, "kspace", c)))
            .collect::<Result<Vec<_>>>()?;
        let traj_path = dir.join("trajectory.json");
        let trajectory = if traj_path.exists() {
            Some(load_json(&traj_path)?)
        } else {
            None
        };
        let gt_path = dir.join("ground_truth.pmv");
        let ground_truth = if gt_path.exists() {
            Some(load_magnitude(&gt_path)?)
        } else {
            None
        };
        Ok(Self {
            meta,
            plan,
            coils: CoilSet::new(maps)?,
            kspace,
            trajectory,
            ground_truth,
        })
    }
}
