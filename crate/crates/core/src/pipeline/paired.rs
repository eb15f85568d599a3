//! Paired evaluation of reconstructions against a motion-free reference.

use crate::error::{invalid, Result};
use crate::metrics::{
    align_to, artifact_power, average_edge_strength_masked, preprocess_pair, psnr, register_rigid,
    ssim, tenengrad, MetricKind, MetricReport, Normalization,
};
use crate::scalar::Real;
use crate::volume::Volume;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairedOptions {
    pub normalization: Normalization,
    /// Mask both volumes before registering instead of after resampling.
    pub mask_before_registration: bool,
    pub skip_registration: bool,
}

fn apply_mask<T: Real>(v: &Volume<T>, mask: &Volume<T>) -> Volume<T> {
    v.zip_map(mask, |a, m| if *m == T::zero() { T::zero() } else { *a })
        .expect("dims checked")
}

/// Register each reconstruction to the reference, mask and normalize, then compute the
/// reference-based metrics and the reference-free ones on the processed reconstruction.
///
/// A failed registration is noted in the report's preprocessing list and the volume is
/// scored unaligned.
pub fn run_paired_eval<T: Real>(
    recons: &[(String, Volume<T>)],
    reference: (&str, &Volume<T>),
    mask: Option<&Volume<T>>,
    opts: &PairedOptions,
) -> Result<Vec<MetricReport>> {
    let Some(mask) = mask else {
        return invalid("paired evaluation needs a brain mask of the reference volume");
    };
    let (ref_id, ref_vol) = reference;
    ref_vol.check_same_dims(mask)?;
    let mut reports = Vec::with_capacity(recons.len());
    for (id, recon) in recons {
        recon.check_same_dims(ref_vol)?;
        let mut report = MetricReport::new(id.clone(), ref_id);
        let (moving, fixed) = if opts.mask_before_registration {
            report.preprocessing.push("mask".into());
            (apply_mask(recon, mask), apply_mask(ref_vol, mask))
        } else {
            (recon.clone(), ref_vol.clone())
        };
        let aligned = if opts.skip_registration {
            moving
        } else {
            match register_rigid(&moving, &fixed) {
                Ok(p) => {
                    report
                        .preprocessing
                        .push(format!("register {:?}", p.to_array()));
                    align_to(&moving, &p)
                }
                Err(e) => {
                    log::warn!("registration of {id} failed: {e}");
                    report.preprocessing.push(format!("register failed: {e}"));
                    moving
                }
            }
        };
        if !opts.mask_before_registration {
            report.preprocessing.push("mask".into());
        }
        let (x, r) = preprocess_pair(&aligned, &fixed, mask, opts.normalization)?;
        report.preprocessing.push(match opts.normalization {
            Normalization::Own => "normalize p99.9 own".into(),
            Normalization::SharedReference => "normalize p99.9 shared".into(),
        });
        report.values.insert(MetricKind::Psnr, psnr(&x, &r)?);
        report
            .values
            .insert(MetricKind::Ssim, ssim(&x, &r, Some(mask))?);
        report
            .values
            .insert(MetricKind::Ap, artifact_power(&x, &r)?);
        report.values.insert(
            MetricKind::Aes,
            average_edge_strength_masked(&x, Some(mask))?,
        );
        report.values.insert(MetricKind::Tg, tenengrad(&x));
        reports.push(report);
    }
    Ok(reports)
}
