use std::path::Path;

use poseval::eval::GroundTruthInstance;
use poseval::formats::{write_json, CorrespondenceFile, SceneFile};
use poseval::pnp::{solve_multiview_pnp_with, PnpError, PnpOptions};

use super::load_object;
use crate::failure::{fail, Classify, CmdResult, Failure, Kind};

fn pnp_failure(name: &str, e: PnpError) -> Failure {
    let kind = match e {
        PnpError::Diverged { .. } | PnpError::Degenerate | PnpError::NonFinite => Kind::Numerical,
        _ => Kind::Data,
    };
    Failure {
        kind,
        error: anyhow::Error::new(e).context(format!("instance {name}")),
    }
}

/// Solves every instance and writes a ground-truth scene file. Instances
/// without an occlusion rate are recorded as unoccluded.
pub fn run(correspondences: &Path, object: Option<&Path>, divergence_rms: f64, out: &Path) -> CmdResult {
    if !(divergence_rms > 0.0) {
        return fail(Kind::Usage, format!("--divergence-rms must be positive, got {divergence_rms}"));
    }
    let object = object.map(load_object).transpose()?;
    let file = CorrespondenceFile::read(correspondences).data()?;
    let cameras = file.cameras(correspondences).data()?;
    let options = PnpOptions {
        divergence_rms,
        ..PnpOptions::default()
    };
    let mut instances = Vec::with_capacity(file.instances.len());
    for (i, inst) in file.instances.iter().enumerate() {
        let name = inst.name.clone().unwrap_or_else(|| i.to_string());
        let sol = solve_multiview_pnp_with(&inst.correspondence_set(), &cameras, &options)
            .map_err(|e| pnp_failure(&name, e))?;
        eprintln!("{name}: rms {:.4} px after {} iterations", sol.rms, sol.iterations);
        let pose = match &object {
            Some(obj) => obj.pose_from_original_frame(&sol.pose),
            None => sol.pose,
        };
        instances.push(GroundTruthInstance::new(pose, inst.occlusion_rate.unwrap_or(0.0)).data()?);
    }
    let mut scene = SceneFile::new(&instances);
    scene.camera = file.cameras.first().cloned();
    write_json(out, &scene).data()
}
