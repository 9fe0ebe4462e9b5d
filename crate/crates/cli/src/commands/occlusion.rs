use std::path::Path;

use poseval::formats::{write_json, SceneFile};
use poseval::scene::{occlusion_rates, DEFAULT_HEIGHT, DEFAULT_WIDTH};

use super::load_object;
use crate::failure::{fail, Classify, CmdResult, Kind};

/// Re-renders a scene with its own camera and replaces the occlusion rates.
pub fn run(object: &Path, scene: &Path, width: Option<usize>, height: Option<usize>, out: &Path) -> CmdResult {
    let object = load_object(object)?;
    let mut file = SceneFile::read(scene).data()?;
    let Some(camera) = &file.camera else {
        return fail(Kind::Data, format!("{}: scene has no camera", scene.display()));
    };
    let camera = camera.to_camera().map_err(anyhow::Error::msg).data()?;
    let [w0, h0] = file.image_size.unwrap_or([DEFAULT_WIDTH, DEFAULT_HEIGHT]);
    let (w, h) = (width.unwrap_or(w0), height.unwrap_or(h0));
    let poses: Vec<_> = file.ground_truth(scene).data()?.into_iter().map(|g| g.pose).collect();
    let rates = occlusion_rates(&poses, &object, &camera, w, h).usage()?;
    for (inst, o) in file.instances.iter_mut().zip(rates) {
        inst.occlusion_rate = o;
    }
    file.image_size = Some([w, h]);
    write_json(out, &file).data()
}
