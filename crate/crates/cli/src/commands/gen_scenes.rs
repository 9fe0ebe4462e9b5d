use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::Context;
use poseval::eval::GroundTruthInstance;
use poseval::formats::{write_json, CameraRecord, SceneFile};
use poseval::scene::{generate_scene, scene_seeds, write_pgm16, SceneError};
use rayon::prelude::*;

use super::load_object;
use crate::failure::{fail, Classify, CmdResult, Kind};

fn write_pgm(path: &Path, width: usize, height: usize, data: &[u16]) -> CmdResult {
    let file = File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .data()?;
    write_pgm16(BufWriter::new(file), width, height, data)
        .with_context(|| format!("writing {}", path.display()))
        .data()
}

/// Writes `scene_NNNN.json` with `scene_NNNN_depth.pgm` and
/// `scene_NNNN_ids.pgm` per scene. Scenes are generated in parallel and
/// written in order.
pub fn run(
    object: &Path,
    count: usize,
    instances: usize,
    seed: u64,
    out: &Path,
    width: usize,
    height: usize,
) -> CmdResult {
    if width == 0 || height == 0 {
        return fail(Kind::Usage, "image size must be nonzero");
    }
    let object = load_object(object)?;
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .data()?;
    let scenes: Vec<_> = scene_seeds(seed, count)
        .into_par_iter()
        .map(|s| generate_scene(&object, instances, s, width, height))
        .collect::<Result<_, SceneError>>()
        .data()?;
    for (i, scene) in scenes.iter().enumerate() {
        let gt: Vec<GroundTruthInstance> = scene
            .poses
            .iter()
            .zip(&scene.occlusion)
            .map(|(p, &o)| GroundTruthInstance::new(*p, o))
            .collect::<Result<_, _>>()
            .numerical()?;
        let mut file = SceneFile::new(&gt);
        file.camera = Some(CameraRecord::from(&scene.camera));
        file.image_size = Some([width, height]);
        file.bin = Some(scene.bin);
        file.seed = Some(scene.seed);
        let stem = format!("scene_{i:04}");
        write_json(&out.join(format!("{stem}.json")), &file).data()?;
        write_pgm(&out.join(format!("{stem}_depth.pgm")), width, height, &scene.image.depth_u16())?;
        write_pgm(&out.join(format!("{stem}_ids.pgm")), width, height, &scene.image.ids_u16())?;
    }
    eprintln!("wrote {} scenes to {}", scenes.len(), out.display());
    Ok(())
}
