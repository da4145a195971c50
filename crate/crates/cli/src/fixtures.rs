//! Writes the synthetic scenes to disk.

use std::path::Path;

use anyhow::Result;
use planewarp::deform::{BoneRecord, PoseFile, Skeleton};
use planewarp::field::write_field;
use planewarp::fixtures::{arm_pair_fine, arm_skeleton, decimation_mesh, sphere_pair, ToyScene, ARM_DECIMATED_FACES};
use planewarp::mesh::{decimate_pair, save_obj, PosedPair};

use crate::io;
use crate::{Manifest, ManifestView};

fn records(s: &Skeleton) -> Vec<BoneRecord> {
    s.bones().iter().map(BoneRecord::from_bone).collect()
}

fn write_pair(dir: &Path, prefix: &str, pair: &PosedPair) -> Result<()> {
    save_obj(&pair.canonical, dir.join(format!("{prefix}canonical.obj")))?;
    save_obj(&pair.deformed, dir.join(format!("{prefix}deformed.obj")))?;
    Ok(())
}

fn pose(dir: &Path, name: &str, canonical: &str, deformed: &str, bones: Option<Vec<BoneRecord>>) -> Result<()> {
    PoseFile { canonical_obj: canonical.into(), deformed_obj: deformed.into(), bones }.write(&dir.join(name))?;
    Ok(())
}

/// Layout:
/// - `sphere/`: radius 0.5 and 0.6 icospheres, `pose.json`, `identity.json`
/// - `arm/`: straight vs bent arm, fine (13,776 faces) and decimated
///   (1,376 faces), with 2-bone and 24-bone skeletons
/// - `decimation/mesh.obj`: the 13,776-face closed mesh
/// - `toy/`: ground-truth field, cameras, two poses, `size`² renders with
///   masks, a held-out view and `manifest.json`
pub fn write_fixtures(out: &Path, seed: u64, size: usize) -> Result<()> {
    let sphere = out.join("sphere");
    std::fs::create_dir_all(&sphere)?;
    write_pair(&sphere, "", &sphere_pair())?;
    pose(&sphere, "pose.json", "canonical.obj", "deformed.obj", None)?;
    pose(&sphere, "identity.json", "canonical.obj", "canonical.obj", None)?;

    let arm = out.join("arm");
    std::fs::create_dir_all(&arm)?;
    let fine = arm_pair_fine();
    write_pair(&arm, "fine_", &fine)?;
    let (coarse, map) = decimate_pair(&fine, ARM_DECIMATED_FACES)?;
    write_pair(&arm, "", &coarse)?;
    io::write_json(&arm.join("map.json"), &map)?;
    pose(&arm, "pose.json", "canonical.obj", "deformed.obj", Some(records(&arm_skeleton(2))))?;
    pose(&arm, "pose_24.json", "canonical.obj", "deformed.obj", Some(records(&arm_skeleton(24))))?;
    pose(&arm, "pose_fine.json", "fine_canonical.obj", "fine_deformed.obj", Some(records(&arm_skeleton(2))))?;

    let dec = out.join("decimation");
    std::fs::create_dir_all(&dec)?;
    save_obj(&decimation_mesh(), dec.join("mesh.obj"))?;

    let toy = out.join("toy");
    std::fs::create_dir_all(&toy)?;
    let scene = ToyScene::new(seed, size);
    write_field(&toy.join("field.tplf"), &scene.field)?;
    pose(&toy, "pose_0.json", "../sphere/canonical.obj", "../sphere/canonical.obj", None)?;
    pose(&toy, "pose_1.json", "../sphere/canonical.obj", "../sphere/deformed.obj", None)?;
    io::write_json(&toy.join("render.json"), &serde_json::json!({
        "coarse": scene.sampling.n_coarse,
        "fine": scene.sampling.n_fine,
        "growth": scene.sampling.growth,
    }))?;
    for (c, cam) in scene.cameras.iter().enumerate() {
        cam.write(&toy.join(format!("camera_{c}.json")))?;
    }
    scene.held_out.write(&toy.join("camera_heldout.json"))?;
    let mut views = Vec::new();
    for (p, c, img) in scene.views()? {
        let name = format!("view_{p}_{c}");
        io::write_png(&toy.join(format!("{name}.png")), img.width, img.height, &img.rgb)?;
        img.features.write(&toy.join(format!("{name}.fimg")))?;
        let mask: Vec<bool> = img.alpha.iter().map(|a| *a > 0.5).collect();
        io::write_mask(&toy.join(format!("{name}_mask.png")), img.width, img.height, &mask)?;
        views.push(ManifestView {
            camera: format!("camera_{c}.json").into(),
            image: format!("{name}.png").into(),
            pose: format!("pose_{p}.json").into(),
            mask: None,
        });
    }
    let held = scene.render(&scene.field, 0, &scene.held_out)?;
    io::write_png(&toy.join("heldout.png"), held.width, held.height, &held.rgb)?;
    let mask: Vec<bool> = held.alpha.iter().map(|a| *a > 0.5).collect();
    io::write_mask(&toy.join("heldout_mask.png"), held.width, held.height, &mask)?;
    io::write_json(&toy.join("manifest.json"), &Manifest { views })?;
    Ok(())
}
