use planewarp::fit::{fit_scene, FitConfig, TrainSample};
use planewarp::fixtures::{ToyScene, TOY_SHAPE};

#[test]
fn windowed_loss_decreases_after_warmup() {
    let scene = ToyScene::new(3, 16);
    let samples: Vec<TrainSample> = scene
        .views()
        .unwrap()
        .into_iter()
        .map(|(p, c, img)| TrainSample::new(scene.cameras[c].clone(), scene.frame(p), img.rgb, None).unwrap())
        .collect();
    let cfg = FitConfig { steps: 900, batch_rays: 256, samples_per_ray: 64, shape: TOY_SHAPE, seed: 1, ..Default::default() };
    let r = fit_scene(&samples, &cfg).unwrap();
    let windows: Vec<f64> = r.losses[500..].chunks(100).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
    for p in windows.windows(2) {
        assert!(p[1] <= p[0], "{windows:?}");
    }
}
