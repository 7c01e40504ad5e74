mod common;

use common::{features, key, scene};
use provmark_core::watermark::{embed_frame, extract_frame, Extraction, DEFAULT_DELTA};
use provmark_core::{FusedPayload, ImageSignature, PreSharedKey, RasterImage, SubbandPlan};
use provmark_service::{
    acquire_and_stamp, plan_for, verify_image, PipelineError, Registry, Tolerances, Verdict,
    WatermarkStore,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn registry_with(dir: &std::path::Path, serials: &[&str]) -> Registry {
    let reg = Registry::open(dir.join("reg.ndjson")).unwrap();
    for s in serials {
        reg.register_device(s, features(s).fingerprint()).unwrap();
    }
    reg
}

fn verify(img: &RasterImage, reg: &Registry) -> provmark_service::VerificationReport {
    let plan = plan_for(img, DEFAULT_DELTA).unwrap().unwrap();
    verify_image(img, &key(), &plan, reg, Tolerances::default()).unwrap()
}

#[test]
fn stamped_image_is_authentic_after_png_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let reg = registry_with(dir.path(), &["SN-1"]);
    let store = WatermarkStore::open(dir.path().join("stamped")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..5 {
        let img = scene(320, 240, &mut rng);
        let plan = SubbandPlan::for_image(&img, DEFAULT_DELTA).unwrap();
        let path = store
            .stamp_and_store(&format!("img{i}.png"), &img, &features("SN-1"), &key(), &plan)
            .unwrap();
        let back = RasterImage::load_png(&path).unwrap();
        let report = verify(&back, &reg);
        assert_eq!(report.verdict, Verdict::Authentic, "{report:?}");
        assert_eq!(report.device_id.as_deref(), Some("SN-1"));
        assert!(report.max_byte_delta.unwrap() <= 2);
    }
}

#[test]
fn unstamped_image_has_no_watermark() {
    let dir = tempfile::tempdir().unwrap();
    let reg = registry_with(dir.path(), &["SN-1"]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let report = verify(&scene(320, 240, &mut rng), &reg);
    assert_eq!(report.verdict, Verdict::NoWatermark);
    assert!(report.device_id.is_none() && report.extracted_dfp.is_none());
    assert!(report.signature_similarity.is_none() && report.max_byte_delta.is_none());
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["verdict"], "NoWatermark");
    assert!(json.get("device_id").is_none());
}

#[test]
fn wrong_key_cannot_authenticate() {
    let dir = tempfile::tempdir().unwrap();
    let reg = registry_with(dir.path(), &["SN-1"]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let img = scene(320, 240, &mut rng);
    let plan = SubbandPlan::for_image(&img, DEFAULT_DELTA).unwrap();
    let stamped = acquire_and_stamp(&img, &features("SN-1"), &key(), &plan).unwrap();
    let other = PreSharedKey::new(b"some-other-deployment-key".to_vec()).unwrap();
    let report = verify_image(&stamped, &other, &plan, &reg, Tolerances::default()).unwrap();
    assert_eq!(report.verdict, Verdict::UnknownDevice);
}

#[test]
fn transplanted_frame_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let reg = registry_with(dir.path(), &["SN-1", "SN-2"]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = scene(320, 240, &mut rng);
    let plan = SubbandPlan::for_image(&a, DEFAULT_DELTA).unwrap();
    let stamped_a = acquire_and_stamp(&a, &features("SN-1"), &key(), &plan).unwrap();
    let frame = match extract_frame(&stamped_a, &plan).unwrap() {
        Extraction::Frame(f) => f,
        Extraction::NoWatermark => panic!("frame lost"),
    };
    let b = scene(320, 240, &mut rng);
    let stamped_b = acquire_and_stamp(&b, &features("SN-2"), &key(), &plan).unwrap();
    let forged = embed_frame(&stamped_b, &frame, &plan).unwrap();
    let report = verify(&forged, &reg);
    assert_eq!(report.verdict, Verdict::Tampered, "{report:?}");
    assert_eq!(report.device_id.as_deref(), Some("SN-1"));

    // Same forgery against a registry that lacks the source device.
    let dir2 = tempfile::tempdir().unwrap();
    let reg2 = registry_with(dir2.path(), &["SN-2"]);
    assert_eq!(verify(&forged, &reg2).verdict, Verdict::UnknownDevice);
}

#[test]
fn one_device_two_images_share_device_segment() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = features("SN-1");
    let p1 = FusedPayload::fuse(&f.fingerprint(), &ImageSignature::compute(&scene(200, 200, &mut rng)).unwrap());
    let p2 = FusedPayload::fuse(&f.fingerprint(), &ImageSignature::compute(&scene(200, 200, &mut rng)).unwrap());
    assert_eq!(p1.device_segment(), p2.device_segment());
    assert_ne!(p1.image_segment(), p2.image_segment());
}

#[test]
fn share_refuses_paths_outside_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = WatermarkStore::open(dir.path().join("stamped")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let img = scene(128, 128, &mut rng);
    let inside = store.store("ok.png", &img).unwrap();
    assert!(!store.share(&inside).unwrap().is_empty());

    let outside = dir.path().join("loose.png");
    img.save_png(&outside).unwrap();
    assert!(matches!(store.share(&outside), Err(PipelineError::OutsideStore(_))));
    let sneaky = store.dir().join("..").join("loose.png");
    assert!(matches!(store.share(&sneaky), Err(PipelineError::OutsideStore(_))));
    #[cfg(unix)]
    {
        let link = store.dir().join("link.png");
        std::os::unix::fs::symlink(&outside, &link).unwrap();
        assert!(matches!(store.share(&link), Err(PipelineError::OutsideStore(_))));
    }
    for bad in ["../x.png", "a/b.png", ".hidden.png", "x.jpg", ""] {
        assert!(matches!(store.store(bad, &img), Err(PipelineError::InvalidName(_))), "{bad}");
    }
}

#[test]
fn verification_never_writes_the_registry() {
    let dir = tempfile::tempdir().unwrap();
    let reg = registry_with(dir.path(), &["SN-1"]);
    let before = std::fs::read(reg.path()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let img = scene(320, 240, &mut rng);
    let plan = SubbandPlan::for_image(&img, DEFAULT_DELTA).unwrap();
    let stamped = acquire_and_stamp(&img, &features("SN-1"), &key(), &plan).unwrap();
    verify(&stamped, &reg);
    verify(&img, &reg);
    assert_eq!(std::fs::read(reg.path()).unwrap(), before);
}

#[test]
fn gray_and_tiny_images() {
    let dir = tempfile::tempdir().unwrap();
    let reg = registry_with(dir.path(), &[]);
    let gray = RasterImage::gray(320, 240, vec![90; 320 * 240]).unwrap();
    let plan = SubbandPlan::new(DEFAULT_DELTA, 3).unwrap();
    let r = verify_image(&gray, &key(), &plan, &reg, Tolerances::default()).unwrap();
    assert_eq!(r.verdict, Verdict::NoWatermark);
    let tiny = RasterImage::rgb(40, 40, vec![90; 40 * 40 * 3]).unwrap();
    assert!(plan_for(&tiny, DEFAULT_DELTA).unwrap().is_none());
}
