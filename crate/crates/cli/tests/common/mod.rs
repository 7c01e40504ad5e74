#![allow(dead_code)]

use provmark_core::{DeviceFeatureSet, PreSharedKey, RasterImage};
use rand::Rng;

/// Smooth random scene plus mild texture, kept clear of 0 and 255.
pub fn scene(w: usize, h: usize, rng: &mut impl Rng) -> RasterImage {
    let mut waves = [[0.0f64; 4]; 3];
    for wave in waves.iter_mut() {
        *wave = [
            rng.random_range(0.005..0.05),
            rng.random_range(0.005..0.05),
            rng.random_range(0.0..6.3),
            rng.random_range(30.0..80.0),
        ];
    }
    let blobs: Vec<[f64; 4]> = (0..4)
        .map(|_| {
            [
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(20.0..120.0),
                rng.random_range(-60.0..60.0),
            ]
        })
        .collect();
    let noise: Vec<f64> = (0..w * h).map(|_| rng.random_range(-6.0..6.0)).collect();
    RasterImage::from_fn(w, h, 3, |x, y, c| {
        let (xf, yf) = (x as f64, y as f64);
        let [fx, fy, ph, amp] = waves[c];
        let mut v = 128.0 + amp * (fx * xf + ph).sin() * (fy * yf + ph * 0.5).cos();
        for &[bx, by, r, a] in &blobs {
            let d2 = (xf - bx).powi(2) + (yf - by).powi(2);
            v += a * (-d2 / (2.0 * r * r)).exp();
        }
        (v + noise[y * w + x]).clamp(12.0, 243.0) as u8
    })
    .unwrap()
}

pub fn features(serial: &str) -> DeviceFeatureSet {
    DeviceFeatureSet::from_triples([
        ("basic", "model", "FundusCam X2"),
        ("basic", "serial", serial),
        ("camera", "sensor", "IMX586"),
        ("screen", "resolution", "1080x2400"),
    ])
    .unwrap()
}

pub fn key() -> PreSharedKey {
    PreSharedKey::new(b"deployment-secret-0123456789".to_vec()).unwrap()
}

pub const FEATURES_JSON: &str = r#"{
  "basic": {"model": "FundusCam X2", "serial": "SN-1"},
  "camera": {"sensor": "IMX586"},
  "screen": {"resolution": "1080x2400"}
}"#;

pub const BOARD_CSV: &str = "L,C,R,Z
253.9e-3,997.2e-12,9.352e3,1e-6
703.9e-6,358.7e-9,0.546e3,0.304e3
2.828e-3,88.92e-9,1.381e3,32.69e3
2.195e-3,114.4e-9,1.174e3,15.96e3
706.6e-6,355.0e-9,0.547e3,0.305e3
703.5e-6,358.0e-9,0.546e3,0.305e3
";

pub fn bin() -> std::process::Command {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_provmark"));
    cmd.env_remove("PROVMARK_KEY");
    cmd
}
