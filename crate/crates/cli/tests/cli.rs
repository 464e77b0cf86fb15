use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use styletx::config::parse_config;
use styletx::pipeline::{b_prime_path, final_path, manifest_path};
use styletx::raster::{save_image, ImageFormat, RasterImage};
use styletx::synthetic::{write_shot, SceneMotion};

fn styletx(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_styletx"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env_remove("STYLETX_THREADS")
        .output()
        .unwrap()
}

fn error_record(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn read_all(paths: &[PathBuf]) -> Vec<Vec<u8>> {
    paths.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

#[test]
fn sequence_then_composite_writes_every_final_frame() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_shot(dir.path(), SceneMotion::Translating, 8).unwrap();
    let shot = parse_config(&config).unwrap();

    let out = styletx(&["sequence", "--threads", "2"], &config);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = styletx(&["composite"], &config);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let finals: Vec<PathBuf> = shot.frames.iter().map(|f| final_path(&shot, f)).collect();
    assert_eq!(finals.len(), 8);
    assert!(finals.iter().all(|p| p.is_file()));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(manifest_path(&shot, "sequence")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sequence");
    assert!(manifest["aabb"].is_object());

    // A second run reuses the stored frames and reproduces every byte.
    let b_primes: Vec<PathBuf> = shot
        .layers
        .iter()
        .flat_map(|l| shot.frames.iter().map(|f| b_prime_path(&shot, &l.name, f)).collect::<Vec<_>>())
        .collect();
    let before = (read_all(&b_primes), read_all(&finals), std::fs::read(manifest_path(&shot, "sequence")).unwrap());
    assert!(styletx(&["sequence"], &config).status.success());
    assert!(styletx(&["composite"], &config).status.success());
    let after = (read_all(&b_primes), read_all(&finals), std::fs::read(manifest_path(&shot, "sequence")).unwrap());
    assert!(before == after);
}

#[test]
fn transfer_writes_one_frame() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_shot(dir.path(), SceneMotion::Static, 2).unwrap();
    let shot = parse_config(&config).unwrap();
    let out = styletx(&["transfer", "--layer", "shadow", "--frame", "2"], &config);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(b_prime_path(&shot, "shadow", 2).is_file());
    assert!(!b_prime_path(&shot, "shadow", 1).exists());
    assert!(manifest_path(&shot, "transfer").is_file());
}

#[test]
fn metrics_reports_zero_flicker_for_duplicated_frames() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_shot(dir.path(), SceneMotion::Static, 3).unwrap();
    let shot = parse_config(&config).unwrap();
    std::fs::create_dir_all(shot.output_dir()).unwrap();
    let img = RasterImage::filled(64, 64, 1, 0.3).unwrap();
    for layer in &shot.layers {
        for f in shot.frames.iter() {
            save_image(&img, b_prime_path(&shot, &layer.name, f), ImageFormat::Exr).unwrap();
        }
    }
    let out = styletx(&["metrics"], &config);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for layer in ["base", "outline", "shadow"] {
        assert_eq!(json["layers"][layer]["flicker"], 0.0);
    }
}

#[test]
fn unknown_config_key_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_shot(dir.path(), SceneMotion::Static, 1).unwrap();
    let text = std::fs::read_to_string(&config).unwrap();
    std::fs::write(&config, format!("bogus_key = 1\n{text}")).unwrap();
    let out = styletx(&["sequence"], &config);
    assert_eq!(out.status.code(), Some(2));
    let record = error_record(&out);
    assert_eq!(record["error"]["category"], "config");
    assert_eq!(record["error"]["exit_code"], 2);
}

#[test]
fn missing_pass_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_shot(dir.path(), SceneMotion::Static, 2).unwrap();
    let shot = parse_config(&config).unwrap();
    std::fs::remove_file(shot.pass_path("diffuse", 2).unwrap()).unwrap();
    let out = styletx(&["sequence", "--layer", "base"], &config);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_record(&out)["error"]["category"], "io");
}

#[test]
fn mismatched_pass_size_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_shot(dir.path(), SceneMotion::Static, 1).unwrap();
    let shot = parse_config(&config).unwrap();
    let small = RasterImage::filled(32, 32, 1, 0.5).unwrap();
    save_image(&small, shot.pass_path("diffuse", 1).unwrap(), ImageFormat::Exr).unwrap();
    let out = styletx(&["transfer"], &config);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_record(&out)["error"]["category"], "validation");
}

#[test]
fn unknown_layer_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_shot(dir.path(), SceneMotion::Static, 1).unwrap();
    let out = styletx(&["sequence", "--layer", "nope"], &config);
    assert_eq!(out.status.code(), Some(4));
}
