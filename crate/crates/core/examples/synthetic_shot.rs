//! Writes a synthetic sphere shot that `styletx` can run.
//!
//! ```text
//! cargo run -p styletx-core --example synthetic_shot -- /tmp/sphere translating 8
//! styletx sequence --config /tmp/sphere/shot.toml
//! styletx composite --config /tmp/sphere/shot.toml
//! ```

use std::path::PathBuf;

use styletx::synthetic::{write_shot, SceneMotion, SCENE_FRAMES};

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "sphere_shot".into()));
    let motion = match args.next().as_deref() {
        None | Some("static") => SceneMotion::Static,
        Some("translating") => SceneMotion::Translating,
        Some("rotating") => SceneMotion::Rotating,
        Some(other) => {
            eprintln!("unknown motion `{other}`; expected static, translating or rotating");
            std::process::exit(2);
        }
    };
    let frames = args.next().map_or(SCENE_FRAMES, |n| n.parse().expect("frame count"));
    match write_shot(&dir, motion, frames) {
        Ok(config) => println!("{}", config.display()),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.category().exit_code());
        }
    }
}
