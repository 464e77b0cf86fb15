//! `styletx`: batch front end for shot configs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use styletx::config::{parse_config, ShotConfig};
use styletx::guides::{GuideKind, SceneAabb};
use styletx::pipeline::{
    b_adv_path, b_prime_path, composite_shot, compute_metrics, metrics_path, naive_multicolor_shot, sequence_aabb,
    trace_path, write_manifest,
};
use styletx::temporal::{run_sequence, transfer_frame};
use styletx::{Error, ErrorCategory};

#[derive(Debug, Parser)]
#[command(name = "styletx", version, about = "Guided patch-based style transfer for render passes")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Shot configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Restrict the command to one layer.
    #[arg(long, global = true)]
    layer: Option<String>,

    /// Frame for `transfer`; defaults to the first frame of the shot.
    #[arg(long, global = true)]
    frame: Option<i64>,

    /// Worker threads.
    #[arg(long, global = true, env = "STYLETX_THREADS")]
    threads: Option<usize>,

    /// With `composite`, also write the per-colour demonstration frames.
    #[arg(long, global = true)]
    naive_multicolor: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Synthesize one frame of one layer without the temporal guide.
    Transfer,
    /// Synthesize every frame of every layer in order.
    Sequence,
    /// Colorize and blend existing layer outputs into final frames.
    Composite,
    /// Print flicker and energy figures as JSON.
    Metrics,
    /// Write frames made with the per-colour pipeline.
    DemoNaiveMulticolor,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Transfer => "transfer",
            Command::Sequence => "sequence",
            Command::Composite => "composite",
            Command::Metrics => "metrics",
            Command::DemoNaiveMulticolor => "demo-naive-multicolor",
        }
    }
}

fn shot_aabb(shot: &ShotConfig) -> Result<Option<SceneAabb>, Error> {
    if shot.passes.contains_key(GuideKind::WorldPosition.as_str()) {
        sequence_aabb(shot).map(Some)
    } else {
        Ok(None)
    }
}

fn selected_layers<'a>(shot: &'a ShotConfig, layer: Option<&str>) -> Result<Vec<&'a str>, Error> {
    match layer {
        Some(name) => Ok(vec![shot.layer(name)?.name.as_str()]),
        None => Ok(shot.layers.iter().map(|l| l.name.as_str()).collect()),
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let config = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("--config is required".into()))?;
    let shot = parse_config(config)?;
    let command = cli.command;
    let mut outputs = Vec::new();
    match command {
        Command::Transfer => {
            let layer = cli.layer.as_deref().unwrap_or(&shot.base_layer().name);
            let frame = cli.frame.unwrap_or(shot.frames.start);
            transfer_frame(&shot, layer, frame)?;
            outputs.push(b_prime_path(&shot, layer, frame));
            outputs.push(trace_path(&shot, layer, frame));
            println!("transferred {layer} frame {frame}");
        }
        Command::Sequence => {
            for layer in selected_layers(&shot, cli.layer.as_deref())? {
                let results = run_sequence(&shot, layer)?;
                for r in &results {
                    if r.advected.is_some() {
                        outputs.push(b_adv_path(&shot, layer, r.frame_index));
                    }
                    outputs.push(b_prime_path(&shot, layer, r.frame_index));
                    outputs.push(trace_path(&shot, layer, r.frame_index));
                }
                let reused = results.iter().filter(|r| r.reused).count();
                println!("{layer}: {} frames ({reused} reused)", results.len());
            }
        }
        Command::Composite => {
            outputs.extend(composite_shot(&shot)?);
            if cli.naive_multicolor {
                outputs.extend(naive_multicolor_shot(&shot)?);
            }
            println!("composited {} frames", shot.frames.len());
        }
        Command::Metrics => {
            let metrics = compute_metrics(&shot)?;
            let text = serde_json::to_string_pretty(&metrics).map_err(|e| Error::Numeric(e.to_string()))?;
            let path = metrics_path(&shot);
            std::fs::write(&path, format!("{text}\n")).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            outputs.push(path);
            println!("{text}");
        }
        Command::DemoNaiveMulticolor => {
            outputs.extend(naive_multicolor_shot(&shot)?);
            println!("wrote {} naive frames", shot.frames.len());
        }
    }
    write_manifest(&shot, command.name(), shot_aabb(&shot)?, &outputs)?;
    Ok(())
}

fn configure_threads(threads: Option<usize>) -> Result<(), Error> {
    let Some(n) = threads else {
        return Ok(());
    };
    if n == 0 {
        return Err(Error::InvalidParams("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    Ok(())
}

fn report(err: &Error) -> ExitCode {
    let category = err.category();
    let record = serde_json::json!({
        "error": {
            "category": category.as_str(),
            "exit_code": category.exit_code(),
            "message": err.to_string(),
        }
    });
    eprintln!("{record}");
    ExitCode::from(category.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(ErrorCategory::Config.exit_code() as u8);
        }
    };
    match configure_threads(cli.threads).and_then(|()| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
