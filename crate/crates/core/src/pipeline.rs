//! File-level plumbing shared by the batch commands: pass and exemplar
//! loading, output naming, manifests and metrics.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compositing::{composite_frame, decode_id, LayerKind, LayerSpec, LayerStack};
use crate::config::{ShotConfig, ID_PASS};
use crate::error::{Error, Result};
use crate::guides::{
    assemble_guide_set, compute_sequence_aabb, normalize_world_position, prepare_pass, GuideChannel, GuideKind,
    GuideSet, SceneAabb, Side, StyleExemplar,
};
use crate::raster::{load_image, save_image, ImageFormat, RasterImage};
use crate::synthesis::{synthesize, LevelTrace, SynthesisParams};
use crate::temporal::{flicker_metric, frame_seed};

pub fn b_prime_path(shot: &ShotConfig, layer: &str, frame: i64) -> PathBuf {
    shot.output_dir().join(format!("B_prime.{layer}.{frame:04}.exr"))
}

pub fn b_adv_path(shot: &ShotConfig, layer: &str, frame: i64) -> PathBuf {
    shot.output_dir().join(format!("B_adv.{layer}.{frame:04}.exr"))
}

pub fn trace_path(shot: &ShotConfig, layer: &str, frame: i64) -> PathBuf {
    shot.output_dir().join(format!("trace.{layer}.{frame:04}.json"))
}

pub fn final_path(shot: &ShotConfig, frame: i64) -> PathBuf {
    shot.output_dir().join(format!("final.{frame:04}.png"))
}

pub fn naive_path(shot: &ShotConfig, frame: i64) -> PathBuf {
    shot.output_dir().join(format!("naive.{frame:04}.png"))
}

pub fn metrics_path(shot: &ShotConfig) -> PathBuf {
    shot.output_dir().join("metrics.json")
}

pub fn manifest_path(shot: &ShotConfig, command: &str) -> PathBuf {
    shot.output_dir().join(format!("manifest.{command}.json"))
}

pub fn ensure_output_dir(shot: &ShotConfig) -> Result<PathBuf> {
    let dir = shot.output_dir();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

/// Loads one frame of a pass, reporting missing files with the frame.
pub fn load_pass(shot: &ShotConfig, pass: &str, frame: i64) -> Result<RasterImage> {
    let path = shot.pass_path(pass, frame).ok_or_else(|| Error::MissingLayerPass {
        layer: shot.name.clone(),
        pass: pass.to_string(),
    })?;
    if !path.is_file() {
        return Err(Error::MissingFrame {
            frame,
            pass: pass.to_string(),
            path,
        });
    }
    load_image(&path)
}

fn coverage_or_full(shot: &ShotConfig, frame: i64, dims: (usize, usize)) -> Result<RasterImage> {
    if shot.passes.contains_key(GuideKind::Coverage.as_str()) {
        load_pass(shot, GuideKind::Coverage.as_str(), frame)
    } else {
        RasterImage::filled(dims.0, dims.1, 1, 1.0)
    }
}

/// Bounding box of every covered world position in the shot.
pub fn sequence_aabb(shot: &ShotConfig) -> Result<SceneAabb> {
    let pass = GuideKind::WorldPosition.as_str();
    let mut positions = Vec::with_capacity(shot.frames.len());
    let mut coverages = Vec::with_capacity(shot.frames.len());
    for frame in shot.frames.iter() {
        let p = load_pass(shot, pass, frame)?;
        coverages.push(coverage_or_full(shot, frame, p.dims())?);
        positions.push(p);
    }
    compute_sequence_aabb(&positions, &coverages)
}

/// Normalized world-position guide of one frame.
pub fn load_world_position(shot: &ShotConfig, frame: i64, aabb: &SceneAabb) -> Result<GuideChannel> {
    let p = load_pass(shot, GuideKind::WorldPosition.as_str(), frame)?;
    let cov = coverage_or_full(shot, frame, p.dims())?;
    normalize_world_position(&p, aabb, &cov)
}

/// Fails when a layer lacks the pass its kind depends on.
pub fn check_layer_passes(shot: &ShotConfig, layer: &LayerSpec) -> Result<()> {
    if let Some(kind) = layer.kind.required_pass() {
        let selected = layer.guides.iter().any(|g| g.kind == kind);
        if !selected || !shot.passes.contains_key(kind.as_str()) {
            return Err(Error::MissingLayerPass {
                layer: layer.name.clone(),
                pass: kind.as_str().to_string(),
            });
        }
    }
    Ok(())
}

fn load_exemplar_image(shot: &ShotConfig, file: &str) -> Result<RasterImage> {
    load_image(shot.resolve(file))
}

/// The layer's exemplar with its guides selected and weighted for the layer.
///
/// Exemplar guide images must already lie in guide range; world positions
/// in particular are expected pre-normalized.
pub fn load_exemplar(shot: &ShotConfig, layer: &LayerSpec) -> Result<StyleExemplar> {
    let spec = shot.exemplars.get(&layer.exemplar).ok_or_else(|| {
        Error::InvalidParams(format!("unknown exemplar `{}`", layer.exemplar))
    })?;
    let touch = load_exemplar_image(shot, &spec.touch)?;
    let touch = if touch.channels() == 1 { touch } else { touch.channel(0) };
    let mut channels = Vec::with_capacity(layer.guides.len());
    for g in &layer.guides {
        let file = spec.guides.get(&g.kind).ok_or_else(|| Error::MissingLayerPass {
            layer: layer.name.clone(),
            pass: format!("exemplar {}", g.kind),
        })?;
        let raw = load_exemplar_image(shot, file)?;
        channels.push((g.kind, prepare_pass(g.kind, &raw), g.weight));
    }
    StyleExemplar::new(layer.exemplar.clone(), touch.normalized(), assemble_guide_set(channels, Side::Exemplar)?)
}

/// Target-side guides of one frame, in the layer's order and weights.
pub fn frame_guides(
    shot: &ShotConfig,
    layer: &LayerSpec,
    frame: i64,
    aabb: Option<&SceneAabb>,
) -> Result<GuideSet> {
    let mut channels = Vec::with_capacity(layer.guides.len());
    for g in &layer.guides {
        let image = if g.kind == GuideKind::WorldPosition {
            let aabb = aabb.ok_or_else(|| Error::InvalidParams("world position guide needs the shot bounds".into()))?;
            (*load_world_position(shot, frame, aabb)?.image).clone()
        } else {
            prepare_pass(g.kind, &load_pass(shot, g.kind.as_str(), frame)?)
        };
        channels.push((g.kind, image, g.weight));
    }
    assemble_guide_set(channels, Side::Target)
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Content hashes of every input file, keyed by the path as written in the
/// config (pass files by their expanded template).
pub fn input_hashes(shot: &ShotConfig) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for ex in shot.exemplars.values() {
        for file in std::iter::once(&ex.touch).chain(ex.guides.values()) {
            out.insert(file.clone(), file_hash(&shot.resolve(file))?);
        }
    }
    for (pass, template) in &shot.passes {
        for frame in shot.frames.iter() {
            let rel = template.replace("{frame}", &format!("{frame:04}"));
            let full = shot.resolve(&rel);
            if !full.is_file() {
                return Err(Error::MissingFrame {
                    frame,
                    pass: pass.clone(),
                    path: full,
                });
            }
            out.insert(rel, file_hash(&full)?);
        }
    }
    Ok(out)
}

/// Digest of everything that determines a layer's frames: the layer's
/// settings, the shot bounds and the contents of the files it reads.
pub fn layer_run_key(shot: &ShotConfig, layer: &LayerSpec, aabb: Option<&SceneAabb>) -> Result<String> {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION"));
    h.update(serde_json::to_vec(layer).map_err(|e| Error::Numeric(e.to_string()))?);
    h.update(serde_json::to_vec(&(shot.frames.start, shot.frames.end, aabb)).map_err(|e| Error::Numeric(e.to_string()))?);
    let spec = &shot.exemplars[&layer.exemplar];
    let mut files = vec![shot.resolve(&spec.touch)];
    files.extend(layer.guides.iter().filter_map(|g| spec.guides.get(&g.kind)).map(|f| shot.resolve(f)));
    let mut passes: Vec<&str> = layer.guides.iter().map(|g| g.kind.as_str()).collect();
    passes.extend([GuideKind::WorldPosition.as_str(), GuideKind::Coverage.as_str()]);
    passes.sort_unstable();
    passes.dedup();
    for pass in passes {
        for frame in shot.frames.iter() {
            if let Some(p) = shot.pass_path(pass, frame) {
                if p.is_file() {
                    files.push(p);
                }
            }
        }
    }
    for f in files {
        h.update(f.to_string_lossy().as_bytes());
        h.update(file_hash(&f)?);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    command: &'a str,
    config: &'a ShotConfig,
    inputs: BTreeMap<String, String>,
    aabb: Option<SceneAabb>,
    outputs: BTreeMap<String, String>,
}

/// Writes `manifest.<command>.json` with the effective config, input and
/// output hashes and the shot bounds. Contains no timestamps, so identical
/// runs give identical manifests.
pub fn write_manifest(
    shot: &ShotConfig,
    command: &str,
    aabb: Option<SceneAabb>,
    outputs: &[PathBuf],
) -> Result<PathBuf> {
    let dir = ensure_output_dir(shot)?;
    let mut hashed = BTreeMap::new();
    for p in outputs {
        let name = p.strip_prefix(&dir).unwrap_or(p).to_string_lossy().into_owned();
        hashed.insert(name, file_hash(p)?);
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: shot,
        inputs: input_hashes(shot)?,
        aabb,
        outputs: hashed,
    };
    let path = manifest_path(shot, command);
    write_json(&path, &manifest)?;
    Ok(path)
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(format!("{}: {e}", path.display())))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::CorruptData {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Per-frame record written next to each `B_prime` image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub run_key: String,
    pub frame: i64,
    pub exemplar_hash: String,
    pub advected: bool,
    pub trace: Vec<LevelTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerMetrics {
    pub frames: Vec<i64>,
    /// Unmasked flicker over the layer's frames; `None` with one frame.
    pub flicker: Option<f64>,
    pub final_energy: Vec<f64>,
    pub exemplar_hashes: Vec<String>,
    pub traces: Vec<Vec<LevelTrace>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotMetrics {
    pub shot: String,
    pub layers: BTreeMap<String, LayerMetrics>,
}

/// Loads every existing output frame of a layer.
pub fn load_layer_outputs(shot: &ShotConfig, layer: &str) -> Result<Vec<RasterImage>> {
    shot.frames
        .iter()
        .map(|f| {
            let path = b_prime_path(shot, layer, f);
            if !path.is_file() {
                return Err(Error::MissingFrame {
                    frame: f,
                    pass: format!("B_prime.{layer}"),
                    path,
                });
            }
            load_image(&path)
        })
        .collect()
}

/// Flicker and energy figures for every layer with outputs on disk.
pub fn compute_metrics(shot: &ShotConfig) -> Result<ShotMetrics> {
    let mut layers = BTreeMap::new();
    for layer in &shot.layers {
        let frames = load_layer_outputs(shot, &layer.name)?;
        let flicker = if frames.len() >= 2 { Some(flicker_metric(&frames, &[])?) } else { None };
        let mut m = LayerMetrics {
            frames: shot.frames.iter().collect(),
            flicker,
            final_energy: Vec::new(),
            exemplar_hashes: Vec::new(),
            traces: Vec::new(),
        };
        for f in shot.frames.iter() {
            let path = trace_path(shot, &layer.name, f);
            if path.is_file() {
                let rec: FrameRecord = read_json(&path)?;
                m.final_energy
                    .push(rec.trace.last().and_then(|t| t.energies.last().copied()).unwrap_or(0.0));
                m.exemplar_hashes.push(rec.exemplar_hash);
                m.traces.push(rec.trace);
            }
        }
        layers.insert(layer.name.clone(), m);
    }
    Ok(ShotMetrics {
        shot: shot.name.clone(),
        layers,
    })
}

/// Builds the layer stack from the outputs on disk.
pub fn load_layer_stack(shot: &ShotConfig) -> Result<LayerStack> {
    let mut layers = Vec::with_capacity(shot.layers.len());
    for layer in &shot.layers {
        layers.push((layer.clone(), load_layer_outputs(shot, &layer.name)?));
    }
    let ids = shot
        .frames
        .iter()
        .map(|f| load_pass(shot, ID_PASS, f))
        .collect::<Result<Vec<_>>>()?;
    LayerStack::new(layers, ids)
}

/// Composites every frame and writes `final.<frame>.png` as 16-bit PNG.
pub fn composite_shot(shot: &ShotConfig) -> Result<Vec<PathBuf>> {
    ensure_output_dir(shot)?;
    let stack = load_layer_stack(shot)?;
    let mut written = Vec::with_capacity(shot.frames.len());
    for (i, frame) in shot.frames.iter().enumerate() {
        let img = composite_frame(&stack, i, &shot.palette)?;
        let path = final_path(shot, frame);
        save_image(&img, &path, ImageFormat::Png16)?;
        written.push(path);
    }
    Ok(written)
}

/// The per-colour pipeline the single-colour transfer replaces, kept as a
/// demonstration of its artifacts.
///
/// For every ID present in the frame, the base exemplar's touch is coloured
/// with that ID's palette entry and transferred in RGB on its own, with an
/// extra guide marking the ID's region (the whole exemplar on one side, the
/// region on the other). Each pixel then takes the result of its own ID.
/// Patches straddling region borders disagree between the runs, which shows
/// up as seams and gaps along every colour boundary.
pub fn naive_multicolor_frame(shot: &ShotConfig, frame: i64) -> Result<RasterImage> {
    let layer = shot.base_layer();
    let exemplar = load_exemplar(shot, layer)?;
    let aabb = if layer.guides.iter().any(|g| g.kind == GuideKind::WorldPosition) {
        Some(sequence_aabb(shot)?)
    } else {
        None
    };
    let guides = frame_guides(shot, layer, frame, aabb.as_ref())?;
    let ids = load_pass(shot, ID_PASS, frame)?;
    let (w, h) = ids.dims();
    let id_of = |x: usize, y: usize| decode_id(ids.get(x, y, 0));
    let mut present: Vec<u32> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| id_of(x, y)).collect();
    present.sort_unstable();
    present.dedup();

    let colors = shot.palette.colors_for(&layer.name);
    let touch = &exemplar.touch;
    let (aw, ah) = touch.dims();
    let whole = RasterImage::filled(aw, ah, 1, 1.0)?;
    let params = SynthesisParams {
        seed: frame_seed(layer.synthesis.seed, frame),
        ..layer.synthesis
    };
    let mut out = RasterImage::filled(w, h, 3, 0.0)?;
    for id in present {
        let rgb = *colors.get(&id).ok_or_else(|| {
            let p = (0..w * h).find(|&p| id_of(p % w, p / w) == id).unwrap_or(0);
            Error::UnmappedColorId { id, x: p % w, y: p / w }
        })?;
        let a_style = RasterImage::from_fn(aw, ah, 3, |x, y, c| rgb[c] * touch.get(x, y, 0))?;
        let region = RasterImage::from_fn(w, h, 1, |x, y, _| if id_of(x, y) == id { 1.0 } else { 0.0 })?;
        let a = exemplar
            .guides
            .with_channel(GuideChannel::new(GuideKind::Custom, whole.clone(), 1.0)?)?;
        let b = guides.with_channel(GuideChannel::new(GuideKind::Custom, region, 1.0)?)?;
        let result = synthesize(&a, &a_style, &b, &params)?.image;
        for y in 0..h {
            for x in 0..w {
                if id_of(x, y) == id {
                    out.pixel_mut(x, y).copy_from_slice(result.pixel(x, y));
                }
            }
        }
    }
    Ok(out)
}

/// Writes `naive.<frame>.png` for every frame of the shot.
pub fn naive_multicolor_shot(shot: &ShotConfig) -> Result<Vec<PathBuf>> {
    ensure_output_dir(shot)?;
    shot.frames
        .iter()
        .map(|frame| {
            let path = naive_path(shot, frame);
            save_image(&naive_multicolor_frame(shot, frame)?, &path, ImageFormat::Png16)?;
            Ok(path)
        })
        .collect()
}

/// Names every layer kind that has at least one layer in the shot.
pub fn layer_kinds(shot: &ShotConfig) -> Vec<LayerKind> {
    let mut kinds: Vec<LayerKind> = shot.layers.iter().map(|l| l.kind).collect();
    kinds.sort();
    kinds.dedup();
    kinds
}
