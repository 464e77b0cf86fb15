//! Frame-by-frame driver for one layer of a shot.

use crate::compositing::LayerSpec;
use crate::config::ShotConfig;
use crate::error::{Error, Result};
use crate::guides::{GuideChannel, GuideKind, SceneAabb, StyleExemplar};
use crate::pipeline::{
    b_adv_path, b_prime_path, check_layer_passes, ensure_output_dir, frame_guides, layer_run_key, load_exemplar,
    load_world_position, read_json, sequence_aabb, trace_path, write_json, FrameRecord,
};
use crate::raster::{load_image, save_image, ImageFormat};
use crate::synthesis::{derive_key, synthesize, SynthesisParams};

use super::{advect, build_disocclusion_mask, exemplar_hash, synthesize_frame_with_temporal, FrameResult};

fn key_prefix(key: [u8; 32]) -> u64 {
    u64::from_le_bytes(key[..8].try_into().expect("32-byte key"))
}

/// Solver seed of the main transfer at `frame`.
pub fn frame_seed(seed: u64, frame: i64) -> u64 {
    key_prefix(derive_key(seed, "frame", &[frame as u64]))
}

fn advection_seed(seed: u64, frame: i64) -> u64 {
    key_prefix(derive_key(seed, "advect", &[frame as u64]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceOptions {
    /// Reuse the leading frames already on disk from a run with the same
    /// inputs and settings.
    pub resume: bool,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        Self { resume: true }
    }
}

/// Runs every frame of `layer` in order and writes `B_prime`, `B_adv` and
/// the per-frame trace record into the shot's output directory.
pub fn run_sequence(shot: &ShotConfig, layer: &str) -> Result<Vec<FrameResult>> {
    run_sequence_with(shot, layer, SequenceOptions::default())
}

struct LayerRun<'a> {
    shot: &'a ShotConfig,
    layer: &'a LayerSpec,
    exemplar: StyleExemplar,
    exemplar_hash: String,
    aabb: Option<SceneAabb>,
    run_key: String,
}

impl<'a> LayerRun<'a> {
    fn new(shot: &'a ShotConfig, layer: &'a LayerSpec, temporal: bool) -> Result<Self> {
        check_layer_passes(shot, layer)?;
        let exemplar = load_exemplar(shot, layer)?;
        let needs_aabb = temporal || layer.guides.iter().any(|g| g.kind == GuideKind::WorldPosition);
        let aabb = if needs_aabb { Some(sequence_aabb(shot)?) } else { None };
        ensure_output_dir(shot)?;
        let run_key = layer_run_key(shot, layer, aabb.as_ref())?;
        let exemplar_hash = exemplar_hash(&exemplar.guides, &exemplar.touch);
        Ok(Self {
            shot,
            layer,
            exemplar,
            exemplar_hash,
            aabb,
            run_key,
        })
    }

    fn params(&self, frame: i64) -> SynthesisParams {
        SynthesisParams {
            seed: frame_seed(self.layer.synthesis.seed, frame),
            ..self.layer.synthesis
        }
    }

    fn plain(&self, frame: i64) -> Result<FrameResult> {
        let guides = frame_guides(self.shot, self.layer, frame, self.aabb.as_ref())?;
        let result = synthesize(&self.exemplar.guides, &self.exemplar.touch, &guides, &self.params(frame))?;
        Ok(FrameResult {
            frame_index: frame,
            b_prime: result.image,
            advected: None,
            trace: result.trace,
            exemplar_hash: self.exemplar_hash.clone(),
            reused: false,
        })
    }

    fn temporal(
        &self,
        frame: i64,
        prev: &FrameResult,
        wp_prev: &GuideChannel,
        wp_cur: &GuideChannel,
    ) -> Result<FrameResult> {
        let mut tparams = self.layer.temporal.clone();
        tparams.advection.seed = advection_seed(self.layer.synthesis.seed, frame);
        let b_adv = advect(&prev.b_prime, wp_prev, wp_cur, &tparams)?;
        let mask = if tparams.disocclusion_mask {
            Some(build_disocclusion_mask(&wp_prev.image, &wp_cur.image, tparams.disocclusion_threshold)?)
        } else {
            None
        };
        let guides = frame_guides(self.shot, self.layer, frame, self.aabb.as_ref())?;
        let mut result = synthesize_frame_with_temporal(
            &self.exemplar.guides,
            &self.exemplar.touch,
            &guides,
            &b_adv,
            mask.as_ref(),
            &tparams,
            &self.params(frame),
        )?;
        result.frame_index = frame;
        Ok(result)
    }

    fn persist(&self, result: &FrameResult) -> Result<()> {
        let frame = result.frame_index;
        let name = &self.layer.name;
        if let Some(adv) = &result.advected {
            save_image(adv, b_adv_path(self.shot, name, frame), ImageFormat::Exr)?;
        }
        save_image(&result.b_prime, b_prime_path(self.shot, name, frame), ImageFormat::Exr)?;
        // The record goes last: its presence marks the frame complete.
        let record = FrameRecord {
            run_key: self.run_key.clone(),
            frame,
            exemplar_hash: result.exemplar_hash.clone(),
            advected: result.advected.is_some(),
            trace: result.trace.clone(),
        };
        write_json(&trace_path(self.shot, name, frame), &record)
    }

    fn reuse(&self, frame: i64, temporal: bool) -> Result<Option<FrameResult>> {
        let name = &self.layer.name;
        let (record_path, image_path) = (trace_path(self.shot, name, frame), b_prime_path(self.shot, name, frame));
        if !record_path.is_file() || !image_path.is_file() {
            return Ok(None);
        }
        let Ok(record) = read_json::<FrameRecord>(&record_path) else {
            return Ok(None);
        };
        if record.run_key != self.run_key || record.frame != frame || record.exemplar_hash != self.exemplar_hash {
            return Ok(None);
        }
        // A single-frame transfer leaves the same files without advection.
        if temporal && frame != self.shot.frames.start && !record.advected {
            return Ok(None);
        }
        let advected = if record.advected {
            let path = b_adv_path(self.shot, name, frame);
            if !path.is_file() {
                return Ok(None);
            }
            Some(load_image(path)?)
        } else {
            None
        };
        Ok(Some(FrameResult {
            frame_index: frame,
            b_prime: load_image(image_path)?,
            advected,
            trace: record.trace,
            exemplar_hash: record.exemplar_hash,
            reused: true,
        }))
    }
}

/// [`run_sequence`] with explicit options.
///
/// With `resume`, frames are taken from disk up to the first one that is
/// missing or was produced under a different run key; that frame and all
/// later ones are recomputed. Frames always run in order since each one
/// advects its predecessor.
pub fn run_sequence_with(shot: &ShotConfig, layer: &str, options: SequenceOptions) -> Result<Vec<FrameResult>> {
    run_layer_sequence(shot, shot.layer(layer)?, options)
}

/// Sequence run for a layer spec that need not be one of the shot's own,
/// e.g. a variant with different settings.
pub fn run_layer_sequence(shot: &ShotConfig, layer: &LayerSpec, options: SequenceOptions) -> Result<Vec<FrameResult>> {
    let temporal = layer.temporal.temporal_weight > 0.0 && shot.frames.len() > 1;
    let run = LayerRun::new(shot, layer, temporal)?;
    let mut results: Vec<FrameResult> = Vec::with_capacity(shot.frames.len());
    let mut reusing = options.resume;
    let mut wp_prev: Option<GuideChannel> = None;
    for frame in shot.frames.iter() {
        let wp_cur = match (&run.aabb, temporal) {
            (Some(aabb), true) => Some(load_world_position(shot, frame, aabb)?),
            _ => None,
        };
        if reusing {
            if let Some(r) = run.reuse(frame, temporal)? {
                results.push(r);
                wp_prev = wp_cur;
                continue;
            }
            reusing = false;
        }
        let result = match (results.last(), &wp_prev, &wp_cur) {
            (Some(prev), Some(p), Some(c)) => run.temporal(frame, prev, p, c)?,
            _ => run.plain(frame)?,
        };
        if result.exemplar_hash != run.exemplar_hash {
            return Err(Error::ExemplarChanged {
                first: shot.frames.start,
                frame,
            });
        }
        run.persist(&result)?;
        results.push(result);
        wp_prev = wp_cur;
    }
    Ok(results)
}

/// Transfers a single frame of `layer` without the temporal guide and writes
/// its outputs.
pub fn transfer_frame(shot: &ShotConfig, layer: &str, frame: i64) -> Result<FrameResult> {
    let layer = shot.layer(layer)?;
    if !shot.frames.iter().any(|f| f == frame) {
        return Err(Error::InvalidParams(format!(
            "frame {frame} outside {}..={}",
            shot.frames.start, shot.frames.end
        )));
    }
    let run = LayerRun::new(shot, layer, false)?;
    let result = run.plain(frame)?;
    run.persist(&result)?;
    Ok(result)
}
