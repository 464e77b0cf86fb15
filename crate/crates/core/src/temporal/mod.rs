//! Temporal coherence through an advection transfer.
//!
//! Each frame after the first warps the previous result into the current
//! frame with a cheap transfer guided only by world positions, then feeds
//! the warped image back as one more guide pair: the exemplar's own style
//! image on the exemplar side and the warped result on the target side.

mod sequence;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guides::{GuideChannel, GuideKind, GuideSet, Side};
use crate::raster::RasterImage;
use crate::synthesis::{synthesize, LevelTrace, PyramidLevels, SynthesisParams};

pub use self::sequence::{frame_seed, run_layer_sequence, run_sequence, run_sequence_with, transfer_frame, SequenceOptions};

/// Half-width of the neighborhood searched by the disocclusion test.
pub const DISOCCLUSION_RADIUS: usize = 3;

fn default_advection() -> SynthesisParams {
    SynthesisParams {
        patch_size: 5,
        em_iterations_per_level: 2,
        pyramid_levels: PyramidLevels::Count(2),
        ..SynthesisParams::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalParams {
    pub temporal_weight: f32,
    /// Largest world-position distance, in normalized units, at which a
    /// current pixel still counts as visible in the previous frame.
    pub disocclusion_threshold: f32,
    /// Masks the temporal guide where surfaces were just revealed.
    pub disocclusion_mask: bool,
    /// Solver settings for the advection transfer. Its seed is replaced per
    /// frame.
    pub advection: SynthesisParams,
}

impl Default for TemporalParams {
    fn default() -> Self {
        Self {
            temporal_weight: 2.0,
            disocclusion_threshold: 0.05,
            disocclusion_mask: true,
            advection: default_advection(),
        }
    }
}

impl TemporalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.temporal_weight >= 0.0 && self.temporal_weight.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "temporal_weight must be finite and >= 0, got {}",
                self.temporal_weight
            )));
        }
        if !(self.disocclusion_threshold >= 0.0 && self.disocclusion_threshold.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "disocclusion_threshold must be finite and >= 0, got {}",
                self.disocclusion_threshold
            )));
        }
        self.advection.validate()
    }
}

/// One synthesized frame of a layer.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame_index: i64,
    pub b_prime: RasterImage,
    pub advected: Option<RasterImage>,
    pub trace: Vec<LevelTrace>,
    /// Hex digest of the exemplar guides and style image used for this frame.
    pub exemplar_hash: String,
    /// Loaded from a previous run instead of recomputed.
    pub reused: bool,
}

fn check_same_dims(what: &str, a: &RasterImage, b: &RasterImage) -> Result<()> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )))
    }
}

/// Warps the previous frame's result into the current frame by a transfer
/// from `(worldpos_prev, b_prime_prev)` onto `worldpos_cur`.
///
/// Both position guides must be normalized with the same bounding box. The
/// solver runs with `tparams.advection`.
pub fn advect(
    b_prime_prev: &RasterImage,
    worldpos_prev: &GuideChannel,
    worldpos_cur: &GuideChannel,
    tparams: &TemporalParams,
) -> Result<RasterImage> {
    tparams.validate()?;
    check_same_dims("previous result vs previous world position", b_prime_prev, &worldpos_prev.image)?;
    for ch in [worldpos_prev, worldpos_cur] {
        if ch.kind != GuideKind::WorldPosition {
            return Err(Error::InvalidParams(format!(
                "advection needs world_position guides, got {}",
                ch.kind
            )));
        }
    }
    if worldpos_prev.weight != worldpos_cur.weight {
        return Err(Error::GuideWeightMismatch {
            index: 0,
            exemplar: worldpos_prev.weight,
            target: worldpos_cur.weight,
        });
    }
    let a = GuideSet::new(vec![worldpos_prev.clone()], Side::Exemplar)?;
    let b = GuideSet::new(vec![worldpos_cur.clone()], Side::Target)?;
    Ok(synthesize(&a, b_prime_prev, &b, &tparams.advection)?.image)
}

/// 0 where the current world position lies farther than `threshold` from
/// every previous sample in the surrounding 7x7 window, else 1.
pub fn build_disocclusion_mask(
    worldpos_prev: &RasterImage,
    worldpos_cur: &RasterImage,
    threshold: f32,
) -> Result<RasterImage> {
    check_same_dims("world position frames", worldpos_prev, worldpos_cur)?;
    let (w, h) = worldpos_cur.dims();
    let c = worldpos_cur.channels();
    let r = DISOCCLUSION_RADIUS;
    let limit = threshold as f64 * threshold as f64;
    let mut data = vec![0.0f32; w * h];
    crate::par::for_each_chunk_mut(&mut data, w, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let cur = worldpos_cur.pixel(x, y);
            let mut best = f64::INFINITY;
            for ny in y.saturating_sub(r)..(y + r + 1).min(h) {
                for nx in x.saturating_sub(r)..(x + r + 1).min(w) {
                    let prev = worldpos_prev.pixel(nx, ny);
                    let d: f64 = (0..c).map(|k| (cur[k] as f64 - prev[k] as f64).powi(2)).sum();
                    best = best.min(d);
                }
            }
            *out = if best > limit { 0.0 } else { 1.0 };
        }
    });
    RasterImage::from_vec(w, h, 1, data)
}

/// Runs the main transfer for one frame with the warped previous result as
/// an extra guide pair.
///
/// The exemplar side gets `a_style` itself as its temporal image, the target
/// side gets `b_adv`, both at `tparams.temporal_weight`. Where `mask` is 0
/// the temporal pair contributes nothing.
pub fn synthesize_frame_with_temporal(
    a_guides: &GuideSet,
    a_style: &RasterImage,
    b_guides_t: &GuideSet,
    b_adv: &RasterImage,
    mask: Option<&RasterImage>,
    tparams: &TemporalParams,
    params: &SynthesisParams,
) -> Result<FrameResult> {
    tparams.validate()?;
    let (bw, bh) = b_guides_t.dims();
    if b_adv.dims() != (bw, bh) {
        return Err(Error::DimensionMismatch(format!(
            "advected image is {}x{}, frame guides are {bw}x{bh}",
            b_adv.width(),
            b_adv.height()
        )));
    }
    let weight = tparams.temporal_weight;
    let a_temporal = GuideChannel::new(GuideKind::Temporal, a_style.clone(), weight)?;
    let mut b_temporal = GuideChannel::new(GuideKind::Temporal, b_adv.clone(), weight)?;
    if let Some(m) = mask {
        b_temporal = b_temporal.with_mask(m.clone())?;
    }
    let a = a_guides.with_channel(a_temporal)?;
    let b = b_guides_t.with_channel(b_temporal)?;
    let result = synthesize(&a, a_style, &b, params)?;
    Ok(FrameResult {
        frame_index: 0,
        b_prime: result.image,
        advected: Some(b_adv.clone()),
        trace: result.trace,
        exemplar_hash: exemplar_hash(a_guides, a_style),
        reused: false,
    })
}

/// Digest of the exemplar-side inputs of a transfer.
pub fn exemplar_hash(a_guides: &GuideSet, a_style: &RasterImage) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(a_guides.content_hash());
    h.update(a_style.content_hash());
    hex::encode(h.finalize())
}

/// Mean over consecutive frame pairs of the masked mean absolute difference.
///
/// `masks` is either empty (every pixel counts) or holds one single-channel
/// mask per pair, applied to the pair `(i, i + 1)`. A pair whose mask is
/// all zero contributes 0.
pub fn flicker_metric(frames: &[RasterImage], masks: &[RasterImage]) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::TooFewFrames);
    }
    let pairs = frames.len() - 1;
    if !masks.is_empty() && masks.len() != pairs {
        return Err(Error::DimensionMismatch(format!(
            "{} masks for {pairs} frame pairs",
            masks.len()
        )));
    }
    let mut total = 0.0;
    for i in 0..pairs {
        let (a, b) = (&frames[i], &frames[i + 1]);
        if a.dims() != b.dims() || a.channels() != b.channels() {
            return Err(Error::DimensionMismatch(format!("frames {i} and {}", i + 1)));
        }
        let mask = masks.get(i);
        if let Some(m) = mask {
            if m.dims() != a.dims() || m.channels() != 1 {
                return Err(Error::DimensionMismatch(format!("mask for pair {i}")));
            }
        }
        let c = a.channels();
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for (p, (pa, pb)) in a.data().chunks_exact(c).zip(b.data().chunks_exact(c)).enumerate() {
            let m = mask.map_or(1.0, |m| m.data()[p] as f64);
            let diff: f64 = pa.iter().zip(pb).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum();
            num += m * diff / c as f64;
            den += m;
        }
        if den > 0.0 {
            total += num / den;
        }
    }
    Ok(total / pairs as f64)
}
