//! Guide channels: render-pass ingestion, world-position normalization and
//! the matched guide sets on both sides of an analogy.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Pixels with coverage above this value belong to an object.
pub const COVERAGE_THRESHOLD: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuideKind {
    Diffuse,
    Normal,
    WorldPosition,
    Outline,
    Shadow,
    Coverage,
    Temporal,
    Custom,
}

impl GuideKind {
    pub const ALL: [GuideKind; 8] = [
        GuideKind::Diffuse,
        GuideKind::Normal,
        GuideKind::WorldPosition,
        GuideKind::Outline,
        GuideKind::Shadow,
        GuideKind::Coverage,
        GuideKind::Temporal,
        GuideKind::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GuideKind::Diffuse => "diffuse",
            GuideKind::Normal => "normal",
            GuideKind::WorldPosition => "world_position",
            GuideKind::Outline => "outline",
            GuideKind::Shadow => "shadow",
            GuideKind::Coverage => "coverage",
            GuideKind::Temporal => "temporal",
            GuideKind::Custom => "custom",
        }
    }
}

impl fmt::Display for GuideKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Exemplar,
    Target,
}

/// One guide image with its weight in the patch distance.
///
/// A target-side channel may carry a single-channel `mask` that scales its
/// contribution per target pixel; exemplar-side masks are ignored.
#[derive(Debug, Clone)]
pub struct GuideChannel {
    pub kind: GuideKind,
    pub image: Arc<RasterImage>,
    pub weight: f32,
    pub mask: Option<Arc<RasterImage>>,
}

impl GuideChannel {
    pub fn new(kind: GuideKind, image: impl Into<Arc<RasterImage>>, weight: f32) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidParams(format!("{kind} guide weight {weight}")));
        }
        let image = image.into();
        let (lo, hi) = image.min_max();
        if !(lo >= 0.0 && hi <= 1.0) {
            return Err(Error::InvalidImage(format!(
                "{kind} guide samples span [{lo}, {hi}], expected [0, 1]"
            )));
        }
        Ok(Self {
            kind,
            image,
            weight,
            mask: None,
        })
    }

    pub fn with_mask(mut self, mask: impl Into<Arc<RasterImage>>) -> Result<Self> {
        let mask = mask.into();
        if mask.channels() != 1 || !mask.same_dims(&self.image) {
            return Err(Error::DimensionMismatch(format!(
                "{} mask {}x{}x{} for a {}x{} guide",
                self.kind,
                mask.width(),
                mask.height(),
                mask.channels(),
                self.image.width(),
                self.image.height()
            )));
        }
        self.mask = Some(mask);
        Ok(self)
    }
}

/// Ordered guide channels for one side of the analogy.
#[derive(Debug, Clone)]
pub struct GuideSet {
    channels: Vec<GuideChannel>,
    side: Side,
}

impl GuideSet {
    pub fn new(channels: Vec<GuideChannel>, side: Side) -> Result<Self> {
        let first = channels.first().ok_or(Error::EmptyGuideSet)?;
        let dims = first.image.dims();
        for ch in &channels {
            if ch.image.dims() != dims {
                return Err(Error::DimensionMismatch(format!(
                    "{} guide is {}x{}, {} guide is {}x{}",
                    ch.kind,
                    ch.image.width(),
                    ch.image.height(),
                    first.kind,
                    dims.0,
                    dims.1
                )));
            }
        }
        Ok(Self { channels, side })
    }

    pub fn channels(&self) -> &[GuideChannel] {
        &self.channels
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn dims(&self) -> (usize, usize) {
        self.channels[0].image.dims()
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn find(&self, kind: GuideKind) -> Option<&GuideChannel> {
        self.channels.iter().find(|c| c.kind == kind)
    }

    /// Returns a copy with `channel` appended.
    pub fn with_channel(&self, channel: GuideChannel) -> Result<Self> {
        let mut channels = self.channels.clone();
        channels.push(channel);
        GuideSet::new(channels, self.side)
    }

    /// Hash over kinds, weights and image contents, in order.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for ch in &self.channels {
            hasher.update(ch.kind.as_str().as_bytes());
            hasher.update(ch.weight.to_bits().to_le_bytes());
            ch.image.hash_into(&mut hasher);
            if let Some(mask) = &ch.mask {
                mask.hash_into(&mut hasher);
            }
        }
        hasher.finalize().into()
    }
}

/// Builds a guide set from `(kind, image, weight)` triples, keeping order.
pub fn assemble_guide_set(
    channels: Vec<(GuideKind, RasterImage, f32)>,
    side: Side,
) -> Result<GuideSet> {
    let channels = channels
        .into_iter()
        .map(|(kind, image, weight)| GuideChannel::new(kind, image, weight))
        .collect::<Result<Vec<_>>>()?;
    GuideSet::new(channels, side)
}

/// Checks that two guide sets correspond channel for channel.
///
/// Kinds and weights must match pairwise; image sizes may differ between
/// the sides.
pub fn validate_guide_pair(exemplar: &GuideSet, target: &GuideSet) -> Result<()> {
    if exemplar.len() != target.len() {
        return Err(Error::GuideCountMismatch {
            exemplar: exemplar.len(),
            target: target.len(),
        });
    }
    for (index, (a, b)) in exemplar.channels().iter().zip(target.channels()).enumerate() {
        if a.kind != b.kind {
            return Err(Error::GuideKindMismatch {
                index,
                exemplar: a.kind,
                target: b.kind,
            });
        }
        if a.weight != b.weight {
            return Err(Error::GuideWeightMismatch {
                index,
                exemplar: a.weight,
                target: b.weight,
            });
        }
        if a.image.channels() != b.image.channels() {
            return Err(Error::DimensionMismatch(format!(
                "{} guide at index {index} has {} vs {} channels",
                a.kind,
                a.image.channels(),
                b.image.channels()
            )));
        }
    }
    Ok(())
}

/// Axis-aligned bounds used to map world positions into `[0, 1]^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneAabb {
    pub min: [f32; 3],
    pub max: [f32; 3],
}

impl SceneAabb {
    pub fn new(min: [f32; 3], max: [f32; 3]) -> Result<Self> {
        if (0..3).any(|i| !min[i].is_finite() || !max[i].is_finite() || max[i] < min[i]) {
            return Err(Error::InvalidParams(format!("bounds {min:?}..{max:?}")));
        }
        Ok(Self { min, max })
    }

    /// Maps a point into `[0, 1]^3`; zero-extent axes map to 0.5.
    #[inline]
    pub fn normalize(&self, p: [f32; 3]) -> [f32; 3] {
        std::array::from_fn(|i| {
            let extent = self.max[i] - self.min[i];
            if extent > 0.0 {
                ((p[i] - self.min[i]) / extent).clamp(0.0, 1.0)
            } else {
                0.5
            }
        })
    }

    pub fn contains(&self, p: [f32; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[inline]
fn is_covered(coverage: &RasterImage, x: usize, y: usize) -> bool {
    coverage.get(x, y, 0) > COVERAGE_THRESHOLD
}

fn check_worldpos_pair(pass: &RasterImage, coverage: &RasterImage) -> Result<()> {
    if pass.channels() < 3 {
        return Err(Error::DimensionMismatch(format!(
            "world position pass has {} channels, expected 3",
            pass.channels()
        )));
    }
    if !pass.same_dims(coverage) {
        return Err(Error::DimensionMismatch(format!(
            "world position pass {}x{} vs coverage {}x{}",
            pass.width(),
            pass.height(),
            coverage.width(),
            coverage.height()
        )));
    }
    Ok(())
}

/// Normalizes a raw XYZ pass into a world-position guide.
///
/// Covered pixels map through `aabb`; uncovered pixels become 0 rather than
/// being excluded, so the background remains addressable by the search.
pub fn normalize_world_position(
    pass: &RasterImage,
    aabb: &SceneAabb,
    coverage: &RasterImage,
) -> Result<GuideChannel> {
    check_worldpos_pair(pass, coverage)?;
    let image = RasterImage::from_fn(pass.width(), pass.height(), 3, |x, y, c| {
        if is_covered(coverage, x, y) {
            let p = pass.pixel(x, y);
            aabb.normalize([p[0], p[1], p[2]])[c]
        } else {
            0.0
        }
    })?;
    GuideChannel::new(GuideKind::WorldPosition, image, 1.0)
}

/// Component-wise bounds of every covered world position across a shot.
pub fn compute_sequence_aabb(passes: &[RasterImage], coverages: &[RasterImage]) -> Result<SceneAabb> {
    if passes.is_empty() || passes.len() != coverages.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} world position passes vs {} coverage passes",
            passes.len(),
            coverages.len()
        )));
    }
    let mut min = [f32::INFINITY; 3];
    let mut max = [f32::NEG_INFINITY; 3];
    let mut any = false;
    for (pass, coverage) in passes.iter().zip(coverages) {
        check_worldpos_pair(pass, coverage)?;
        for y in 0..pass.height() {
            for x in 0..pass.width() {
                if !is_covered(coverage, x, y) {
                    continue;
                }
                let p = pass.pixel(x, y);
                if !p[..3].iter().all(|v| v.is_finite()) {
                    return Err(Error::Numeric(format!("world position at ({x}, {y})")));
                }
                for i in 0..3 {
                    min[i] = min[i].min(p[i]);
                    max[i] = max[i].max(p[i]);
                }
                any = true;
            }
        }
    }
    if !any {
        return Err(Error::NoCoverage);
    }
    SceneAabb::new(min, max)
}

/// Converts a raw render pass into guide range for its kind.
///
/// Normals stored as signed unit vectors (any sample below 0) are remapped
/// from `[-1, 1]` to `[0, 1]`; every other kind is clamped. World positions
/// need [`normalize_world_position`] instead.
pub fn prepare_pass(kind: GuideKind, raw: &RasterImage) -> RasterImage {
    match kind {
        GuideKind::Normal if raw.min_max().0 < 0.0 => {
            raw.map(|v| (v * 0.5 + 0.5).clamp(0.0, 1.0))
        }
        _ => raw.normalized(),
    }
}

/// Style exemplar: a single-channel touch image `A'` with the guide passes
/// of the scene it was painted over.
#[derive(Debug, Clone)]
pub struct StyleExemplar {
    pub name: String,
    pub touch: Arc<RasterImage>,
    pub guides: GuideSet,
}

impl StyleExemplar {
    pub fn new(name: impl Into<String>, touch: RasterImage, guides: GuideSet) -> Result<Self> {
        let name = name.into();
        if touch.channels() != 1 {
            return Err(Error::InvalidImage(format!(
                "exemplar `{name}` touch has {} channels, expected 1",
                touch.channels()
            )));
        }
        if touch.dims() != guides.dims() {
            return Err(Error::DimensionMismatch(format!(
                "exemplar `{name}` touch is {}x{}, guides are {}x{}",
                touch.width(),
                touch.height(),
                guides.dims().0,
                guides.dims().1
            )));
        }
        Ok(Self {
            name,
            touch: Arc::new(touch),
            guides,
        })
    }
}
