//! Layer stacks, colorization of single-channel touches and final frame
//! assembly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guides::GuideKind;
use crate::raster::RasterImage;
use crate::synthesis::SynthesisParams;
use crate::config::ShotConfig;
use crate::temporal::{FrameResult, TemporalParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Base,
    Outline,
    Shadow,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Base => "base",
            LayerKind::Outline => "outline",
            LayerKind::Shadow => "shadow",
        }
    }

    /// Position in the bottom-to-top compositing order.
    fn rank(self) -> u8 {
        match self {
            LayerKind::Base => 0,
            LayerKind::Shadow => 1,
            LayerKind::Outline => 2,
        }
    }

    pub fn default_blend(self) -> BlendMode {
        match self {
            LayerKind::Shadow => BlendMode::Multiply,
            LayerKind::Base | LayerKind::Outline => BlendMode::Over,
        }
    }

    /// Render pass a layer of this kind cannot work without.
    pub fn required_pass(self) -> Option<GuideKind> {
        match self {
            LayerKind::Base => None,
            LayerKind::Outline => Some(GuideKind::Outline),
            LayerKind::Shadow => Some(GuideKind::Shadow),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendMode {
    Multiply,
    Over,
    Screen,
}

impl BlendMode {
    /// Blends `src` onto `dst` at coverage `alpha`.
    #[inline]
    pub fn apply(self, dst: f32, src: f32, alpha: f32) -> f32 {
        match self {
            BlendMode::Multiply => dst * (1.0 - alpha * (1.0 - src)),
            BlendMode::Over => src * alpha + dst * (1.0 - alpha),
            BlendMode::Screen => 1.0 - (1.0 - dst) * (1.0 - alpha * src),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuideSelection {
    pub kind: GuideKind,
    pub weight: f32,
}

/// One independently transferred layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub exemplar: String,
    pub guides: Vec<GuideSelection>,
    pub synthesis: SynthesisParams,
    pub temporal: TemporalParams,
    pub blend: BlendMode,
    pub opacity: f32,
}

pub type Rgb = [f32; 3];

/// Flat colours keyed by the integer IDs of the color-ID pass.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Palette {
    pub background: Rgb,
    pub colors: BTreeMap<u32, Rgb>,
    /// Line colour per outline layer name. Missing entries mean black.
    pub tints: BTreeMap<String, Rgb>,
    /// Per-layer replacement for `colors`.
    pub layer_colors: BTreeMap<String, BTreeMap<u32, Rgb>>,
}

impl Palette {
    pub fn colors_for(&self, layer: &str) -> &BTreeMap<u32, Rgb> {
        self.layer_colors.get(layer).unwrap_or(&self.colors)
    }

    pub fn tint_for(&self, layer: &str) -> Rgb {
        self.tints.get(layer).copied().unwrap_or([0.0; 3])
    }
}

/// Decodes an ID sample stored as `id / 255`.
#[inline]
pub fn decode_id(v: f32) -> u32 {
    (v * 255.0).round().max(0.0) as u32
}

/// A colorized layer: RGB colour plus per-pixel coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorizedLayer {
    pub color: RasterImage,
    pub alpha: RasterImage,
}

fn check_touch(touch: &RasterImage, id_pass: &RasterImage) -> Result<()> {
    if touch.channels() != 1 {
        return Err(Error::InvalidImage(format!(
            "touch has {} channels, expected 1",
            touch.channels()
        )));
    }
    if touch.dims() != id_pass.dims() {
        return Err(Error::DimensionMismatch(format!(
            "touch {}x{} vs id pass {}x{}",
            touch.width(),
            touch.height(),
            id_pass.width(),
            id_pass.height()
        )));
    }
    Ok(())
}

/// Colours a single-channel touch.
///
/// Base and shadow layers multiply the palette colour of each pixel's ID by
/// the touch and are fully opaque. Outline layers take the flat `tint` and
/// use the touch as coverage.
pub fn colorize(
    touch: &RasterImage,
    id_pass: &RasterImage,
    colors: &BTreeMap<u32, Rgb>,
    kind: LayerKind,
    tint: Rgb,
) -> Result<ColorizedLayer> {
    check_touch(touch, id_pass)?;
    let (w, h) = touch.dims();
    if kind == LayerKind::Outline {
        return Ok(ColorizedLayer {
            color: RasterImage::from_fn(w, h, 3, |_, _, c| tint[c])?,
            alpha: touch.clone(),
        });
    }
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let id = decode_id(id_pass.get(x, y, 0));
            let rgb = colors.get(&id).ok_or(Error::UnmappedColorId { id, x, y })?;
            let t = touch.get(x, y, 0);
            data.extend(rgb.iter().map(|c| c * t));
        }
    }
    Ok(ColorizedLayer {
        color: RasterImage::from_vec(w, h, 3, data)?,
        alpha: RasterImage::filled(w, h, 1, 1.0)?,
    })
}

/// Synthesizes every frame of one layer with its own guides and settings.
///
/// Outline and shadow layers must select, and the shot must provide, their
/// matching pass.
pub fn transfer_layer(shot: &ShotConfig, layer: &LayerSpec) -> Result<Vec<FrameResult>> {
    crate::temporal::run_layer_sequence(shot, layer, Default::default())
}

/// Layers with their per-frame touches and the per-frame ID passes.
#[derive(Debug, Clone)]
pub struct LayerStack {
    layers: Vec<(LayerSpec, Vec<RasterImage>)>,
    ids: Vec<RasterImage>,
}

impl LayerStack {
    /// Orders layers base, shadow, outline; config order is kept within a
    /// kind.
    pub fn new(mut layers: Vec<(LayerSpec, Vec<RasterImage>)>, ids: Vec<RasterImage>) -> Result<Self> {
        let frames = ids.len();
        let dims = ids.first().map(|i| i.dims());
        for (spec, touches) in &layers {
            if touches.len() != frames {
                return Err(Error::DimensionMismatch(format!(
                    "layer `{}` has {} frames, id pass has {frames}",
                    spec.name,
                    touches.len()
                )));
            }
            if let Some(t) = touches.iter().find(|t| Some(t.dims()) != dims) {
                return Err(Error::DimensionMismatch(format!(
                    "layer `{}` is {}x{}",
                    spec.name,
                    t.width(),
                    t.height()
                )));
            }
            if !(0.0..=1.0).contains(&spec.opacity) {
                return Err(Error::InvalidParams(format!(
                    "layer `{}` opacity {} outside [0, 1]",
                    spec.name, spec.opacity
                )));
            }
        }
        if ids.iter().any(|i| Some(i.dims()) != dims) {
            return Err(Error::DimensionMismatch("id passes differ in size".into()));
        }
        layers.sort_by_key(|(spec, _)| spec.kind.rank());
        Ok(Self { layers, ids })
    }

    pub fn layers(&self) -> &[(LayerSpec, Vec<RasterImage>)] {
        &self.layers
    }

    pub fn frame_count(&self) -> usize {
        self.ids.len()
    }
}

/// Assembles one final RGB frame, bottom to top, over the palette
/// background.
pub fn composite_frame(stack: &LayerStack, frame: usize, palette: &Palette) -> Result<RasterImage> {
    let id_pass = stack.ids.get(frame).ok_or_else(|| {
        Error::InvalidParams(format!("frame {frame} outside stack of {}", stack.frame_count()))
    })?;
    let (w, h) = id_pass.dims();
    let bg = palette.background;
    let mut out = RasterImage::from_fn(w, h, 3, |_, _, c| bg[c])?;
    for (spec, touches) in &stack.layers {
        let layer = colorize(
            &touches[frame],
            id_pass,
            palette.colors_for(&spec.name),
            spec.kind,
            palette.tint_for(&spec.name),
        )?;
        let color = layer.color.data();
        let alpha = layer.alpha.data();
        for (p, px) in out.data_mut().chunks_exact_mut(3).enumerate() {
            let a = spec.opacity * alpha[p];
            for c in 0..3 {
                px[c] = spec.blend.apply(px[c], color[p * 3 + c], a);
            }
        }
    }
    Ok(out)
}
