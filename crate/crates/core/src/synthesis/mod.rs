//! Guided patch synthesis: coarse-to-fine EM over a nearest-neighbor field,
//! alternating PatchMatch search with voting.
//!
//! The energy minimized is the sum over target pixels `q` of the patch
//! distance between the exemplar patch at `nnf(q)` and the target patch at
//! `q`. The distance adds the weighted squared difference of the style
//! images and of every guide channel over a square patch. Exemplar samples
//! outside the image replicate the edge pixel; target windows are cut off
//! at the border, which makes the vote the exact minimizer of the style
//! term and lets an interior exemplar region match a target border.

mod nnf;
mod problem;
mod search;
mod vote;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use self::nnf::{init_nnf, upsample_nnf, NearestNeighborField};
pub(crate) use self::nnf::derive_key;

use self::problem::{GuideLayer, LevelProblem};
use crate::error::{Error, Result};
use crate::guides::{validate_guide_pair, GuideSet};
use crate::raster::{build_pyramid, pyramid_depth, ImagePyramid, RasterImage};

/// Pyramid depth: a fixed count or as deep as the minimum level size allows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PyramidLevels {
    #[default]
    Auto,
    Count(usize),
}

impl Serialize for PyramidLevels {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PyramidLevels::Auto => s.serialize_str("auto"),
            PyramidLevels::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for PyramidLevels {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = PyramidLevels;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("\"auto\" or a positive level count")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                match v {
                    "auto" => Ok(PyramidLevels::Auto),
                    other => Err(E::invalid_value(serde::de::Unexpected::Str(other), &self)),
                }
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                if v >= 1 {
                    Ok(PyramidLevels::Count(v as usize))
                } else {
                    Err(E::invalid_value(serde::de::Unexpected::Signed(v), &self))
                }
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                self.visit_i64(v.min(i64::MAX as u64) as i64)
            }
        }
        d.deserialize_any(Visitor)
    }
}

/// Solver settings. Together with the inputs they fully determine the output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisParams {
    pub patch_size: usize,
    pub pyramid_levels: PyramidLevels,
    pub em_iterations_per_level: usize,
    pub search_iterations_per_em: usize,
    pub style_weight: f32,
    pub random_search_radius_decay: f32,
    pub seed: u64,
    pub min_level_size: usize,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            patch_size: 5,
            pyramid_levels: PyramidLevels::Auto,
            em_iterations_per_level: 6,
            search_iterations_per_em: 4,
            style_weight: 1.0,
            random_search_radius_decay: 0.5,
            seed: 0,
            min_level_size: 32,
        }
    }
}

impl SynthesisParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.patch_size < 3 || self.patch_size.is_multiple_of(2) {
            return bad(format!("patch_size {} must be odd and >= 3", self.patch_size));
        }
        if self.em_iterations_per_level == 0 || self.search_iterations_per_em == 0 {
            return bad("iteration counts must be >= 1".into());
        }
        if self.pyramid_levels == PyramidLevels::Count(0) {
            return bad("pyramid_levels must be >= 1".into());
        }
        if self.min_level_size == 0 {
            return bad("min_level_size must be >= 1".into());
        }
        if !(self.style_weight >= 0.0 && self.style_weight.is_finite()) {
            return bad(format!("style_weight {}", self.style_weight));
        }
        let decay = self.random_search_radius_decay;
        if !(decay > 0.0 && decay < 1.0) {
            return bad(format!("random_search_radius_decay {decay} must be in (0, 1)"));
        }
        Ok(())
    }

    fn max_levels(&self) -> usize {
        match self.pyramid_levels {
            PyramidLevels::Auto => usize::MAX,
            PyramidLevels::Count(n) => n,
        }
    }
}

/// Energies recorded at one pyramid level: the value after the level's
/// initial vote, then one entry per EM iteration. The coarsest level starts
/// from a random field and has no initial entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub level: usize,
    pub width: usize,
    pub height: usize,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub image: RasterImage,
    pub nnf: NearestNeighborField,
    /// Coarsest level first.
    pub trace: Vec<LevelTrace>,
}

impl SynthesisResult {
    pub fn final_energy(&self) -> f64 {
        self.trace
            .last()
            .and_then(|t| t.energies.last().copied())
            .unwrap_or(0.0)
    }
}

fn check_style_pair(guides: &GuideSet, style: &RasterImage, what: &str) -> Result<()> {
    if guides.dims() != style.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{what} style is {}x{}, guides are {}x{}",
            style.width(),
            style.height(),
            guides.dims().0,
            guides.dims().1
        )));
    }
    Ok(())
}

fn check_inputs(
    a_guides: &GuideSet,
    a_style: &RasterImage,
    b_guides: &GuideSet,
    b_style: &RasterImage,
) -> Result<()> {
    validate_guide_pair(a_guides, b_guides)?;
    check_style_pair(a_guides, a_style, "exemplar")?;
    check_style_pair(b_guides, b_style, "target")?;
    if a_style.channels() != b_style.channels() {
        return Err(Error::DimensionMismatch(format!(
            "style channels {} vs {}",
            a_style.channels(),
            b_style.channels()
        )));
    }
    Ok(())
}

fn check_field(nnf: &NearestNeighborField, source: (usize, usize), target: (usize, usize)) -> Result<()> {
    if nnf.source_dims() != source || nnf.target_dims() != target || !nnf.is_valid() {
        return Err(Error::DimensionMismatch(format!(
            "field maps {:?} -> {:?}, expected {:?} -> {:?}",
            nnf.target_dims(),
            nnf.source_dims(),
            target,
            source
        )));
    }
    Ok(())
}

/// Patch distance between exemplar patch `p` and target patch `q`.
pub fn patch_distance(
    a_guides: &GuideSet,
    a_style: &RasterImage,
    b_guides: &GuideSet,
    b_style: &RasterImage,
    p: (usize, usize),
    q: (usize, usize),
    params: &SynthesisParams,
) -> Result<f64> {
    params.validate()?;
    check_inputs(a_guides, a_style, b_guides, b_style)?;
    if p.0 >= a_style.width() || p.1 >= a_style.height() {
        return Err(Error::InvalidParams(format!("source coordinate {p:?} out of bounds")));
    }
    if q.0 >= b_style.width() || q.1 >= b_style.height() {
        return Err(Error::InvalidParams(format!("target coordinate {q:?} out of bounds")));
    }
    let problem = LevelProblem::from_sets(
        a_guides,
        a_style,
        b_guides,
        b_style,
        params.style_weight,
        params.patch_size,
    );
    Ok(problem.full_distance(p, q))
}

/// Sum of patch distances over every target pixel.
pub fn total_energy(
    nnf: &NearestNeighborField,
    a_guides: &GuideSet,
    a_style: &RasterImage,
    b_guides: &GuideSet,
    b_style: &RasterImage,
    params: &SynthesisParams,
) -> Result<f64> {
    params.validate()?;
    check_inputs(a_guides, a_style, b_guides, b_style)?;
    check_field(nnf, a_style.dims(), b_style.dims())?;
    let problem = LevelProblem::from_sets(
        a_guides,
        a_style,
        b_guides,
        b_style,
        params.style_weight,
        params.patch_size,
    );
    Ok(search::distance_map(&problem, nnf).iter().sum())
}

/// One PatchMatch pass over the whole field.
pub fn patchmatch_pass(
    nnf: &NearestNeighborField,
    a_guides: &GuideSet,
    a_style: &RasterImage,
    b_guides: &GuideSet,
    b_style: &RasterImage,
    pass_index: usize,
    params: &SynthesisParams,
) -> Result<NearestNeighborField> {
    params.validate()?;
    check_inputs(a_guides, a_style, b_guides, b_style)?;
    check_field(nnf, a_style.dims(), b_style.dims())?;
    let problem = LevelProblem::from_sets(
        a_guides,
        a_style,
        b_guides,
        b_style,
        params.style_weight,
        params.patch_size,
    );
    let mut field = nnf.clone();
    let mut dist = search::distance_map(&problem, &field);
    let key = derive_key(params.seed, "pass", &[pass_index as u64]);
    search::search_pass(
        &problem,
        &mut field,
        &mut dist,
        pass_index,
        &key,
        params.random_search_radius_decay,
    );
    Ok(field)
}

/// Voting step: averages the exemplar samples every covering patch assigns
/// to each target pixel.
pub fn vote(
    nnf: &NearestNeighborField,
    a_style: &RasterImage,
    target: (usize, usize),
    params: &SynthesisParams,
) -> Result<RasterImage> {
    params.validate()?;
    check_field(nnf, a_style.dims(), target)?;
    Ok(vote::vote_field(nnf, a_style, params.patch_size))
}

// Pyramids for one guide channel pair plus the optional target mask.
struct GuidePyramids {
    exemplar: ImagePyramid,
    target: ImagePyramid,
    mask: Option<ImagePyramid>,
    weight: f32,
}

/// Solves `A : A' :: B : B'` for `B'`.
///
/// Builds equal-depth pyramids of every input, starts from a random field
/// at the coarsest level, and at each level runs
/// `em_iterations_per_level` rounds of `search_iterations_per_em`
/// PatchMatch passes followed by one vote. The first round at the coarsest
/// level searches on guides alone. Finer levels start from the upsampled
/// field of the level below. The result is a pure function of
/// the inputs and `params.seed`.
pub fn synthesize(
    a_guides: &GuideSet,
    a_style: &RasterImage,
    b_guides: &GuideSet,
    params: &SynthesisParams,
) -> Result<SynthesisResult> {
    params.validate()?;
    validate_guide_pair(a_guides, b_guides)?;
    check_style_pair(a_guides, a_style, "exemplar")?;
    for (w, h) in [a_guides.dims(), b_guides.dims()] {
        if w.min(h) < params.min_level_size {
            return Err(Error::BelowMinLevelSize {
                width: w,
                height: h,
                min: params.min_level_size,
            });
        }
    }

    let (aw, ah) = a_guides.dims();
    let (bw, bh) = b_guides.dims();
    let depth = pyramid_depth(aw, ah, params.max_levels(), params.min_level_size)
        .min(pyramid_depth(bw, bh, params.max_levels(), params.min_level_size));

    let style_pyr = build_pyramid(a_style, depth, 1);
    let guide_pyrs: Vec<GuidePyramids> = a_guides
        .channels()
        .iter()
        .zip(b_guides.channels())
        .filter(|(a, _)| a.weight > 0.0)
        .map(|(a, b)| GuidePyramids {
            exemplar: build_pyramid(&a.image, depth, 1),
            target: build_pyramid(&b.image, depth, 1),
            mask: b.mask.as_deref().map(|m| build_pyramid(m, depth, 1)),
            weight: a.weight,
        })
        .collect();

    let mut trace = Vec::with_capacity(depth);
    let mut nnf: Option<NearestNeighborField> = None;
    let mut b_style: Option<RasterImage> = None;

    for level in (0..depth).rev() {
        let a_level = style_pyr.level(level);
        let target_dims = guide_pyrs
            .first()
            .map(|g| g.target.level(level).dims())
            .unwrap_or_else(|| {
                let s = 1usize << level;
                (bw.div_ceil(s), bh.div_ceil(s))
            });
        let coarsest = nnf.is_none();
        let field = match nnf.take() {
            None => nnf::init_with_key(target_dims, a_level.dims(), &derive_key(params.seed, "init", &[])),
            Some(coarse) => upsample_nnf(&coarse, target_dims, a_level.dims()),
        };
        let initial_style = vote::vote_field(&field, a_level, params.patch_size);

        let layers: Vec<GuideLayer<'_>> = guide_pyrs
            .iter()
            .map(|g| GuideLayer {
                exemplar: g.exemplar.level(level),
                target: g.target.level(level),
                weight: g.weight,
                mask: g.mask.as_ref().map(|m| m.level(level)),
            })
            .collect();
        let mut problem =
            LevelProblem::new(a_level, &initial_style, params.style_weight, &layers, params.patch_size);
        // A random field carries no style information, so the first search
        // at the coarsest level matches on guides alone.
        let guides_only = coarsest.then(|| LevelProblem::new(a_level, &initial_style, 0.0, &layers, params.patch_size));
        let (field, style, energies) = run_level(
            &mut problem,
            guides_only.as_ref(),
            field,
            initial_style,
            a_level,
            level,
            params,
        );
        trace.push(LevelTrace {
            level,
            width: target_dims.0,
            height: target_dims.1,
            energies,
        });
        nnf = Some(field);
        b_style = Some(style);
    }

    let image = b_style.expect("at least one level");
    if !image.is_finite() {
        return Err(Error::Numeric("synthesized image".into()));
    }
    Ok(SynthesisResult {
        image,
        nnf: nnf.expect("at least one level"),
        trace,
    })
}

fn run_level(
    problem: &mut LevelProblem,
    guides_only: Option<&LevelProblem>,
    mut field: NearestNeighborField,
    mut style: RasterImage,
    a_style: &RasterImage,
    level: usize,
    params: &SynthesisParams,
) -> (NearestNeighborField, RasterImage, Vec<f64>) {
    let mut energies = Vec::with_capacity(params.em_iterations_per_level + 1);
    let mut dist = match guides_only {
        Some(p) => search::distance_map(p, &field),
        None => {
            let d = search::distance_map(problem, &field);
            energies.push(d.iter().sum());
            d
        }
    };
    for em in 0..params.em_iterations_per_level {
        let current: &LevelProblem = match guides_only {
            Some(p) if em == 0 => p,
            _ => problem,
        };
        for pass in 0..params.search_iterations_per_em {
            let key = derive_key(params.seed, "search", &[level as u64, em as u64, pass as u64]);
            search::search_pass(
                current,
                &mut field,
                &mut dist,
                pass,
                &key,
                params.random_search_radius_decay,
            );
        }
        style = vote::vote_field(&field, a_style, params.patch_size);
        problem.set_b_style(&style);
        dist = search::distance_map(problem, &field);
        energies.push(dist.iter().sum());
    }
    (field, style, energies)
}
