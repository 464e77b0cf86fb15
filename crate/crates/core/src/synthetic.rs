//! Procedural test assets: a lit-sphere exemplar and small animated scenes.
//!
//! Everything is rendered with an orthographic camera looking down `-z` at a
//! sphere in front of a flat wall. The wall counts as covered geometry, so
//! every pixel carries a distinct position. Position passes hold rest-frame
//! coordinates: the sphere reports object-space points, which stay attached
//! to the surface while it translates or spins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::guides::{compute_sequence_aabb, normalize_world_position, prepare_pass, GuideKind};
use crate::raster::{save_image, ImageFormat, RasterImage};

pub const EXEMPLAR_SIZE: usize = 128;
pub const SCENE_SIZE: usize = 64;
pub const SCENE_FRAMES: usize = 8;
pub const WALL_ID: u32 = 1;
pub const SPHERE_ID: u32 = 2;

const WALL_Z: f32 = -2.0;
const WALL_DIFFUSE: f32 = 0.3;

fn light() -> [f32; 3] {
    let l = [-0.5f32, 0.6, 0.62];
    let n = (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt();
    [l[0] / n, l[1] / n, l[2] / n]
}

fn dot(a: [f32; 3], b: [f32; 3]) -> f32 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Sphere placement in world units. The image spans `[-1, 1]` horizontally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereState {
    pub center: [f32; 2],
    pub radius: f32,
    /// Rotation about the vertical axis, in radians.
    pub spin: f32,
}

/// Raw render passes for one frame.
///
/// Normals are signed unit vectors and positions are in world units, as a
/// renderer would write them to EXR. `id` stores `id / 255`.
#[derive(Debug, Clone)]
pub struct RenderPasses {
    pub diffuse: RasterImage,
    pub normal: RasterImage,
    pub world_position: RasterImage,
    pub coverage: RasterImage,
    pub outline: RasterImage,
    pub shadow: RasterImage,
    pub id: RasterImage,
    /// 1 where the sphere is visible.
    pub sphere_mask: RasterImage,
}

impl RenderPasses {
    /// The raw pass backing a guide kind, if rendered.
    pub fn pass(&self, kind: GuideKind) -> Option<&RasterImage> {
        match kind {
            GuideKind::Diffuse => Some(&self.diffuse),
            GuideKind::Normal => Some(&self.normal),
            GuideKind::WorldPosition => Some(&self.world_position),
            GuideKind::Coverage => Some(&self.coverage),
            GuideKind::Outline => Some(&self.outline),
            GuideKind::Shadow => Some(&self.shadow),
            GuideKind::Temporal | GuideKind::Custom => None,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.diffuse.dims()
    }
}

fn pixel_to_world(x: usize, y: usize, w: usize, h: usize) -> (f32, f32, f32) {
    let s = 2.0 / w as f32;
    let wx = (x as f32 + 0.5 - w as f32 / 2.0) * s;
    let wy = (h as f32 / 2.0 - y as f32 - 0.5) * s;
    (wx, wy, s)
}

fn ramp(edge: f32, width: f32, v: f32) -> f32 {
    ((edge - v) / width + 0.5).clamp(0.0, 1.0)
}

/// Renders every pass of the sphere-and-wall scene at `width x height`.
pub fn render(width: usize, height: usize, sphere: SphereState) -> RenderPasses {
    let l = light();
    let n = width * height;
    let mut diffuse = Vec::with_capacity(n);
    let mut normal = Vec::with_capacity(n * 3);
    let mut pos = Vec::with_capacity(n * 3);
    let mut outline = Vec::with_capacity(n);
    let mut shadow = Vec::with_capacity(n);
    let mut id = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    let (cx, cy, r) = (sphere.center[0], sphere.center[1], sphere.radius);
    let (sin, cos) = sphere.spin.sin_cos();

    for y in 0..height {
        for x in 0..width {
            let (wx, wy, s) = pixel_to_world(x, y, width, height);
            let (dx, dy) = (wx - cx, wy - cy);
            let d = (dx * dx + dy * dy).sqrt();
            outline.push((1.0 - (d - r).abs() / (1.5 * s)).clamp(0.0, 1.0));
            if d <= r {
                let (nx, ny) = (dx / r, dy / r);
                let nz = (1.0 - nx * nx - ny * ny).max(0.0).sqrt();
                let nl = dot([nx, ny, nz], l);
                diffuse.push(0.08 + 0.92 * nl.max(0.0));
                normal.extend_from_slice(&[nx, ny, nz]);
                let (px, py, pz) = (nx * r, ny * r, nz * r);
                pos.extend_from_slice(&[px * cos - pz * sin, py, px * sin + pz * cos]);
                shadow.push(ramp(0.0, 0.2, nl));
                id.push(SPHERE_ID as f32 / 255.0);
                mask.push(1.0);
            } else {
                diffuse.push(WALL_DIFFUSE);
                normal.extend_from_slice(&[0.0, 0.0, 1.0]);
                pos.extend_from_slice(&[wx, wy, WALL_Z]);
                // Distance from the sphere centre to the ray towards the light.
                let v = [cx - wx, cy - wy, -WALL_Z];
                let t = dot(v, l);
                let occ = if t > 0.0 {
                    let c = [v[0] - t * l[0], v[1] - t * l[1], v[2] - t * l[2]];
                    ramp(r, 3.0 * s, dot(c, c).sqrt())
                } else {
                    0.0
                };
                shadow.push(occ);
                id.push(WALL_ID as f32 / 255.0);
                mask.push(0.0);
            }
        }
    }

    let img = |c, data| RasterImage::from_vec(width, height, c, data).expect("render buffers match dims");
    RenderPasses {
        diffuse: img(1, diffuse),
        normal: img(3, normal),
        world_position: img(3, pos),
        coverage: RasterImage::filled(width, height, 1, 1.0).expect("nonzero dims"),
        outline: img(1, outline),
        shadow: img(1, shadow),
        id: img(1, id),
        sphere_mask: img(1, mask),
    }
}

/// Bilinear value noise over a `cells x cells` lattice of random values.
struct ValueNoise {
    cells: usize,
    values: Vec<f32>,
}

impl ValueNoise {
    fn new(seed: u64, cells: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..(cells + 1) * (cells + 1)).map(|_| rng.random::<f32>()).collect();
        Self { cells, values }
    }

    /// Samples at `(u, v)` in `[0, 1]^2`.
    fn at(&self, u: f32, v: f32) -> f32 {
        let n = self.cells;
        let fu = u.clamp(0.0, 1.0) * n as f32;
        let fv = v.clamp(0.0, 1.0) * n as f32;
        let (i, j) = ((fu as usize).min(n - 1), (fv as usize).min(n - 1));
        let (tu, tv) = (fu - i as f32, fv - j as f32);
        let g = |a: usize, b: usize| self.values[b * (n + 1) + a];
        let top = g(i, j) * (1.0 - tu) + g(i + 1, j) * tu;
        let bottom = g(i, j + 1) * (1.0 - tu) + g(i + 1, j + 1) * tu;
        top * (1.0 - tv) + bottom * tv
    }
}

/// The exemplar sphere as drawn on a 128 x 128 canvas.
pub fn exemplar_sphere() -> SphereState {
    SphereState {
        center: [0.0, 0.0],
        radius: 0.62,
        spin: 0.0,
    }
}

/// Hand-painted look-alike touches over the lit-sphere exemplar, one per
/// layer kind, together with the exemplar's own guide images.
#[derive(Debug, Clone)]
pub struct LitSphereExemplar {
    pub passes: RenderPasses,
    /// Base touch: paint density, 1 for full colour.
    pub base: RasterImage,
    /// Outline touch: ink coverage, 0 away from lines.
    pub outline: RasterImage,
    /// Shadow touch: 1 where unshadowed.
    pub shadow: RasterImage,
}

impl LitSphereExemplar {
    /// Guide image in `[0, 1]` for `kind`. Positions are normalized over the
    /// exemplar's own bounds.
    pub fn guide(&self, kind: GuideKind) -> Option<RasterImage> {
        if kind == GuideKind::WorldPosition {
            let p = &self.passes;
            let aabb = compute_sequence_aabb(
                std::slice::from_ref(&p.world_position),
                std::slice::from_ref(&p.coverage),
            )
            .ok()?;
            let ch = normalize_world_position(&p.world_position, &aabb, &p.coverage).ok()?;
            return Some((*ch.image).clone());
        }
        self.passes.pass(kind).map(|raw| prepare_pass(kind, raw))
    }
}

/// Renders the 128 x 128 lit-sphere exemplar and paints its touches.
pub fn lit_sphere_exemplar(seed: u64) -> LitSphereExemplar {
    let size = EXEMPLAR_SIZE;
    let sphere = exemplar_sphere();
    let passes = render(size, size, sphere);
    let grain = ValueNoise::new(seed, 24);
    let wobble = ValueNoise::new(seed ^ 0x9e37, 6);
    let rim = ValueNoise::new(seed ^ 0x5bd1, 12);
    let l = light();

    let base = RasterImage::from_fn(size, size, 1, |x, y, _| {
        let (wx, wy, _) = pixel_to_world(x, y, size, size);
        let (u, v) = (x as f32 / size as f32, y as f32 / size as f32);
        let g = grain.at(u, v) - 0.5;
        if passes.sphere_mask.get(x, y, 0) > 0.5 {
            let shade = passes.diffuse.get(x, y, 0);
            let phase = 38.0 * (wx * 0.70 + wy * 0.71) + 5.0 * wobble.at(u, v);
            let stroke = phase.sin() * 0.5;
            (0.12 + 0.82 * shade + 0.35 * stroke * (1.0 - shade) + 0.12 * g).clamp(0.0, 1.0)
        } else {
            let phase = 22.0 * (wx * 0.2 - wy) + 3.0 * wobble.at(u, v);
            (0.8 + 0.06 * phase.sin() + 0.2 * g).clamp(0.0, 1.0)
        }
    })
    .expect("nonzero dims");

    let outline = RasterImage::from_fn(size, size, 1, |x, y, _| {
        let (wx, wy, s) = pixel_to_world(x, y, size, size);
        let (dx, dy) = (wx - sphere.center[0], wy - sphere.center[1]);
        let d = (dx * dx + dy * dy).sqrt();
        let a = dy.atan2(dx);
        let (ru, rv) = (0.5 + 0.45 * a.cos(), 0.5 + 0.45 * a.sin());
        let offset = 1.6 * s * (rim.at(ru, rv) - 0.5);
        let width = s * (0.9 + 1.4 * wobble.at(ru, rv));
        let ink = 1.0 - (d - sphere.radius - offset).abs() / width;
        ink.clamp(0.0, 1.0).sqrt()
    })
    .expect("nonzero dims");

    let shadow = RasterImage::from_fn(size, size, 1, |x, y, _| {
        let (wx, wy, _) = pixel_to_world(x, y, size, size);
        let (u, v) = (x as f32 / size as f32, y as f32 / size as f32);
        let occ = passes.shadow.get(x, y, 0);
        let phase = 45.0 * (wx * l[1] - wy * l[0]) + 4.0 * wobble.at(u, v);
        let hatch = 0.5 + 0.5 * phase.sin();
        (1.0 - occ * (0.4 + 0.45 * hatch)).clamp(0.0, 1.0)
    })
    .expect("nonzero dims");

    LitSphereExemplar {
        passes,
        base,
        outline,
        shadow,
    }
}

/// Motion of the sphere in a synthetic shot. The camera never moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneMotion {
    Static,
    /// Moves right by [`TRANSLATION_PX`] pixels per frame.
    Translating,
    /// Spins about the vertical axis by [`SPIN_PER_FRAME`] radians per frame.
    Rotating,
}

pub const TRANSLATION_PX: usize = 2;
pub const SPIN_PER_FRAME: f32 = 0.3;

impl SceneMotion {
    pub fn as_str(self) -> &'static str {
        match self {
            SceneMotion::Static => "static",
            SceneMotion::Translating => "translating",
            SceneMotion::Rotating => "rotating",
        }
    }

    /// Sphere placement at zero-based frame `t` of a `SCENE_SIZE` scene.
    pub fn sphere(self, t: usize) -> SphereState {
        let px = 2.0 / SCENE_SIZE as f32;
        match self {
            SceneMotion::Static => SphereState {
                center: [0.05, 0.0],
                radius: 0.5,
                spin: 0.0,
            },
            SceneMotion::Translating => SphereState {
                center: [-0.3 + (t * TRANSLATION_PX) as f32 * px, 0.05],
                radius: 0.45,
                spin: 0.0,
            },
            SceneMotion::Rotating => SphereState {
                center: [0.0, 0.0],
                radius: 0.6,
                spin: SPIN_PER_FRAME * t as f32,
            },
        }
    }

    pub fn render(self, t: usize) -> RenderPasses {
        render(SCENE_SIZE, SCENE_SIZE, self.sphere(t))
    }
}

/// Normalizes a frame sequence's positions with one shared bounding box.
pub fn normalized_positions(frames: &[RenderPasses]) -> Result<Vec<RasterImage>> {
    let passes: Vec<RasterImage> = frames.iter().map(|f| f.world_position.clone()).collect();
    let cov: Vec<RasterImage> = frames.iter().map(|f| f.coverage.clone()).collect();
    let aabb = compute_sequence_aabb(&passes, &cov)?;
    frames
        .iter()
        .map(|f| Ok((*normalize_world_position(&f.world_position, &aabb, &f.coverage)?.image).clone()))
        .collect()
}

/// Seed of the painted touches in shots written by [`write_shot`].
pub const SHOT_EXEMPLAR_SEED: u64 = 7;

const PASS_KINDS: [GuideKind; 6] = [
    GuideKind::Diffuse,
    GuideKind::Normal,
    GuideKind::WorldPosition,
    GuideKind::Coverage,
    GuideKind::Outline,
    GuideKind::Shadow,
];

const EXEMPLAR_GUIDES: [GuideKind; 4] = [GuideKind::Diffuse, GuideKind::Normal, GuideKind::Outline, GuideKind::Shadow];

fn shot_toml(motion: SceneMotion, frames: usize) -> String {
    let passes: String = PASS_KINDS
        .iter()
        .map(|k| format!("{k} = \"passes/{k}.{{frame}}.exr\"\n"))
        .collect();
    let guides: Vec<String> = EXEMPLAR_GUIDES
        .iter()
        .map(|k| format!("{k} = \"exemplar/{k}.exr\""))
        .collect();
    let guides = guides.join(", ");
    format!(
        r#"name = "sphere_{motion}"
frames = {{ start = 1, end = {frames} }}
seed = 1

[passes]
{passes}id = "passes/id.{{frame}}.png"

[exemplars.base]
touch = "exemplar/base.png"
guides = {{ {guides} }}

[exemplars.outline]
touch = "exemplar/outline.png"
guides = {{ {guides} }}

[exemplars.shadow]
touch = "exemplar/shadow.png"
guides = {{ {guides} }}

[[layers]]
name = "base"
kind = "base"
exemplar = "base"
guides = [{{ kind = "diffuse", weight = 1.0 }}, {{ kind = "normal", weight = 1.0 }}]

[[layers]]
name = "shadow"
kind = "shadow"
exemplar = "shadow"
guides = [{{ kind = "shadow", weight = 1.0 }}, {{ kind = "normal", weight = 1.0 }}]
opacity = 0.8

[[layers]]
name = "outline"
kind = "outline"
exemplar = "outline"
guides = [{{ kind = "outline", weight = 1.0 }}, {{ kind = "normal", weight = 1.0 }}]

[palette]
background = [1.0, 1.0, 1.0]
colors = {{ "{WALL_ID}" = [0.93, 0.88, 0.78], "{SPHERE_ID}" = [0.85, 0.32, 0.22] }}
tints = {{ outline = [0.1, 0.08, 0.12] }}
layer_colors = {{ shadow = {{ "{WALL_ID}" = [1.0, 1.0, 1.0], "{SPHERE_ID}" = [1.0, 1.0, 1.0] }} }}
"#,
        motion = motion.as_str(),
    )
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes a complete shot of the sphere scene into `dir`: raw passes for
/// `frames` frames (numbered from 1), the lit-sphere exemplar with three
/// painted touches, and a `shot.toml` with base, shadow and outline layers.
/// Returns the config path.
pub fn write_shot(dir: &Path, motion: SceneMotion, frames: usize) -> Result<PathBuf> {
    if frames == 0 {
        return Err(Error::InvalidParams("a shot needs at least one frame".into()));
    }
    let passes_dir = dir.join("passes");
    let exemplar_dir = dir.join("exemplar");
    create_dir(&passes_dir)?;
    create_dir(&exemplar_dir)?;

    let ex = lit_sphere_exemplar(SHOT_EXEMPLAR_SEED);
    for (name, touch) in [("base", &ex.base), ("outline", &ex.outline), ("shadow", &ex.shadow)] {
        save_image(touch, exemplar_dir.join(format!("{name}.png")), ImageFormat::Png16)?;
    }
    for kind in EXEMPLAR_GUIDES {
        let guide = ex.guide(kind).expect("exemplar renders every pass kind");
        save_image(&guide, exemplar_dir.join(format!("{kind}.exr")), ImageFormat::Exr)?;
    }

    for t in 0..frames {
        let frame = t + 1;
        let p = motion.render(t);
        for kind in PASS_KINDS {
            let raw = p.pass(kind).expect("scene renders every pass kind");
            save_image(raw, passes_dir.join(format!("{kind}.{frame:04}.exr")), ImageFormat::Exr)?;
        }
        save_image(&p.id, passes_dir.join(format!("id.{frame:04}.png")), ImageFormat::Png8)?;
    }

    let config = dir.join("shot.toml");
    std::fs::write(&config, shot_toml(motion, frames)).map_err(|e| Error::io(&config, e))?;
    Ok(config)
}
