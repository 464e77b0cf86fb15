//! Acceptance checks on the bundled synthetic assets.
//!
//! Runs as a plain binary so that every criterion prints one PASS or FAIL
//! line. The process fails if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use styletx::compositing::{colorize, composite_frame, BlendMode, LayerKind, LayerStack, Palette};
use styletx::config::{parse_config, ShotConfig};
use styletx::guides::{
    assemble_guide_set, compute_sequence_aabb, normalize_world_position, prepare_pass, GuideChannel, GuideKind,
    GuideSet, Side,
};
use styletx::pipeline::composite_shot;
use styletx::raster::mean_abs_diff;
use styletx::synthesis::{synthesize, LevelTrace, SynthesisParams};
use styletx::synthetic::{
    lit_sphere_exemplar, normalized_positions, write_shot, RenderPasses, SceneMotion, SCENE_FRAMES, SCENE_SIZE,
    SPHERE_ID, TRANSLATION_PX, WALL_ID,
};
use styletx::temporal::{
    advect, flicker_metric, run_sequence_with, FrameResult, SequenceOptions, TemporalParams,
};
use styletx::RasterImage;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- helpers

fn guide_set(channels: Vec<(GuideKind, RasterImage, f32)>, side: Side) -> GuideSet {
    assemble_guide_set(channels, side).unwrap()
}

// Straight-loop patch distance: exemplar samples clamp at the border,
// target offsets that leave the target are skipped.
#[allow(clippy::too_many_arguments)]
fn oracle_distance(
    a_guides: &GuideSet,
    a_style: &RasterImage,
    b_guides: &GuideSet,
    b_style: &RasterImage,
    p: (usize, usize),
    q: (usize, usize),
    patch: usize,
    style_weight: f64,
) -> f64 {
    let r = (patch / 2) as i64;
    let clampi = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let mut total = 0.0;
    for oy in -r..=r {
        for ox in -r..=r {
            let (bx, by) = (q.0 as i64 + ox, q.1 as i64 + oy);
            if bx < 0 || by < 0 || bx >= b_style.width() as i64 || by >= b_style.height() as i64 {
                continue;
            }
            let (bx, by) = (bx as usize, by as usize);
            let (ax, ay) = (
                clampi(p.0 as i64 + ox, a_style.width()),
                clampi(p.1 as i64 + oy, a_style.height()),
            );
            for c in 0..a_style.channels() {
                let d = a_style.get(ax, ay, c) as f64 - b_style.get(bx, by, c) as f64;
                total += style_weight * d * d;
            }
            for (ga, gb) in a_guides.channels().iter().zip(b_guides.channels()) {
                let m = gb.mask.as_ref().map_or(1.0, |m| m.get(bx, by, 0) as f64);
                for c in 0..ga.image.channels() {
                    let d = ga.image.get(ax, ay, c) as f64 - gb.image.get(bx, by, c) as f64;
                    total += ga.weight as f64 * m * d * d;
                }
            }
        }
    }
    total
}

fn sphere_guides(passes: &RenderPasses, kinds: &[(GuideKind, f32)], side: Side) -> GuideSet {
    guide_set(
        kinds
            .iter()
            .map(|&(k, w)| (k, prepare_pass(k, passes.pass(k).unwrap()), w))
            .collect(),
        side,
    )
}

fn exemplar_guides(kinds: &[(GuideKind, f32)]) -> (GuideSet, RasterImage) {
    let ex = lit_sphere_exemplar(7);
    let a = guide_set(
        kinds.iter().map(|&(k, w)| (k, ex.guide(k).unwrap(), w)).collect(),
        Side::Exemplar,
    );
    (a, ex.base)
}

fn retarget(set: &GuideSet, f: impl Fn(&RasterImage) -> RasterImage) -> GuideSet {
    guide_set(
        set.channels().iter().map(|c| (c.kind, f(&c.image), c.weight)).collect(),
        Side::Target,
    )
}

fn shot(dir: &Path, motion: SceneMotion, output: &str) -> ShotConfig {
    let mut shot = parse_config(write_shot(dir, motion, SCENE_FRAMES).unwrap()).unwrap();
    shot.output = output.into();
    shot
}

fn without_temporal(shot: &ShotConfig) -> ShotConfig {
    let mut s = shot.clone();
    s.output = format!("{}_baseline", shot.output);
    for l in &mut s.layers {
        l.temporal.temporal_weight = 0.0;
    }
    s
}

fn run_layers(shot: &ShotConfig) -> BTreeMap<String, Vec<FrameResult>> {
    shot.layers
        .iter()
        .map(|l| {
            let r = run_sequence_with(shot, &l.name, SequenceOptions { resume: false }).unwrap();
            (l.name.clone(), r)
        })
        .collect()
}

fn images(results: &[FrameResult]) -> Vec<RasterImage> {
    results.iter().map(|r| r.b_prime.clone()).collect()
}

/// Traces gathered from every synthesis the criteria run.
#[derive(Default)]
struct Traces(Vec<(String, Vec<LevelTrace>)>);

impl Traces {
    fn add(&mut self, name: impl Into<String>, trace: &[LevelTrace]) {
        self.0.push((name.into(), trace.to_vec()));
    }
}

/// Sequence runs shared by several criteria.
struct Runs {
    _dir: tempfile::TempDir,
    static_shot: ShotConfig,
    static_guided: BTreeMap<String, Vec<FrameResult>>,
    static_plain: BTreeMap<String, Vec<FrameResult>>,
    translating_guided: BTreeMap<String, Vec<FrameResult>>,
    translating_plain: BTreeMap<String, Vec<FrameResult>>,
}

impl Runs {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let static_shot = shot(&dir.path().join("static"), SceneMotion::Static, "out");
        let translating_shot = shot(&dir.path().join("translating"), SceneMotion::Translating, "out");
        Self {
            static_guided: run_layers(&static_shot),
            static_plain: run_layers(&without_temporal(&static_shot)),
            translating_guided: run_layers(&translating_shot),
            translating_plain: run_layers(&without_temporal(&translating_shot)),
            static_shot,
            _dir: dir,
        }
    }

    fn all(&self) -> impl Iterator<Item = (String, &FrameResult)> {
        [
            ("static", &self.static_guided),
            ("static_baseline", &self.static_plain),
            ("translating", &self.translating_guided),
            ("translating_baseline", &self.translating_plain),
        ]
        .into_iter()
        .flat_map(|(shot, layers)| {
            layers
                .iter()
                .flat_map(move |(layer, frames)| frames.iter().map(move |f| (format!("{shot}/{layer}"), f)))
        })
    }
}

// ------------------------------------------------------------- criteria

fn oracle_optimality(traces: &mut Traces) -> Outcome {
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let coords = |w: usize, flip: bool| {
        RasterImage::from_fn(w, w, 2, move |x, y, c| {
            let x = if flip { w - 1 - x } else { x };
            if c == 0 {
                x as f32 / (w - 1) as f32
            } else {
                y as f32 / (w - 1) as f32
            }
        })
        .unwrap()
    };
    let shade = RasterImage::from_fn(n, n, 1, |x, y, _| 0.5 + 0.4 * (0.6 * x as f32).sin() * (0.4 * y as f32).cos())
        .unwrap();
    let a = guide_set(
        vec![(GuideKind::Custom, coords(n, false), 2.0), (GuideKind::Diffuse, shade.clone(), 1.0)],
        Side::Exemplar,
    );
    let b_shade = RasterImage::from_fn(n, n, 1, |x, y, _| shade.get(y, x, 0)).unwrap();
    let b = guide_set(
        vec![(GuideKind::Custom, coords(n, true), 2.0), (GuideKind::Diffuse, b_shade, 1.0)],
        Side::Target,
    );
    let style = RasterImage::from_fn(n, n, 1, |_, _, _| rng.random::<f32>()).unwrap();
    let params = SynthesisParams {
        patch_size: 5,
        min_level_size: 8,
        seed: 3,
        ..SynthesisParams::default()
    };
    let out = synthesize(&a, &style, &b, &params).unwrap();
    traces.add("oracle_16px", &out.trace);

    let sw = params.style_weight as f64;
    let (mut achieved, mut optimal) = (0.0, 0.0);
    for qy in 0..n {
        for qx in 0..n {
            let (px, py) = out.nnf.get(qx, qy);
            achieved += oracle_distance(&a, &style, &b, &out.image, (px as usize, py as usize), (qx, qy), 5, sw);
            let mut best = f64::INFINITY;
            for py in 0..n {
                for px in 0..n {
                    best = best.min(oracle_distance(&a, &style, &b, &out.image, (px, py), (qx, qy), 5, sw));
                }
            }
            optimal += best;
        }
    }
    let (achieved, optimal) = (achieved / (n * n) as f64, optimal / (n * n) as f64);
    let ratio = if optimal > 0.0 { achieved / optimal } else { 1.0 };
    check(
        ratio <= 1.05,
        format!("mean patch distance {achieved:.6} vs brute-force optimum {optimal:.6} (ratio {ratio:.4}, limit 1.05)"),
    )
}

fn energy_monotonicity(traces: &Traces, runs: &Runs) -> Outcome {
    let mut all: Vec<(String, Vec<LevelTrace>)> = traces.0.clone();
    all.extend(runs.all().map(|(name, f)| (format!("{name}#{}", f.frame_index), f.trace.clone())));
    let mut levels = 0;
    for (name, trace) in &all {
        for level in trace {
            levels += 1;
            for (i, pair) in level.energies.windows(2).enumerate() {
                if pair[1] > pair[0] * (1.0 + 1e-6) {
                    return Err(format!(
                        "{name} level {}: energy rose from {} to {} at iteration {}",
                        level.level,
                        pair[0],
                        pair[1],
                        i + 1
                    ));
                }
            }
        }
    }
    Ok(format!("{levels} levels across {} syntheses, all non-increasing (rel. tol 1e-6)", all.len()))
}

fn identity_and_crop(traces: &mut Traces) -> Outcome {
    let kinds = [
        (GuideKind::Diffuse, 1.0),
        (GuideKind::Normal, 1.0),
        (GuideKind::WorldPosition, 4.0),
    ];
    let (a, style) = exemplar_guides(&kinds);
    let params = SynthesisParams {
        seed: 11,
        ..SynthesisParams::default()
    };
    let same = retarget(&a, |i| i.clone());
    let out = synthesize(&a, &style, &same, &params).unwrap();
    traces.add("self_analogy", &out.trace);
    let self_mae = mean_abs_diff(&out.image, &style).unwrap();

    let (x0, y0, w, h) = (24, 40, 64, 56);
    let cropped = retarget(&a, |i| i.crop(x0, y0, w, h).unwrap());
    let out = synthesize(&a, &style, &cropped, &params).unwrap();
    traces.add("crop_analogy", &out.trace);
    let crop_mae = mean_abs_diff(&out.image, &style.crop(x0, y0, w, h).unwrap()).unwrap();

    let limit = 2.0 / 255.0;
    check(
        self_mae <= limit && crop_mae <= limit,
        format!(
            "self MAE {:.3}/255, crop MAE {:.3}/255 (limit 2/255)",
            self_mae * 255.0,
            crop_mae * 255.0
        ),
    )
}

/// Maps each pixel of frame `t + 1` to its position in frame `t` when the
/// same surface is visible in both with matching guides. The sphere moves
/// right by `shift` pixels and the wall stays put.
fn correspondences(prev: &RenderPasses, cur: &RenderPasses, shift: usize) -> Vec<Option<(usize, usize)>> {
    let (w, h) = cur.dims();
    let guides = |p: &RenderPasses, x: usize, y: usize| {
        let mut v = vec![p.diffuse.get(x, y, 0)];
        v.extend_from_slice(p.normal.pixel(x, y));
        v
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let on_sphere = cur.sphere_mask.get(x, y, 0);
            let src = if on_sphere == 1.0 {
                x.checked_sub(shift).filter(|&sx| prev.sphere_mask.get(sx, y, 0) == 1.0)
            } else if on_sphere == 0.0 && prev.sphere_mask.get(x, y, 0) == 0.0 {
                Some(x)
            } else {
                None
            };
            let src = src.filter(|&sx| {
                guides(prev, sx, y)
                    .iter()
                    .zip(guides(cur, x, y))
                    .all(|(a, b)| (a - b).abs() <= 1e-3)
            });
            out.push(src.map(|sx| (sx, y)));
        }
    }
    out
}

/// Flicker between each frame and its predecessor brought into alignment
/// along surface correspondences. Unmatched pixels are masked out.
fn compensated_flicker(frames: &[RasterImage], motion: SceneMotion, shift: usize) -> f64 {
    let mut total = 0.0;
    for t in 0..frames.len() - 1 {
        let map = correspondences(&motion.render(t), &motion.render(t + 1), shift);
        let (w, h) = frames[t].dims();
        let prev = &frames[t];
        let warped = RasterImage::from_fn(w, h, 1, |x, y, _| {
            map[y * w + x].map_or(0.0, |(sx, sy)| prev.get(sx, sy, 0))
        })
        .unwrap();
        let mask = RasterImage::from_fn(w, h, 1, |x, y, _| map[y * w + x].map_or(0.0, |_| 1.0)).unwrap();
        total += flicker_metric(&[warped, frames[t + 1].clone()], &[mask]).unwrap();
    }
    total / (frames.len() - 1) as f64
}

fn temporal_noise_reduction(runs: &Runs) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;

    let guided = flicker_metric(&images(&runs.static_guided["base"]), &[]).unwrap();
    let plain = flicker_metric(&images(&runs.static_plain["base"]), &[]).unwrap();
    let ratio = guided / plain;
    ok &= ratio <= 0.5;
    lines.push(format!("static base {guided:.5}/{plain:.5} = {ratio:.3} (limit 0.5)"));

    let guided_frames = images(&runs.translating_guided["base"]);
    let plain_frames = images(&runs.translating_plain["base"]);
    let guided = compensated_flicker(&guided_frames, SceneMotion::Translating, TRANSLATION_PX);
    let plain = compensated_flicker(&plain_frames, SceneMotion::Translating, TRANSLATION_PX);
    let ratio = guided / plain;
    ok &= ratio <= 0.7;
    lines.push(format!(
        "translating base, motion-compensated {guided:.5}/{plain:.5} = {ratio:.3} (limit 0.7)"
    ));
    let raw = flicker_metric(&guided_frames, &[]).unwrap() / flicker_metric(&plain_frames, &[]).unwrap();
    lines.push(format!("uncompensated ratio {raw:.3}"));

    for (name, guided, plain) in [
        ("static", &runs.static_guided, &runs.static_plain),
        ("translating", &runs.translating_guided, &runs.translating_plain),
    ] {
        for layer in ["shadow", "outline"] {
            let g = flicker_metric(&images(&guided[layer]), &[]).unwrap();
            let p = flicker_metric(&images(&plain[layer]), &[]).unwrap();
            lines.push(format!("{name} {layer} {:.3}", g / p.max(f64::MIN_POSITIVE)));
        }
    }
    check(ok, lines.join("; "))
}

fn advection_fidelity() -> Outcome {
    let tparams = TemporalParams::default();
    let texture = |w: usize, h: usize| {
        RasterImage::from_fn(w, h, 1, |x, y, _| 0.5 + 0.4 * (0.7 * x as f32).sin() * (0.45 * y as f32).cos()).unwrap()
    };
    let wp = |img: &RasterImage| GuideChannel::new(GuideKind::WorldPosition, img.clone(), 1.0).unwrap();

    let still = normalized_positions(&[SceneMotion::Static.render(0)]).unwrap().remove(0);
    let prev = texture(SCENE_SIZE, SCENE_SIZE);
    let out = advect(&prev, &wp(&still), &wp(&still), &tparams).unwrap();
    let static_mae = mean_abs_diff(&out, &prev).unwrap();

    // The whole scene slides 4 px to the right (wrapping at the border).
    let shift = |img: &RasterImage| {
        let w = img.width();
        RasterImage::from_fn(w, img.height(), img.channels(), |x, y, c| img.get((x + w - 4) % w, y, c)).unwrap()
    };
    let out = advect(&prev, &wp(&still), &wp(&shift(&still)), &tparams).unwrap();
    let expected = shift(&prev);
    let border = 4;
    let (mut sum, mut n) = (0.0, 0usize);
    for y in border..SCENE_SIZE - border {
        for x in border..SCENE_SIZE - border {
            sum += (out.get(x, y, 0) as f64 - expected.get(x, y, 0) as f64).abs();
            n += 1;
        }
    }
    let shift_mae = sum / n as f64;

    check(
        static_mae <= 2.0 / 255.0 && shift_mae <= 4.0 / 255.0,
        format!(
            "static MAE {:.3}/255 (limit 2/255), 4 px translation interior MAE {:.3}/255 (limit 4/255)",
            static_mae * 255.0,
            shift_mae * 255.0
        ),
    )
}

fn exemplar_constancy(runs: &Runs) -> Outcome {
    let mut sequences = 0;
    for (shot, layers) in [
        ("static", &runs.static_guided),
        ("translating", &runs.translating_guided),
    ] {
        for (layer, frames) in layers {
            sequences += 1;
            let first = &frames[0].exemplar_hash;
            if let Some(f) = frames.iter().find(|f| &f.exemplar_hash != first) {
                return Err(format!("{shot}/{layer}: frame {} hash {} differs from {first}", f.frame_index, f.exemplar_hash));
            }
        }
    }
    Ok(format!("{sequences} sequences, exemplar hash constant over every frame"))
}

fn output_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path: PathBuf = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.ends_with(".exr") || name.ends_with(".png") {
            files.insert(name, std::fs::read(&path).unwrap());
        }
    }
    files
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let base = shot(dir.path(), SceneMotion::Translating, "single");
    let many = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4);
    let mut outputs = Vec::new();
    for (threads, name) in [(1, "single"), (many, "many")] {
        let mut s = base.clone();
        s.output = name.into();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            run_layers(&s);
            composite_shot(&s).unwrap();
        });
        outputs.push(output_files(&s.output_dir()));
    }
    let (one, n) = (&outputs[0], &outputs[1]);
    let differing: Vec<&String> = one.keys().filter(|k| n.get(*k) != one.get(*k)).collect();
    check(
        !one.is_empty() && one.len() == n.len() && differing.is_empty(),
        format!(
            "1 vs {many} threads: {} EXR/PNG files, {} differ{}",
            one.len(),
            differing.len(),
            differing.first().map_or(String::new(), |k| format!(" (first: {k})"))
        ),
    )
}

fn single_color_contract(runs: &Runs) -> Outcome {
    let outputs = runs.all().count();
    if let Some((name, f)) = runs.all().find(|(_, f)| f.b_prime.channels() != 1) {
        return Err(format!("{name} frame {} has {} channels", f.frame_index, f.b_prime.channels()));
    }
    let palette = &runs.static_shot.palette;
    let mut checked = 0;
    for id in [WALL_ID, SPHERE_ID] {
        for (layer, kind) in [("base", LayerKind::Base), ("shadow", LayerKind::Shadow)] {
            let touch = &runs.static_guided[layer][0].b_prime;
            let ids = RasterImage::filled(SCENE_SIZE, SCENE_SIZE, 1, id as f32 / 255.0).unwrap();
            let colors = palette.colors_for(layer);
            let rgb = colors[&id];
            let out = colorize(touch, &ids, colors, kind, palette.tint_for(layer)).unwrap();
            for (p, &t) in touch.data().iter().enumerate() {
                for (c, &v) in rgb.iter().enumerate() {
                    if out.color.data()[p * 3 + c] != v * t {
                        return Err(format!("{layer} id {id}: pixel {p} channel {c} is not colour x touch"));
                    }
                }
                checked += 1;
            }
            if out.alpha.data().iter().any(|&a| a != 1.0) {
                return Err(format!("{layer} is not opaque"));
            }
        }
    }
    Ok(format!(
        "{outputs} layer outputs single-channel; {checked} colorized pixels equal colour x touch exactly"
    ))
}

fn compositing_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let (dst, src, a) = (rng.random::<f32>(), rng.random::<f32>(), rng.random::<f32>());
        if BlendMode::Multiply.apply(dst, 1.0, a) != dst || BlendMode::Multiply.apply(dst, src, 0.0) != dst {
            return Err(format!("multiply identity fails at dst {dst}"));
        }
        if BlendMode::Over.apply(dst, src, 1.0) != src || BlendMode::Over.apply(dst, src, 0.0) != dst {
            return Err(format!("opaque over fails at dst {dst}, src {src}"));
        }
        if BlendMode::Screen.apply(dst, 0.0, a) != dst {
            return Err(format!("screen identity fails at dst {dst}"));
        }
    }

    let (w, h, frames) = (13, 9, 2);
    let mut palette = Palette {
        background: [rng.random(), rng.random(), rng.random()],
        ..Palette::default()
    };
    for id in 1..=3u32 {
        palette.colors.insert(id, [rng.random(), rng.random(), rng.random()]);
    }
    palette.tints.insert("ink".into(), [rng.random(), rng.random(), rng.random()]);
    let random = |rng: &mut ChaCha8Rng| RasterImage::from_fn(w, h, 1, |_, _, _| rng.random::<f32>()).unwrap();
    let ids: Vec<RasterImage> = (0..frames)
        .map(|_| RasterImage::from_fn(w, h, 1, |_, _, _| rng.random_range(1..=3u32) as f32 / 255.0).unwrap())
        .collect();
    let mut layers = Vec::new();
    for (name, kind) in [("ink", LayerKind::Outline), ("shade", LayerKind::Shadow), ("paint", LayerKind::Base)] {
        let mut spec = runs_free_spec(name, kind);
        spec.opacity = rng.random();
        let touches: Vec<RasterImage> = (0..frames).map(|_| random(&mut rng)).collect();
        layers.push((spec, touches));
    }
    let stack = LayerStack::new(layers.clone(), ids.clone()).unwrap();

    let mut worst = 0.0f64;
    for f in 0..frames {
        let got = composite_frame(&stack, f, &palette).unwrap();
        for y in 0..h {
            for x in 0..w {
                let id = (ids[f].get(x, y, 0) * 255.0).round() as u32;
                let mut px = palette.background;
                for name in ["paint", "shade", "ink"] {
                    let (spec, touches) = layers.iter().find(|(s, _)| s.name == name).unwrap();
                    let t = touches[f].get(x, y, 0);
                    for (c, v) in px.iter_mut().enumerate() {
                        *v = match spec.kind {
                            LayerKind::Base => {
                                let a = spec.opacity;
                                palette.colors[&id][c] * t * a + *v * (1.0 - a)
                            }
                            LayerKind::Shadow => *v * (1.0 - spec.opacity * (1.0 - palette.colors[&id][c] * t)),
                            LayerKind::Outline => {
                                let a = spec.opacity * t;
                                palette.tints["ink"][c] * a + *v * (1.0 - a)
                            }
                        };
                    }
                }
                for (c, v) in px.iter().enumerate() {
                    worst = worst.max((got.get(x, y, c) - v).abs() as f64);
                }
            }
        }
    }
    check(
        worst <= 1e-6,
        format!("blend identities exact over 1000 samples; random 3-layer composite max error {worst:.2e} (limit 1e-6)"),
    )
}

fn runs_free_spec(name: &str, kind: LayerKind) -> styletx::compositing::LayerSpec {
    styletx::compositing::LayerSpec {
        name: name.into(),
        kind,
        exemplar: name.into(),
        guides: vec![styletx::compositing::GuideSelection {
            kind: GuideKind::Diffuse,
            weight: 1.0,
        }],
        synthesis: SynthesisParams::default(),
        temporal: TemporalParams::default(),
        blend: kind.default_blend(),
        opacity: 1.0,
    }
}

fn world_position_normalization() -> Outcome {
    let mut pixels = 0usize;
    let mut check_sequence = |name: &str, passes: &[RasterImage], coverage: &[RasterImage]| -> Result<(), String> {
        let aabb = compute_sequence_aabb(passes, coverage).map_err(|e| format!("{name}: {e}"))?;
        for (t, (p, c)) in passes.iter().zip(coverage).enumerate() {
            let g = normalize_world_position(p, &aabb, c).unwrap();
            if g.image.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(format!("{name} frame {t}: normalized value outside [0, 1]"));
            }
            for y in 0..p.height() {
                for x in 0..p.width() {
                    if c.get(x, y, 0) < 0.5 {
                        continue;
                    }
                    pixels += 1;
                    let raw = p.pixel(x, y);
                    if !aabb.contains([raw[0], raw[1], raw[2]]) {
                        return Err(format!("{name} frame {t}: covered pixel ({x}, {y}) clamped"));
                    }
                }
            }
        }
        Ok(())
    };
    for motion in [SceneMotion::Static, SceneMotion::Translating, SceneMotion::Rotating] {
        let frames: Vec<RenderPasses> = (0..SCENE_FRAMES).map(|t| motion.render(t)).collect();
        let passes: Vec<RasterImage> = frames.iter().map(|f| f.world_position.clone()).collect();
        let coverage: Vec<RasterImage> = frames.iter().map(|f| f.coverage.clone()).collect();
        check_sequence(motion.as_str(), &passes, &coverage)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..20 {
        let (w, h) = (rng.random_range(1..12), rng.random_range(1..12));
        let frames = rng.random_range(1..5);
        let mut random = |c: usize, lo: f32, hi: f32| {
            RasterImage::from_fn(w, h, c, |_, _, _| rng.random_range(lo..hi)).unwrap()
        };
        let passes: Vec<RasterImage> = (0..frames).map(|_| random(3, -100.0, 100.0)).collect();
        let mut coverage: Vec<RasterImage> = (0..frames).map(|_| random(1, 0.0, 1.0)).collect();
        coverage[0].data_mut()[0] = 1.0;
        check_sequence(&format!("random #{i}"), &passes, &coverage)?;
    }
    Ok(format!(
        "3 synthetic shots and 20 random sequences in [0, 1]; {pixels} covered pixels inside the sequence box"
    ))
}

fn main() {
    let start = Instant::now();
    let mut traces = Traces::default();
    let mut results: Vec<(&str, Outcome)> = Vec::new();

    results.push(("1 oracle optimality", oracle_optimality(&mut traces)));
    results.push(("3 identity and crop analogies", identity_and_crop(&mut traces)));
    {
        let (a, style) = exemplar_guides(&[(GuideKind::Diffuse, 1.0), (GuideKind::Normal, 1.0)]);
        let frame = SceneMotion::Rotating.render(3);
        let b = sphere_guides(&frame, &[(GuideKind::Diffuse, 1.0), (GuideKind::Normal, 1.0)], Side::Target);
        let params = SynthesisParams {
            seed: 5,
            ..SynthesisParams::default()
        };
        traces.add("rotating_frame", &synthesize(&a, &style, &b, &params).unwrap().trace);
    }
    let runs = Runs::new();
    results.push(("2 energy monotonicity", energy_monotonicity(&traces, &runs)));
    results.push(("4 temporal noise reduction", temporal_noise_reduction(&runs)));
    results.push(("5 advection fidelity", advection_fidelity()));
    results.push(("6 exemplar constancy", exemplar_constancy(&runs)));
    results.push(("7 determinism", determinism()));
    results.push(("8 single-colour contract", single_color_contract(&runs)));
    results.push(("9 compositing algebra", compositing_algebra()));
    results.push(("10 world-position normalization", world_position_normalization()));

    results.sort_by_key(|(name, _)| name.split(' ').next().unwrap().parse::<u32>().unwrap());
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
