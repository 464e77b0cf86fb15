//! Full synthesis of one sphere frame against the lit-sphere exemplar.
//!
//! With the `parallel` feature the same run is timed on a one-thread pool
//! and on the default pool. Built with `--no-default-features` only the
//! sequential path is timed.

use criterion::{criterion_group, criterion_main, Criterion};

use styletx::guides::{assemble_guide_set, prepare_pass, GuideKind, GuideSet, Side};
use styletx::synthesis::{synthesize, SynthesisParams};
use styletx::synthetic::{lit_sphere_exemplar, SceneMotion};
use styletx::RasterImage;

struct Inputs {
    a: GuideSet,
    style: RasterImage,
    b: GuideSet,
    params: SynthesisParams,
}

fn inputs() -> Inputs {
    let ex = lit_sphere_exemplar(7);
    let frame = SceneMotion::Static.render(0);
    let kinds = [(GuideKind::Diffuse, 1.0f32), (GuideKind::Normal, 1.0)];
    let a = assemble_guide_set(
        kinds.iter().map(|&(k, w)| (k, ex.guide(k).unwrap(), w)).collect(),
        Side::Exemplar,
    )
    .unwrap();
    let b = assemble_guide_set(
        kinds
            .iter()
            .map(|&(k, w)| (k, prepare_pass(k, frame.pass(k).unwrap()), w))
            .collect(),
        Side::Target,
    )
    .unwrap();
    Inputs {
        a,
        style: ex.base,
        b,
        params: SynthesisParams { seed: 1, ..SynthesisParams::default() },
    }
}

fn run(inputs: &Inputs) -> RasterImage {
    synthesize(&inputs.a, &inputs.style, &inputs.b, &inputs.params).unwrap().image
}

#[cfg(feature = "parallel")]
fn bench(c: &mut Criterion) {
    let inputs = inputs();
    let mut group = c.benchmark_group("synthesize_64px");
    group.sample_size(10);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    group.bench_function("sequential", |b| b.iter(|| single.install(|| run(&inputs))));
    let label = format!("parallel_{}_threads", rayon::current_num_threads());
    group.bench_function(label, |b| b.iter(|| run(&inputs)));
    group.finish();
}

#[cfg(not(feature = "parallel"))]
fn bench(c: &mut Criterion) {
    let inputs = inputs();
    let mut group = c.benchmark_group("synthesize_64px");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| run(&inputs)));
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
