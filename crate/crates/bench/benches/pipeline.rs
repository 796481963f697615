use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use osr3d_bench::{cube_cloud, scores, sphere_points};
use osr3d_core::diffcore::Tape;
use osr3d_core::evalkit::{auroc, fpr95};
use osr3d_core::hull::convex_hull;
use osr3d_core::visibility::{hidden_point_removal, DEFAULT_FLIP_FACTOR};
use osr3d_core::{EncoderConfig, Model};

fn encoder(c: &mut Criterion) {
    let model = Model::new(
        EncoderConfig { point_widths: vec![16, 32, 64], feature_dim: 32, num_classes: 8 },
        0,
    )
    .unwrap();
    let cloud = cube_cloud(256, 1);
    c.bench_function("encode_forward_256", |b| b.iter(|| model.infer(&cloud).unwrap()));
    c.bench_function("encode_forward_backward_256", |b| {
        b.iter_batched(
            Tape::new,
            |mut tape| {
                let fwd = model.forward(&mut tape, &cloud).unwrap();
                let loss = tape.pick(fwd.logits, 0).unwrap();
                tape.backward(loss).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

fn geometry(c: &mut Criterion) {
    let pts = sphere_points(500, 2);
    c.bench_function("convex_hull_500", |b| b.iter(|| convex_hull(&pts).unwrap()));
    c.bench_function("hidden_point_removal_500", |b| {
        b.iter(|| hidden_point_removal(&pts, [3.0, 0.0, 0.0], DEFAULT_FLIP_FACTOR).unwrap())
    });
}

fn metrics(c: &mut Criterion) {
    let (s, k) = scores(10_000, 3);
    let known: Vec<f64> = s.iter().zip(&k).filter(|(_, &k)| k).map(|(s, _)| *s).collect();
    let unknown: Vec<f64> = s.iter().zip(&k).filter(|(_, &k)| !k).map(|(s, _)| *s).collect();
    c.bench_function("auroc_10k", |b| b.iter(|| auroc(&known, &unknown).unwrap()));
    c.bench_function("fpr95_10k", |b| b.iter(|| fpr95(&known, &unknown).unwrap()));
}

criterion_group!(benches, encoder, geometry, metrics);
criterion_main!(benches);
