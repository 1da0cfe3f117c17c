//! Dense prediction versus per-window evaluation with identical weights.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use texturefuse::{build, BuildOptions, NetKind, Network, SlidingWindowOracle, Tensor};

fn compare(c: &mut Criterion, kind: NetKind, divisor: usize, shapes: &[[usize; 3]]) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let spec = build(kind, &BuildOptions::scaled(divisor, 69)).expect("valid network");
    let net = Network::<f32>::new_random(spec, &mut rng).expect("network");
    let oracle = SlidingWindowOracle::new(&net);
    let mut group = c.benchmark_group(format!("{}-div{divisor}", kind.name()));
    group.sample_size(10);
    for &shape in shapes {
        let input = Tensor::uniform(shape.to_vec(), 0.0, 1.0, &mut rng);
        let label = format!("{}x{}x{}", shape[0], shape[1], shape[2]);
        group.bench_with_input(BenchmarkId::new("dense", &label), &input, |b, x| {
            b.iter(|| net.forward(x).expect("forward"))
        });
        group.bench_with_input(BenchmarkId::new("sliding", &label), &input, |b, x| {
            b.iter(|| oracle.predict(x).expect("sliding"))
        });
    }
    group.finish();
}

fn haptic(c: &mut Criterion) {
    compare(c, NetKind::Haptic, 1, &[[1, 50, 192], [1, 50, 400], [1, 50, 800]]);
}

fn visual(c: &mut Criterion) {
    compare(c, NetKind::Visual, 4, &[[3, 224, 224], [3, 384, 384]]);
    compare(c, NetKind::VisualTcnn, 4, &[[3, 224, 224], [3, 384, 384]]);
}

criterion_group!(benches, haptic, visual);
criterion_main!(benches);
