use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dtc_bench::{can, chord};
use dtc_core::baselines::{alm_broadcast, simple_flood};
use dtc_core::dtc::{span_tree, AreaSpec, FaultModel, Overlay};
use dtc_core::prefix::{PrefixCodec, SplitFactor};
use dtc_core::{NodeId, SimRng};

fn spanning(c: &mut Criterion) {
    let none = FaultModel::none();
    let mut group = c.benchmark_group("full_broadcast");
    group.sample_size(20);
    for d in [2, 10] {
        let net = can(2000, d);
        let area = AreaSpec::whole_space(d);
        group.bench_with_input(BenchmarkId::new("dtc_can", d), &net, |b, net| {
            b.iter(|| span_tree(Overlay::Can(net), NodeId(0), &area, &none).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("alm", d), &net, |b, net| {
            b.iter(|| alm_broadcast(net, NodeId(0), &none).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("flood", d), &net, |b, net| {
            b.iter(|| simple_flood(Overlay::Can(net), NodeId(0), &none).unwrap())
        });
    }
    let ring = chord(2000);
    let area = AreaSpec::full_ring(ring.ring());
    group.bench_function("dtc_chord", |b| {
        b.iter(|| span_tree(Overlay::Chord(&ring), NodeId(0), &area, &none).unwrap())
    });
    group.finish();
}

fn building(c: &mut Criterion) {
    let mut group = c.benchmark_group("build");
    group.sample_size(10);
    group.bench_function("can_2000_d10", |b| b.iter(|| can(2000, 10)));
    group.bench_function("chord_2000", |b| b.iter(|| chord(2000)));
    group.finish();
}

fn encoding(c: &mut Criterion) {
    let keys = dtc_core::experiments::random_keys(1000, &mut SimRng::new(1));
    for factor in [SplitFactor::Half, SplitFactor::One, SplitFactor::Three] {
        let codec = PrefixCodec::new(factor);
        c.bench_function(&format!("key_to_point/{factor}"), |b| {
            b.iter(|| {
                keys.iter()
                    .map(|k| codec.key_to_point(k, 2).unwrap())
                    .collect::<Vec<_>>()
            })
        });
    }
}

criterion_group!(benches, spanning, building, encoding);
criterion_main!(benches);
