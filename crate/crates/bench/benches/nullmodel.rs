use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use interbank_bench::busiest_day;
use interbank_core::nullmodel::{generate, RewireConfig};
use interbank_core::{MarketPreset, NullModelKind};

fn null_models(c: &mut Criterion) {
    let fx = busiest_day(MarketPreset::like_2011(), 20);
    let mut group = c.benchmark_group("null_model");
    for kind in NullModelKind::ALL {
        group.bench_function(BenchmarkId::from_parameter(kind), |b| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                generate(kind, &fx.network, &RewireConfig { seed, ..RewireConfig::default() }).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, null_models);
criterion_main!(benches);
