use std::hint::black_box;

use colcirc::codec;
use colcirc_bench::column_for;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use serde_json::json;

const SCHEMES: [&str; 8] = ["run.rle", "run.rpe", "dict", "dict.monotone", "cascade", "for", "delta", "delta.patched"];

fn roundtrip(c: &mut Criterion) {
    let n = 1 << 16;
    let params = json!({});
    for id in SCHEMES {
        let col = column_for(id, n);
        let inst = codec::encode_column(id, &params, &col).unwrap();
        let mut g = c.benchmark_group(id);
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::new("encode", n), &col, |b, col| {
            b.iter(|| codec::encode_column(id, &params, black_box(col)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("decode", n), &inst, |b, i| {
            b.iter(|| codec::decode(black_box(i)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("verify", n), &inst, |b, i| b.iter(|| codec::verify(black_box(i))));
        g.finish();
    }
}

criterion_group!(benches, roundtrip);
criterion_main!(benches);
