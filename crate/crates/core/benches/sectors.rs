//! Sequential against rayon-parallel execution on the d=2, L=1 workloads.
//!
//! Build with `--no-default-features` to measure the plain-loop fallback;
//! `Exec::Parallel` then degrades to sequential as well.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fluxlab_core::experiments::theorem_sweep;
use fluxlab_core::model::{build_full, ModelParams};
use fluxlab_core::spectral::{diagonalize, DiagOptions, VectorPolicy};
use fluxlab_core::transforms::verify_all;
use fluxlab_core::{Exec, GaugeField, Lattice};
use std::hint::black_box;
use std::sync::Arc;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn spectrum(c: &mut Criterion) {
    let lat = Arc::new(Lattice::new(2, 1).unwrap());
    let bundle = build_full(&lat, &ModelParams::default(), &GaugeField::random(&lat, 1));
    let mut g = c.benchmark_group("diagonalize");
    for (name, exec) in MODES {
        for symmetry in [false, true] {
            let opts = DiagOptions {
                exec,
                symmetry,
                vectors: VectorPolicy::None,
            };
            let id = BenchmarkId::new(name, if symmetry { "symmetric" } else { "direct" });
            g.bench_function(id, |b| b.iter(|| diagonalize(&lat, black_box(&bundle), opts).unwrap()));
        }
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let lat = Arc::new(Lattice::new(2, 1).unwrap());
    let p = ModelParams::default();
    let mut g = c.benchmark_group("theorem_sweep_16");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| theorem_sweep(&lat, &p, 16, &[0.5, 2.0, 8.0], 3, exec).unwrap()));
    }
    g.finish();
}

fn identities(c: &mut Criterion) {
    let lat = Arc::new(Lattice::new(2, 1).unwrap());
    let p = ModelParams::default();
    let field = GaugeField::random(&lat, 5);
    let mut g = c.benchmark_group("verify_all");
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| verify_all(&lat, &p, black_box(&field), exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, spectrum, sweep, identities);
criterion_main!(benches);
