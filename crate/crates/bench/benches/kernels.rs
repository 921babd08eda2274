use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::rngs::StdRng;
use rand::SeedableRng;
use trotter_bound::fciqmc::{step, StepParams, WalkerStore};
use trotter_bound::hamiltonians::{build_extended_hubbard_1d, build_ppp_acene};
use trotter_bound::{build_sector_matrix, CommutatorEngine, Determinant, Engine, Mode, OperatorKind, SectorSpec};

fn connections(c: &mut Criterion) {
    let h = build_ppp_acene(2).unwrap();
    let det = Determinant::from_orbitals((0..10).map(|i| 2 * (i / 2) + i % 2));
    for kind in [OperatorKind::Vtv, OperatorKind::Vtt] {
        let e = Engine::build(&h, kind).unwrap();
        c.bench_function(&format!("connections/{}/napthalene", kind.label()), |b| {
            b.iter(|| {
                let mut s = 0.0;
                e.for_each_connection(&e.prepare(black_box(&det)), |_, a| s += a.abs());
                s
            })
        });
        let mut rng = StdRng::seed_from_u64(1);
        c.bench_function(&format!("sample/{}/napthalene", kind.label()), |b| b.iter(|| e.sample(black_box(&det), &mut rng)));
    }
}

fn matvec(c: &mut Criterion) {
    let h = build_extended_hubbard_1d(10, 1.0, 4.0, 2.0, true).unwrap();
    let e = Engine::build(&h, OperatorKind::Vtt).unwrap();
    let m = build_sector_matrix(&e, SectorSpec::new(5, 5), false).unwrap();
    let x = vec![1.0; m.dim()];
    let mut y = vec![0.0; m.dim()];
    c.bench_function("matvec/vtt/hubbard10", |b| b.iter(|| m.matvec(black_box(&x), &mut y)));
}

fn fciqmc_step(c: &mut Criterion) {
    let h = build_ppp_acene(2).unwrap();
    let e = Engine::build(&h, OperatorKind::Vtt).unwrap();
    let det = Determinant::from_orbitals(0..10);
    let base = WalkerStore::single(&e, Mode::SignFree, det, 1000.0);
    let params = StepParams { dt: 1e-4, shift: 0.0, mode: Mode::SignFree, seed: 3, iteration: 0, parallel: false };
    c.bench_function("step/vtt/napthalene/1e3", |b| {
        b.iter_batched(|| base.clone(), |mut s| step(&mut s, &e, &params), criterion::BatchSize::SmallInput)
    });
}

criterion_group!(benches, connections, matvec, fciqmc_step);
criterion_main!(benches);
