use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use tklu::ec::CurveParams;
use tklu::experiment::{run_sweep, ExperimentConfig};
use tklu::field::FieldPrime;
use tklu::group::{build_group, LocalTransport, MemberId};
use tklu::key_matrix::{derive_key, KeyShare, MasterKeyMatrix};
use tklu::lifecycle::{run_pairwise, run_path};

fn shares_for(n: usize, q: FieldPrime) -> BTreeMap<MemberId, KeyShare> {
    let master = MasterKeyMatrix::generate(n, q, 7).unwrap();
    (0..n)
        .map(|i| (i as MemberId, master.assign_share(i).unwrap()))
        .collect()
}

fn bench_matrix(c: &mut Criterion) {
    let q = FieldPrime::new(65537).unwrap();
    c.bench_function("master_matrix_generate_n64", |b| {
        b.iter(|| MasterKeyMatrix::generate(64, q, 3).unwrap())
    });
    let master = MasterKeyMatrix::generate(64, q, 3).unwrap();
    let a = master.assign_share(5).unwrap();
    let bshare = master.assign_share(41).unwrap();
    c.bench_function("derive_key_n64", |b| {
        b.iter(|| derive_key(&a.row, &bshare.col).unwrap())
    });
}

fn bench_handshakes(c: &mut Criterion) {
    let q = FieldPrime::new(65537).unwrap();
    let shares = shares_for(16, q);
    c.bench_function("pairwise_handshake", |b| {
        b.iter(|| run_pairwise(&shares[&0], &shares[&1]).unwrap())
    });
    for name in ["test64", "p192"] {
        let curve = CurveParams::preset(name).unwrap();
        c.bench_function(&format!("path_handshake_{name}"), |b| {
            b.iter_batched(
                || ChaCha20Rng::seed_from_u64(11),
                |mut rng| run_path(&shares[&0], &shares[&3], &curve, &mut rng).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
}

fn bench_group(c: &mut Criterion) {
    let q = FieldPrime::new(65537).unwrap();
    let shares = shares_for(16, q);
    let members: Vec<MemberId> = (0..16).collect();
    let curve = CurveParams::preset("test64").unwrap();
    c.bench_function("group_build_n16_test64", |b| {
        b.iter_batched(
            || ChaCha20Rng::seed_from_u64(5),
            |mut rng| {
                build_group(
                    &members,
                    &curve,
                    &mut rng,
                    &mut LocalTransport { shares: &shares },
                )
                .unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_sweep(c: &mut Criterion) {
    let config = ExperimentConfig {
        range: (8, 8),
        curve: "test64".to_string(),
        ..ExperimentConfig::default()
    };
    c.bench_function("sweep_single_row_n8", |b| {
        b.iter(|| run_sweep(&config).unwrap())
    });
}

criterion_group!(
    benches,
    bench_matrix,
    bench_handshakes,
    bench_group,
    bench_sweep
);
criterion_main!(benches);
