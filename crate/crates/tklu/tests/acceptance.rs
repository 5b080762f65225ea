//! Acceptance suite: one test per criterion, each ending with a
//! `[acceptance] ... PASS` line (visible with `--nocapture`).
//!
//! Every expected value is either frozen from an independent oracle
//! computed here (triple-loop matrix products, repeated-addition point
//! arithmetic, exhaustive scalar sweeps) or a direct structural count.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use tklu::ec::{CurveParams, CurvePoint, Scalar};
use tklu::error::Error;
use tklu::experiment::{
    run_memory_report, run_sweep, sim_pairwise_mesh, sim_path, ExperimentConfig, SweepMode,
};
use tklu::field::FieldPrime;
use tklu::group::{
    build_group, member_compute_key, rekey_on_leave, GroupOrigin, LocalTransport, MemberId,
    NodeLabel,
};
use tklu::handshake::{PairwiseHandshake, PathHandshake, SessionKey};
use tklu::key_matrix::{derive_key, KeyShare, MasterKeyMatrix};
use tklu::lifecycle::{formula_prediction, KeyStore, Network};
use tklu::sim::{LatencyModel, NodeId, Scheduler, Topology};
use tklu::wire::{
    WireContext, WireMessage, TYPE_PAIRWISE_MSG1, TYPE_PAIRWISE_MSG2, TYPE_PAIRWISE_MSG3,
    TYPE_PATH_MSG1, TYPE_PATH_MSG2, TYPE_PATH_MSG3,
};

fn pass(criterion: &str, detail: String, started: Instant) {
    println!(
        "[acceptance] {criterion}: PASS ({detail}, {:.2} s)",
        started.elapsed().as_secs_f64()
    );
}

fn shares_for(master: &MasterKeyMatrix) -> BTreeMap<NodeId, KeyShare> {
    (0..master.dimension())
        .map(|i| (i as NodeId, master.assign_share(i).unwrap()))
        .collect()
}

fn contains_bytes(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

// ---------------------------------------------------------------------------
// 1. LU symmetry suite
// ---------------------------------------------------------------------------

#[test]
fn c01_lu_symmetry_suite() {
    let started = Instant::now();
    let mut checked_pairs = 0u64;
    for q_value in [7u64, 11, 17, 251, 65537] {
        let q = FieldPrime::new(q_value).unwrap();
        for n in 1..=16usize {
            for seed in 0..100u64 {
                let m = MasterKeyMatrix::generate(n, q, seed.wrapping_mul(977) + n as u64).unwrap();
                // independent triple-loop product: L * U == K entry for entry
                for i in 0..n {
                    for j in 0..n {
                        let mut acc: u128 = 0;
                        for t in 0..n {
                            acc = (acc
                                + m.lower(i, t).value() as u128 * m.upper(t, j).value() as u128)
                                % q_value as u128;
                        }
                        assert_eq!(acc as u64, m.pool_key(i, j).value(), "q={q_value} n={n}");
                    }
                }
                let shares: Vec<KeyShare> = (0..n).map(|i| m.assign_share(i).unwrap()).collect();
                for i in 0..n {
                    for j in 0..n {
                        let kij = derive_key(&shares[i].row, &shares[j].col).unwrap();
                        let kji = derive_key(&shares[j].row, &shares[i].col).unwrap();
                        assert_eq!(kij, kji, "q={q_value} n={n} pair ({i},{j})");
                        assert_eq!(kij, m.pool_key(i, j));
                        checked_pairs += 1;
                    }
                }
            }
        }
    }
    assert!(
        started.elapsed().as_secs_f64() < 10.0,
        "criterion requires < 10 s"
    );
    pass(
        "C1 LU symmetry",
        format!("{checked_pairs} derived pairs exact"),
        started,
    );
}

// ---------------------------------------------------------------------------
// 2. Handshake agreement and single-bit tamper totality
// ---------------------------------------------------------------------------

struct Transcript(Vec<Vec<u8>>);

impl Transcript {
    fn concat(&self) -> Vec<u8> {
        self.0.concat()
    }
}

fn wire_pairwise(
    ctx: &WireContext,
    shares: &BTreeMap<NodeId, KeyShare>,
    i: NodeId,
    j: NodeId,
) -> (SessionKey, SessionKey, Transcript) {
    let (mut ini, m1) = PairwiseHandshake::initiate(&shares[&i], j).unwrap();
    let b1 = WireMessage::PairwiseMsg1(m1).encode(ctx);
    let m1 = match WireMessage::decode_expected(ctx, &b1, TYPE_PAIRWISE_MSG1).unwrap() {
        WireMessage::PairwiseMsg1(m) => m,
        _ => unreachable!(),
    };
    let (mut rsp, m2) = PairwiseHandshake::respond(&shares[&j], &m1).unwrap();
    let b2 = WireMessage::PairwiseMsg2(m2).encode(ctx);
    let m2 = match WireMessage::decode_expected(ctx, &b2, TYPE_PAIRWISE_MSG2).unwrap() {
        WireMessage::PairwiseMsg2(m) => m,
        _ => unreachable!(),
    };
    let (key_i, m3) = ini.confirm(&m2).unwrap();
    let b3 = WireMessage::PairwiseMsg3(m3).encode(ctx);
    let m3 = match WireMessage::decode_expected(ctx, &b3, TYPE_PAIRWISE_MSG3).unwrap() {
        WireMessage::PairwiseMsg3(m) => m,
        _ => unreachable!(),
    };
    let key_j = rsp.finalize(&m3).unwrap();
    (key_i, key_j, Transcript(vec![b1, b2, b3]))
}

fn wire_path(
    ctx: &WireContext,
    shares: &BTreeMap<NodeId, KeyShare>,
    i: NodeId,
    j: NodeId,
    ri: Scalar,
    rj: Scalar,
) -> (SessionKey, SessionKey, Transcript) {
    let curve = &ctx.curve;
    let (mut ini, m1) = PathHandshake::initiate_with_scalar(&shares[&i], curve, ri, j).unwrap();
    let b1 = WireMessage::PathMsg1(m1).encode(ctx);
    let m1 = match WireMessage::decode_expected(ctx, &b1, TYPE_PATH_MSG1).unwrap() {
        WireMessage::PathMsg1(m) => m,
        _ => unreachable!(),
    };
    let (mut rsp, m2) = PathHandshake::respond_with_scalar(&shares[&j], curve, rj, &m1).unwrap();
    let b2 = WireMessage::PathMsg2(m2).encode(ctx);
    let m2 = match WireMessage::decode_expected(ctx, &b2, TYPE_PATH_MSG2).unwrap() {
        WireMessage::PathMsg2(m) => m,
        _ => unreachable!(),
    };
    let (key_i, m3) = ini.confirm(&m2).unwrap();
    let b3 = WireMessage::PathMsg3(m3).encode(ctx);
    let m3 = match WireMessage::decode_expected(ctx, &b3, TYPE_PATH_MSG3).unwrap() {
        WireMessage::PathMsg3(m) => m,
        _ => unreachable!(),
    };
    let key_j = rsp.finalize(&m3).unwrap();
    (key_i, key_j, Transcript(vec![b1, b2, b3]))
}

/// A detected failure (decode error or failed verification) or, if nothing
/// tripped, the keys both endpoints walked away with.
enum TamperOutcome {
    Detected(Error),
    BothCompleted(SessionKey, SessionKey),
}

fn flip_bit(bytes: &mut [u8], bit: usize) {
    let bit = bit % (bytes.len() * 8);
    bytes[bit / 8] ^= 1 << (bit % 8);
}

fn tampered_pairwise(
    ctx: &WireContext,
    shares: &BTreeMap<NodeId, KeyShare>,
    i: NodeId,
    j: NodeId,
    target: usize,
    bit: usize,
) -> TamperOutcome {
    macro_rules! step {
        ($expr:expr) => {
            match $expr {
                Ok(value) => value,
                Err(e) => return TamperOutcome::Detected(e),
            }
        };
    }
    let (mut ini, m1) = PairwiseHandshake::initiate(&shares[&i], j).unwrap();
    let mut b1 = WireMessage::PairwiseMsg1(m1).encode(ctx);
    if target == 0 {
        flip_bit(&mut b1, bit);
    }
    let m1 = match step!(WireMessage::decode_expected(ctx, &b1, TYPE_PAIRWISE_MSG1)) {
        WireMessage::PairwiseMsg1(m) => m,
        _ => unreachable!(),
    };
    let (mut rsp, m2) = step!(PairwiseHandshake::respond(&shares[&j], &m1));
    let mut b2 = WireMessage::PairwiseMsg2(m2).encode(ctx);
    if target == 1 {
        flip_bit(&mut b2, bit);
    }
    let m2 = match step!(WireMessage::decode_expected(ctx, &b2, TYPE_PAIRWISE_MSG2)) {
        WireMessage::PairwiseMsg2(m) => m,
        _ => unreachable!(),
    };
    let (key_i, m3) = step!(ini.confirm(&m2));
    let mut b3 = WireMessage::PairwiseMsg3(m3).encode(ctx);
    if target == 2 {
        flip_bit(&mut b3, bit);
    }
    let m3 = match step!(WireMessage::decode_expected(ctx, &b3, TYPE_PAIRWISE_MSG3)) {
        WireMessage::PairwiseMsg3(m) => m,
        _ => unreachable!(),
    };
    let key_j = step!(rsp.finalize(&m3));
    TamperOutcome::BothCompleted(key_i, key_j)
}

fn tampered_path(
    ctx: &WireContext,
    shares: &BTreeMap<NodeId, KeyShare>,
    rng: &mut ChaCha20Rng,
    i: NodeId,
    j: NodeId,
    target: usize,
    bit: usize,
) -> TamperOutcome {
    macro_rules! step {
        ($expr:expr) => {
            match $expr {
                Ok(value) => value,
                Err(e) => return TamperOutcome::Detected(e),
            }
        };
    }
    let curve = &ctx.curve;
    let (mut ini, m1) = PathHandshake::initiate(&shares[&i], curve, rng, j).unwrap();
    let mut b1 = WireMessage::PathMsg1(m1).encode(ctx);
    if target == 0 {
        flip_bit(&mut b1, bit);
    }
    let m1 = match step!(WireMessage::decode_expected(ctx, &b1, TYPE_PATH_MSG1)) {
        WireMessage::PathMsg1(m) => m,
        _ => unreachable!(),
    };
    let (mut rsp, m2) = step!(PathHandshake::respond(&shares[&j], curve, rng, &m1));
    let mut b2 = WireMessage::PathMsg2(m2).encode(ctx);
    if target == 1 {
        flip_bit(&mut b2, bit);
    }
    let m2 = match step!(WireMessage::decode_expected(ctx, &b2, TYPE_PATH_MSG2)) {
        WireMessage::PathMsg2(m) => m,
        _ => unreachable!(),
    };
    let (key_i, m3) = step!(ini.confirm(&m2));
    let mut b3 = WireMessage::PathMsg3(m3).encode(ctx);
    if target == 2 {
        flip_bit(&mut b3, bit);
    }
    let m3 = match step!(WireMessage::decode_expected(ctx, &b3, TYPE_PATH_MSG3)) {
        WireMessage::PathMsg3(m) => m,
        _ => unreachable!(),
    };
    let key_j = step!(rsp.finalize(&m3));
    TamperOutcome::BothCompleted(key_i, key_j)
}

#[test]
fn c02_handshake_agreement_and_tamper_totality() {
    let started = Instant::now();
    let q = FieldPrime::new(65537).unwrap();
    let test64 = CurveParams::preset("test64").unwrap();
    let toy = CurveParams::preset("toy").unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(0xc2);

    // 1000 honest pairwise executions over the wire codec
    for trial in 0..1000u64 {
        let n = 2 + (trial % 9) as usize;
        let master = MasterKeyMatrix::generate(n, q, trial).unwrap();
        let shares = shares_for(&master);
        let i = rng.gen_range(0..n as u32);
        let j = (i + 1 + rng.gen_range(0..n as u32 - 1)) % n as u32;
        let ctx = WireContext {
            q,
            curve: toy.clone(),
        };
        let (key_i, key_j, _) = wire_pairwise(&ctx, &shares, i, j);
        assert_eq!(key_i, key_j, "pairwise trial {trial}");
    }

    // 1000 honest path executions; ephemeral scalars and key bytes must
    // never appear in the transcript
    let ctx64 = WireContext {
        q,
        curve: test64.clone(),
    };
    for trial in 0..1000u64 {
        let n = 2 + (trial % 7) as usize;
        let master = MasterKeyMatrix::generate(n, q, 10_000 + trial).unwrap();
        let shares = shares_for(&master);
        let i = rng.gen_range(0..n as u32);
        let j = (i + 1 + rng.gen_range(0..n as u32 - 1)) % n as u32;
        let ri = test64.random_scalar(&mut rng);
        let rj = test64.random_scalar(&mut rng);
        let ri_bytes = ri.encode(&test64.order);
        let rj_bytes = rj.encode(&test64.order);
        let (key_i, key_j, transcript) = wire_path(&ctx64, &shares, i, j, ri, rj);
        assert_eq!(key_i, key_j, "path trial {trial}");
        let wire = transcript.concat();
        assert!(
            !contains_bytes(&wire, &key_i.bytes),
            "key bytes leaked, trial {trial}"
        );
        assert!(
            !contains_bytes(&wire, &ri_bytes),
            "initiator scalar leaked, trial {trial}"
        );
        assert!(
            !contains_bytes(&wire, &rj_bytes),
            "responder scalar leaked, trial {trial}"
        );
    }

    // a handful of honest path runs on the 192-bit preset as well
    let p192 = CurveParams::preset("p192").unwrap();
    let ctx192 = WireContext {
        q,
        curve: p192.clone(),
    };
    for trial in 0..20u64 {
        let master = MasterKeyMatrix::generate(4, q, 30_000 + trial).unwrap();
        let shares = shares_for(&master);
        let ri = p192.random_scalar(&mut rng);
        let rj = p192.random_scalar(&mut rng);
        let (key_i, key_j, _) = wire_path(&ctx192, &shares, 0, 2, ri, rj);
        assert_eq!(key_i, key_j, "p192 trial {trial}");
    }

    // 1000 single-bit tamper trials: every one is detected as a decode
    // error or a failed verification, and no trial completes on both ends
    let mut detected_decode = 0u32;
    let mut detected_verify = 0u32;
    for trial in 0..1000u64 {
        let n = 3 + (trial % 5) as usize;
        let master = MasterKeyMatrix::generate(n, q, 20_000 + trial).unwrap();
        let shares = shares_for(&master);
        let i = 0u32;
        let j = 1 + (trial % (n as u64 - 1)) as u32;
        let target = rng.gen_range(0..3);
        let bit = rng.gen_range(0..4096);
        let outcome = if trial % 2 == 0 {
            let ctx = WireContext {
                q,
                curve: toy.clone(),
            };
            tampered_pairwise(&ctx, &shares, i, j, target, bit)
        } else {
            let curve = if trial % 4 == 1 { &toy } else { &test64 };
            let ctx = WireContext {
                q,
                curve: curve.clone(),
            };
            tampered_path(&ctx, &shares, &mut rng, i, j, target, bit)
        };
        match outcome {
            TamperOutcome::Detected(Error::Decode(_)) => detected_decode += 1,
            TamperOutcome::Detected(Error::VerifyFailed) => detected_verify += 1,
            TamperOutcome::Detected(other) => {
                panic!("trial {trial}: unexpected failure class {other:?}")
            }
            TamperOutcome::BothCompleted(a, b) => {
                panic!(
                    "trial {trial}: tampered session completed on both ends ({:?} vs {:?})",
                    a.bytes, b.bytes
                )
            }
        }
    }
    assert_eq!(detected_decode + detected_verify, 1000);
    assert!(
        detected_decode > 0 && detected_verify > 0,
        "both detection classes exercised"
    );
    assert!(
        started.elapsed().as_secs_f64() < 30.0,
        "criterion requires < 30 s"
    );
    pass(
        "C2 handshake agreement & tamper totality",
        format!("2000 honest runs agree; 1000 tampers detected ({detected_decode} decode, {detected_verify} verify)"),
        started,
    );
}

// ---------------------------------------------------------------------------
// 3. Cross-matrix authentication
// ---------------------------------------------------------------------------

#[test]
fn c03_cross_matrix_authentication() {
    let started = Instant::now();
    let q = FieldPrime::smallest_above(1 << 32).unwrap();
    let toy = CurveParams::preset("toy").unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(0xc3);
    for trial in 0..100u64 {
        let n = 4 + (trial % 4) as usize;
        let master_a = MasterKeyMatrix::generate(n, q, 2 * trial).unwrap();
        let master_b = MasterKeyMatrix::generate(n, q, 2 * trial + 1).unwrap();
        let i = rng.gen_range(0..n as u32);
        let j = (i + 1) % n as u32;
        let share_i = master_a.assign_share(i as usize).unwrap();
        let share_j = master_b.assign_share(j as usize).unwrap();

        let (mut ini, m1) = PairwiseHandshake::initiate(&share_i, j).unwrap();
        let (_, m2) = PairwiseHandshake::respond(&share_j, &m1).unwrap();
        assert_eq!(
            ini.confirm(&m2).unwrap_err(),
            Error::VerifyFailed,
            "pairwise trial {trial}"
        );

        let (mut ini, m1) = PathHandshake::initiate(&share_i, &toy, &mut rng, j).unwrap();
        let (_, m2) = PathHandshake::respond(&share_j, &toy, &mut rng, &m1).unwrap();
        assert_eq!(
            ini.confirm(&m2).unwrap_err(),
            Error::VerifyFailed,
            "path trial {trial}"
        );
    }
    pass(
        "C3 cross-matrix authentication",
        "100 trials, zero completed handshakes".into(),
        started,
    );
}

// ---------------------------------------------------------------------------
// 4. Path-key DH equality, exhaustive on the toy curve
// ---------------------------------------------------------------------------

#[test]
fn c04_path_key_dh_equality_exhaustive() {
    let started = Instant::now();
    let q = FieldPrime::new(65537).unwrap();
    let toy = CurveParams::preset("toy").unwrap();
    let ctx = WireContext {
        q,
        curve: toy.clone(),
    };
    let master = MasterKeyMatrix::generate(4, q, 0xc4).unwrap();
    let shares = shares_for(&master);
    let (i, j) = (0u32, 1u32);

    for ri in 1u64..19 {
        for rj in 1u64..19 {
            let (key_i, key_j, transcript) = wire_path(
                &ctx,
                &shares,
                i,
                j,
                Scalar::from_u64(ri, &toy.order).unwrap(),
                Scalar::from_u64(rj, &toy.order).unwrap(),
            );
            assert_eq!(key_i, key_j, "ri={ri} rj={rj}");

            // repeated-addition oracle for ri * rj * P
            let mut oracle_point = CurvePoint::Identity;
            for _ in 0..ri * rj {
                oracle_point = toy.point_add(&oracle_point, &toy.base).unwrap();
            }
            let mut payload = toy.encode_point(&oracle_point);
            payload.extend_from_slice(&i.to_be_bytes());
            payload.extend_from_slice(&j.to_be_bytes());
            let expected = *tklu::hash_tag(b"PATHKEY", &payload).as_bytes();
            assert_eq!(key_i.bytes, expected, "ri={ri} rj={rj}");

            // the key never crosses the wire
            assert!(!contains_bytes(&transcript.concat(), &key_i.bytes));

            // transcript-only attacker must solve a discrete log: of all 18
            // candidate scalars, exactly the honest one explains Q_i
            let b1 = &transcript.0[0];
            let m1 = match WireMessage::decode_expected(&ctx, b1, TYPE_PATH_MSG1).unwrap() {
                WireMessage::PathMsg1(m) => m,
                _ => unreachable!(),
            };
            let matches = (1u64..19)
                .filter(|&r| {
                    toy.scalar_mul(&Scalar::from_u64(r, &toy.order).unwrap(), &toy.base)
                        .unwrap()
                        == m1.eph
                })
                .collect::<Vec<_>>();
            assert_eq!(matches, vec![ri]);
        }
    }
    pass(
        "C4 path-key DH equality",
        "18x18 scalar pairs exhaustive".into(),
        started,
    );
}

// ---------------------------------------------------------------------------
// 5. Group key agreement and tree shape
// ---------------------------------------------------------------------------

fn group_fixture(n: u32, matrix_seed: u64) -> (BTreeMap<MemberId, KeyShare>, CurveParams) {
    let q = FieldPrime::new(65537).unwrap();
    let master = MasterKeyMatrix::generate(n as usize + 1, q, matrix_seed).unwrap();
    let shares = (1..=n)
        .map(|i| (i, master.assign_share(i as usize).unwrap()))
        .collect();
    (shares, CurveParams::preset("toy").unwrap())
}

#[test]
fn c05_group_key_agreement_and_shape() {
    let started = Instant::now();
    let mut builds = 0u32;
    for n in 1..=20u32 {
        let (shares, curve) = group_fixture(n, 0xc5 + n as u64);
        let members: Vec<MemberId> = (1..=n).collect();
        for seed in 0..50u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let outcome = build_group(
                &members,
                &curve,
                &mut rng,
                &mut LocalTransport { shares: &shares },
            )
            .unwrap();
            builds += 1;
            let keys: Vec<_> = outcome.member_keys.values().collect();
            assert_eq!(keys.len(), n as usize);
            assert!(keys.windows(2).all(|w| w[0] == w[1]), "n={n} seed={seed}");
            assert_eq!(**keys.first().unwrap(), outcome.tree.group_key());
            if n >= 2 {
                let expected_rounds = (n as f64).log2().ceil() as u32;
                assert_eq!(outcome.tree.height, expected_rounds, "n={n}");
                assert_eq!(outcome.tree.rounds.len() as u32, expected_rounds);
            }
            if n == 6 {
                // exact canonical shape: three pairs, a merge with the third
                // pair renamed, then the final merge of all six
                let r = &outcome.tree.rounds;
                let snapshot: Vec<Vec<(NodeLabel, Vec<MemberId>)>> = r
                    .iter()
                    .map(|round| round.iter().map(|g| (g.label, g.members.clone())).collect())
                    .collect();
                assert_eq!(
                    snapshot,
                    vec![
                        vec![
                            (NodeLabel::new(1, 1), vec![1, 2]),
                            (NodeLabel::new(1, 2), vec![3, 4]),
                            (NodeLabel::new(1, 3), vec![5, 6]),
                        ],
                        vec![
                            (NodeLabel::new(2, 1), vec![1, 2, 3, 4]),
                            (NodeLabel::new(2, 2), vec![5, 6]),
                        ],
                        vec![(NodeLabel::new(3, 1), vec![1, 2, 3, 4, 5, 6])],
                    ]
                );
                assert_eq!(
                    r[1][1].origin,
                    GroupOrigin::Carried {
                        from: NodeLabel::new(1, 3)
                    },
                    "the third pair is renamed, not merged"
                );
                assert_eq!(
                    r[1][0].origin,
                    GroupOrigin::Merged {
                        left: NodeLabel::new(1, 1),
                        right: NodeLabel::new(1, 2)
                    }
                );
            }
        }
    }
    pass(
        "C5 group key agreement",
        format!("{builds} builds, shapes exact"),
        started,
    );
}

// ---------------------------------------------------------------------------
// 6. Rekey on leave excludes the departed member
// ---------------------------------------------------------------------------

#[test]
fn c06_rekey_on_leave_forward_secrecy() {
    let started = Instant::now();
    // toy curve: 18 scalars, so the attacker search is literally exhaustive;
    // test64 repeats the old-secret exclusion where scalar coincidences
    // cannot occur
    for curve_name in ["toy", "test64"] {
        for (n, leaver, seed) in [(4u32, 2u32, 11u64), (5, 5, 12), (6, 6, 13), (6, 3, 14)] {
            let q = FieldPrime::new(65537).unwrap();
            let master = MasterKeyMatrix::generate(n as usize + 1, q, 0xc6 + n as u64).unwrap();
            let shares: BTreeMap<MemberId, KeyShare> = (1..=n)
                .map(|i| (i, master.assign_share(i as usize).unwrap()))
                .collect();
            let curve = CurveParams::preset(curve_name).unwrap();
            let members: Vec<MemberId> = (1..=n).collect();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let outcome = build_group(
                &members,
                &curve,
                &mut rng,
                &mut LocalTransport { shares: &shares },
            )
            .unwrap();
            let mut tree = outcome.tree;
            let old_key = tree.group_key();
            // everything the departed member held: its entry secret and the
            // node secrets on its path up to the root
            let old_entry = tree.member_entry_secret(leaver).unwrap();
            let old_root = tree.root.secret().unwrap().clone();

            let rekey = rekey_on_leave(
                &mut tree,
                leaver,
                &mut rng,
                &mut LocalTransport { shares: &shares },
            )
            .unwrap();

            // remaining members agree on a fresh epoch and key
            assert_eq!(rekey.group_key.epoch, 1);
            assert_ne!(rekey.group_key.bytes, old_key.bytes);
            let keys: Vec<_> = rekey.member_keys.values().collect();
            assert_eq!(keys.len(), n as usize - 1);
            assert!(keys.windows(2).all(|w| w[0] == w[1]));

            // the departed member's old secrets plus the new public
            // broadcasts reproduce nothing from any entry position
            let view = tree.public_view();
            for &m in &tree.members {
                let true_entry = tree.member_entry_secret(m).unwrap();
                for stale in [&old_entry, &old_root] {
                    assert_ne!(
                        true_entry.value(),
                        stale.value(),
                        "{curve_name} n={n} leaver={leaver}: stale secret equals member {m}'s entry"
                    );
                    let derived = member_compute_key(&view, &curve, m, stale).unwrap();
                    assert_ne!(
                        derived.bytes, rekey.group_key.bytes,
                        "{curve_name} n={n} leaver={leaver}: stale secret reproduced the key at {m}"
                    );
                }
            }

            // exhaustive discrete log on the toy curve: of all 18 candidate
            // scalars, exactly the sponsor's true secret explains its new
            // blinded key, and it is none of the leaver's old secrets
            if curve_name == "toy" {
                let sponsor_entry = tree.member_entry_secret(rekey.sponsor).unwrap();
                let sponsor_blinded = curve.scalar_mul(&sponsor_entry, &curve.base).unwrap();
                let matches: Vec<u64> = (1u64..19)
                    .filter(|&s| {
                        let candidate = Scalar::from_u64(s, &curve.order).unwrap();
                        curve.scalar_mul(&candidate, &curve.base).unwrap() == sponsor_blinded
                    })
                    .collect();
                assert_eq!(matches.len(), 1, "discrete log is unique");
                assert_eq!(
                    num_bigint::BigUint::from(matches[0]),
                    *sponsor_entry.value(),
                    "the unique solution is the sponsor's secret"
                );
                for stale in [&old_entry, &old_root] {
                    assert_ne!(num_bigint::BigUint::from(matches[0]), *stale.value());
                }
            }
        }
    }
    pass(
        "C6 rekey on leave",
        "old secrets excluded; sponsor DL unique over all 18 scalars".into(),
        started,
    );
}

// ---------------------------------------------------------------------------
// 7. Message counting
// ---------------------------------------------------------------------------

#[test]
fn c07_message_counting() {
    let started = Instant::now();
    let q = FieldPrime::new(65537).unwrap();
    let toy = CurveParams::preset("toy").unwrap();
    let ctx = WireContext { q, curve: toy };

    // full-mesh pairwise: exactly 3 * n * (n - 1) / 2 protocol messages
    for n in 2..=20u32 {
        let topo = Topology::generate(n as usize, std::f64::consts::SQRT_2, 7 + n as u64).unwrap();
        let master = MasterKeyMatrix::generate(n as usize, q, n as u64).unwrap();
        let shares = shares_for(&master);
        let mut sched = Scheduler::new(LatencyModel::mote());
        sim_pairwise_mesh(&mut sched, &topo, &ctx, &shares, SweepMode::Serial).unwrap();
        let trace = sched.into_trace();
        let pairs = (n * (n - 1) / 2) as u64;
        assert_eq!(trace.messages, 3 * pairs, "n={n}");
        // all-in-range topology: one hop per message
        assert_eq!(trace.link_transmissions, trace.messages, "n={n}");
        let (messages, links, _) = trace.recount();
        assert_eq!(
            (trace.messages, trace.link_transmissions),
            (messages, links)
        );
    }

    // path establishment over h hops: 3 end-to-end messages, 3h link
    // transmissions, no abort in honest runs
    for h in 1..=6u32 {
        let positions: Vec<(f64, f64)> = (0..=h).map(|k| (0.1 * k as f64, 0.0)).collect();
        let topo = Topology::from_positions(positions, 0.11).unwrap();
        let master = MasterKeyMatrix::generate(h as usize + 1, q, h as u64).unwrap();
        let shares = shares_for(&master);
        let mut rng = ChaCha20Rng::seed_from_u64(h as u64);
        let mut sched = Scheduler::new(LatencyModel::mote());
        let (key_s, key_t) = sim_path(&mut sched, &topo, &ctx, &shares, &mut rng, 0, h).unwrap();
        assert_eq!(key_s, key_t);
        let trace = sched.into_trace();
        assert_eq!(trace.messages, 3, "h={h}");
        assert_eq!(trace.link_transmissions, 3 * h as u64, "h={h}");
        assert!(trace
            .events
            .iter()
            .all(|e| e.msg_type != tklu::wire::TYPE_ABORT));
    }

    // a failing path run (shares from different pools) adds exactly the
    // abort broadcast
    {
        let positions: Vec<(f64, f64)> = (0..3).map(|k| (0.1 * k as f64, 0.0)).collect();
        let topo = Topology::from_positions(positions, 0.11).unwrap();
        let master_a = MasterKeyMatrix::generate(3, q, 51).unwrap();
        let master_b = MasterKeyMatrix::generate(3, q, 52).unwrap();
        let mut shares = shares_for(&master_a);
        shares.insert(2, master_b.assign_share(2).unwrap());
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let mut sched = Scheduler::new(LatencyModel::mote());
        let outcome = sim_path(&mut sched, &topo, &ctx, &shares, &mut rng, 0, 2);
        assert_eq!(outcome.unwrap_err(), Error::VerifyFailed);
        let trace = sched.into_trace();
        assert_eq!(trace.messages, 3, "msg1, msg2, abort");
        assert_eq!(
            trace.events.last().map(|e| e.msg_type),
            Some(tklu::wire::TYPE_ABORT)
        );
    }
    pass(
        "C7 message counting",
        "mesh 3n(n-1)/2 and path 3 msgs / 3h links".into(),
        started,
    );
}

// ---------------------------------------------------------------------------
// 8. Memory formula
// ---------------------------------------------------------------------------

#[test]
fn c08_memory_formula() {
    let started = Instant::now();
    // the headline prediction: 40 neighbors, group of 80 -> 47 keys
    assert_eq!(formula_prediction(40, 80), 47);
    let config = ExperimentConfig {
        nodes: 12,
        group_size: 4,
        radio_range: 0.55,
        seed_topology: 4242,
        curve: "toy".to_string(),
        ..ExperimentConfig::default()
    };
    let report = run_memory_report(&config).unwrap();
    assert_eq!(report.report.headline_prediction, 47);
    assert!(report.render().contains("k=40 group=80 -> 47 keys"));

    // 12-node networks: per-node pairwise + group counts equal the
    // prediction exactly, across seeds and group sizes
    for (seed, group_size) in [(4242u64, 4u32), (7, 3), (99, 6), (2024, 4)] {
        let config = ExperimentConfig {
            nodes: 12,
            group_size,
            radio_range: 0.6,
            seed_topology: seed,
            curve: "toy".to_string(),
            ..ExperimentConfig::default()
        };
        let report = run_memory_report(&config).unwrap();
        assert_eq!(report.report.rows.len(), 12);
        for row in &report.report.rows {
            assert_eq!(row.pairwise, row.neighbors, "seed={seed} node={}", row.node);
            assert_eq!(
                (row.pairwise + row.group) as u32,
                row.predicted,
                "seed={seed} group_size={group_size} node={}",
                row.node
            );
        }
        assert!(report.verdict_ok());
    }
    pass(
        "C8 memory formula",
        "prediction 47 printed; 12-node counts exact".into(),
        started,
    );
}

// ---------------------------------------------------------------------------
// 9. Revocation purity
// ---------------------------------------------------------------------------

#[test]
fn c09_revocation_purity() {
    let started = Instant::now();
    let q = FieldPrime::new(65537).unwrap();
    // the 64-bit curve keeps rekeyed root scalars collision-free, so
    // "key changed" is meaningful in every scenario
    let curve = CurveParams::preset("test64").unwrap();
    for seed in 0..50u64 {
        let n = 8 + (seed % 7) as usize;
        let group_size = 3 + (seed % 3) as usize;
        let topo = Topology::generate(n, 0.6, 0xc9_0000 + seed).unwrap();
        let mut path_pairs: Vec<(NodeId, NodeId)> = topo
            .pairs_at_distance(2)
            .into_iter()
            .map(|(s, t, _)| (s, t))
            .collect();
        path_pairs.truncate(6);
        let mut net = Network::establish(topo, q, &curve, group_size, &path_pairs, seed).unwrap();
        let victim = (seed % n as u64) as NodeId;
        let before: Vec<KeyStore> = net.stores.clone();
        let old_groups: Vec<(bool, u32, [u8; 32])> = net
            .groups
            .iter()
            .map(|g| {
                (
                    g.tree.members.contains(&victim),
                    g.tree.epoch,
                    g.tree.group_key().bytes,
                )
            })
            .collect();

        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xfeed);
        let report = net.revoke(victim, &mut rng).unwrap();
        // the sink originates (it does not "receive"); the victim is not a
        // survivor
        let expected_reach = if victim == net.sink { n - 1 } else { n - 2 };
        assert_eq!(
            report.broadcast_reached, expected_reach,
            "seed={seed}: flood reach"
        );

        // report accuracy: counts recomputed independently from the
        // pre-revocation snapshot
        let snapshot_pairwise = before
            .iter()
            .filter(|s| s.owner != victim && s.pairwise_entries().contains_key(&victim))
            .count();
        let snapshot_path = before
            .iter()
            .filter(|s| s.owner != victim && s.path_entries().contains_key(&victim))
            .count();
        let snapshot_groups = old_groups
            .iter()
            .filter(|(contained, _, _)| *contained)
            .count();
        assert_eq!(report.pairwise_removed, snapshot_pairwise, "seed={seed}");
        assert_eq!(report.path_removed, snapshot_path, "seed={seed}");
        // singleton groups dissolve without a rekey epoch
        assert!(
            report.groups_rekeyed.len() <= snapshot_groups,
            "seed={seed}"
        );
        let dissolved = net
            .groups
            .iter()
            .filter(|g| g.tree.members.is_empty())
            .count();
        assert_eq!(
            report.groups_rekeyed.len() + dissolved,
            snapshot_groups,
            "seed={seed}"
        );

        // purity: zero surviving entries reference the victim
        for u in net.surviving() {
            assert!(
                !net.stores[u as usize].references(victim),
                "seed={seed}: node {u} still references {victim}"
            );
        }

        // non-disturbance: everything not involving the victim is
        // byte-identical
        for u in net.surviving() {
            let (pre, post) = (&before[u as usize], &net.stores[u as usize]);
            for (peer, bytes) in pre.pairwise_entries() {
                if *peer != victim {
                    assert_eq!(
                        post.pairwise_entries().get(peer),
                        Some(bytes),
                        "seed={seed}"
                    );
                }
            }
            for (peer, bytes) in pre.path_entries() {
                if *peer != victim {
                    assert_eq!(post.path_entries().get(peer), Some(bytes), "seed={seed}");
                }
            }
            for (id, entry) in pre.group_entries() {
                if !entry.members.contains(&victim) {
                    assert_eq!(post.group_entries().get(id), Some(entry), "seed={seed}");
                }
            }
        }

        // every group that contained the victim changed epoch and key, and
        // its remaining members agree; every other group is untouched
        for (g, (contained, old_epoch, old_bytes)) in net.groups.iter().zip(&old_groups) {
            if *contained && !g.tree.members.is_empty() {
                assert_eq!(g.tree.epoch, old_epoch + 1, "seed={seed}");
                assert_ne!(g.tree.group_key().bytes, *old_bytes, "seed={seed}");
                let keys: Vec<_> = g.member_keys.values().collect();
                assert!(keys.windows(2).all(|w| w[0] == w[1]), "seed={seed}");
            } else if !*contained {
                assert_eq!(g.tree.epoch, *old_epoch);
                assert_eq!(g.tree.group_key().bytes, *old_bytes);
            }
        }
    }
    pass(
        "C9 revocation purity",
        "50 randomized scenarios audited".into(),
        started,
    );
}

// ---------------------------------------------------------------------------
// 10. Sweep determinism and timing trend
// ---------------------------------------------------------------------------

#[test]
fn c10_sweep_determinism_and_trend() {
    let started = Instant::now();
    let config = ExperimentConfig {
        range: (2, 20),
        ..ExperimentConfig::default()
    };
    assert_eq!(config.latency_preset, "mote", "default latency preset");
    let first = run_sweep(&config).unwrap();
    let second = run_sweep(&config).unwrap();
    assert_eq!(
        first.render(),
        second.render(),
        "byte-identical CSV across runs"
    );

    for w in first.rows.windows(2) {
        assert!(
            w[1].pairwise_total_s >= w[0].pairwise_total_s,
            "pairwise total time nondecreasing: n={} {} -> n={} {}",
            w[0].nodes,
            w[0].pairwise_total_s,
            w[1].nodes,
            w[1].pairwise_total_s
        );
    }
    assert_eq!(first.rows.len(), 19);
    // a two-member group reduces to a single pairwise exchange
    assert_eq!(first.rows[0].group_msgs, 3);
    assert!((first.rows[0].group_total_s - first.rows[0].pairwise_total_s).abs() < 1e-9);
    assert!(
        started.elapsed().as_secs_f64() < 120.0,
        "the suite must finish within two minutes; this is its slowest test"
    );
    pass(
        "C10 sweep determinism & trend",
        "19 rows reproduced byte-identically".into(),
        started,
    );
}
