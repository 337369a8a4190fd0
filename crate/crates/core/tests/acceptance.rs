//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::Digest;
use spx_batch::banksim::{count_conflicts, node_trace, reduction_trace, Op};
use spx_batch::batchgraph::{build_graphs, replay_check, BatchInstance, LaunchOptions, NodeId, NodeKind};
use spx_batch::config::TuningEntry;
use spx_batch::sigcore::merkle::keypair_address;
use spx_batch::sigcore::wots::wots_gen_leaf;
use spx_batch::sigcore::{keygen, keygen_random, sign_oracle, verify, Signer, SignerConfig};
use spx_batch::thash::sha256::{self, compress_baseline, compress_tuned, count_compressions};
use spx_batch::thash::{HashBackend, HashCtx};
use spx_batch::tuner::{occupancy, padding_solve, tree_tune, OccupancyInput, PaddingScheme, TuneInput};
use spx_batch::ParamSetId;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn c1_tuner() -> Outcome {
    let start = Instant::now();
    let mut got = Vec::new();
    for (id, lanes, fused, util) in [(ParamSetId::S128f, 704, 3, 0.6875), (ParamSetId::S192f, 768, 2, 0.75)] {
        let best = tree_tune(&TuneInput::new(id.derived())).map_err(|e| e.to_string())?.best;
        let row = (best.lanes_per_set, best.sets_fused, best.thread_util, best.scratch_util);
        check!(row == (lanes, fused, util, util), "{id}: got {row:?}");
        got.push(format!("{id} T*={lanes} F*={fused} U={util}"));
    }
    let secs = start.elapsed().as_secs_f64();
    check!(secs < 1.0, "took {secs:.3}s");
    Ok(format!("{} in {:.1}ms", got.join(", "), secs * 1e3))
}

fn c2_sizes() -> Outcome {
    let mut got = Vec::new();
    for (id, expected) in [(ParamSetId::S128f, 17088), (ParamSetId::S192f, 35664), (ParamSetId::S256f, 49856)] {
        let p = id.params();
        let wots_len = 2 * p.n + 3;
        let by_formula = p.n + p.k * (p.log_t + 1) * p.n + p.d * (wots_len + p.h / p.d) * p.n;
        let derived = id.derived().sig_bytes;
        let (_, sk) = keygen(id, &vec![1u8; 3 * p.n]).map_err(|e| e.to_string())?;
        let sig = sign_oracle(&sk, b"size", None).map_err(|e| e.to_string())?;
        let counted = sig.as_bytes().iter().count();
        let segments = sig.randomizer().len()
            + sig.fors_part().len()
            + (0..p.d).map(|l| sig.ht_layer(l).0.len() + sig.ht_layer(l).1.len()).sum::<usize>();
        check!(
            [derived, by_formula, counted, segments] == [expected; 4],
            "{id}: derived {derived}, formula {by_formula}, emitted {counted}, segments {segments}"
        );
        got.push(format!("{id}={expected}"));
    }
    Ok(got.join(" "))
}

fn c3_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut compared = 0usize;
    for id in ParamSetId::ALL {
        let mut configs = Vec::new();
        let relax_modes: &[bool] = if id == ParamSetId::S256f { &[true, false] } else { &[false] };
        for &relax in relax_modes {
            let mut input = TuneInput::new(id.derived());
            input.relax = relax;
            let entry = TuningEntry::from_tuning(&input).map_err(|e| e.to_string())?;
            for workers in [1, 2, 8] {
                let cfg = SignerConfig { workers, ..entry.signer_config(id) };
                configs.push(Signer::new(cfg).map_err(|e| e.to_string())?);
            }
        }
        for pair in 0..100 {
            let (_, sk) = keygen_random(id, &mut rng);
            let len = rng.gen_range(0..128);
            let msg: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let expected = sign_oracle(&sk, &msg, None).map_err(|e| e.to_string())?;
            for signer in &configs {
                let sig = signer.sign(&sk, &msg, None).map_err(|e| e.to_string())?;
                let c = signer.config();
                check!(
                    sig == expected,
                    "{id} pair {pair}: N={} F={} relax={} W={} differs from oracle",
                    c.trees_per_set,
                    c.sets_fused,
                    c.relax,
                    c.workers
                );
                compared += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check!(secs < 300.0, "took {secs:.0}s");
    Ok(format!("{compared} parallel signatures identical to the oracle in {secs:.0}s"))
}

fn c4_round_trip_and_corruption() -> Outcome {
    for id in ParamSetId::ALL {
        let (pk, sk) = keygen(id, &vec![7u8; 3 * id.params().n]).map_err(|e| e.to_string())?;
        let signer = Signer::new(SignerConfig::tuned(id).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let sig = signer.sign(&sk, b"round trip", None).map_err(|e| e.to_string())?;
        check!(matches!(verify(&pk, b"round trip", sig.as_bytes()), Ok(true)), "{id} round trip rejected");
    }
    let (pk, sk) = keygen(ParamSetId::S128f, &[8u8; 48]).map_err(|e| e.to_string())?;
    let msg = b"corrupt me";
    let mut sig = sign_oracle(&sk, msg, None).map_err(|e| e.to_string())?.into_bytes();
    for pos in 0..sig.len() {
        let mask = 1 + (pos % 255) as u8;
        sig[pos] ^= mask;
        let accepted = verify(&pk, msg, &sig).map_err(|e| e.to_string())?;
        sig[pos] ^= mask;
        check!(!accepted, "corruption at byte {pos} accepted");
    }
    check!(matches!(verify(&pk, msg, &sig), Ok(true)), "restored signature rejected");
    Ok(format!("all sets verify; {} single-byte corruptions rejected", sig.len()))
}

fn c5_padding() -> Outcome {
    let mut got = Vec::new();
    for (width, expected) in [(16, (4, 8, 1)), (24, (6, 16, 3)), (32, (8, 4, 1))] {
        let p = padding_solve(width).map_err(|e| e.to_string())?;
        let row = (p.banks_per_access, p.thread_interval.unwrap_or(0), p.rows.unwrap_or(0));
        check!(row == expected, "width {width}: got {row:?}");
        got.push(format!("{width}->{row:?}"));
    }
    Ok(got.join(" "))
}

fn c6_bank_conflicts() -> Outcome {
    let mut heights = Vec::new();
    for (width, tree_heights) in [(16u32, [6u32, 3]), (32, [9, 4])] {
        let pad = padding_solve(width).map_err(|e| e.to_string())?;
        for h in tree_heights {
            for relax in [false, true] {
                let trace = reduction_trace(h, width, relax).map_err(|e| e.to_string())?;
                let r = count_conflicts(&trace, &pad);
                for (level, tally) in &r.per_level {
                    check!(
                        tally.load_conflicts + tally.store_conflicts == 0,
                        "width {width} height {h} relax {relax} level {level}: {} conflicts",
                        tally.load_conflicts + tally.store_conflicts
                    );
                }
                heights.push(h);
            }
        }
    }
    let trace24 = reduction_trace(8, 24, false).map_err(|e| e.to_string())?;
    let way24 = count_conflicts(&trace24, &padding_solve(24).map_err(|e| e.to_string())?).max_way();
    check!(way24 <= 2, "width 24 under R=3: max-way {way24}");
    let baseline = count_conflicts(&node_trace(32), &PaddingScheme::none(32)).max_way();
    check!(baseline == 8, "unpadded width 32: max-way {baseline}");
    let padded = count_conflicts(&node_trace(32), &padding_solve(32).map_err(|e| e.to_string())?);
    check!(padded.total_conflicts() == 0, "padded width 32 node trace: {} conflicts", padded.total_conflicts());
    let full32 = reduction_trace(9, 32, false).map_err(|e| e.to_string())?;
    let unpadded = count_conflicts(&full32, &PaddingScheme::none(32));
    let way_of = |op: Op| {
        full32.steps.iter().zip(&unpadded.per_step_max_way).filter(|(s, _)| s.op == op).map(|(_, &w)| w).max()
    };
    Ok(format!(
        "16/32 padded: 0 at every level; 24 (R=3) max-way {way24}; unpadded 32 max-way {baseline} \
         (reduction trace unpadded: loads {}-way, stores {}-way)",
        way_of(Op::Load).unwrap_or(0),
        way_of(Op::Store).unwrap_or(0)
    ))
}

fn c7_occupancy() -> Outcome {
    let occ = |r_thread| {
        occupancy(&OccupancyInput { r_total: 65536, r_thread, t_block: 1024, w_max: 48 }).map_err(|e| e.to_string())
    };
    let (a, b) = (occ(64)?, occ(128)?);
    check!((a - 2.0 / 3.0).abs() <= 1e-9, "64 regs: {a}");
    check!(b == 0.0, "128 regs: {b}");
    Ok(format!("64 regs -> {a:.6}, 128 regs -> {b}"))
}

fn c8_backends() -> Outcome {
    let fips: [(&[u8], &str); 2] = [
        (b"abc", "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"),
        (b"", "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"),
    ];
    for (msg, digest) in fips {
        check!(hex::encode(sha2::Sha256::digest(msg)) == digest, "oracle disagrees with FIPS");
        for b in HashBackend::ALL {
            check!(hex::encode(sha256::sha256(b, msg)) == digest, "{b:?} fails FIPS vector");
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for i in 0..10_000 {
        let len = rng.gen_range(0..256);
        let data: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let expected: [u8; 32] = sha2::Sha256::digest(&data).into();
        check!(sha256::sha256(HashBackend::Baseline, &data) == expected, "baseline differs on input {i}");
        check!(sha256::sha256(HashBackend::Tuned, &data) == expected, "tuned differs on input {i}");
        let (mut s1, block): ([u32; 8], [u8; 64]) = (rng.gen(), std::array::from_fn(|_| rng.gen()));
        let mut s2 = s1;
        compress_baseline(&mut s1, &block);
        compress_tuned(&mut s2, &block);
        check!(s1 == s2, "compression differs on block {i}");
    }
    Ok("10000 random inputs and blocks, FIPS vectors: identical".into())
}

fn c9_task_graphs() -> Outcome {
    let id = ParamSetId::S128f;
    let (_, sk) = keygen(id, &[9u8; 48]).map_err(|e| e.to_string())?;
    let signer = Signer::new(SignerConfig::tuned(id).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let key = signer.load_key(&sk).map_err(|e| e.to_string())?;
    let msgs: Vec<Vec<u8>> = (0..2u8).map(|i| vec![i; 32]).collect();
    let graphs = build_graphs(msgs.len(), 1, 2).map_err(|e| e.to_string())?;

    let inst = BatchInstance::new(&signer, &key, graphs.clone(), &msgs, None).map_err(|e| e.to_string())?;
    let log = inst.launch(&LaunchOptions::workers(1)).map_err(|e| e.to_string())?;
    check!(replay_check(&log, &graphs), "W=1 log fails replay");
    let reference = inst.signatures().map_err(|e| e.to_string())?;

    let (mut fors_first, mut tree_first) = (0usize, 0usize);
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let runs = 1000;
    for run in 0..runs {
        let workers = [2, 4, 8][run % 3];
        let opts = LaunchOptions { workers, shuffle_seed: Some(rng.gen()), hook: None };
        let log = inst.launch(&opts).map_err(|e| e.to_string())?;
        check!(replay_check(&log, &graphs), "run {run} (W={workers}) fails replay");
        let sigs = inst.signatures().map_err(|e| e.to_string())?;
        check!(sigs == reference, "run {run} (W={workers}) output differs from W=1");
        for m in 0..msgs.len() {
            match log.started_before(NodeId::new(m, NodeKind::Fors), NodeId::new(m, NodeKind::Tree)) {
                Some(true) => fors_first += 1,
                Some(false) => tree_first += 1,
                None => return Err(format!("run {run}: message {m} missing from log")),
            }
        }
        let extra = inst.allocations_since_instantiation();
        check!(extra == 0, "run {run}: {extra} buffer allocations after instantiation");
    }
    check!(fors_first > 0 && tree_first > 0, "orderings seen: FORS-first {fors_first}, TREE-first {tree_first}");
    Ok(format!(
        "{runs} runs: replay ok, identical to W=1, FORS-first {fors_first} / TREE-first {tree_first}, \
         {} buffers at instantiation and 0 after",
        inst.instantiation_allocations()
    ))
}

fn c10_hash_counts() -> Outcome {
    let mut got = Vec::new();
    for (id, stated) in [(ParamSetId::S128f, 560.0), (ParamSetId::S192f, 816.0), (ParamSetId::S256f, 1072.0)] {
        let n = id.params().n;
        let ctx = HashCtx::new(id.derived(), &vec![1u8; n], Some(&vec![2u8; n]), HashBackend::Tuned);
        let (_, count) = count_compressions(|| wots_gen_leaf(&ctx, &keypair_address(0, 0, 0)));
        let dev = (count as f64 - stated) / stated;
        check!(dev.abs() <= 0.05, "{id}: {count} compressions, {:.1}% from {stated}", dev * 100.0);
        got.push(format!("{id}={count} ({:+.1}%)", dev * 100.0));
    }
    Ok(got.join(" "))
}

fn c11_interop() -> Outcome {
    let mut cases = 0;
    for kat in common::KATS.iter().filter(|k| k.id == ParamSetId::S128f) {
        let (pk, sk) = keygen(kat.id, &kat.seed()).map_err(|e| e.to_string())?;
        check!(hex::encode(pk.to_bytes()) == kat.pk, "case {}: public key differs", kat.case);
        let sig = sign_oracle(&sk, &kat.message(), None).map_err(|e| e.to_string())?;
        check!(common::sha256_hex(sig.as_bytes()) == kat.sig_sha256, "case {}: signature differs", kat.case);
        if kat.case == 0 {
            check!(hex::encode(&sig.as_bytes()[..48]) == common::KAT_128F_SIG_HEAD, "signature head differs");
        }
        cases += 1;
    }
    Ok(format!("{cases} deterministic 128f cases match the round 3.1 sha2-simple reference"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("tuner reproduces the 128f/192f fusion table", c1_tuner),
        ("signature sizes", c2_sizes),
        ("parallel path equals the oracle", c3_oracle_equivalence),
        ("round trip and single-byte corruption", c4_round_trip_and_corruption),
        ("padding solver", c5_padding),
        ("bank-conflict zeroing", c6_bank_conflicts),
        ("occupancy calculator", c7_occupancy),
        ("hash backend equivalence", c8_backends),
        ("task-graph scheduling properties", c9_task_graphs),
        ("compressions per wots_gen_leaf", c10_hash_counts),
        ("reference interop", c11_interop),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
