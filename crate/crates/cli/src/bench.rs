//! Batch throughput run over the task-graph executor.

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use spx_batch::batchgraph::{build_graphs, replay_check, BatchInstance, LaunchOptions, NodeKind};
use spx_batch::sigcore::{keygen_random, verify, Signer, SignerConfig};

use crate::Failure;

pub struct BenchArgs {
    pub config: SignerConfig,
    pub messages: usize,
    pub msg_len: usize,
    pub batch_m: usize,
    pub graphs_t: usize,
    pub workers: usize,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct NodeTiming {
    pub count: usize,
    pub mean_us: f64,
    pub max_us: f64,
}

#[derive(Serialize)]
pub struct BenchReport {
    pub set: String,
    pub messages: usize,
    pub message_bytes: usize,
    pub batch_m: usize,
    pub graphs_t: usize,
    pub workers: usize,
    pub trees_per_set: usize,
    pub sets_fused: usize,
    pub relax: bool,
    pub instantiate_seconds: f64,
    pub launch_seconds: f64,
    pub kops: f64,
    pub fors: NodeTiming,
    pub tree: NodeTiming,
    pub wots: NodeTiming,
    pub allocations_at_instantiation: u64,
    pub allocations_after_instantiation: u64,
    pub replay_ok: bool,
    pub verified: usize,
}

pub fn run(args: BenchArgs) -> Result<BenchReport, Failure> {
    let id = args.config.id;
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let (pk, sk) = keygen_random(id, &mut rng);
    let msgs: Vec<Vec<u8>> = (0..args.messages)
        .map(|_| {
            let mut m = vec![0u8; args.msg_len];
            rng.fill_bytes(&mut m);
            m
        })
        .collect();

    let signer = Signer::new(args.config)?;
    let key = signer.load_key(&sk)?;
    let graphs = build_graphs(args.messages, args.batch_m, args.graphs_t)?;

    let t0 = Instant::now();
    let inst = BatchInstance::new(&signer, &key, graphs.clone(), &msgs, None)?;
    let instantiate_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let log = inst.launch(&LaunchOptions::workers(args.workers))?;
    let launch_seconds = t1.elapsed().as_secs_f64();

    let sigs = inst.signatures()?;
    let mut verified = 0;
    for (m, s) in msgs.iter().zip(&sigs) {
        if verify(&pk, m, s.as_bytes())? {
            verified += 1;
        }
    }
    let timing = |kind: NodeKind| {
        let us: Vec<f64> =
            log.events.iter().filter(|e| e.node.kind == kind).map(|e| e.elapsed_ns as f64 / 1e3).collect();
        NodeTiming {
            count: us.len(),
            mean_us: if us.is_empty() { 0.0 } else { us.iter().sum::<f64>() / us.len() as f64 },
            max_us: us.iter().copied().fold(0.0, f64::max),
        }
    };
    let cfg = signer.config();
    Ok(BenchReport {
        set: id.to_string(),
        messages: args.messages,
        message_bytes: args.msg_len,
        batch_m: args.batch_m,
        graphs_t: args.graphs_t,
        workers: args.workers,
        trees_per_set: cfg.trees_per_set,
        sets_fused: cfg.sets_fused,
        relax: cfg.relax,
        instantiate_seconds,
        launch_seconds,
        kops: args.messages as f64 / launch_seconds / 1e3,
        fors: timing(NodeKind::Fors),
        tree: timing(NodeKind::Tree),
        wots: timing(NodeKind::Wots),
        allocations_at_instantiation: inst.instantiation_allocations(),
        allocations_after_instantiation: inst.allocations_since_instantiation(),
        replay_ok: replay_check(&log, &graphs),
        verified,
    })
}
