//! Parallel signer: FORS trees in fused blocks, all hypertree subtrees as
//! independent blocks, and one WOTS+ block per layer.
//!
//! Signing is split into stages so a scheduler can run them as graph nodes.
//! FORS and TREE only depend on [`Prepared`]; WOTS needs both of their
//! outputs.

use serde::{Deserialize, Serialize};

use super::{fors, prepare, Prepared, SecretKey, Signature};
use crate::error::{Error, Result};
use crate::params::{DerivedParams, ParamSetId};
use crate::thash::sha256::count_compressions;
use crate::thash::{HashBackend, HashCtx, Kernel, KernelBackends};
use crate::tuner::{padding_solve, tree_tune, PaddingScheme, TuneInput};
use crate::vexec::{
    run_fused_fors, run_tree_layers, run_wots_blocks, AllocCounter, ExecReport, Executor, FusedSetLayout,
    ReadOnlyPool, RelaxConfig, VirtualBlock, DEFAULT_SCRATCH_BYTES,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignerConfig {
    pub id: ParamSetId,
    pub trees_per_set: usize,
    pub sets_fused: usize,
    pub relax: bool,
    pub padding: PaddingScheme,
    pub backends: KernelBackends,
    pub workers: usize,
    pub scratch_bytes: usize,
    pub instrument: bool,
}

impl SignerConfig {
    /// Fusion from the tuner (relaxed geometry for 256f), solved padding
    /// and the default backend row.
    pub fn tuned(id: ParamSetId) -> Result<Self> {
        let mut input = TuneInput::new(id.derived());
        input.relax = id == ParamSetId::S256f;
        let best = tree_tune(&input)?.best;
        Ok(SignerConfig {
            trees_per_set: best.trees_per_set,
            sets_fused: best.sets_fused,
            relax: input.relax,
            ..Self::sequential(id)
        })
    }

    /// One tree per block, no relax.
    pub fn sequential(id: ParamSetId) -> Self {
        SignerConfig {
            id,
            trees_per_set: 1,
            sets_fused: 1,
            relax: false,
            padding: padding_solve(id.params().n as u32).expect("n is a multiple of 4"),
            backends: KernelBackends::default_for(id),
            workers: 1,
            scratch_bytes: DEFAULT_SCRATCH_BYTES,
            instrument: false,
        }
    }

    pub fn layout(&self) -> Result<FusedSetLayout> {
        let layout = FusedSetLayout::new(&self.id.derived(), self.trees_per_set, self.sets_fused, self.relax)?;
        layout.validate(self.scratch_bytes, &self.padding)?;
        Ok(layout)
    }

    pub fn relax_config(&self) -> RelaxConfig {
        if self.relax {
            RelaxConfig::on(self.id.params().n)
        } else {
            RelaxConfig::off()
        }
    }
}

/// A secret key loaded into the read-only pool, with one hash context per
/// kernel.
#[derive(Clone, Debug)]
pub struct KeyContext {
    pub sk: SecretKey,
    pub pool: ReadOnlyPool,
    fors: HashCtx,
    tree: HashCtx,
    wots: HashCtx,
}

impl KeyContext {
    pub fn ctx(&self, kernel: Kernel) -> &HashCtx {
        match kernel {
            Kernel::ForsSign => &self.fors,
            Kernel::TreeSign => &self.tree,
            Kernel::WotsSign => &self.wots,
        }
    }
}

pub struct ForsPart {
    blocks: Vec<VirtualBlock>,
    pub sig: Vec<u8>,
    pub roots: Vec<u8>,
    pub root: Vec<u8>,
}

pub struct TreePart {
    blocks: Vec<VirtualBlock>,
    pub auth: Vec<u8>,
    pub roots: Vec<u8>,
}

pub struct WotsPart {
    blocks: Vec<VirtualBlock>,
    pub sigs: Vec<u8>,
}

/// Every block and buffer one signature needs, allocated up front.
pub struct SignWorkspace {
    pub fors: ForsPart,
    pub tree: TreePart,
    pub wots: WotsPart,
    pub out: Vec<u8>,
}

/// Per-stage instrumentation of one signature.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    pub fors: ExecReport,
    pub tree: ExecReport,
    pub wots: ExecReport,
}

#[derive(Clone, Debug)]
pub struct Signer {
    config: SignerConfig,
    dp: DerivedParams,
    layout: FusedSetLayout,
    exec: Executor,
}

fn buffer(len: usize, allocs: &AllocCounter) -> Vec<u8> {
    allocs.record();
    vec![0; len]
}

impl Signer {
    pub fn new(config: SignerConfig) -> Result<Self> {
        let layout = config.layout()?;
        let exec = Executor::new(config.workers)?;
        Ok(Signer { dp: config.id.derived(), config, layout, exec })
    }

    pub fn config(&self) -> &SignerConfig {
        &self.config
    }

    pub fn layout(&self) -> &FusedSetLayout {
        &self.layout
    }

    pub fn load_key(&self, sk: &SecretKey) -> Result<KeyContext> {
        if sk.id != self.config.id {
            return Err(Error::Usage(format!("key is {}, signer is {}", sk.id, self.config.id)));
        }
        let pool = ReadOnlyPool::new([("pk_seed", sk.pk_seed.clone()), ("sk_seed", sk.sk_seed.clone())]);
        let make = |kernel| {
            HashCtx::new(
                self.dp,
                pool.get("pk_seed").expect("seeded"),
                pool.get("sk_seed"),
                self.config.backends.get(kernel),
            )
        };
        Ok(KeyContext {
            fors: make(Kernel::ForsSign),
            tree: make(Kernel::TreeSign),
            wots: make(Kernel::WotsSign),
            sk: sk.clone(),
            pool,
        })
    }

    pub fn workspace(&self, allocs: &AllocCounter) -> Result<SignWorkspace> {
        let dp = &self.dp;
        let (n, d) = (dp.n(), dp.params.d);
        let fors_blocks = (0..self.layout.passes())
            .map(|_| VirtualBlock::new(self.layout.lanes_per_set as u32, self.config.scratch_bytes, allocs))
            .collect::<Result<_>>()?;
        let tree_scratch = self.config.padding.physical_bytes(dp.subtree_leaves * n);
        let tree_blocks = (0..d)
            .map(|_| VirtualBlock::new(dp.subtree_leaves as u32, tree_scratch, allocs))
            .collect::<Result<_>>()?;
        let wots_blocks =
            (0..d).map(|_| VirtualBlock::new(dp.wots_len as u32, 0, allocs)).collect::<Result<_>>()?;
        Ok(SignWorkspace {
            fors: ForsPart {
                blocks: fors_blocks,
                sig: buffer(dp.fors_bytes, allocs),
                roots: buffer(dp.params.k * n, allocs),
                root: buffer(n, allocs),
            },
            tree: TreePart {
                blocks: tree_blocks,
                auth: buffer(d * dp.subtree_height * n, allocs),
                roots: buffer(d * n, allocs),
            },
            wots: WotsPart { blocks: wots_blocks, sigs: buffer(d * dp.wots_bytes, allocs) },
            out: buffer(dp.sig_bytes, allocs),
        })
    }

    /// Randomizer and signing position. Message hashing runs on the FORS
    /// backend.
    pub fn prepare(&self, key: &KeyContext, msg: &[u8], opt_rand: Option<&[u8]>) -> Result<Prepared> {
        prepare(&key.sk, msg, opt_rand, self.config.backends.get(Kernel::ForsSign))
    }

    pub fn fors_stage(&self, key: &KeyContext, prep: &Prepared, part: &mut ForsPart) -> Result<ExecReport> {
        let ctx = key.ctx(Kernel::ForsSign);
        let adrs = fors::fors_address(prep.state.tree, prep.state.leaf_idx);
        let trees = run_fused_fors(
            &self.exec,
            &self.layout,
            self.config.relax_config(),
            ctx,
            &adrs,
            &prep.state.indices,
            &self.config.padding,
            &mut part.blocks,
            &mut part.sig,
            &mut part.roots,
            self.config.instrument,
        )?;
        let mut report = trees.report;
        let (pk, c) = count_compressions(|| fors::roots_to_pk(ctx, &part.roots, &adrs));
        part.root.copy_from_slice(&pk);
        report.compressions += c;
        Ok(report)
    }

    pub fn tree_stage(&self, key: &KeyContext, prep: &Prepared, part: &mut TreePart) -> Result<ExecReport> {
        run_tree_layers(
            &self.exec,
            key.ctx(Kernel::TreeSign),
            &prep.state.layer_positions(&self.dp),
            &self.config.padding,
            &mut part.blocks,
            &mut part.auth,
            &mut part.roots,
            self.config.instrument,
        )
    }

    pub fn wots_stage(
        &self,
        key: &KeyContext,
        prep: &Prepared,
        fors: &ForsPart,
        tree: &TreePart,
        part: &mut WotsPart,
    ) -> Result<ExecReport> {
        run_wots_blocks(
            &self.exec,
            key.ctx(Kernel::WotsSign),
            &prep.state.layer_positions(&self.dp),
            &fors.root,
            &tree.roots,
            &mut part.blocks,
            &mut part.sigs,
        )
    }

    /// Lays the stage outputs out as `R ‖ FORS ‖ (WOTS ‖ auth) × d`.
    pub fn assemble(&self, prep: &Prepared, fors: &ForsPart, tree: &TreePart, wots: &WotsPart, out: &mut [u8]) {
        let dp = &self.dp;
        let n = dp.n();
        let auth_len = dp.subtree_height * n;
        out[..n].copy_from_slice(&prep.randomizer);
        out[n..n + dp.fors_bytes].copy_from_slice(&fors.sig);
        let layers = out[n + dp.fors_bytes..].chunks_mut(dp.ht_layer_bytes);
        for ((dst, sig), auth) in layers.zip(wots.sigs.chunks(dp.wots_bytes)).zip(tree.auth.chunks(auth_len)) {
            dst[..dp.wots_bytes].copy_from_slice(sig);
            dst[dp.wots_bytes..].copy_from_slice(auth);
        }
    }

    /// All stages into a preallocated workspace; the signature lands in
    /// `ws.out`.
    pub fn sign_into(
        &self,
        key: &KeyContext,
        msg: &[u8],
        opt_rand: Option<&[u8]>,
        ws: &mut SignWorkspace,
    ) -> Result<SignReport> {
        let prep = self.prepare(key, msg, opt_rand)?;
        let fors = self.fors_stage(key, &prep, &mut ws.fors)?;
        let tree = self.tree_stage(key, &prep, &mut ws.tree)?;
        let wots = self.wots_stage(key, &prep, &ws.fors, &ws.tree, &mut ws.wots)?;
        self.assemble(&prep, &ws.fors, &ws.tree, &ws.wots, &mut ws.out);
        Ok(SignReport { fors, tree, wots })
    }

    pub fn sign_with_report(
        &self,
        sk: &SecretKey,
        msg: &[u8],
        opt_rand: Option<&[u8]>,
    ) -> Result<(Signature, SignReport)> {
        let key = self.load_key(sk)?;
        let mut ws = self.workspace(&AllocCounter::new())?;
        let report = self.sign_into(&key, msg, opt_rand, &mut ws)?;
        Ok((Signature::from_bytes(sk.id, ws.out)?, report))
    }

    pub fn sign(&self, sk: &SecretKey, msg: &[u8], opt_rand: Option<&[u8]>) -> Result<Signature> {
        self.sign_with_report(sk, msg, opt_rand).map(|(s, _)| s)
    }

    pub fn backend(&self, kernel: Kernel) -> HashBackend {
        self.config.backends.get(kernel)
    }
}
