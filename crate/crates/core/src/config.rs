//! Tuning configuration file: per parameter set, the fusion layout, bank
//! padding, backend row, relax flag, worker width and scratch capacity.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamSetId;
use crate::sigcore::SignerConfig;
use crate::thash::{BackendSelection, KernelBackends};
use crate::tuner::{is_feasible, padding_solve, tree_tune, FusionCandidate, PaddingScheme, Saturation, TuneInput};
use crate::vexec::FusedSetLayout;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningEntry {
    pub fusion: FusionCandidate,
    pub padding: PaddingScheme,
    pub backends: KernelBackends,
    pub relax: bool,
    pub workers: usize,
    pub seme_per_block: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    crate::tuner::DEFAULT_ALPHA
}

impl TuningEntry {
    /// Tuner result for `input` with solved padding and default backends.
    pub fn from_tuning(input: &TuneInput) -> Result<Self> {
        let id = input.params.id();
        Ok(TuningEntry {
            fusion: tree_tune(input)?.best,
            padding: padding_solve(input.params.n() as u32)?,
            backends: KernelBackends::default_for(id),
            relax: input.relax,
            workers: 1,
            seme_per_block: input.seme_per_block,
            alpha: input.alpha,
        })
    }

    pub fn default_for(id: ParamSetId) -> Result<Self> {
        let mut input = TuneInput::new(id.derived());
        input.relax = id == ParamSetId::S256f;
        Self::from_tuning(&input)
    }

    fn tune_input(&self, id: ParamSetId) -> TuneInput {
        TuneInput {
            seme_per_block: self.seme_per_block,
            alpha: self.alpha,
            relax: self.relax,
            saturation: Saturation::Either,
            ..TuneInput::new(id.derived())
        }
    }

    pub fn validate(&self, id: ParamSetId) -> Result<()> {
        let n = id.params().n as u32;
        let bad = |what: String| Err(Error::Config(format!("{id}: {what}")));
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.padding.access_bytes != n || self.padding.banks_per_access != n / 4 {
            return bad(format!("padding is for {}-byte nodes", self.padding.access_bytes));
        }
        if self.padding.is_padded() && self.padding != padding_solve(n)? {
            return bad("padding does not solve the region equation".into());
        }
        let input = self.tune_input(id);
        if !is_feasible(&input, &self.fusion) {
            return bad(format!("fusion {:?} violates the search constraints", self.fusion));
        }
        let layout = FusedSetLayout::from_candidate(&id.derived(), &self.fusion, self.relax)?;
        layout.validate(self.seme_per_block, &self.padding)
    }

    pub fn signer_config(&self, id: ParamSetId) -> SignerConfig {
        SignerConfig {
            id,
            trees_per_set: self.fusion.trees_per_set,
            sets_fused: self.fusion.sets_fused,
            relax: self.relax,
            padding: self.padding,
            backends: self.backends,
            workers: self.workers,
            scratch_bytes: self.seme_per_block,
            instrument: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TuningConfig {
    pub sets: BTreeMap<ParamSetId, TuningEntry>,
}

impl TuningConfig {
    pub fn defaults() -> Result<Self> {
        let sets = ParamSetId::ALL.iter().map(|&id| Ok((id, TuningEntry::default_for(id)?))).collect::<Result<_>>()?;
        Ok(TuningConfig { sets })
    }

    pub fn validate(&self) -> Result<()> {
        self.sets.iter().try_for_each(|(&id, e)| e.validate(id))
    }

    /// The stored entry, or the built-in default when the set is absent.
    pub fn entry(&self, id: ParamSetId) -> Result<TuningEntry> {
        match self.sets.get(&id) {
            Some(e) => Ok(e.clone()),
            None => TuningEntry::default_for(id),
        }
    }

    pub fn signer_config(&self, id: ParamSetId) -> Result<SignerConfig> {
        Ok(self.entry(id)?.signer_config(id))
    }

    pub fn backend_selection(&self) -> Result<BackendSelection> {
        BackendSelection::from_rows(ParamSetId::ALL.iter().map(|&id| Ok((id, self.entry(id)?.backends))).collect::<Result<Vec<_>>>()?)
    }

    pub fn set_backends(&mut self, selection: &BackendSelection) {
        for (id, row) in selection.rows() {
            if let Some(e) = self.sets.get_mut(&id) {
                e.backends = row;
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TuningConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed tuning config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
    }
}
