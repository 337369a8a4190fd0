//! Wall-clock profiling of the three signing kernels under each backend.

use std::time::Instant;

use super::ProfileSamples;
use crate::error::Result;
use crate::params::ParamSetId;
use crate::sigcore::{keygen, Signer, SignerConfig};
use crate::thash::{HashBackend, Kernel, KernelBackends};
use crate::vexec::AllocCounter;

/// Times `reps` runs of every (kernel, backend) pair for each set in `ids`,
/// one run at a time on the calling thread.
pub fn profile_kernels(ids: &[ParamSetId], reps: usize) -> Result<ProfileSamples> {
    let mut samples = ProfileSamples::default();
    for &id in ids {
        let seed: Vec<u8> = (0..3 * id.params().n as u8).collect();
        let (_, sk) = keygen(id, &seed)?;
        for backend in HashBackend::ALL {
            let signer = Signer::new(SignerConfig {
                backends: KernelBackends::uniform(backend),
                workers: 1,
                ..SignerConfig::tuned(id)?
            })?;
            let key = signer.load_key(&sk)?;
            let mut ws = signer.workspace(&AllocCounter::new())?;
            let prep = signer.prepare(&key, b"profile", None)?;
            for _ in 0..reps {
                for kernel in Kernel::ALL {
                    let t = Instant::now();
                    match kernel {
                        Kernel::ForsSign => signer.fors_stage(&key, &prep, &mut ws.fors)?,
                        Kernel::TreeSign => signer.tree_stage(&key, &prep, &mut ws.tree)?,
                        Kernel::WotsSign => signer.wots_stage(&key, &prep, &ws.fors, &ws.tree, &mut ws.wots)?,
                    };
                    samples.record(kernel, id, backend, t.elapsed().as_secs_f64());
                }
            }
        }
    }
    Ok(samples)
}
