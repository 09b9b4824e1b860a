//! Whole-world snapshots.
//!
//! File layout: magic `HHCK`, u32 LE format version, u64 LE payload length,
//! then the payload as JSON. Floats are written with round-trip precision so
//! a restored world is bit-identical to the saved one.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{ModelParams, World};
use crate::error::SimError;
use crate::hh::NeuronState;
use crate::topology::{StimulusProtocol, Topology};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HHCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub dt: f64,
    pub step: u64,
    pub topology: Topology,
    pub stimulus: StimulusProtocol,
    pub neurons: Vec<NeuronState>,
    pub pending: Vec<(u64, Vec<u32>)>,
    pub history: Vec<Vec<f64>>,
    pub synapse_rngs: Vec<ChaCha8Rng>,
}

impl Checkpoint {
    pub fn time_ms(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, SimError> {
        let payload = serde_json::to_vec(self).map_err(|e| SimError::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(payload.len() + 16);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SimError> {
        let bad = |msg: &str| SimError::Checkpoint(msg.to_string());
        if bytes.len() < 16 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file (missing HHCK magic)"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(SimError::Checkpoint(format!(
                "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let payload = &bytes[16..];
        if payload.len() as u64 != len {
            return Err(SimError::Checkpoint(format!(
                "truncated checkpoint: expected {len} payload bytes, found {}",
                payload.len()
            )));
        }
        serde_json::from_slice(payload).map_err(|e| SimError::Checkpoint(e.to_string()))
    }

    /// Writes via a temporary file and rename so a crash never leaves a
    /// half-written checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        let tmp = path.with_extension("partial");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&self.to_bytes()?)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

impl World {
    /// Snapshot of the full state. Only allowed on a synaptic tick boundary.
    pub fn checkpoint(&self) -> Result<Checkpoint, SimError> {
        if !self.on_tick() {
            return Err(SimError::OffTick { step: self.step });
        }
        Ok(Checkpoint {
            params: self.params.clone(),
            dt: self.dt,
            step: self.step,
            topology: self.topology.clone(),
            stimulus: self.stimulus.clone(),
            neurons: self.neurons.clone(),
            pending: self.pending.iter().map(|(k, v)| (*k, v.clone())).collect(),
            history: self.history.clone(),
            synapse_rngs: self.synapse_rngs.clone(),
        })
    }

    pub fn restore(cp: Checkpoint) -> Result<Self, SimError> {
        let pending: BTreeMap<u64, Vec<u32>> = cp.pending.into_iter().collect();
        let world = World::assemble(
            cp.params,
            cp.dt,
            cp.topology,
            cp.stimulus,
            cp.neurons,
            pending,
            cp.history,
            cp.synapse_rngs,
            cp.step,
        )?;
        if !world.on_tick() {
            return Err(SimError::OffTick { step: world.step });
        }
        Ok(world)
    }
}
