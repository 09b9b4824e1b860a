//! Run configuration: one TOML document with a section per module.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{ModelParams, SimConfig, World};
use crate::error::{ConfigError, ConfigResult};
use crate::hh::NeuronParams;
use crate::plasticity::StdpParams;
use crate::rng::{stream, StreamKind};
use crate::synapse::SynapseParams;
use crate::topology::{build_stimulus, build_topology, NetworkConfig, StimulusConfig, StimulusProtocol, Topology};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub neuron: NeuronParams,
    pub synapse: SynapseParams,
    pub stdp: StdpParams,
    pub network: NetworkConfig,
    pub stimulus: StimulusConfig,
    pub simulation: SimConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        let cfg = Self::from_toml(&text).map_err(|message| ConfigError::Parse { path: path.to_owned(), message })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig always serializes")
    }

    pub fn validate(&self) -> ConfigResult<()> {
        self.neuron.validate()?;
        self.synapse.validate()?;
        self.stdp.validate()?;
        self.network.validate()?;
        self.stimulus.validate()?;
        self.simulation.validate(&self.synapse)?;
        if self.stimulus.n_targets > self.network.n_neurons - self.network.n_inhibitory {
            return Err(ConfigError::invalid("stimulus", "more stimulus targets than excitatory neurons"));
        }
        Ok(())
    }

    pub fn model(&self) -> ModelParams {
        ModelParams { neuron: self.neuron.clone(), synapse: self.synapse.clone(), stdp: self.stdp.clone() }
    }

    /// Connectivity and stimulus drawn from the topology and stimulus streams
    /// of `simulation.seed`.
    pub fn build_network(&self) -> ConfigResult<(Topology, StimulusProtocol)> {
        let seed = self.simulation.seed;
        let topology = build_topology(&self.network, &mut stream(seed, StreamKind::Topology, 0))?;
        let stimulus = build_stimulus(&self.network, &self.stimulus, &mut stream(seed, StreamKind::Stimulus, 0))?;
        Ok((topology, stimulus))
    }

    pub fn build_world(&self) -> ConfigResult<World> {
        self.validate()?;
        let (topology, stimulus) = self.build_network()?;
        World::new(self.model(), &self.simulation, topology, stimulus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[neuron]\nu_rest = -65.0\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml("[nonsense]\n").is_err());
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let cfg = RunConfig::from_toml("[simulation]\nseed = 9\nduration = 2.0\n").unwrap();
        assert_eq!(cfg.simulation.seed, 9);
        assert_eq!(cfg.neuron, NeuronParams::default());
    }

    #[test]
    fn tick_must_be_a_multiple_of_dt() {
        let mut cfg = RunConfig::default();
        cfg.simulation.dt_membrane = 0.03;
        assert!(cfg.validate().is_err());
        cfg.simulation.dt_membrane = 0.02;
        cfg.validate().unwrap();
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = RunConfig::load(Path::new("/nonexistent/run.cfg")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/run.cfg"));
    }
}
