//! Random network construction and the initial stimulus protocol.
//!
//! Neurons `0..n_inhibitory` are inhibitory and the rest excitatory. Every
//! ordered pair of distinct neurons is connected independently; synapses are
//! emitted grouped by postsynaptic neuron, presynaptic id ascending, which is
//! the order the engine relies on for its per-neuron current sums.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ConfigResult};
use crate::synapse::{truncated_normal, SynapseState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuronKind {
    Excitatory,
    Inhibitory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub n_neurons: usize,
    pub n_inhibitory: usize,
    pub connection_prob: f64,
    pub ampa_init_mean: f64,
    pub ampa_init_var: f64,
    pub gaba_init_mean: f64,
    pub gaba_init_var: f64,
    /// Read the `*_init_var` keys as standard deviations instead of variances.
    pub init_var_is_std: bool,
    /// Bounds of the per-neuron axonal delay (ms).
    pub delay_min: f64,
    pub delay_max: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_neurons: 200,
            n_inhibitory: 40,
            connection_prob: 0.8,
            ampa_init_mean: 120.0,
            ampa_init_var: 12.0,
            gaba_init_mean: 200.0,
            gaba_init_var: 6.0,
            init_var_is_std: false,
            delay_min: 0.5,
            delay_max: 2.0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> ConfigResult<()> {
        if self.n_neurons == 0 || self.n_inhibitory >= self.n_neurons {
            return Err(ConfigError::invalid("network", "require n_inhibitory < n_neurons"));
        }
        if self.n_neurons > u32::MAX as usize {
            return Err(ConfigError::invalid("network", "n_neurons exceeds u32 range"));
        }
        if !(0.0..=1.0).contains(&self.connection_prob) {
            return Err(ConfigError::invalid("network", "connection_prob must lie in [0, 1]"));
        }
        if !(self.ampa_init_mean > 0.0 && self.gaba_init_mean > 0.0) {
            return Err(ConfigError::invalid("network", "receptor means must be > 0"));
        }
        if !(self.ampa_init_var >= 0.0 && self.gaba_init_var >= 0.0) {
            return Err(ConfigError::invalid("network", "receptor variances must be >= 0"));
        }
        if !(self.delay_min > 0.0 && self.delay_min <= self.delay_max && self.delay_max.is_finite()) {
            return Err(ConfigError::invalid("network", "require 0 < delay_min <= delay_max"));
        }
        Ok(())
    }

    pub fn kind_of(&self, neuron: usize) -> NeuronKind {
        if neuron < self.n_inhibitory {
            NeuronKind::Inhibitory
        } else {
            NeuronKind::Excitatory
        }
    }

    fn variance(&self, v: f64) -> f64 {
        if self.init_var_is_std {
            v * v
        } else {
            v
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub kinds: Vec<NeuronKind>,
    pub synapses: Vec<SynapseState>,
    /// Axonal delay per presynaptic neuron (ms).
    pub delays: Vec<f64>,
}

impl Topology {
    pub fn n_neurons(&self) -> usize {
        self.kinds.len()
    }

    /// Checks the structural invariants the engine depends on.
    pub fn validate(&self) -> ConfigResult<()> {
        let n = self.kinds.len();
        if self.delays.len() != n {
            return Err(ConfigError::invalid("network", "one delay per neuron required"));
        }
        let mut last = None;
        for s in &self.synapses {
            let (pre, post) = (s.pre as usize, s.post as usize);
            if pre >= n || post >= n || pre == post {
                return Err(ConfigError::invalid("network", format!("bad synapse {pre} -> {post}")));
            }
            if s.excitatory != (self.kinds[pre] == NeuronKind::Excitatory) {
                return Err(ConfigError::invalid("network", format!("receptor type mismatch on {pre} -> {post}")));
            }
            if Some((post, pre)) <= last {
                return Err(ConfigError::invalid("network", "synapses must be sorted by (post, pre) without duplicates"));
            }
            last = Some((post, pre));
        }
        Ok(())
    }
}

/// Draws the connectivity, initial receptor counts and axonal delays.
pub fn build_topology<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> ConfigResult<Topology> {
    config.validate()?;
    let n = config.n_neurons;
    let kinds: Vec<NeuronKind> = (0..n).map(|i| config.kind_of(i)).collect();
    let expected = (n * (n - 1)) as f64 * config.connection_prob;
    let mut synapses = Vec::with_capacity(expected as usize + 1);
    for post in 0..n {
        for (pre, &kind) in kinds.iter().enumerate() {
            if pre == post || rng.random::<f64>() >= config.connection_prob {
                continue;
            }
            let excitatory = kind == NeuronKind::Excitatory;
            let (mean, var) = if excitatory {
                (config.ampa_init_mean, config.variance(config.ampa_init_var))
            } else {
                (config.gaba_init_mean, config.variance(config.gaba_init_var))
            };
            let receptors = truncated_normal(rng, mean, var, 1.0);
            synapses.push(SynapseState {
                pre: pre as u32,
                post: post as u32,
                excitatory,
                receptors,
                receptors_initial: receptors,
                pool: 0.0,
                next_spont_time: 0.0,
            });
        }
    }
    let delays = (0..n)
        .map(|_| {
            if config.delay_max > config.delay_min {
                rng.random_range(config.delay_min..=config.delay_max)
            } else {
                config.delay_min
            }
        })
        .collect();
    Ok(Topology { kinds, synapses, delays })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StimulusConfig {
    pub n_targets: usize,
    /// Injected current per target.
    pub amplitude: f64,
    /// Pulse length (ms).
    pub duration: f64,
    /// Onsets are drawn uniformly from `[onset_min, onset_max]` (ms).
    pub onset_min: f64,
    pub onset_max: f64,
}

impl Default for StimulusConfig {
    fn default() -> Self {
        Self { n_targets: 30, amplitude: 80.0, duration: 200.0, onset_min: 300.0, onset_max: 500.0 }
    }
}

impl StimulusConfig {
    pub fn validate(&self) -> ConfigResult<()> {
        if !(self.amplitude.is_finite() && self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(ConfigError::invalid("stimulus", "amplitude and duration must be finite, duration >= 0"));
        }
        if !(0.0 <= self.onset_min && self.onset_min <= self.onset_max && self.onset_max < 1000.0) {
            return Err(ConfigError::invalid("stimulus", "require 0 <= onset_min <= onset_max < 1000 ms"));
        }
        Ok(())
    }
}

/// External current pulses applied at the start of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StimulusProtocol {
    pub targets: Vec<u32>,
    pub amplitude: f64,
    pub duration: f64,
    /// Onset per target (ms), parallel to `targets`.
    pub start_times: Vec<f64>,
}

impl StimulusProtocol {
    pub fn none() -> Self {
        Self { targets: Vec::new(), amplitude: 0.0, duration: 0.0, start_times: Vec::new() }
    }

    /// Total external current into `neuron` at time `t` (ms).
    pub fn current(&self, neuron: u32, t: f64) -> f64 {
        self.targets
            .iter()
            .zip(&self.start_times)
            .filter(|&(&id, &start)| id == neuron && t >= start && t < start + self.duration)
            .map(|_| self.amplitude)
            .sum()
    }

    /// Active interval `[start, end)` per neuron.
    pub fn windows(&self, n_neurons: usize) -> Vec<Option<(f64, f64)>> {
        let mut out = vec![None; n_neurons];
        for (&id, &start) in self.targets.iter().zip(&self.start_times) {
            if let Some(slot) = out.get_mut(id as usize) {
                *slot = Some((start, start + self.duration));
            }
        }
        out
    }
}

/// Picks distinct excitatory targets and their onsets.
pub fn build_stimulus<R: Rng + ?Sized>(
    network: &NetworkConfig,
    config: &StimulusConfig,
    rng: &mut R,
) -> ConfigResult<StimulusProtocol> {
    config.validate()?;
    let n_exc = network.n_neurons - network.n_inhibitory;
    if config.n_targets > n_exc {
        return Err(ConfigError::invalid(
            "stimulus",
            format!("{} targets requested but only {n_exc} excitatory neurons exist", config.n_targets),
        ));
    }
    let targets: Vec<u32> =
        index::sample(rng, n_exc, config.n_targets).into_iter().map(|k| (network.n_inhibitory + k) as u32).collect();
    let start_times = targets
        .iter()
        .map(|_| {
            if config.onset_max > config.onset_min {
                rng.random_range(config.onset_min..=config.onset_max)
            } else {
                config.onset_min
            }
        })
        .collect();
    Ok(StimulusProtocol { targets, amplitude: config.amplitude, duration: config.duration, start_times })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamKind};
    use std::collections::HashSet;

    fn topo(config: &NetworkConfig, seed: u64) -> Topology {
        build_topology(config, &mut stream(seed, StreamKind::Topology, 0)).unwrap()
    }

    #[test]
    fn default_counts() {
        let config = NetworkConfig::default();
        let t = topo(&config, 1);
        // 3 sigma around 200 * 199 * 0.8 = 31840
        let n = t.synapses.len() as f64;
        assert!((n - 31_840.0).abs() < 3.0 * 79.8, "{n}");
        assert_eq!(t.kinds.iter().filter(|&&k| k == NeuronKind::Inhibitory).count(), 40);
        assert_eq!(t.kinds.iter().filter(|&&k| k == NeuronKind::Excitatory).count(), 160);
        t.validate().unwrap();
    }

    #[test]
    fn extreme_probabilities() {
        let none = topo(&NetworkConfig { connection_prob: 0.0, ..NetworkConfig::default() }, 1);
        assert!(none.synapses.is_empty());
        let full = topo(&NetworkConfig { connection_prob: 1.0, ..NetworkConfig::default() }, 1);
        assert_eq!(full.synapses.len(), 200 * 199);
        assert!(full.synapses.iter().all(|s| s.pre != s.post));
        let pairs: HashSet<(u32, u32)> = full.synapses.iter().map(|s| (s.pre, s.post)).collect();
        assert_eq!(pairs.len(), 200 * 199);
    }

    #[test]
    fn receptor_types_and_delays() {
        let config = NetworkConfig::default();
        let t = topo(&config, 2);
        let (mut ampa, mut gaba) = (Vec::new(), Vec::new());
        for s in &t.synapses {
            assert_eq!(s.excitatory, s.pre as usize >= 40);
            assert_eq!(s.receptors, s.receptors_initial);
            if s.excitatory {
                ampa.push(s.receptors)
            } else {
                gaba.push(s.receptors)
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
        };
        assert!((mean(&ampa) - 120.0).abs() < 0.1);
        assert!((var(&ampa) - 12.0).abs() < 0.6);
        assert!((mean(&gaba) - 200.0).abs() < 0.1);
        assert!((var(&gaba) - 6.0).abs() < 0.6);
        assert!(t.delays.iter().all(|&d| (0.5..=2.0).contains(&d)));
    }

    #[test]
    fn degree_statistics() {
        let t = topo(&NetworkConfig::default(), 3);
        let mut indeg = [0usize; 200];
        let mut outdeg = [0usize; 200];
        for s in &t.synapses {
            indeg[s.post as usize] += 1;
            outdeg[s.pre as usize] += 1;
        }
        // mean degree equals synapses / n, Binomial(39800, 0.8) / 200 => sigma ~0.4
        let mean_in = indeg.iter().sum::<usize>() as f64 / 200.0;
        let mean_out = outdeg.iter().sum::<usize>() as f64 / 200.0;
        assert!((mean_in - 159.2).abs() < 3.0 * 0.4);
        assert!((mean_out - 159.2).abs() < 3.0 * 0.4);
    }

    #[test]
    fn seeds_are_deterministic() {
        let config = NetworkConfig::default();
        assert_eq!(topo(&config, 5), topo(&config, 5));
        assert_ne!(topo(&config, 5), topo(&config, 6));
        let s = StimulusConfig::default();
        let a = build_stimulus(&config, &s, &mut stream(5, StreamKind::Stimulus, 0)).unwrap();
        let b = build_stimulus(&config, &s, &mut stream(5, StreamKind::Stimulus, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = NetworkConfig { n_inhibitory: 200, ..NetworkConfig::default() };
        assert!(build_topology(&bad, &mut stream(1, StreamKind::Topology, 0)).is_err());
        let few = NetworkConfig { n_neurons: 50, n_inhibitory: 40, ..NetworkConfig::default() };
        assert!(build_stimulus(&few, &StimulusConfig::default(), &mut stream(1, StreamKind::Stimulus, 0)).is_err());
    }

    #[test]
    fn stimulus_protocol() {
        let net = NetworkConfig::default();
        let cfg = StimulusConfig::default();
        let mut onsets = Vec::new();
        for seed in 0..50 {
            let s = build_stimulus(&net, &cfg, &mut stream(seed, StreamKind::Stimulus, 0)).unwrap();
            assert_eq!(s.targets.len(), 30);
            assert_eq!(s.targets.iter().collect::<HashSet<_>>().len(), 30);
            assert!(s.targets.iter().all(|&t| (40..200).contains(&t)));
            assert!(s.start_times.iter().all(|&t| (300.0..=500.0).contains(&t)));
            onsets.extend_from_slice(&s.start_times);
            let (id, start) = (s.targets[0], s.start_times[0]);
            assert_eq!(s.current(id, start), 80.0);
            assert_eq!(s.current(id, start + 199.99), 80.0);
            assert_eq!(s.current(id, start + 200.0), 0.0);
            assert_eq!(s.current(id, 5_000.0), 0.0);
        }
        let mean = onsets.iter().sum::<f64>() / onsets.len() as f64;
        // uniform [300, 500]: sigma of the mean over 1500 draws is ~1.5 ms
        assert!((mean - 400.0).abs() < 5.0, "{mean}");
    }
}
