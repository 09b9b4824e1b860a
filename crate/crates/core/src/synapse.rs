//! Stochastic chemical synapses.
//!
//! A synapse accumulates released vesicles in a pool that decays
//! exponentially. Vesicles are released either when a presynaptic action
//! potential arrives (with probability `p_ap_release`) or when the synapse
//! reaches a spontaneous release window. The pool drives a receptor-scaled
//! current into the postsynaptic neuron; inhibitory currents are attenuated
//! when the postsynaptic membrane is hyperpolarized below `thres_inh`.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ConfigResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynapseParams {
    /// Release probability on action-potential arrival.
    pub p_ap_release: f64,
    /// Probability that a spontaneous window releases an AP-sized packet.
    pub p_spont_ap_release: f64,
    pub mean_n_ap: f64,
    pub var_n_ap: f64,
    pub mean_n_not_ap: f64,
    pub var_n_not_ap: f64,
    /// Pool decay rate (1/s).
    pub decay_rate: f64,
    /// Current per vesicle per receptor.
    pub du_per_ves: f64,
    pub g_ampa: f64,
    pub g_gaba: f64,
    /// Clamp applied to each synapse current and to each neuron's total.
    pub i_syn_max: f64,
    /// Inhibitory currents are attenuated below this voltage (mV).
    pub thres_inh: f64,
    /// Attenuation rate (1/mV).
    pub atten_coeff: f64,
    pub atten_floor: f64,
    /// Lookback over which presynaptic spikes lengthen the spontaneous period (ms).
    pub t_lookback_ap: f64,
    /// Base period between spontaneous release windows (ms).
    pub t_ves_release_base: f64,
    /// Synaptic update period (ms).
    pub t_update: f64,
}

impl Default for SynapseParams {
    fn default() -> Self {
        Self {
            p_ap_release: 0.5,
            p_spont_ap_release: 0.001,
            mean_n_ap: 10.0,
            var_n_ap: 2.0,
            mean_n_not_ap: 1.0,
            var_n_not_ap: 0.25,
            decay_rate: 100.0,
            du_per_ves: 1.0 / 150.0,
            g_ampa: 1.0,
            g_gaba: 1.0,
            i_syn_max: 40.0,
            thres_inh: -70.0,
            atten_coeff: 0.5,
            atten_floor: 0.08,
            t_lookback_ap: 100.0,
            t_ves_release_base: 50.0,
            t_update: 1.0,
        }
    }
}

impl SynapseParams {
    pub fn validate(&self) -> ConfigResult<()> {
        let probability = |v: f64| (0.0..=1.0).contains(&v);
        if !probability(self.p_ap_release) || !probability(self.p_spont_ap_release) {
            return Err(ConfigError::invalid("synapse", "release probabilities must lie in [0, 1]"));
        }
        for (name, v) in [
            ("mean_n_ap", self.mean_n_ap),
            ("var_n_ap", self.var_n_ap),
            ("mean_n_not_ap", self.mean_n_not_ap),
            ("var_n_not_ap", self.var_n_not_ap),
            ("atten_coeff", self.atten_coeff),
            ("t_lookback_ap", self.t_lookback_ap),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::invalid("synapse", format!("{name} must be finite and >= 0")));
            }
        }
        for (name, v) in [
            ("decay_rate", self.decay_rate),
            ("du_per_ves", self.du_per_ves),
            ("g_ampa", self.g_ampa),
            ("g_gaba", self.g_gaba),
            ("i_syn_max", self.i_syn_max),
            ("t_ves_release_base", self.t_ves_release_base),
            ("t_update", self.t_update),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::invalid("synapse", format!("{name} must be finite and > 0")));
            }
        }
        if !self.thres_inh.is_finite() {
            return Err(ConfigError::invalid("synapse", "thres_inh must be finite"));
        }
        if !(self.atten_floor > 0.0 && self.atten_floor <= 1.0) {
            return Err(ConfigError::invalid("synapse", "atten_floor must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Pool decay factor over one synaptic update period.
    pub fn tick_decay_factor(&self) -> f64 {
        (-self.decay_rate * self.t_update / 1000.0).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynapseState {
    pub pre: u32,
    pub post: u32,
    /// Excitatory presynaptic neuron (AMPA receptors) or inhibitory (GABA).
    pub excitatory: bool,
    pub receptors: f64,
    /// Receptor count at construction; anchors the plasticity bounds.
    pub receptors_initial: f64,
    /// Accumulated vesicles.
    pub pool: f64,
    /// Time of the next spontaneous release window (ms).
    pub next_spont_time: f64,
}

/// Uniform and Gaussian draws consumed by the release lottery.
pub trait ReleaseSource {
    /// A uniform draw from `[0, 1)`.
    fn uniform(&mut self) -> f64;
    fn standard_normal(&mut self) -> f64;
}

impl<R: RngCore + ?Sized> ReleaseSource for R {
    fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }

    fn standard_normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }
}

const MAX_RESAMPLES: usize = 64;

/// Gaussian draw with the given mean and variance, conditioned on `>= floor`
/// by resampling. Falls back to `floor` if the mass above it is too small to
/// hit in a bounded number of tries.
pub fn truncated_normal<S: ReleaseSource + ?Sized>(src: &mut S, mean: f64, variance: f64, floor: f64) -> f64 {
    let std = variance.sqrt();
    for _ in 0..MAX_RESAMPLES {
        let x = mean + std * src.standard_normal();
        if x >= floor {
            return x;
        }
    }
    floor
}

/// Vesicles released by an arriving action potential.
pub fn on_ap_arrival<S: ReleaseSource + ?Sized>(params: &SynapseParams, src: &mut S) -> f64 {
    if src.uniform() < params.p_ap_release {
        truncated_normal(src, params.mean_n_ap, params.var_n_ap, 0.0)
    } else {
        0.0
    }
}

/// Vesicles released when a spontaneous release window opens.
pub fn on_spontaneous_window<S: ReleaseSource + ?Sized>(params: &SynapseParams, src: &mut S) -> f64 {
    if src.uniform() < params.p_spont_ap_release {
        truncated_normal(src, params.mean_n_ap, params.var_n_ap, 0.0)
    } else {
        truncated_normal(src, params.mean_n_not_ap, params.var_n_not_ap, 0.0)
    }
}

/// Period until the next spontaneous window given the number of presynaptic
/// spikes in the lookback interval.
pub fn spontaneous_period(recent_ap_count: usize, params: &SynapseParams) -> f64 {
    params.t_ves_release_base * (1 + recent_ap_count) as f64
}

/// Returns the time of the next spontaneous window scheduled at `now`.
pub fn schedule_next_spontaneous(recent_ap_count: usize, now: f64, params: &SynapseParams) -> f64 {
    now + spontaneous_period(recent_ap_count, params)
}

/// `(pool + new) * exp(-decay_rate * dt)` with `dt` in seconds.
pub fn decay_and_accumulate(pool: f64, new_vesicles: f64, dt_s: f64, params: &SynapseParams) -> f64 {
    decay_with_factor(pool, new_vesicles, (-params.decay_rate * dt_s).exp())
}

#[inline]
pub fn decay_with_factor(pool: f64, new_vesicles: f64, factor: f64) -> f64 {
    (pool + new_vesicles) * factor
}

/// Scale applied to inhibitory current at postsynaptic voltage `u_post`.
#[inline]
pub fn inhibitory_attenuation(u_post: f64, params: &SynapseParams) -> f64 {
    if u_post >= params.thres_inh {
        1.0
    } else {
        (-params.atten_coeff * (params.thres_inh - u_post)).exp().max(params.atten_floor)
    }
}

/// Current injected by one synapse, clamped to `+-i_syn_max`.
#[inline]
pub fn synaptic_current(syn: &SynapseState, u_post: f64, params: &SynapseParams) -> f64 {
    let drive = syn.receptors * syn.pool * params.du_per_ves;
    let current = if syn.excitatory {
        drive * params.g_ampa
    } else {
        let i = -drive * params.g_gaba;
        if i < 0.0 {
            i * inhibitory_attenuation(u_post, params)
        } else {
            i
        }
    };
    current.clamp(-params.i_syn_max, params.i_syn_max)
}
