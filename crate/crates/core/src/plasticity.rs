//! Spike-timing-dependent plasticity of receptor counts.
//!
//! Pair timing is `delta_t = t_pre - t_post`. Causal pairs (`delta_t <= 0`)
//! add receptors, acausal pairs remove them, for both AMPA and GABA synapses.
//! Updates are damped by the soft normalization `f(R)` and clamped to the
//! open interval `(0, 2 R_initial)`.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ConfigResult};
use crate::synapse::SynapseState;

/// Distance kept from the hard bounds so they stay strict.
pub const R_MIN_EPS: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Each spike pairs with the most recent partner spike only.
    Nearest,
    /// Each spike pairs with every partner spike inside the window.
    AllPairs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StdpParams {
    /// Learning window (ms).
    pub window: f64,
    /// Kernel time constant (ms).
    pub tau: f64,
    pub amplitude: f64,
    pub enabled_exc: bool,
    pub enabled_inh: bool,
    pub pairing: Pairing,
}

impl Default for StdpParams {
    fn default() -> Self {
        Self { window: 50.0, tau: 4.0, amplitude: 1e7, enabled_exc: true, enabled_inh: true, pairing: Pairing::Nearest }
    }
}

impl StdpParams {
    pub fn validate(&self) -> ConfigResult<()> {
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err(ConfigError::invalid("stdp", "window must be > 0"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(ConfigError::invalid("stdp", "tau must be > 0"));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(ConfigError::invalid("stdp", "amplitude must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairEvent {
    pub synapse_id: usize,
    /// `t_pre - t_post` (ms).
    pub delta_t: f64,
    pub causal: bool,
    /// Time of the later spike of the pair, used to order updates.
    pub time: f64,
}

/// Soft normalization: `1 / (R - 1)` above 5 receptors, 0.25 otherwise.
pub fn soft_norm(receptors: f64) -> f64 {
    if receptors > 5.0 {
        1.0 / (receptors - 1.0)
    } else {
        0.25
    }
}

/// Receptor change for one spike pair. Zero outside the learning window.
/// The kernel is identical for excitatory and inhibitory synapses.
pub fn stdp_delta(receptors: f64, delta_t: f64, params: &StdpParams) -> f64 {
    if delta_t.abs() > params.window {
        return 0.0;
    }
    let magnitude = params.amplitude * soft_norm(receptors) * (-delta_t.abs() / params.tau).exp();
    if delta_t <= 0.0 {
        magnitude
    } else {
        -magnitude
    }
}

/// Adds `delta` to the receptor count, keeping it strictly inside `(0, 2 R_initial)`.
pub fn apply_plasticity(syn: &mut SynapseState, delta: f64) {
    let upper = 2.0 * syn.receptors_initial - R_MIN_EPS;
    syn.receptors = (syn.receptors + delta).clamp(R_MIN_EPS, upper);
}

/// Pair events for one synapse triggered by spikes later than `since`.
///
/// Both histories must be sorted ascending and reach back at least one
/// window before `since`. A postsynaptic spike pairs with presynaptic spikes
/// at or before it (causal); a presynaptic spike pairs with postsynaptic
/// spikes strictly before it (acausal), so no spike pair is counted twice.
pub fn collect_pairs(synapse_id: usize, pre: &[f64], post: &[f64], since: f64, params: &StdpParams) -> Vec<PairEvent> {
    let mut events = Vec::new();
    let window = params.window;

    for &t_post in post.iter().filter(|&&t| t > since) {
        let end = pre.partition_point(|&t| t <= t_post);
        let partners = &pre[..end];
        let chosen: &[f64] = match params.pairing {
            Pairing::Nearest => partners.last().map_or(&[], std::slice::from_ref),
            Pairing::AllPairs => partners,
        };
        for &t_pre in chosen.iter().rev() {
            if t_post - t_pre > window {
                break;
            }
            events.push(PairEvent { synapse_id, delta_t: t_pre - t_post, causal: true, time: t_post });
        }
    }

    for &t_pre in pre.iter().filter(|&&t| t > since) {
        let end = post.partition_point(|&t| t < t_pre);
        let partners = &post[..end];
        let chosen: &[f64] = match params.pairing {
            Pairing::Nearest => partners.last().map_or(&[], std::slice::from_ref),
            Pairing::AllPairs => partners,
        };
        for &t_post in chosen.iter().rev() {
            if t_pre - t_post > window {
                break;
            }
            events.push(PairEvent { synapse_id, delta_t: t_pre - t_post, causal: false, time: t_pre });
        }
    }

    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(b.causal.cmp(&a.causal)).then(a.delta_t.total_cmp(&b.delta_t)));
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn syn(receptors: f64) -> SynapseState {
        SynapseState {
            pre: 0,
            post: 1,
            excitatory: true,
            receptors,
            receptors_initial: receptors,
            pool: 0.0,
            next_spont_time: 0.0,
        }
    }

    #[test]
    fn soft_norm_values() {
        assert!((soft_norm(120.0) - 1.0 / 119.0).abs() < 1e-15);
        assert!((soft_norm(120.0) - 0.008403).abs() < 1e-6);
        assert_eq!(soft_norm(3.0), 0.25);
        assert_eq!(soft_norm(5.0), 0.25);
        assert!((soft_norm(5.000001) - 0.25).abs() < 1e-6);
    }

    #[test]
    fn kernel_values() {
        let p = StdpParams::default();
        assert_eq!(stdp_delta(120.0, 60.0, &p), 0.0);
        assert_eq!(stdp_delta(120.0, -60.0, &p), 0.0);
        let plus = stdp_delta(120.0, -4.0, &p);
        assert!((plus - 1e7 / 119.0 * (-1f64).exp()).abs() < 1e-6);
        assert_eq!(stdp_delta(120.0, 4.0, &p), -plus);
        assert!(stdp_delta(120.0, 0.0, &p) > 0.0);
    }

    #[test]
    fn apply_clamps() {
        let mut s = syn(120.0);
        apply_plasticity(&mut s, 1e6);
        assert!(s.receptors < 240.0 && s.receptors > 239.99);
        let mut s = syn(120.0);
        apply_plasticity(&mut s, -1e6);
        assert!(s.receptors > 0.0 && s.receptors < 0.01);
        let mut s = syn(120.0);
        apply_plasticity(&mut s, 5.0);
        assert_eq!(s.receptors, 125.0);
    }

    #[test]
    fn pairing_examples() {
        let p = StdpParams::default();
        let ev = collect_pairs(7, &[100.0], &[104.0], 0.0, &p);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].synapse_id, 7);
        assert_eq!(ev[0].delta_t, -4.0);
        assert!(ev[0].causal);

        assert!(collect_pairs(0, &[100.0], &[30.0], 0.0, &p).is_empty());

        let ev = collect_pairs(0, &[96.0, 99.0], &[100.0], 0.0, &p);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].delta_t, -1.0);
    }

    #[test]
    fn pairing_respects_since_and_simultaneity() {
        let p = StdpParams::default();
        // post at 100 was handled in an earlier tick; only the pre spike at 110 is new
        let ev = collect_pairs(0, &[95.0, 110.0], &[100.0], 105.0, &p);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].delta_t, 10.0);
        assert!(!ev[0].causal);
        // simultaneous spikes produce a single causal event
        let ev = collect_pairs(0, &[50.0], &[50.0], 0.0, &p);
        assert_eq!(ev.len(), 1);
        assert!(ev[0].causal);
        assert_eq!(ev[0].delta_t, 0.0);
    }

    #[test]
    fn all_pairs_mode() {
        let p = StdpParams { pairing: Pairing::AllPairs, ..StdpParams::default() };
        let ev = collect_pairs(0, &[96.0, 99.0], &[100.0], 0.0, &p);
        assert_eq!(ev.len(), 2);
        assert!(ev.iter().all(|e| e.causal));
    }

    proptest! {
        #[test]
        fn bounds_hold(deltas in proptest::collection::vec(-1e8f64..1e8, 1..100), r0 in 1.0f64..400.0) {
            let mut s = syn(r0);
            for d in deltas {
                apply_plasticity(&mut s, d);
                prop_assert!(s.receptors > 0.0 && s.receptors < 2.0 * r0);
            }
        }

        #[test]
        fn window_cutoff(dt in 50.0001f64..1e4, r in 0.1f64..500.0) {
            let p = StdpParams::default();
            prop_assert_eq!(stdp_delta(r, dt, &p), 0.0);
            prop_assert_eq!(stdp_delta(r, -dt, &p), 0.0);
        }

        #[test]
        fn sign_and_antisymmetry(dt in 1e-6f64..50.0, r in 0.1f64..500.0) {
            let p = StdpParams::default();
            let causal = stdp_delta(r, -dt, &p);
            let acausal = stdp_delta(r, dt, &p);
            prop_assert!(causal >= 0.0 && acausal <= 0.0);
            prop_assert_eq!(causal, -acausal);
        }

        #[test]
        fn soft_norm_damps(r2 in 5.001f64..400.0, extra in 0.001f64..400.0, dt in -50.0f64..50.0) {
            let p = StdpParams::default();
            let r1 = r2 + extra;
            let (d1, d2) = (stdp_delta(r1, dt, &p).abs(), stdp_delta(r2, dt, &p).abs());
            prop_assert!(d1 < d2);
        }

        #[test]
        fn kernel_decays(a in 0.01f64..50.0, b in 0.01f64..50.0) {
            prop_assume!((a - b).abs() > 1e-3);
            let p = StdpParams::default();
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(stdp_delta(120.0, near, &p).abs() > stdp_delta(120.0, far, &p).abs());
        }
    }
}
