//! Clock-driven network simulation.
//!
//! Membranes advance on a fine grid (`dt_membrane`, 10 us by default); all
//! synaptic work happens on the coarser synaptic tick (`t_update`, 1 ms). On
//! each tick, in this order:
//!
//! 1. presynaptic spikes whose axonal delay has elapsed trigger the release
//!    lottery on every outgoing synapse;
//! 2. due spontaneous release windows fire and are rescheduled;
//! 3. every vesicle pool decays over the tick;
//! 4. synaptic currents are summed per postsynaptic neuron in synapse order
//!    and clamped;
//! 5. plasticity runs for spikes emitted since the previous tick.
//!
//! The summed currents are then held constant while every neuron integrates
//! the membrane steps up to the next tick. Neurons do not interact between
//! ticks, so a tick's membrane work is data-parallel over neurons.
//!
//! Every synapse owns its random stream, and current sums and plasticity
//! updates run in a fixed order, so results do not depend on the number of
//! worker threads.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ConfigResult, SimError};
use crate::hh::{integrate_step, NeuronParams, NeuronState};
use crate::io::{SpikeSink, VoltageTrace};
use crate::plasticity::{apply_plasticity, collect_pairs, stdp_delta, StdpParams};
use crate::rng::{stream, StreamKind};
use crate::synapse::{
    decay_with_factor, on_ap_arrival, on_spontaneous_window, schedule_next_spontaneous, synaptic_current, SynapseParams,
    SynapseState,
};
use crate::topology::{StimulusProtocol, Topology};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub neuron: NeuronParams,
    pub synapse: SynapseParams,
    pub stdp: StdpParams,
}

impl ModelParams {
    pub fn validate(&self) -> ConfigResult<()> {
        self.neuron.validate()?;
        self.synapse.validate()?;
        self.stdp.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Membrane integration step (ms).
    pub dt_membrane: f64,
    /// Simulated duration (s).
    pub duration: f64,
    pub record_voltage: bool,
    /// Voltage sampling period (ms).
    pub voltage_sample_period: f64,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub worker_count: usize,
    /// Checkpoint period (s).
    pub checkpoint_period: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_membrane: 0.01,
            duration: 1800.0,
            record_voltage: false,
            voltage_sample_period: 1.0,
            seed: 1,
            worker_count: 0,
            checkpoint_period: None,
        }
    }
}

/// Integer number of `step`s in `span`, if `span` is a whole multiple.
fn whole_multiple(span: f64, step: f64) -> Option<u64> {
    let ratio = span / step;
    let rounded = ratio.round();
    (rounded >= 1.0 && (ratio - rounded).abs() < 1e-9 * rounded.max(1.0)).then_some(rounded as u64)
}

impl SimConfig {
    pub fn validate(&self, synapse: &SynapseParams) -> ConfigResult<()> {
        if !(self.dt_membrane.is_finite() && self.dt_membrane > 0.0) {
            return Err(ConfigError::invalid("simulation", "dt_membrane must be > 0"));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(ConfigError::invalid("simulation", "duration must be >= 0"));
        }
        self.steps_per_tick(synapse)?;
        if self.record_voltage {
            self.steps_per_sample()?;
        }
        if let Some(p) = self.checkpoint_period {
            if !(p.is_finite() && p > 0.0) {
                return Err(ConfigError::invalid("simulation", "checkpoint_period must be > 0"));
            }
        }
        Ok(())
    }

    pub fn steps_per_tick(&self, synapse: &SynapseParams) -> ConfigResult<u64> {
        whole_multiple(synapse.t_update, self.dt_membrane)
            .ok_or_else(|| ConfigError::invalid("simulation", "the synaptic tick must be an integer multiple of dt_membrane"))
    }

    pub fn steps_per_sample(&self) -> ConfigResult<u64> {
        whole_multiple(self.voltage_sample_period, self.dt_membrane)
            .ok_or_else(|| ConfigError::invalid("simulation", "voltage_sample_period must be an integer multiple of dt_membrane"))
    }

    pub fn workers(&self) -> usize {
        if self.worker_count == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            self.worker_count
        }
    }
}

/// Summary of a completed `run`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub spikes: u64,
    pub steps: u64,
    pub end_time_ms: f64,
    pub wall_time_s: f64,
    pub steps_per_s: f64,
    pub neuron_updates_per_s: f64,
}

/// Complete mutable state of a network simulation.
///
/// Equality compares the persistent state only; the per-tick synaptic
/// currents are recomputed before use and are not part of it.
#[derive(Clone, Debug)]
pub struct World {
    pub(crate) params: ModelParams,
    pub(crate) dt: f64,
    pub(crate) steps_per_tick: u64,
    pub(crate) topology: Topology,
    pub(crate) stimulus: StimulusProtocol,
    pub(crate) neurons: Vec<NeuronState>,
    /// Delivery tick -> presynaptic neurons whose spike arrives then.
    pub(crate) pending: BTreeMap<u64, Vec<u32>>,
    /// Recent somatic spike times per neuron (ms), ascending.
    pub(crate) history: Vec<Vec<f64>>,
    pub(crate) synapse_rngs: Vec<ChaCha8Rng>,
    pub(crate) step: u64,

    // derived from the fields above
    i_syn: Vec<f64>,
    phi: f64,
    decay_factor: f64,
    in_offsets: Vec<usize>,
    out_offsets: Vec<usize>,
    out_synapses: Vec<usize>,
    stim_windows: Vec<Option<(f64, f64)>>,
    history_keep: f64,
    spike_buffers: Vec<Vec<u64>>,
    pool: WorkerPool,
}

impl PartialEq for World {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.dt == other.dt
            && self.topology == other.topology
            && self.stimulus == other.stimulus
            && self.neurons == other.neurons
            && self.pending == other.pending
            && self.history == other.history
            && self.synapse_rngs == other.synapse_rngs
            && self.step == other.step
    }
}

/// Thread pool for the data-parallel phases. Not part of the simulation
/// state: results are identical with or without it.
#[derive(Clone, Default)]
struct WorkerPool(Option<Arc<rayon::ThreadPool>>);

impl std::fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "WorkerPool({})", self.0.as_ref().map_or(1, |p| p.current_num_threads()))
    }
}

impl World {
    /// Places every neuron at rest and draws each synapse's first
    /// spontaneous window uniformly within one base period.
    pub fn new(params: ModelParams, sim: &SimConfig, mut topology: Topology, stimulus: StimulusProtocol) -> ConfigResult<Self> {
        params.validate()?;
        sim.validate(&params.synapse)?;
        topology.validate()?;
        let n = topology.n_neurons();
        if stimulus.targets.iter().any(|&t| t as usize >= n) || stimulus.targets.len() != stimulus.start_times.len() {
            return Err(ConfigError::invalid("stimulus", "stimulus targets out of range"));
        }
        let mut synapse_rngs = Vec::with_capacity(topology.synapses.len());
        for (idx, syn) in topology.synapses.iter_mut().enumerate() {
            let mut rng = stream(sim.seed, StreamKind::Synapse, idx as u64);
            syn.pool = 0.0;
            syn.next_spont_time = rng.random::<f64>() * params.synapse.t_ves_release_base;
            synapse_rngs.push(rng);
        }
        let neurons = vec![NeuronState::at_rest(&params.neuron); n];
        let world = Self::assemble(
            params,
            sim.dt_membrane,
            topology,
            stimulus,
            neurons,
            BTreeMap::new(),
            vec![Vec::new(); n],
            synapse_rngs,
            0,
        )?;
        Ok(world)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        params: ModelParams,
        dt: f64,
        topology: Topology,
        stimulus: StimulusProtocol,
        neurons: Vec<NeuronState>,
        pending: BTreeMap<u64, Vec<u32>>,
        history: Vec<Vec<f64>>,
        synapse_rngs: Vec<ChaCha8Rng>,
        step: u64,
    ) -> ConfigResult<Self> {
        params.validate()?;
        topology.validate()?;
        let n = topology.n_neurons();
        if neurons.len() != n || history.len() != n || synapse_rngs.len() != topology.synapses.len() {
            return Err(ConfigError::invalid("simulation", "state arrays do not match the topology"));
        }
        let steps_per_tick = whole_multiple(params.synapse.t_update, dt)
            .ok_or_else(|| ConfigError::invalid("simulation", "the synaptic tick must be an integer multiple of dt_membrane"))?;

        let mut in_offsets = vec![0usize; n + 1];
        for s in &topology.synapses {
            in_offsets[s.post as usize + 1] += 1;
        }
        for i in 0..n {
            in_offsets[i + 1] += in_offsets[i];
        }
        let mut out_offsets = vec![0usize; n + 1];
        for s in &topology.synapses {
            out_offsets[s.pre as usize + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
        }
        let mut cursor = out_offsets.clone();
        let mut out_synapses = vec![0usize; topology.synapses.len()];
        for (idx, s) in topology.synapses.iter().enumerate() {
            let slot = &mut cursor[s.pre as usize];
            out_synapses[*slot] = idx;
            *slot += 1;
        }

        let stim_windows = stimulus.windows(n);
        let history_keep = params.stdp.window.max(params.synapse.t_lookback_ap) + params.synapse.t_update;
        Ok(Self {
            phi: params.neuron.temperature_factor(),
            decay_factor: params.synapse.tick_decay_factor(),
            params,
            dt,
            steps_per_tick,
            topology,
            stimulus,
            neurons,
            pending,
            history,
            synapse_rngs,
            step,
            i_syn: vec![0.0; n],
            in_offsets,
            out_offsets,
            out_synapses,
            stim_windows,
            history_keep,
            spike_buffers: vec![Vec::new(); n],
            pool: WorkerPool::default(),
        })
    }

    /// Uses `workers` threads for the per-neuron phases; 1 runs everything
    /// on the calling thread.
    pub fn set_workers(&mut self, workers: usize) -> Result<(), SimError> {
        self.pool = if workers <= 1 {
            WorkerPool(None)
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| SimError::Io(std::io::Error::other(e)))?;
            WorkerPool(Some(Arc::new(pool)))
        };
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.pool.0.as_ref().map_or(1, |p| p.current_num_threads())
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn stimulus(&self) -> &StimulusProtocol {
        &self.stimulus
    }

    pub fn neurons(&self) -> &[NeuronState] {
        &self.neurons
    }

    pub fn synapses(&self) -> &[SynapseState] {
        &self.topology.synapses
    }

    /// Synaptic current held for each neuron since the last tick. Zero on a
    /// freshly built or restored world until its first tick.
    pub fn synaptic_currents(&self) -> &[f64] {
        &self.i_syn
    }

    pub fn n_neurons(&self) -> usize {
        self.neurons.len()
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps_per_tick(&self) -> u64 {
        self.steps_per_tick
    }

    pub fn time_ms(&self) -> f64 {
        self.time_of(self.step)
    }

    pub fn on_tick(&self) -> bool {
        self.step.is_multiple_of(self.steps_per_tick)
    }

    fn time_of(&self, step: u64) -> f64 {
        step as f64 * self.dt
    }

    /// Synaptic work at the current tick (see module docs).
    fn synaptic_phase(&mut self) -> Result<(), SimError> {
        let n = self.neurons.len();
        let now = self.time_ms();
        let tick = self.step / self.steps_per_tick;

        let mut arrivals = vec![0u32; n];
        if let Some(pres) = self.pending.remove(&tick) {
            for p in pres {
                arrivals[p as usize] += 1;
            }
        }

        let lookback_start = now - self.params.synapse.t_lookback_ap;
        let recent: Vec<usize> = self.history.iter().map(|h| h.len() - h.partition_point(|&t| t < lookback_start)).collect();

        let sp = &self.params.synapse;
        let decay = self.decay_factor;
        let neurons = &self.neurons;
        let update_neuron = |post: usize, syns: &mut [SynapseState], rngs: &mut [ChaCha8Rng]| -> f64 {
            let u_post = neurons[post].u;
            let mut total = 0.0;
            for (syn, rng) in syns.iter_mut().zip(rngs.iter_mut()) {
                let mut released = 0.0;
                for _ in 0..arrivals[syn.pre as usize] {
                    released += on_ap_arrival(sp, rng);
                }
                if syn.next_spont_time <= now {
                    released += on_spontaneous_window(sp, rng);
                    syn.next_spont_time = schedule_next_spontaneous(recent[syn.pre as usize], now, sp);
                }
                syn.pool = decay_with_factor(syn.pool, released, decay);
                total += synaptic_current(syn, u_post, sp);
            }
            total.clamp(-sp.i_syn_max, sp.i_syn_max)
        };

        if let Some(pool) = self.pool.0.clone() {
            let mut parts = Vec::with_capacity(n);
            let mut syns: &mut [SynapseState] = &mut self.topology.synapses;
            let mut rngs: &mut [ChaCha8Rng] = &mut self.synapse_rngs;
            for post in 0..n {
                let len = self.in_offsets[post + 1] - self.in_offsets[post];
                let (a, rest_s) = syns.split_at_mut(len);
                let (b, rest_r) = rngs.split_at_mut(len);
                parts.push((a, b));
                syns = rest_s;
                rngs = rest_r;
            }
            let i_syn = &mut self.i_syn;
            pool.install(|| {
                i_syn
                    .par_iter_mut()
                    .zip(parts.into_par_iter())
                    .enumerate()
                    .for_each(|(post, (out, (s, r)))| *out = update_neuron(post, s, r))
            });
        } else {
            for post in 0..n {
                let range = self.in_offsets[post]..self.in_offsets[post + 1];
                self.i_syn[post] = update_neuron(post, &mut self.topology.synapses[range.clone()], &mut self.synapse_rngs[range]);
            }
        }
        if let Some(post) = self.i_syn.iter().position(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { quantity: "synaptic current", neuron: post, time_ms: now });
        }

        self.plasticity_phase(now);
        Ok(())
    }

    fn plasticity_phase(&mut self, now: f64) {
        let stdp = &self.params.stdp;
        if !(stdp.enabled_exc || stdp.enabled_inh) || self.step == 0 {
            return;
        }
        let since = self.time_of(self.step - self.steps_per_tick);
        let mut affected = Vec::new();
        for (i, h) in self.history.iter().enumerate() {
            if h.last().is_some_and(|&t| t > since && t <= now) {
                affected.extend(self.in_offsets[i]..self.in_offsets[i + 1]);
                affected.extend_from_slice(&self.out_synapses[self.out_offsets[i]..self.out_offsets[i + 1]]);
            }
        }
        affected.sort_unstable();
        affected.dedup();
        for idx in affected {
            let syn = &mut self.topology.synapses[idx];
            let enabled = if syn.excitatory { stdp.enabled_exc } else { stdp.enabled_inh };
            if !enabled {
                continue;
            }
            let events = collect_pairs(idx, &self.history[syn.pre as usize], &self.history[syn.post as usize], since, stdp);
            for ev in events {
                let delta = stdp_delta(syn.receptors, ev.delta_t, stdp);
                apply_plasticity(syn, delta);
            }
        }
    }

    fn prune_history(&mut self) {
        let cutoff = self.time_ms() - self.history_keep;
        for h in &mut self.history {
            let stale = h.partition_point(|&t| t < cutoff);
            if stale > 0 {
                h.drain(..stale);
            }
        }
    }

    /// Registers spikes emitted at `step` by the neurons in `ids` (ascending).
    fn emit_spikes<S: SpikeSink + ?Sized>(
        &mut self,
        step: u64,
        ids: impl IntoIterator<Item = u32>,
        sink: &mut S,
    ) -> Result<(), SimError> {
        let t = self.time_of(step);
        let tick_len = self.params.synapse.t_update;
        for id in ids {
            sink.record(t, id)?;
            self.history[id as usize].push(t);
            let arrival = t + self.topology.delays[id as usize];
            let tick = (arrival / tick_len).ceil() as u64;
            self.pending.entry(tick).or_default().push(id);
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<(), SimError> {
        match self.neurons.iter().position(|s| !s.u.is_finite()) {
            Some(neuron) => Err(SimError::NonFinite { quantity: "membrane potential", neuron, time_ms: self.time_ms() }),
            None => Ok(()),
        }
    }

    /// Advances by one membrane step, running the synaptic phase first when
    /// the current step lies on a tick.
    pub fn step<S: SpikeSink + ?Sized>(&mut self, sink: &mut S, voltages: Option<&mut VoltageTrace>) -> Result<(), SimError> {
        if self.on_tick() {
            self.prune_history();
            self.synaptic_phase()?;
        }
        let s = self.step;
        let steps_per_sample = voltages.as_ref().map(|v| sample_stride(v.period_ms, self.dt));
        if let (Some(v), Some(stride)) = (voltages, steps_per_sample) {
            if s.is_multiple_of(stride) {
                for (trace, n) in v.samples.iter_mut().zip(&self.neurons) {
                    trace.push(n.u as f32);
                }
            }
        }
        let t = self.time_of(s);
        let t_after = self.time_of(s + 1);
        let np = &self.params.neuron;
        let mut fired = Vec::new();
        for (i, state) in self.neurons.iter_mut().enumerate() {
            let i_ext = stimulus_current(self.stim_windows[i], self.stimulus.amplitude, t);
            let (next, spike) = integrate_step(state, self.i_syn[i], i_ext, np, self.phi, self.dt, t_after);
            *state = next;
            if spike.is_some() {
                fired.push(i as u32);
            }
        }
        self.step += 1;
        self.check_finite()?;
        self.emit_spikes(s + 1, fired, sink)
    }

    /// Advances one full synaptic tick. Must be called on a tick boundary.
    pub fn advance_tick<S: SpikeSink + ?Sized>(
        &mut self,
        sink: &mut S,
        voltages: Option<&mut VoltageTrace>,
    ) -> Result<(), SimError> {
        if !self.on_tick() {
            return Err(SimError::OffTick { step: self.step });
        }
        self.prune_history();
        self.synaptic_phase()?;

        let first = self.step;
        let n_steps = self.steps_per_tick;
        let ctx = TickContext {
            params: &self.params.neuron,
            phi: self.phi,
            dt: self.dt,
            amplitude: self.stimulus.amplitude,
            first,
            n_steps,
            sample_stride: voltages.as_ref().map(|v| sample_stride(v.period_ms, self.dt)),
        };
        let mut traces: Vec<Option<&mut Vec<f32>>> = match voltages {
            Some(v) => v.samples.iter_mut().map(Some).collect(),
            None => (0..self.neurons.len()).map(|_| None).collect(),
        };

        if let Some(pool) = self.pool.0.clone() {
            let (i_syn, windows) = (&self.i_syn, &self.stim_windows);
            let (neurons, buffers) = (&mut self.neurons, &mut self.spike_buffers);
            pool.install(|| {
                neurons
                    .par_chunks_mut(LOCKSTEP)
                    .zip(buffers.par_chunks_mut(LOCKSTEP))
                    .zip(traces.par_chunks_mut(LOCKSTEP))
                    .enumerate()
                    .for_each(|(c, ((states, spikes), tr))| {
                        let range = c * LOCKSTEP..c * LOCKSTEP + states.len();
                        ctx.integrate(states, &i_syn[range.clone()], &windows[range], spikes, tr)
                    })
            });
        } else {
            ctx.integrate(&mut self.neurons, &self.i_syn, &self.stim_windows, &mut self.spike_buffers, &mut traces);
        }
        self.step += n_steps;
        self.check_finite()?;

        let mut fired: Vec<(u64, u32)> = Vec::new();
        for (i, buf) in self.spike_buffers.iter_mut().enumerate() {
            fired.extend(buf.drain(..).map(|s| (s, i as u32)));
        }
        fired.sort_unstable();
        let mut k = 0;
        while k < fired.len() {
            let step = fired[k].0;
            let end = k + fired[k..].iter().take_while(|f| f.0 == step).count();
            let ids: Vec<u32> = fired[k..end].iter().map(|f| f.1).collect();
            self.emit_spikes(step, ids, sink)?;
            k = end;
        }
        Ok(())
    }

    /// Runs until `end_ms`, calling `after_tick` after every completed tick.
    pub fn run_until<S, F>(
        &mut self,
        end_ms: f64,
        workers: usize,
        sink: &mut S,
        mut voltages: Option<&mut VoltageTrace>,
        mut after_tick: F,
    ) -> Result<RunSummary, SimError>
    where
        S: SpikeSink + ?Sized,
        F: FnMut(&World) -> Result<(), SimError>,
    {
        if workers != self.workers() {
            self.set_workers(workers)?;
        }
        let end_step = (end_ms / self.dt).round() as u64;
        let start_step = self.step;
        let started = Instant::now();
        let mut counter = Counted { inner: sink, count: 0 };
        while self.step < end_step {
            if self.on_tick() && self.step + self.steps_per_tick <= end_step {
                self.advance_tick(&mut counter, voltages.as_deref_mut())?;
            } else {
                self.step(&mut counter, voltages.as_deref_mut())?;
            }
            if self.on_tick() {
                after_tick(self)?;
            }
        }
        let wall = started.elapsed().as_secs_f64();
        let steps = self.step - start_step;
        let rate = |x: f64| if wall > 0.0 { x / wall } else { 0.0 };
        Ok(RunSummary {
            spikes: counter.count,
            steps,
            end_time_ms: self.time_ms(),
            wall_time_s: wall,
            steps_per_s: rate(steps as f64),
            neuron_updates_per_s: rate(steps as f64 * self.neurons.len() as f64),
        })
    }
}

fn sample_stride(period_ms: f64, dt: f64) -> u64 {
    whole_multiple(period_ms, dt).unwrap_or(1)
}

#[inline]
fn stimulus_current(window: Option<(f64, f64)>, amplitude: f64, t: f64) -> f64 {
    match window {
        Some((start, end)) if t >= start && t < end => amplitude,
        _ => 0.0,
    }
}

struct TickContext<'a> {
    params: &'a NeuronParams,
    phi: f64,
    dt: f64,
    amplitude: f64,
    first: u64,
    n_steps: u64,
    sample_stride: Option<u64>,
}

/// Neurons per parallel work item. Within an item all neurons advance one
/// step before any takes the next, which lets their independent arithmetic
/// overlap in the pipeline.
const LOCKSTEP: usize = 16;

impl TickContext<'_> {
    fn integrate(
        &self,
        states: &mut [NeuronState],
        i_syn: &[f64],
        windows: &[Option<(f64, f64)>],
        spikes: &mut [Vec<u64>],
        traces: &mut [Option<&mut Vec<f32>>],
    ) {
        for s in self.first..self.first + self.n_steps {
            if self.sample_stride.is_some_and(|stride| s % stride == 0) {
                for (trace, state) in traces.iter_mut().zip(states.iter()) {
                    if let Some(trace) = trace {
                        trace.push(state.u as f32);
                    }
                }
            }
            let t = s as f64 * self.dt;
            let t_after = (s + 1) as f64 * self.dt;
            for (j, state) in states.iter_mut().enumerate() {
                let i_ext = stimulus_current(windows[j], self.amplitude, t);
                let (next, spike) = integrate_step(state, i_syn[j], i_ext, self.params, self.phi, self.dt, t_after);
                *state = next;
                if spike.is_some() {
                    spikes[j].push(s + 1);
                }
            }
        }
    }
}

struct Counted<'a, S: ?Sized> {
    inner: &'a mut S,
    count: u64,
}

impl<S: SpikeSink + ?Sized> SpikeSink for Counted<'_, S> {
    fn record(&mut self, time_ms: f64, neuron: u32) -> std::io::Result<()> {
        self.count += 1;
        self.inner.record(time_ms, neuron)
    }
}

/// Builds a world from parameters and runs it for `sim.duration`, streaming
/// spikes into `sink`.
pub fn run<S: SpikeSink + ?Sized>(
    params: ModelParams,
    topology: Topology,
    stimulus: StimulusProtocol,
    sim: &SimConfig,
    sink: &mut S,
) -> Result<(World, RunSummary, Option<VoltageTrace>), SimError> {
    let mut world = World::new(params, sim, topology, stimulus)?;
    let mut trace = sim.record_voltage.then(|| VoltageTrace::new(world.n_neurons(), sim.voltage_sample_period));
    let summary = world.run_until(sim.duration * 1000.0, sim.workers(), sink, trace.as_mut(), |_| Ok(()))?;
    Ok((world, summary, trace))
}
