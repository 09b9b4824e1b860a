//! Single-compartment Hodgkin-Huxley dynamics.
//!
//! Units are mV and ms throughout. The rate functions take the depolarization
//! from rest, `du = u - u_rest`, in mV and return rates in 1/ms, scaled by the
//! temperature factor `phi = 3^((T - 6.3) / 10)`.
//!
//! ```text
//! C_m du/dt = -(I_Na + I_K + I_L) + I_syn + I_ext
//! I_Na = g_Na (u - E_Na) m^3 h
//! I_K  = g_K  (u - E_K)  n^4
//! I_L  = g_L  (u - E_L)
//! dx/dt = (1 / tau_x) [alpha_x (1 - x) - beta_x x]
//! ```
//!
//! Both the membrane and the gates use explicit forward Euler.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ConfigResult};

/// Default neuron parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuronParams {
    /// Resting potential (mV).
    pub u_rest: f64,
    /// Spike detection threshold (mV).
    pub u_thres: f64,
    /// Hard upper clamp on the membrane potential (mV).
    pub u_max: f64,
    /// Hard lower clamp on the membrane potential (mV).
    pub u_min: f64,
    pub e_na: f64,
    pub e_k: f64,
    pub e_l: f64,
    pub g_na: f64,
    pub g_k: f64,
    pub g_l: f64,
    /// Membrane capacitance.
    pub c_m: f64,
    /// Temperature (degrees Celsius).
    pub temperature: f64,
    pub tau_m: f64,
    pub tau_n: f64,
    pub tau_h: f64,
    /// Guard constant for the removable singularities of `alpha_m` and `alpha_n`.
    pub epsilon: f64,
    /// Minimum interval between two reported spikes of one neuron (ms).
    pub min_isi: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            u_rest: -65.0,
            u_thres: -35.0,
            u_max: 700.0,
            u_min: -100.0,
            e_na: 50.0,
            e_k: -77.0,
            e_l: -60.0,
            g_na: 120.0,
            g_k: 50.0,
            g_l: 0.3,
            c_m: 0.1,
            temperature: 20.0,
            tau_m: 0.3,
            tau_n: 0.32,
            tau_h: 0.6,
            epsilon: 1e-6,
            min_isi: 2.0,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> ConfigResult<()> {
        let all = [
            self.u_rest,
            self.u_thres,
            self.u_max,
            self.u_min,
            self.e_na,
            self.e_k,
            self.e_l,
            self.g_na,
            self.g_k,
            self.g_l,
            self.c_m,
            self.temperature,
            self.tau_m,
            self.tau_n,
            self.tau_h,
            self.epsilon,
            self.min_isi,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::invalid("neuron", "all parameters must be finite"));
        }
        if !(self.u_min < self.u_rest && self.u_rest < self.u_thres && self.u_thres < self.u_max) {
            return Err(ConfigError::invalid("neuron", "require u_min < u_rest < u_thres < u_max"));
        }
        if self.g_na < 0.0 || self.g_k < 0.0 || self.g_l < 0.0 {
            return Err(ConfigError::invalid("neuron", "conductances must be >= 0"));
        }
        if self.c_m <= 0.0 {
            return Err(ConfigError::invalid("neuron", "c_m must be > 0"));
        }
        if self.tau_m <= 0.0 || self.tau_n <= 0.0 || self.tau_h <= 0.0 {
            return Err(ConfigError::invalid("neuron", "tau_m, tau_n, tau_h must be > 0"));
        }
        if self.epsilon <= 0.0 {
            return Err(ConfigError::invalid("neuron", "epsilon must be > 0"));
        }
        if self.min_isi < 0.0 {
            return Err(ConfigError::invalid("neuron", "min_isi must be >= 0"));
        }
        Ok(())
    }

    /// Temperature scaling factor `3^((T - 6.3) / 10)`.
    pub fn temperature_factor(&self) -> f64 {
        3f64.powf((self.temperature - 6.3) / 10.0)
    }
}

/// Open fractions of the sodium activation (`m`), sodium inactivation (`h`)
/// and potassium activation (`n`) gates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatingState {
    pub m: f64,
    pub h: f64,
    pub n: f64,
}

impl GatingState {
    /// Steady-state open fractions `alpha / (alpha + beta)` for the given rates.
    pub fn steady_state(rates: &RateConstants) -> Self {
        Self {
            m: rates.alpha_m / (rates.alpha_m + rates.beta_m),
            h: rates.alpha_h / (rates.alpha_h + rates.beta_h),
            n: rates.alpha_n / (rates.alpha_n + rates.beta_n),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateConstants {
    pub alpha_m: f64,
    pub beta_m: f64,
    pub alpha_n: f64,
    pub beta_n: f64,
    pub alpha_h: f64,
    pub beta_h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    /// Membrane potential (mV).
    pub u: f64,
    pub gates: GatingState,
    /// Time of the last reported spike (ms).
    pub last_spike_time: Option<f64>,
    pub above_threshold: bool,
}

impl NeuronState {
    /// A neuron at `u_rest` with its gates at their steady state for that voltage.
    pub fn at_rest(params: &NeuronParams) -> Self {
        let rates = rate_constants(params.u_rest, params);
        Self {
            u: params.u_rest,
            gates: GatingState::steady_state(&rates),
            last_spike_time: None,
            above_threshold: params.u_rest >= params.u_thres,
        }
    }
}

/// Evaluates the six voltage-dependent gating rates at membrane potential `u`.
pub fn rate_constants(u: f64, params: &NeuronParams) -> RateConstants {
    rates_with_factor(u, params.temperature_factor(), params)
}

/// Same as [`rate_constants`] with a precomputed temperature factor.
///
/// Only two exponentials are evaluated: `exp(-du/80)` and its powers give the
/// `/20` and `/10` scales, and `exp(-du/18)`. Near the removable
/// singularities of `alpha_m` and `alpha_n`, where `e^x - 1` would lose
/// precision to cancellation, `exp_m1` is used instead.
#[inline]
pub fn rates_with_factor(u: f64, phi: f64, params: &NeuronParams) -> RateConstants {
    const E_1: f64 = std::f64::consts::E;
    const E_2_5: f64 = 12.182493960703473;
    const E_3: f64 = 20.085536923187668;
    let du = u - params.u_rest;
    let eps = params.epsilon;
    let e80 = (-du * (1.0 / 80.0)).exp();
    let e40 = e80 * e80;
    let e20 = e40 * e40;
    let e10 = e20 * e20;
    let xm = 2.5 - 0.1 * du;
    let xn = 1.0 - 0.1 * du;
    let em1_m = if xm.abs() < NEAR_SINGULAR { xm.exp_m1() } else { E_2_5 * e10 - 1.0 };
    let em1_n = if xn.abs() < NEAR_SINGULAR { xn.exp_m1() } else { E_1 * e10 - 1.0 };
    RateConstants {
        alpha_m: phi * guarded_ratio(eps + xm, eps + em1_m),
        beta_m: 4.0 * phi * (-du * (1.0 / 18.0)).exp(),
        alpha_n: phi * guarded_ratio(eps + 0.1 * xn, eps + em1_n),
        beta_n: 0.125 * phi * e80,
        alpha_h: 0.07 * phi * e20,
        beta_h: phi / (E_3 * e10 + 1.0),
    }
}

const NEAR_SINGULAR: f64 = 0.05;

// The epsilon-guarded quotients keep a pole a distance ~epsilon away from the
// removable singularity, where they can go negative or overflow.
#[inline]
fn guarded_ratio(num: f64, den: f64) -> f64 {
    let r = num / den;
    if r.is_finite() {
        r.max(0.0)
    } else {
        0.0
    }
}

#[inline]
fn euler_gate(x: f64, alpha: f64, beta: f64, dt_over_tau: f64) -> f64 {
    (x + dt_over_tau * (alpha * (1.0 - x) - beta * x)).clamp(0.0, 1.0)
}

/// One forward-Euler step of the three gating variables, clamped to `[0, 1]`.
#[inline]
pub fn gating_step(gates: GatingState, rates: &RateConstants, params: &NeuronParams, dt: f64) -> GatingState {
    GatingState {
        m: euler_gate(gates.m, rates.alpha_m, rates.beta_m, dt / params.tau_m),
        h: euler_gate(gates.h, rates.alpha_h, rates.beta_h, dt / params.tau_h),
        n: euler_gate(gates.n, rates.alpha_n, rates.beta_n, dt / params.tau_n),
    }
}

/// Ionic current `I_Na + I_K + I_L` at voltage `u` with the given gates.
#[inline]
pub fn ionic_current(u: f64, gates: &GatingState, params: &NeuronParams) -> f64 {
    let m3 = gates.m * gates.m * gates.m;
    let n2 = gates.n * gates.n;
    let i_na = params.g_na * (u - params.e_na) * m3 * gates.h;
    let i_k = params.g_k * (u - params.e_k) * n2 * n2;
    let i_l = params.g_l * (u - params.e_l);
    i_na + i_k + i_l
}

/// Advances the membrane potential by one Euler step using the already-updated
/// gates. The result is clamped to `[u_min, u_max]`; spike bookkeeping is
/// carried over unchanged.
#[inline]
pub fn membrane_step(
    state: &NeuronState,
    gates_next: GatingState,
    i_syn: f64,
    i_ext: f64,
    params: &NeuronParams,
    dt: f64,
) -> NeuronState {
    let i_ion = ionic_current(state.u, &gates_next, params);
    let u = state.u + dt * (-i_ion + i_syn + i_ext) / params.c_m;
    NeuronState { u: u.clamp(params.u_min, params.u_max), gates: gates_next, ..*state }
}

/// Reports a spike at `t` when the potential crosses `u_thres` from below and
/// at least `min_isi` has passed since the previous spike. Updates the spike
/// bookkeeping of `after`.
#[inline]
pub fn detect_spike(before: &NeuronState, after: &mut NeuronState, params: &NeuronParams, t: f64) -> Option<f64> {
    let crossed = before.u < params.u_thres && after.u >= params.u_thres;
    after.above_threshold = after.u >= params.u_thres;
    if !crossed {
        return None;
    }
    match after.last_spike_time {
        Some(last) if t - last < params.min_isi => None,
        _ => {
            after.last_spike_time = Some(t);
            Some(t)
        }
    }
}

/// Integrates one neuron over one membrane step: rates at the current voltage,
/// gate update, membrane update, then spike detection at time `t_after`.
#[inline]
pub fn integrate_step(
    state: &NeuronState,
    i_syn: f64,
    i_ext: f64,
    params: &NeuronParams,
    phi: f64,
    dt: f64,
    t_after: f64,
) -> (NeuronState, Option<f64>) {
    let rates = rates_with_factor(state.u, phi, params);
    let gates = gating_step(state.gates, &rates, params, dt);
    let mut next = membrane_step(state, gates, i_syn, i_ext, params, dt);
    let spike = detect_spike(state, &mut next, params, t_after);
    (next, spike)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RATE_ORACLE: &[(f64, [f64; 6])] = &[
        // du, [alpha_m, beta_m, alpha_n, beta_n, alpha_h, beta_h]
        (
            -35.0,
            [
                0.067161191766578047,
                125.94403492771652,
                0.022771728568602563,
                0.87210739242593906,
                1.8145523506615945,
                0.0067622238259854368,
            ],
        ),
        (
            -20.0,
            [
                0.22771683025246633,
                54.735051951738485,
                0.070806710126467508,
                0.72300242250148461,
                0.85713383865012229,
                0.03014860839238992,
            ],
        ),
        (
            -10.0,
            [
                0.49091944626982465,
                31.404423291551053,
                0.14101052082322105,
                0.63804739841871915,
                0.51987795261848057,
                0.08102066021563781,
            ],
        ),
        (
            -5.0,
            [
                0.70806497707045193,
                23.787755520767401,
                0.19407078582994857,
                0.59939006076869903,
                0.40488135660083138,
                0.13203984012604294,
            ],
        ),
        (
            0.0,
            [
                1.0070652032758848,
                18.018395289813726,
                0.26215962784668093,
                0.56307485280667893,
                0.3153219175717402,
                0.2136345324694931,
            ],
        ),
        (
            2.5,
            [
                1.1941171186767602,
                15.681854940564786,
                0.30246115380213721,
                0.54575086083810877,
                0.27827061557409583,
                0.270666253619006,
            ],
        ),
        (
            5.0,
            [
                1.4100988627905007,
                13.648306101706048,
                0.34719703006097141,
                0.5289598720683693,
                0.24557295632444825,
                0.34171066839715412,
            ],
        ),
        (
            7.5,
            [
                1.6579830793625177,
                11.878458266057508,
                0.3965105657195684,
                0.51268548771301875,
                0.21671737331486771,
                0.42951108730609342,
            ],
        ),
        (
            9.999,
            [
                1.9405757871747855,
                10.338690289458146,
                0.49057558502275238,
                0.49691802496166159,
                0.19126197354624403,
                0.53691404857668734,
            ],
        ),
        (
            10.0,
            [
                1.9406962141299637,
                10.338115933729872,
                4.5045988224534314,
                0.49691181352517113,
                0.1912524106866402,
                0.53696134217383895,
            ],
        ),
        (
            10.001,
            [
                1.9408166471080683,
                10.337541609909363,
                0.40952966648646542,
                0.49690560216632314,
                0.1912428483051674,
                0.53700863937298044,
            ],
        ),
        (
            15.0,
            [
                2.6215726843362445,
                7.8307623131254217,
                0.57241056894020355,
                0.46680544869187975,
                0.14894752720704931,
                0.82175379972356319,
            ],
        ),
        (
            20.0,
            [
                3.4719078063941874,
                5.9315293809576732,
                0.7126110422548915,
                0.43852313629365758,
                0.11600045082539938,
                1.2114732100122321,
            ],
        ),
        (
            24.999,
            [
                4.5043758261179991,
                4.4931762781080363,
                0.86972168943522466,
                0.41195951204191247,
                0.09034575911448244,
                1.700563393648305,
            ],
        ),
        (
            25.0,
            [
                4.5045988224534314,
                4.4929266641374826,
                0.86975469230853666,
                0.41195436258019615,
                0.090341241939457033,
                1.7006692520964069,
            ],
        ),
        (
            25.001,
            [
                4.5048263313511197,
                4.4926770640339864,
                0.86978769578411805,
                0.4119492131828477,
                0.09033672499028473,
                1.7007751131372114,
            ],
        ),
        (
            30.0,
            [
                5.724208725365164,
                3.4032352725290522,
                1.0419255976926769,
                0.38699530949083519,
                0.07035782996609238,
                2.2522994112267157,
            ],
        ),
        (
            50.0,
            [
                12.268570404909351,
                1.1203211875770905,
                1.8354543794476382,
                0.30139225007642312,
                0.025883199169961424,
                3.9676374802795925,
            ],
        ),
        (
            100.0,
            [
                33.803216497724025,
                0.069657677231872842,
                4.0546388724370279,
                0.16132364632045899,
                0.0021246223682483819,
                4.5004949023159395,
            ],
        ),
        (
            765.0,
            [
                333.3406416975968,
                0.0000000000000000062834856762437336,
                34.009750614675199,
                0.000039593614361481447,
                0.0000000000000000077088612003825406,
                4.5045988224534314,
            ],
        ),
    ];

    fn as_array(r: &RateConstants) -> [f64; 6] {
        [r.alpha_m, r.beta_m, r.alpha_n, r.beta_n, r.alpha_h, r.beta_h]
    }

    #[test]
    fn rates_match_high_precision_oracle() {
        let p = NeuronParams::default();
        for (du, expected) in RATE_ORACLE {
            let got = as_array(&rate_constants(p.u_rest + du, &p));
            for (g, e) in got.iter().zip(expected) {
                let rel = ((g - e) / e).abs();
                assert!(rel <= 1e-9, "du={du}: got {g}, expected {e}, rel {rel:e}");
            }
        }
    }

    #[test]
    fn rest_values() {
        let p = NeuronParams::default();
        assert!((p.temperature_factor() - 4.504598822453431).abs() < 1e-12);
        let r = rate_constants(-65.0, &p);
        assert!((r.alpha_h - 0.3153219175717402).abs() < 1e-12);
        assert!((r.beta_m - 18.018395289813726).abs() < 1e-11);
    }

    #[test]
    fn alpha_m_singularity_is_bracketed() {
        let p = NeuronParams::default();
        let at = rate_constants(-40.0, &p).alpha_m;
        let lo = rate_constants(-40.001, &p).alpha_m;
        let hi = rate_constants(-39.999, &p).alpha_m;
        assert!(at.is_finite());
        let limit = 0.5 * (lo + hi);
        assert!(((at - limit) / limit).abs() < 0.01);
    }

    #[test]
    fn euler_gate_hand_value() {
        let p = NeuronParams::default();
        let rates = RateConstants { alpha_m: 2.0, beta_m: 1.0, alpha_n: 0.0, beta_n: 0.0, alpha_h: 0.0, beta_h: 0.0 };
        let g = gating_step(GatingState { m: 0.5, h: 0.0, n: 0.0 }, &rates, &p, 0.01);
        assert!((g.m - (0.5 + 0.01 / 0.3 * 0.5)).abs() < 1e-15);
        assert!((g.m - 0.51667).abs() < 1e-5);
        // alpha = 0 keeps a closed gate closed
        assert_eq!(g.h, 0.0);
        assert_eq!(g.n, 0.0);
    }

    #[test]
    fn steady_state_is_fixed_point() {
        let p = NeuronParams::default();
        for u in [-80.0, -65.0, -40.0, 0.0] {
            let r = rate_constants(u, &p);
            let ss = GatingState::steady_state(&r);
            for dt in [0.001, 0.01, 0.1] {
                let next = gating_step(ss, &r, &p, dt);
                assert!((next.m - ss.m).abs() < 1e-15);
                assert!((next.h - ss.h).abs() < 1e-15);
                assert!((next.n - ss.n).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn leak_only_hand_value() {
        let p = NeuronParams::default();
        let s = NeuronState {
            u: -65.0,
            gates: GatingState { m: 0.0, h: 1.0, n: 0.0 },
            last_spike_time: None,
            above_threshold: false,
        };
        let next = membrane_step(&s, s.gates, 0.0, 0.0, &p, 0.01);
        assert!((next.u - (-65.0 + 15.0 * 0.01)).abs() < 1e-12);
    }

    #[test]
    fn zero_net_current_at_leak_reversal() {
        let p = NeuronParams { g_na: 0.0, g_k: 0.0, ..NeuronParams::default() };
        let s = NeuronState {
            u: p.e_l,
            gates: GatingState { m: 0.3, h: 0.4, n: 0.5 },
            last_spike_time: None,
            above_threshold: false,
        };
        assert_eq!(membrane_step(&s, s.gates, 0.0, 0.0, &p, 0.01).u, p.e_l);
    }

    #[test]
    fn membrane_clamps_to_u_max() {
        let p = NeuronParams::default();
        let s = NeuronState::at_rest(&p);
        assert_eq!(membrane_step(&s, s.gates, 0.0, 1e9, &p, 0.01).u, 700.0);
        assert_eq!(membrane_step(&s, s.gates, 0.0, -1e9, &p, 0.01).u, -100.0);
    }

    fn at(u: f64, last: Option<f64>) -> NeuronState {
        NeuronState { u, gates: GatingState { m: 0.0, h: 0.0, n: 0.0 }, last_spike_time: last, above_threshold: u >= -35.0 }
    }

    #[test]
    fn spike_detection_cases() {
        let p = NeuronParams::default();
        let mut after = at(-30.0, None);
        assert_eq!(detect_spike(&at(-40.0, None), &mut after, &p, 10.0), Some(10.0));
        assert_eq!(after.last_spike_time, Some(10.0));
        assert!(after.above_threshold);

        let mut after = at(-20.0, None);
        assert_eq!(detect_spike(&at(-30.0, None), &mut after, &p, 10.0), None);

        let mut after = at(-30.0, Some(9.0));
        assert_eq!(detect_spike(&at(-40.0, Some(9.0)), &mut after, &p, 10.0), None);
        assert_eq!(after.last_spike_time, Some(9.0));
    }

    #[test]
    fn at_rest_settles_near_rest() {
        let p = NeuronParams::default();
        let phi = p.temperature_factor();
        let mut s = NeuronState::at_rest(&p);
        for k in 0..10_000 {
            let (next, spike) = integrate_step(&s, 0.0, 0.0, &p, phi, 0.01, (k + 1) as f64 * 0.01);
            assert!(spike.is_none());
            s = next;
        }
        assert!((s.u - p.u_rest).abs() < 5.0, "settled at {}", s.u);
    }

    proptest! {
        #[test]
        fn gates_stay_in_unit_interval(
            u in -100.0f64..700.0,
            m in 0.0f64..=1.0,
            h in 0.0f64..=1.0,
            n in 0.0f64..=1.0,
        ) {
            let p = NeuronParams::default();
            let r = rate_constants(u, &p);
            let g = gating_step(GatingState { m, h, n }, &r, &p, 0.01);
            for x in [g.m, g.h, g.n] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }

        #[test]
        fn rates_are_finite_and_nonnegative(u in -100.0f64..700.0) {
            let p = NeuronParams::default();
            for x in as_array(&rate_constants(u, &p)) {
                prop_assert!(x.is_finite() && x >= 0.0);
            }
        }
    }
}
