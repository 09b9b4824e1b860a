//! Direct-loop reference implementations of the analysis statistics.
#![allow(dead_code)]

use hhnet::io::Spike;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn naive_rates(spikes: &[Spike], n: usize, duration_s: f64) -> Vec<f64> {
    (0..n).map(|i| spikes.iter().filter(|s| s.neuron as usize == i).count() as f64 / duration_s).collect()
}

/// Percentage of active neurons per whole window.
pub fn naive_participation(spikes: &[Spike], n: usize, duration_s: f64, window_s: f64) -> Vec<f64> {
    let n_windows = (duration_s / window_s + 1e-9).floor() as usize;
    (0..n_windows)
        .map(|k| {
            let lo = k as f64 * window_s * 1000.0;
            let hi = (k + 1) as f64 * window_s * 1000.0;
            let active =
                (0..n).filter(|&i| spikes.iter().any(|s| s.neuron as usize == i && s.time_ms >= lo && s.time_ms < hi)).count();
            100.0 * active as f64 / n as f64
        })
        .collect()
}

/// `(mean, min, max)` over the included neurons.
pub type FanoStats = (f64, f64, f64);

/// `(start_s, Some(stats))` per window position.
pub fn naive_fano(spikes: &[Spike], n: usize, duration_s: f64, window_s: f64, bin_s: f64) -> Vec<(f64, Option<FanoStats>)> {
    let n_bins = (duration_s / bin_s + 1e-9).floor() as usize;
    let m = (window_s / bin_s).round() as usize;
    let mut out = Vec::new();
    for p in 0..=n_bins.saturating_sub(m) {
        if n_bins < m {
            break;
        }
        let mut factors = Vec::new();
        for i in 0..n {
            let counts: Vec<f64> = (p..p + m)
                .map(|b| {
                    let lo = b as f64 * bin_s * 1000.0;
                    let hi = (b + 1) as f64 * bin_s * 1000.0;
                    spikes.iter().filter(|s| s.neuron as usize == i && s.time_ms >= lo && s.time_ms < hi).count() as f64
                })
                .collect();
            let mean = counts.iter().sum::<f64>() / m as f64;
            if mean == 0.0 {
                continue;
            }
            let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (m - 1) as f64;
            factors.push(var / mean);
        }
        let stats = (!factors.is_empty()).then(|| {
            let mean = factors.iter().sum::<f64>() / factors.len() as f64;
            let min = factors.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = factors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (mean, min, max)
        });
        out.push((p as f64 * bin_s, stats));
    }
    out
}

/// Spikes at whole-millisecond times, so window edges are unambiguous.
pub fn synthetic_train(seed: u64, n: usize, duration_s: f64, count: usize) -> Vec<Spike> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_ms = (duration_s * 1000.0) as u32;
    let mut spikes: Vec<Spike> = (0..count)
        .map(|_| Spike { time_ms: rng.random_range(0..max_ms) as f64, neuron: rng.random_range(0..n as u32) })
        .collect();
    hhnet::io::sort_spikes(&mut spikes);
    spikes
}

/// Independent homogeneous Poisson trains.
pub fn poisson_train(seed: u64, n: usize, duration_s: f64, rate_hz: f64) -> Vec<Spike> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spikes = Vec::new();
    for i in 0..n {
        let mut t = 0.0;
        loop {
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / rate_hz;
            if t >= duration_s {
                break;
            }
            spikes.push(Spike { time_ms: t * 1000.0, neuron: i as u32 });
        }
    }
    hhnet::io::sort_spikes(&mut spikes);
    spikes
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}
