//! Spike-train statistics: firing rates and rate classes, windowed
//! participation, sliding-window Fano factors, raster down-sampling.
//!
//! Spike times are binned on an integer microsecond grid so that window
//! membership never depends on floating-point rounding. Windows are
//! half-open, `[start, end)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::io::{sort_spikes, Spike};

const US_PER_S: f64 = 1e6;

fn to_us(seconds: f64) -> i64 {
    (seconds * US_PER_S).round() as i64
}

fn spike_us(time_ms: f64) -> i64 {
    (time_ms * 1e3).round() as i64
}

/// Validated, time-ordered spikes of a population.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeTrain {
    duration_s: f64,
    n_neurons: usize,
    spikes: Vec<Spike>,
}

impl SpikeTrain {
    pub fn new(duration_s: f64, n_neurons: usize, mut spikes: Vec<Spike>) -> Result<Self, AnalysisError> {
        if !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(AnalysisError::ZeroDuration);
        }
        let end_us = to_us(duration_s);
        if let Some(bad) = spikes
            .iter()
            .find(|s| s.time_ms.is_nan() || s.time_ms < 0.0 || spike_us(s.time_ms) > end_us || s.neuron as usize >= n_neurons)
        {
            return Err(AnalysisError::OutOfRange { time_ms: bad.time_ms, neuron: bad.neuron, duration_s, n_neurons });
        }
        sort_spikes(&mut spikes);
        Ok(Self { duration_s, n_neurons, spikes })
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    fn counts_per_neuron(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_neurons];
        for s in &self.spikes {
            counts[s.neuron as usize] += 1;
        }
        counts
    }

    /// Number of whole `width` intervals in the train, with the interval
    /// width in microseconds.
    fn whole_windows(&self, width_s: f64) -> Result<(usize, i64), AnalysisError> {
        let w = to_us(width_s);
        if !(width_s.is_finite() && w > 0 && width_s <= self.duration_s * (1.0 + 1e-12)) {
            return Err(AnalysisError::BadWindow { window_s: width_s, duration_s: self.duration_s });
        }
        Ok(((to_us(self.duration_s) / w) as usize, w))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateClasses {
    /// Fraction of neurons below 1 Hz.
    pub below_1hz: f64,
    /// Fraction of neurons in [1, 5] Hz.
    pub from_1_to_5hz: f64,
    /// Fraction of neurons above 5 Hz.
    pub above_5hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateStats {
    pub rates: Vec<f64>,
    pub classes: RateClasses,
    pub mean_hz: f64,
    pub std_hz: f64,
}

pub fn mean_rates(train: &SpikeTrain) -> RateStats {
    let rates: Vec<f64> = train.counts_per_neuron().iter().map(|&c| c as f64 / train.duration_s).collect();
    let n = rates.len().max(1) as f64;
    let (mut low, mut mid, mut high) = (0usize, 0usize, 0usize);
    for &r in &rates {
        if r < 1.0 {
            low += 1;
        } else if r <= 5.0 {
            mid += 1;
        } else {
            high += 1;
        }
    }
    let (mean, std) = mean_std(&rates);
    RateStats {
        classes: RateClasses { below_1hz: low as f64 / n, from_1_to_5hz: mid as f64 / n, above_5hz: high as f64 / n },
        rates,
        mean_hz: mean,
        std_hz: std,
    }
}

/// Mean and population standard deviation; zeros for an empty slice.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Participation {
    pub window_s: f64,
    pub mean_pct: f64,
    pub std_pct: f64,
    /// Percentage of active neurons in each window.
    pub per_window: Vec<f64>,
}

/// Percentage of neurons with at least one spike in consecutive
/// non-overlapping windows; a trailing partial window is dropped.
pub fn participation(train: &SpikeTrain, window_s: f64) -> Result<Participation, AnalysisError> {
    let (n_windows, w) = train.whole_windows(window_s)?;
    let mut active = vec![vec![false; train.n_neurons]; n_windows];
    for s in &train.spikes {
        let k = (spike_us(s.time_ms) / w) as usize;
        if k < n_windows {
            active[k][s.neuron as usize] = true;
        }
    }
    let per_window: Vec<f64> =
        active.iter().map(|a| 100.0 * a.iter().filter(|&&x| x).count() as f64 / train.n_neurons.max(1) as f64).collect();
    let (mean_pct, std_pct) = mean_std(&per_window);
    Ok(Participation { window_s, mean_pct, std_pct, per_window })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanoPoint {
    /// Window start (s).
    pub start_s: f64,
    /// Neurons with a nonzero mean count in this window.
    pub n_included: usize,
    /// `None` when no neuron fired in the window.
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

/// Per-neuron Fano factors of binned counts in windows sliding by one bin,
/// summarised across the population.
pub fn fano(train: &SpikeTrain, window_s: f64, bin_s: f64) -> Result<Vec<FanoPoint>, AnalysisError> {
    let (n_bins, b) = train.whole_windows(bin_s).map_err(|_| AnalysisError::BadBin { bin_s, window_s })?;
    let (_, w) = train.whole_windows(window_s)?;
    if w % b != 0 || w / b < 2 {
        return Err(AnalysisError::BadBin { bin_s, window_s });
    }
    let m = (w / b) as usize;
    let mut counts = vec![vec![0u64; n_bins]; train.n_neurons];
    for s in &train.spikes {
        let k = (spike_us(s.time_ms) / b) as usize;
        if k < n_bins {
            counts[s.neuron as usize][k] += 1;
        }
    }
    if n_bins < m {
        return Ok(Vec::new());
    }

    let mut sums: Vec<(u64, u64)> = counts.iter().map(|c| c[..m].iter().fold((0, 0), |(s, q), &x| (s + x, q + x * x))).collect();
    let mut out = Vec::with_capacity(n_bins - m + 1);
    for p in 0..=n_bins - m {
        if p > 0 {
            for (c, (s, q)) in counts.iter().zip(sums.iter_mut()) {
                let (old, new) = (c[p - 1], c[p + m - 1]);
                *s = *s + new - old;
                *q = *q + new * new - old * old;
            }
        }
        let factors: Vec<f64> = sums
            .iter()
            .filter(|(s, _)| *s > 0)
            .map(|&(s, q)| {
                // var/mean with the unbiased variance, in exact integer arithmetic
                let num = m as u64 * q - s * s;
                num as f64 / ((m as u64 - 1) * s) as f64
            })
            .collect();
        let point = if factors.is_empty() {
            FanoPoint { start_s: p as f64 * bin_s, n_included: 0, mean: None, min: None, max: None }
        } else {
            FanoPoint {
                start_s: p as f64 * bin_s,
                n_included: factors.len(),
                mean: Some(factors.iter().sum::<f64>() / factors.len() as f64),
                min: factors.iter().copied().reduce(f64::min),
                max: factors.iter().copied().reduce(f64::max),
            }
        };
        out.push(point);
    }
    Ok(out)
}

/// Average of the population-mean Fano factor over all non-empty window
/// positions.
pub fn fano_grand_mean(series: &[FanoPoint]) -> Option<f64> {
    let vals: Vec<f64> = series.iter().filter_map(|p| p.mean).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Raster rows, optionally thinned to at most `max_per_second` spikes in
/// every one-second bin by taking evenly spaced rows.
pub fn raster_rows(spikes: &[Spike], max_per_second: Option<usize>) -> Vec<Spike> {
    let mut sorted = spikes.to_vec();
    sort_spikes(&mut sorted);
    let Some(k) = max_per_second else {
        return sorted;
    };
    let mut out = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let second = (sorted[start].time_ms / 1000.0).floor();
        let len = sorted[start..].iter().take_while(|s| (s.time_ms / 1000.0).floor() == second).count();
        let chunk = &sorted[start..start + len];
        if len <= k {
            out.extend_from_slice(chunk);
        } else {
            out.extend((0..k).map(|i| chunk[i * len / k]));
        }
        start += len;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub participation_windows: Vec<f64>,
    pub fano_windows: Vec<f64>,
    pub fano_bin: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { participation_windows: vec![1.0, 10.0, 50.0], fano_windows: vec![5.0, 10.0, 50.0], fano_bin: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipationSummary {
    pub mean_pct: f64,
    pub std_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub duration_s: f64,
    pub n_neurons: usize,
    pub n_spikes: usize,
    pub rates: Vec<f64>,
    pub rate_classes: RateClasses,
    pub population_rate_mean_hz: f64,
    pub population_rate_std_hz: f64,
    /// Keyed by window length in seconds.
    pub participation: BTreeMap<String, ParticipationSummary>,
    pub fano: BTreeMap<String, Vec<FanoPoint>>,
}

fn window_key(w: f64) -> String {
    format!("{w}")
}

pub fn analyze(train: &SpikeTrain, opts: &AnalysisOptions) -> Result<AnalysisReport, AnalysisError> {
    let rates = mean_rates(train);
    let mut part = BTreeMap::new();
    for &w in &opts.participation_windows {
        let p = participation(train, w)?;
        part.insert(window_key(w), ParticipationSummary { mean_pct: p.mean_pct, std_pct: p.std_pct });
    }
    let mut fanos = BTreeMap::new();
    for &w in &opts.fano_windows {
        fanos.insert(window_key(w), fano(train, w, opts.fano_bin)?);
    }
    Ok(AnalysisReport {
        duration_s: train.duration_s,
        n_neurons: train.n_neurons,
        n_spikes: train.spikes.len(),
        rate_classes: rates.classes,
        population_rate_mean_hz: rates.mean_hz,
        population_rate_std_hz: rates.std_hz,
        rates: rates.rates,
        participation: part,
        fano: fanos,
    })
}

impl AnalysisReport {
    /// Human-readable rate-class and participation tables.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let c = &self.rate_classes;
        let _ = writeln!(s, "{} spikes from {} neurons over {} s", self.n_spikes, self.n_neurons, self.duration_s);
        let _ = writeln!(s, "rate class   fraction");
        let _ = writeln!(s, "<1 Hz        {:6.2}%", 100.0 * c.below_1hz);
        let _ = writeln!(s, "1-5 Hz       {:6.2}%", 100.0 * c.from_1_to_5hz);
        let _ = writeln!(s, ">5 Hz        {:6.2}%", 100.0 * c.above_5hz);
        let _ = writeln!(s, "mean rate    {:.2} +/- {:.2} Hz", self.population_rate_mean_hz, self.population_rate_std_hz);
        let _ = writeln!(s, "window (s)   participation (%)");
        for (w, p) in self.sorted_participation() {
            let _ = writeln!(s, "{w:<12} {:.2} +/- {:.2}", p.mean_pct, p.std_pct);
        }
        for (w, series) in &self.fano {
            match fano_grand_mean(series) {
                Some(f) => {
                    let _ = writeln!(s, "fano {w} s window: mean {f:.3} over {} positions", series.len());
                }
                None => {
                    let _ = writeln!(s, "fano {w} s window: no active positions");
                }
            }
        }
        s
    }

    fn sorted_participation(&self) -> Vec<(&String, &ParticipationSummary)> {
        let mut v: Vec<_> = self.participation.iter().collect();
        v.sort_by(|a, b| a.0.parse::<f64>().unwrap_or(0.0).total_cmp(&b.0.parse::<f64>().unwrap_or(0.0)));
        v
    }

    /// Histogram of per-neuron rates with `bin_hz` wide bins.
    pub fn rates_histogram_csv(&self, bin_hz: f64) -> String {
        let max = self.rates.iter().copied().fold(0.0, f64::max);
        let n_bins = ((max / bin_hz).floor() as usize) + 1;
        let mut counts = vec![0usize; n_bins];
        for &r in &self.rates {
            counts[((r / bin_hz).floor() as usize).min(n_bins - 1)] += 1;
        }
        let mut s = String::from("rate_lo_hz,rate_hi_hz,neurons\n");
        for (i, c) in counts.iter().enumerate() {
            let _ = writeln!(s, "{},{},{c}", i as f64 * bin_hz, (i + 1) as f64 * bin_hz);
        }
        s
    }

    pub fn participation_csv(&self) -> String {
        let mut s = String::from("window_s,mean_pct,std_pct\n");
        for (w, p) in self.sorted_participation() {
            let _ = writeln!(s, "{w},{},{}", p.mean_pct, p.std_pct);
        }
        s
    }

    /// One CSV per Fano window length; empty window positions leave the
    /// statistics columns blank.
    pub fn fano_csvs(&self) -> Vec<(String, String)> {
        self.fano
            .iter()
            .map(|(w, series)| {
                let mut s = String::from("start_s,mean,min,max,n_included\n");
                let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                for p in series {
                    let _ = writeln!(s, "{},{},{},{},{}", p.start_s, cell(p.mean), cell(p.min), cell(p.max), p.n_included);
                }
                (w.clone(), s)
            })
            .collect()
    }
}
