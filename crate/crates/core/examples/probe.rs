//! Runs a config and prints spike counts per second of simulated time.
//!
//! usage: probe <config> [duration_s] [key=value ...]

use std::path::Path;

use hhnet::io::Spike;
use hhnet::RunConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = RunConfig::load(Path::new(&args[1])).expect("config");
    if let Some(d) = args.get(2) {
        cfg.simulation.duration = d.parse().expect("duration");
    }
    let mut value: toml::Table = toml::from_str(&cfg.to_toml()).expect("toml");
    for kv in args.iter().skip(3) {
        let (k, v) = kv.split_once('=').expect("key=value");
        let (section, key) = k.split_once('.').expect("section.key");
        let parsed: toml::Table = toml::from_str(&format!("v = {v}")).expect("value");
        match value.get_mut(section) {
            Some(toml::Value::Table(t)) => {
                t.insert(key.to_string(), parsed["v"].clone());
            }
            _ => panic!("unknown section {section}"),
        }
    }
    let cfg: RunConfig = value.try_into().expect("config");
    cfg.validate().expect("valid");
    let mut world = cfg.build_world().expect("world");
    let mut spikes: Vec<Spike> = Vec::new();
    let summary = world.run_until(cfg.simulation.duration * 1000.0, 1, &mut spikes, None, |_| Ok(())).expect("run");
    let secs = cfg.simulation.duration.ceil() as usize;
    let mut per_s = vec![0usize; secs.max(1)];
    for s in &spikes {
        per_s[((s.time_ms / 1000.0) as usize).min(secs.max(1) - 1)] += 1;
    }
    let mut active = std::collections::BTreeSet::new();
    for s in &spikes {
        active.insert(s.neuron);
    }
    let r: Vec<f64> = world.synapses().iter().map(|s| s.receptors / s.receptors_initial).collect();
    let mean_r = r.iter().sum::<f64>() / r.len().max(1) as f64;
    println!(
        "spikes {} wall {:.1}s updates/s {:.3e} active_neurons {} mean R/R0 {:.3}",
        summary.spikes,
        summary.wall_time_s,
        summary.neuron_updates_per_s,
        active.len(),
        mean_r
    );
    println!("per second: {per_s:?}");
    let dur = cfg.simulation.duration;
    let train = hhnet::analysis::SpikeTrain::new(dur, world.n_neurons(), spikes.clone()).expect("train");
    let windows: Vec<f64> = [1.0, 10.0, 50.0].into_iter().filter(|&w| w <= dur).collect();
    let opts = hhnet::analysis::AnalysisOptions {
        participation_windows: windows,
        fano_windows: if dur >= 10.0 { vec![10.0] } else { vec![] },
        fano_bin: 1.0,
    };
    let report = hhnet::analysis::analyze(&train, &opts).expect("analysis");
    print!("{}", report.summary());
    let mut min5 = usize::MAX;
    let mut k = 5.0;
    while k + 5.0 <= dur + 1e-9 {
        let c = spikes.iter().filter(|s| s.time_ms > k * 1000.0 && s.time_ms <= (k + 5.0) * 1000.0).count();
        min5 = min5.min(c);
        k += 5.0;
    }
    if min5 != usize::MAX {
        println!("min spikes in a 5 s window after 5 s: {min5}");
    }
}
