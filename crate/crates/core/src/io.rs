//! File formats: spike CSV, binary voltage traces.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::AnalysisError;

pub const SPIKE_HEADER: &str = "time_ms,neuron_id";
pub const VOLTAGE_MAGIC: &[u8; 4] = b"HHV1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spike {
    pub time_ms: f64,
    pub neuron: u32,
}

/// Receives spikes from the engine in `(time, neuron)` order.
pub trait SpikeSink {
    fn record(&mut self, time_ms: f64, neuron: u32) -> io::Result<()>;
}

impl SpikeSink for Vec<Spike> {
    fn record(&mut self, time_ms: f64, neuron: u32) -> io::Result<()> {
        self.push(Spike { time_ms, neuron });
        Ok(())
    }
}

/// Discards spikes but counts them.
#[derive(Default, Debug)]
pub struct CountingSink {
    pub count: u64,
}

impl SpikeSink for CountingSink {
    fn record(&mut self, _: f64, _: u32) -> io::Result<()> {
        self.count += 1;
        Ok(())
    }
}

/// Streams spikes as `time_ms,neuron_id` rows with three decimals.
pub struct CsvSpikeWriter<W: Write> {
    out: W,
    count: u64,
}

impl<W: Write> CsvSpikeWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{SPIKE_HEADER}")?;
        Ok(Self { out, count: 0 })
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

impl CsvSpikeWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> io::Result<Self> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> SpikeSink for CsvSpikeWriter<W> {
    fn record(&mut self, time_ms: f64, neuron: u32) -> io::Result<()> {
        self.count += 1;
        writeln!(self.out, "{time_ms:.3},{neuron}")
    }
}

/// Writes a complete spike file, sorting by `(time, neuron)` first.
pub fn write_spike_csv<W: Write>(out: W, spikes: &[Spike]) -> io::Result<W> {
    let mut sorted = spikes.to_vec();
    sort_spikes(&mut sorted);
    let mut w = CsvSpikeWriter::new(out)?;
    for s in &sorted {
        w.record(s.time_ms, s.neuron)?;
    }
    w.finish()
}

pub fn sort_spikes(spikes: &mut [Spike]) {
    spikes.sort_by(|a, b| a.time_ms.total_cmp(&b.time_ms).then(a.neuron.cmp(&b.neuron)));
}

/// Parses a spike CSV. Rows may appear in any order; the result is sorted.
pub fn read_spike_csv<R: Read>(input: R) -> Result<Vec<Spike>, AnalysisError> {
    let mut spikes = Vec::new();
    let mut saw_header = false;
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if idx == 0 {
            if trimmed != SPIKE_HEADER {
                return Err(AnalysisError::Malformed { line: lineno, message: format!("expected header `{SPIKE_HEADER}`") });
            }
            saw_header = true;
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let malformed = |message: String| AnalysisError::Malformed { line: lineno, message };
        let (t, id) = trimmed.split_once(',').ok_or_else(|| malformed(format!("expected two fields in `{trimmed}`")))?;
        let time_ms: f64 = t.trim().parse().map_err(|_| malformed(format!("bad time `{t}`")))?;
        let neuron: u32 = id.trim().parse().map_err(|_| malformed(format!("bad neuron id `{id}`")))?;
        if !time_ms.is_finite() || time_ms < 0.0 {
            return Err(malformed(format!("time {time_ms} must be finite and >= 0")));
        }
        spikes.push(Spike { time_ms, neuron });
    }
    if !saw_header {
        return Err(AnalysisError::Malformed { line: 1, message: format!("missing header `{SPIKE_HEADER}`") });
    }
    sort_spikes(&mut spikes);
    Ok(spikes)
}

pub fn read_spike_file(path: &Path) -> Result<Vec<Spike>, AnalysisError> {
    read_spike_csv(File::open(path)?)
}

/// Per-neuron membrane potential samples taken every `period_ms`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoltageTrace {
    pub period_ms: f64,
    pub samples: Vec<Vec<f32>>,
}

impl VoltageTrace {
    pub fn new(n_neurons: usize, period_ms: f64) -> Self {
        Self { period_ms, samples: vec![Vec::new(); n_neurons] }
    }

    pub fn sample_count(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// `HHV1`, u32 neuron count, u32 sample count, then f32 samples in
    /// neuron-major order, all little-endian.
    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = u32::try_from(self.samples.len()).map_err(|_| io::Error::other("too many neurons"))?;
        let count = self.sample_count();
        if self.samples.iter().any(|s| s.len() != count) {
            return Err(io::Error::other("ragged voltage trace"));
        }
        let count32 = u32::try_from(count).map_err(|_| io::Error::other("too many samples"))?;
        out.write_all(VOLTAGE_MAGIC)?;
        out.write_all(&n.to_le_bytes())?;
        out.write_all(&count32.to_le_bytes())?;
        for trace in &self.samples {
            for v in trace {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()
    }

    pub fn read<R: Read>(mut input: R, period_ms: f64) -> io::Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != VOLTAGE_MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not an HHV1 voltage file"));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let count = u32::from_le_bytes(word) as usize;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let mut trace = Vec::with_capacity(count);
            for _ in 0..count {
                input.read_exact(&mut word)?;
                trace.push(f32::from_le_bytes(word));
            }
            samples.push(trace);
        }
        Ok(Self { period_ms, samples })
    }

    /// Text sidecar describing the binary layout.
    pub fn sidecar(&self) -> String {
        format!(
            "format = \"HHV1\"\nneuron_count = {}\nsample_count = {}\nsample_period_ms = {}\nlayout = \"neuron-major f32 little-endian\"\n",
            self.samples.len(),
            self.sample_count(),
            self.period_ms
        )
    }
}
