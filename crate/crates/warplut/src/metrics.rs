//! Metrics files: CSV plus a JSON-lines mirror, appended and flushed per
//! record so a crashed run keeps everything produced so far.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use warplut_core::boolean::gate_catalog;
use warplut_core::train::MetricsSink;
use warplut_core::MetricsRecord;

pub fn csv_header() -> String {
    let mut h = String::from("step,loss,acc_relaxed,acc_discrete,gap");
    for e in gate_catalog() {
        h.push_str(",gate_");
        h.push_str(e.name);
    }
    h
}

pub fn csv_row(r: &MetricsRecord) -> String {
    let mut s = format!(
        "{},{},{},{},{}",
        r.step, r.train_loss, r.val_acc_relaxed, r.val_acc_discrete, r.discretization_gap
    );
    for c in r.gate_histogram {
        s.push_str(&format!(",{c}"));
    }
    s
}

/// Appends every record to `metrics.csv` and `metrics.jsonl`.
pub struct FileSink {
    csv: BufWriter<File>,
    jsonl: BufWriter<File>,
}

impl FileSink {
    /// Creates (truncating) both files in `dir`.
    pub fn create(dir: &Path) -> io::Result<Self> {
        let mut csv = BufWriter::new(File::create(dir.join("metrics.csv"))?);
        writeln!(csv, "{}", csv_header())?;
        csv.flush()?;
        let jsonl = BufWriter::new(File::create(dir.join("metrics.jsonl"))?);
        Ok(Self { csv, jsonl })
    }

    fn write(&mut self, r: &MetricsRecord) -> io::Result<()> {
        writeln!(self.csv, "{}", csv_row(r))?;
        self.csv.flush()?;
        serde_json::to_writer(&mut self.jsonl, r)?;
        writeln!(self.jsonl)?;
        self.jsonl.flush()
    }
}

impl MetricsSink for FileSink {
    fn record(&mut self, record: &MetricsRecord) -> Result<(), String> {
        self.write(record).map_err(|e| e.to_string())
    }
}

/// Replays a JSON-lines metrics file.
pub fn read_jsonl(path: &Path) -> io::Result<Vec<MetricsRecord>> {
    BufReader::new(File::open(path)?)
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(io::Error::from))
        .collect()
}

/// Replays a CSV metrics file.
pub fn read_csv(path: &Path) -> io::Result<Vec<MetricsRecord>> {
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(csv_header().as_str()) {
        return Err(bad("unexpected metrics header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 21 {
                return Err(bad(format!("expected 21 fields, got {}", f.len())));
            }
            let real = |s: &str| s.parse::<f64>().map_err(|e| bad(e.to_string()));
            let int = |s: &str| s.parse::<u64>().map_err(|e| bad(e.to_string()));
            let mut gate_histogram = [0u64; 16];
            for (g, s) in gate_histogram.iter_mut().zip(&f[5..]) {
                *g = int(s)?;
            }
            Ok(MetricsRecord {
                step: int(f[0])?,
                train_loss: real(f[1])?,
                val_acc_relaxed: real(f[2])?,
                val_acc_discrete: real(f[3])?,
                discretization_gap: real(f[4])?,
                gate_histogram,
            })
        })
        .collect()
}

/// Relaxed and discrete accuracy series, one row per record.
pub fn write_plot_csv(path: &Path, records: &[MetricsRecord]) -> io::Result<()> {
    let mut out = String::from("step,relaxed,discrete\n");
    for r in records {
        out.push_str(&format!("{},{},{}\n", r.step, r.val_acc_relaxed, r.val_acc_discrete));
    }
    fs::write(path, out)
}

/// Catalog-named gate counts as a JSON object.
pub fn gate_histogram_json(hist: &[u64; 16]) -> serde_json::Value {
    let map: serde_json::Map<String, serde_json::Value> = gate_catalog()
        .iter()
        .zip(hist)
        .map(|(e, &c)| (e.name.to_string(), c.into()))
        .collect();
    serde_json::Value::Object(map)
}
