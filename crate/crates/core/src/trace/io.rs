use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::validate::{check_split_integrity, validate_trace};
use super::{GenerationTrace, Split, TraceError};
use crate::Real;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub eval: usize,
}

/// Traces in file order plus per-split counts.
#[derive(Debug, Clone)]
pub struct TraceSet<F> {
    pub traces: Vec<GenerationTrace<F>>,
    pub counts: SplitCounts,
}

impl<F: Real> TraceSet<F> {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &GenerationTrace<F>> {
        self.traces.iter().filter(move |t| t.split == split)
    }
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

/// Loads a line-delimited trace file; `.gz` files are decompressed.
pub fn load_traces<F: Real>(path: &Path, schema_version: &str) -> Result<TraceSet<F>, TraceError> {
    let io_err = |source| TraceError::Io { path: path.display().to_string(), source };
    let file = File::open(path).map_err(io_err)?;
    if is_gzip(path) {
        read_traces(BufReader::new(MultiGzDecoder::new(file)), schema_version)
    } else {
        read_traces(BufReader::new(file), schema_version)
    }
}

/// Parses and validates records from any buffered reader. Blank lines are
/// skipped; line numbers in errors are 1-based.
pub fn read_traces<F: Real, R: BufRead>(reader: R, schema_version: &str) -> Result<TraceSet<F>, TraceError> {
    #[derive(Deserialize)]
    struct VersionProbe {
        schema_version: Option<String>,
    }

    let mut traces = Vec::new();
    let mut counts = SplitCounts::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| TraceError::Malformed { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let probe: VersionProbe =
            serde_json::from_str(&line).map_err(|e| TraceError::Malformed { line: line_no, message: e.to_string() })?;
        match probe.schema_version {
            Some(v) if v == schema_version => {}
            Some(v) => {
                return Err(TraceError::Version { line: line_no, found: v, expected: schema_version.to_string() })
            }
            None => return Err(TraceError::Malformed { line: line_no, message: "missing schema_version".into() }),
        }
        let trace: GenerationTrace<F> =
            serde_json::from_str(&line).map_err(|e| TraceError::Malformed { line: line_no, message: e.to_string() })?;
        validate_trace(&trace).map_err(|e| TraceError::Invalid {
            line: line_no,
            instance_id: trace.instance_id.clone(),
            field: e.field,
            reason: e.reason,
        })?;
        match trace.split {
            Split::Train => counts.train += 1,
            Split::Eval => counts.eval += 1,
        }
        traces.push(trace);
    }
    check_split_integrity(&traces)?;
    log::debug!("loaded {} traces (train {}, eval {})", traces.len(), counts.train, counts.eval);
    Ok(TraceSet { traces, counts })
}

/// Writes one compact JSON record per line.
pub fn write_traces<'a, F: Real + 'a, W: Write>(
    mut writer: W,
    traces: impl IntoIterator<Item = &'a GenerationTrace<F>>,
) -> io::Result<()> {
    for t in traces {
        serde_json::to_writer(&mut writer, t)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_traces<F: Real>(path: &Path, traces: &[GenerationTrace<F>]) -> io::Result<()> {
    let file = BufWriter::new(File::create(path)?);
    if is_gzip(path) {
        let mut enc = GzEncoder::new(file, Compression::default());
        write_traces(&mut enc, traces)?;
        enc.finish()?.flush()
    } else {
        write_traces(file, traces)
    }
}
