//! Estimator × instance score matrix.

use std::io::{Read, Write};

use rayon::prelude::*;
use thiserror::Error;
use uqtrace_core::estimators::registry::ScoringContext;
use uqtrace_core::trace::{GenerationTrace, Split};
use uqtrace_core::{EstimatorId, Family, Real};

/// Marker written for a missing score.
pub const MISSING: &str = "NA";

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed score table: {0}")]
    Format(String),
    #[error("instance {0:?} in the score table has no matching trace")]
    Mismatch(String),
    #[error("instance {0:?} has no quality label")]
    NoQuality(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorColumn {
    pub id: String,
    pub family: Family,
}

/// Uncertainty-oriented scores: `values[e][i]` is estimator `e` on instance
/// `i`, `None` where the estimator abstained.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable<F> {
    pub instances: Vec<String>,
    pub estimators: Vec<EstimatorColumn>,
    pub values: Vec<Vec<Option<F>>>,
    /// Per-instance quality in `[0, 1]`; empty until attached.
    pub quality: Vec<F>,
    /// Per-instance query grouping key (instance id when absent).
    pub groups: Vec<String>,
}

/// Rounds `x` to 12 significant decimal digits (5 for `f32`).
///
/// Scores that agree mathematically often differ in their last bits because
/// of summation order or iterative eigensolvers (for example √2 eccentricity
/// for two identical-sample clusters). Left alone, that noise breaks ties the
/// metrics are meant to see and makes rankings depend on rounding.
pub fn snap<F: Real>(x: F) -> F {
    if !x.is_finite() {
        return x;
    }
    let digits = if F::epsilon() < F::lit(1e-10) { 11 } else { 4 };
    let v = x.to_f64().expect("finite scalar");
    let text = format!("{v:.digits$e}");
    F::lit(text.parse::<f64>().expect("formatted float parses"))
}

/// Per-estimator counts of abstentions and rejected (invalid) inputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoringStats {
    pub missing: Vec<usize>,
    pub invalid: Vec<usize>,
}

impl<F: Real> ScoreTable<F> {
    /// Scores every eval-split trace with each estimator, in parallel over
    /// instances, and [`snap`]s the results. Invalid inputs are logged and
    /// recorded as missing.
    pub fn score(
        traces: &[GenerationTrace<F>],
        estimators: &[EstimatorId],
        ctx: &ScoringContext<'_, F>,
    ) -> (Self, ScoringStats) {
        let eval: Vec<&GenerationTrace<F>> = traces.iter().filter(|t| t.split == Split::Eval).collect();
        if eval.len() != traces.len() {
            log::warn!("skipping {} train-split traces in the scoring input", traces.len() - eval.len());
        }
        let rows: Vec<Vec<Result<Option<F>, String>>> = eval
            .par_iter()
            .map(|t| estimators.iter().map(|e| e.score(t, ctx).map_err(|err| err.to_string())).collect())
            .collect();
        let mut stats = ScoringStats { missing: vec![0; estimators.len()], invalid: vec![0; estimators.len()] };
        let mut values = vec![Vec::with_capacity(eval.len()); estimators.len()];
        for (t, row) in eval.iter().zip(rows) {
            for (k, cell) in row.into_iter().enumerate() {
                let v = match cell {
                    Ok(v) => v.map(snap),
                    Err(msg) => {
                        log::warn!("{} on {}: {msg}", estimators[k].id(), t.instance_id);
                        stats.invalid[k] += 1;
                        None
                    }
                };
                if v.is_none() {
                    stats.missing[k] += 1;
                }
                values[k].push(v);
            }
        }
        for (k, e) in estimators.iter().enumerate() {
            if stats.missing[k] == eval.len() && !eval.is_empty() {
                log::warn!("{} produced no scores: required inputs are absent", e.id());
            }
        }
        let table = Self {
            instances: eval.iter().map(|t| t.instance_id.clone()).collect(),
            estimators: estimators
                .iter()
                .map(|e| EstimatorColumn { id: e.id().to_string(), family: e.family() })
                .collect(),
            values,
            quality: eval.iter().filter_map(|t| t.quality.map(|q| q.value)).collect(),
            groups: eval.iter().map(|t| t.query_id.clone().unwrap_or_else(|| t.instance_id.clone())).collect(),
        };
        let table =
            if table.quality.len() == table.instances.len() { table } else { Self { quality: Vec::new(), ..table } };
        (table, stats)
    }

    pub fn num_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn has_quality(&self) -> bool {
        !self.instances.is_empty() && self.quality.len() == self.instances.len()
    }

    /// Takes quality labels and query groups from traces matched by instance
    /// id. Fails on the first table instance without a trace.
    pub fn attach_traces(&mut self, traces: &[GenerationTrace<F>]) -> Result<(), TableError> {
        let by_id: std::collections::HashMap<&str, &GenerationTrace<F>> =
            traces.iter().map(|t| (t.instance_id.as_str(), t)).collect();
        let mut quality = Vec::with_capacity(self.instances.len());
        let mut groups = Vec::with_capacity(self.instances.len());
        for id in &self.instances {
            let t = by_id.get(id.as_str()).ok_or_else(|| TableError::Mismatch(id.clone()))?;
            quality.push(t.quality.ok_or_else(|| TableError::NoQuality(id.clone()))?.value);
            groups.push(t.query_id.clone().unwrap_or_else(|| id.clone()));
        }
        self.quality = quality;
        self.groups = groups;
        Ok(())
    }

    /// Applies `f` to every defined score.
    pub fn map_scores(&self, f: impl Fn(F) -> F) -> Self {
        let values = self.values.iter().map(|row| row.iter().map(|v| v.map(&f)).collect()).collect();
        Self { values, ..self.clone() }
    }

    /// CSV with header `estimator,family,<instance ids>`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TableError> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let mut header = vec!["estimator".to_string(), "family".to_string()];
        header.extend(self.instances.iter().cloned());
        out.write_record(&header)?;
        for (col, row) in self.estimators.iter().zip(&self.values) {
            let mut rec = vec![col.id.clone(), col.family.to_string()];
            rec.extend(row.iter().map(|v| v.map_or_else(|| MISSING.to_string(), |x| x.to_string())));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a table written by [`ScoreTable::write_csv`]; quality is left empty.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, TableError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < 2 || &header[0] != "estimator" || &header[1] != "family" {
            return Err(TableError::Format("header must start with `estimator,family`".into()));
        }
        let instances: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut estimators = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let family: Family = rec[1].parse().map_err(TableError::Format)?;
            estimators.push(EstimatorColumn { id: rec[0].to_string(), family });
            let row = rec
                .iter()
                .skip(2)
                .map(|cell| {
                    if cell == MISSING {
                        Ok(None)
                    } else {
                        let x: f64 = cell.parse().map_err(|_| TableError::Format(format!("bad score {cell:?}")))?;
                        Ok(Some(F::lit(x)))
                    }
                })
                .collect::<Result<Vec<_>, TableError>>()?;
            values.push(row);
        }
        let groups = instances.clone();
        Ok(Self { instances, estimators, values, quality: Vec::new(), groups })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snap_merges_last_bit_noise() {
        let r2 = std::f64::consts::SQRT_2;
        let near = [1.4142135623730945, 1.4142135623730947, r2, 1.4142135623730954];
        assert!(near.iter().all(|&x| snap(x) == snap(r2)));
        assert_eq!(snap(1.0f64), 1.0);
        assert_eq!(snap(-0.5f64), -0.5);
        assert_eq!(snap(0.0f64), 0.0);
        assert_eq!(snap(f64::INFINITY), f64::INFINITY);
        assert_eq!(snap(0.1f64), 0.1);
        assert_eq!(snap(0.1 + 0.2), 0.3);
        assert_eq!(snap(-2.5e-17f64), -2.5e-17);
        assert_ne!(snap(1.0f64), snap(1.0 + 1e-10));
        assert_eq!(snap(0.9999999999999999f64), 1.0);
        assert_eq!(snap(1.0f32 + f32::EPSILON), 1.0);
    }

    fn table() -> ScoreTable<f64> {
        ScoreTable {
            instances: vec!["a".into(), "b,c".into()],
            estimators: vec![
                EstimatorColumn { id: "msp".into(), family: Family::Information },
                EstimatorColumn { id: "renyi".into(), family: Family::Information },
            ],
            values: vec![vec![Some(0.1), None], vec![Some(-2.5e-17), Some(1.0 / 3.0)]],
            quality: Vec::new(),
            groups: vec!["a".into(), "b,c".into()],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = table();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("estimator,family,a,\"b,c\"\nmsp,information,0.1,NA\n"), "{text}");
        assert_eq!(ScoreTable::<f64>::read_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn read_rejects_bad_header() {
        assert!(ScoreTable::<f64>::read_csv("x,y\n".as_bytes()).is_err());
    }
}
