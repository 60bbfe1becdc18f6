//! File formats for simulator output: truth logs as JSON lines and traces
//! as CSV (`t_ms,aggregate_w[,<appliance>...]`).

use super::engine::{Simulation, TruthEvent};
use crate::series::{Millis, PowerSeries};
use std::io::{self, BufRead, Write};

pub fn write_truth<W: Write>(mut out: W, events: &[TruthEvent]) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_truth<R: BufRead>(input: R) -> io::Result<Vec<TruthEvent>> {
    crate::io::read_jsonl(input)
}

pub fn write_trace<W: Write>(out: W, sim: &Simulation, per_appliance: bool) -> io::Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    let mut header = vec!["t_ms".to_string(), "aggregate_w".to_string()];
    if per_appliance {
        header.extend(sim.truth.traces.iter().map(|t| t.id.clone()));
    }
    csv.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for (i, (t, w)) in sim
        .aggregate
        .t_ms
        .iter()
        .zip(&sim.aggregate.watts)
        .enumerate()
    {
        row.clear();
        row.push(t.to_string());
        row.push(w.to_string());
        if per_appliance {
            row.extend(sim.truth.traces.iter().map(|tr| tr.watts[i].to_string()));
        }
        csv.write_record(&row)?;
    }
    csv.flush()
}

/// Reads the aggregate column of a trace CSV.
pub fn read_trace<R: io::Read>(input: R) -> io::Result<PowerSeries> {
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    let mut csv = csv::Reader::from_reader(input);
    let headers = csv.headers()?.clone();
    if headers.get(0) != Some("t_ms") || headers.get(1) != Some("aggregate_w") {
        return Err(bad("trace header must start with t_ms,aggregate_w".into()));
    }
    let mut series = PowerSeries::default();
    for (line, record) in csv.records().enumerate() {
        let record = record?;
        let t: Millis = record
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("row {}: bad t_ms", line + 2)))?;
        let w: f64 = record
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("row {}: bad aggregate_w", line + 2)))?;
        series.t_ms.push(t);
        series.watts.push(w);
    }
    Ok(series)
}
