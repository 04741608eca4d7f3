//! Per-frame execution log and its CSV form.
//!
//! Column order: `t`, then the per-device blocks `h_i, A_i, Q_i, Y_i, x_i,
//! tau_i, f_i, eO_i, r_i, e_i` (each for i = 1..N), then `weighted_rate,
//! G, M, m, wall_ms`. `Q_i` and `Y_i` are the queues observed at the start
//! of frame `t`; `A_i` arrives during the frame. `f_i` is in Hz.

use std::io::{Read, Write};

use crate::error::{OffloadError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub h: Vec<f64>,
    pub arrivals: Vec<f64>,
    pub q: Vec<f64>,
    pub y: Vec<f64>,
    pub x: Vec<u8>,
    pub tau: Vec<f64>,
    pub freq: Vec<f64>,
    pub energy_offload: Vec<f64>,
    pub rate: Vec<f64>,
    pub power: Vec<f64>,
    pub weighted_rate: f64,
    pub objective: f64,
    /// Candidate count M_t (1 for the baselines).
    pub candidates: usize,
    /// Index of the selected candidate.
    pub chosen: usize,
    pub wall_ms: f64,
}

const BLOCKS: [&str; 10] = ["h", "A", "Q", "Y", "x", "tau", "f", "eO", "r", "e"];
const TAIL: [&str; 5] = ["weighted_rate", "G", "M", "m", "wall_ms"];

pub fn header(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for b in BLOCKS {
        cols.extend((1..=n).map(|i| format!("{b}_{i}")));
    }
    cols.extend(TAIL.iter().map(|s| s.to_string()));
    cols
}

impl TraceRecord {
    pub fn num_devices(&self) -> usize {
        self.h.len()
    }

    fn fields(&self) -> Vec<String> {
        let mut out = vec![self.t.to_string()];
        let floats = |v: &[f64], out: &mut Vec<String>| out.extend(v.iter().map(|x| x.to_string()));
        floats(&self.h, &mut out);
        floats(&self.arrivals, &mut out);
        floats(&self.q, &mut out);
        floats(&self.y, &mut out);
        out.extend(self.x.iter().map(|b| b.to_string()));
        floats(&self.tau, &mut out);
        floats(&self.freq, &mut out);
        floats(&self.energy_offload, &mut out);
        floats(&self.rate, &mut out);
        floats(&self.power, &mut out);
        out.push(self.weighted_rate.to_string());
        out.push(self.objective.to_string());
        out.push(self.candidates.to_string());
        out.push(self.chosen.to_string());
        out.push(self.wall_ms.to_string());
        out
    }

    pub fn total_queue(&self) -> f64 {
        self.q.iter().sum()
    }
}

pub fn write_trace<W: Write>(writer: W, records: &[TraceRecord]) -> Result<()> {
    let n = records.first().map_or(0, |r| r.num_devices());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(n))?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(s: &str, col: &str, row: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| OffloadError::Trace(format!("row {row}: bad value {s:?} in column {col}")))
}

pub fn read_trace<R: Read>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut rd = csv::Reader::from_reader(reader);
    let head: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let n = head.iter().filter(|c| c.starts_with("h_")).count();
    if n == 0 || head != header(n) {
        return Err(OffloadError::Trace(
            "header does not match the trace column layout".into(),
        ));
    }
    let mut out = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        let get = |k: usize| rec.get(k).unwrap_or("");
        let block = |b: usize| -> Result<Vec<f64>> {
            (0..n)
                .map(|i| parse(get(1 + b * n + i), &head[1 + b * n + i], row))
                .collect()
        };
        let tail = 1 + BLOCKS.len() * n;
        out.push(TraceRecord {
            t: parse(get(0), "t", row)?,
            h: block(0)?,
            arrivals: block(1)?,
            q: block(2)?,
            y: block(3)?,
            x: (0..n)
                .map(|i| parse(get(1 + 4 * n + i), &head[1 + 4 * n + i], row))
                .collect::<Result<_>>()?,
            tau: block(5)?,
            freq: block(6)?,
            energy_offload: block(7)?,
            rate: block(8)?,
            power: block(9)?,
            weighted_rate: parse(get(tail), "weighted_rate", row)?,
            objective: parse(get(tail + 1), "G", row)?,
            candidates: parse(get(tail + 2), "M", row)?,
            chosen: parse(get(tail + 3), "m", row)?,
            wall_ms: parse(get(tail + 4), "wall_ms", row)?,
        });
    }
    Ok(out)
}

pub fn save_trace(path: impl AsRef<std::path::Path>, records: &[TraceRecord]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_trace(std::io::BufWriter::new(f), records)
}

pub fn load_trace(path: impl AsRef<std::path::Path>) -> Result<Vec<TraceRecord>> {
    read_trace(std::io::BufReader::new(std::fs::File::open(path)?))
}
