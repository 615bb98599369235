//! Sweep execution and result tables.
//!
//! The CSV table has one row per (grid point, seed) with these columns:
//!
//! | column | meaning |
//! |---|---|
//! | `fd_positions` | full-duplex vehicles, `;`-separated, or `none` |
//! | `sic_level_db` | self-interference cancellation |
//! | `scheduler` | `fb`, `bp` or `qb` |
//! | `rate` | arrival rate per flow, packets/slot |
//! | `seed` | run seed |
//! | `mean_latency_ms`, `max_latency_ms` | over all delivered packets |
//! | `samples` | latency samples behind the two columns above |
//! | `undelivered` | packets left in the network at the end |
//! | `recomputations` | schedule computations during the run |
//! | `unstable` | backlog kept growing over the run |
//! | `flow_mean_latency_ms`, `flow_max_latency_ms`, `flow_undelivered` | per flow in flow-id order, `;`-separated |
//! | `error` | failure message; every other result column is empty then |
//!
//! Floats use six decimals and a decimal point; missing values are empty.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{SweepPoint, SweepSpec};
use crate::error::{Error, Result};
use crate::schedulers::SchedulerKind;
use crate::sim::{run, summarize, Report, SimConfig};

pub const CSV_COLUMNS: [&str; 15] = [
    "fd_positions",
    "sic_level_db",
    "scheduler",
    "rate",
    "seed",
    "mean_latency_ms",
    "max_latency_ms",
    "samples",
    "undelivered",
    "recomputations",
    "unstable",
    "flow_mean_latency_ms",
    "flow_max_latency_ms",
    "flow_undelivered",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub fd_positions: BTreeSet<usize>,
    pub sic_level: f64,
    pub scheduler: SchedulerKind,
    pub rate: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<Report>,
    /// Latency in slots mapped to the number of packets with that latency.
    #[serde(skip)]
    pub histogram: BTreeMap<u64, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs one configuration. Failures end up in the row, not in the return value.
pub fn run_point(config: &SimConfig) -> ResultRow {
    let mut row = ResultRow {
        fd_positions: config.topology.fd_positions.clone(),
        sic_level: config.channel.sic_level,
        scheduler: config.scheduler.kind,
        rate: config.arrivals.rate,
        seed: config.sim.seed,
        report: None,
        histogram: BTreeMap::new(),
        error: None,
    };
    let outcome = config
        .build_topology()
        .and_then(|topology| run(config).map(|m| (topology, m)));
    match outcome {
        Ok((topology, metrics)) => {
            for &l in metrics.latencies.iter().flatten() {
                *row.histogram.entry(l).or_default() += 1;
            }
            row.report = Some(summarize(&metrics, &topology));
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every (point, seed) of `spec` on up to `parallelism` threads.
/// Rows come back in grid order whatever the thread count.
pub fn run_sweep(spec: &SweepSpec, parallelism: usize) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let points: Vec<SweepPoint> = spec.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Io(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(|| points.par_iter().map(|p| run_point(&p.config)).collect()))
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(";")
}

pub fn format_fd_positions(fd: &BTreeSet<usize>) -> String {
    if fd.is_empty() {
        "none".to_string()
    } else {
        fd.iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn csv_record(row: &ResultRow) -> Vec<String> {
    let mut rec = vec![
        format_fd_positions(&row.fd_positions),
        fmt_f64(row.sic_level),
        row.scheduler.to_string(),
        fmt_f64(row.rate),
        row.seed.to_string(),
    ];
    match &row.report {
        Some(r) => rec.extend([
            fmt_opt(r.mean_latency_ms),
            fmt_opt(r.max_latency_ms),
            r.samples.to_string(),
            r.undelivered.to_string(),
            r.recomputations.to_string(),
            r.unstable.to_string(),
            join(&r.flows, |f| fmt_opt(f.mean_latency_ms)),
            join(&r.flows, |f| fmt_opt(f.max_latency_ms)),
            join(&r.flows, |f| f.undelivered.to_string()),
        ]),
        None => rec.extend(std::iter::repeat_n(String::new(), 9)),
    }
    rec.push(row.error.clone().unwrap_or_default());
    rec
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for row in rows {
        w.write_record(csv_record(row)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

/// Full per-flow detail as pretty-printed JSON.
pub fn to_json(rows: &[ResultRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize to json")
}

/// Latency histogram of every row: `row,latency_slots,latency_ms,count`.
pub fn histogram_csv(rows: &[ResultRow], slot_duration: f64) -> String {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["row", "latency_slots", "latency_ms", "count"])
            .expect("in-memory write");
        for (i, row) in rows.iter().enumerate() {
            for (&slots, &count) in &row.histogram {
                let ms = slots as f64 * slot_duration * 1e3;
                w.write_record([
                    i.to_string(),
                    slots.to_string(),
                    fmt_f64(ms),
                    count.to_string(),
                ])
                .expect("in-memory write");
            }
        }
        w.flush().expect("in-memory write");
    }
    String::from_utf8(buf).expect("csv output is utf-8")
}
