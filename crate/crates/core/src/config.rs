//! TOML configuration files.
//!
//! A run config has up to five sections, every key optional (defaults are
//! the reference platoon scenario):
//!
//! ```toml
//! [topology]
//! n_vehicles = 5
//! fd_positions = [1]
//!
//! [channel]
//! carrier_freq = 30e9        # Hz
//! bandwidth = 200e6          # Hz
//! tx_power = 23.0            # dBm
//! shadowing_mean = 0.0       # dB
//! shadowing_std = 8.0        # dB
//! noise_psd = -174.0         # dBm/Hz
//! noise_figure = 0.0         # dB
//! sic_level = 40.0           # dB
//! vehicle_length = 5.0       # m
//! vehicle_separation = 33.33 # m
//! coherence = "per_frame"    # or "per_slot"
//!
//! [arrivals]
//! rate = 0.04                # packets/slot per flow
//! packet_sizes = [40000, 72000, 104000, 136000]   # bits
//!
//! [scheduler]
//! kind = "qb"                # fb | bp | qb
//! # gammas = [0.8, 0.9, 0.9, 1.0, 0.8, 0.9, 0.9, 1.0]
//! # frame_length = 14
//! layout = "spread"          # or "blocked"
//! slot_run = 2               # consecutive slots per visit, spread layout
//!
//! [sim]
//! total_slots = 40000
//! slot_duration = 125e-6     # s
//! seed = 1
//! warmup_slots = 0
//! ```
//!
//! A `[sweep]` section turns the file into a sweep spec; the other sections
//! then form the base config. Unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedulers::SchedulerKind;
use crate::sim::SimConfig;

pub const DEFAULT_MAX_POINTS: u64 = 10_000;

/// Axes of a sweep. Absent axes keep the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_positions: Option<Vec<BTreeSet<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sic_level: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheduler: Option<Vec<SchedulerKind>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<Vec<f64>>,
    /// Explicit seeds; exclusive with `replications`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// Runs per point with seeds `base, base+1, ...`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<u64>,
    pub max_points: u64,
}

impl Default for SweepAxes {
    fn default() -> Self {
        SweepAxes {
            fd_positions: None,
            sic_level: None,
            scheduler: None,
            rate: None,
            seeds: None,
            replications: None,
            max_points: DEFAULT_MAX_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SimConfig,
    pub axes: SweepAxes,
}

/// One run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub config: SimConfig,
    /// Position along each axis, used for ordering rows.
    pub key: [usize; 5],
}

impl SweepSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match (&self.axes.seeds, self.axes.replications) {
            (Some(s), _) => s.clone(),
            (None, r) => {
                let base = self.base.sim.seed;
                (0..r.unwrap_or(1)).map(|k| base + k).collect()
            }
        }
    }

    /// Number of (point, seed) runs.
    pub fn size(&self) -> u64 {
        let a = &self.axes;
        let len = |o: Option<usize>| o.unwrap_or(1) as u64;
        len(a.fd_positions.as_ref().map(Vec::len))
            * len(a.sic_level.as_ref().map(Vec::len))
            * len(a.scheduler.as_ref().map(Vec::len))
            * len(a.rate.as_ref().map(Vec::len))
            * self.seeds().len() as u64
    }

    /// Expands the grid, ordered by fd placement, SIC, scheduler, rate, seed.
    pub fn points(&self) -> Vec<SweepPoint> {
        let a = &self.axes;
        let base = &self.base;
        let fd = a
            .fd_positions
            .clone()
            .unwrap_or_else(|| vec![base.topology.fd_positions.clone()]);
        let sic = a
            .sic_level
            .clone()
            .unwrap_or_else(|| vec![base.channel.sic_level]);
        let sched = a
            .scheduler
            .clone()
            .unwrap_or_else(|| vec![base.scheduler.kind]);
        let rate = a.rate.clone().unwrap_or_else(|| vec![base.arrivals.rate]);
        let seeds = self.seeds();

        let mut out = Vec::with_capacity(self.size() as usize);
        for (i0, f) in fd.iter().enumerate() {
            for (i1, &s) in sic.iter().enumerate() {
                for (i2, &k) in sched.iter().enumerate() {
                    for (i3, &r) in rate.iter().enumerate() {
                        for (i4, &seed) in seeds.iter().enumerate() {
                            let mut c = base.clone();
                            c.topology.fd_positions = f.clone();
                            c.channel.sic_level = s;
                            c.scheduler.kind = k;
                            c.arrivals.rate = r;
                            c.sim.seed = seed;
                            out.push(SweepPoint {
                                config: c,
                                key: [i0, i1, i2, i3, i4],
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.axes.seeds.is_some() && self.axes.replications.is_some() {
            return Err(Error::config(
                "sweep.replications",
                "give either `seeds` or `replications`, not both",
            ));
        }
        if self.axes.replications == Some(0) {
            return Err(Error::config("sweep.replications", "must be at least 1"));
        }
        let empty_axis = [
            (
                "sweep.fd_positions",
                self.axes.fd_positions.as_ref().map(Vec::len),
            ),
            (
                "sweep.sic_level",
                self.axes.sic_level.as_ref().map(Vec::len),
            ),
            (
                "sweep.scheduler",
                self.axes.scheduler.as_ref().map(Vec::len),
            ),
            ("sweep.rate", self.axes.rate.as_ref().map(Vec::len)),
            ("sweep.seeds", self.axes.seeds.as_ref().map(Vec::len)),
        ]
        .into_iter()
        .find(|(_, n)| *n == Some(0));
        if let Some((field, _)) = empty_axis {
            return Err(Error::config(field, "axis must not be empty"));
        }
        let size = self.size();
        if size > self.axes.max_points {
            return Err(Error::config(
                "sweep.max_points",
                format!("grid has {size} runs, limit is {}", self.axes.max_points),
            ));
        }
        for p in self.points() {
            p.config.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedConfig {
    Single(SimConfig),
    Sweep(SweepSpec),
}

fn parse_error(e: toml::de::Error) -> Error {
    Error::Parse(e.to_string().trim_end().to_string())
}

/// On-disk layout: the run sections plus an optional sweep section.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    topology: crate::sim::TopologyParams,
    #[serde(default)]
    channel: crate::channel::ChannelConfig,
    #[serde(default)]
    arrivals: crate::queueing::ArrivalConfig,
    #[serde(default)]
    scheduler: crate::sim::SchedulerConfig,
    #[serde(default)]
    sim: crate::sim::RunParams,
    sweep: Option<SweepAxes>,
}

/// Parses and validates a run config or sweep spec.
pub fn parse_config_str(text: &str) -> Result<ParsedConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(parse_error)?;
    let base = SimConfig {
        topology: file.topology,
        channel: file.channel,
        arrivals: file.arrivals,
        scheduler: file.scheduler,
        sim: file.sim,
    };
    match file.sweep {
        None => {
            base.validate()?;
            Ok(ParsedConfig::Single(base))
        }
        Some(axes) => {
            let spec = SweepSpec { base, axes };
            spec.validate()?;
            Ok(ParsedConfig::Sweep(spec))
        }
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ParsedConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Parses a file that must hold a single run config.
pub fn parse_sim_config(text: &str) -> Result<SimConfig> {
    match parse_config_str(text)? {
        ParsedConfig::Single(c) => Ok(c),
        ParsedConfig::Sweep(_) => Err(Error::Parse(
            "expected a run config, found a [sweep] section".into(),
        )),
    }
}

/// Renders `config` in the file format; the output parses back to `config`.
pub fn to_toml(config: &SimConfig) -> String {
    toml::to_string(config).expect("config is representable as TOML")
}

pub fn sweep_to_toml(spec: &SweepSpec) -> String {
    let mut table = toml::Table::try_from(&spec.base).expect("config is representable as TOML");
    table.insert(
        "sweep".into(),
        toml::Value::try_from(&spec.axes).expect("axes are representable as TOML"),
    );
    toml::to_string(&table).expect("table renders")
}
