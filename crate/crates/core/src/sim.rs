//! Slotted simulation engine and latency reporting.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelConfig, ChannelProcess};
use crate::error::{Error, Result};
use crate::queueing::{generate_arrivals, slots_to_ms, ArrivalConfig, QueueState};
use crate::schedulers::{validate_decision, FrameSchedule, Scheduler, SchedulerKind, SlotLayout};
use crate::topology::Topology;

const ARRIVAL_STREAM: u64 = 1;
const CHANNEL_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyParams {
    pub n_vehicles: usize,
    pub fd_positions: BTreeSet<usize>,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            n_vehicles: 5,
            fd_positions: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub kind: SchedulerKind,
    /// Backlog exponent per flow; hop-count defaults when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    /// Frame length in slots; the flow-based length when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_length: Option<u32>,
    /// Placement of each unit's slots inside TDMA frames.
    pub layout: SlotLayout,
    /// Consecutive slots per visit in the spread layout. Two lets a link
    /// serve both directions back to back.
    pub slot_run: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            kind: SchedulerKind::default(),
            gammas: None,
            frame_length: None,
            layout: SlotLayout::default(),
            slot_run: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub total_slots: u64,
    /// Slot duration in seconds.
    pub slot_duration: f64,
    pub seed: u64,
    /// Packets arriving before this slot are left out of latency statistics.
    pub warmup_slots: u64,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            total_slots: 40_000,
            slot_duration: 125e-6,
            seed: 1,
            warmup_slots: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub topology: TopologyParams,
    pub channel: ChannelConfig,
    pub arrivals: ArrivalConfig,
    pub scheduler: SchedulerConfig,
    pub sim: RunParams,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.arrivals.validate()?;
        if self.sim.total_slots < 1 {
            return Err(Error::config("sim.total_slots", "must be at least 1"));
        }
        if !(self.sim.slot_duration.is_finite() && self.sim.slot_duration > 0.0) {
            return Err(Error::config(
                "sim.slot_duration",
                format!("must be positive, got {}", self.sim.slot_duration),
            ));
        }
        let topology = self.build_topology()?;
        if let Some(g) = &self.scheduler.gammas {
            if g.len() != topology.num_flows() {
                return Err(Error::config(
                    "scheduler.gammas",
                    format!("expected {} values, got {}", topology.num_flows(), g.len()),
                ));
            }
            if let Some(bad) = g.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
                return Err(Error::config(
                    "scheduler.gammas",
                    format!("exponents must lie in (0, 1], got {bad}"),
                ));
            }
        }
        self.build_scheduler(&topology)?;
        Ok(())
    }

    pub fn build_topology(&self) -> Result<Topology> {
        Topology::new(self.topology.n_vehicles, &self.topology.fd_positions).map_err(|e| match e {
            Error::TooFewVehicles(_) | Error::TooManyVehicles(_) => {
                Error::config("topology.n_vehicles", e.to_string())
            }
            Error::NodeOutOfRange { .. } => Error::config("topology.fd_positions", e.to_string()),
            other => other,
        })
    }

    pub fn build_scheduler(&self, topology: &Topology) -> Result<Scheduler> {
        let gammas = self
            .scheduler
            .gammas
            .clone()
            .unwrap_or_else(|| topology.default_gammas());
        Scheduler::new(
            self.scheduler.kind,
            topology,
            gammas,
            self.scheduler.frame_length,
            self.scheduler.layout,
            self.scheduler.slot_run,
        )
    }
}

/// Frame in force at slot 0: the flow-based frame, or the queue-based frame
/// computed from empty queues and the first channel draw. `None` for
/// back-pressure.
pub fn initial_frame(config: &SimConfig) -> Result<Option<FrameSchedule>> {
    let topology = config.build_topology()?;
    let scheduler = config.build_scheduler(&topology)?;
    match config.scheduler.kind {
        SchedulerKind::Fb => Ok(scheduler.frame().cloned()),
        SchedulerKind::Qb => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.sim.seed);
            rng.set_stream(CHANNEL_STREAM);
            let mut channel = ChannelProcess::new(
                config.channel.clone(),
                rng,
                scheduler.frame_len() as u64,
                config.sim.slot_duration,
            );
            let caps = channel.at(&topology, 0);
            scheduler
                .qb_frame(&QueueState::new(&topology), caps, &topology)
                .map(Some)
        }
        SchedulerKind::Bp => Ok(None),
    }
}

/// Raw outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total_slots: u64,
    pub slot_duration: f64,
    pub frame_len: u32,
    /// Packets generated per flow.
    pub arrived: Vec<u64>,
    /// Delivered packets per flow, including warm-up traffic.
    pub delivered: Vec<u64>,
    pub delivered_bits: Vec<u64>,
    /// Latency samples in slots per flow, warm-up traffic excluded.
    pub latencies: Vec<Vec<u64>>,
    /// Packets still in the network at the end, per flow.
    pub undelivered: Vec<u64>,
    /// Total backlog in bits after each slot.
    pub backlog_trace: Vec<u64>,
    /// Slots in which each directional link sent at least one bit.
    pub link_active_slots: Vec<u64>,
    pub link_bits: Vec<u64>,
    pub recomputations: u64,
    pub channel_draws: u64,
    /// Slots whose decision broke a scheduling constraint.
    pub feasibility_violations: u64,
    /// Slots after which the bit ledger did not balance.
    pub conservation_violations: u64,
}

/// Runs one simulation. Fully determined by `config`, including its seed.
pub fn run(config: &SimConfig) -> Result<Metrics> {
    config.validate()?;
    let topology = config.build_topology()?;
    let mut scheduler = config.build_scheduler(&topology)?;
    let slot_duration = config.sim.slot_duration;

    let mut arrival_rng = ChaCha8Rng::seed_from_u64(config.sim.seed);
    arrival_rng.set_stream(ARRIVAL_STREAM);
    let mut channel_rng = ChaCha8Rng::seed_from_u64(config.sim.seed);
    channel_rng.set_stream(CHANNEL_STREAM);
    let mut channel = ChannelProcess::new(
        config.channel.clone(),
        channel_rng,
        scheduler.frame_len() as u64,
        slot_duration,
    );

    let num_flows = topology.num_flows();
    let num_links = topology.num_links();
    let mut queues = QueueState::new(&topology);
    let mut next_id = 0;
    let mut m = Metrics {
        total_slots: config.sim.total_slots,
        slot_duration,
        frame_len: scheduler.frame_len(),
        arrived: vec![0; num_flows],
        delivered: vec![0; num_flows],
        delivered_bits: vec![0; num_flows],
        latencies: vec![Vec::new(); num_flows],
        undelivered: vec![0; num_flows],
        backlog_trace: Vec::with_capacity(config.sim.total_slots as usize),
        link_active_slots: vec![0; num_links],
        link_bits: vec![0; num_links],
        recomputations: 0,
        channel_draws: 0,
        feasibility_violations: 0,
        conservation_violations: 0,
    };

    for slot in 0..config.sim.total_slots {
        for packet in generate_arrivals(
            &config.arrivals,
            topology.flows(),
            slot,
            &mut arrival_rng,
            &mut next_id,
        ) {
            m.arrived[packet.flow.index()] += 1;
            queues.enqueue(&topology, packet)?;
        }

        let caps = channel.at(&topology, slot);
        let decision = scheduler.decide(slot, &topology, &queues, caps)?;
        if !validate_decision(&topology, &decision).is_empty() {
            m.feasibility_violations += 1;
        }

        let active = decision.links();
        for a in decision.activations() {
            let budget = caps.capacity(a.link, active).floor() as u64;
            let sent = queues.serve(&topology, a.link, a.flow, budget, slot)?;
            if sent > 0 {
                m.link_active_slots[a.link.index()] += 1;
                m.link_bits[a.link.index()] += sent;
            }
        }
        queues.commit();

        for p in queues.take_delivered() {
            let f = p.flow.index();
            m.delivered[f] += 1;
            m.delivered_bits[f] += p.size;
            if p.arrival_slot >= config.sim.warmup_slots {
                m.latencies[f].push(p.latency().expect("delivered"));
            }
        }

        let ledger = queues.ledger();
        debug_assert!(
            ledger.balanced(),
            "bit ledger out of balance at slot {slot}: {ledger:?}"
        );
        if !ledger.balanced() {
            m.conservation_violations += 1;
        }
        m.backlog_trace.push(ledger.queued);
    }

    m.undelivered = queues.undelivered_by_flow();
    m.recomputations = scheduler.recomputations();
    m.channel_draws = channel.draws();
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub flow: usize,
    pub hops: usize,
    pub delivered: u64,
    pub undelivered: u64,
    pub samples: usize,
    pub mean_latency_ms: Option<f64>,
    pub max_latency_ms: Option<f64>,
    /// Delivered bits per second.
    pub throughput_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub flows: Vec<FlowReport>,
    pub samples: usize,
    pub no_samples: bool,
    pub mean_latency_ms: Option<f64>,
    pub max_latency_ms: Option<f64>,
    pub undelivered: u64,
    /// Least-squares slope of the backlog trace in bits per slot.
    pub backlog_slope: f64,
    pub mean_backlog_bits: f64,
    /// Set when the fitted backlog growth over the run exceeds the mean backlog.
    pub unstable: bool,
    pub recomputations: u64,
    /// Fraction of slots each directional link was transmitting.
    pub link_utilization: Vec<f64>,
}

fn mean_max(samples: &[u64]) -> (Option<f64>, Option<f64>) {
    if samples.is_empty() {
        return (None, None);
    }
    let sum: u64 = samples.iter().sum();
    let max = *samples.iter().max().expect("non-empty");
    (Some(sum as f64 / samples.len() as f64), Some(max as f64))
}

/// Least-squares slope of `trace` against its index.
pub fn trend_slope(trace: &[u64]) -> f64 {
    let n = trace.len();
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let y_mean = trace.iter().map(|&y| y as f64).sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in trace.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y as f64 - y_mean);
        sxx += dx * dx;
    }
    sxy / sxx
}

pub fn summarize(metrics: &Metrics, topology: &Topology) -> Report {
    let dt = metrics.slot_duration;
    let to_ms = |v: Option<f64>| v.map(|s| slots_to_ms(s, dt));
    let duration_s = metrics.total_slots as f64 * dt;

    let flows: Vec<FlowReport> = topology
        .flows()
        .iter()
        .map(|f| {
            let i = f.id.index();
            let (mean, max) = mean_max(&metrics.latencies[i]);
            FlowReport {
                flow: f.id.0,
                hops: f.hops(),
                delivered: metrics.delivered[i],
                undelivered: metrics.undelivered[i],
                samples: metrics.latencies[i].len(),
                mean_latency_ms: to_ms(mean),
                max_latency_ms: to_ms(max),
                throughput_bps: metrics.delivered_bits[i] as f64 / duration_s,
            }
        })
        .collect();

    let all: Vec<u64> = metrics.latencies.iter().flatten().copied().collect();
    let (mean, max) = mean_max(&all);
    let slope = trend_slope(&metrics.backlog_trace);
    let mean_backlog = if metrics.backlog_trace.is_empty() {
        0.0
    } else {
        metrics.backlog_trace.iter().map(|&b| b as f64).sum::<f64>()
            / metrics.backlog_trace.len() as f64
    };
    let growth = slope * metrics.backlog_trace.len() as f64;

    Report {
        flows,
        samples: all.len(),
        no_samples: all.is_empty(),
        mean_latency_ms: to_ms(mean),
        max_latency_ms: to_ms(max),
        undelivered: metrics.undelivered.iter().sum(),
        backlog_slope: slope,
        mean_backlog_bits: mean_backlog,
        unstable: growth > 0.0 && growth > mean_backlog,
        recomputations: metrics.recomputations,
        link_utilization: metrics
            .link_active_slots
            .iter()
            .map(|&a| a as f64 / metrics.total_slots as f64)
            .collect(),
    }
}
