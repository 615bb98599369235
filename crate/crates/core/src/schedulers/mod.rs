//! Link and flow scheduling.
//!
//! Three policies share one per-slot interface:
//!
//! * [`SchedulerKind::Fb`]: flow-based TDMA with a fixed frame sized by link congestion,
//! * [`SchedulerKind::Qb`]: queue-based TDMA, re-colored from backlogs at every frame start,
//! * [`SchedulerKind::Bp`]: back-pressure, solved exactly every slot.
//!
//! The TDMA policies only decide which bidirectional links (or merged
//! full-duplex units) are active; the flow on each is picked per slot from
//! the current differential backlogs.

pub mod backlog;
pub mod bp;
pub mod coloring;
pub mod fb;
pub mod fd;
pub mod qb;
pub mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::CapacityMap;
use crate::error::{Error, Result};
use crate::queueing::QueueState;
use crate::topology::{FlowId, LinkId, LinkSet, Topology};

pub use backlog::{differential_backlogs, DifferentialBacklog};
pub use bp::{bp_objective, bp_slot};
pub use coloring::{edge_color, edge_color_with, max_adjacent_sum, FrameSchedule, SlotLayout};
pub use fb::{fb_color_counts, fb_frame_length, fb_frame_length_merged};
pub use fd::{fd_merge, select_flow, UnitLayout};
pub use qb::{qb_adjust_demands, qb_demands};
pub use validate::{validate_decision, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Activation {
    pub link: LinkId,
    pub flow: FlowId,
}

/// Transmissions of one slot, sorted by link id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SlotDecision {
    activations: Vec<Activation>,
}

impl SlotDecision {
    pub fn new(mut activations: Vec<Activation>) -> Self {
        activations.sort();
        SlotDecision { activations }
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn links(&self) -> LinkSet {
        self.activations.iter().map(|a| a.link).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.activations.is_empty()
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    #[default]
    Fb,
    Bp,
    Qb,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 3] = [SchedulerKind::Fb, SchedulerKind::Bp, SchedulerKind::Qb];

    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerKind::Fb => "fb",
            SchedulerKind::Bp => "bp",
            SchedulerKind::Qb => "qb",
        }
    }

    pub fn is_frame_based(self) -> bool {
        !matches!(self, SchedulerKind::Bp)
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fb" => Ok(SchedulerKind::Fb),
            "bp" => Ok(SchedulerKind::Bp),
            "qb" => Ok(SchedulerKind::Qb),
            other => Err(Error::config(
                "scheduler.kind",
                format!("unknown scheduler `{other}`"),
            )),
        }
    }
}

/// Stateful per-run scheduler. Frame schedules are cached between frame
/// boundaries; everything else is recomputed from the inputs.
#[derive(Debug, Clone)]
pub struct Scheduler {
    kind: SchedulerKind,
    gammas: Vec<f64>,
    layout: UnitLayout,
    slot_layout: SlotLayout,
    slot_run: usize,
    frame_len: u32,
    frame: Option<FrameSchedule>,
    recomputations: u64,
}

impl Scheduler {
    /// `frame_len` defaults to the flow-based frame length of `topology`
    /// (with full-duplex merging). A flow-based frame may not be shorter.
    pub fn new(
        kind: SchedulerKind,
        topology: &Topology,
        gammas: Vec<f64>,
        frame_len: Option<u32>,
        slot_layout: SlotLayout,
        slot_run: usize,
    ) -> Result<Self> {
        if slot_run == 0 {
            return Err(Error::config("scheduler.slot_run", "must be at least 1"));
        }
        if gammas.len() != topology.num_flows() {
            return Err(Error::config(
                "scheduler.gammas",
                format!(
                    "expected {} values, got {}",
                    topology.num_flows(),
                    gammas.len()
                ),
            ));
        }
        let layout = fd_merge(topology);
        let fb_len = fb_frame_length_merged(topology, &layout);
        let frame_len = frame_len.unwrap_or(fb_len);
        if frame_len == 0 {
            return Err(Error::config(
                "scheduler.frame_length",
                "must be at least 1",
            ));
        }
        let frame = match kind {
            SchedulerKind::Fb => {
                if frame_len < fb_len {
                    return Err(Error::config(
                        "scheduler.frame_length",
                        format!(
                            "flow-based schedule needs at least {fb_len} slots, got {frame_len}"
                        ),
                    ));
                }
                let demands = layout.unit_demands(&fb_color_counts(topology));
                Some(edge_color_with(&demands, frame_len, slot_layout, slot_run)?)
            }
            _ => None,
        };
        Ok(Scheduler {
            kind,
            gammas,
            layout,
            slot_layout,
            slot_run,
            frame_len,
            frame,
            recomputations: 0,
        })
    }

    pub fn kind(&self) -> SchedulerKind {
        self.kind
    }

    pub fn frame_len(&self) -> u32 {
        self.frame_len
    }

    pub fn layout(&self) -> &UnitLayout {
        &self.layout
    }

    /// The frame in force, if any.
    pub fn frame(&self) -> Option<&FrameSchedule> {
        self.frame.as_ref()
    }

    /// Times the schedule was recomputed: once per frame for TDMA, once per
    /// slot for back-pressure.
    pub fn recomputations(&self) -> u64 {
        self.recomputations
    }

    /// Queue-based frame for the given state.
    pub fn qb_frame(
        &self,
        queues: &QueueState,
        capacities: &CapacityMap,
        topology: &Topology,
    ) -> Result<FrameSchedule> {
        let demands = qb_demands(queues, capacities, topology, &self.gammas);
        let units = qb_adjust_demands(&self.layout.unit_demands(&demands), self.frame_len);
        edge_color_with(&units, self.frame_len, self.slot_layout, self.slot_run)
    }

    pub fn decide(
        &mut self,
        slot: u64,
        topology: &Topology,
        queues: &QueueState,
        capacities: &CapacityMap,
    ) -> Result<SlotDecision> {
        if self.kind == SchedulerKind::Bp {
            self.recomputations += 1;
            return Ok(bp_slot(queues, capacities, topology, &self.gammas));
        }

        let offset = (slot % self.frame_len as u64) as u32;
        if offset == 0 {
            self.recomputations += 1;
            if self.kind == SchedulerKind::Qb {
                self.frame = Some(self.qb_frame(queues, capacities, topology)?);
            }
        }
        let frame = self
            .frame
            .as_ref()
            .expect("frame-based scheduler has a frame");
        let backlog = differential_backlogs(queues, topology, &self.gammas);
        let mut acts = Vec::new();
        for &unit in frame.units_in(offset) {
            acts.extend(select_flow(&self.layout.units()[unit], &backlog, topology));
        }
        Ok(SlotDecision::new(acts))
    }
}
