//! Flow-based TDMA: slots per bidirectional link follow the number of flows
//! routed over it.

use crate::schedulers::coloring::max_adjacent_sum;
use crate::schedulers::fd::UnitLayout;
use crate::topology::Topology;

/// Colors per bidirectional link, `o_b = 2(N_r + 1) - 2(b - 1)`.
pub fn fb_color_counts(topology: &Topology) -> Vec<u32> {
    let half = (topology.num_members() + 1) as u32;
    (1..=half).map(|b| 2 * half - 2 * (b - 1)).collect()
}

/// Frame length `T` of the all-HD flow-based schedule.
pub fn fb_frame_length(topology: &Topology) -> u32 {
    max_adjacent_sum(&fb_color_counts(topology))
}

/// Frame length once full-duplex units share colors.
pub fn fb_frame_length_merged(topology: &Topology, layout: &UnitLayout) -> u32 {
    max_adjacent_sum(&layout.unit_demands(&fb_color_counts(topology)))
}
