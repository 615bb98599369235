//! Queue-based TDMA: frame demands come from the backlog state at the start
//! of each frame.

use crate::channel::CapacityMap;
use crate::queueing::QueueState;
use crate::schedulers::backlog::differential_backlogs;
use crate::schedulers::coloring::max_adjacent_sum;
use crate::topology::{LinkId, Topology};

/// Demand per bidirectional link for the coming frame.
///
/// Every flow with a non-empty queue on its route votes for the link that
/// maximises `W_l^f / C_l` (lowest link id on ties); a bidirectional link's
/// demand is the votes of its two directional links.
pub fn qb_demands(
    queues: &QueueState,
    capacities: &CapacityMap,
    topology: &Topology,
    gammas: &[f64],
) -> Vec<u32> {
    let backlog = differential_backlogs(queues, topology, gammas);
    let mut directional = vec![0u32; topology.num_links()];
    for flow in topology.flows() {
        let mut route: Vec<LinkId> = flow.route.clone();
        route.sort_unstable();
        let mut best: Option<(LinkId, f64)> = None;
        for l in route {
            let w = backlog.flow(l, flow.id);
            if w <= 0.0 {
                continue;
            }
            let ratio = w / capacities.standalone(l);
            if best.is_none_or(|(_, r)| ratio > r) {
                best = Some((l, ratio));
            }
        }
        if let Some((l, _)) = best {
            directional[l.index()] += 1;
        }
    }
    topology
        .bidi_links()
        .iter()
        .map(|b| directional[b.right.index()] + directional[b.left.index()])
        .collect()
}

/// Scales `demands` (a path of units) so the largest adjacent-pair sum is
/// exactly `frame_len`.
///
/// Too much demand is cut one slot at a time from the largest entry (lowest
/// index on ties). Too little is topped up round-robin from the first entry,
/// skipping entries whose increment would overshoot.
pub fn qb_adjust_demands(demands: &[u32], frame_len: u32) -> Vec<u32> {
    let mut d = demands.to_vec();
    if d.is_empty() {
        return d;
    }
    while max_adjacent_sum(&d) > frame_len {
        let (i, _) = d
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("non-empty");
        d[i] -= 1;
    }
    let mut next = 0;
    while max_adjacent_sum(&d) < frame_len {
        d[next] += 1;
        if max_adjacent_sum(&d) > frame_len {
            d[next] -= 1;
        }
        next = (next + 1) % d.len();
    }
    d
}
