//! Slot-by-slot back-pressure over all conflict-free link sets.

use crate::channel::CapacityMap;
use crate::queueing::QueueState;
use crate::schedulers::backlog::{differential_backlogs, DifferentialBacklog};
use crate::schedulers::{Activation, SlotDecision};
use crate::topology::{LinkSet, Topology};

/// `sum_l W_l * min(Q, C_l)` over the links of `set`, where `Q` is the
/// transmitter's backlog of the link's best flow and `C_l` is evaluated with
/// `set` as the transmission set. Terms are accumulated by ascending link id.
pub fn bp_objective(
    set: LinkSet,
    backlog: &DifferentialBacklog,
    queues: &QueueState,
    capacities: &CapacityMap,
    topology: &Topology,
) -> f64 {
    let mut total = 0.0;
    for l in set.iter() {
        let Some(flow) = backlog.best_flow(l) else {
            continue;
        };
        let tx = topology.links()[l.index()].tx;
        let mu = (queues.backlog(tx, flow) as f64).min(capacities.capacity(l, set));
        total += backlog.link(l) * mu;
    }
    total
}

/// Maximum-weight activation for one slot.
///
/// Only links with a positive differential backlog are considered; adding a
/// zero-weight link can only add self-interference. Among sets with equal
/// objective the one whose sorted link ids are lexicographically smallest
/// wins. Each active link serves its largest-backlog flow.
pub fn bp_slot(
    queues: &QueueState,
    capacities: &CapacityMap,
    topology: &Topology,
    gammas: &[f64],
) -> SlotDecision {
    let backlog = differential_backlogs(queues, topology, gammas);
    let positive: LinkSet = topology
        .links()
        .iter()
        .map(|l| l.id)
        .filter(|&l| backlog.best_flow(l).is_some())
        .collect();
    if positive.is_empty() {
        return SlotDecision::default();
    }

    let mut best = LinkSet::EMPTY;
    let mut best_value = 0.0;
    for &set in topology.conflict_free_sets() {
        if set.is_empty() || !set.is_subset(positive) {
            continue;
        }
        let value = bp_objective(set, &backlog, queues, capacities, topology);
        if value > best_value || (value == best_value && set.iter().lt(best.iter())) {
            best = set;
            best_value = value;
        }
    }
    if best_value <= 0.0 {
        return SlotDecision::default();
    }

    SlotDecision::new(
        best.iter()
            .map(|link| Activation {
                link,
                flow: backlog.best_flow(link).expect("positive link"),
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_capacities, ChannelConfig};
    use crate::queueing::Packet;
    use crate::topology::{FlowId, LinkId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(fd: &[usize]) -> (Topology, CapacityMap) {
        let t = Topology::new(5, &fd.iter().copied().collect()).unwrap();
        let caps = draw_capacities(
            &ChannelConfig::default(),
            &t,
            &mut ChaCha8Rng::seed_from_u64(11),
            125e-6,
        );
        (t, caps)
    }

    #[test]
    fn empty_network_idles() {
        let (t, caps) = setup(&[]);
        let q = QueueState::new(&t);
        assert!(bp_slot(&q, &caps, &t, &t.default_gammas()).is_empty());
    }

    #[test]
    fn single_source_queue_activates_its_link() {
        let (t, caps) = setup(&[]);
        let mut q = QueueState::new(&t);
        q.enqueue(&t, Packet::new(0, FlowId(3), 104_000, 0))
            .unwrap();
        let d = bp_slot(&q, &caps, &t, &t.default_gammas());
        assert_eq!(
            d.activations(),
            &[Activation {
                link: LinkId(1),
                flow: FlowId(3)
            }]
        );
    }

    #[test]
    fn picks_non_conflicting_pair() {
        let (t, caps) = setup(&[]);
        let mut q = QueueState::new(&t);
        // flow 1 at the leader and flow 8 at the tail: links 1 and 8 share no node
        q.enqueue(&t, Packet::new(0, FlowId(1), 40_000, 0)).unwrap();
        q.enqueue(&t, Packet::new(1, FlowId(8), 40_000, 0)).unwrap();
        let d = bp_slot(&q, &caps, &t, &t.default_gammas());
        let links: Vec<LinkId> = d.activations().iter().map(|a| a.link).collect();
        assert_eq!(links, vec![LinkId(1), LinkId(8)]);
    }

    #[test]
    fn unit_gammas_reduce_to_classic_backpressure() {
        let (t, caps) = setup(&[]);
        let mut q = QueueState::new(&t);
        q.enqueue(&t, Packet::new(0, FlowId(4), 72_000, 0)).unwrap();
        let backlog = differential_backlogs(&q, &t, &[1.0; 8]);
        assert_eq!(backlog.link(LinkId(1)), 72_000.0);
        let d = bp_slot(&q, &caps, &t, &[1.0; 8]);
        assert_eq!(d.activations()[0].flow, FlowId(4));
    }
}
