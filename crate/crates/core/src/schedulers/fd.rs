//! Full-duplex link merging and per-unit flow selection.

use crate::schedulers::backlog::DifferentialBacklog;
use crate::schedulers::Activation;
use crate::topology::{BidiId, Direction, FlowId, LinkId, Topology};

/// Partition of the bidirectional links into consecutive schedulable units.
/// A full-duplex member `i` joins bidirectional links `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitLayout {
    units: Vec<Vec<BidiId>>,
}

impl UnitLayout {
    pub fn units(&self) -> &[Vec<BidiId>] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Demand per unit: merged links share colors, so a unit needs the
    /// largest demand among its members.
    pub fn unit_demands(&self, bidi_demands: &[u32]) -> Vec<u32> {
        self.units
            .iter()
            .map(|u| u.iter().map(|b| bidi_demands[b.index()]).max().unwrap_or(0))
            .collect()
    }

    /// Expands unit slot counts back to bidirectional links.
    pub fn bidi_counts(&self, unit_counts: &[u32]) -> Vec<u32> {
        self.units
            .iter()
            .zip(unit_counts)
            .flat_map(|(u, &c)| std::iter::repeat_n(c, u.len()))
            .collect()
    }

    pub fn unit_of(&self, bidi: BidiId) -> usize {
        self.units
            .iter()
            .position(|u| u.contains(&bidi))
            .expect("every bidirectional link belongs to a unit")
    }
}

pub fn fd_merge(topology: &Topology) -> UnitLayout {
    let mut units: Vec<Vec<BidiId>> = Vec::new();
    for b in topology.bidi_links() {
        // bidi b connects nodes b-1 and b; merge with the previous unit when
        // the shared node b-1 is a full-duplex member
        let shared = b.id.0 - 1;
        let joins = shared >= 1 && topology.is_full_duplex(crate::topology::NodeId(shared));
        match units.last_mut() {
            Some(last) if joins => last.push(b.id),
            _ => units.push(vec![b.id]),
        }
    }
    UnitLayout { units }
}

fn best_of(
    link: LinkId,
    backlog: &DifferentialBacklog,
    topology: &Topology,
) -> Option<(FlowId, f64)> {
    let mut best: Option<(FlowId, f64)> = None;
    for f in topology.flows_on(link) {
        let w = backlog.flow(link, f.id);
        if w > 0.0 && best.is_none_or(|(_, bw)| w > bw) {
            best = Some((f.id, w));
        }
    }
    best
}

/// Picks the transmissions of an activated unit.
///
/// Per member directional link the largest `W_l^f` is found for each flow
/// direction. The per-direction maxima are summed over the members, the
/// larger sum wins (right-hand on ties), and every member link of the winning
/// direction serves its own best flow. For a single bidirectional link this
/// reduces to choosing the larger of the two directions' best backlogs.
/// The unit idles when every backlog is zero.
pub fn select_flow(
    unit: &[BidiId],
    backlog: &DifferentialBacklog,
    topology: &Topology,
) -> Vec<Activation> {
    let mut right = Vec::with_capacity(unit.len());
    let mut left = Vec::with_capacity(unit.len());
    for b in unit {
        let bidi = &topology.bidi_links()[b.index()];
        right.push((bidi.right, best_of(bidi.right, backlog, topology)));
        left.push((bidi.left, best_of(bidi.left, backlog, topology)));
    }
    let sum = |side: &[(LinkId, Option<(FlowId, f64)>)]| -> f64 {
        side.iter().filter_map(|(_, b)| b.map(|(_, w)| w)).sum()
    };
    let (r, l) = (sum(&right), sum(&left));
    if r == 0.0 && l == 0.0 {
        return Vec::new();
    }
    let winner = if r >= l { right } else { left };
    let mut out: Vec<Activation> = winner
        .into_iter()
        .filter_map(|(link, b)| b.map(|(flow, _)| Activation { link, flow }))
        .collect();
    out.sort_by_key(|a| a.link);
    out
}

/// Direction served by a list of activations from one unit.
pub fn served_direction(acts: &[Activation], topology: &Topology) -> Option<Direction> {
    acts.first()
        .map(|a| topology.links()[a.link.index()].direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queueing::{Packet, QueueState};
    use crate::schedulers::backlog::differential_backlogs;
    use crate::topology::NodeId;

    fn platoon(fd: &[usize]) -> Topology {
        Topology::new(5, &fd.iter().copied().collect()).unwrap()
    }

    fn ids(v: &[usize]) -> Vec<BidiId> {
        v.iter().map(|&b| BidiId(b)).collect()
    }

    #[test]
    fn single_member_merges_two_links() {
        let layout = fd_merge(&platoon(&[1]));
        assert_eq!(layout.units(), &[ids(&[1, 2]), ids(&[3]), ids(&[4])]);
    }

    #[test]
    fn no_fd_is_identity() {
        let layout = fd_merge(&platoon(&[]));
        assert_eq!(
            layout.units(),
            &[ids(&[1]), ids(&[2]), ids(&[3]), ids(&[4])]
        );
    }

    #[test]
    fn consecutive_fd_merge_transitively() {
        let layout = fd_merge(&platoon(&[1, 2]));
        assert_eq!(layout.units(), &[ids(&[1, 2, 3]), ids(&[4])]);
        let all = fd_merge(&platoon(&[1, 2, 3]));
        assert_eq!(all.units(), &[ids(&[1, 2, 3, 4])]);
    }

    #[test]
    fn endpoint_fd_does_not_merge() {
        let layout = fd_merge(&platoon(&[0, 4]));
        assert_eq!(layout.len(), 4);
    }

    #[test]
    fn merged_demand_is_member_maximum() {
        let layout = fd_merge(&platoon(&[2]));
        assert_eq!(layout.unit_demands(&[8, 6, 4, 2]), vec![8, 6, 2]);
        assert_eq!(layout.bidi_counts(&[8, 6, 2]), vec![8, 6, 6, 2]);
        assert_eq!(layout.unit_of(BidiId(3)), 1);
    }

    /// Backlog where the best right-hand `W` on links 1 and 2 is `r1`, `r2`
    /// and the best left-hand `W` on links 5 and 6 is `l1`, `l2` (gamma 1).
    fn staged(t: &Topology, r1: u64, r2: u64, l1: u64, l2: u64) -> DifferentialBacklog {
        let mut q = QueueState::new(t);
        let mut id = 0;
        let mut put = |q: &mut QueueState, flow: usize, hops: &[usize], bits: u64| {
            if bits == 0 {
                return;
            }
            q.enqueue(t, Packet::new(id, FlowId(flow), bits, 0))
                .unwrap();
            id += 1;
            for &l in hops {
                q.serve(t, LinkId(l), FlowId(flow), bits, 0).unwrap();
                q.commit();
            }
        };
        // flow 1 only crosses link 1; flow 2 sits at node 1 so only link 2 sees it
        put(&mut q, 1, &[], r1);
        put(&mut q, 2, &[1], r2);
        // flow 5 starts at node 1 and uses link 5; flow 6 starts at node 2 on link 6
        put(&mut q, 5, &[], l1);
        put(&mut q, 6, &[], l2);
        assert_eq!(q.backlog(NodeId(1), FlowId(2)), r2);
        differential_backlogs(&q, t, &[1.0; 8])
    }

    #[test]
    fn one_sided_backlog_selects_right() {
        let t = platoon(&[]);
        let w = staged(&t, 5, 0, 0, 0);
        let acts = select_flow(&ids(&[1]), &w, &t);
        assert_eq!(
            acts,
            vec![Activation {
                link: LinkId(1),
                flow: FlowId(1)
            }]
        );
    }

    #[test]
    fn equal_sums_prefer_right() {
        let t = platoon(&[]);
        let w = staged(&t, 4, 0, 4, 0);
        let acts = select_flow(&ids(&[1]), &w, &t);
        assert_eq!(served_direction(&acts, &t), Some(Direction::RightHand));
    }

    #[test]
    fn larger_left_backlog_wins_hd_unit() {
        let t = platoon(&[]);
        let w = staged(&t, 3, 0, 4, 0);
        let acts = select_flow(&ids(&[1]), &w, &t);
        assert_eq!(
            acts,
            vec![Activation {
                link: LinkId(5),
                flow: FlowId(5)
            }]
        );
    }

    #[test]
    fn fd_unit_sums_per_direction() {
        let t = platoon(&[1]);
        // right maxima (3, 2), left maxima (4, 0): right wins 5 > 4
        let w = staged(&t, 3, 2, 4, 0);
        let acts = select_flow(&ids(&[1, 2]), &w, &t);
        assert_eq!(
            acts,
            vec![
                Activation {
                    link: LinkId(1),
                    flow: FlowId(1)
                },
                Activation {
                    link: LinkId(2),
                    flow: FlowId(2)
                },
            ]
        );
        // an HD comparison of the single best values would have picked left
        let w = staged(&t, 3, 2, 6, 0);
        let acts = select_flow(&ids(&[1, 2]), &w, &t);
        assert_eq!(
            acts,
            vec![Activation {
                link: LinkId(5),
                flow: FlowId(5)
            }]
        );
    }

    #[test]
    fn idle_when_nothing_queued() {
        let t = platoon(&[1]);
        let w = staged(&t, 0, 0, 0, 0);
        assert!(select_flow(&ids(&[1, 2]), &w, &t).is_empty());
    }
}
