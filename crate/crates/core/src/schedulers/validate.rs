//! Activation checker written against the link-index incidence sets of the
//! platoon, independently of [`Topology::is_feasible`].

use std::fmt;

use crate::schedulers::SlotDecision;
use crate::topology::{DuplexMode, FlowId, LinkId, NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownLink(LinkId),
    /// More than one flow on one link.
    SharedLink(LinkId),
    /// The flow may not use the link.
    OffRoute {
        link: LinkId,
        flow: FlowId,
    },
    /// A half-duplex node touches more than one active link.
    HalfDuplex(NodeId),
    /// A node transmits on more than one link.
    MultipleTx(NodeId),
    /// A node receives on more than one link.
    MultipleRx(NodeId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownLink(l) => write!(f, "link {l} does not exist"),
            Violation::SharedLink(l) => write!(f, "link {l} carries more than one flow"),
            Violation::OffRoute { link, flow } => {
                write!(f, "flow {flow} is not routed over link {link}")
            }
            Violation::HalfDuplex(n) => {
                write!(f, "half-duplex node {n} is on several active links")
            }
            Violation::MultipleTx(n) => write!(f, "node {n} transmits on several links"),
            Violation::MultipleRx(n) => write!(f, "node {n} receives on several links"),
        }
    }
}

/// Lists every constraint broken by `decision`. Empty means feasible.
pub fn validate_decision(topology: &Topology, decision: &SlotDecision) -> Vec<Violation> {
    let n_r = topology.num_members();
    let num_links = 2 * (n_r + 1);
    let mut out = Vec::new();
    let mut active = vec![false; num_links + 1];

    for a in decision.activations() {
        if a.link.0 == 0 || a.link.0 > num_links {
            out.push(Violation::UnknownLink(a.link));
            continue;
        }
        if active[a.link.0] {
            out.push(Violation::SharedLink(a.link));
        }
        active[a.link.0] = true;
        if !route_contains(n_r, a.flow, a.link) {
            out.push(Violation::OffRoute {
                link: a.link,
                flow: a.flow,
            });
        }
    }

    let on = |l: usize| l >= 1 && l <= num_links && active[l];
    for i in 0..=n_r + 1 {
        // transmits: right-hand i+1, left-hand i+N_r+1; receives: right-hand i,
        // left-hand i+N_r+2
        let tx = [(i <= n_r).then_some(i + 1), (i >= 1).then_some(i + n_r + 1)];
        let rx = [(i >= 1).then_some(i), (i <= n_r).then_some(i + n_r + 2)];
        let count = |ls: &[Option<usize>]| ls.iter().flatten().filter(|&&l| on(l)).count();
        let (ntx, nrx) = (count(&tx), count(&rx));
        let node = NodeId(i);
        if topology.mode(node) == DuplexMode::Half && ntx + nrx > 1 {
            out.push(Violation::HalfDuplex(node));
        }
        if ntx > 1 {
            out.push(Violation::MultipleTx(node));
        }
        if nrx > 1 {
            out.push(Violation::MultipleRx(node));
        }
    }
    out
}

fn route_contains(n_r: usize, flow: FlowId, link: LinkId) -> bool {
    let half = n_r + 1;
    let (f, l) = (flow.0, link.0);
    if f >= 1 && f <= half {
        l <= f
    } else if f > half && f <= 2 * half {
        l > half && l <= f
    } else {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedulers::Activation;
    use crate::topology::LinkSet;

    fn decision(pairs: &[(usize, usize)]) -> SlotDecision {
        SlotDecision::new(
            pairs
                .iter()
                .map(|&(l, f)| Activation {
                    link: LinkId(l),
                    flow: FlowId(f),
                })
                .collect(),
        )
    }

    fn platoon(fd: &[usize]) -> Topology {
        Topology::new(5, &fd.iter().copied().collect()).unwrap()
    }

    #[test]
    fn accepts_feasible_sets() {
        let t = platoon(&[]);
        assert!(validate_decision(&t, &decision(&[])).is_empty());
        assert!(validate_decision(&t, &decision(&[(1, 1), (3, 4)])).is_empty());
    }

    #[test]
    fn rejects_half_duplex_relay() {
        let t = platoon(&[]);
        assert_eq!(
            validate_decision(&t, &decision(&[(1, 2), (2, 2)])),
            vec![Violation::HalfDuplex(NodeId(1))]
        );
        let fd = platoon(&[1]);
        assert!(validate_decision(&fd, &decision(&[(1, 2), (2, 2)])).is_empty());
    }

    #[test]
    fn rejects_double_reception() {
        let t = platoon(&[1]);
        let v = validate_decision(&t, &decision(&[(1, 1), (6, 6)]));
        assert!(v.contains(&Violation::MultipleRx(NodeId(1))));
    }

    #[test]
    fn rejects_off_route_and_shared_links() {
        let t = platoon(&[]);
        assert_eq!(
            validate_decision(&t, &decision(&[(2, 1)])),
            vec![Violation::OffRoute {
                link: LinkId(2),
                flow: FlowId(1)
            }]
        );
        assert!(validate_decision(&t, &decision(&[(1, 1), (1, 2)]))
            .contains(&Violation::SharedLink(LinkId(1))));
        assert_eq!(
            validate_decision(&t, &decision(&[(9, 8)])),
            vec![Violation::UnknownLink(LinkId(9))]
        );
    }

    #[test]
    fn agrees_with_topology_feasibility() {
        for fd in [
            vec![],
            vec![1],
            vec![0, 2],
            vec![1, 2, 3],
            vec![0, 1, 2, 3, 4],
        ] {
            let t = platoon(&fd);
            for mask in 0u64..1 << t.num_links() {
                let set = LinkSet(mask);
                // pair each link with a flow that may use it
                let d = SlotDecision::new(
                    set.iter()
                        .map(|l| Activation {
                            link: l,
                            flow: t.flows_on(l).last().unwrap().id,
                        })
                        .collect(),
                );
                assert_eq!(
                    validate_decision(&t, &d).is_empty(),
                    t.is_feasible(set),
                    "{fd:?} {mask:b}"
                );
            }
        }
    }

    #[test]
    fn route_rule() {
        assert!(route_contains(3, FlowId(4), LinkId(4)));
        assert!(!route_contains(3, FlowId(3), LinkId(4)));
        assert!(route_contains(3, FlowId(8), LinkId(5)));
        assert!(!route_contains(3, FlowId(6), LinkId(7)));
        assert!(!route_contains(3, FlowId(5), LinkId(1)));
    }
}
