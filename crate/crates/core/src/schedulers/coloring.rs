//! Slot assignment for a path of schedulable units.
//!
//! Units are bidirectional links, or groups of them merged around full-duplex
//! relays. Consecutive units share a half-duplex node and must not share a
//! slot; units further apart may.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of slots needed to color `demands` on a path: the largest demand
/// of two adjacent units (or of the single unit).
pub fn max_adjacent_sum(demands: &[u32]) -> u32 {
    match demands {
        [] => 0,
        [only] => *only,
        _ => demands.windows(2).map(|w| w[0] + w[1]).max().unwrap_or(0),
    }
}

/// One frame: which units transmit in which slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSchedule {
    frame_len: u32,
    /// 0-based slots per unit, ascending.
    unit_slots: Vec<Vec<u32>>,
    /// Units active per slot, ascending.
    slot_units: Vec<Vec<usize>>,
}

impl FrameSchedule {
    pub fn frame_len(&self) -> u32 {
        self.frame_len
    }

    pub fn num_units(&self) -> usize {
        self.unit_slots.len()
    }

    pub fn slots_of(&self, unit: usize) -> &[u32] {
        &self.unit_slots[unit]
    }

    pub fn units_in(&self, slot: u32) -> &[usize] {
        &self.slot_units[slot as usize]
    }

    /// Slot count assigned to each unit.
    pub fn counts(&self) -> Vec<u32> {
        self.unit_slots.iter().map(|s| s.len() as u32).collect()
    }
}

/// How a unit's slots are placed inside the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotLayout {
    /// Lowest free slots first, so each unit's slots are contiguous runs.
    Blocked,
    /// Short runs of consecutive slots spread evenly over the frame, so
    /// neighbouring units take turns.
    #[default]
    Spread,
}

/// Assigns `demands[k]` distinct slots of a `frame_len`-slot frame to unit
/// `k` so that adjacent units never share a slot, using the blocked layout.
///
/// Units are colored in path order. Each unit avoids its predecessor's slots
/// and prefers the slots of the unit two positions back, then the lowest free
/// slots. With all-HD demands `[8, 6, 4, 2]` and 14 slots this gives
/// `{1..8}, {9..14}, {1..4}, {9, 10}` (1-based).
pub fn edge_color(demands: &[u32], frame_len: u32) -> Result<FrameSchedule> {
    edge_color_with(demands, frame_len, SlotLayout::Blocked, 1)
}

/// `count` entries of `pool` taken in runs of `run` consecutive entries, the
/// runs evenly spaced over the pool.
fn spread_pick(pool: &[u32], count: usize, run: usize) -> Vec<u32> {
    let runs = count.div_ceil(run.max(1));
    let mut picked = Vec::with_capacity(count);
    let mut next_free = 0;
    for j in 0..runs {
        let remaining = count - picked.len();
        let start = (j * pool.len() / runs)
            .max(next_free)
            .min(pool.len() - remaining);
        let take = remaining.min(run);
        picked.extend_from_slice(&pool[start..start + take]);
        next_free = start + take;
    }
    picked
}

/// Same contract as [`edge_color`] with a choice of layout.
///
/// In the spread layout each unit takes its slots in runs of `run`
/// candidates, runs evenly spaced. The first unit draws from the whole frame;
/// every later unit draws first from the slots of the unit two positions back
/// (which its predecessor cannot hold), then from the remaining free slots.
/// With `run = 1` and demands `[8, 6, 4, 2]` in 14 slots the first unit sits
/// at `floor(j * 14 / 8)`. The blocked layout ignores `run`.
pub fn edge_color_with(
    demands: &[u32],
    frame_len: u32,
    layout: SlotLayout,
    run: usize,
) -> Result<FrameSchedule> {
    let needed = max_adjacent_sum(demands);
    if needed > frame_len {
        return Err(Error::InfeasibleDemand {
            demand: demands.to_vec(),
            needed,
            frame_len,
        });
    }

    let mut unit_slots: Vec<Vec<u32>> = Vec::with_capacity(demands.len());
    for (k, &d) in demands.iter().enumerate() {
        let d = d as usize;
        let mut blocked = vec![false; frame_len as usize];
        if k >= 1 {
            for &s in &unit_slots[k - 1] {
                blocked[s as usize] = true;
            }
        }
        let preferred: Vec<u32> = if k >= 2 {
            unit_slots[k - 2]
                .iter()
                .copied()
                .filter(|&s| !blocked[s as usize])
                .collect()
        } else {
            Vec::new()
        };
        let others: Vec<u32> = (0..frame_len)
            .filter(|&s| !blocked[s as usize] && !preferred.contains(&s))
            .collect();

        let mut chosen = match layout {
            SlotLayout::Blocked => preferred.iter().chain(&others).copied().take(d).collect(),
            SlotLayout::Spread => {
                if d <= preferred.len() {
                    spread_pick(&preferred, d, run)
                } else {
                    let mut c = preferred.clone();
                    c.extend(spread_pick(&others, d - preferred.len(), run));
                    c
                }
            }
        };
        debug_assert_eq!(chosen.len(), d);
        chosen.sort_unstable();
        unit_slots.push(chosen);
    }

    let mut slot_units = vec![Vec::new(); frame_len as usize];
    for (k, slots) in unit_slots.iter().enumerate() {
        for &s in slots {
            slot_units[s as usize].push(k);
        }
    }

    Ok(FrameSchedule {
        frame_len,
        unit_slots,
        slot_units,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent check: counts match, adjacent units are disjoint, slots in range.
    fn check(demands: &[u32], frame: &FrameSchedule) {
        assert_eq!(frame.counts(), demands);
        for k in 0..frame.num_units() {
            let s = frame.slots_of(k);
            assert!(s.iter().all(|&x| x < frame.frame_len()));
            let mut dedup = s.to_vec();
            dedup.dedup();
            assert_eq!(dedup.len(), s.len());
            if k + 1 < frame.num_units() {
                let next = frame.slots_of(k + 1);
                assert!(
                    s.iter().all(|x| !next.contains(x)),
                    "units {k} and {} overlap",
                    k + 1
                );
            }
        }
        for slot in 0..frame.frame_len() {
            for &u in frame.units_in(slot) {
                assert!(frame.slots_of(u).contains(&slot));
            }
        }
    }

    #[test]
    fn all_half_duplex_frame() {
        let frame = edge_color(&[8, 6, 4, 2], 14).unwrap();
        check(&[8, 6, 4, 2], &frame);
        assert_eq!(frame.slots_of(0), (0..8).collect::<Vec<_>>());
        assert_eq!(frame.slots_of(1), (8..14).collect::<Vec<_>>());
        assert!(frame.slots_of(2).iter().all(|&s| s < 8));
        assert!(frame.slots_of(3).iter().all(|&s| (8..14).contains(&s)));
    }

    #[test]
    fn single_slot() {
        let frame = edge_color(&[1, 0], 1).unwrap();
        assert_eq!(frame.slots_of(0), &[0]);
        assert!(frame.slots_of(1).is_empty());
    }

    #[test]
    fn infeasible_demand() {
        assert!(matches!(
            edge_color(&[2, 2], 3),
            Err(Error::InfeasibleDemand {
                needed: 4,
                frame_len: 3,
                ..
            })
        ));
    }

    #[test]
    fn single_unit_uses_its_demand() {
        assert_eq!(max_adjacent_sum(&[8]), 8);
        assert!(edge_color(&[9], 8).is_err());
        check(&[8], &edge_color(&[8], 8).unwrap());
    }

    #[test]
    fn spread_frame_alternates_neighbours() {
        let frame = edge_color_with(&[8, 6, 4, 2], 14, SlotLayout::Spread, 1).unwrap();
        check(&[8, 6, 4, 2], &frame);
        assert_eq!(frame.slots_of(0), &[0, 1, 3, 5, 7, 8, 10, 12]);
        assert_eq!(frame.slots_of(1), &[2, 4, 6, 9, 11, 13]);
        assert_eq!(frame.slots_of(2), &[0, 3, 7, 10]);
        assert_eq!(frame.slots_of(3), &[2, 9]);
    }

    #[test]
    fn spread_frame_in_pairs() {
        let frame = edge_color_with(&[8, 6, 4, 2], 14, SlotLayout::Spread, 2).unwrap();
        check(&[8, 6, 4, 2], &frame);
        assert_eq!(frame.slots_of(0), &[0, 1, 3, 4, 7, 8, 10, 11]);
        assert_eq!(frame.slots_of(1), &[2, 5, 6, 9, 12, 13]);
        assert_eq!(frame.slots_of(2), &[0, 1, 7, 8]);
        assert_eq!(frame.slots_of(3), &[2, 5]);
    }

    #[test]
    fn spread_pick_never_repeats() {
        for len in 1..12 {
            let pool: Vec<u32> = (0..len as u32).collect();
            for count in 0..=len {
                for run in 1..5 {
                    let p = spread_pick(&pool, count, run);
                    assert_eq!(p.len(), count);
                    assert!(
                        p.windows(2).all(|w| w[0] < w[1]),
                        "{len} {count} {run}: {p:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn spread_rejects_infeasible_demand() {
        assert!(edge_color_with(&[2, 2], 3, SlotLayout::Spread, 2).is_err());
    }

    proptest! {
        #[test]
        fn greedy_coloring_is_valid(
            demands in prop::collection::vec(0u32..12, 1..8),
            slack in 0u32..4,
            run in 1usize..5,
        ) {
            let t = max_adjacent_sum(&demands) + slack;
            for layout in [SlotLayout::Blocked, SlotLayout::Spread] {
                let frame = edge_color_with(&demands, t, layout, run).unwrap();
                check(&demands, &frame);
            }
        }
    }
}
