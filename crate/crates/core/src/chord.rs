//! Simulated Chord ring with omnisciently built finger tables.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::hashspace::{RingId, RingSpace, SimRng};
use crate::NodeId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChordNode {
    pub id: RingId,
    pub successor: RingId,
    pub predecessor: RingId,
    /// `fingers[k]` is the first node at or after `id + 2^k`.
    pub fingers: Vec<RingId>,
}

impl ChordNode {
    /// Fingers with duplicates removed, in clockwise order from this node.
    pub fn distinct_fingers(&self) -> Vec<RingId> {
        // Fingers are monotone in clockwise distance, so equal entries are
        // adjacent. A tail of entries may wrap back onto the node itself.
        let mut out = self.fingers.clone();
        out.dedup();
        out
    }
}

/// A stable Chord ring. Node `i` (as a [`NodeId`]) is the `i`-th smallest id.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChordNetwork {
    ring: RingSpace,
    nodes: Vec<ChordNode>,
}

impl ChordNetwork {
    /// Builds a ring from explicit identifiers (duplicates rejected).
    pub fn from_ids(ring: RingSpace, ids: impl IntoIterator<Item = RingId>) -> Result<Self> {
        let mut ids: Vec<RingId> = ids.into_iter().collect();
        if ids.is_empty() {
            return Err(Error::contract("a Chord ring needs at least one node"));
        }
        if let Some(bad) = ids.iter().find(|id| !ring.contains(**id)) {
            return Err(Error::contract(format!(
                "id {bad} outside {}-bit ring",
                ring.bits()
            )));
        }
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract("duplicate Chord identifiers"));
        }
        let n = ids.len();
        let lookup = |key: RingId| -> RingId {
            let i = ids.partition_point(|&x| x < key);
            ids[i % n]
        };
        let nodes = (0..n)
            .map(|i| {
                let id = ids[i];
                let fingers = (0..ring.bits())
                    .map(|k| lookup(ring.add(id, 1u128 << k)))
                    .collect::<Vec<_>>();
                ChordNode {
                    id,
                    successor: ids[(i + 1) % n],
                    predecessor: ids[(i + n - 1) % n],
                    fingers,
                }
            })
            .collect();
        Ok(ChordNetwork { ring, nodes })
    }

    pub fn ring(&self) -> RingSpace {
        self.ring
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[ChordNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &ChordNode {
        &self.nodes[id.index()]
    }

    /// Dense index of the node carrying ring identifier `id`.
    pub fn index_of(&self, id: RingId) -> Option<NodeId> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| NodeId(i as u32))
    }

    /// Index of the first node at or after `key`.
    pub fn responsible_index(&self, key: RingId) -> NodeId {
        let i = self.nodes.partition_point(|n| n.id < key);
        NodeId((i % self.nodes.len()) as u32)
    }

    /// Node storing `key`: the first node at or after it, wrapping around.
    pub fn responsible_node(&self, key: RingId) -> RingId {
        self.nodes[self.responsible_index(key).index()].id
    }

    /// Number of keys `(predecessor, id]` the node is responsible for.
    pub fn key_share(&self, id: NodeId) -> u128 {
        let node = self.node(id);
        if self.nodes.len() == 1 {
            return self.ring.size();
        }
        self.ring.distance(node.predecessor, node.id)
    }
}

/// Builds a ring of `n` nodes with uniformly drawn, distinct 64-bit identifiers.
pub fn build_chord(n: usize, rng: &mut SimRng) -> Result<ChordNetwork> {
    build_chord_in(RingSpace::default(), n, rng)
}

pub fn build_chord_in(ring: RingSpace, n: usize, rng: &mut SimRng) -> Result<ChordNetwork> {
    if n == 0 {
        return Err(Error::contract("a Chord ring needs at least one node"));
    }
    if n as u128 > ring.size() {
        return Err(Error::contract(format!(
            "{n} nodes do not fit on a {}-bit ring",
            ring.bits()
        )));
    }
    let mask = (ring.size() - 1) as u64;
    let mut seen = HashSet::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    while ids.len() < n {
        let id = RingId(rng.next_u64_masked(mask));
        if seen.insert(id) {
            ids.push(id);
        }
    }
    ChordNetwork::from_ids(ring, ids)
}

impl SimRng {
    fn next_u64_masked(&mut self, mask: u64) -> u64 {
        rand::RngCore::next_u64(self) & mask
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_successor(sorted: &[RingId], key: RingId) -> RingId {
        sorted
            .iter()
            .copied()
            .find(|&x| x >= key)
            .unwrap_or(sorted[0])
    }

    #[test]
    fn single_node_points_to_itself() {
        let net = build_chord(1, &mut SimRng::new(1)).unwrap();
        let node = &net.nodes()[0];
        assert_eq!(node.successor, node.id);
        assert_eq!(node.predecessor, node.id);
        assert!(node.fingers.iter().all(|&f| f == node.id));
        assert_eq!(node.fingers.len(), 64);
        assert_eq!(net.key_share(NodeId(0)), 1u128 << 64);
    }

    #[test]
    fn zero_nodes_is_rejected() {
        assert!(build_chord(0, &mut SimRng::new(1)).is_err());
        assert!(ChordNetwork::from_ids(RingSpace::default(), []).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let ring = RingSpace::new(8).unwrap();
        assert!(ChordNetwork::from_ids(ring, [RingId(3), RingId(3)]).is_err());
        assert!(ChordNetwork::from_ids(ring, [RingId(300)]).is_err());
    }

    #[test]
    fn fingers_match_brute_force() {
        let net = build_chord(2000, &mut SimRng::new(7)).unwrap();
        let sorted: Vec<RingId> = net.nodes().iter().map(|n| n.id).collect();
        for node in net.nodes() {
            for (k, &f) in node.fingers.iter().enumerate() {
                let target = RingId(node.id.0.wrapping_add(1u64 << k));
                assert_eq!(f, brute_successor(&sorted, target));
            }
            assert_eq!(node.fingers[0], node.successor);
        }
    }

    #[test]
    fn successor_cycle_covers_ring() {
        let net = build_chord(500, &mut SimRng::new(9)).unwrap();
        let start = net.nodes()[0].id;
        let mut cur = start;
        let mut visited = 0;
        loop {
            let idx = net.index_of(cur).unwrap();
            let node = net.node(idx);
            assert_eq!(
                net.node(net.index_of(node.successor).unwrap()).predecessor,
                cur
            );
            cur = node.successor;
            visited += 1;
            if cur == start {
                break;
            }
        }
        assert_eq!(visited, 500);
    }

    #[test]
    fn finger_minimality_on_small_ring() {
        let ring = RingSpace::new(12).unwrap();
        let net = build_chord_in(ring, 300, &mut SimRng::new(5)).unwrap();
        let ids: Vec<RingId> = net.nodes().iter().map(|n| n.id).collect();
        for node in net.nodes() {
            for (k, &f) in node.fingers.iter().enumerate() {
                let start = ring.add(node.id, 1 << k);
                let gap = ring.distance(start, f);
                // no node strictly between id + 2^k and the finger
                assert!(ids.iter().all(|&x| ring.distance(start, x) >= gap));
            }
        }
    }

    #[test]
    fn responsible_node_examples() {
        let net = build_chord(300, &mut SimRng::new(2)).unwrap();
        let sorted: Vec<RingId> = net.nodes().iter().map(|n| n.id).collect();
        let some = sorted[17];
        assert_eq!(net.responsible_node(some), some);
        let max = *sorted.last().unwrap();
        if max.0 < u64::MAX {
            assert_eq!(net.responsible_node(RingId(max.0 + 1)), sorted[0]);
        }
        let mut rng = SimRng::new(11);
        for _ in 0..2000 {
            let key = RingId(rand::RngCore::next_u64(&mut rng));
            assert_eq!(net.responsible_node(key), brute_successor(&sorted, key));
        }
    }

    #[test]
    fn mean_distinct_fingers_near_log_n() {
        let mut total = 0.0;
        for seed in 0..30 {
            let net = build_chord(2000, &mut SimRng::fork(99, seed)).unwrap();
            let sum: usize = net.nodes().iter().map(|n| n.distinct_fingers().len()).sum();
            total += sum as f64 / net.len() as f64;
        }
        let mean = total / 30.0;
        let expected = (2000f64).log2();
        assert!(
            (mean - expected).abs() <= 2.0,
            "mean distinct fingers {mean}"
        );
    }
}
