use crate::can::{CanNetwork, CanZone};
use crate::chord::ChordNetwork;
use crate::error::{Error, Result};
use crate::hashspace::{RingSpace, TorusBox, UNIT};
use crate::sim::kernel::{propagate, Delivery, Forwarding, Propagation};
use crate::NodeId;

use super::can_tree::{can_children, zone_anchor, zone_meets_area};
use super::chord_tree::{chord_children, chord_member, ArcPlan};
use super::{AreaSpec, FaultModel, RootAnchor, TreeMessage, TreeStats};

/// A built network of either kind.
#[derive(Clone, Copy, Debug)]
pub enum Overlay<'a> {
    Chord(&'a ChordNetwork),
    Can(&'a CanNetwork),
}

impl Overlay<'_> {
    pub fn len(&self) -> usize {
        match self {
            Overlay::Chord(net) => net.len(),
            Overlay::Can(net) => net.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether `node` stores part of `area`.
    pub fn meets(&self, node: NodeId, area: &AreaSpec) -> Result<bool> {
        match self {
            Overlay::Chord(net) => {
                let (start, length) = area.validate_arc(net.ring())?;
                Ok(chord_member(net.ring(), net.node(node), start, length))
            }
            Overlay::Can(net) => {
                let b = area.validate_box(net.dims())?;
                Ok(zone_meets_area(net.zone(node), b))
            }
        }
    }

    fn ring(&self) -> RingSpace {
        match self {
            Overlay::Chord(net) => net.ring(),
            Overlay::Can(_) => RingSpace::default(),
        }
    }
}

/// Spans a tree over `area` rooted at `root`.
///
/// A CAN root must own part of the area. A Chord root must be the node
/// storing the arc's first key unless the arc is the whole ring.
pub fn span_tree(
    overlay: Overlay<'_>,
    root: NodeId,
    area: &AreaSpec,
    faults: &FaultModel,
) -> Result<TreeStats> {
    if root.index() >= overlay.len() {
        return Err(Error::contract(format!("root {root} outside network")));
    }
    let blocked = faults.blocked(overlay.len(), root);
    let prop = match overlay {
        Overlay::Chord(net) => span_chord(net, root, area, &blocked)?,
        Overlay::Can(net) => span_can(net, root, area, &blocked)?,
    };
    let hits = (0..overlay.len())
        .map(|i| overlay.meets(NodeId(i as u32), area).map(u32::from))
        .collect::<Result<Vec<u32>>>()?;
    Ok(finish(prop, hits, vec![root]))
}

fn finish(prop: Propagation, area_hits: Vec<u32>, roots: Vec<NodeId>) -> TreeStats {
    let unreached = area_hits
        .iter()
        .zip(&prop.receive_count)
        .enumerate()
        .filter(|(_, (&h, &c))| h > 0 && c == 0)
        .map(|(i, _)| NodeId(i as u32))
        .collect();
    TreeStats {
        receive_count: prop.receive_count,
        depth: prop.depth,
        parent: prop.parent,
        total_messages: prop.total_messages,
        area_hits,
        unreached,
        roots,
    }
}

fn span_chord(
    net: &ChordNetwork,
    root: NodeId,
    area: &AreaSpec,
    blocked: &[bool],
) -> Result<Propagation> {
    let plan = ArcPlan::new(net, area)?;
    let plan = if plan.whole_ring {
        ArcPlan::whole_ring_from(net, root)
    } else if plan.root != root {
        return Err(Error::contract(format!(
            "arc tree must start at {}, the node storing its first key",
            plan.root
        )));
    } else {
        plan
    };
    let ring = net.ring();
    let initial = TreeMessage {
        root,
        root_center: RootAnchor::Ring(net.node(root).id),
        area: area.clone(),
        sub_limit: Some(plan.root_limit),
        hops: 0,
        payload_tag: 0,
    };
    propagate(
        net.len(),
        root,
        initial,
        blocked,
        Forwarding::EveryReceipt,
        |at, msg, out| {
            for (child, limit) in chord_children(ring, net.node(at), msg)? {
                let to = net
                    .index_of(child)
                    .ok_or_else(|| Error::contract(format!("finger {child} is not a node")))?;
                let mut m = msg.clone();
                m.sub_limit = Some(limit);
                m.hops += 1;
                out.push(Delivery {
                    to,
                    from: None,
                    msg: m,
                });
            }
            Ok(())
        },
    )
}

fn span_can(
    net: &CanNetwork,
    root: NodeId,
    area: &AreaSpec,
    blocked: &[bool],
) -> Result<Propagation> {
    let b = area.validate_box(net.dims())?;
    let anchor = zone_anchor(net.zone(root), b)
        .ok_or_else(|| Error::contract(format!("root {root} does not meet the area")))?;
    let initial = TreeMessage {
        root,
        root_center: RootAnchor::Point(anchor),
        area: area.clone(),
        sub_limit: None,
        hops: 0,
        payload_tag: 0,
    };
    propagate(
        net.len(),
        root,
        initial,
        blocked,
        Forwarding::EveryReceipt,
        |at, msg, out| {
            for to in can_children(net, at, msg)? {
                let mut m = msg.clone();
                m.hops += 1;
                out.push(Delivery {
                    to,
                    from: None,
                    msg: m,
                });
            }
            Ok(())
        },
    )
}

/// Spans one tree per `(root, area)` pair and merges the results. The areas
/// must be pairwise disjoint. A node storing parts of several areas is
/// expected once per area it meets.
pub fn span_multi_tree(
    overlay: Overlay<'_>,
    parts: &[(NodeId, AreaSpec)],
    faults: &FaultModel,
) -> Result<TreeStats> {
    let ring = overlay.ring();
    for (i, (_, a)) in parts.iter().enumerate() {
        for (_, b) in &parts[i + 1..] {
            if !a.disjoint(b, ring) {
                return Err(Error::contract("sub-areas overlap"));
            }
        }
    }
    let n = overlay.len();
    let mut merged = TreeStats {
        receive_count: vec![0; n],
        depth: vec![None; n],
        parent: vec![None; n],
        total_messages: 0,
        area_hits: vec![0; n],
        unreached: Vec::new(),
        roots: Vec::new(),
    };
    for (root, area) in parts {
        let s = span_tree(overlay, *root, area, faults)?;
        for i in 0..n {
            merged.receive_count[i] += s.receive_count[i];
            merged.area_hits[i] += s.area_hits[i];
            if let Some(d) = s.depth[i] {
                if merged.depth[i].is_none_or(|m| d < m) {
                    merged.depth[i] = Some(d);
                    merged.parent[i] = s.parent[i];
                }
            }
        }
        merged.total_messages += s.total_messages;
        merged.roots.push(*root);
    }
    merged.unreached = (0..n)
        .filter(|&i| merged.area_hits[i] > 0 && merged.receive_count[i] == 0)
        .map(|i| NodeId(i as u32))
        .collect();
    Ok(merged)
}

/// Whether every parent link of a tree is a single overlay hop: a CAN
/// neighbor or a Chord finger.
pub fn tree_edges_are_overlay_hops(stats: &TreeStats, overlay: Overlay<'_>) -> bool {
    stats
        .parent
        .iter()
        .enumerate()
        .all(|(child, p)| match (p, overlay) {
            (None, _) => true,
            (Some(p), Overlay::Can(net)) => net.node(*p).neighbors.contains(&NodeId(child as u32)),
            (Some(p), Overlay::Chord(net)) => {
                let id = net.nodes()[child].id;
                net.node(*p).fingers.contains(&id)
            }
        })
}

/// What the root learns from the responses flowing back up the tree.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    /// Nodes whose response reached a root.
    pub responders: Vec<NodeId>,
    /// In-area nodes whose response is missing.
    pub gap: Vec<NodeId>,
    /// Share of the area (volume for CAN, keys for Chord) vouched for by
    /// responses.
    pub covered_share: f64,
}

impl CoverageReport {
    pub fn complete(&self) -> bool {
        self.gap.is_empty()
    }

    pub fn gap_fraction(&self) -> f64 {
        let total = self.responders.len() + self.gap.len();
        if total == 0 {
            0.0
        } else {
            self.gap.len() as f64 / total as f64
        }
    }
}

/// Sends a response from every reached node back along the parent links.
/// Malicious nodes neither answer nor relay answers.
pub fn collect_responses(
    stats: &TreeStats,
    overlay: Overlay<'_>,
    area: &AreaSpec,
    faults: &FaultModel,
) -> Result<CoverageReport> {
    let n = stats.node_count();
    let blocked: Vec<bool> = (0..n)
        .map(|i| {
            let v = NodeId(i as u32);
            faults.is_malicious(v) && (faults.root_may_be_malicious || !stats.roots.contains(&v))
        })
        .collect();
    // 0 unknown, 1 delivered, 2 lost
    let mut state: Vec<u8> = stats
        .depth
        .iter()
        .map(|d| if d.is_none() { 2 } else { 0 })
        .collect();
    let mut chain = Vec::new();
    for start in 0..n {
        let mut cur = start;
        while state[cur] == 0 {
            chain.push(cur);
            if blocked[cur] {
                break;
            }
            match stats.parent[cur] {
                Some(p) => cur = p.index(),
                None => break,
            }
        }
        let end = *chain.last().unwrap_or(&cur);
        let verdict = if state[cur] != 0 {
            state[cur]
        } else if blocked[end] {
            2
        } else {
            1
        };
        for &c in &chain {
            state[c] = verdict;
        }
        chain.clear();
    }

    let mut responders = Vec::new();
    let mut gap = Vec::new();
    for (i, (&hits, &st)) in stats.area_hits.iter().zip(&state).enumerate() {
        if hits == 0 {
            continue;
        }
        if st == 1 {
            responders.push(NodeId(i as u32));
        } else {
            gap.push(NodeId(i as u32));
        }
    }
    let covered_share = match overlay {
        Overlay::Can(net) => {
            let b = area.validate_box(net.dims())?;
            let total = b.volume();
            responders
                .iter()
                .map(|&r| intersection_volume(net.zone(r), b))
                .sum::<f64>()
                / total
        }
        Overlay::Chord(net) => {
            let ring = net.ring();
            let (start, length) = area.validate_arc(ring)?;
            let covered: u128 = responders
                .iter()
                .map(|&r| arc_keys_owned(net, r, start, length))
                .sum();
            covered as f64 / length as f64
        }
    };
    Ok(CoverageReport {
        responders,
        gap,
        covered_share,
    })
}

fn interval_overlap(a_lo: u128, a_len: u128, b_lo: u128, b_len: u128) -> u128 {
    // b may wrap; a never does
    let piece = |lo: u128, len: u128| -> u128 {
        let s = lo.max(a_lo);
        let e = (lo + len).min(a_lo + a_len);
        e.saturating_sub(s)
    };
    if b_lo + b_len > UNIT {
        piece(b_lo, UNIT - b_lo) + piece(0, b_lo + b_len - UNIT)
    } else {
        piece(b_lo, b_len)
    }
}

fn intersection_volume(zone: &CanZone, area: &TorusBox) -> f64 {
    (0..zone.dims())
        .map(|i| {
            interval_overlap(
                zone.lo(i) as u128,
                zone.len(i),
                area.lo(i) as u128,
                area.len(i),
            ) as f64
                / UNIT as f64
        })
        .product()
}

fn arc_keys_owned(
    net: &ChordNetwork,
    node: NodeId,
    start: crate::hashspace::RingId,
    length: u128,
) -> u128 {
    let ring = net.ring();
    let own = net.key_share(node);
    // keys (pred, id], i.e. the arc [pred + 1, pred + own + 1)
    let first = ring.add(net.node(node).predecessor, 1);
    let size = ring.size();
    let rel = ring.distance(start, first);
    // overlap of [rel, rel + own) with [0, length) on a ring of `size`
    let direct = (rel + own).min(length).saturating_sub(rel.min(length));
    let wrapped = if rel + own > size {
        (rel + own - size).min(length)
    } else {
        0
    };
    direct + wrapped
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::can::build_can;
    use crate::chord::build_chord;
    use crate::hashspace::{RingId, SimRng};

    #[test]
    fn single_node_trees() {
        let mut rng = SimRng::new(1);
        let can = build_can(1, 3, &mut rng).unwrap();
        let s = span_tree(
            Overlay::Can(&can),
            NodeId(0),
            &AreaSpec::whole_space(3),
            &FaultModel::none(),
        )
        .unwrap();
        assert_eq!(s.total_messages, 1);
        let chord = build_chord(1, &mut rng).unwrap();
        let area = AreaSpec::full_ring(chord.ring());
        let s = span_tree(
            Overlay::Chord(&chord),
            NodeId(0),
            &area,
            &FaultModel::none(),
        )
        .unwrap();
        assert_eq!(s.total_messages, 1);
    }

    #[test]
    fn whole_space_can_and_full_ring_chord() {
        let mut rng = SimRng::new(5);
        let can = build_can(2000, 10, &mut rng).unwrap();
        let s = span_tree(
            Overlay::Can(&can),
            NodeId(17),
            &AreaSpec::whole_space(10),
            &FaultModel::none(),
        )
        .unwrap();
        assert_eq!(s.total_messages, 2000);
        assert!(s.is_exactly_once());
        assert!(s.parents_form_forest());
        assert!(tree_edges_are_overlay_hops(&s, Overlay::Can(&can)));

        let chord = build_chord(2000, &mut rng).unwrap();
        let area = AreaSpec::full_ring(chord.ring());
        let s = span_tree(
            Overlay::Chord(&chord),
            NodeId(3),
            &area,
            &FaultModel::none(),
        )
        .unwrap();
        assert_eq!(s.total_messages, 2000);
        assert!(s.is_exactly_once());
        assert!(s.max_depth() <= 12);
        assert!(tree_edges_are_overlay_hops(&s, Overlay::Chord(&chord)));
    }

    #[test]
    fn root_outside_area_is_rejected() {
        let mut rng = SimRng::new(9);
        let can = build_can(64, 2, &mut rng).unwrap();
        let area = AreaSpec::CanBox(TorusBox::from_f64s(&[0.0, 0.0], &[0.1, 0.1]).unwrap());
        let outside = (0..64)
            .map(|i| NodeId(i as u32))
            .find(|&r| !Overlay::Can(&can).meets(r, &area).unwrap())
            .unwrap();
        assert!(span_tree(Overlay::Can(&can), outside, &area, &FaultModel::none()).is_err());

        let chord = build_chord(64, &mut rng).unwrap();
        let area = AreaSpec::Arc {
            start: RingId(0),
            length: 1 << 60,
        };
        let plan = ArcPlan::new(&chord, &area).unwrap();
        let other = NodeId((plan.root.0 + 1) % 64);
        assert!(span_tree(Overlay::Chord(&chord), other, &area, &FaultModel::none()).is_err());
    }

    #[test]
    fn quadrants_merge_to_exactly_once() {
        for seed in 0..5 {
            let mut rng = SimRng::new(seed);
            let can = build_can(256, 2, &mut rng).unwrap();
            let mut parts = Vec::new();
            for (x, y) in [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)] {
                let area = AreaSpec::CanBox(TorusBox::from_f64s(&[x, y], &[0.5, 0.5]).unwrap());
                let root = (0..256)
                    .map(|i| NodeId(i as u32))
                    .find(|&r| Overlay::Can(&can).meets(r, &area).unwrap())
                    .unwrap();
                parts.push((root, area));
            }
            let s = span_multi_tree(Overlay::Can(&can), &parts, &FaultModel::none()).unwrap();
            assert!(s.receive_count.iter().all(|&c| c == 1));
            assert!(s.is_exactly_once());

            let single =
                span_multi_tree(Overlay::Can(&can), &parts[..1], &FaultModel::none()).unwrap();
            let direct = span_tree(
                Overlay::Can(&can),
                parts[0].0,
                &parts[0].1,
                &FaultModel::none(),
            )
            .unwrap();
            assert_eq!(single, direct);
        }
    }

    #[test]
    fn overlapping_parts_are_rejected() {
        let can = build_can(16, 2, &mut SimRng::new(0)).unwrap();
        let a = AreaSpec::CanBox(TorusBox::from_f64s(&[0.0, 0.0], &[0.5, 0.5]).unwrap());
        let b = AreaSpec::CanBox(TorusBox::from_f64s(&[0.25, 0.25], &[0.5, 0.5]).unwrap());
        let r = can
            .owner(&crate::hashspace::TorusPoint::from_f64s(&[0.3, 0.3]))
            .unwrap();
        assert!(
            span_multi_tree(Overlay::Can(&can), &[(r, a), (r, b)], &FaultModel::none()).is_err()
        );
    }

    fn subtree(stats: &TreeStats, top: NodeId) -> Vec<NodeId> {
        (0..stats.node_count())
            .map(|i| NodeId(i as u32))
            .filter(|&v| {
                let mut cur = Some(v);
                while let Some(c) = cur {
                    if c == top {
                        return true;
                    }
                    cur = stats.parent[c.index()];
                }
                false
            })
            .collect()
    }

    #[test]
    fn malicious_interior_node_hides_its_subtree() {
        let mut rng = SimRng::new(21);
        let can = build_can(500, 3, &mut rng).unwrap();
        let area = AreaSpec::whole_space(3);
        let root = NodeId(0);
        let clean = span_tree(Overlay::Can(&can), root, &area, &FaultModel::none()).unwrap();
        let report =
            collect_responses(&clean, Overlay::Can(&can), &area, &FaultModel::none()).unwrap();
        assert!(report.complete());
        assert!((report.covered_share - 1.0).abs() < 1e-12);

        // the interior node with the largest subtree
        let (bad, mut expected) = (1..500)
            .map(|i| NodeId(i as u32))
            .map(|v| (v, subtree(&clean, v)))
            .max_by_key(|(_, s)| s.len())
            .unwrap();
        assert!(expected.len() > 1);
        let faults = FaultModel::with_malicious([bad]);
        let hurt = span_tree(Overlay::Can(&can), root, &area, &faults).unwrap();
        let report = collect_responses(&hurt, Overlay::Can(&can), &area, &faults).unwrap();
        expected.sort();
        assert_eq!(report.gap, expected);
        let mut unreached = hurt.unreached.clone();
        unreached.push(bad);
        unreached.sort();
        assert_eq!(unreached, expected);
    }

    #[test]
    fn chord_coverage_counts_keys() {
        let mut rng = SimRng::new(4);
        let chord = build_chord(300, &mut rng).unwrap();
        let area = AreaSpec::Arc {
            start: RingId(1 << 62),
            length: 1 << 62,
        };
        let plan = ArcPlan::new(&chord, &area).unwrap();
        let s = span_tree(
            Overlay::Chord(&chord),
            plan.root,
            &area,
            &FaultModel::none(),
        )
        .unwrap();
        assert!(s.is_exactly_once());
        let report =
            collect_responses(&s, Overlay::Chord(&chord), &area, &FaultModel::none()).unwrap();
        assert!(report.complete());
        assert!((report.covered_share - 1.0).abs() < 1e-12);
    }
}
