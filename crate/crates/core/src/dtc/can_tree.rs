//! Tree construction on a CAN.
//!
//! Every zone `Z` meeting the area gets an anchor: the midpoint of `Z`
//! clipped to the area (the zone center when the area is the whole space).
//! The straight segment from the root's anchor to `Z`'s anchor enters `Z`'s
//! closed box at a point `E`. The axes along which `E` sits on `Z`'s boundary
//! are the axes the segment crosses to get in. With a single such axis, the
//! parent of `Z` is the neighbor whose part of that face contains `E`
//! (half-open ownership along the face). With several, the segment hits a
//! lower-dimensional corner and the tie breaker applies: the crossings are
//! replayed one axis at a time in ascending axis order, and the zone holding
//! the point just before the final crossing becomes the parent.
//!
//! Both rules reduce to one question a node can answer from its own zone and
//! its neighbors' zones: does my zone own the biased point just outside `Z`
//! that the rule designates? All arithmetic is exact on the `2^-64` grid.

use crate::can::{Bias, BiasedCoord, CanNetwork, CanZone};
use crate::error::{Error, Result};
use crate::hashspace::{axis_displacement, TorusBox, TorusPoint, UNIT};
use crate::NodeId;

use super::{RootAnchor, TreeMessage};

/// Midpoint of `zone ∩ area` along one axis, or `None` if they miss.
///
/// When the area interval wraps and the zone interval straddles the gap, the
/// intersection has two pieces; the one starting lower in area-local
/// coordinates is used.
fn axis_anchor(zone: &CanZone, area: &TorusBox, axis: usize) -> Option<u64> {
    let zlo = zone.lo(axis) as u128;
    let zlen = zone.len(axis);
    let e = area.len(axis);
    if e == UNIT {
        return Some(zone.center_coord(axis));
    }
    let a = area.lo(axis) as u128;
    let s = (zlo + UNIT - a) % UNIT;
    // the part of the zone that wraps past the area origin
    let (lo, hi) = if s + zlen > UNIT {
        (0, (s + zlen - UNIT).min(e))
    } else {
        (s, s)
    };
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else if s < e {
        (s, (s + zlen).min(e))
    } else {
        return None;
    };
    let local = lo + (hi - lo) / 2;
    Some(((a + local) % UNIT) as u64)
}

/// Anchor of `zone` for a tree over `area`; `None` when the zone misses it.
pub fn zone_anchor(zone: &CanZone, area: &TorusBox) -> Option<TorusPoint> {
    let mut coords = Vec::with_capacity(zone.dims());
    for axis in 0..zone.dims() {
        coords.push(axis_anchor(zone, area, axis)?);
    }
    Some(TorusPoint::new(coords))
}

pub fn zone_meets_area(zone: &CanZone, area: &TorusBox) -> bool {
    (0..zone.dims()).all(|axis| axis_anchor(zone, area, axis).is_some())
}

/// Displacement from the root anchor to `to` along one axis: the shortest
/// torus path when the area spans the axis, otherwise the straight path
/// inside the area so the segment never leaves it.
fn axis_delta(area: &TorusBox, axis: usize, from: u64, to: u64) -> i128 {
    if area.len(axis) == UNIT {
        axis_displacement(from, to)
    } else {
        let a = area.lo(axis);
        to.wrapping_sub(a) as i128 - from.wrapping_sub(a) as i128
    }
}

/// Where the segment from the root anchor enters a zone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    /// Entry point; coordinates strictly between grid points carry `Plus`.
    pub point: Vec<BiasedCoord>,
    /// Axes along which the entry point lies on the zone boundary, ascending.
    pub crossing_axes: Vec<usize>,
    /// Sign of the segment direction per axis (`-1`, `0`, `1`).
    pub direction: Vec<i8>,
}

impl Entry {
    /// Whether the segment meets the zone only in a corner of dimension
    /// below `d - 1`, which is when the tie breaker decides parenthood.
    pub fn needs_tie_breaker(&self) -> bool {
        self.crossing_axes.len() > 1
    }

    /// The biased point whose owner adds the zone as a child.
    pub fn parent_point(&self, zone: &CanZone) -> Vec<BiasedCoord> {
        let inside = self.crossing_axes.len() - 1;
        self.path_point(zone, inside)
    }

    /// Point reached after moving across the first `inside` crossing axes.
    fn path_point(&self, zone: &CanZone, inside: usize) -> Vec<BiasedCoord> {
        let mut p = self.point.clone();
        for (i, &axis) in self.crossing_axes.iter().enumerate() {
            let entering_low = self.direction[axis] > 0;
            let (value, bias) = match (entering_low, i < inside) {
                (true, true) => (zone.lo(axis) as u128, Bias::Plus),
                (true, false) => (zone.lo(axis) as u128, Bias::Minus),
                (false, true) => (zone.hi(axis), Bias::Minus),
                (false, false) => (zone.hi(axis), Bias::Plus),
            };
            p[axis] = BiasedCoord::new(value, bias);
        }
        p
    }
}

/// Entry of the segment from `root_anchor` to the anchor of `zone`.
/// `None` when the zone misses the area or the segment is degenerate (the
/// zone holds the root anchor).
pub fn entry_point(root_anchor: &TorusPoint, area: &TorusBox, zone: &CanZone) -> Option<Entry> {
    let dims = zone.dims();
    let anchor = zone_anchor(zone, area)?;
    let mut delta = Vec::with_capacity(dims);
    for axis in 0..dims {
        delta.push(axis_delta(area, axis, root_anchor[axis], anchor[axis]));
    }

    // Walk backwards from the anchor; the exit parameter along an axis is
    // dist / |delta|, and the smallest one is where the segment enters.
    let mut best: Option<(u128, u128)> = None;
    let mut crossing_axes = Vec::new();
    for axis in 0..dims {
        let d = delta[axis];
        // a zone spanning the whole axis has no border to cross on it
        if d == 0 || zone.len(axis) == UNIT {
            continue;
        }
        let offset = (anchor[axis] - zone.lo(axis)) as u128;
        let dist = if d > 0 {
            offset
        } else {
            zone.len(axis) - offset
        };
        let den = d.unsigned_abs();
        match best {
            None => {
                best = Some((dist, den));
                crossing_axes.push(axis);
            }
            Some((bn, bd)) => match (dist * bd).cmp(&(bn * den)) {
                std::cmp::Ordering::Less => {
                    best = Some((dist, den));
                    crossing_axes.clear();
                    crossing_axes.push(axis);
                }
                std::cmp::Ordering::Equal => crossing_axes.push(axis),
                std::cmp::Ordering::Greater => {}
            },
        }
    }
    let (num, den) = best?;

    let mut point = Vec::with_capacity(dims);
    let mut direction = Vec::with_capacity(dims);
    for axis in 0..dims {
        let d = delta[axis];
        direction.push(d.signum() as i8);
        let a = anchor[axis] as i128;
        let c = if crossing_axes.contains(&axis) {
            if d > 0 {
                BiasedCoord::new(zone.lo(axis) as u128, Bias::Exact)
            } else {
                BiasedCoord::new(zone.hi(axis), Bias::Exact)
            }
        } else if d == 0 {
            BiasedCoord::exact(anchor[axis])
        } else {
            // E = anchor - (num / den) * d
            let q = num * d.unsigned_abs();
            let (whole, rem) = ((q / den) as i128, q % den);
            let (value, bias) = if d > 0 {
                if rem == 0 {
                    (a - whole, Bias::Exact)
                } else {
                    (a - whole - 1, Bias::Plus)
                }
            } else if rem == 0 {
                (a + whole, Bias::Exact)
            } else {
                (a + whole, Bias::Plus)
            };
            BiasedCoord::new(value.rem_euclid(UNIT as i128) as u128, bias)
        };
        point.push(c);
    }
    Some(Entry {
        point,
        crossing_axes,
        direction,
    })
}

/// A node's role on a tie-breaker path toward some zone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieDuty {
    /// The node holds an intermediate point of the path; it already has the
    /// query through its own parent and sends nothing for this target.
    OnPath { step: usize },
    /// The node holds the last point before the target and adds it as a child.
    Forward,
}

/// Tie-breaker path toward `target_zone` and the part `local` plays in it.
///
/// Returns `None` when the segment enters the target through the interior of
/// a face (no tie breaker) or `local` is not on the path. Path step `i` is the
/// point outside the target after the `i` lowest crossing axes have been
/// crossed; the path has one step per differing axis.
pub fn tie_break_path(
    root_anchor: &TorusPoint,
    area: &TorusBox,
    target_zone: &CanZone,
    local: &CanZone,
) -> Option<TieDuty> {
    let entry = entry_point(root_anchor, area, target_zone)?;
    if !entry.needs_tie_breaker() {
        return None;
    }
    let steps = entry.crossing_axes.len();
    for step in (0..steps).rev() {
        if local.contains_biased(&entry.path_point(target_zone, step)) {
            return Some(if step == steps - 1 {
                TieDuty::Forward
            } else {
                TieDuty::OnPath { step }
            });
        }
    }
    None
}

/// All points of the tie-breaker path toward a zone, first to last.
pub fn tie_break_points(
    root_anchor: &TorusPoint,
    area: &TorusBox,
    target_zone: &CanZone,
) -> Vec<Vec<BiasedCoord>> {
    match entry_point(root_anchor, area, target_zone) {
        Some(e) if e.needs_tie_breaker() => (0..e.crossing_axes.len())
            .map(|i| e.path_point(target_zone, i))
            .collect(),
        _ => Vec::new(),
    }
}

/// Whether `local` adds `target` as a child: the normal face rule and the
/// tie breaker in one test.
pub fn adds_child(
    root_anchor: &TorusPoint,
    area: &TorusBox,
    local: &CanZone,
    target: &CanZone,
) -> bool {
    match entry_point(root_anchor, area, target) {
        Some(e) => local.contains_biased(&e.parent_point(target)),
        None => false,
    }
}

/// Children of `node` for a CAN tree message. Reads only the node's own zone
/// and the zones of its neighbors.
pub fn can_children(net: &CanNetwork, node: NodeId, msg: &TreeMessage) -> Result<Vec<NodeId>> {
    let area = msg.area.validate_box(net.dims())?;
    let RootAnchor::Point(root_anchor) = &msg.root_center else {
        return Err(Error::contract("CAN message needs a point anchor"));
    };
    let local = net.zone(node);
    Ok(net
        .node(node)
        .neighbors
        .iter()
        .copied()
        .filter(|&nb| nb != msg.root && adds_child(root_anchor, area, local, net.zone(nb)))
        .collect())
}
