//! Simulated d-dimensional CAN built by iterated zone halving.
//!
//! Every zone is a dyadic box: along each axis its interval is
//! `[k * 2^-l, (k + 1) * 2^-l)` for some level `l`. Two such intervals are
//! either nested or disjoint, which keeps every adjacency and ownership
//! question an exact integer comparison. Zones never wrap; only adjacency
//! and displacement are torus-aware.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashspace::{axis_displacement, SimRng, TorusBox, TorusPoint, UNIT};
use crate::NodeId;

/// Deepest split level of one axis. Keeping at least two units of extent
/// makes every zone center exactly representable.
pub const MAX_LEVEL: u8 = 63;

/// Dyadic box owned by one CAN node.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanZone {
    lo: Vec<u64>,
    level: Vec<u8>,
}

impl CanZone {
    pub fn whole(dims: usize) -> Self {
        CanZone {
            lo: vec![0; dims],
            level: vec![0; dims],
        }
    }

    /// Zone from per-axis `(lo, level)` pairs; `lo` must be aligned to the level.
    pub fn from_parts(lo: Vec<u64>, level: Vec<u8>) -> Result<Self> {
        if lo.len() != level.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: level.len(),
            });
        }
        for (&l, &lv) in lo.iter().zip(&level) {
            if lv > MAX_LEVEL || !(l as u128).is_multiple_of(UNIT >> lv) {
                return Err(Error::contract(format!(
                    "zone origin {l:#x} not aligned to level {lv}"
                )));
            }
        }
        Ok(CanZone { lo, level })
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self, axis: usize) -> u64 {
        self.lo[axis]
    }

    pub fn level(&self, axis: usize) -> u8 {
        self.level[axis]
    }

    pub fn len(&self, axis: usize) -> u128 {
        UNIT >> self.level[axis]
    }

    /// Upper bound of the axis interval as a numerator in `(0, 2^64]`.
    pub fn hi(&self, axis: usize) -> u128 {
        self.lo[axis] as u128 + self.len(axis)
    }

    pub fn center_coord(&self, axis: usize) -> u64 {
        (self.lo[axis] as u128 + self.len(axis) / 2) as u64
    }

    pub fn center(&self) -> TorusPoint {
        TorusPoint::new((0..self.dims()).map(|i| self.center_coord(i)).collect())
    }

    /// Number of halvings that produced this zone; volume is `2^-depth`.
    pub fn depth(&self) -> u32 {
        self.level.iter().map(|&l| l as u32).sum()
    }

    pub fn as_box(&self) -> TorusBox {
        TorusBox::new(
            TorusPoint::new(self.lo.clone()),
            (0..self.dims()).map(|i| self.len(i)).collect(),
        )
        .expect("dyadic zone is a valid box")
    }

    pub fn axis_contains(&self, axis: usize, c: u64) -> bool {
        let c = c as u128;
        self.lo[axis] as u128 <= c && c < self.hi(axis)
    }

    pub fn contains(&self, p: &TorusPoint) -> bool {
        p.dims() == self.dims() && (0..self.dims()).all(|i| self.axis_contains(i, p[i]))
    }

    /// Ownership of a point given with per-axis infinitesimal offsets.
    pub fn contains_biased(&self, p: &[BiasedCoord]) -> bool {
        p.len() == self.dims()
            && p.iter()
                .enumerate()
                .all(|(i, c)| c.within(self.lo[i] as u128, self.hi(i)))
    }

    /// Lowest-index axis among the longest ones; the next split axis.
    pub fn split_axis(&self) -> usize {
        let min = *self.level.iter().min().expect("zone has at least one axis");
        self.level.iter().position(|&l| l == min).unwrap()
    }

    /// Halves the zone along `axis`, returning `(lower, upper)`.
    pub fn split(&self, axis: usize) -> Result<(CanZone, CanZone)> {
        if self.level[axis] >= MAX_LEVEL {
            return Err(Error::contract("zone too small to split"));
        }
        let mut lower = self.clone();
        lower.level[axis] += 1;
        let mut upper = lower.clone();
        upper.lo[axis] = (self.lo[axis] as u128 + lower.len(axis)) as u64;
        Ok((lower, upper))
    }

    fn axes_overlap(&self, other: &CanZone, axis: usize) -> bool {
        (self.lo[axis] as u128) < other.hi(axis) && (other.lo[axis] as u128) < self.hi(axis)
    }
}

/// Coordinate with an infinitesimal offset: `Plus` means `c + ε`, `Minus`
/// means `c - ε`. Under half-open `[lo, hi)` ownership `Exact` and `Plus`
/// agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bias {
    Minus,
    Exact,
    Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BiasedCoord {
    /// Numerator in `[0, 2^64]`; normalized so that `Minus` never sits at 0
    /// and `Exact`/`Plus` never sit at `2^64`.
    value: u128,
    bias: Bias,
}

impl BiasedCoord {
    pub fn new(value: u128, bias: Bias) -> Self {
        let value = value % UNIT;
        let value = if bias == Bias::Minus && value == 0 {
            UNIT
        } else {
            value
        };
        BiasedCoord { value, bias }
    }

    pub fn exact(value: u64) -> Self {
        BiasedCoord::new(value as u128, Bias::Exact)
    }

    pub fn value(&self) -> u128 {
        self.value
    }

    pub fn bias(&self) -> Bias {
        self.bias
    }

    /// Membership in the non-wrapping interval `[lo, hi)`.
    pub fn within(&self, lo: u128, hi: u128) -> bool {
        match self.bias {
            Bias::Exact | Bias::Plus => lo <= self.value && self.value < hi,
            Bias::Minus => lo < self.value && self.value <= hi,
        }
    }
}

/// Which boundary of the first zone a face lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

/// Half-open interval `[lo, lo + len)` of one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub lo: u64,
    pub len: u128,
}

/// A (d-1)-dimensional surface shared by two zones.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaceDescriptor {
    /// Axis normal to the face.
    pub dim: usize,
    /// Position of the face along `dim`.
    pub coordinate: u64,
    /// Boundary of the first zone the face lies on.
    pub side: Side,
    /// Per-axis overlap of the two zones; the entry for `dim` has `len == 0`.
    pub overlap: Vec<Interval>,
}

/// All faces shared by `a` and `b` under torus adjacency.
///
/// Two zones can abut on both sides of the same axis when their extents along
/// it add up to the whole unit, so up to two faces are returned.
pub fn shared_faces(a: &CanZone, b: &CanZone) -> Vec<FaceDescriptor> {
    if a.dims() != b.dims() {
        return Vec::new();
    }
    let dims = a.dims();
    let mut normal = None;
    for axis in 0..dims {
        if !a.axes_overlap(b, axis) {
            if normal.is_some() {
                return Vec::new();
            }
            normal = Some(axis);
        }
    }
    let Some(axis) = normal else {
        return Vec::new();
    };
    let overlap = |coordinate: u64| -> Vec<Interval> {
        (0..dims)
            .map(|i| {
                if i == axis {
                    Interval {
                        lo: coordinate,
                        len: 0,
                    }
                } else {
                    let lo = a.lo[i].max(b.lo[i]);
                    let hi = a.hi(i).min(b.hi(i));
                    Interval {
                        lo,
                        len: hi - lo as u128,
                    }
                }
            })
            .collect()
    };
    let mut faces = Vec::with_capacity(2);
    let a_hi = (a.hi(axis) % UNIT) as u64;
    let b_hi = (b.hi(axis) % UNIT) as u64;
    if a_hi == b.lo[axis] {
        faces.push(FaceDescriptor {
            dim: axis,
            coordinate: a_hi,
            side: Side::Upper,
            overlap: overlap(a_hi),
        });
    }
    if b_hi == a.lo[axis] {
        faces.push(FaceDescriptor {
            dim: axis,
            coordinate: a.lo[axis],
            side: Side::Lower,
            overlap: overlap(a.lo[axis]),
        });
    }
    faces
}

/// The face shared by `a` and `b`, preferring `a`'s upper boundary when the
/// zones abut on both sides.
pub fn shared_face(a: &CanZone, b: &CanZone) -> Option<FaceDescriptor> {
    shared_faces(a, b).into_iter().next()
}

pub fn adjacent(a: &CanZone, b: &CanZone) -> bool {
    !shared_faces(a, b).is_empty()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanNode {
    pub id: NodeId,
    pub zone: CanZone,
    /// Face-adjacent nodes, sorted by id.
    pub neighbors: Vec<NodeId>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
enum KdNode {
    Leaf(NodeId),
    Split {
        axis: u8,
        mid: u64,
        lower: u32,
        upper: u32,
    },
}

/// A stable CAN: the zone partition, neighbor sets and a split tree for
/// point location.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CanNetwork {
    dims: usize,
    nodes: Vec<CanNode>,
    kd: Vec<KdNode>,
    /// Index into `kd` of each node's leaf.
    leaf_of: Vec<u32>,
}

impl CanNetwork {
    /// A single node owning the whole space.
    pub fn new(dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::contract("CAN needs at least one dimension"));
        }
        Ok(CanNetwork {
            dims,
            nodes: vec![CanNode {
                id: NodeId(0),
                zone: CanZone::whole(dims),
                neighbors: Vec::new(),
            }],
            kd: vec![KdNode::Leaf(NodeId(0))],
            leaf_of: vec![0],
        })
    }

    /// Network grown by joining one node at each of `points`, in order.
    pub fn with_join_points(dims: usize, points: &[TorusPoint]) -> Result<Self> {
        let mut net = CanNetwork::new(dims)?;
        for p in points {
            net.join(p)?;
        }
        Ok(net)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[CanNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &CanNode {
        &self.nodes[id.index()]
    }

    pub fn zone(&self, id: NodeId) -> &CanZone {
        &self.nodes[id.index()].zone
    }

    /// Node whose zone contains `p`.
    pub fn owner(&self, p: &TorusPoint) -> Result<NodeId> {
        if p.dims() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                found: p.dims(),
            });
        }
        let coords: Vec<BiasedCoord> = p.coords().iter().map(|&c| BiasedCoord::exact(c)).collect();
        Ok(self.owner_biased(&coords))
    }

    /// Node owning a point given with infinitesimal per-axis offsets.
    pub fn owner_biased(&self, p: &[BiasedCoord]) -> NodeId {
        let mut at = 0usize;
        loop {
            match self.kd[at] {
                KdNode::Leaf(id) => return id,
                KdNode::Split {
                    axis,
                    mid,
                    lower,
                    upper,
                } => {
                    let c = p[axis as usize];
                    let below = match c.bias {
                        Bias::Exact | Bias::Plus => c.value < mid as u128,
                        Bias::Minus => c.value <= mid as u128,
                    };
                    at = if below { lower } else { upper } as usize;
                }
            }
        }
    }

    /// Joins a node at `p`: the owning zone halves along its split axis and
    /// the newcomer takes the half containing `p`.
    pub fn join(&mut self, p: &TorusPoint) -> Result<NodeId> {
        let old = self.owner(p)?;
        let zone = self.zone(old).clone();
        let axis = zone.split_axis();
        let (lower, upper) = zone.split(axis)?;
        let new_id = NodeId(self.nodes.len() as u32);
        let (kept, given) = if upper.axis_contains(axis, p[axis]) {
            (lower, upper)
        } else {
            (upper, lower)
        };

        // split tree: the old leaf becomes an internal node
        let leaf = self.leaf_of[old.index()] as usize;
        let lower_idx = self.kd.len() as u32;
        let upper_idx = lower_idx + 1;
        let new_is_upper = given.lo(axis) > kept.lo(axis);
        let (lower_owner, upper_owner) = if new_is_upper {
            (old, new_id)
        } else {
            (new_id, old)
        };
        self.kd.push(KdNode::Leaf(lower_owner));
        self.kd.push(KdNode::Leaf(upper_owner));
        self.kd[leaf] = KdNode::Split {
            axis: axis as u8,
            mid: (zone.lo(axis) as u128 + (zone.len(axis) / 2)) as u64,
            lower: lower_idx,
            upper: upper_idx,
        };
        self.leaf_of[old.index()] = if new_is_upper { lower_idx } else { upper_idx };
        self.leaf_of
            .push(if new_is_upper { upper_idx } else { lower_idx });

        // neighbor maintenance: only the old neighbors and the two halves
        // can be affected
        let candidates = std::mem::take(&mut self.nodes[old.index()].neighbors);
        let mut kept_nbrs = Vec::with_capacity(candidates.len() + 1);
        let mut given_nbrs = Vec::with_capacity(candidates.len() + 1);
        for &x in &candidates {
            let xz = &self.nodes[x.index()].zone;
            let with_kept = adjacent(&kept, xz);
            let with_given = adjacent(&given, xz);
            let xn = &mut self.nodes[x.index()].neighbors;
            if !with_kept {
                if let Ok(pos) = xn.binary_search(&old) {
                    xn.remove(pos);
                }
            }
            if with_given {
                insert_sorted(xn, new_id);
                given_nbrs.push(x);
            }
            if with_kept {
                kept_nbrs.push(x);
            }
        }
        insert_sorted(&mut kept_nbrs, new_id);
        insert_sorted(&mut given_nbrs, old);
        self.nodes[old.index()].zone = kept;
        self.nodes[old.index()].neighbors = kept_nbrs;
        self.nodes.push(CanNode {
            id: new_id,
            zone: given,
            neighbors: given_nbrs,
        });
        Ok(new_id)
    }

    /// Exact check that the zones tile the unit torus: the volumes
    /// `2^-depth` sum to one. Interior disjointness follows from the split
    /// tree.
    pub fn volumes_sum_to_one(&self) -> bool {
        let mut counts: std::collections::BTreeMap<u32, u64> = Default::default();
        for n in &self.nodes {
            *counts.entry(n.zone.depth()).or_default() += 1;
        }
        // carry pairs of 2^-e into 2^-(e-1), deepest first
        let mut carry = 0u64;
        let deepest = counts.keys().next_back().copied().unwrap_or(0);
        for e in (1..=deepest).rev() {
            let total = counts.get(&e).copied().unwrap_or(0) + carry;
            if !total.is_multiple_of(2) {
                return false;
            }
            carry = total / 2;
        }
        counts.get(&0).copied().unwrap_or(0) + carry == 1
    }

    /// Greedy routing toward `to`: each hop goes to the neighbor whose zone
    /// lies closest to the target (torus metric), ties broken by zone
    /// center distance. Zone distance strictly decreases along the path.
    pub fn greedy_route(&self, from: NodeId, to: &TorusPoint) -> Result<Vec<NodeId>> {
        if to.dims() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                found: to.dims(),
            });
        }
        let mut path = vec![from];
        let mut cur = from;
        let mut seen = std::collections::HashSet::new();
        seen.insert(cur);
        while !self.zone(cur).contains(to) {
            let next = self
                .node(cur)
                .neighbors
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let (za, zb) = (self.zone(a), self.zone(b));
                    zone_distance_sq(za, to)
                        .total_cmp(&zone_distance_sq(zb, to))
                        .then(center_distance_sq(za, to).total_cmp(&center_distance_sq(zb, to)))
                        .then(a.cmp(&b))
                })
                .ok_or(Error::RoutingLoop { hops: path.len() })?;
            if !seen.insert(next) {
                return Err(Error::RoutingLoop { hops: path.len() });
            }
            path.push(next);
            cur = next;
        }
        Ok(path)
    }
}

fn zone_distance_sq(zone: &CanZone, to: &TorusPoint) -> f64 {
    (0..zone.dims())
        .map(|i| {
            if zone.axis_contains(i, to[i]) {
                return 0.0;
            }
            let t = to[i] as u128;
            let up = (zone.lo(i) as u128 + UNIT - t) % UNIT;
            let down = (t + UNIT - zone.hi(i) % UNIT) % UNIT;
            let d = up.min(down) as f64 / UNIT as f64;
            d * d
        })
        .sum()
}

fn center_distance_sq(zone: &CanZone, to: &TorusPoint) -> f64 {
    (0..zone.dims())
        .map(|i| {
            let d = axis_displacement(zone.center_coord(i), to[i]) as f64 / UNIT as f64;
            d * d
        })
        .sum()
}

fn insert_sorted(v: &mut Vec<NodeId>, id: NodeId) {
    if let Err(pos) = v.binary_search(&id) {
        v.insert(pos, id);
    }
}

/// Builds an `n`-node CAN in `d` dimensions by joining nodes at uniformly
/// random points.
pub fn build_can(n: usize, d: usize, rng: &mut SimRng) -> Result<CanNetwork> {
    if n == 0 {
        return Err(Error::contract("a CAN needs at least one node"));
    }
    let mut net = CanNetwork::new(d)?;
    for _ in 1..n {
        let p = rng.point(d);
        net.join(&p)?;
    }
    Ok(net)
}

/// Join points producing the regular grid with `2^levels` cells: each round
/// joins at the center of every current zone in id order.
pub fn grid_join_points(dims: usize, levels: u32) -> Result<Vec<TorusPoint>> {
    let mut net = CanNetwork::new(dims)?;
    let mut points = Vec::new();
    for _ in 0..levels {
        let centers: Vec<TorusPoint> = net.nodes().iter().map(|n| n.zone.center()).collect();
        for c in centers {
            net.join(&c)?;
            points.push(c);
        }
    }
    Ok(points)
}
