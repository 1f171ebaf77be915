//! Repeated, seeded runs of one dissemination scheme and their averages.

pub mod kernel;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{alm_broadcast_ordered, simple_flood, AxisOrder};
use crate::can::build_can;
use crate::chord::build_chord;
use crate::dtc::{collect_responses, span_multi_tree, AreaSpec, FaultModel, Overlay, TreeStats};
use crate::error::{Error, Result};
use crate::hashspace::{
    extent_from_f64, frac_from_f64, RingId, RingSpace, SimRng, TorusBox, TorusPoint,
};
use crate::{CanNetwork, ChordNetwork, NodeId};

/// Receive-count bins: 0-1, 2-3, ..., 12-13, 14 and more.
pub const RECEIVE_BINS: usize = 8;

pub fn receive_bin_label(bin: usize) -> String {
    if bin + 1 == RECEIVE_BINS {
        format!(">={}", 2 * bin)
    } else {
        format!("{}-{}", 2 * bin, 2 * bin + 1)
    }
}

fn receive_bin(count: u32) -> usize {
    (count as usize / 2).min(RECEIVE_BINS - 1)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlayKind {
    Chord,
    #[default]
    Can,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[default]
    Dtc,
    Alm,
    Flood,
}

/// Search area in fractions of the key space.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AreaConfig {
    /// Every node.
    #[default]
    Full,
    /// `[origin, origin + extent)` per axis of a CAN.
    Box { origin: Vec<f64>, extent: Vec<f64> },
    /// `[start, start + length)` of a Chord ring.
    Arc { start: f64, length: f64 },
}

impl AreaConfig {
    pub fn resolve(&self, overlay: OverlayKind, dims: usize) -> Result<AreaSpec> {
        match (self, overlay) {
            (AreaConfig::Full, OverlayKind::Can) => Ok(AreaSpec::whole_space(dims)),
            (AreaConfig::Full, OverlayKind::Chord) => Ok(AreaSpec::full_ring(RingSpace::default())),
            (AreaConfig::Box { origin, extent }, OverlayKind::Can) => {
                if origin.len() != dims || extent.len() != dims {
                    return Err(Error::config(format!(
                        "area box needs {dims} coordinates per corner"
                    )));
                }
                Ok(AreaSpec::CanBox(TorusBox::from_f64s(origin, extent)?))
            }
            (AreaConfig::Arc { start, length }, OverlayKind::Chord) => {
                if !(0.0..1.0).contains(start) || !(*length > 0.0 && *length <= 1.0) {
                    return Err(Error::config(
                        "arc start must lie in [0, 1) and length in (0, 1]",
                    ));
                }
                Ok(AreaSpec::Arc {
                    start: RingId(frac_from_f64(*start)),
                    length: extent_from_f64(*length).max(1),
                })
            }
            (AreaConfig::Box { .. }, OverlayKind::Chord) => {
                Err(Error::config("a Chord area must be an arc"))
            }
            (AreaConfig::Arc { .. }, OverlayKind::Can) => {
                Err(Error::config("a CAN area must be a box"))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub overlay: OverlayKind,
    pub n: usize,
    /// CAN dimensions; ignored for Chord.
    pub d: usize,
    pub seed: u64,
    pub repetitions: usize,
    pub malicious_fraction: f64,
    pub algorithm: Algorithm,
    pub area: AreaConfig,
    /// Trees the area is split into, each with its own root.
    pub split_roots: usize,
    pub alm_axis_order: AxisOrder,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            overlay: OverlayKind::Can,
            n: 2000,
            d: 10,
            seed: 1,
            repetitions: 30,
            malicious_fraction: 0.0,
            algorithm: Algorithm::Dtc,
            area: AreaConfig::Full,
            split_roots: 1,
            alm_axis_order: AxisOrder::SplitOrder,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        if self.overlay == OverlayKind::Can && self.d == 0 {
            return Err(Error::config("d must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.malicious_fraction) {
            return Err(Error::config("malicious_fraction must lie in [0, 1)"));
        }
        if self.split_roots == 0 {
            return Err(Error::config("split_roots must be at least 1"));
        }
        if self.algorithm == Algorithm::Alm && self.overlay == OverlayKind::Chord {
            return Err(Error::config("ALM runs on CAN only"));
        }
        if self.algorithm != Algorithm::Dtc
            && (self.area != AreaConfig::Full || self.split_roots > 1)
        {
            return Err(Error::config(
                "ALM and flooding cover the whole network with one root",
            ));
        }
        self.area.resolve(self.overlay, self.d)?;
        Ok(())
    }
}

/// Averages over the repetitions of one configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub repetitions: usize,
    /// Mean nodes per receive-count bin, over all nodes of the network.
    pub receive_histogram: [f64; RECEIVE_BINS],
    /// Mean reached nodes per depth.
    pub depth_histogram: Vec<f64>,
    pub mean_total_messages: f64,
    pub mean_in_area: f64,
    /// Messages beyond one per in-area node, relative to the in-area count.
    pub overhead_ratio: f64,
    pub mean_depth: f64,
    pub max_depth: u32,
    pub unreached_fraction: f64,
    /// Share of expected responses that never reached a root.
    pub response_gap_fraction: f64,
    /// Every repetition delivered exactly one message per node and area.
    pub exactly_once: bool,
}

/// Result of one repetition.
#[derive(Clone, Debug, PartialEq)]
pub struct RepOutcome {
    pub stats: TreeStats,
    pub response_gap_fraction: f64,
}

enum Built {
    Chord(ChordNetwork),
    Can(CanNetwork),
}

impl Built {
    fn overlay(&self) -> Overlay<'_> {
        match self {
            Built::Chord(net) => Overlay::Chord(net),
            Built::Can(net) => Overlay::Can(net),
        }
    }
}

/// Splits a box into `parts` boxes of (nearly) equal size. Each prime
/// factor of `parts`, largest first, cuts the axis whose cells are
/// currently widest.
pub fn split_box(b: &TorusBox, parts: usize) -> Result<Vec<TorusBox>> {
    let mut cuts = vec![1usize; b.dims()];
    for p in prime_factors(parts).into_iter().rev() {
        let axis = (0..b.dims())
            .max_by(|&i, &j| {
                let (wi, wj) = (b.len(i) / cuts[i] as u128, b.len(j) / cuts[j] as u128);
                wi.cmp(&wj).then(j.cmp(&i))
            })
            .unwrap_or(0);
        cuts[axis] *= p;
    }
    let mut out = Vec::with_capacity(parts);
    let mut index = vec![0usize; b.dims()];
    loop {
        let mut origin = Vec::with_capacity(b.dims());
        let mut extent = Vec::with_capacity(b.dims());
        for axis in 0..b.dims() {
            let (len, k, i) = (b.len(axis), cuts[axis] as u128, index[axis] as u128);
            let lo = len * i / k;
            let hi = len * (i + 1) / k;
            origin.push(((b.lo(axis) as u128 + lo) % crate::hashspace::UNIT) as u64);
            extent.push(hi - lo);
        }
        out.push(TorusBox::new(TorusPoint::new(origin), extent)?);
        // odometer over the cut grid, last axis fastest
        let mut axis = b.dims();
        loop {
            if axis == 0 {
                return Ok(out);
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < cuts[axis] {
                break;
            }
            index[axis] = 0;
        }
    }
}

/// Splits an arc into `parts` consecutive arcs.
pub fn split_arc(
    ring: RingSpace,
    start: RingId,
    length: u128,
    parts: usize,
) -> Vec<(RingId, u128)> {
    let k = parts as u128;
    (0..k)
        .map(|i| {
            let lo = length * i / k;
            let hi = length * (i + 1) / k;
            (ring.add(start, lo), hi - lo)
        })
        .filter(|&(_, len)| len > 0)
        .collect()
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        while n.is_multiple_of(p) {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Splits `area` into `parts` disjoint sub-areas.
pub fn split_area(area: &AreaSpec, parts: usize, ring: RingSpace) -> Result<Vec<AreaSpec>> {
    if parts <= 1 {
        return Ok(vec![area.clone()]);
    }
    Ok(match area {
        AreaSpec::CanBox(b) => split_box(b, parts)?
            .into_iter()
            .map(AreaSpec::CanBox)
            .collect(),
        AreaSpec::Arc { start, length } => split_arc(ring, *start, *length, parts)
            .into_iter()
            .map(|(start, length)| AreaSpec::Arc { start, length })
            .collect(),
    })
}

/// Root of a tree over `area`: a uniformly chosen node storing part of a
/// box, or the node storing the first key of a partial arc.
pub fn pick_root(overlay: Overlay<'_>, area: &AreaSpec, rng: &mut SimRng) -> Result<NodeId> {
    if let (Overlay::Chord(net), AreaSpec::Arc { start, length }) = (overlay, area) {
        if *length < net.ring().size() {
            return Ok(net.responsible_index(*start));
        }
    }
    let members: Vec<NodeId> = (0..overlay.len() as u32)
        .map(NodeId)
        .filter_map(|v| match overlay.meets(v, area) {
            Ok(true) => Some(Ok(v)),
            Ok(false) => None,
            Err(e) => Some(Err(e)),
        })
        .collect::<Result<_>>()?;
    if members.is_empty() {
        return Err(Error::contract("no node stores any part of the area"));
    }
    Ok(members[rng.index(members.len())])
}

/// `round(fraction * n)` nodes drawn uniformly from those not in `exclude`.
pub fn draw_malicious(n: usize, fraction: f64, exclude: &[NodeId], rng: &mut SimRng) -> FaultModel {
    let pool: Vec<NodeId> = (0..n as u32)
        .map(NodeId)
        .filter(|v| !exclude.contains(v))
        .collect();
    let count = ((fraction * n as f64).round() as usize).min(pool.len());
    FaultModel::with_malicious(
        rng.sample_indices(pool.len(), count)
            .into_iter()
            .map(|i| pool[i]),
    )
}

/// Runs repetition `rep` of `cfg`.
pub fn run_repetition(cfg: &SimConfig, rep: usize) -> Result<RepOutcome> {
    let mut rng = SimRng::fork(cfg.seed, rep as u64);
    let built = match cfg.overlay {
        OverlayKind::Chord => Built::Chord(build_chord(cfg.n, &mut rng)?),
        OverlayKind::Can => Built::Can(build_can(cfg.n, cfg.d, &mut rng)?),
    };
    let overlay = built.overlay();
    let area = cfg.area.resolve(cfg.overlay, cfg.d)?;
    let parts = split_area(&area, cfg.split_roots, RingSpace::default())?;
    let roots = parts
        .iter()
        .map(|a| pick_root(overlay, a, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let faults = draw_malicious(cfg.n, cfg.malicious_fraction, &roots, &mut rng);
    let stats = match (cfg.algorithm, &built) {
        (Algorithm::Dtc, _) => {
            let pairs: Vec<(NodeId, AreaSpec)> =
                roots.iter().copied().zip(parts.iter().cloned()).collect();
            span_multi_tree(overlay, &pairs, &faults)?
        }
        (Algorithm::Alm, Built::Can(net)) => {
            alm_broadcast_ordered(net, roots[0], &faults, cfg.alm_axis_order)?
        }
        (Algorithm::Alm, Built::Chord(_)) => return Err(Error::config("ALM runs on CAN only")),
        (Algorithm::Flood, _) => simple_flood(overlay, roots[0], &faults)?,
    };
    let response_gap_fraction = if cfg.algorithm == Algorithm::Dtc {
        response_gap(overlay, &roots, &parts, &faults)?
    } else {
        stats.unreached_fraction()
    };
    Ok(RepOutcome {
        stats,
        response_gap_fraction,
    })
}

/// Share of (node, sub-area) responses lost when each sub-tree collects its
/// own responses.
fn response_gap(
    overlay: Overlay<'_>,
    roots: &[NodeId],
    parts: &[AreaSpec],
    faults: &FaultModel,
) -> Result<f64> {
    let (mut lost, mut expected) = (0usize, 0usize);
    for (&root, area) in roots.iter().zip(parts) {
        let stats = span_multi_tree(overlay, &[(root, area.clone())], faults)?;
        let report = collect_responses(&stats, overlay, area, faults)?;
        lost += report.gap.len();
        expected += report.gap.len() + report.responders.len();
    }
    Ok(if expected == 0 {
        0.0
    } else {
        lost as f64 / expected as f64
    })
}

/// Runs every repetition of `cfg` and averages. Repetitions run in parallel
/// and are merged in index order, so the result does not depend on
/// scheduling.
pub fn run(cfg: &SimConfig) -> Result<AggregateMetrics> {
    cfg.validate()?;
    let outcomes = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(cfg, rep))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&outcomes))
}

pub fn aggregate(outcomes: &[RepOutcome]) -> AggregateMetrics {
    let reps = outcomes.len().max(1) as f64;
    let mut m = AggregateMetrics {
        repetitions: outcomes.len(),
        exactly_once: true,
        ..AggregateMetrics::default()
    };
    let (mut depth_sum, mut depth_count) = (0u64, 0u64);
    for o in outcomes {
        let s = &o.stats;
        for &c in &s.receive_count {
            m.receive_histogram[receive_bin(c)] += 1.0;
        }
        for d in s.depth.iter().flatten() {
            let d = *d as usize;
            if m.depth_histogram.len() <= d {
                m.depth_histogram.resize(d + 1, 0.0);
            }
            m.depth_histogram[d] += 1.0;
            depth_sum += d as u64;
            depth_count += 1;
        }
        m.mean_total_messages += s.total_messages as f64;
        m.mean_in_area += s.in_area_count() as f64;
        m.max_depth = m.max_depth.max(s.max_depth());
        m.unreached_fraction += s.unreached_fraction();
        m.response_gap_fraction += o.response_gap_fraction;
        m.exactly_once &= s.is_exactly_once();
    }
    for v in m
        .receive_histogram
        .iter_mut()
        .chain(m.depth_histogram.iter_mut())
    {
        *v /= reps;
    }
    m.mean_total_messages /= reps;
    m.mean_in_area /= reps;
    m.unreached_fraction /= reps;
    m.response_gap_fraction /= reps;
    m.mean_depth = if depth_count == 0 {
        0.0
    } else {
        depth_sum as f64 / depth_count as f64
    };
    m.overhead_ratio = if m.mean_in_area == 0.0 {
        0.0
    } else {
        m.mean_total_messages / m.mean_in_area - 1.0
    };
    m
}

/// One point of a malicious-peer curve: unreached fractions per scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub fraction: f64,
    pub dtc_can: f64,
    pub dtc_chord: f64,
    pub alm: f64,
}

/// Unreached fraction of DTC on CAN, DTC on Chord and ALM for each
/// malicious fraction, all else taken from `base`.
pub fn malicious_sweep(base: &SimConfig, fractions: &[f64]) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::with_capacity(fractions.len());
    for &f in fractions {
        if !(0.0..=0.9).contains(&f) {
            return Err(Error::config(format!(
                "malicious fraction {f} outside [0, 0.9]"
            )));
        }
        let with = |overlay, algorithm| SimConfig {
            overlay,
            algorithm,
            malicious_fraction: f,
            area: AreaConfig::Full,
            split_roots: 1,
            ..base.clone()
        };
        out.push(SweepPoint {
            fraction: f,
            dtc_can: run(&with(OverlayKind::Can, Algorithm::Dtc))?.unreached_fraction,
            dtc_chord: run(&with(OverlayKind::Chord, Algorithm::Dtc))?.unreached_fraction,
            alm: run(&with(OverlayKind::Can, Algorithm::Alm))?.unreached_fraction,
        });
    }
    Ok(out)
}
