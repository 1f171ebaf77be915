//! Identifier and coordinate arithmetic shared by both overlays.
//!
//! Coordinates are binary fractions stored as the numerator over `2^64`, so a
//! coordinate is a plain `u64` and `1.0` itself is not representable as a
//! coordinate (it wraps to `0`). Extents may be the whole unit, so they are
//! carried as `u128` numerators in `(0, 2^64]`. Every geometric decision made by
//! the tree construction is an integer comparison on these numerators.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerator of the fraction `1.0`.
pub const UNIT: u128 = 1 << 64;

/// Numerator of the fraction `0.5`.
pub const HALF: u128 = 1 << 63;

/// Converts a float in `[0, 1)` to a coordinate, wrapping values outside.
pub fn frac_from_f64(x: f64) -> u64 {
    let wrapped = x.rem_euclid(1.0);
    let scaled = wrapped * UNIT as f64;
    if scaled >= UNIT as f64 {
        0
    } else {
        scaled as u64
    }
}

/// Converts an extent in `(0, 1]` to its numerator.
pub fn extent_from_f64(x: f64) -> u128 {
    if x >= 1.0 {
        UNIT
    } else {
        ((x.max(0.0) * UNIT as f64) as u128).max(1)
    }
}

pub fn frac_to_f64(x: u128) -> f64 {
    x as f64 / UNIT as f64
}

/// Identifier on a Chord ring.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct RingId(pub u64);

impl std::fmt::Display for RingId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#018x}", self.0)
    }
}

/// Modular arithmetic on a ring of `2^bits` identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingSpace {
    bits: u32,
}

impl Default for RingSpace {
    fn default() -> Self {
        RingSpace { bits: 64 }
    }
}

impl RingSpace {
    pub fn new(bits: u32) -> Result<Self> {
        if !(1..=64).contains(&bits) {
            return Err(Error::config(format!(
                "ring bits must be in 1..=64, got {bits}"
            )));
        }
        Ok(RingSpace { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of identifiers on the ring.
    pub fn size(&self) -> u128 {
        1u128 << self.bits
    }

    pub fn contains(&self, id: RingId) -> bool {
        (id.0 as u128) < self.size()
    }

    pub fn add(&self, id: RingId, delta: u128) -> RingId {
        RingId(((id.0 as u128 + delta) % self.size()) as u64)
    }

    /// Clockwise distance from `from` to `to`.
    pub fn distance(&self, from: RingId, to: RingId) -> u128 {
        let size = self.size();
        (to.0 as u128 + size - from.0 as u128) % size
    }

    /// `true` iff `x` lies on the half-open arc `[start, start + length)`.
    pub fn in_arc(&self, start: RingId, length: u128, x: RingId) -> bool {
        self.distance(start, x) < length
    }
}

/// [`RingSpace::in_arc`] on the default 64-bit ring.
pub fn in_arc(start: RingId, length: u128, x: RingId) -> bool {
    RingSpace::default().in_arc(start, length, x)
}

/// A point of the d-dimensional unit torus.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusPoint(Vec<u64>);

impl TorusPoint {
    pub fn new(coords: Vec<u64>) -> Self {
        TorusPoint(coords)
    }

    pub fn from_f64s(coords: &[f64]) -> Self {
        TorusPoint(coords.iter().map(|&c| frac_from_f64(c)).collect())
    }

    pub fn origin(dims: usize) -> Self {
        TorusPoint(vec![0; dims])
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[u64] {
        &self.0
    }

    pub fn to_f64s(&self) -> Vec<f64> {
        self.0.iter().map(|&c| frac_to_f64(c as u128)).collect()
    }
}

impl std::ops::Index<usize> for TorusPoint {
    type Output = u64;

    fn index(&self, i: usize) -> &u64 {
        &self.0[i]
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Shortest signed wraparound displacement from `from` to `to` along one axis,
/// as a numerator over `2^64`. The result lies in `(-2^63, 2^63]`.
pub fn axis_displacement(from: u64, to: u64) -> i128 {
    let diff = to.wrapping_sub(from) as u128;
    if diff <= HALF {
        diff as i128
    } else {
        diff as i128 - UNIT as i128
    }
}

/// Per-axis shortest displacement on the torus; a tie at exactly one half
/// resolves to `+0.5`.
pub fn torus_displacement(from: &TorusPoint, to: &TorusPoint) -> Result<Vec<i128>> {
    check_dims(from.dims(), to.dims())?;
    Ok(from
        .0
        .iter()
        .zip(&to.0)
        .map(|(&a, &b)| axis_displacement(a, b))
        .collect())
}

/// Applies a displacement to a point, wrapping modulo one.
pub fn translate(p: &TorusPoint, delta: &[i128]) -> Result<TorusPoint> {
    check_dims(p.dims(), delta.len())?;
    Ok(TorusPoint(
        p.0.iter()
            .zip(delta)
            .map(|(&c, &d)| (c as i128 + d).rem_euclid(UNIT as i128) as u64)
            .collect(),
    ))
}

/// Axis-aligned box on the torus: per axis the half-open interval
/// `[origin, origin + extent)` taken modulo one.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusBox {
    origin: TorusPoint,
    extent: Vec<u128>,
}

impl TorusBox {
    pub fn new(origin: TorusPoint, extent: Vec<u128>) -> Result<Self> {
        check_dims(origin.dims(), extent.len())?;
        if let Some(bad) = extent.iter().find(|&&e| e == 0 || e > UNIT) {
            return Err(Error::contract(format!(
                "box extent {bad} outside (0, 2^64]"
            )));
        }
        Ok(TorusBox { origin, extent })
    }

    /// The whole d-dimensional space.
    pub fn whole(dims: usize) -> Self {
        TorusBox {
            origin: TorusPoint::origin(dims),
            extent: vec![UNIT; dims],
        }
    }

    pub fn from_f64s(origin: &[f64], extent: &[f64]) -> Result<Self> {
        TorusBox::new(
            TorusPoint::from_f64s(origin),
            extent.iter().map(|&e| extent_from_f64(e)).collect(),
        )
    }

    pub fn dims(&self) -> usize {
        self.extent.len()
    }

    pub fn origin(&self) -> &TorusPoint {
        &self.origin
    }

    pub fn extent(&self) -> &[u128] {
        &self.extent
    }

    pub fn lo(&self, axis: usize) -> u64 {
        self.origin.0[axis]
    }

    pub fn len(&self, axis: usize) -> u128 {
        self.extent[axis]
    }

    pub fn is_whole(&self) -> bool {
        self.extent.iter().all(|&e| e == UNIT)
    }

    /// Whether the axis interval contains coordinate `c`.
    pub fn axis_contains(&self, axis: usize, c: u64) -> bool {
        (c.wrapping_sub(self.origin.0[axis]) as u128) < self.extent[axis]
    }

    pub fn contains(&self, p: &TorusPoint) -> Result<bool> {
        check_dims(self.dims(), p.dims())?;
        Ok((0..self.dims()).all(|i| self.axis_contains(i, p.0[i])))
    }

    /// Volume as a float, for reporting only.
    pub fn volume(&self) -> f64 {
        self.extent.iter().map(|&e| frac_to_f64(e)).product()
    }
}

/// [`TorusBox::contains`] as a free function.
pub fn box_contains(b: &TorusBox, p: &TorusPoint) -> Result<bool> {
    b.contains(p)
}

/// SplitMix64 finalizer; used to derive independent seeds and to hash.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Deterministic simulation randomness: ChaCha8 keyed by a 64-bit seed.
///
/// The stream for a given seed is fixed by the ChaCha8 algorithm and is the
/// same on every platform.
#[derive(Clone, Debug)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Seed of stream `index` under `master`; a pure function of both.
    pub fn derive_seed(master: u64, index: u64) -> u64 {
        splitmix64(master ^ splitmix64(index.wrapping_add(0x5EED)))
    }

    pub fn fork(master: u64, index: u64) -> Self {
        SimRng::new(SimRng::derive_seed(master, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform value in `0..bound` (`bound > 0`), without modulo bias.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
        loop {
            let v = self.inner.next_u64();
            if v <= zone {
                return v % bound;
            }
        }
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    /// Uniform point of the d-dimensional torus.
    pub fn point(&mut self, dims: usize) -> TorusPoint {
        TorusPoint((0..dims).map(|_| self.inner.next_u64()).collect())
    }

    /// `count` distinct indices from `0..len`, in draw order.
    pub fn sample_indices(&mut self, len: usize, count: usize) -> Vec<usize> {
        assert!(count <= len);
        // partial Fisher-Yates
        let mut pool: Vec<usize> = (0..len).collect();
        for i in 0..count {
            let j = i + self.index(len - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    }
}

impl RngCore for SimRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::RngCore;

    fn pt(c: &[f64]) -> TorusPoint {
        TorusPoint::from_f64s(c)
    }

    fn as_f64(d: &[i128]) -> Vec<f64> {
        d.iter().map(|&x| x as f64 / UNIT as f64).collect()
    }

    #[test]
    fn displacement_identity() {
        let d = torus_displacement(&pt(&[0.2, 0.2]), &pt(&[0.2, 0.2])).unwrap();
        assert_eq!(d, vec![0, 0]);
    }

    #[test]
    fn displacement_takes_wraparound_path() {
        let d = torus_displacement(&pt(&[0.9, 0.5]), &pt(&[0.1, 0.5])).unwrap();
        let f = as_f64(&d);
        assert!((f[0] - 0.2).abs() < 1e-12, "{f:?}");
        assert_eq!(d[1], 0);
    }

    #[test]
    fn displacement_half_tie_is_positive() {
        let d = torus_displacement(&pt(&[0.0, 0.0]), &pt(&[0.5, 0.25])).unwrap();
        assert_eq!(d, vec![HALF as i128, (HALF / 2) as i128]);
    }

    #[test]
    fn displacement_dimension_mismatch() {
        let err = torus_displacement(&pt(&[0.0]), &pt(&[0.0, 0.0])).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 1,
                found: 2
            }
        );
    }

    #[test]
    fn box_contains_examples() {
        let whole = TorusBox::whole(2);
        assert!(whole.contains(&pt(&[0.7, 0.3])).unwrap());

        let corner = TorusBox::from_f64s(&[0.9, 0.9], &[0.2, 0.2]).unwrap();
        assert!(box_contains(&corner, &pt(&[0.05, 0.05])).unwrap());

        let quad = TorusBox::from_f64s(&[0.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!(!quad.contains(&pt(&[0.5, 0.1])).unwrap());
        assert!(quad.contains(&pt(&[0.0, 0.0])).unwrap());
        assert!(quad.contains(&pt(&[0.499, 0.1])).unwrap());

        assert!(quad.contains(&pt(&[0.1])).is_err());
    }

    #[test]
    fn box_rejects_bad_extent() {
        assert!(TorusBox::new(TorusPoint::origin(1), vec![0]).is_err());
        assert!(TorusBox::new(TorusPoint::origin(1), vec![UNIT + 1]).is_err());
        assert!(TorusBox::new(TorusPoint::origin(2), vec![UNIT]).is_err());
    }

    #[test]
    fn arc_examples() {
        assert!(in_arc(RingId(0), UNIT, RingId(u64::MAX)));
        assert!(in_arc(RingId(12345), UNIT, RingId(7)));
        assert!(in_arc(RingId(u64::MAX), 2, RingId(0)));
        assert!(!in_arc(RingId(10), 5, RingId(15)));
        assert!(in_arc(RingId(10), 5, RingId(14)));
    }

    #[test]
    fn small_ring_arithmetic() {
        let ring = RingSpace::new(4).unwrap();
        assert_eq!(ring.size(), 16);
        assert_eq!(ring.add(RingId(14), 3), RingId(1));
        assert_eq!(ring.distance(RingId(14), RingId(1)), 3);
        assert!(ring.in_arc(RingId(15), 2, RingId(0)));
        assert!(RingSpace::new(0).is_err());
        assert!(RingSpace::new(65).is_err());
    }

    #[test]
    fn rng_is_reproducible() {
        let a: Vec<u64> = {
            let mut r = SimRng::new(42);
            (0..8).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = SimRng::new(42);
            (0..8).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(SimRng::derive_seed(1, 0), SimRng::derive_seed(1, 1));
        let picks = SimRng::new(3).sample_indices(10, 10);
        let mut sorted = picks.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn displacement_reconstructs_target(
            a in proptest::collection::vec(any::<u64>(), 1..6),
            seed in any::<u64>(),
        ) {
            let mut rng = SimRng::new(seed);
            let from = TorusPoint::new(a.clone());
            let to = rng.point(a.len());
            let d = torus_displacement(&from, &to).unwrap();
            prop_assert!(d.iter().all(|&x| x.unsigned_abs() <= HALF && x > -(HALF as i128)));
            prop_assert_eq!(translate(&from, &d).unwrap(), to);
        }

        #[test]
        fn box_membership_matches_offset(o in any::<u64>(), e in 1u128..=UNIT, c in any::<u64>()) {
            let b = TorusBox::new(TorusPoint::new(vec![o]), vec![e]).unwrap();
            let offset = (c as u128 + UNIT - o as u128) % UNIT;
            prop_assert_eq!(b.contains(&TorusPoint::new(vec![c])).unwrap(), offset < e);
        }
    }
}
