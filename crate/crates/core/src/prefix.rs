//! Order-preserving placement of string keys by region quadtree.
//!
//! The unit square is cut into four quadrants, each quadrant into four again,
//! and so on; every cut consumes part of the key. Keys sharing a prefix share
//! the quadtree cell of that prefix, so a prefix search is a tree spanned
//! over one cell. Below the last coded level a key's position comes from a
//! hash of the whole key, which spreads long keys with a common prefix
//! uniformly across the prefix's cell.
//!
//! Quadrant digits are laid out in reading order, top row first:
//!
//! ```text
//!   y=1  | 0 | 1 |
//!   y=0  | 2 | 3 |
//!          x=0 x=1
//! ```
//!
//! On a Chord ring a cell is the arc of identifiers whose leading bits spell
//! its digit path (two bits per digit), i.e. cells are laid out in Z order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashspace::{splitmix64, RingId, RingSpace, TorusBox, TorusPoint, UNIT};

/// `(x bit, y bit)` of each quadrant digit.
pub const QUADRANT_CELLS: [(u64, u64); 4] = [(0, 1), (1, 1), (0, 0), (1, 0)];

pub const DEFAULT_CHARSET: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

/// Quadtree cuts per key character.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitFactor {
    /// One cut per two characters: the first picks the row half, the second
    /// the column half.
    #[serde(rename = "0.5")]
    Half,
    /// One cut per character; the charset is divided into four contiguous
    /// groups.
    #[default]
    #[serde(rename = "1")]
    One,
    /// Three cuts per character, two bits of its 6-bit index per cut.
    #[serde(rename = "3")]
    Three,
}

impl SplitFactor {
    /// Levels fully determined by a prefix of `chars` characters.
    pub fn depth_for(self, chars: usize) -> usize {
        match self {
            SplitFactor::Half => chars / 2,
            SplitFactor::One => chars,
            SplitFactor::Three => 3 * chars,
        }
    }
}

impl FromStr for SplitFactor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0.5" | ".5" => Ok(SplitFactor::Half),
            "1" | "1.0" => Ok(SplitFactor::One),
            "3" | "3.0" => Ok(SplitFactor::Three),
            other => Err(Error::config(format!(
                "split factor {other:?} is not one of 0.5, 1, 3"
            ))),
        }
    }
}

impl fmt::Display for SplitFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitFactor::Half => "0.5",
            SplitFactor::One => "1",
            SplitFactor::Three => "3",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrefixCodec {
    /// Allowed symbols in lexical order. Keys are upper-cased first.
    pub charset: String,
    pub split_factor: SplitFactor,
    /// Axes carrying the quadtree; only the plane (2) is supported.
    pub coded_dims: usize,
    /// Deepest quadtree level a key is coded to.
    pub max_depth: usize,
}

impl Default for PrefixCodec {
    fn default() -> Self {
        PrefixCodec {
            charset: DEFAULT_CHARSET.to_string(),
            split_factor: SplitFactor::One,
            coded_dims: 2,
            max_depth: 32,
        }
    }
}

/// A quadtree cell, or a block of sibling quadrants inside one cell as
/// produced for ranges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixArea {
    /// Digits of the enclosing cell.
    pub path: Vec<u8>,
    /// Inclusive range of digits one level below `path`; the area is the
    /// bounding box of those quadrants. `None` means the whole cell.
    pub quadrants: Option<(u8, u8)>,
    /// The prefix needed more levels than the codec codes.
    pub capped: bool,
}

impl PrefixArea {
    pub fn depth(&self) -> usize {
        self.path.len()
    }

    /// Bounds of the area in the coded plane as `(x_lo, x_len, y_lo, y_len)`.
    fn plane(&self) -> (u64, u128, u64, u128) {
        let (mut x, mut y) = (0u64, 0u64);
        for (level, &digit) in self.path.iter().enumerate() {
            let (bx, by) = QUADRANT_CELLS[digit as usize];
            x |= bx << (63 - level);
            y |= by << (63 - level);
        }
        let cell = UNIT >> self.path.len();
        let Some((a, b)) = self.quadrants else {
            return (x, cell, y, cell);
        };
        let half = cell / 2;
        let bit = |v: u64| (v as u128 * half) as u64;
        let cells: Vec<(u64, u64)> = (a..=b).map(|q| QUADRANT_CELLS[q as usize]).collect();
        let span = |pick: fn(&(u64, u64)) -> u64| {
            let lo = cells.iter().map(pick).min().unwrap();
            let hi = cells.iter().map(pick).max().unwrap();
            (bit(lo), if lo == hi { half } else { cell })
        };
        let (dx, xl) = span(|c| c.0);
        let (dy, yl) = span(|c| c.1);
        (x + dx, xl, y + dy, yl)
    }

    /// The area as a box of a `dims`-dimensional space; axes past the plane
    /// are covered whole.
    pub fn to_box(&self, dims: usize) -> Result<TorusBox> {
        if dims < 2 {
            return Err(Error::contract("prefix areas need at least two dimensions"));
        }
        let (x, xl, y, yl) = self.plane();
        let mut origin = vec![0u64; dims];
        let mut extent = vec![UNIT; dims];
        origin[0] = x;
        origin[1] = y;
        extent[0] = xl;
        extent[1] = yl;
        TorusBox::new(TorusPoint::new(origin), extent)
    }

    /// The area as an arc of the ring: the identifiers whose leading digits
    /// fall in it.
    pub fn to_arc(&self, ring: RingSpace) -> (RingId, u128) {
        let mut start: u128 = 0;
        for (level, &digit) in self.path.iter().enumerate() {
            start |= (digit as u128) << (62 - 2 * level);
        }
        let cell = UNIT >> (2 * self.path.len()).min(64);
        let (start, length) = match self.quadrants {
            None => (start, cell),
            Some((a, b)) => {
                let quarter = cell / 4;
                (start + a as u128 * quarter, (b - a + 1) as u128 * quarter)
            }
        };
        let shift = 64 - ring.bits();
        let start = (start >> shift) as u64;
        (RingId(start), (length >> shift).max(1))
    }

    /// Share of the whole key space covered.
    pub fn share(&self) -> f64 {
        let (_, xl, _, yl) = self.plane();
        (xl as f64 / UNIT as f64) * (yl as f64 / UNIT as f64)
    }

    /// Number of quadrants (out of four) the area takes one level below its
    /// path.
    fn quadrant_count(&self) -> u32 {
        let (_, xl, _, yl) = self.plane();
        let cell = UNIT >> self.path.len();
        (if xl == cell { 2 } else { 1 }) * (if yl == cell { 2 } else { 1 })
    }
}

/// Nodes expected in `area` when `n` nodes are spread uniformly: `n` is
/// quartered once per level, rounding each step to the nearest integer with
/// ties to even.
pub fn expected_nodes_in_area(n: u64, area: &PrefixArea) -> u64 {
    let mut nodes = n;
    for _ in 0..area.depth() {
        nodes = quarter_round_even(nodes);
    }
    match area.quadrant_count() {
        4 => nodes,
        q => {
            let scaled = nodes * q as u64;
            let (whole, rem) = (scaled / 4, scaled % 4);
            match rem.cmp(&2) {
                Ordering::Less => whole,
                Ordering::Greater => whole + 1,
                Ordering::Equal => whole + (whole & 1),
            }
        }
    }
}

fn quarter_round_even(n: u64) -> u64 {
    let (whole, rem) = (n / 4, n % 4);
    match rem.cmp(&2) {
        Ordering::Less => whole,
        Ordering::Greater => whole + 1,
        Ordering::Equal => whole + (whole & 1),
    }
}

/// FNV-1a over the bytes of `s`.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Uniform 64-bit words derived from a key, used below its coded levels.
fn suffix_hash(key: &str, index: u64) -> u64 {
    splitmix64(fnv1a(key) ^ splitmix64(index))
}

impl PrefixCodec {
    pub fn new(split_factor: SplitFactor) -> Self {
        PrefixCodec {
            split_factor,
            ..PrefixCodec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let symbols: Vec<char> = self.charset.chars().collect();
        if symbols.len() < 4 {
            return Err(Error::config("charset needs at least four symbols"));
        }
        let mut sorted = symbols.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != symbols.len() {
            return Err(Error::config("charset repeats a symbol"));
        }
        if symbols
            .iter()
            .any(|c| c.to_uppercase().ne(std::iter::once(*c)))
        {
            return Err(Error::config("charset symbols must be upper case"));
        }
        if self.split_factor == SplitFactor::Three && symbols.len() > 64 {
            return Err(Error::config("split factor 3 codes at most 64 symbols"));
        }
        if self.coded_dims != 2 {
            return Err(Error::config("only two coded dimensions are supported"));
        }
        if self.max_depth == 0 || self.max_depth * self.coded_dims > 64 {
            return Err(Error::config("max_depth must lie in 1..=32"));
        }
        Ok(())
    }

    fn symbols(&self) -> Vec<char> {
        self.charset.chars().collect()
    }

    /// Charset indices of the (upper-cased) key.
    pub fn indices(&self, key: &str) -> Result<Vec<usize>> {
        let symbols = self.symbols();
        key.chars()
            .flat_map(char::to_uppercase)
            .map(|c| {
                symbols
                    .iter()
                    .position(|&s| s == c)
                    .ok_or_else(|| Error::IllegalSymbol {
                        symbol: c,
                        input: key.to_string(),
                    })
            })
            .collect()
    }

    /// Lexical comparison under the charset order.
    pub fn compare(&self, a: &str, b: &str) -> Result<Ordering> {
        Ok(self.indices(a)?.cmp(&self.indices(b)?))
    }

    fn group(&self, index: usize) -> u8 {
        (index * 4 / self.charset.chars().count()) as u8
    }

    fn upper_half(&self, index: usize) -> u8 {
        (2 * index >= self.charset.chars().count()) as u8
    }

    /// Quadrant digits spelled by a sequence of charset indices, complete
    /// levels only.
    fn digits(&self, idx: &[usize]) -> Vec<u8> {
        let mut out = Vec::new();
        match self.split_factor {
            SplitFactor::One => out.extend(idx.iter().map(|&i| self.group(i))),
            SplitFactor::Three => {
                for &i in idx {
                    out.extend([(i >> 4) as u8 & 3, (i >> 2) as u8 & 3, i as u8 & 3]);
                }
            }
            SplitFactor::Half => {
                for pair in idx.chunks_exact(2) {
                    out.push(2 * self.upper_half(pair[0]) + self.upper_half(pair[1]));
                }
            }
        }
        out
    }

    fn cap(&self, mut path: Vec<u8>) -> (Vec<u8>, bool) {
        let capped = path.len() > self.max_depth;
        path.truncate(self.max_depth);
        (path, capped)
    }

    /// Position of a key in a `dims`-dimensional space (`dims >= 2`).
    pub fn key_to_point(&self, key: &str, dims: usize) -> Result<TorusPoint> {
        self.validate()?;
        if key.is_empty() {
            return Err(Error::contract("empty key"));
        }
        if dims < 2 {
            return Err(Error::contract("keys need at least two dimensions"));
        }
        let folded: String = key.chars().flat_map(char::to_uppercase).collect();
        let (path, _) = self.cap(self.digits(&self.indices(&folded)?));
        let area = PrefixArea {
            path,
            quadrants: None,
            capped: false,
        };
        let (x, _, y, _) = area.plane();
        let depth = area.depth() as u32;
        let low_bits = |h: u64| if depth == 0 { h } else { h >> depth };
        let mut coords = Vec::with_capacity(dims);
        coords.push(x | low_bits(suffix_hash(&folded, 0)));
        coords.push(y | low_bits(suffix_hash(&folded, 1)));
        for axis in 2..dims {
            coords.push(suffix_hash(&folded, axis as u64));
        }
        Ok(TorusPoint::new(coords))
    }

    /// Identifier of a key on a Chord ring.
    pub fn key_to_ring(&self, key: &str, ring: RingSpace) -> Result<RingId> {
        self.validate()?;
        if key.is_empty() {
            return Err(Error::contract("empty key"));
        }
        let folded: String = key.chars().flat_map(char::to_uppercase).collect();
        let (path, _) = self.cap(self.digits(&self.indices(&folded)?));
        let mut id: u64 = 0;
        for (level, &digit) in path.iter().enumerate() {
            id |= (digit as u64) << (62 - 2 * level);
        }
        let used = 2 * path.len() as u32;
        if used < 64 {
            id |= suffix_hash(&folded, 0) >> used;
        }
        Ok(RingId(id >> (64 - ring.bits())))
    }

    /// The cell holding every key that starts with `prefix`.
    pub fn prefix_to_area(&self, prefix: &str) -> Result<PrefixArea> {
        self.validate()?;
        let (path, capped) = self.cap(self.digits(&self.indices(prefix)?));
        Ok(PrefixArea {
            path,
            quadrants: None,
            capped,
        })
    }

    /// A quadtree-aligned area holding every key `k` with
    /// `low <= k <= high`. It may hold other keys as well.
    pub fn range_to_area(&self, low: &str, high: &str) -> Result<PrefixArea> {
        self.validate()?;
        let lo = self.indices(low)?;
        let hi = self.indices(high)?;
        if lo > hi {
            return Err(Error::contract(format!(
                "range {low:?}..={high:?} is inverted"
            )));
        }
        let common = lo.iter().zip(&hi).take_while(|(a, b)| a == b).count();
        // every key in range starts with the common prefix; when `low` is that
        // prefix the key `low` itself may sit anywhere in its cell
        if common == lo.len() {
            return self.prefix_to_area(low);
        }
        let (a, b) = (lo[common], hi[common]);
        let fixed = self.digits(&hi[..common]);
        let (path, quadrants) = match self.split_factor {
            SplitFactor::One => {
                let (ga, gb) = (self.group(a), self.group(b));
                let mut path = fixed;
                if ga == gb {
                    path.push(ga);
                    (path, None)
                } else {
                    (path, Some((ga, gb)))
                }
            }
            SplitFactor::Three => {
                let mut path = fixed;
                let mut range = None;
                for shift in [4, 2, 0] {
                    let (da, db) = ((a >> shift) as u8 & 3, (b >> shift) as u8 & 3);
                    if da == db {
                        path.push(da);
                    } else {
                        range = Some((da, db));
                        break;
                    }
                }
                (path, range)
            }
            SplitFactor::Half => {
                let (ha, hb) = (self.upper_half(a), self.upper_half(b));
                if common % 2 == 0 {
                    // a key ending on the varying character is placed by
                    // hash anywhere in the cell, and one such key is in range
                    (fixed, None)
                } else {
                    let row = self.upper_half(hi[common - 1]);
                    (fixed, Some((2 * row + ha, 2 * row + hb)))
                }
            }
        };
        let quadrants = quadrants.filter(|&(a, b)| !(a == 0 && b == 3));
        let (path, capped) = self.cap(path);
        let quadrants = if capped { None } else { quadrants };
        Ok(PrefixArea {
            path,
            quadrants,
            capped,
        })
    }

    /// Whether `key` starts with `prefix`, after case folding.
    pub fn has_prefix(&self, key: &str, prefix: &str) -> Result<bool> {
        Ok(self.indices(key)?.starts_with(&self.indices(prefix)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashspace::SimRng;

    fn codec(f: SplitFactor) -> PrefixCodec {
        PrefixCodec::new(f)
    }

    fn small(f: SplitFactor) -> PrefixCodec {
        PrefixCodec {
            charset: "ABCD".into(),
            ..PrefixCodec::new(f)
        }
    }

    const FACTORS: [SplitFactor; 3] = [SplitFactor::Half, SplitFactor::One, SplitFactor::Three];

    fn inside(c: &PrefixCodec, key: &str, area: &PrefixArea) -> bool {
        let b = area.to_box(3).unwrap();
        b.contains(&c.key_to_point(key, 3).unwrap()).unwrap()
    }

    fn inside_arc(c: &PrefixCodec, key: &str, area: &PrefixArea) -> bool {
        let ring = RingSpace::default();
        let (start, len) = area.to_arc(ring);
        ring.in_arc(start, len, c.key_to_ring(key, ring).unwrap())
    }

    fn random_key(rng: &mut SimRng, symbols: &[char], max_len: usize) -> String {
        let len = 1 + rng.index(max_len);
        (0..len)
            .map(|_| symbols[rng.index(symbols.len())])
            .collect()
    }

    #[test]
    fn shared_prefix_shares_the_cell() {
        let c = codec(SplitFactor::One);
        let jos = c.prefix_to_area("JOS").unwrap();
        assert!(inside(&c, "JOSH", &jos));
        assert!(inside(&c, "jose", &jos));
        assert!(!inside(&c, "JAKE", &jos));
        // J-R is the second group: top right quadrant, twice, then S-Z0
        // is the lower left quarter of that
        let b = jos.to_box(2).unwrap();
        assert_eq!(b.to_owned().origin().to_f64s(), vec![0.75, 0.75]);
        assert_eq!(b.extent(), &[UNIT / 8, UNIT / 8]);
    }

    #[test]
    fn equal_keys_equal_points() {
        for f in FACTORS {
            let c = codec(f);
            assert_eq!(
                c.key_to_point("ALPHA7", 10).unwrap(),
                c.key_to_point("alpha7", 10).unwrap()
            );
            assert_eq!(
                c.key_to_ring("ALPHA7", RingSpace::default()).unwrap(),
                c.key_to_ring("alpha7", RingSpace::default()).unwrap()
            );
        }
    }

    #[test]
    fn illegal_symbols_are_rejected() {
        let c = codec(SplitFactor::One);
        assert!(matches!(
            c.key_to_point("JO-S", 2),
            Err(Error::IllegalSymbol { symbol: '-', .. })
        ));
        assert!(c.prefix_to_area("A B").is_err());
        assert!(c.key_to_point("", 2).is_err());
    }

    #[test]
    fn bad_codecs_are_rejected() {
        assert!(PrefixCodec {
            charset: "ABC".into(),
            ..PrefixCodec::default()
        }
        .validate()
        .is_err());
        assert!(PrefixCodec {
            charset: "ABCA".into(),
            ..PrefixCodec::default()
        }
        .validate()
        .is_err());
        assert!(PrefixCodec {
            coded_dims: 3,
            ..PrefixCodec::default()
        }
        .validate()
        .is_err());
        assert!(PrefixCodec {
            max_depth: 33,
            ..PrefixCodec::default()
        }
        .validate()
        .is_err());
        assert_eq!("0.5".parse::<SplitFactor>().unwrap(), SplitFactor::Half);
        assert!("2".parse::<SplitFactor>().is_err());
    }

    #[test]
    fn containment_exhaustive_on_small_charset() {
        let symbols = ['A', 'B', 'C', 'D'];
        for f in FACTORS {
            let c = small(f);
            let mut keys = Vec::new();
            for &a in &symbols {
                keys.push(a.to_string());
                for &b in &symbols {
                    keys.push(format!("{a}{b}"));
                }
            }
            for k in &keys {
                for cut in 0..=k.len() {
                    let area = c.prefix_to_area(&k[..cut]).unwrap();
                    assert!(inside(&c, k, &area), "{f} key {k} prefix {}", &k[..cut]);
                    assert!(inside_arc(&c, k, &area), "{f} key {k} prefix {}", &k[..cut]);
                }
            }
        }
    }

    #[test]
    fn containment_random_full_charset() {
        let mut rng = SimRng::new(3);
        let symbols: Vec<char> = DEFAULT_CHARSET.chars().collect();
        for f in FACTORS {
            let c = codec(f);
            for _ in 0..2000 {
                let k = random_key(&mut rng, &symbols, 14);
                let cut = rng.index(k.len() + 1);
                let area = c.prefix_to_area(&k[..cut]).unwrap();
                assert!(inside(&c, &k, &area));
                assert!(inside_arc(&c, &k, &area));
            }
        }
    }

    #[test]
    fn longer_prefixes_nest() {
        let c = codec(SplitFactor::One);
        let word = "QUADTREE7";
        for cut in 1..word.len() {
            let outer = c.prefix_to_area(&word[..cut]).unwrap().to_box(2).unwrap();
            let inner = c
                .prefix_to_area(&word[..cut + 1])
                .unwrap()
                .to_box(2)
                .unwrap();
            assert!(outer.contains(inner.origin()).unwrap());
            for i in 0..2 {
                assert_eq!(outer.len(i), 2 * inner.len(i));
            }
        }
    }

    #[test]
    fn shares_are_powers_of_a_quarter() {
        let word = "ABCDEFGHIJ";
        for (f, per_char) in [(SplitFactor::One, 1), (SplitFactor::Three, 3)] {
            let c = codec(f);
            for len in 0..=word.len() {
                let area = c.prefix_to_area(&word[..len]).unwrap();
                let depth = (len * per_char).min(32);
                assert_eq!(area.depth(), depth);
                let b = area.to_box(2).unwrap();
                assert_eq!(b.len(0), UNIT >> depth);
                assert_eq!(b.len(1), UNIT >> depth);
            }
        }
        let half = codec(SplitFactor::Half);
        assert_eq!(half.prefix_to_area("ABC").unwrap().depth(), 1);
        assert_eq!(
            half.prefix_to_area("AB").unwrap(),
            half.prefix_to_area("ABC").unwrap()
        );
    }

    #[test]
    fn long_prefixes_are_capped() {
        let c = codec(SplitFactor::Three);
        let area = c.prefix_to_area("ABCDEFGHIJKL").unwrap();
        assert!(area.capped);
        assert_eq!(area.depth(), 32);
        assert!(!c.prefix_to_area("ABCDEFGHIJ").unwrap().capped);
    }

    #[test]
    fn expected_nodes_match_table() {
        let c = codec(SplitFactor::One);
        let expected = [
            1_000_000, 250_000, 62_500, 15_625, 3906, 976, 244, 61, 15, 4, 1,
        ];
        for (len, &want) in expected.iter().enumerate() {
            let area = c.prefix_to_area(&"JOSEPHINE0"[..len]).unwrap();
            assert_eq!(
                expected_nodes_in_area(1_000_000, &area),
                want,
                "length {len}"
            );
        }
    }

    #[test]
    fn group_frequencies_match_group_sizes() {
        let c = codec(SplitFactor::One);
        let symbols: Vec<char> = DEFAULT_CHARSET.chars().collect();
        let mut rng = SimRng::new(11);
        let cells: Vec<TorusBox> = ["A", "J", "S", "1"]
            .iter()
            .map(|p| c.prefix_to_area(p).unwrap().to_box(2).unwrap())
            .collect();
        let mut hits = [0u32; 4];
        let trials = 100_000;
        for _ in 0..trials {
            let k = random_key(&mut rng, &symbols, 8);
            let p = c.key_to_point(&k, 2).unwrap();
            for (i, cell) in cells.iter().enumerate() {
                if cell.contains(&p).unwrap() {
                    hits[i] += 1;
                }
            }
        }
        for h in hits {
            let share = h as f64 / trials as f64;
            assert!((share - 0.25).abs() < 0.01, "share {share}");
        }
    }

    #[test]
    fn ranges() {
        let c = codec(SplitFactor::One);
        assert_eq!(
            c.range_to_area("JOS", "JOS").unwrap(),
            c.prefix_to_area("JOS").unwrap()
        );
        let j = c.range_to_area("JA", "JZ").unwrap();
        assert_eq!(
            j.to_box(2).unwrap(),
            c.prefix_to_area("J").unwrap().to_box(2).unwrap()
        );
        let all = c.range_to_area("A", "9").unwrap();
        assert_eq!(all.to_box(2).unwrap(), TorusBox::whole(2));
        assert!(c.range_to_area("B", "A").is_err());
        // digits sort after letters
        assert!(c.range_to_area("Z", "0").is_ok());
    }

    #[test]
    fn range_soundness_exhaustive() {
        let symbols = ['A', 'B', 'C', 'D'];
        let mut keys = Vec::new();
        for &a in &symbols {
            keys.push(a.to_string());
            for &b in &symbols {
                keys.push(format!("{a}{b}"));
                for &d in &symbols {
                    keys.push(format!("{a}{b}{d}"));
                }
            }
        }
        for f in FACTORS {
            let c = small(f);
            for lo in &keys {
                for hi in &keys {
                    if c.compare(lo, hi).unwrap() == Ordering::Greater {
                        continue;
                    }
                    let area = c.range_to_area(lo, hi).unwrap();
                    for k in &keys {
                        let within = c.compare(lo, k).unwrap() != Ordering::Greater
                            && c.compare(k, hi).unwrap() != Ordering::Greater;
                        if within {
                            assert!(inside(&c, k, &area), "{f} {k} in {lo}..={hi}");
                            assert!(inside_arc(&c, k, &area), "{f} {k} in {lo}..={hi} (ring)");
                        }
                    }
                }
            }
        }
    }
}
