//! Named experiment scenarios, their CSV reports and the prefix-search demo.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::AxisOrder;
use crate::can::build_can;
use crate::dtc::{
    collect_responses, span_tree, AreaSpec, CoverageReport, FaultModel, Overlay, TreeStats,
};
use crate::error::{Error, Result};
use crate::hashspace::SimRng;
use crate::prefix::{expected_nodes_in_area, PrefixCodec, SplitFactor, DEFAULT_CHARSET};
use crate::sim::{
    malicious_sweep, pick_root, receive_bin_label, run, AggregateMetrics, Algorithm, AreaConfig,
    OverlayKind, SimConfig, RECEIVE_BINS,
};
use crate::{CanNetwork, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Table2,
    Fig4a,
    Fig4b,
    Fig5Absolute,
    Fig5Relative,
    Fig6,
    Table1,
    PrefixDemo,
    Custom,
}

impl Scenario {
    pub const ALL: [Scenario; 9] = [
        Scenario::Table2,
        Scenario::Fig4a,
        Scenario::Fig4b,
        Scenario::Fig5Absolute,
        Scenario::Fig5Relative,
        Scenario::Fig6,
        Scenario::Table1,
        Scenario::PrefixDemo,
        Scenario::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Table2 => "table2",
            Scenario::Fig4a => "fig4a",
            Scenario::Fig4b => "fig4b",
            Scenario::Fig5Absolute => "fig5-absolute",
            Scenario::Fig5Relative => "fig5-relative",
            Scenario::Fig6 => "fig6",
            Scenario::Table1 => "table1",
            Scenario::PrefixDemo => "prefix-demo",
            Scenario::Custom => "custom",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::config(format!("unknown scenario {s:?}")))
    }
}

/// Parameters replacing a scenario's defaults. Named scenarios read only the
/// fields that make sense for them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub overlay: Option<OverlayKind>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub seed: Option<u64>,
    pub repetitions: Option<usize>,
    pub malicious_fraction: Option<f64>,
    pub algorithm: Option<Algorithm>,
    pub area: Option<AreaConfig>,
    pub split_roots: Option<usize>,
    pub alm_axis_order: Option<AxisOrder>,
    /// Network sizes of the overhead sweeps.
    pub sizes: Option<Vec<usize>>,
    /// Dimensions of the overhead sweeps.
    pub dims: Option<Vec<usize>>,
    /// Malicious fractions of the robustness sweep.
    pub fractions: Option<Vec<f64>>,
}

impl Overrides {
    /// `base` with every set field replaced.
    pub fn apply(&self, base: SimConfig) -> SimConfig {
        SimConfig {
            overlay: self.overlay.unwrap_or(base.overlay),
            n: self.n.unwrap_or(base.n),
            d: self.d.unwrap_or(base.d),
            seed: self.seed.unwrap_or(base.seed),
            repetitions: self.repetitions.unwrap_or(base.repetitions),
            malicious_fraction: self.malicious_fraction.unwrap_or(base.malicious_fraction),
            algorithm: self.algorithm.unwrap_or(base.algorithm),
            area: self.area.clone().unwrap_or(base.area),
            split_roots: self.split_roots.unwrap_or(base.split_roots),
            alm_axis_order: self.alm_axis_order.unwrap_or(base.alm_axis_order),
        }
    }

    /// Only the fields shared by every simulated scenario.
    fn common(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            repetitions: self.repetitions,
            alm_axis_order: self.alm_axis_order,
            ..Overrides::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    #[serde(default)]
    pub overrides: Overrides,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario) -> Self {
        ScenarioSpec {
            scenario,
            overrides: Overrides::default(),
        }
    }
}

/// One CSV file: a header line and rows of already formatted cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvReport {
    /// File stem.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvReport {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        CsvReport {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn render(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        for row in std::iter::once(&self.header).chain(&self.rows) {
            w.write_record(row).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("cells are UTF-8")
    }

    /// Column-aligned text for terminals.
    pub fn to_table(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(String::len).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.name);
        for row in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            let _ = writeln!(out, "  {}", cells.join("  "));
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join(self.file_name());
        std::fs::write(&path, self.render())?;
        Ok(path)
    }

    /// Cell at (`row`, `column`), by header name.
    pub fn cell(&self, row: usize, column: &str) -> Option<&str> {
        let col = self.header.iter().position(|h| h == column)?;
        self.rows.get(row).map(|r| r[col].as_str())
    }
}

fn fixed(v: f64, precision: usize) -> String {
    // keep "-0.00" out of the files
    let s = format!("{v:.precision$}");
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

const TABLE2_COLUMNS: [(&str, OverlayKind, Algorithm); 4] = [
    ("dtc_can", OverlayKind::Can, Algorithm::Dtc),
    ("simple_flooding", OverlayKind::Can, Algorithm::Flood),
    ("alm", OverlayKind::Can, Algorithm::Alm),
    ("dtc_chord", OverlayKind::Chord, Algorithm::Dtc),
];

pub const FIG5_SIZES: [usize; 13] = [
    200, 300, 500, 700, 1000, 1500, 2000, 3000, 5000, 7000, 10000, 15000, 20000,
];
pub const FIG5_DIMS: [usize; 4] = [5, 10, 15, 20];
pub const FIG6_FRACTIONS: [f64; 7] = [0.0, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2];

fn paper_base(n: usize, d: usize) -> SimConfig {
    SimConfig {
        n,
        d,
        seed: 1,
        repetitions: 30,
        ..SimConfig::default()
    }
}

/// Runs a scenario and returns its reports.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<Vec<CsvReport>> {
    let o = &spec.overrides;
    match spec.scenario {
        Scenario::Table2 => table2(&o.common().apply(SimConfig {
            n: o.n.unwrap_or(2000),
            d: o.d.unwrap_or(10),
            ..paper_base(2000, 10)
        })),
        Scenario::Fig4a => depth_figure(
            "fig4a",
            &o.common()
                .apply(paper_base(o.n.unwrap_or(20000), o.d.unwrap_or(5))),
            false,
        ),
        Scenario::Fig4b => depth_figure(
            "fig4b",
            &o.common()
                .apply(paper_base(o.n.unwrap_or(20000), o.d.unwrap_or(10))),
            true,
        ),
        Scenario::Fig5Absolute | Scenario::Fig5Relative => {
            let base = o.common().apply(paper_base(0, 0));
            let sizes = o.sizes.clone().unwrap_or_else(|| FIG5_SIZES.to_vec());
            let dims = o.dims.clone().unwrap_or_else(|| FIG5_DIMS.to_vec());
            let relative = spec.scenario == Scenario::Fig5Relative;
            Ok(vec![alm_overhead(&base, &sizes, &dims, relative)?])
        }
        Scenario::Fig6 => {
            let base = o
                .common()
                .apply(paper_base(o.n.unwrap_or(20000), o.d.unwrap_or(10)));
            let fractions = o
                .fractions
                .clone()
                .unwrap_or_else(|| FIG6_FRACTIONS.to_vec());
            Ok(vec![fig6(&base, &fractions)?])
        }
        Scenario::Table1 => Ok(vec![table1(o.n.unwrap_or(1_000_000) as u64)?]),
        Scenario::PrefixDemo => prefix_demo_scenario(o),
        Scenario::Custom => {
            let cfg = o.apply(SimConfig::default());
            let m = run(&cfg)?;
            Ok(vec![metrics_report("custom", &m)])
        }
    }
}

fn table2(base: &SimConfig) -> Result<Vec<CsvReport>> {
    let mut results = Vec::new();
    for (_, overlay, algorithm) in TABLE2_COLUMNS {
        results.push(run(&SimConfig {
            overlay,
            algorithm,
            ..base.clone()
        })?);
    }
    let mut header = vec!["messages_received"];
    header.extend(TABLE2_COLUMNS.iter().map(|c| c.0));
    let mut report = CsvReport::new("table2", &header);
    for bin in 0..RECEIVE_BINS {
        let mut row = vec![receive_bin_label(bin)];
        row.extend(results.iter().map(|m| fixed(m.receive_histogram[bin], 2)));
        report.push(row);
    }
    let mut sum = vec!["sum".to_string()];
    sum.extend(results.iter().map(|m| fixed(m.mean_total_messages, 2)));
    report.push(sum);
    Ok(vec![report])
}

fn depth_figure(name: &str, base: &SimConfig, with_chord: bool) -> Result<Vec<CsvReport>> {
    let mut columns = vec![
        ("dtc_can", OverlayKind::Can, Algorithm::Dtc),
        ("alm", OverlayKind::Can, Algorithm::Alm),
        ("simple_flooding", OverlayKind::Can, Algorithm::Flood),
    ];
    if with_chord {
        columns.push(("dtc_chord", OverlayKind::Chord, Algorithm::Dtc));
    }
    let mut results = Vec::new();
    for &(_, overlay, algorithm) in &columns {
        results.push(run(&SimConfig {
            overlay,
            algorithm,
            ..base.clone()
        })?);
    }
    let mut header = vec!["depth"];
    header.extend(columns.iter().map(|c| c.0));
    let mut hist = CsvReport::new(name, &header);
    let deepest = results
        .iter()
        .map(|m| m.depth_histogram.len())
        .max()
        .unwrap_or(0);
    for depth in 0..deepest {
        let mut row = vec![depth.to_string()];
        row.extend(
            results
                .iter()
                .map(|m| fixed(m.depth_histogram.get(depth).copied().unwrap_or(0.0), 2)),
        );
        hist.push(row);
    }
    let mut summary = CsvReport::new(
        format!("{name}_summary"),
        &["algorithm", "mean_depth", "max_depth"],
    );
    for (c, m) in columns.iter().zip(&results) {
        summary.push(vec![
            c.0.to_string(),
            fixed(m.mean_depth, 4),
            m.max_depth.to_string(),
        ]);
    }
    Ok(vec![hist, summary])
}

/// ALM messages beyond one per node (absolute) or relative to the node
/// count, for each size and dimension.
pub fn alm_overhead(
    base: &SimConfig,
    sizes: &[usize],
    dims: &[usize],
    relative: bool,
) -> Result<CsvReport> {
    let columns: Vec<String> = dims.iter().map(|d| format!("alm_d{d}")).collect();
    let mut header = vec!["n"];
    header.extend(columns.iter().map(String::as_str));
    let name = if relative {
        "fig5_relative"
    } else {
        "fig5_absolute"
    };
    let mut report = CsvReport::new(name, &header);
    for &n in sizes {
        let mut row = vec![n.to_string()];
        for &d in dims {
            let m = run(&SimConfig {
                overlay: OverlayKind::Can,
                algorithm: Algorithm::Alm,
                n,
                d,
                ..base.clone()
            })?;
            row.push(if relative {
                fixed(m.overhead_ratio, 4)
            } else {
                fixed(m.mean_total_messages - m.mean_in_area, 2)
            });
        }
        report.push(row);
    }
    Ok(report)
}

fn fig6(base: &SimConfig, fractions: &[f64]) -> Result<CsvReport> {
    let mut report = CsvReport::new(
        "fig6",
        &["malicious_fraction", "dtc_can", "dtc_chord", "alm"],
    );
    for p in malicious_sweep(base, fractions)? {
        report.push(vec![
            fixed(p.fraction, 4),
            fixed(p.dtc_can, 6),
            fixed(p.dtc_chord, 6),
            fixed(p.alm, 6),
        ]);
    }
    Ok(report)
}

/// Prefix lengths, expected nodes for `n` nodes and keyspace shares for
/// split factors 1 and 3 over the default charset. Shares are percentages.
pub fn table1(n: u64) -> Result<CsvReport> {
    let one = PrefixCodec::new(SplitFactor::One);
    let three = PrefixCodec::new(SplitFactor::Three);
    let mut report = CsvReport::new(
        "table1",
        &[
            "prefix_length",
            "nodes_in_area",
            "share_split_factor_1",
            "share_split_factor_3",
        ],
    );
    let word = "JOSEPHINE0";
    for len in 0..=word.len() {
        let a1 = one.prefix_to_area(&word[..len])?;
        let a3 = three.prefix_to_area(&word[..len])?;
        let share3 = if a3.capped {
            String::new()
        } else {
            format!("{:.6e}", 100.0 * a3.share())
        };
        report.push(vec![
            len.to_string(),
            expected_nodes_in_area(n, &a1).to_string(),
            format!("{:.6e}", 100.0 * a1.share()),
            share3,
        ]);
    }
    Ok(report)
}

fn metrics_report(name: &str, m: &AggregateMetrics) -> CsvReport {
    let mut r = CsvReport::new(name, &["metric", "value"]);
    let mut put = |k: &str, v: String| r.push(vec![k.to_string(), v]);
    put("repetitions", m.repetitions.to_string());
    put("mean_total_messages", fixed(m.mean_total_messages, 2));
    put("mean_in_area", fixed(m.mean_in_area, 2));
    put("overhead_ratio", fixed(m.overhead_ratio, 4));
    put("mean_depth", fixed(m.mean_depth, 4));
    put("max_depth", m.max_depth.to_string());
    put("unreached_fraction", fixed(m.unreached_fraction, 6));
    put("response_gap_fraction", fixed(m.response_gap_fraction, 6));
    put("exactly_once", m.exactly_once.to_string());
    for bin in 0..RECEIVE_BINS {
        put(
            &format!("received_{}", receive_bin_label(bin)),
            fixed(m.receive_histogram[bin], 2),
        );
    }
    r
}

/// A CAN with keys stored at the nodes owning their quadtree positions.
pub struct PrefixIndex {
    pub codec: PrefixCodec,
    pub net: CanNetwork,
    store: Vec<BTreeSet<String>>,
}

/// Outcome of one prefix search.
#[derive(Clone, Debug)]
pub struct PrefixSearch {
    pub prefix: String,
    /// Matching keys, upper-cased and sorted.
    pub matches: Vec<String>,
    pub messages: u64,
    pub nodes_in_area: usize,
    pub root: NodeId,
    pub stats: TreeStats,
    pub coverage: CoverageReport,
}

impl PrefixIndex {
    pub fn build(
        n: usize,
        d: usize,
        keys: &[String],
        codec: PrefixCodec,
        rng: &mut SimRng,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("cannot search an empty network"));
        }
        codec.validate()?;
        let net = build_can(n, d, rng)?;
        let mut store = vec![BTreeSet::new(); n];
        for key in keys {
            let p = codec.key_to_point(key, d)?;
            store[net.owner(&p)?.index()].insert(key.to_uppercase());
        }
        Ok(PrefixIndex { codec, net, store })
    }

    pub fn stored(&self, node: NodeId) -> &BTreeSet<String> {
        &self.store[node.index()]
    }

    /// Spans a tree over the prefix's cell from a random node of the cell and
    /// gathers the matching keys from the responses.
    pub fn search(&self, prefix: &str, rng: &mut SimRng) -> Result<PrefixSearch> {
        let area = AreaSpec::CanBox(self.codec.prefix_to_area(prefix)?.to_box(self.net.dims())?);
        let overlay = Overlay::Can(&self.net);
        let root = pick_root(overlay, &area, rng)?;
        let faults = FaultModel::none();
        let stats = span_tree(overlay, root, &area, &faults)?;
        let coverage = collect_responses(&stats, overlay, &area, &faults)?;
        let folded = prefix.to_uppercase();
        let mut matches: Vec<String> = coverage
            .responders
            .iter()
            .flat_map(|&v| self.store[v.index()].iter())
            .filter(|k| k.starts_with(&folded))
            .cloned()
            .collect();
        matches.sort();
        Ok(PrefixSearch {
            prefix: prefix.to_string(),
            matches,
            messages: stats.total_messages,
            nodes_in_area: stats.in_area_count(),
            root,
            stats,
            coverage,
        })
    }
}

/// Keys starting with `prefix`, by scanning them all.
pub fn linear_scan(keys: &[String], prefix: &str) -> Vec<String> {
    let folded = prefix.to_uppercase();
    let set: BTreeSet<String> = keys
        .iter()
        .map(|k| k.to_uppercase())
        .filter(|k| k.starts_with(&folded))
        .collect();
    set.into_iter().collect()
}

/// Builds an `n`-node plane CAN holding `keys` and searches it for `prefix`.
pub fn prefix_search_demo(
    n: usize,
    keys: &[String],
    prefix: &str,
    split_factor: SplitFactor,
    seed: u64,
) -> Result<PrefixSearch> {
    let mut rng = SimRng::new(seed);
    let index = PrefixIndex::build(n, 2, keys, PrefixCodec::new(split_factor), &mut rng)?;
    index.search(prefix, &mut rng)
}

/// Newline-separated keys; blank lines are skipped.
pub fn parse_keys(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

/// `count` random keys of 3 to 10 symbols over the default charset.
pub fn random_keys(count: usize, rng: &mut SimRng) -> Vec<String> {
    let symbols: Vec<char> = DEFAULT_CHARSET.chars().collect();
    (0..count)
        .map(|_| {
            let len = 3 + rng.index(8);
            (0..len)
                .map(|_| symbols[rng.index(symbols.len())])
                .collect()
        })
        .collect()
}

/// A random query prefix of 1 to 3 symbols: half the time taken from a
/// stored key, otherwise drawn freely.
pub fn random_prefix(keys: &[String], rng: &mut SimRng) -> String {
    let len = 1 + rng.index(3);
    if !keys.is_empty() && rng.index(2) == 0 {
        let k = &keys[rng.index(keys.len())];
        k.chars().take(len).collect()
    } else {
        let symbols: Vec<char> = DEFAULT_CHARSET.chars().collect();
        (0..len)
            .map(|_| symbols[rng.index(symbols.len())])
            .collect()
    }
}

fn prefix_demo_scenario(o: &Overrides) -> Result<Vec<CsvReport>> {
    let seed = o.seed.unwrap_or(1);
    let n = o.n.unwrap_or(1000);
    let queries = o.repetitions.unwrap_or(100);
    let mut rng = SimRng::fork(seed, 0);
    let keys = random_keys(10_000, &mut rng);
    let mut report = CsvReport::new(
        "prefix_demo",
        &[
            "split_factor",
            "prefix",
            "matches",
            "oracle_matches",
            "nodes_in_area",
            "messages",
        ],
    );
    for (i, factor) in [SplitFactor::Half, SplitFactor::One, SplitFactor::Three]
        .into_iter()
        .enumerate()
    {
        let mut rng = SimRng::fork(seed, 1 + i as u64);
        let index = PrefixIndex::build(n, 2, &keys, PrefixCodec::new(factor), &mut rng)?;
        for _ in 0..queries {
            let prefix = random_prefix(&keys, &mut rng);
            let found = index.search(&prefix, &mut rng)?;
            report.push(vec![
                factor.to_string(),
                prefix.clone(),
                found.matches.len().to_string(),
                linear_scan(&keys, &prefix).len().to_string(),
                found.nodes_in_area.to_string(),
                found.messages.to_string(),
            ]);
        }
    }
    Ok(vec![report])
}
