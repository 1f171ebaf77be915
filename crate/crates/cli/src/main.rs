use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dtc_core::experiments::{
    parse_keys, prefix_search_demo, run_scenario, Overrides, Scenario, ScenarioSpec,
};
use dtc_core::prefix::SplitFactor;
use serde::Deserialize as _;

const OUT_DIR_VAR: &str = "DTC_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "dtc",
    version,
    about = "Distributed tree construction experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a named scenario and write its CSV files.
    Run(RunArgs),
    /// Demonstrations over a simulated network.
    #[command(subcommand)]
    Demo(Demo),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// table2, fig4a, fig4b, fig5-absolute, fig5-relative, fig6, table1,
    /// prefix-demo or custom.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Output directory [default: $DTC_OUT_DIR, else ./results].
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file with scenario parameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Demo {
    /// Store keys in a CAN and search it for a prefix.
    Prefix {
        #[arg(long)]
        n: usize,
        /// File of newline-separated keys.
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        prefix: String,
        #[arg(long, default_value = "1")]
        split_factor: SplitFactor,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Contents of a `--config` file: optional `scenario` and `out` keys, the
/// rest are scenario parameters.
#[derive(Debug, Default)]
struct ConfigFile {
    scenario: Option<String>,
    out: Option<PathBuf>,
    overrides: Overrides,
}

fn read_config(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut table: toml::Table = text
        .parse()
        .with_context(|| format!("parsing {}", path.display()))?;
    let take_str = |table: &mut toml::Table, key: &str| -> Result<Option<String>> {
        match table.remove(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(other) => bail!("{key} must be a string, found {}", other.type_str()),
        }
    };
    let scenario = take_str(&mut table, "scenario")?;
    let out = take_str(&mut table, "out")?.map(PathBuf::from);
    let overrides = Overrides::deserialize(table)
        .with_context(|| format!("invalid parameters in {}", path.display()))?;
    Ok(ConfigFile {
        scenario,
        out,
        overrides,
    })
}

fn run(args: RunArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => read_config(path)?,
        None => ConfigFile::default(),
    };
    let name = args
        .scenario
        .or(file.scenario)
        .context("no scenario given; pass --scenario or set `scenario` in the config file")?;
    let scenario: Scenario = name.parse()?;
    let mut overrides = file.overrides;
    if args.seed.is_some() {
        overrides.seed = args.seed;
    }
    if args.repetitions.is_some() {
        overrides.repetitions = args.repetitions;
    }
    let out = args
        .out
        .or(file.out)
        .or_else(|| std::env::var_os(OUT_DIR_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));

    let reports = run_scenario(&ScenarioSpec {
        scenario,
        overrides,
    })?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    for report in &reports {
        let path = report
            .write_to(&out)
            .with_context(|| format!("writing into {}", out.display()))?;
        let mut stdout = io::stdout().lock();
        write!(stdout, "{}", report.to_table())?;
        writeln!(stdout, "  -> {}", path.display())?;
    }
    Ok(())
}

fn demo_prefix(
    n: usize,
    keys: &Path,
    prefix: &str,
    split_factor: SplitFactor,
    seed: u64,
) -> Result<()> {
    let text = fs::read_to_string(keys).with_context(|| format!("reading {}", keys.display()))?;
    let keys = parse_keys(&text);
    let found = prefix_search_demo(n, &keys, prefix, split_factor, seed)?;
    let mut stdout = io::stdout().lock();
    for key in &found.matches {
        writeln!(stdout, "{key}")?;
    }
    writeln!(
        stdout,
        "prefix {:?}: {} matches, {} messages, {} nodes in area, root {}",
        found.prefix,
        found.matches.len(),
        found.messages,
        found.nodes_in_area,
        found.root
    )?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Demo(Demo::Prefix {
            n,
            keys,
            prefix,
            split_factor,
            seed,
        }) => demo_prefix(n, &keys, &prefix, split_factor, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // a closed pipe (`dtc ... | head`) is not worth a diagnostic
        Err(e)
            if e.downcast_ref::<io::Error>().map(io::Error::kind)
                == Some(io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
