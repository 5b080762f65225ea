//! Experiment CLI: density sweeps, the group tree demo, the memory report,
//! and the revocation demo. Every command is deterministic per seed and
//! exits 0 only when all verdicts are OK.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use tklu::experiment::{
    parse_format, parse_range, run_group_demo, run_memory_report, run_revoke_demo, run_sweep,
    ExperimentConfig,
};

#[derive(Parser)]
#[command(
    name = "tklu",
    version,
    about = "Sensor-network key establishment experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-node-count timing and message counts: full-mesh pairwise
    /// establishment, sampled path keys, and a group over all nodes.
    Sweep(CommonArgs),
    /// Build a group key tree, print it round by round, and verify that all
    /// members agree on the key.
    GroupDemo(CommonArgs),
    /// Per-node stored-key counts against the k + ceil(log2(group))
    /// prediction on a freshly established network.
    MemoryReport(CommonArgs),
    /// Establish a network, revoke a node, and audit the surviving stores.
    RevokeDemo(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Node count for single-network commands.
    #[arg(long)]
    nodes: Option<u32>,
    /// Inclusive node range for the sweep, e.g. 2..20.
    #[arg(long)]
    range: Option<String>,
    /// Key-size bound in bits; the field prime is the smallest prime above
    /// 2^bits.
    #[arg(long)]
    key_bits: Option<u32>,
    /// Curve preset (toy | test64 | p192) or a path to a curve config file.
    #[arg(long)]
    curve: Option<String>,
    /// Cluster size for group establishment.
    #[arg(long)]
    group_size: Option<u32>,
    /// Radio range in the unit square, in (0, sqrt(2)].
    #[arg(long)]
    radio_range: Option<f64>,
    #[arg(long)]
    seed_topology: Option<u64>,
    #[arg(long)]
    seed_protocol: Option<u64>,
    /// Latency preset: mote | zero.
    #[arg(long)]
    latency_preset: Option<String>,
    /// Output format: csv | json.
    #[arg(long)]
    format: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Node to revoke (revoke-demo only).
    #[arg(long)]
    victim: Option<u32>,
}

impl CommonArgs {
    fn build_config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                ExperimentConfig::from_kv_str(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(nodes) = self.nodes {
            config.nodes = nodes;
        }
        if let Some(range) = &self.range {
            config.range = parse_range(range)?;
        }
        if let Some(bits) = self.key_bits {
            config.key_bits = bits;
        }
        if let Some(curve) = &self.curve {
            config.curve = curve.clone();
        }
        if let Some(size) = self.group_size {
            config.group_size = size;
        }
        if let Some(range) = self.radio_range {
            config.radio_range = range;
        }
        if let Some(seed) = self.seed_topology {
            config.seed_topology = seed;
        }
        if let Some(seed) = self.seed_protocol {
            config.seed_protocol = seed;
        }
        if let Some(preset) = &self.latency_preset {
            config.latency_preset = preset.clone();
        }
        if let Some(format) = &self.format {
            config.format = parse_format(format)?;
        }
        if let Some(victim) = self.victim {
            config.victim = Some(victim);
        }
        Ok(config)
    }

    fn emit(&self, rendered: &str) -> Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, rendered)
                .with_context(|| format!("writing {}", path.display()))?,
            None => print!("{rendered}"),
        }
        Ok(())
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let ok = match &cli.command {
        Command::Sweep(args) => {
            let report = run_sweep(&args.build_config()?)?;
            args.emit(&report.render())?;
            report.verdict_ok()
        }
        Command::GroupDemo(args) => {
            let report = run_group_demo(&args.build_config()?)?;
            args.emit(&report.render())?;
            report.verdict_ok()
        }
        Command::MemoryReport(args) => {
            let report = run_memory_report(&args.build_config()?)?;
            args.emit(&report.render())?;
            report.verdict_ok()
        }
        Command::RevokeDemo(args) => {
            let report = run_revoke_demo(&args.build_config()?)?;
            args.emit(&report.render())?;
            report.verdict_ok()
        }
    };
    if !ok {
        std::process::exit(1);
    }
    Ok(())
}
