//! `oocmem-bench`: run the out-of-core manager's benchmark scenarios.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use oocmem::SwapPolicy;
use oocmem_bench::{emit_report, run_scenario, Format, Scenario, ScenarioConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    #[value(alias = "sequential_scan")]
    SequentialScan,
    #[value(alias = "random_access")]
    RandomAccess,
    #[value(alias = "nbody_accumulate")]
    NbodyAccumulate,
    #[value(alias = "matrix_transpose")]
    MatrixTranspose,
    #[value(alias = "const_vs_mut")]
    ConstVsMut,
    #[value(alias = "preemptive_onoff")]
    PreemptiveOnoff,
}

impl From<ScenarioArg> for Scenario {
    fn from(value: ScenarioArg) -> Scenario {
        match value {
            ScenarioArg::SequentialScan => Scenario::SequentialScan,
            ScenarioArg::RandomAccess => Scenario::RandomAccess,
            ScenarioArg::NbodyAccumulate => Scenario::NbodyAccumulate,
            ScenarioArg::MatrixTranspose => Scenario::MatrixTranspose,
            ScenarioArg::ConstVsMut => Scenario::ConstVsMut,
            ScenarioArg::PreemptiveOnoff => Scenario::PreemptiveOnoff,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Fail,
    Interactive,
    Autoextend,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

/// Benchmark scenarios for the oocmem out-of-core memory manager.
///
/// CSV output has the fixed columns
/// scenario,phase,wall_time_ms,miss_count,prefetch_hit_count,
/// blocked_wait_count,bytes_written,bytes_read,peak_resident_bytes
/// with one row per phase and a final `total` row.
///
/// Exit codes: 0 on success, 1 on scenario failure, 2 on configuration
/// errors.
#[derive(Parser, Debug)]
#[command(name = "oocmem-bench", version, about)]
struct Cli {
    /// Scenario to run.
    #[arg(value_enum)]
    scenario: ScenarioArg,

    /// RAM budget in bytes.
    #[arg(long, default_value_t = 64 << 20)]
    ram_limit: u64,

    /// Total managed data in bytes.
    #[arg(long, default_value_t = 256 << 20)]
    data_bytes: u64,

    /// Size of one managed block in bytes.
    #[arg(long, default_value_t = 1 << 20)]
    element_bytes: u64,

    /// Percentage of each block written (or read) per touch.
    #[arg(long, default_value_t = 10.0)]
    load: f64,

    /// Additional computational load per touched element, in milliseconds.
    #[arg(long, default_value_t = 0.0)]
    compute_ms: f64,

    /// Seed for the access pattern (mandatory determinism knob).
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Worker threads driving the scan scenarios.
    #[arg(long, default_value_t = 1)]
    threads: usize,

    /// Pre-emptive prefetching.
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    preemptive: Toggle,

    /// Reaction to a full swap.
    #[arg(long, value_enum, default_value_t = PolicyArg::Autoextend)]
    policy: PolicyArg,

    /// Touches in the scan scenarios (default: one pass over the data).
    #[arg(long)]
    iterations: Option<u64>,

    /// Keep swap files in this directory instead of a fresh temp dir.
    #[arg(long)]
    swap_dir: Option<PathBuf>,

    /// Export the sampled diagnostic timeline (CSV) to this path.
    #[arg(long)]
    timeline: Option<PathBuf>,

    /// Dump the raw event trace (one JSON object per line) to this path.
    #[arg(long)]
    dump_events: Option<PathBuf>,

    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = ScenarioConfig::new(cli.scenario.into());
    cfg.ram_limit = cli.ram_limit;
    cfg.data_bytes = cli.data_bytes;
    cfg.element_bytes = cli.element_bytes;
    cfg.load_percent = cli.load;
    cfg.compute_ms = cli.compute_ms;
    cfg.seed = cli.seed;
    cfg.threads = cli.threads;
    cfg.preemptive = matches!(cli.preemptive, Toggle::On);
    cfg.policy = match cli.policy {
        PolicyArg::Fail => SwapPolicy::Fail,
        PolicyArg::Interactive => SwapPolicy::Interactive,
        PolicyArg::Autoextend => SwapPolicy::Autoextend,
    };
    cfg.iterations = cli.iterations;
    cfg.swap_dir = cli.swap_dir;
    cfg.timeline = cli.timeline;
    cfg.dump_events = cli.dump_events;
    if let Err(msg) = cfg.validate() {
        eprintln!("configuration error: {msg}");
        return ExitCode::from(2);
    }
    let report = match run_scenario(&cfg) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("scenario failed: {e}");
            return ExitCode::from(1);
        }
    };
    let format = match cli.format {
        FormatArg::Text => Format::Text,
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let mut stdout = std::io::stdout().lock();
    if emit_report(&report, format, &mut stdout).is_err() {
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
