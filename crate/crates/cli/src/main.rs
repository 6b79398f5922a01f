use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use refim_core::config::{self, config_hash};
use refim_core::engine::{self, Algorithm, Scenario, SpectrumPolicy, SweepAxis};
use refim_core::oracle;
use refim_core::report::{self, SweepRow};
use refim_core::Result;

/// Downlink multi-cell simulator: EQ, WF and REFIM power allocation with
/// proportional-fair scheduling.
#[derive(Parser, Debug)]
#[command(name = "refim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write summary.json and users.csv.
    Run {
        /// Scenario file or preset name.
        config: String,
        #[command(flatten)]
        common: Common,
        /// Also write powers.csv (per-slot transmit powers).
        #[arg(long)]
        dump_powers: bool,
        /// Also write schedule.csv (per-slot scheduled users and rates).
        #[arg(long)]
        dump_schedule: bool,
        /// Also write protocol.csv (backhaul messages).
        #[arg(long)]
        dump_protocol: bool,
    },
    /// One run per value of an axis, written to sweep.csv.
    Sweep {
        config: String,
        #[command(flatten)]
        common: Common,
        /// feedback_period, split_ratio, femto_density, ref_count, loop_caps or deployment_fraction.
        #[arg(long)]
        axis: String,
        /// Comma list (`1,10,50`) or inclusive range (`0..16`).
        #[arg(long)]
        values: String,
    },
    /// Compare EQ, WF and REFIM against the exhaustive optimum on a toy instance.
    Oracle {
        /// `toy` or a TOML file with toy-instance fields.
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of consecutive seeds to evaluate.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Power levels per subchannel.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Print a scenario (preset or file) as TOML after merging.
    Show { config: String },
    /// Write the scenario's network as JSON.
    Network {
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "network.json")]
        out: PathBuf,
    },
    /// List presets.
    Presets,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// eq, wf, refim or general.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    slots: Option<u64>,
}

impl Common {
    fn apply(&self, sc: &mut Scenario) -> Result<()> {
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        if let Some(a) = &self.algo {
            sc.algorithm = Algorithm::parse(a)?;
        }
        if let Some(slots) = self.slots {
            sc.slots = slots;
            if sc.warmup_slots >= slots {
                sc.warmup_slots = slots / 4;
            }
        }
        sc.validate()
    }
}

fn print_metrics(label: &str, r: &engine::RunResult) {
    println!(
        "{:<16} {:>14.1} {:>14.1} {:>14.1}",
        label,
        r.gat_bps / 1e3,
        r.aet_bps / 1e3,
        r.aat_bps / 1e3
    );
}

fn print_header(first: &str) {
    println!("{:<16} {:>14} {:>14} {:>14}", first, "GAT kbps", "AET kbps", "AAT kbps");
}

fn cmd_run(config: &str, common: &Common, powers: bool, schedule: bool, protocol: bool) -> Result<()> {
    let mut sc = config::load_scenario(config)?;
    common.apply(&mut sc)?;
    sc.trace.powers |= powers;
    sc.trace.schedule |= schedule;
    sc.trace.protocol |= protocol;
    let hash = config_hash(&sc);
    info!("running {} slots, seed {}, config {}", sc.slots, sc.seed, &hash[..12]);
    let result = engine::run(&sc)?;
    report::write_run(&common.out, &result, &sc, &hash)?;
    print_header("algorithm");
    print_metrics(result.algorithm.as_str(), &result);
    Ok(())
}

fn cmd_sweep(config: &str, common: &Common, axis: &str, values: &str) -> Result<()> {
    let mut base = config::load_scenario(config)?;
    common.apply(&mut base)?;
    let axis = SweepAxis::parse(axis)?;
    let values = engine::expand_values(values)?;
    // validate every point before spending time on any run
    let scenarios: Vec<Scenario> = values
        .iter()
        .map(|v| engine::apply_axis(&base, axis, v))
        .collect::<Result<_>>()?;
    print_header(axis.as_str());
    let mut rows = Vec::new();
    for (sc, v) in scenarios.iter().zip(&values) {
        let result = engine::run(sc)?;
        print_metrics(v, &result);
        rows.push(SweepRow::new(
            &engine::SweepPoint {
                axis,
                value: v.clone(),
                result,
            },
            sc,
        ));
    }
    if axis == SweepAxis::SplitRatio {
        let sharing = Scenario {
            spectrum_policy: SpectrumPolicy::Sharing,
            ..base.clone()
        };
        let result = engine::run(&sharing)?;
        print_metrics("sharing", &result);
        rows.push(SweepRow::baseline(axis.as_str(), &sharing, &result));
    }
    std::fs::create_dir_all(&common.out)?;
    let mut f = report::create(&common.out.join("sweep.csv"))?;
    report::write_sweep(&mut f, &rows)?;
    f.flush()?;
    Ok(())
}

fn cmd_oracle(config: &str, seed: Option<u64>, seeds: u64, levels: Option<usize>) -> Result<()> {
    let mut spec = config::load_toy(config)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(l) = levels {
        spec.grid.levels = l;
    }
    let first = spec.seed;
    println!(
        "{:>6} {:>12} {:>12} {:>12} {:>12} {:>8} {:>8} {:>8}",
        "seed", "oracle h", "EQ h", "WF h", "REFIM h", "EQ %", "WF %", "REFIM %"
    );
    for s in first..first + seeds.max(1) {
        spec.seed = s;
        let c = oracle::compare(&spec)?;
        println!(
            "{:>6} {:>12.5} {:>12.5} {:>12.5} {:>12.5} {:>8.2} {:>8.2} {:>8.2}",
            s,
            c.oracle,
            c.eq,
            c.wf,
            c.refim,
            100.0 * c.ratio(c.eq),
            100.0 * c.ratio(c.wf),
            100.0 * c.ratio(c.refim)
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            common,
            dump_powers,
            dump_schedule,
            dump_protocol,
        } => cmd_run(&config, &common, dump_powers, dump_schedule, dump_protocol),
        Command::Sweep {
            config,
            common,
            axis,
            values,
        } => cmd_sweep(&config, &common, &axis, &values),
        Command::Oracle {
            config,
            seed,
            seeds,
            levels,
        } => cmd_oracle(&config, seed, seeds, levels),
        Command::Show { config } => {
            print!("{}", config::to_toml(&config::load_scenario(&config)?)?);
            Ok(())
        }
        Command::Network { config, seed, out } => {
            let mut sc = config::load_scenario(&config)?;
            if let Some(s) = seed {
                sc.seed = s;
            }
            let net = sc.build_network()?;
            std::fs::write(&out, net.to_json()?)?;
            Ok(())
        }
        Command::Presets => {
            for p in engine::PRESETS {
                println!("{p}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
