use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use fncc_core::scenario::presets;
use fncc_core::scenario::runner::{default_out_root, load_scenario, resolve, run_scenario, run_sweep};
use fncc_core::Topology;

#[derive(Parser)]
#[command(name = "fncc-sim", version, about = "Packet-level data-center congestion control simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario file or preset.
    Run {
        /// Scenario file or preset name.
        config: String,
        /// Output directory (default: $SIM_OUT/<name>).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Override a config value, e.g. cc.eta=0.9. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Shortcut for --set cc.mode=MODE.
        #[arg(long, value_parser = ["FNCC", "FNCC_no_LHCS", "HPCC"])]
        mode: Option<String>,
        /// Also write topology.json.
        #[arg(long)]
        dump_topology: bool,
    },
    /// Run a scenario once per value of one config key, in parallel.
    Sweep {
        config: String,
        /// Dotted config key, e.g. topology.rate or cc.mode.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, value_parser = ["FNCC", "FNCC_no_LHCS", "HPCC"])]
        mode: Option<String>,
    },
    /// Inspect shipped presets.
    Presets {
        #[command(subcommand)]
        cmd: PresetCmd,
    },
}

#[derive(Subcommand)]
enum PresetCmd {
    /// List preset names with a one-line description.
    List,
    /// Print a preset's scenario file.
    Show { name: String },
}

fn overrides(mut set: Vec<String>, mode: Option<String>) -> Vec<String> {
    if let Some(m) = mode {
        set.push(format!("cc.mode=\"{m}\""));
    }
    set
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run {
            config,
            out,
            set,
            mode,
            dump_topology,
        } => {
            let sc = load_scenario(&config, &overrides(set, mode))?;
            let out = out.unwrap_or_else(|| default_out_root().join(&sc.config.name));
            let started = std::time::Instant::now();
            let run = run_scenario(&sc, Some(&out))?;
            if dump_topology {
                let topo: Topology = fncc_core::scenario::runner::build_topology(&sc.config)?;
                let p = out.join("topology.json");
                std::fs::write(&p, topo.to_json()).with_context(|| format!("writing {}", p.display()))?;
            }
            let s = &run.summary;
            println!(
                "{} [{}] events={} flows={}/{} peak_queue={}B pause_frames={} utilization={:.3} wall={:.2?}",
                s.name,
                s.mode,
                s.events,
                s.flows_completed,
                s.flows_scheduled,
                s.peak_queue_bytes,
                s.pause_frames,
                s.mean_utilization,
                started.elapsed()
            );
            println!("wrote {}", out.display());
            Ok(())
        }
        Cmd::Sweep {
            config,
            axis,
            values,
            out,
            set,
            mode,
        } => {
            let ov = overrides(set, mode);
            let name = resolve(&load_scenario(&config, &ov)?)?.config.name;
            let out = out.unwrap_or_else(|| default_out_root().join(format!("{name}-sweep")));
            let report = run_sweep(&config, &ov, &axis, &values, &out)?;
            println!("{:<20} {:<14} {:>14} {:>8} {:>8}", axis, "mode", "peak_queue_B", "pauses", "util");
            for r in &report.rows {
                match &r.error {
                    Some(e) => println!("{:<20} FAILED: {e}", r.value),
                    None => println!(
                        "{:<20} {:<14} {:>14} {:>8} {:>8.3}",
                        r.value,
                        r.mode.as_deref().unwrap_or(""),
                        r.peak_queue_bytes.unwrap_or(0),
                        r.pause_frames.unwrap_or(0),
                        r.mean_utilization.unwrap_or(0.0)
                    ),
                }
            }
            println!("wrote {}", out.display());
            if report.failures() > 0 {
                bail!("{} of {} sweep runs failed", report.failures(), report.rows.len());
            }
            Ok(())
        }
        Cmd::Presets { cmd } => {
            match cmd {
                PresetCmd::List => {
                    for name in presets::preset_names() {
                        let text = presets::preset(name).expect("listed");
                        println!("{name:<22} {}", presets::describe(text));
                    }
                }
                PresetCmd::Show { name } => match presets::preset(&name) {
                    Some(text) => print!("{text}"),
                    None => bail!("unknown preset {name:?}"),
                },
            }
            Ok(())
        }
    }
}
