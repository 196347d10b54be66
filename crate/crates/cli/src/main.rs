use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use nurbs_ett::tracker::Method;
use nurbs_ett_cli::{
    cmd_eval, cmd_mesh, cmd_simulate, cmd_track, error_line, write_report, Preset, SimulateArgs,
    TrackArgs,
};

#[derive(Parser)]
#[command(name = "nurbs-ett", version, about = "Extended target tracking with NURBS shape models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: nurbs_ett::Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic lidar sequence.
    Simulate {
        #[arg(long, value_enum, default_value = "static")]
        preset: Preset,
        /// TOML overrides on top of the preset.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track a simulated sequence and write per-frame records.
    Track {
        /// Directory written by `simulate`.
        #[arg(long)]
        frames: PathBuf,
        #[arg(long, value_enum, default_value = "static")]
        preset: Preset,
        #[arg(long)]
        tracker_config: Option<PathBuf>,
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[arg(long)]
        out: PathBuf,
        /// Record zero step time so repeated runs are byte-identical.
        #[arg(long)]
        zero_time: bool,
    },
    /// Summarize record files as RMSE rows.
    Eval {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        /// Leave the orientation column empty.
        #[arg(long)]
        no_yaw: bool,
        /// Also write the table to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a tracked shape as an OBJ mesh.
    Mesh {
        /// Snapshot file or a `track` output directory.
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        grid_u: usize,
        #[arg(long, default_value_t = 32)]
        grid_v: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            preset,
            scenario,
            seed,
            out,
        } => {
            let m = cmd_simulate(&SimulateArgs {
                preset,
                scenario: scenario.as_deref(),
                seed,
                out: &out,
            })?;
            println!("wrote {} files to {}", m.files.len(), out.display());
        }
        Command::Track {
            frames,
            preset,
            tracker_config,
            method,
            out,
            zero_time,
        } => {
            let m = cmd_track(&TrackArgs {
                frames: &frames,
                preset,
                tracker_config: tracker_config.as_deref(),
                method,
                out: &out,
                zero_time,
            })?;
            println!("wrote {} files to {}", m.files.len(), out.display());
        }
        Command::Eval {
            records,
            no_yaw,
            out,
        } => {
            let rows = cmd_eval(&records, !no_yaw)?;
            write_report(std::io::stdout().lock(), &rows)?;
            if let Some(path) = out {
                write_report(std::fs::File::create(path)?, &rows)?;
            }
        }
        Command::Mesh {
            snapshot,
            out,
            grid_u,
            grid_v,
        } => {
            let n = cmd_mesh(&snapshot, &out, grid_u, grid_v)?;
            println!("wrote {n} vertices to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
