use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use beaconquiz::config::{load_config, AppConfig, Mode};
use beaconquiz::protocol::snapshot_json;
use beaconquiz::room::Point;
use beaconquiz::scanlog::write_scan_log;
use beaconquiz::server;
use beaconquiz::sim::{PlayerPath, Simulator};

#[derive(Parser)]
#[command(name = "beaconquiz", version, about = "BLE indoor-positioning quiz server and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the game server.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        replay_file: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        questions: Option<PathBuf>,
        /// Write a replayable session log.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Replay a session log headlessly.
    Replay {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        replay_file: PathBuf,
        /// Exit non-zero unless the replay ends in this phase.
        #[arg(long)]
        assert_final_phase: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        questions: Option<PathBuf>,
        /// Write every snapshot frame, one per line.
        #[arg(long)]
        snapshots_out: Option<PathBuf>,
    },
    /// Generate a scan log for a scripted walk.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Waypoints in normalized room coordinates: `x,y;x,y;...`.
        #[arg(long)]
        path: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Keep broadcasting this long after the last waypoint.
        #[arg(long, default_value_t = 1000)]
        hold_ms: u64,
    },
}

fn config_from(path: Option<&PathBuf>) -> anyhow::Result<AppConfig> {
    match path {
        Some(p) => Ok(load_config(p)?),
        None => Ok(AppConfig::default()),
    }
}

fn parse_waypoints(text: &str) -> anyhow::Result<Vec<Point>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (x, y) = pair
                .split_once(',')
                .with_context(|| format!("waypoint `{pair}` is not `x,y`"))?;
            Ok(Point::new(x.trim().parse()?, y.trim().parse()?))
        })
        .collect()
}

fn normalize_phase(name: &str) -> String {
    name.trim().to_ascii_lowercase().replace(['-', ' '], "_")
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();

    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Serve {
            config,
            mode,
            replay_file,
            seed,
            listen,
            questions,
            record,
        } => {
            let mut cfg = config_from(config.as_ref())?;
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if replay_file.is_some() {
                cfg.replay_path = replay_file;
            }
            if let Some(l) = listen {
                cfg.listen = l;
            }
            if questions.is_some() {
                cfg.questions_path = questions;
            }
            cfg.validate()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::run(cfg, seed, record))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay {
            config,
            replay_file,
            assert_final_phase,
            seed,
            questions,
            snapshots_out,
        } => {
            let mut cfg = config_from(config.as_ref())?;
            cfg.mode = Mode::Replay;
            cfg.replay_path = Some(replay_file);
            if questions.is_some() {
                cfg.questions_path = questions;
            }
            cfg.validate()?;
            let mut engine = server::build_engine(&cfg, seed)?;
            let mut out = match &snapshots_out {
                Some(p) => Some(BufWriter::new(
                    File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
                )),
                None => None,
            };
            let mut last = engine.snapshot();
            while !engine.is_finished() {
                last = engine.tick()?;
                if let Some(w) = &mut out {
                    writeln!(w, "{}", snapshot_json(&last))?;
                }
            }
            if let Some(mut w) = out {
                w.flush()?;
            }
            println!(
                "final phase: {} (seq {}, level {}/{})",
                last.phase,
                last.seq,
                last.score_level,
                engine.bank().len()
            );
            if let Some(expected) = assert_final_phase {
                let expected = normalize_phase(&expected);
                if expected != last.phase {
                    eprintln!("expected final phase {expected}, got {}", last.phase);
                    return Ok(ExitCode::FAILURE);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            config,
            path,
            out,
            seed,
            hold_ms,
        } => {
            let cfg = config_from(config.as_ref())?;
            let room = cfg.room_model()?;
            let points = parse_waypoints(&path)?;
            if points.is_empty() {
                bail!("--path needs at least one waypoint");
            }
            let meters: Vec<Point> = points.iter().map(|p| room.from_normalized(*p)).collect();
            let walk = PlayerPath::walk(0, &meters, cfg.walk_speed_mps)?;
            let mut sim = Simulator::new(room, seed.unwrap_or(cfg.seed));
            let samples = sim.advance(&walk, walk.end_ms() + hold_ms)?;
            let file = File::create(&out).with_context(|| format!("cannot create {}", out.display()))?;
            write_scan_log(&samples, BufWriter::new(file))?;
            eprintln!("wrote {} samples to {}", samples.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waypoint_parsing() {
        let pts = parse_waypoints("0.5,0.5; 0.1,0.9;").unwrap();
        assert_eq!(pts, vec![Point::new(0.5, 0.5), Point::new(0.1, 0.9)]);
        assert!(parse_waypoints("0.5").is_err());
    }

    #[test]
    fn phase_names() {
        assert_eq!(normalize_phase("Won"), "won");
        assert_eq!(normalize_phase("game-over"), "game_over");
    }
}
