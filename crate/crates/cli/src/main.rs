use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use voicecue_cli::analyze::{analyze, load_inputs, write_analysis};
use voicecue_cli::batch::{load_profiles, simulate, SimulateOptions};
use voicecue_cli::report::report;
use voicecue_cli::server::{serve, AppState};
use voicecue_cli::synth::synth_to_file;
use voicecue_core::harness::{Experiment, HarnessConfig, HarnessService};
use voicecue_core::stimgen::Inventory;

#[derive(Parser)]
#[command(name = "voicecue", version, about = "Voice-cue discrimination and gender categorisation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one RMS-equalized stimulus as WAV.
    Synth {
        /// Syllable labels or indices, e.g. `ba di ku`.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        syllables: Vec<String>,
        /// Gender-test word id instead of syllables.
        #[arg(long, conflicts_with = "syllables")]
        word: Option<String>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        f0: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        vtl: f64,
        #[arg(long)]
        rms: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run batch sessions with simulated listeners.
    Simulate {
        #[arg(long, value_parser = parse_experiment)]
        experiment: Experiment,
        /// One or more profile names, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "laptop")]
        profile: Vec<String>,
        /// Cohort TOML; defaults to identical mid-range listeners.
        #[arg(long)]
        cohort: Option<PathBuf>,
        /// Cohort size when no cohort file is given.
        #[arg(long, default_value_t = 20)]
        participants: usize,
        /// Sessions per participant and profile.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Profile TOML replacing the built-in presets.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Turn trial logs into tidy CSV tables and statistics.
    Analyze {
        /// `trials.jsonl` files or directories holding one.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        /// Default profile for sessions created without one.
        #[arg(long, default_value = "laptop")]
        profile: String,
        /// Minimum processing time per stimulus in ms.
        #[arg(long)]
        throttle_ms: Option<u64>,
        #[arg(long, default_value_t = 512)]
        cache_capacity: usize,
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Print summary tables from simulate/analyze output directories.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    s.parse().map_err(|e: voicecue_core::harness::HarnessError| e.to_string())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth { syllables, word, f0, vtl, rms, out } => {
            let secs = synth_to_file(&syllables, word.as_deref(), f0, vtl, rms, &out)?;
            println!("wrote {} ({secs:.3} s)", out.display());
        }
        Command::Simulate { experiment, profile, cohort, participants, runs, seed, out, profiles } => {
            if runs == 0 {
                bail!("--runs must be at least 1");
            }
            let summary = simulate(&SimulateOptions {
                experiment,
                profiles: profile,
                cohort,
                participants,
                runs,
                seed,
                out,
                profile_file: profiles,
            })?;
            println!("{} sessions", summary.sessions);
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            for f in &summary.fit_failures {
                eprintln!("warning: {f}");
            }
        }
        Command::Analyze { inputs, out } => {
            let lines = load_inputs(&inputs)?;
            let analysis = analyze(&lines)?;
            for f in write_analysis(&analysis, &out)? {
                println!("wrote {}", f.display());
            }
            for n in &analysis.notes {
                eprintln!("note: {n}");
            }
        }
        Command::Serve { port, data_dir, profile, throttle_ms, cache_capacity, profiles } => {
            let profiles = load_profiles(profiles.as_deref())?;
            profiles.get(&profile)?;
            let config = HarnessConfig { data_dir, throttle_ms_per_stimulus: throttle_ms, cache_capacity };
            let service = HarnessService::with_profiles(config, profiles, Inventory::builtin())?;
            let state = AppState { service: Arc::new(service), default_profile: profile };
            tokio::runtime::Runtime::new()?.block_on(serve(state, port))?;
        }
        Command::Report { dirs } => {
            let dirs: Vec<&std::path::Path> = dirs.iter().map(PathBuf::as_path).collect();
            print!("{}", report(&dirs)?);
        }
    }
    Ok(())
}
