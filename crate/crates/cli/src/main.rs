use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use zms::config::RunConfig;
use zms::ensemble::{Sampler, SumMode};
use zms::presets::{self, PresetKind};
use zms::run;
use zms::Error;

#[derive(Parser)]
#[command(name = "zms", version, about = "Light storage in Zeeman coherences under inhomogeneous magnetic fields")]
struct Cli {
    /// Suppress the summary printed after each run.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble light-storage run: traces.csv, peaks.csv, manifest.json.
    Simulate(RunArgs),
    /// Classical precessing dipoles: classical.csv.
    Classical(RunArgs),
    /// Repeat the simulation over field magnitudes and fit frequency vs B: sweep.csv.
    Sweep(RunArgs),
    /// Analyze an existing traces/peaks/sweep/classical CSV into analysis.json.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List presets, print one, or run it.
    Preset {
        name: Option<String>,
        /// Print the resolved configuration instead of running it.
        #[arg(long)]
        print: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration, or a previous run's manifest.json.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_enum)]
    sampler: Option<SamplerArg>,
    #[arg(long, value_enum)]
    sum: Option<SumArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Gh,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum SumArg {
    Coherent,
    Incoherent,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> zms::Result<()> {
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.magnetic.seed = seed;
        }
        if let Some(n) = self.samples {
            cfg.magnetic.n_samples = n;
        }
        if let Some(s) = self.sampler {
            cfg.magnetic.sampler = match s {
                SamplerArg::Gh => Sampler::GaussHermite,
                SamplerArg::Mc => Sampler::MonteCarlo,
            };
        }
        if let Some(s) = self.sum {
            cfg.output.sum = match s {
                SumArg::Coherent => SumMode::Coherent,
                SumArg::Incoherent => SumMode::Incoherent,
            };
        }
        cfg.validate()
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 1,
        e if e.is_config() => 2,
        _ => 3,
    }
}

fn configure_threads() -> zms::Result<()> {
    let Ok(v) = std::env::var("ZMS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config {
            field: "ZMS_THREADS".into(),
            message: format!("expected a positive integer, got {v:?}"),
        })?;
    // a second initialization in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn micro(s: f64) -> String {
    format!("{:.3} us", s * 1e6)
}

fn run_kind(kind: PresetKind, cfg: &RunConfig, quiet: bool) -> zms::Result<()> {
    let dir = cfg.output.dir.clone();
    match kind {
        PresetKind::Simulate => {
            let (out, _) = run::simulate_to_dir(cfg, &dir)?;
            if !quiet {
                let samples = out.traces.first().map_or(0, |t| t.len());
                println!(
                    "simulate: {} storage times x {} read samples -> {}",
                    out.traces.len(),
                    samples,
                    dir.display()
                );
                if let Some(f) = out.fits.selected {
                    println!("envelope: {} tau = {} (r2 = {:.4})", f.model, micro(f.tau), f.r_squared);
                }
                if let Some(s) = &out.spectrum {
                    for p in &s.peaks {
                        println!("frequency: {:.2} kHz (amplitude {:.3e})", p.frequency_hz / 1e3, p.amplitude);
                    }
                }
            }
        }
        PresetKind::Classical => {
            let (traj, m) = run::classical_to_dir(cfg, &dir)?;
            if !quiet {
                println!("classical: {} times -> {}", traj.times.len(), dir.display());
                if let Some(f) = m.envelope.and_then(|e| e.selected) {
                    println!("|M| envelope: {} tau = {}", f.model, micro(f.tau));
                }
            }
        }
        PresetKind::Sweep => {
            let (out, _) = run::sweep_to_dir(cfg, &dir)?;
            if !quiet {
                for r in &out.rows {
                    println!("B = {:.3} G: {:.2} kHz", r.b_gauss, r.freq_hz / 1e3);
                }
                println!(
                    "slope {:.4} MHz/G, intercept {:.2} kHz, r2 = {:.6} -> {}",
                    out.fit.slope / 1e6,
                    out.fit.intercept / 1e3,
                    out.fit.r_squared,
                    dir.display()
                );
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> zms::Result<()> {
    configure_threads()?;
    let quiet = cli.quiet;
    match cli.command {
        Command::Simulate(a) => {
            let mut cfg = run::load_config(&a.config)?;
            a.overrides.apply(&mut cfg)?;
            run_kind(PresetKind::Simulate, &cfg, quiet)
        }
        Command::Classical(a) => {
            let mut cfg = run::load_config(&a.config)?;
            a.overrides.apply(&mut cfg)?;
            if cfg.classical.is_none() {
                cfg.classical = Some(Default::default());
            }
            run_kind(PresetKind::Classical, &cfg, quiet)
        }
        Command::Sweep(a) => {
            let mut cfg = run::load_config(&a.config)?;
            a.overrides.apply(&mut cfg)?;
            run_kind(PresetKind::Sweep, &cfg, quiet)
        }
        Command::Analyze { input, out } => {
            let dir = out.unwrap_or_else(|| input.parent().map(|p| p.to_path_buf()).unwrap_or_default());
            let report = run::analyze_to_dir(&input, &dir)?;
            if !quiet {
                println!("analyze: {} ({}) -> {}", input.display(), report.kind, dir.join("analysis.json").display());
                if let Some(f) = report.envelope.and_then(|e| e.selected) {
                    println!("envelope: {} tau = {}", f.model, micro(f.tau));
                }
                if let Some(p) = report.spectrum.and_then(|s| s.dominant()) {
                    println!("dominant frequency: {:.2} kHz", p.frequency_hz / 1e3);
                }
                if let Some(l) = report.linear_fit {
                    println!("slope {:.4} MHz/G, r2 = {:.6}", l.slope / 1e6, l.r_squared);
                }
            }
            Ok(())
        }
        Command::Preset { name: None, .. } => {
            for p in presets::PRESETS {
                println!("{:<13} {}", p.name, p.description);
            }
            Ok(())
        }
        Command::Preset {
            name: Some(name),
            print,
            overrides,
        } => {
            let preset = presets::find(&name).ok_or_else(|| presets::config(&name).unwrap_err())?;
            let mut cfg = presets::config(&name)?;
            overrides.apply(&mut cfg)?;
            if print {
                print!("{}", cfg.to_toml_string()?);
                return Ok(());
            }
            run_kind(preset.kind, &cfg, quiet)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
