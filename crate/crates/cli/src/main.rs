use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isar_core::delay::DelaySet;
use isar_core::doppler::DopplerMatrix;
use isar_core::io::{self, EstimatesFile};
use isar_core::pipeline::{self, Estimates};
use isar_core::{Complex64, IsarError, SimConfig};

#[derive(Parser)]
#[command(name = "isar", version, about = "802.11ad preamble ISAR simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Bin,
    Csv,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file; defaults apply to missing keys
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Disable noise and clutter
    #[arg(long)]
    noiseless: bool,
    #[arg(long, value_enum, default_value_t = Format::Bin)]
    format: Format,
}

impl Common {
    fn config(&self) -> Result<SimConfig, IsarError> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::load(p).map_err(|e| match e {
                IsarError::Io(io) => IsarError::Config(format!("{}: {io}", p.display())),
                other => other,
            })?,
            None => SimConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.noiseless {
            cfg.noiseless = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn frames_name(&self) -> &'static str {
        match self.format {
            Format::Bin => "frames.bin",
            Format::Csv => "frames.csv",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the 3328-sample training field as CSV
    DumpPreamble {
        /// Write to this file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize the received frames of one CPI
    Simulate(Common),
    /// Estimate delays, coefficients, Doppler and velocity from frames
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Frame file; defaults to frames.bin or frames.csv in the output directory
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Form the ISAR image from an estimates file
    Image {
        #[command(flatten)]
        common: Common,
        /// Estimates file; defaults to estimates.json in the output directory
        #[arg(long)]
        input: Option<PathBuf>,
        /// Write the unflipped image
        #[arg(long)]
        no_flip: bool,
    },
    /// Simulate, estimate, image and score in one run
    E2e(Common),
    /// Repeat e2e over values of one configuration key
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
}

fn exit_code(e: &IsarError) -> u8 {
    match e.root() {
        IsarError::Config(_) => 2,
        IsarError::NoTargetDetected { .. } => 4,
        _ => 3,
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), IsarError> {
    io::write_atomic(path, bytes).map_err(|e| e.in_stage("write"))
}

fn read_frames(path: &Path, cfg: &SimConfig) -> Result<Vec<isar_core::frontend::FrameSamples>, IsarError> {
    let bytes = std::fs::read(path)?;
    if path.extension().is_some_and(|e| e == "csv") {
        io::frames_from_csv(std::str::from_utf8(&bytes).map_err(|e| IsarError::Format(e.to_string()))?, cfg.sample_noise_variance())
    } else {
        io::decode_frames(&bytes)
    }
}

/// Rebuilds the estimate set needed for imaging from `estimates.json`.
fn estimates_from_file(file: EstimatesFile, cfg: &SimConfig) -> Result<Estimates, IsarError> {
    let frames = cfg.num_frames();
    if file.doppler_corrected.len() != file.delays.len()
        || file.doppler_corrected.iter().any(|r| r.len() != frames)
        || file.h_hat.len() != file.delays.len()
    {
        return Err(IsarError::Format("estimates do not match the configured frame count".into()));
    }
    let np = file.delays.len();
    Ok(Estimates {
        delays: DelaySet { ells: file.delays, ell_max_idx: 0 },
        h_hat: file.h_hat.iter().map(|v| Complex64::new(v[0], v[1])).collect(),
        doppler: DopplerMatrix {
            raw: Vec::new(),
            excluded: file.doppler_corrected.iter().map(|r| r[0].is_nan()).collect(),
            corrected: file.doppler_corrected,
            delta_med: file.delta_med,
            i_gap: cfg.i_gap,
            anchor_m: frames - 1,
            wraps: vec![(0, 0); np],
        },
        v_hat: file.v_hat,
        omega: isar_core::imaging::rotational_velocity(file.v_hat, cfg),
    })
}

fn run(cli: Cli) -> Result<(), IsarError> {
    match cli.command {
        Command::DumpPreamble { out } => {
            let text = io::preamble_csv(&pipeline::default_preamble());
            match out {
                Some(p) => write(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        Command::Simulate(common) => {
            let cfg = common.config()?;
            let sim = pipeline::simulate(&cfg, &pipeline::default_preamble())?;
            std::fs::create_dir_all(&common.out)?;
            let bytes = match common.format {
                Format::Bin => io::encode_frames(&sim.frames),
                Format::Csv => io::frames_to_csv(&sim.frames).into_bytes(),
            };
            write(&common.out.join(common.frames_name()), &bytes)?;
            write(&common.out.join("config.txt"), cfg.to_text().as_bytes())?;
            eprintln!("wrote {} frames to {}", sim.frames.len(), common.out.display());
        }
        Command::Estimate { common, input } => {
            let cfg = common.config()?;
            let path = input.unwrap_or_else(|| common.out.join(common.frames_name()));
            let frames = read_frames(&path, &cfg).map_err(|e| e.in_stage("read"))?;
            if frames.len() != cfg.num_frames() {
                return Err(IsarError::Format(format!(
                    "{} holds {} frames, the configuration expects {}",
                    path.display(),
                    frames.len(),
                    cfg.num_frames()
                ))
                .in_stage("read"));
            }
            let est = pipeline::estimate(&cfg, &frames, &pipeline::default_preamble())?;
            std::fs::create_dir_all(&common.out)?;
            write(
                &common.out.join("estimates.json"),
                &io::to_json_pretty(&pipeline::estimates_file(&est))?,
            )?;
            eprintln!("{} delays, V_hat = {:.3} m/s", est.delays.len(), est.v_hat);
        }
        Command::Image { common, input, no_flip } => {
            let cfg = common.config()?;
            let path = input.unwrap_or_else(|| common.out.join("estimates.json"));
            let file: EstimatesFile = serde_json::from_slice(&std::fs::read(&path)?)?;
            let est = estimates_from_file(file, &cfg).map_err(|e| e.in_stage("read"))?;
            let img = pipeline::image(&cfg, &est)?;
            let img = if no_flip { img } else { img.flip() };
            std::fs::create_dir_all(&common.out)?;
            pipeline::write_image(&common.out, &img).map_err(|e| e.in_stage("write"))?;
        }
        Command::E2e(common) => {
            let cfg = common.config()?;
            let run = pipeline::run_e2e(&cfg, Some(&common.out))?;
            println!("{}", serde_json::to_string_pretty(&run.manifest.metrics)?);
        }
        Command::Sweep { common, param, values, trials } => {
            let cfg = common.config()?;
            let rows = pipeline::sweep(&cfg, &param, &values, trials)?;
            std::fs::create_dir_all(&common.out)?;
            write(&common.out.join("sweep.csv"), pipeline::sweep_csv(&param, &rows).as_bytes())?;
            let failed = rows.iter().filter(|r| r.metrics.is_none()).count();
            eprintln!("{} trials, {failed} failed", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
