//! `ssrscan`: validate a system description, compute its eigen-modes, scan
//! transfer magnitudes from the attack bus, locate vulnerable bands and run
//! time-domain attack simulations, all with deterministic CSV outputs.
//!
//! Exit codes: 0 success, 1 configuration/validation failure, 2 runtime
//! numerical or I/O failure.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use ssr_core::fmtnum::sci;
use ssr_core::freq::{find_peaks, ratio_rm, transfer_magnitudes, FrequencyGrid, PeakBand};
use ssr_core::model::{self, SystemModel, Waveform};
use ssr_core::network::{build_susceptance, kron_reduce};
use ssr_core::sim::{integrate, SimulationResult};
use ssr_core::statespace::{assemble, StateSpaceSystem};

#[derive(Parser)]
#[command(name = "ssrscan", version, about = "Torsional resonance vulnerability analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a configuration and report invariant violations.
    Validate {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Eigen-modes of the assembled system as CSV.
    Eig {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Transfer-magnitude scan from the attack bus: magnitudes and ratios CSVs.
    Freqscan {
        config: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        fmin: f64,
        #[arg(long, default_value_t = 60.0)]
        fmax: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Detected resonance bands over the torsional outputs.
    Peaks {
        config: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        fmin: f64,
        #[arg(long, default_value_t = 60.0)]
        fmax: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Absolute prominence threshold; default 10x each array's median.
        #[arg(long)]
        prominence: Option<f64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Time-domain attack simulation: trajectory and severity CSVs.
    Simulate {
        config: PathBuf,
        /// Override the configured attack frequency (Hz).
        #[arg(long)]
        attack_freq: Option<f64>,
        /// Override the configured amplitude (p.u. on the system base).
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long, value_parser = ["square", "sine", "none"])]
        waveform: Option<String>,
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Override the attack start time (s).
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        duty: Option<f64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Human-readable vulnerability summary from prior peaks and severity CSVs.
    Report {
        #[arg(long)]
        peaks: PathBuf,
        #[arg(long)]
        severity: PathBuf,
    },
}

/// Failure carrying the process exit code.
enum Failure {
    /// Configuration or validation problem (exit 1).
    Config(String),
    /// Numerical or I/O problem (exit 2).
    Runtime(String),
}

impl From<ssr_core::Error> for Failure {
    fn from(e: ssr_core::Error) -> Failure {
        use ssr_core::Error::*;
        match e {
            Parse { .. } | Model(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("SSR_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}

fn load(config: &Path) -> Result<(SystemModel, String), Failure> {
    let text = fs::read_to_string(config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", config.display())))?;
    let model = model::load_model(&text)?;
    let report = model::validate(&model);
    if !report.is_valid() {
        let mut msg = String::new();
        for v in &report.violations {
            msg.push_str(&format!("violation: {v}\n"));
        }
        return Err(Failure::Config(msg.trim_end().to_string()));
    }
    let hash = config_hash(&model);
    Ok((model, hash))
}

fn config_hash(model: &SystemModel) -> String {
    // hash of the canonical serialization, insensitive to reformatting
    let canonical = model::serialize(model);
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn build_system(model: &SystemModel) -> Result<StateSpaceSystem, Failure> {
    let b = build_susceptance(&model.network);
    let rc = kron_reduce(&b, model)?;
    Ok(assemble(model, &rc)?)
}

fn write_file(path: &Path, content: &str) -> Result<(), Failure> {
    fs::write(path, content)?;
    Ok(())
}

fn write_manifest(
    out_dir: &Path,
    subcommand: &str,
    config_sha256: Option<&str>,
    parameters: serde_json::Value,
    outputs: &[&Path],
) -> Result<PathBuf, Failure> {
    let manifest = serde_json::json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "config_sha256": config_sha256,
        "subcommand": subcommand,
        "parameters": parameters,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    let path = out_dir.join(format!("{subcommand}_manifest.json"));
    write_file(&path, &format!("{}\n", serde_json::to_string_pretty(&manifest).unwrap()))?;
    Ok(path)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { config, out_dir } => {
            let (_, hash) = load(&config)?;
            fs::create_dir_all(&out_dir)?;
            println!("valid: no violations");
            write_manifest(
                &out_dir,
                "validate",
                Some(&hash),
                serde_json::json!({ "config": config.display().to_string() }),
                &[],
            )?;
            Ok(())
        }
        Command::Eig { config, out_dir } => {
            let (model, hash) = load(&config)?;
            fs::create_dir_all(&out_dir)?;
            let sys = build_system(&model)?;
            let modes = sys.eig_modes()?;
            let mut csv = String::from("mode_id,re,im,freq_hz,damping_ratio,p1,p2,p3\n");
            for (i, m) in modes.modes.iter().enumerate() {
                let mut parts: Vec<String> = m
                    .participation
                    .iter()
                    .map(|(label, w)| format!("{label}:{}", sci(*w)))
                    .collect();
                parts.resize(3, String::new());
                csv.push_str(&format!(
                    "{i},{},{},{},{},{},{},{}\n",
                    sci(m.re),
                    sci(m.im),
                    sci(m.frequency_hz),
                    sci(m.damping_ratio),
                    parts[0],
                    parts[1],
                    parts[2]
                ));
            }
            let out = out_dir.join("eig_modes.csv");
            write_file(&out, &csv)?;
            write_manifest(
                &out_dir,
                "eig",
                Some(&hash),
                serde_json::json!({ "config": config.display().to_string() }),
                &[&out],
            )?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Freqscan {
            config,
            fmin,
            fmax,
            step,
            out_dir,
        } => {
            let (model, hash) = load(&config)?;
            fs::create_dir_all(&out_dir)?;
            let sys = build_system(&model)?;
            let (scan, ratios) = run_scan(&model, &sys, fmin, fmax, step)?;

            let mut mags = String::from("f_hz");
            for l in scan.y1_labels.iter().chain(scan.y2_labels.iter()) {
                mags.push(',');
                mags.push_str(l);
            }
            mags.push('\n');
            for (i, f) in scan.frequencies_hz.iter().enumerate() {
                mags.push_str(&sci(*f));
                for series in scan.gamma1.iter().chain(scan.gamma2.iter()) {
                    mags.push(',');
                    mags.push_str(&sci(series[i]));
                }
                mags.push('\n');
            }
            let mags_path = out_dir.join("freqscan_magnitudes.csv");
            write_file(&mags_path, &mags)?;

            let mut rat = String::from("f_hz");
            for l in &ratios.labels {
                rat.push(',');
                rat.push_str(l);
            }
            rat.push('\n');
            for (i, f) in scan.frequencies_hz.iter().enumerate() {
                rat.push_str(&sci(*f));
                for series in &ratios.values {
                    rat.push(',');
                    rat.push_str(&sci(series[i]));
                }
                rat.push('\n');
            }
            let ratios_path = out_dir.join("freqscan_ratios.csv");
            write_file(&ratios_path, &rat)?;

            write_manifest(
                &out_dir,
                "freqscan",
                Some(&hash),
                serde_json::json!({
                    "config": config.display().to_string(),
                    "fmin": fmin, "fmax": fmax, "step": step,
                }),
                &[&mags_path, &ratios_path],
            )?;
            println!("wrote {}", mags_path.display());
            println!("wrote {}", ratios_path.display());
            Ok(())
        }
        Command::Peaks {
            config,
            fmin,
            fmax,
            step,
            prominence,
            out_dir,
        } => {
            let (model, hash) = load(&config)?;
            fs::create_dir_all(&out_dir)?;
            let sys = build_system(&model)?;
            let (scan, ratios) = run_scan(&model, &sys, fmin, fmax, step)?;
            let bands = find_peaks(&scan, &ratios, prominence);
            let out = out_dir.join("peaks.csv");
            write_file(&out, &peaks_csv(&bands))?;
            write_manifest(
                &out_dir,
                "peaks",
                Some(&hash),
                serde_json::json!({
                    "config": config.display().to_string(),
                    "fmin": fmin, "fmax": fmax, "step": step,
                    "prominence": prominence,
                }),
                &[&out],
            )?;
            println!("wrote {} ({} bands)", out.display(), bands.len());
            Ok(())
        }
        Command::Simulate {
            config,
            attack_freq,
            amplitude,
            waveform,
            horizon,
            dt,
            start,
            duty,
            out_dir,
        } => {
            let (model, hash) = load(&config)?;
            fs::create_dir_all(&out_dir)?;
            let sys = build_system(&model)?;
            let mut spec = model.attack.clone();
            if let Some(f) = attack_freq {
                spec.frequency_hz = f;
            }
            if let Some(a) = amplitude {
                spec.amplitude_pu = a;
            }
            if let Some(w) = waveform {
                spec.waveform = match w.as_str() {
                    "square" => Waveform::Square,
                    "sine" => Waveform::Sine,
                    _ => Waveform::None,
                };
            }
            if let Some(s) = start {
                spec.start_s = s;
            }
            if let Some(d) = duty {
                spec.duty = d;
            }
            let result = integrate(&sys, &spec, horizon, dt)?;

            let traj_path = out_dir.join("simulate_trajectory.csv");
            write_file(&traj_path, &trajectory_csv(&result))?;
            let sev_path = out_dir.join("simulate_severity.csv");
            write_file(&sev_path, &severity_csv(&result))?;
            write_manifest(
                &out_dir,
                "simulate",
                Some(&hash),
                serde_json::json!({
                    "config": config.display().to_string(),
                    "attack_freq_hz": spec.frequency_hz,
                    "amplitude_pu": spec.amplitude_pu,
                    "waveform": spec.waveform.as_str(),
                    "horizon_s": horizon,
                    "dt_s": dt,
                    "start_s": spec.start_s,
                    "duty": spec.duty,
                }),
                &[&traj_path, &sev_path],
            )?;
            println!("wrote {}", traj_path.display());
            println!("wrote {}", sev_path.display());
            Ok(())
        }
        Command::Report { peaks, severity } => {
            let text = report::render(&peaks, &severity).map_err(Failure::Runtime)?;
            print!("{text}");
            Ok(())
        }
    }
}

fn run_scan(
    model: &SystemModel,
    sys: &StateSpaceSystem,
    fmin: f64,
    fmax: f64,
    step: f64,
) -> Result<(ssr_core::freq::FrequencyScan, ssr_core::freq::RatioSet), Failure> {
    let grid = FrequencyGrid::new(fmin, fmax, step)?;
    let input = sys
        .input_index(&model.network.attack_bus)
        .ok_or_else(|| Failure::Config(format!("attack bus `{}` is not a load bus", model.network.attack_bus)))?;
    let scan = transfer_magnitudes(sys, input, &grid)?;
    let ratios = ratio_rm(&scan);
    Ok((scan, ratios))
}

fn peaks_csv(bands: &[PeakBand]) -> String {
    let mut csv = String::from("output_id,f_center_hz,f_lo_hz,f_hi_hz,magnitude,r_m,stealth\n");
    for b in bands {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            b.output,
            sci(b.center_hz),
            sci(b.f_lo),
            sci(b.f_hi),
            sci(b.magnitude),
            sci(b.r_m),
            b.stealth
        ));
    }
    csv
}

fn trajectory_csv(result: &SimulationResult) -> String {
    let mut csv = String::from("t_s,input_pu");
    for l in result.y1_labels.iter().chain(result.y2_labels.iter()) {
        csv.push(',');
        csv.push_str(l);
    }
    csv.push('\n');
    for i in 0..result.times_s.len() {
        csv.push_str(&sci(result.times_s[i]));
        csv.push(',');
        csv.push_str(&sci(result.input_pu[i]));
        for v in result.y1[i].iter().chain(result.y2[i].iter()) {
            csv.push(',');
            csv.push_str(&sci(*v));
        }
        csv.push('\n');
    }
    csv
}

fn severity_csv(result: &SimulationResult) -> String {
    let mut csv = String::from(
        "gen_id,segment,max_speed_diff,max_terminal_speed,r_omega,max_angle_diff,max_terminal_angle,r_theta\n",
    );
    for row in &result.severity {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.gen_id,
            row.segment,
            sci(row.max_speed_diff),
            sci(row.max_terminal_speed),
            row.r_omega,
            sci(row.max_angle_diff),
            sci(row.max_terminal_angle),
            row.r_theta
        ));
    }
    csv
}
