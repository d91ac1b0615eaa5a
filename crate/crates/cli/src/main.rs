//! `qpp`: seeded experiment runner for the mesh simulator.

mod svg;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use qpp_core::analysis::Histogram;
use qpp_core::campaign::{run_campaign, validate_config, write_atomic, CampaignKind, ExperimentConfig, ExperimentReport, ProfileRef};
use qpp_core::compiler::{matrices_from_csv, matrices_to_csv, permutation_ensemble, EnsembleKind, EnsembleManifest};
use qpp_core::quantum::{hom_scan, route_to_tbs, HomScan, PhotonPairSource};
use qpp_core::{clements_decompose, haar_random, CellAddress, QppError, Unitary};

const OUT_DIR_ENV: &str = "QPP_OUT_DIR";

#[derive(Parser)]
#[command(name = "qpp", version, about = "Programmable photonic mesh simulator and experiment runner")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; flags given on the command line override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: config `output_dir`, then $QPP_OUT_DIR, else stdout).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Also write SVG plots (needs an output directory).
    #[arg(long, global = true)]
    svg: bool,
    /// Number of modes.
    #[arg(short, long, global = true)]
    n: Option<usize>,
    /// ideal | nominal | default | path to a profile JSON.
    #[arg(long, global = true)]
    profile: Option<String>,
    #[arg(long, global = true)]
    profile_seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Ensemble {
    Haar,
    Perm,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a unitary into phase settings.
    Compile {
        /// CSV `matrix,row,col,re,im`; the first matrix is compiled.
        #[arg(long, conflicts_with = "haar_seed")]
        unitary: Option<PathBuf>,
        /// Compile a Haar-random unitary drawn from this seed.
        #[arg(long)]
        haar_seed: Option<u64>,
    },
    /// Seeded Haar-random unitaries.
    Haar {
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Seeded random permutation matrices.
    Perm {
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Heater sweep and fit for every heater.
    Calibrate {
        #[arg(long)]
        sweep_points: Option<usize>,
        #[arg(long)]
        detector_noise: Option<f64>,
    },
    /// Amplitude-fidelity campaign over an ensemble of targets.
    Fidelity {
        #[arg(long, value_enum)]
        ensemble: Option<Ensemble>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// HOM visibility of every cell.
    HomMap {
        #[arg(long)]
        overlap: Option<f64>,
    },
    /// HOM delay scan at a single cell.
    HomScan {
        #[arg(long)]
        column: usize,
        #[arg(long)]
        row: usize,
        #[arg(long)]
        overlap: Option<f64>,
    },
    /// Dip-center shift while driving the diagonal-arm heaters.
    DelaySweep {
        #[arg(long)]
        overlap: Option<f64>,
    },
    /// Per-mode insertion loss.
    Loss,
    /// Platform loss comparison.
    Platform {
        /// Extra CSV rows `name,platform,modes,loss_per_unit_cell_db,...`.
        #[arg(long)]
        platforms: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<QppError>().is_some_and(QppError::is_usage) || e.downcast_ref::<UsageError>().is_some();
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

/// Command-line misuse that clap cannot catch.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Compile { unitary, haar_seed } => compile(c, unitary.as_deref(), *haar_seed),
        Command::Haar { count } => ensemble(c, EnsembleKind::Haar, *count),
        Command::Perm { count } => ensemble(c, EnsembleKind::Permutation, *count),
        Command::HomScan { column, row, overlap } => scan(c, CellAddress::new(*column, *row), *overlap),
        cmd => {
            let cfg = campaign_config(c, cmd)?;
            let report = run_campaign(&cfg)?;
            emit_report(c, &cfg, &report)
        }
    }
}

fn profile_ref(text: &str) -> ProfileRef {
    match text {
        "ideal" => ProfileRef::Ideal,
        "nominal" => ProfileRef::Nominal,
        "default" | "calibrated" => ProfileRef::Default,
        path => ProfileRef::File(PathBuf::from(path)),
    }
}

fn kind_of(cmd: &Command) -> Option<CampaignKind> {
    Some(match cmd {
        Command::Calibrate { .. } => CampaignKind::Calibration,
        Command::Fidelity { ensemble: Some(Ensemble::Perm), .. } => CampaignKind::FidelityPerm,
        Command::Fidelity { .. } => CampaignKind::FidelityHaar,
        Command::HomMap { .. } => CampaignKind::HomMap,
        Command::DelaySweep { .. } => CampaignKind::DelaySweep,
        Command::Loss => CampaignKind::LossReport,
        Command::Platform { .. } => CampaignKind::Platform,
        _ => return None,
    })
}

/// Config file (if any) with command-line overrides applied.
fn campaign_config(c: &Common, cmd: &Command) -> anyhow::Result<ExperimentConfig> {
    let wanted = kind_of(cmd).expect("campaign subcommand");
    let mut cfg = match &c.config {
        Some(path) => {
            let cfg = validate_config(path)?;
            let compatible = cfg.campaign == wanted
                || matches!(
                    (cmd, cfg.campaign),
                    (Command::Fidelity { ensemble: None, .. }, CampaignKind::FidelityHaar | CampaignKind::FidelityPerm)
                );
            if !compatible {
                return Err(usage(format!(
                    "config {} describes a `{}` campaign, not `{}`",
                    path.display(),
                    cfg.campaign.name(),
                    wanted.name()
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(wanted),
    };
    if let Some(n) = c.n {
        cfg = cfg.with_n(n);
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(w) = c.workers {
        cfg.workers = Some(w);
    }
    if let Some(p) = &c.profile {
        cfg.profile = profile_ref(p);
    }
    if let Some(s) = c.profile_seed {
        cfg.profile_seed = s;
    }
    match cmd {
        Command::Calibrate { sweep_points, detector_noise } => {
            if let Some(p) = sweep_points {
                cfg.sweep_points = *p;
            }
            if detector_noise.is_some() {
                cfg.detector_noise = *detector_noise;
            }
        }
        Command::Fidelity { count: Some(k), .. } => cfg.count = *k,
        Command::HomMap { overlap: Some(x) } | Command::DelaySweep { overlap: Some(x) } => cfg.overlap = *x,
        Command::Platform { platforms: Some(p) } => cfg.platforms = Some(p.clone()),
        _ => {}
    }
    if c.out.is_some() {
        cfg.output_dir = c.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `--out`, then the config's directory, then the environment.
fn out_dir(c: &Common, from_config: Option<&Path>) -> Option<PathBuf> {
    c.out
        .clone()
        .or_else(|| from_config.map(Path::to_path_buf))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

fn emit_report(c: &Common, cfg: &ExperimentConfig, report: &ExperimentReport) -> anyhow::Result<()> {
    match out_dir(c, cfg.output_dir.as_deref()) {
        Some(dir) => {
            let mut written = report.write_to(&dir)?;
            if c.svg {
                for (name, body) in campaign_plots(cfg.campaign, report)? {
                    written.push(write_atomic(&dir.join(name), &body)?);
                }
            }
            for p in written {
                eprintln!("wrote {}", p.display());
            }
            emit(&(serde_json::to_string_pretty(&report.summary)? + "\n"));
        }
        None => {
            if c.svg {
                return Err(usage("--svg needs an output directory"));
            }
            match c.format {
                Format::Json => emit(&report.to_json()),
                Format::Csv => {
                    let csv = report.artifacts.iter().find(|a| a.name.ends_with(".csv"));
                    emit(csv.map(|a| a.contents.as_str()).unwrap_or(""))
                }
            }
        }
    }
    Ok(())
}

/// Print to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn campaign_plots(kind: CampaignKind, report: &ExperimentReport) -> anyhow::Result<Vec<(String, String)>> {
    let histogram = |title: &str, label: &str| -> anyhow::Result<String> {
        let h: Histogram = serde_json::from_value(report.summary["histogram"].clone()).context("summary histogram")?;
        Ok(svg::histogram(title, label, &h.edges(), &h.counts))
    };
    Ok(match kind {
        CampaignKind::FidelityHaar => vec![("histogram.svg".into(), histogram("Haar-random targets", "amplitude fidelity")?)],
        CampaignKind::FidelityPerm => vec![("histogram.svg".into(), histogram("Permutation targets", "amplitude fidelity")?)],
        CampaignKind::HomMap => vec![("visibility_histogram.svg".into(), histogram("HOM visibility", "visibility")?)],
        CampaignKind::DelaySweep => {
            let points: Vec<(f64, f64)> = report
                .results
                .as_array()
                .ok_or_else(|| anyhow!("delay sweep results are not a list"))?
                .iter()
                .map(|p| (p["total_shift_um"].as_f64().unwrap_or(f64::NAN), p["fitted_center_um"].as_f64().unwrap_or(f64::NAN)))
                .collect();
            let identity = |x: f64| x;
            vec![(
                "delay_sweep.svg".into(),
                svg::curve("Dip center against applied shift", "applied shift (um)", "fitted center (um)", &points, Some(&identity)),
            )]
        }
        _ => vec![],
    })
}

fn mode_count(c: &Common) -> anyhow::Result<usize> {
    let cfg_n = match &c.config {
        Some(p) => Some(validate_config(p)?.n),
        None => None,
    };
    let n = c.n.or(cfg_n).unwrap_or(20);
    if n < 2 {
        return Err(usage(format!("-n must be >= 2, got {n}")));
    }
    Ok(n)
}

fn emit_plain(c: &Common, files: &[(&str, String)], stdout_json: &str, stdout_csv: &str) -> anyhow::Result<()> {
    match out_dir(c, None) {
        Some(dir) => {
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, body) in files {
                let p = write_atomic(&dir.join(name), body)?;
                eprintln!("wrote {}", p.display());
            }
        }
        None => emit(match c.format {
            Format::Json => stdout_json,
            Format::Csv => stdout_csv,
        }),
    }
    Ok(())
}

fn compile(c: &Common, path: Option<&Path>, haar_seed: Option<u64>) -> anyhow::Result<()> {
    let target = match (path, haar_seed.or(c.seed)) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("unitary {}: {e}", p.display())))?;
            let m = matrices_from_csv(&text)?.into_iter().next().ok_or_else(|| usage(format!("{} holds no matrix", p.display())))?;
            Unitary::new(m)?
        }
        (None, Some(seed)) => haar_random(mode_count(c)?, seed)?,
        (None, None) => return Err(usage("compile needs --unitary PATH or --haar-seed SEED")),
    };
    let report = clements_decompose(target.matrix())?;
    let doc = json!({
        "n": target.n(),
        "residual": report.residual,
        "settings": report.settings,
    });
    let json_text = serde_json::to_string_pretty(&doc)? + "\n";
    let mut csv = String::from("column,row,theta,phi\n");
    for (a, s) in report.settings.cells() {
        csv.push_str(&format!("{},{},{:.15e},{:.15e}\n", a.column, a.row, s.theta(), s.phi()));
    }
    for (i, p) in report.settings.output_phases().iter().enumerate() {
        csv.push_str(&format!("output,{i},,{p:.15e}\n"));
    }
    emit_plain(c, &[("settings.json", json_text.clone()), ("settings.csv", csv.clone())], &json_text, &csv)
}

fn ensemble(c: &Common, kind: EnsembleKind, count: usize) -> anyhow::Result<()> {
    let manifest = EnsembleManifest { kind, n: mode_count(c)?, seed: c.seed.unwrap_or(0), count };
    let matrices = manifest.generate()?;
    let mut doc = serde_json::to_value(&manifest)?;
    if kind == EnsembleKind::Permutation {
        doc["permutations"] = json!(permutation_ensemble(manifest.n, count, manifest.seed)?);
    }
    let json_text = serde_json::to_string_pretty(&doc)? + "\n";
    let csv = matrices_to_csv(matrices.iter().map(|u| u.matrix()));
    emit_plain(c, &[("manifest.json", json_text.clone()), ("matrices.csv", csv.clone())], &json_text, &csv)
}

fn scan(c: &Common, target: CellAddress, overlap: Option<f64>) -> anyhow::Result<()> {
    let cfg = match &c.config {
        Some(p) => Some(validate_config(p)?),
        None => None,
    };
    let n = mode_count(c)?;
    let profile_ref = match (&c.profile, &cfg) {
        (Some(p), _) => profile_ref(p),
        (None, Some(cfg)) => cfg.profile.clone(),
        (None, None) => ProfileRef::Default,
    };
    let profile_seed = c.profile_seed.or(cfg.as_ref().map(|x| x.profile_seed)).unwrap_or(0);
    let profile = profile_ref.load(n, profile_seed)?;
    let source = PhotonPairSource {
        overlap: overlap.or(cfg.as_ref().map(|x| x.overlap)).unwrap_or(PhotonPairSource::default().overlap),
        center_wavelength_nm: profile.wavelength_nm,
        ..PhotonPairSource::default()
    };
    let delays = cfg.as_ref().map(|x| x.delays_um.clone()).unwrap_or_else(qpp_core::quantum::default_delays);
    let plan = route_to_tbs(n, target)?;
    let seed = c.seed.or(cfg.as_ref().map(|x| x.seed)).unwrap_or(0);
    let result = hom_scan(&plan, &source, &profile, &delays, seed)?;
    let doc = json!({
        "n": n,
        "column": target.column,
        "row": target.row,
        "input_pair": plan.input_pair,
        "output_pair": plan.output_pair,
        "overlap": source.overlap,
        "seed": seed,
        "fit": result.fit,
        "delays_um": result.delays_um,
        "coincidences": result.coincidences,
    });
    let json_text = serde_json::to_string_pretty(&doc)? + "\n";
    let csv = result.to_csv();
    let mut files = vec![("hom_scan.json", json_text.clone()), ("hom_scan.csv", csv.clone())];
    if c.svg {
        if out_dir(c, None).is_none() {
            return Err(usage("--svg needs an output directory"));
        }
        files.push(("hom_scan.svg", dip_plot(&result, target)));
    }
    emit_plain(c, &files, &json_text, &csv)
}

fn dip_plot(scan: &HomScan, target: CellAddress) -> String {
    let points: Vec<(f64, f64)> = scan.delays_um.iter().copied().zip(scan.coincidences.iter().copied()).collect();
    let f = scan.fit;
    let model = move |x: f64| f.baseline * (1.0 - f.visibility * (-(x - f.center_um).powi(2) / (2.0 * f.width_um.powi(2))).exp());
    svg::curve(
        &format!("HOM dip at cell ({}, {}), V = {:.4}", target.column, target.row, f.visibility),
        "delay (um)",
        "normalized coincidences",
        &points,
        Some(&model),
    )
}
