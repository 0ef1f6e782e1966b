use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ppi_core::analysis::{
    emit_report, estimate_networks, mode_performance, mode_performance_correlation, read_grid, run_grid,
    similarity_vs_coherence, ExperimentSpec, GammaSource, GridContext, PerformanceMeasure, ReportFormat,
};
use ppi_core::calibration::{fit_gamma, CalibrationSettings};
use ppi_core::coherence::{EngineOptions, Metric};
use ppi_core::engine::{expected_profile, run_simulation, SimulationConfig};
use ppi_core::panel::{generate_synthetic_panel, load_panel, pillar_means, ColumnMap, Group, IndicatorPanel};

#[derive(Parser)]
#[command(name = "ppi", version, about = "Policy priority inference pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a long-format panel and write its canonical JSON dump.
    Ingest {
        #[command(flatten)]
        panel: PanelArgs,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic panel (panel.csv + meta.json).
    Synth {
        #[arg(long, default_value_t = 8)]
        countries: usize,
        #[arg(long, default_value_t = 10)]
        indicators: usize,
        #[arg(long, default_value_t = 11)]
        years: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a country's spillover network as a JSON edge list.
    EstimateNetwork {
        #[command(flatten)]
        panel: PanelArgs,
        #[arg(long)]
        country: String,
        /// Extra countries whose series are pooled in.
        #[arg(long, value_delimiter = ',')]
        pool: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit policy quality per country cluster.
    Calibrate {
        #[command(flatten)]
        panel: PanelArgs,
        /// Countries to calibrate; all panel countries when omitted.
        #[arg(long, value_delimiter = ',')]
        countries: Vec<String>,
        #[arg(long, default_value_t = 8)]
        kmax: usize,
        /// Weight of the `k ln(M)` cluster penalty.
        #[arg(long, default_value_t = 1.0)]
        penalty: f64,
        #[arg(long, default_value_t = 200)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the agent model from a JSON config. One run dumps the full trace.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coherence of one country against one or more development modes.
    Coherence {
        #[command(flatten)]
        panel: PanelArgs,
        #[arg(long)]
        country: String,
        /// Mode countries, or `OECD` for the panel's early-member list.
        #[arg(long, value_delimiter = ',', required = true)]
        modes: Vec<String>,
        #[arg(long, default_value = "l1")]
        metric: Metric,
        #[command(flatten)]
        gamma: GammaArgs,
        #[arg(long, default_value_t = 200)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        engine: EngineArgs,
        /// Directory for per-cell JSON files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a country × mode grid described by a JSON experiment spec.
    Grid {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the output directory from the experiment file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write report tables and figure data from a grid JSON.
    Report {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        #[arg(long)]
        out: PathBuf,
        /// Panel CSV; enables mode-performance, similarity and pillar-mean data.
        #[arg(long, requires = "meta")]
        panel: Option<PathBuf>,
        #[arg(long, requires = "panel")]
        meta: Option<PathBuf>,
        #[arg(long, default_value = "ipc")]
        measure: PerformanceMeasure,
        /// Year range for pillar means, as `FIRST:LAST`.
        #[arg(long)]
        years: Option<String>,
    },
}

#[derive(Args)]
struct PanelArgs {
    #[arg(long)]
    panel: PathBuf,
    #[arg(long)]
    meta: PathBuf,
}

impl PanelArgs {
    fn load(&self) -> Result<IndicatorPanel> {
        load_panel(&self.panel, &self.meta, &ColumnMap::default())
            .with_context(|| format!("loading panel {}", self.panel.display()))
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct GammaArgs {
    /// Fixed policy quality for every country.
    #[arg(long)]
    gamma: Option<f64>,
    /// Calibration result JSON.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = ppi_core::engine::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = ppi_core::engine::DEFAULT_MAX_PERIODS)]
    max_periods: usize,
}

impl EngineArgs {
    fn options(&self) -> EngineOptions {
        EngineOptions {
            beta: self.beta,
            epsilon: self.epsilon,
            max_periods: self.max_periods,
        }
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn expand_modes(panel: &IndicatorPanel, modes: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for m in modes {
        let names: Vec<String> = if m == "OECD" && !panel.contains_country(m) {
            panel.meta().early_members.clone()
        } else {
            vec![m.clone()]
        };
        for n in names {
            if !out.contains(&n) {
                out.push(n);
            }
        }
    }
    out
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest { panel, out } => {
            let p = panel.load()?;
            eprintln!(
                "{} countries, {} indicators, {} years",
                p.n_countries(),
                p.n_indicators(),
                p.years().len()
            );
            let text = p.to_json() + "\n";
            match out {
                Some(path) => write_text(&path, &text)?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
        }
        Command::Synth {
            countries,
            indicators,
            years,
            seed,
            out,
        } => {
            let p = generate_synthetic_panel(countries, indicators, years, seed)?;
            p.save(&out)?;
        }
        Command::EstimateNetwork {
            panel,
            country,
            pool,
            out,
        } => {
            let p = panel.load()?;
            let pools = BTreeMap::from([(country.clone(), pool)]);
            let mut nets = estimate_networks(&p, std::slice::from_ref(&country), &pools)?;
            let net = nets.remove(&country).expect("network for requested country");
            write_json(&net, out.as_deref())?;
        }
        Command::Calibrate {
            panel,
            countries,
            kmax,
            penalty,
            runs,
            seed,
            engine,
            out,
        } => {
            let p = panel.load()?;
            let countries = if countries.is_empty() {
                p.countries().map(str::to_string).collect()
            } else {
                countries
            };
            let nets = estimate_networks(&p, &countries, &BTreeMap::new())?;
            let settings = CalibrationSettings {
                k_max: kmax,
                n_runs: runs,
                penalty,
                seed,
                engine: engine.options(),
                ..CalibrationSettings::default()
            };
            let result = fit_gamma(&p, &nets, &countries, &settings)?;
            write_json(&result, out.as_deref())?;
        }
        Command::Simulate { config, runs, seed, out } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg: SimulationConfig = serde_json::from_str(&text)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if runs == 1 {
                write_json(&run_simulation(&cfg)?, out.as_deref())?;
            } else {
                #[derive(Serialize)]
                struct Batch {
                    master_seed: u64,
                    mean_profile: Vec<f64>,
                    mean_diversion: f64,
                    runs: Vec<ppi_core::engine::RunSummary>,
                }
                let est = expected_profile(&cfg, runs, cfg.seed)?;
                let batch = Batch {
                    master_seed: cfg.seed,
                    mean_profile: est.mean.shares().to_vec(),
                    mean_diversion: est.mean_diversion(),
                    runs: est.runs,
                };
                write_json(&batch, out.as_deref())?;
            }
        }
        Command::Coherence {
            panel,
            country,
            modes,
            metric,
            gamma,
            runs,
            seed,
            engine,
            out,
        } => {
            let p = panel.load()?;
            let modes: Vec<String> = expand_modes(&p, &modes).into_iter().filter(|m| *m != country).collect();
            if modes.is_empty() {
                bail!("no development modes left after removing {country}");
            }
            let countries = vec![country.clone()];
            let source = match (gamma.gamma, gamma.calibration) {
                (Some(g), _) => GammaSource::Fixed(g),
                (None, Some(path)) => GammaSource::Calibration(path),
                (None, None) => unreachable!("clap enforces one gamma source"),
            };
            let spec = ExperimentSpec {
                panel: panel.panel.clone(),
                meta: panel.meta.clone(),
                columns: None,
                countries: countries.clone(),
                modes: modes.clone(),
                runs,
                seed,
                metrics: vec![metric],
                gamma: source,
                out_dir: out.clone().unwrap_or_default(),
                engine: engine.options(),
                pool: BTreeMap::new(),
            };
            spec.validate(&p)?;
            let gammas = spec.gammas()?;
            let nets = estimate_networks(&p, &countries, &spec.pool)?;
            let ctx = GridContext {
                panel: &p,
                networks: &nets,
                gammas: &gammas,
                countries: &countries,
                modes: &modes,
                runs,
                seed,
                metric,
                engine: spec.engine,
            };
            let grid = run_grid(&ctx, out.as_deref())?;
            for f in &grid.failures {
                eprintln!("cell {} / {} failed: {}", f.country, f.mode, f.error);
            }
            write_json(&grid.cells, None)?;
            if !grid.complete {
                bail!("{} of {} cells failed", grid.failures.len(), modes.len());
            }
        }
        Command::Grid { spec, out } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if let Some(o) = out {
                spec.out_dir = o;
            }
            let p = spec.load_panel()?;
            spec.validate(&p)?;
            let gammas = spec.gammas()?;
            let nets = estimate_networks(&p, &spec.countries, &spec.pool)?;
            let mut incomplete = 0;
            for &metric in &spec.metrics {
                let ctx = GridContext {
                    panel: &p,
                    networks: &nets,
                    gammas: &gammas,
                    countries: &spec.countries,
                    modes: &spec.modes,
                    runs: spec.runs,
                    seed: spec.seed,
                    metric,
                    engine: spec.engine,
                };
                let grid = run_grid(&ctx, Some(&spec.out_dir))?;
                for f in &grid.failures {
                    eprintln!("[{metric}] cell {} / {} failed: {}", f.country, f.mode, f.error);
                }
                if !grid.complete {
                    incomplete += 1;
                }
                let dir = spec.out_dir.join(metric.as_str());
                write_json(&grid, Some(&dir.join("grid.json")))?;
                if !grid.cells.is_empty() {
                    emit_report(&grid, ReportFormat::Csv, &dir)?;
                }
                eprintln!("[{metric}] {} cells -> {}", grid.cells.len(), dir.display());
            }
            if incomplete > 0 {
                bail!("{incomplete} metric grid(s) are partial; rerun to resume");
            }
        }
        Command::Report {
            grid,
            format,
            out,
            panel,
            meta,
            measure,
            years,
        } => {
            let g = read_grid(&grid)?;
            let mut files = emit_report(&g, format, &out)?;
            if let (Some(panel), Some(meta)) = (panel, meta) {
                let p = PanelArgs { panel, meta }.load()?;
                files.extend(figure_data(&g, &p, measure, years.as_deref(), &out)?);
            }
            for f in files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

/// Mode-performance, similarity and pillar-mean series for plotting.
fn figure_data(
    grid: &ppi_core::CoherenceGrid,
    panel: &IndicatorPanel,
    measure: PerformanceMeasure,
    years: Option<&str>,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();

    let mut perf = String::from("mode,average_h,performance\n");
    for m in &grid.modes {
        if let Some(avg) = grid.mode_average.get(m) {
            perf.push_str(&format!("{m},{avg:.6},{:.6}\n", mode_performance(panel, m, measure)?));
        }
    }
    match mode_performance_correlation(grid, panel, measure) {
        Ok(r) => eprintln!("mode performance correlation: {r:.4}"),
        Err(e) => eprintln!("mode performance correlation unavailable: {e}"),
    }
    let path = out.join("mode_performance.csv");
    write_text(&path, &perf)?;
    files.push(path);

    let mut sim = String::from("country,mode,similarity,h\n");
    for c in &grid.countries {
        let modes: Vec<String> = grid.modes.iter().filter(|m| grid.cell(c, m).is_some()).cloned().collect();
        for pt in similarity_vs_coherence(c, &modes, grid, panel)? {
            sim.push_str(&format!("{c},{},{:.6},{:.6}\n", pt.mode, pt.similarity, pt.h));
        }
    }
    let path = out.join("similarity.csv");
    write_text(&path, &sim)?;
    files.push(path);

    if let Some(groups) = panel.groups() {
        let groups = groups?;
        let range = match years {
            Some(r) => {
                let (a, b) = r.split_once(':').context("--years must look like FIRST:LAST")?;
                a.parse::<i32>()?..=b.parse::<i32>()?
            }
            None => panel.years()[0]..=*panel.years().last().expect("panel has years"),
        };
        let means = pillar_means(panel, &groups, range)?;
        let mut text = String::from("pillar,group,mean\n");
        for &pillar in &means.pillars {
            for group in [Group::EarlyMember, Group::HigherIncome, Group::Reference, Group::LowerIncome] {
                if let Ok(v) = means.get(pillar, group) {
                    text.push_str(&format!("{pillar},{},{v:.6}\n", group as u8));
                }
            }
        }
        let path = out.join("pillar_means.csv");
        write_text(&path, &text)?;
        files.push(path);
    }
    Ok(files)
}
