//! Country × development-mode experiments and report files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::CalibrationResult;
use crate::coherence::{
    coherence_with_significance, consistent_profile, indicator_similarity, pillar_inefficiencies,
    retrospective_profile, CoherenceError, EngineOptions, Metric, Stars,
};
use crate::engine::ProfileEstimate;
use crate::network::{estimate_network, NetworkError, SpilloverNetwork};
use crate::panel::{load_panel, ColumnMap, IndicatorPanel, PanelError};
use crate::seed::labeled_seed;
use crate::stats::pearson;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("grid has no cells")]
    GridEmpty,
    #[error("no grid cell for country {country} and mode {mode}")]
    MissingCell { country: String, mode: String },
    #[error("need at least 3 modes with averages, got {0}")]
    TooFewModes(usize),
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("no gamma for country {0}")]
    MissingGamma(String),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("network for {country}: {source}")]
    Network {
        country: String,
        #[source]
        source: NetworkError,
    },
    #[error(transparent)]
    Coherence(#[from] CoherenceError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AnalysisError + '_ {
    move |source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSource {
    Fixed(f64),
    /// Path to a calibration result JSON.
    Calibration(PathBuf),
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::L1]
}

/// Experiment description, read from JSON. Relative paths are resolved
/// against the spec file's directory by [`ExperimentSpec::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub panel: PathBuf,
    pub meta: PathBuf,
    #[serde(default)]
    pub columns: Option<ColumnMap>,
    pub countries: Vec<String>,
    pub modes: Vec<String>,
    pub runs: usize,
    pub seed: u64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    pub gamma: GammaSource,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub engine: EngineOptions,
    /// Extra countries whose series are pooled into a country's network.
    #[serde(default)]
    pub pool: BTreeMap<String, Vec<String>>,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut spec: ExperimentSpec = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut spec.panel);
        resolve(&mut spec.meta);
        resolve(&mut spec.out_dir);
        if let GammaSource::Calibration(p) = &mut spec.gamma {
            resolve(p);
        }
        Ok(spec)
    }

    pub fn load_panel(&self) -> Result<IndicatorPanel, AnalysisError> {
        Ok(load_panel(&self.panel, &self.meta, &self.columns.clone().unwrap_or_default())?)
    }

    pub fn validate(&self, panel: &IndicatorPanel) -> Result<(), AnalysisError> {
        if self.runs == 0 {
            return Err(AnalysisError::InvalidSpec("runs must be >= 1".into()));
        }
        if self.countries.is_empty() || self.modes.is_empty() {
            return Err(AnalysisError::InvalidSpec("countries and modes must be nonempty".into()));
        }
        if self.metrics.is_empty() {
            return Err(AnalysisError::InvalidSpec("at least one metric is required".into()));
        }
        let pooled = self.pool.values().flatten();
        for code in self.countries.iter().chain(&self.modes).chain(pooled) {
            panel.country_idx(code)?;
        }
        Ok(())
    }

    pub fn gammas(&self) -> Result<BTreeMap<String, f64>, AnalysisError> {
        match &self.gamma {
            GammaSource::Fixed(g) => {
                if !(*g > 0.0) {
                    return Err(AnalysisError::InvalidSpec(format!("fixed gamma must be positive, got {g}")));
                }
                Ok(self.countries.iter().map(|c| (c.clone(), *g)).collect())
            }
            GammaSource::Calibration(path) => {
                let text = std::fs::read_to_string(path).map_err(io_err(path))?;
                let cal: CalibrationResult = serde_json::from_str(&text)?;
                for c in &self.countries {
                    if !cal.gamma.contains_key(c) {
                        return Err(AnalysisError::MissingGamma(c.clone()));
                    }
                }
                Ok(cal.gamma)
            }
        }
    }
}

/// Estimates one network per country, pooling series as configured.
pub fn estimate_networks(
    panel: &IndicatorPanel,
    countries: &[String],
    pool: &BTreeMap<String, Vec<String>>,
) -> Result<BTreeMap<String, SpilloverNetwork>, AnalysisError> {
    countries
        .par_iter()
        .map(|c| {
            let own = panel.country_matrix(c)?;
            let pooled = pool
                .get(c)
                .map(|others| others.iter().map(|o| panel.country_matrix(o)).collect::<Result<Vec<_>, _>>())
                .transpose()?
                .unwrap_or_default();
            let net = estimate_network(&own, &pooled).map_err(|source| AnalysisError::Network {
                country: c.clone(),
                source,
            })?;
            Ok((c.clone(), net))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PillarDiff {
    pub pillar: u8,
    pub diff: f64,
}

/// Summary of one coherence estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub country: String,
    pub mode: String,
    pub metric: Metric,
    pub h: f64,
    pub p_value: f64,
    pub stars: Stars,
    pub diffs: Vec<f64>,
    pub pillar_diffs: Vec<PillarDiff>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub country: String,
    pub mode: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceGrid {
    pub metric: Metric,
    pub countries: Vec<String>,
    pub modes: Vec<String>,
    /// Mode-major, in `modes` × `countries` order; self-pairs are absent.
    pub cells: Vec<GridCell>,
    /// Country → mode with the highest `h` (first in mode order on ties).
    pub best_mode: BTreeMap<String, String>,
    /// Mode → arithmetic mean of its cells' `h`.
    pub mode_average: BTreeMap<String, f64>,
    pub failures: Vec<CellFailure>,
    pub complete: bool,
}

impl CoherenceGrid {
    pub fn from_cells(
        metric: Metric,
        countries: Vec<String>,
        modes: Vec<String>,
        cells: Vec<GridCell>,
        failures: Vec<CellFailure>,
    ) -> Self {
        let mut best_mode = BTreeMap::new();
        for country in &countries {
            let mut best: Option<&GridCell> = None;
            for mode in &modes {
                if let Some(cell) = cells.iter().find(|c| &c.country == country && &c.mode == mode) {
                    if best.is_none_or(|b| cell.h > b.h) {
                        best = Some(cell);
                    }
                }
            }
            if let Some(b) = best {
                best_mode.insert(country.clone(), b.mode.clone());
            }
        }
        let mut mode_average = BTreeMap::new();
        for mode in &modes {
            let hs: Vec<f64> = cells.iter().filter(|c| &c.mode == mode).map(|c| c.h).collect();
            if !hs.is_empty() {
                mode_average.insert(mode.clone(), hs.iter().sum::<f64>() / hs.len() as f64);
            }
        }
        let complete = failures.is_empty();
        Self {
            metric,
            countries,
            modes,
            cells,
            best_mode,
            mode_average,
            failures,
            complete,
        }
    }

    pub fn cell(&self, country: &str, mode: &str) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.country == country && c.mode == mode)
    }
}

/// Everything [`run_grid`] needs besides file paths.
pub struct GridContext<'a> {
    pub panel: &'a IndicatorPanel,
    pub networks: &'a BTreeMap<String, SpilloverNetwork>,
    pub gammas: &'a BTreeMap<String, f64>,
    pub countries: &'a [String],
    pub modes: &'a [String],
    pub runs: usize,
    pub seed: u64,
    pub metric: Metric,
    pub engine: EngineOptions,
}

/// Seed of the retrospective runs of `country`.
pub fn retrospective_seed(master: u64, country: &str) -> u64 {
    labeled_seed(master, &["retrospective", country])
}

/// Seed of the consistent runs of a (country, mode) cell.
pub fn cell_seed(master: u64, country: &str, mode: &str) -> u64 {
    labeled_seed(master, &["consistent", country, mode])
}

fn cell_path(dir: &Path, metric: Metric, country: &str, mode: &str) -> PathBuf {
    dir.join("cells").join(metric.as_str()).join(format!("{country}__{mode}.json"))
}

/// Computes a coherence cell for every (country, mode) pair with
/// `country != mode`.
///
/// With `cache_dir`, finished cells are written as one JSON file each and
/// cells already on disk are reused, so an interrupted grid resumes where it
/// stopped. Failed cells are listed in `failures` and the grid is flagged
/// incomplete.
pub fn run_grid(ctx: &GridContext<'_>, cache_dir: Option<&Path>) -> Result<CoherenceGrid, AnalysisError> {
    if ctx.runs == 0 {
        return Err(AnalysisError::InvalidSpec("runs must be >= 1".into()));
    }
    let pairs: Vec<(&String, &String)> = ctx
        .modes
        .iter()
        .flat_map(|m| ctx.countries.iter().filter(move |c| *c != m).map(move |c| (c, m)))
        .collect();

    let mut done: BTreeMap<(String, String), GridCell> = BTreeMap::new();
    if let Some(dir) = cache_dir {
        for (c, m) in &pairs {
            let path = cell_path(dir, ctx.metric, c, m);
            if let Ok(text) = std::fs::read_to_string(&path) {
                if let Ok(cell) = serde_json::from_str::<GridCell>(&text) {
                    done.insert(((*c).clone(), (*m).clone()), cell);
                }
            }
        }
        std::fs::create_dir_all(dir.join("cells").join(ctx.metric.as_str()))
            .map_err(io_err(dir))?;
    }
    let pending: Vec<(&String, &String)> = pairs
        .iter()
        .copied()
        .filter(|(c, m)| !done.contains_key(&((*c).clone(), (*m).clone())))
        .collect();

    let pending_countries: BTreeSet<&String> = pending.iter().map(|(c, _)| *c).collect();
    let retrospective: BTreeMap<&String, Result<ProfileEstimate, String>> = pending_countries
        .into_par_iter()
        .map(|c| (c, retrospective_for(ctx, c).map_err(|e| e.to_string())))
        .collect();

    let pillars = ctx.panel.pillars();
    let computed: Vec<Result<GridCell, CellFailure>> = pending
        .par_iter()
        .map(|&(c, m)| {
            let fail = |error: String| CellFailure {
                country: c.clone(),
                mode: m.clone(),
                error,
            };
            let p = retrospective[c].as_ref().map_err(|e| fail(e.clone()))?;
            let cell = compute_cell(ctx, c, m, p, &pillars).map_err(|e| fail(e.to_string()))?;
            if let Some(dir) = cache_dir {
                persist_cell(dir, &cell).map_err(|e| fail(e.to_string()))?;
            }
            Ok(cell)
        })
        .collect();

    let mut failures = Vec::new();
    for r in computed {
        match r {
            Ok(cell) => {
                done.insert((cell.country.clone(), cell.mode.clone()), cell);
            }
            Err(f) => failures.push(f),
        }
    }
    let cells = pairs
        .iter()
        .filter_map(|(c, m)| done.remove(&((*c).clone(), (*m).clone())))
        .collect();
    Ok(CoherenceGrid::from_cells(
        ctx.metric,
        ctx.countries.to_vec(),
        ctx.modes.to_vec(),
        cells,
        failures,
    ))
}

fn gamma_of(ctx: &GridContext<'_>, country: &str) -> Result<f64, AnalysisError> {
    ctx.gammas
        .get(country)
        .copied()
        .ok_or_else(|| AnalysisError::MissingGamma(country.to_string()))
}

fn network_of<'a>(ctx: &'a GridContext<'_>, country: &str) -> Result<&'a SpilloverNetwork, AnalysisError> {
    ctx.networks.get(country).ok_or_else(|| AnalysisError::Network {
        country: country.to_string(),
        source: NetworkError::Invalid("no network estimated".into()),
    })
}

fn retrospective_for(ctx: &GridContext<'_>, country: &str) -> Result<ProfileEstimate, AnalysisError> {
    Ok(retrospective_profile(
        ctx.panel,
        country,
        network_of(ctx, country)?,
        gamma_of(ctx, country)?,
        ctx.runs,
        retrospective_seed(ctx.seed, country),
        &ctx.engine,
    )?)
}

fn compute_cell(
    ctx: &GridContext<'_>,
    country: &str,
    mode: &str,
    retrospective: &ProfileEstimate,
    pillars: &[u8],
) -> Result<GridCell, AnalysisError> {
    let q = consistent_profile(
        ctx.panel,
        country,
        mode,
        network_of(ctx, country)?,
        gamma_of(ctx, country)?,
        ctx.runs,
        cell_seed(ctx.seed, country, mode),
        &ctx.engine,
    )?;
    let res = coherence_with_significance(&retrospective.profiles(), &q.profiles(), ctx.metric)?;
    let pillar_diffs = pillar_inefficiencies(&res.diffs, pillars)?
        .into_iter()
        .map(|(pillar, diff)| PillarDiff { pillar, diff })
        .collect();
    Ok(GridCell {
        country: country.to_string(),
        mode: mode.to_string(),
        metric: ctx.metric,
        h: res.h,
        p_value: res.p_value,
        stars: res.stars,
        diffs: res.diffs,
        pillar_diffs,
    })
}

fn persist_cell(dir: &Path, cell: &GridCell) -> Result<(), AnalysisError> {
    let path = cell_path(dir, cell.metric, &cell.country, &cell.mode);
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_string_pretty(cell)?).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceMeasure {
    /// Income per capita.
    Ipc,
    /// Mean of all of the mode's indicator values over all years.
    MeanIndicators,
}

impl FromStr for PerformanceMeasure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ipc" => Ok(Self::Ipc),
            "mean_indicators" => Ok(Self::MeanIndicators),
            _ => Err(format!("unknown measure {s:?} (expected ipc or mean_indicators)")),
        }
    }
}

pub fn mode_performance(
    panel: &IndicatorPanel,
    mode: &str,
    measure: PerformanceMeasure,
) -> Result<f64, AnalysisError> {
    Ok(match measure {
        PerformanceMeasure::Ipc => panel.country_info(mode)?.ipc,
        PerformanceMeasure::MeanIndicators => {
            let m = panel.country_matrix(mode)?;
            let count = m.len() * m[0].len();
            m.iter().flatten().sum::<f64>() / count as f64
        }
    })
}

/// Pearson correlation between each mode's average `h` and its performance.
pub fn mode_performance_correlation(
    grid: &CoherenceGrid,
    panel: &IndicatorPanel,
    measure: PerformanceMeasure,
) -> Result<f64, AnalysisError> {
    let modes: Vec<&String> = grid.modes.iter().filter(|m| grid.mode_average.contains_key(*m)).collect();
    if modes.len() < 3 {
        return Err(AnalysisError::TooFewModes(modes.len()));
    }
    let avg: Vec<f64> = modes.iter().map(|m| grid.mode_average[*m]).collect();
    let perf = modes
        .iter()
        .map(|m| mode_performance(panel, m, measure))
        .collect::<Result<Vec<f64>, _>>()?;
    pearson(&perf, &avg).ok_or(AnalysisError::ZeroVariance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityPoint {
    pub mode: String,
    pub similarity: f64,
    pub h: f64,
}

/// `(indicator similarity, h)` per mode for one country.
pub fn similarity_vs_coherence(
    country: &str,
    modes: &[String],
    grid: &CoherenceGrid,
    panel: &IndicatorPanel,
) -> Result<Vec<SimilarityPoint>, AnalysisError> {
    modes
        .iter()
        .map(|mode| {
            let cell = grid.cell(country, mode).ok_or_else(|| AnalysisError::MissingCell {
                country: country.to_string(),
                mode: mode.clone(),
            })?;
            Ok(SimilarityPoint {
                mode: mode.clone(),
                similarity: indicator_similarity(panel, country, mode)?,
                h: cell.h,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(format!("unknown report format {s:?} (expected csv or json)")),
        }
    }
}

/// `h` to four decimals followed by its significance stars.
pub fn format_cell(cell: &GridCell) -> String {
    format!("{:.4}{}", cell.h, cell.stars.as_str())
}

/// Writes report files for `grid` into `out_dir` and returns their paths.
///
/// CSV output: `table.csv` (modes × countries, starred `h`),
/// `mode_averages.csv`, `best_modes.csv`, `inefficiencies.csv` and
/// `pillar_inefficiencies.csv`. JSON output: `grid.json`.
pub fn emit_report(grid: &CoherenceGrid, format: ReportFormat, out_dir: &Path) -> Result<Vec<PathBuf>, AnalysisError> {
    if grid.cells.is_empty() {
        return Err(AnalysisError::GridEmpty);
    }
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    match format {
        ReportFormat::Json => {
            files.push((out_dir.join("grid.json"), serde_json::to_string_pretty(grid)? + "\n"));
        }
        ReportFormat::Csv => {
            let mut table = String::from("mode");
            for c in &grid.countries {
                write!(table, ",{c}").unwrap();
            }
            table.push('\n');
            for m in &grid.modes {
                table.push_str(m);
                for c in &grid.countries {
                    table.push(',');
                    if let Some(cell) = grid.cell(c, m) {
                        table.push_str(&format_cell(cell));
                    }
                }
                table.push('\n');
            }
            files.push((out_dir.join("table.csv"), table));

            let mut averages = String::from("mode,average_h,cells\n");
            for m in &grid.modes {
                if let Some(avg) = grid.mode_average.get(m) {
                    let n = grid.cells.iter().filter(|c| &c.mode == m).count();
                    writeln!(averages, "{m},{avg:.6},{n}").unwrap();
                }
            }
            files.push((out_dir.join("mode_averages.csv"), averages));

            let mut best = String::from("country,best_mode,h\n");
            for c in &grid.countries {
                if let Some(m) = grid.best_mode.get(c) {
                    let h = grid.cell(c, m).map(|x| x.h).unwrap_or(f64::NAN);
                    writeln!(best, "{c},{m},{h:.6}").unwrap();
                }
            }
            files.push((out_dir.join("best_modes.csv"), best));

            let mut ineff = String::from("country,mode,indicator,diff\n");
            let mut pillar = String::from("country,mode,pillar,diff\n");
            for cell in &grid.cells {
                for (i, d) in cell.diffs.iter().enumerate() {
                    writeln!(ineff, "{},{},{i},{d:.9}", cell.country, cell.mode).unwrap();
                }
                for pd in &cell.pillar_diffs {
                    writeln!(pillar, "{},{},{},{:.9}", cell.country, cell.mode, pd.pillar, pd.diff).unwrap();
                }
            }
            files.push((out_dir.join("inefficiencies.csv"), ineff));
            files.push((out_dir.join("pillar_inefficiencies.csv"), pillar));
        }
    }
    for (path, text) in &files {
        std::fs::write(path, text).map_err(io_err(path))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

pub fn read_grid(path: &Path) -> Result<CoherenceGrid, AnalysisError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(country: &str, mode: &str, h: f64, p: f64) -> GridCell {
        GridCell {
            country: country.into(),
            mode: mode.into(),
            metric: Metric::L1,
            h,
            p_value: p,
            stars: Stars::from_p_value(p),
            diffs: vec![0.01, -0.01],
            pillar_diffs: vec![PillarDiff { pillar: 1, diff: 0.0 }],
        }
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn grid_aggregates() {
        let cells = vec![
            cell("A", "X", 0.1, 0.01),
            cell("B", "X", 0.3, 0.2),
            cell("A", "Y", 0.1, 0.07),
            cell("B", "Y", -0.2, 0.01),
        ];
        let g = CoherenceGrid::from_cells(Metric::L1, strings(&["A", "B"]), strings(&["X", "Y"]), cells, vec![]);
        assert!((g.mode_average["X"] - 0.2).abs() < 1e-15);
        assert!((g.mode_average["Y"] + 0.05).abs() < 1e-15);
        // tie for A goes to the first mode
        assert_eq!(g.best_mode["A"], "X");
        assert_eq!(g.best_mode["B"], "X");
        assert!(g.complete);
    }

    #[test]
    fn report_stars_and_empty_grid() {
        let dir = tempfile::tempdir().unwrap();
        let empty = CoherenceGrid::from_cells(Metric::L1, vec![], vec![], vec![], vec![]);
        assert!(matches!(emit_report(&empty, ReportFormat::Csv, dir.path()), Err(AnalysisError::GridEmpty)));

        let cells = vec![cell("A", "X", 0.12, 0.04), cell("B", "X", -0.05, 0.06), cell("A", "Y", 0.0, 0.9)];
        let g = CoherenceGrid::from_cells(Metric::L1, strings(&["A", "B"]), strings(&["X", "Y"]), cells, vec![]);
        emit_report(&g, ReportFormat::Csv, dir.path()).unwrap();
        let table = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
        assert_eq!(table, "mode,A,B\nX,0.1200**,-0.0500*\nY,0.0000,\n");
    }
}
