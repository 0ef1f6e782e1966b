//! Coherence of policy priorities.
//!
//! The retrospective profile `P` is what a country's own observed trajectory
//! implies; the consistent profile `Q` is what the same country would do to
//! reach a development mode's levels; the inconsistent profile `R` reverses
//! `Q`'s priority ranking. The index
//! `h = (d(P,R) - d(P,Q)) / (d(P,R) + d(P,Q))` lies in `[-1, 1]`: positive
//! when `P` is closer to `Q` than to `R`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{expected_profile, EngineError, ProfileEstimate, SimulationConfig};
use crate::network::SpilloverNetwork;
use crate::panel::{IndicatorPanel, PanelError, Role};
use crate::profile::{AllocationProfile, ProfileError};
use crate::stats::pearson;

#[derive(Debug, Error, PartialEq)]
pub enum CoherenceError {
    #[error("profiles have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero-norm vector under the {0} metric")]
    DegenerateVector(Metric),
    #[error("both distances are zero; index undefined")]
    UndefinedIndex,
    #[error("run counts differ: {0} retrospective vs {1} consistent")]
    RunCountMismatch(usize, usize),
    #[error("no runs supplied")]
    NoRuns,
    #[error("mode {0} is not a valid development mode here")]
    UnknownMode(String),
    #[error("zero variance in indicator vector")]
    ZeroVariance,
    #[error("panel: {0}")]
    Panel(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

impl From<PanelError> for CoherenceError {
    fn from(e: PanelError) -> Self {
        CoherenceError::Panel(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Sum of absolute differences.
    #[default]
    L1,
    Cosine,
    Correlation,
    Euclidean,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::L1, Metric::Cosine, Metric::Correlation, Metric::Euclidean];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::L1 => "l1",
            Metric::Cosine => "cosine",
            Metric::Correlation => "correlation",
            Metric::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown metric {s:?} (expected l1, cosine, correlation or euclidean)"))
    }
}

/// Significance marker: `**` for p < 0.05, `*` for p < 0.1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stars {
    #[serde(rename = "")]
    None,
    #[serde(rename = "*")]
    One,
    #[serde(rename = "**")]
    Two,
}

impl Stars {
    pub fn from_p_value(p: f64) -> Self {
        if p < 0.05 {
            Stars::Two
        } else if p < 0.1 {
            Stars::One
        } else {
            Stars::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stars::None => "",
            Stars::One => "*",
            Stars::Two => "**",
        }
    }
}

/// Rank-reversing permutation of `q`'s values: the index holding the
/// largest share in `q` receives the smallest, and so on. Ties are ordered
/// by index.
pub fn inconsistent_profile(q: &AllocationProfile) -> AllocationProfile {
    let shares = q.shares();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| shares[a].total_cmp(&shares[b]).then(a.cmp(&b)));
    let mut descending: Vec<f64> = shares.to_vec();
    descending.sort_by(|a, b| b.total_cmp(a));
    let mut out = vec![0.0; shares.len()];
    for (idx, value) in order.into_iter().zip(descending) {
        out[idx] = value;
    }
    AllocationProfile::new(out).expect("a permutation of a valid profile is valid")
}

pub fn distance(x: &[f64], y: &[f64], metric: Metric) -> Result<f64, CoherenceError> {
    if x.len() != y.len() {
        return Err(CoherenceError::LengthMismatch(x.len(), y.len()));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let cosine = |a: &[f64], b: &[f64]| {
        let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
        if na == 0.0 || nb == 0.0 {
            return Err(CoherenceError::DegenerateVector(metric));
        }
        if a == b {
            return Ok(0.0);
        }
        Ok((1.0 - dot(a, b) / (na * nb)).max(0.0))
    };
    match metric {
        Metric::L1 => Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()),
        Metric::Euclidean => Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()),
        Metric::Cosine => cosine(x, y),
        Metric::Correlation => {
            let center = |v: &[f64]| {
                let m = v.iter().sum::<f64>() / v.len() as f64;
                v.iter().map(|a| a - m).collect::<Vec<f64>>()
            };
            cosine(&center(x), &center(y))
        }
    }
}

pub fn coherence_index(
    p: &AllocationProfile,
    q: &AllocationProfile,
    r: &AllocationProfile,
    metric: Metric,
) -> Result<f64, CoherenceError> {
    let d_pq = distance(p.shares(), q.shares(), metric)?;
    let d_pr = distance(p.shares(), r.shares(), metric)?;
    let total = d_pr + d_pq;
    if total <= 0.0 {
        return Err(CoherenceError::UndefinedIndex);
    }
    Ok(((d_pr - d_pq) / total).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceResult {
    pub metric: Metric,
    /// Mean of `h_samples`.
    pub h: f64,
    pub h_samples: Vec<f64>,
    /// `2 min(P(h <= 0), P(h >= 0))` over the samples, capped at 1.
    pub p_value: f64,
    pub stars: Stars,
    pub p_mean: AllocationProfile,
    pub q_mean: AllocationProfile,
    /// `P_i - Q_i` on the mean profiles.
    pub diffs: Vec<f64>,
}

/// Monte Carlo coherence: pairs the m-th retrospective run with the m-th
/// consistent run, derives `R_m` from `Q_m`, and summarizes the `h_m`.
pub fn coherence_with_significance(
    p_runs: &[AllocationProfile],
    q_runs: &[AllocationProfile],
    metric: Metric,
) -> Result<CoherenceResult, CoherenceError> {
    if p_runs.len() != q_runs.len() {
        return Err(CoherenceError::RunCountMismatch(p_runs.len(), q_runs.len()));
    }
    if p_runs.is_empty() {
        return Err(CoherenceError::NoRuns);
    }
    let h_samples = p_runs
        .iter()
        .zip(q_runs)
        .map(|(p, q)| coherence_index(p, q, &inconsistent_profile(q), metric))
        .collect::<Result<Vec<f64>, _>>()?;
    let m = h_samples.len() as f64;
    let h = h_samples.iter().sum::<f64>() / m;
    let below = h_samples.iter().filter(|v| **v <= 0.0).count() as f64 / m;
    let above = h_samples.iter().filter(|v| **v >= 0.0).count() as f64 / m;
    let p_value = (2.0 * below.min(above)).min(1.0);
    let p_mean = AllocationProfile::mean(p_runs)?;
    let q_mean = AllocationProfile::mean(q_runs)?;
    let diffs = allocative_inefficiencies(&p_mean, &q_mean)?;
    Ok(CoherenceResult {
        metric,
        h,
        h_samples,
        p_value,
        stars: Stars::from_p_value(p_value),
        p_mean,
        q_mean,
        diffs,
    })
}

/// `P_i - Q_i`: positive means over-expenditure relative to the mode.
pub fn allocative_inefficiencies(p: &AllocationProfile, q: &AllocationProfile) -> Result<Vec<f64>, CoherenceError> {
    if p.len() != q.len() {
        return Err(CoherenceError::LengthMismatch(p.len(), q.len()));
    }
    Ok(p.shares().iter().zip(q.shares()).map(|(a, b)| a - b).collect())
}

/// Sums per-indicator differences by pillar, ascending pillar order.
pub fn pillar_inefficiencies(diffs: &[f64], pillars: &[u8]) -> Result<Vec<(u8, f64)>, CoherenceError> {
    if diffs.len() != pillars.len() {
        return Err(CoherenceError::LengthMismatch(diffs.len(), pillars.len()));
    }
    let mut acc: BTreeMap<u8, f64> = BTreeMap::new();
    for (d, p) in diffs.iter().zip(pillars) {
        *acc.entry(*p).or_default() += d;
    }
    Ok(acc.into_iter().collect())
}

/// Pearson correlation between the country's final-year indicators and the
/// mode's first-year indicators.
pub fn indicator_similarity(panel: &IndicatorPanel, country: &str, mode: &str) -> Result<f64, CoherenceError> {
    let final_levels = panel.last_year_vector(country)?;
    let mode_levels = panel.first_year_vector(mode)?;
    pearson(&final_levels, &mode_levels).ok_or(CoherenceError::ZeroVariance)
}

/// Engine settings shared by every profile estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    #[serde(default = "EngineOptions::default_beta")]
    pub beta: f64,
    #[serde(default = "EngineOptions::default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "EngineOptions::default_max_periods")]
    pub max_periods: usize,
}

impl EngineOptions {
    fn default_beta() -> f64 {
        1.0
    }
    fn default_epsilon() -> f64 {
        crate::engine::DEFAULT_EPSILON
    }
    fn default_max_periods() -> usize {
        crate::engine::DEFAULT_MAX_PERIODS
    }
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            beta: Self::default_beta(),
            epsilon: Self::default_epsilon(),
            max_periods: Self::default_max_periods(),
        }
    }
}

/// Simulation config for `country` moving from `initial` to `targets`.
pub fn country_config(
    panel: &IndicatorPanel,
    country: &str,
    initial: Vec<f64>,
    targets: Vec<f64>,
    network: &SpilloverNetwork,
    gamma: f64,
    options: &EngineOptions,
) -> Result<SimulationConfig, CoherenceError> {
    Ok(SimulationConfig {
        initial,
        targets,
        network: network.clone(),
        gamma,
        budget: panel.country_info(country)?.budget,
        beta: options.beta,
        epsilon: options.epsilon,
        max_periods: options.max_periods,
        seed: 0,
        rule_of_law: panel.role_index(Role::RuleOfLaw),
        control_of_corruption: panel.role_index(Role::ControlOfCorruption),
    })
}

/// `P`: simulate from the country's first-year to its last-year levels.
pub fn retrospective_profile(
    panel: &IndicatorPanel,
    country: &str,
    network: &SpilloverNetwork,
    gamma: f64,
    runs: usize,
    seed: u64,
    options: &EngineOptions,
) -> Result<ProfileEstimate, CoherenceError> {
    let cfg = country_config(
        panel,
        country,
        panel.first_year_vector(country)?,
        panel.last_year_vector(country)?,
        network,
        gamma,
        options,
    )?;
    Ok(expected_profile(&cfg, runs, seed)?)
}

/// `Q`: simulate from the country's first-year levels to the mode's
/// first-year levels, with the country's own network, gamma and budget.
#[allow(clippy::too_many_arguments)]
pub fn consistent_profile(
    panel: &IndicatorPanel,
    country: &str,
    mode: &str,
    network: &SpilloverNetwork,
    gamma: f64,
    runs: usize,
    seed: u64,
    options: &EngineOptions,
) -> Result<ProfileEstimate, CoherenceError> {
    if mode == country || !panel.contains_country(mode) {
        return Err(CoherenceError::UnknownMode(mode.to_string()));
    }
    let cfg = country_config(
        panel,
        country,
        panel.first_year_vector(country)?,
        panel.first_year_vector(mode)?,
        network,
        gamma,
        options,
    )?;
    Ok(expected_profile(&cfg, runs, seed)?)
}
