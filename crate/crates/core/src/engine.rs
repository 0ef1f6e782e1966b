//! Agent-based allocation game.
//!
//! A central authority splits a budget `B` across `N` policy issues in
//! proportion to a propensity that grows with the gap to target and with the
//! issue's network degree, and shrinks when the issue's official was caught
//! diverting funds. Each official keeps a contribution `C_i <= P_i` and
//! adapts it by comparing the last two changes in contribution and benefit.
//! Indicators move toward their targets with the official's contribution
//! plus incoming spillovers.
//!
//! # Period order
//!
//! Before the loop, `P_0` is allocated from `I_0` with no supervision, and
//! two bootstrap lags of contributions are drawn uniformly from `[0, P_0]`
//! with benefits `I_0 + P_0 - C`. Period `t` then opens with indicators
//! `I_{t-1}` and runs:
//!
//! 1. governance maps `f_R`, `f_C` from `I_{t-1}`;
//! 2. allocation `P_t` using the previous period's supervision outcomes;
//! 3. contribution update `C_t` from the two lags, clamped to `[0, P_t]`;
//! 4. supervision draw `theta_t` from `(P_t, C_t, f_C)`;
//! 5. indicator step `I_t`;
//! 6. benefit `F_t = (I_t + P_t - C_t)(1 - theta_t f_R)`.
//!
//! The loop stops once every positive gap `T_i - I_i` is at most `epsilon`,
//! or after `max_periods` periods.
//!
//! # Random draws
//!
//! A single `ChaCha8Rng` seeded from `SimulationConfig::seed` is consumed in
//! a fixed order: `N` uniforms for the older bootstrap lag, `N` for the newer
//! one, then `N` uniforms per period for supervision (node `i` is caught when
//! its uniform is below its probability), regardless of the probabilities.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::SpilloverNetwork;
use crate::profile::{AllocationProfile, ProfileError};
use crate::seed::{rng_from_seed, run_seed};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("governance level {0} outside [0,1]")]
    OutOfRange(f64),
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("contribution {contribution} exceeds allocation {allocation} at node {node}")]
    InvalidContribution {
        node: usize,
        contribution: f64,
        allocation: f64,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least one run")]
    NoRuns,
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

pub const DEFAULT_EPSILON: f64 = 1e-2;
pub const DEFAULT_MAX_PERIODS: usize = 10_000;

fn default_beta() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_max_periods() -> usize {
    DEFAULT_MAX_PERIODS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Initial indicator levels `I_0`.
    pub initial: Vec<f64>,
    /// Targets `T`.
    pub targets: Vec<f64>,
    pub network: SpilloverNetwork,
    /// Policy quality; scales the indicator step.
    pub gamma: f64,
    /// Budget fraction `B`.
    pub budget: f64,
    /// Spillover scaling applied to every edge.
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_periods")]
    pub max_periods: usize,
    #[serde(default)]
    pub seed: u64,
    /// Node index of the rule-of-law indicator.
    pub rule_of_law: usize,
    /// Node index of the control-of-corruption indicator.
    pub control_of_corruption: usize,
}

impl SimulationConfig {
    pub fn n(&self) -> usize {
        self.initial.len()
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let n = self.initial.len();
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        if n == 0 {
            return bad("no indicators".into());
        }
        if self.targets.len() != n || self.network.n() != n {
            return bad(format!(
                "length mismatch: initial {n}, targets {}, network {}",
                self.targets.len(),
                self.network.n()
            ));
        }
        for (name, v) in [("initial", &self.initial), ("targets", &self.targets)] {
            if v.iter().any(|x| !x.is_finite() || !(0.0..=1.0).contains(x)) {
                return bad(format!("{name} values must lie in [0,1]"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.budget > 0.0 && self.budget <= 1.0) {
            return bad(format!("budget must lie in (0,1], got {}", self.budget));
        }
        if !self.beta.is_finite() {
            return bad("beta must be finite".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.max_periods == 0 {
            return bad("max_periods must be positive".into());
        }
        if self.rule_of_law >= n || self.control_of_corruption >= n {
            return bad("role index outside the indicator range".into());
        }
        Ok(())
    }

    fn converged(&self, levels: &[f64]) -> bool {
        max_positive_gap(&self.targets, levels) <= self.epsilon
    }
}

pub fn max_positive_gap(targets: &[f64], levels: &[f64]) -> f64 {
    targets
        .iter()
        .zip(levels)
        .map(|(t, i)| (t - i).max(0.0))
        .fold(0.0, f64::max)
}

/// Maps a governance indicator level to a probability: `x / e^(1 - x)`.
pub fn governance_map(level: f64) -> Result<f64, EngineError> {
    if !(0.0..=1.0).contains(&level) {
        return Err(EngineError::OutOfRange(level));
    }
    Ok(level / (1.0 - level).exp())
}

/// Splits `budget` across nodes.
///
/// Propensity `q_i = max(0, gap_i) (K_i + 1) (1 - theta_i f_R)`, shares
/// `q_i / sum q`. If every propensity is zero the budget is spread uniformly
/// over nodes with a positive gap, or over all nodes when none has one.
pub fn allocate(
    gaps: &[f64],
    degrees: &[usize],
    theta: &[bool],
    f_r: f64,
    budget: f64,
) -> Result<Vec<f64>, EngineError> {
    let n = gaps.len();
    if degrees.len() != n || theta.len() != n {
        return Err(EngineError::InvalidConfig("allocate: length mismatch".into()));
    }
    if gaps.iter().any(|g| !g.is_finite()) || !f_r.is_finite() || !budget.is_finite() {
        return Err(EngineError::NonFiniteInput("allocate".into()));
    }
    if !(budget > 0.0) {
        return Err(EngineError::InvalidConfig(format!("budget must be positive, got {budget}")));
    }
    let q: Vec<f64> = (0..n)
        .map(|i| {
            let punish = if theta[i] { 1.0 - f_r } else { 1.0 };
            gaps[i].max(0.0) * (degrees[i] + 1) as f64 * punish
        })
        .collect();
    let total: f64 = q.iter().sum();
    if total > 0.0 {
        return Ok(q.iter().map(|qi| qi / total * budget).collect());
    }
    let positive = gaps.iter().filter(|g| **g > 0.0).count();
    Ok(if positive > 0 {
        let share = budget / positive as f64;
        gaps.iter().map(|g| if *g > 0.0 { share } else { 0.0 }).collect()
    } else {
        vec![budget / n as f64; n]
    })
}

/// Probability of catching each official: `f_C (P_i - C_i) / sum_j (P_j - C_j)`.
pub fn supervision_probabilities(
    allocations: &[f64],
    contributions: &[f64],
    f_c: f64,
) -> Result<Vec<f64>, EngineError> {
    if allocations.len() != contributions.len() {
        return Err(EngineError::InvalidConfig("supervision: length mismatch".into()));
    }
    for (node, (&p, &c)) in allocations.iter().zip(contributions).enumerate() {
        if !(p.is_finite() && c.is_finite()) {
            return Err(EngineError::NonFiniteInput("supervision".into()));
        }
        if c > p || c < 0.0 {
            return Err(EngineError::InvalidContribution {
                node,
                contribution: c,
                allocation: p,
            });
        }
    }
    let total: f64 = allocations.iter().zip(contributions).map(|(p, c)| p - c).sum();
    if total <= 0.0 {
        return Ok(vec![0.0; allocations.len()]);
    }
    Ok(allocations
        .iter()
        .zip(contributions)
        .map(|(p, c)| f_c * (p - c) / total)
        .collect())
}

/// Draws supervision outcomes; consumes exactly one uniform per node.
pub fn sample_supervision<R: Rng + ?Sized>(
    allocations: &[f64],
    contributions: &[f64],
    f_c: f64,
    rng: &mut R,
) -> Result<Vec<bool>, EngineError> {
    let probs = supervision_probabilities(allocations, contributions, f_c)?;
    Ok(probs.iter().map(|&p| rng.random::<f64>() < p).collect())
}

/// `F = (I + P - C)(1 - theta f_R)`.
pub fn benefit(level: f64, allocation: f64, contribution: f64, caught: bool, f_r: f64) -> f64 {
    let punish = if caught { 1.0 - f_r } else { 1.0 };
    (level + allocation - contribution) * punish
}

/// Two lags of one official's contribution and benefit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeHistory {
    pub contribution_prev: f64,
    pub contribution_prev2: f64,
    pub benefit_prev: f64,
    pub benefit_prev2: f64,
}

/// `C_t = clamp(C_{t-1} + d |dF| (C_{t-1} + C_{t-2}) / 2, 0, P_t)` with
/// `d = sgn(dF * dC)` and `sgn(0) = 0`.
pub fn update_contribution(h: &NodeHistory, allocation: f64) -> f64 {
    let delta_f = h.benefit_prev - h.benefit_prev2;
    let delta_c = h.contribution_prev - h.contribution_prev2;
    let direction = sgn(delta_f * delta_c);
    let proposed =
        h.contribution_prev + direction * delta_f.abs() * (h.contribution_prev + h.contribution_prev2) / 2.0;
    proposed.max(0.0).min(allocation)
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Moves each indicator toward its target:
/// `I_i + gamma (T_i - I_i)(C_i + beta sum_j C_j A[j][i])`, clamped to
/// `[0, 1]`. Indicators at or above target are left unchanged.
pub fn step_indicators(
    levels: &[f64],
    contributions: &[f64],
    targets: &[f64],
    network: &SpilloverNetwork,
    gamma: f64,
    beta: f64,
) -> Result<Vec<f64>, EngineError> {
    let n = levels.len();
    if contributions.len() != n || targets.len() != n || network.n() != n {
        return Err(EngineError::InvalidConfig("step: length mismatch".into()));
    }
    let spill = network.incoming_sums(contributions);
    Ok((0..n)
        .map(|i| {
            let gap = targets[i] - levels[i];
            if gap <= 0.0 {
                return levels[i];
            }
            (levels[i] + gamma * gap * (contributions[i] + beta * spill[i])).clamp(0.0, 1.0)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub indicators: Vec<f64>,
    pub allocations: Vec<f64>,
    pub contributions: Vec<f64>,
    pub supervision: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    /// Pre-loop allocation `P_0` (no supervision).
    pub bootstrap_allocation: Vec<f64>,
    pub periods: Vec<Period>,
    /// Periods executed (`l`).
    pub length: usize,
    /// `sum_i sum_t (P_it - C_it) / (N B)` over executed periods.
    pub diversion: f64,
    pub converged: bool,
}

impl SimulationTrace {
    /// Time-averaged allocation shares; the bootstrap allocation when no
    /// period ran.
    pub fn profile(&self, budget: f64) -> Result<AllocationProfile, EngineError> {
        if self.periods.is_empty() {
            return Ok(AllocationProfile::from_weights(&self.bootstrap_allocation)?);
        }
        let n = self.bootstrap_allocation.len();
        let mut acc = vec![0.0; n];
        for p in &self.periods {
            for (a, v) in acc.iter_mut().zip(&p.allocations) {
                *a += v / budget;
            }
        }
        let m = self.periods.len() as f64;
        let mean: Vec<f64> = acc.into_iter().map(|a| a / m).collect();
        Ok(AllocationProfile::from_weights(&mean)?)
    }
}

pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationTrace, EngineError> {
    config.validate()?;
    let n = config.n();
    let degrees = config.network.degrees();
    let mut rng = rng_from_seed(config.seed);
    let mut levels = config.initial.clone();

    let gaps = |levels: &[f64]| -> Vec<f64> { config.targets.iter().zip(levels).map(|(t, i)| t - i).collect() };

    let f_r0 = governance_map(levels[config.rule_of_law])?;
    let p0 = allocate(&gaps(&levels), degrees, &vec![false; n], f_r0, config.budget)?;

    if config.converged(&levels) {
        return Ok(SimulationTrace {
            bootstrap_allocation: p0,
            periods: Vec::new(),
            length: 0,
            diversion: 0.0,
            converged: true,
        });
    }

    let mut c_prev2: Vec<f64> = p0.iter().map(|p| rng.random::<f64>() * p).collect();
    let mut c_prev: Vec<f64> = p0.iter().map(|p| rng.random::<f64>() * p).collect();
    let mut f_prev2: Vec<f64> = (0..n).map(|i| benefit(levels[i], p0[i], c_prev2[i], false, f_r0)).collect();
    let mut f_prev: Vec<f64> = (0..n).map(|i| benefit(levels[i], p0[i], c_prev[i], false, f_r0)).collect();
    let mut theta = vec![false; n];

    let mut periods = Vec::new();
    let mut diverted = 0.0;
    let mut converged = false;
    while periods.len() < config.max_periods {
        let f_r = governance_map(levels[config.rule_of_law])?;
        let f_c = governance_map(levels[config.control_of_corruption])?;
        let allocations = allocate(&gaps(&levels), degrees, &theta, f_r, config.budget)?;
        let contributions: Vec<f64> = (0..n)
            .map(|i| {
                let h = NodeHistory {
                    contribution_prev: c_prev[i],
                    contribution_prev2: c_prev2[i],
                    benefit_prev: f_prev[i],
                    benefit_prev2: f_prev2[i],
                };
                update_contribution(&h, allocations[i])
            })
            .collect();
        theta = sample_supervision(&allocations, &contributions, f_c, &mut rng)?;
        levels = step_indicators(
            &levels,
            &contributions,
            &config.targets,
            &config.network,
            config.gamma,
            config.beta,
        )?;
        let benefits: Vec<f64> = (0..n)
            .map(|i| benefit(levels[i], allocations[i], contributions[i], theta[i], f_r))
            .collect();
        diverted += allocations.iter().zip(&contributions).map(|(p, c)| p - c).sum::<f64>();

        c_prev2 = std::mem::replace(&mut c_prev, contributions.clone());
        f_prev2 = std::mem::replace(&mut f_prev, benefits);
        periods.push(Period {
            indicators: levels.clone(),
            allocations,
            contributions,
            supervision: theta.clone(),
        });
        if config.converged(&levels) {
            converged = true;
            break;
        }
    }

    let length = periods.len();
    Ok(SimulationTrace {
        bootstrap_allocation: p0,
        periods,
        length,
        diversion: diverted / (n as f64 * config.budget),
        converged,
    })
}

/// Summary of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub profile: AllocationProfile,
    pub length: usize,
    pub diversion: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEstimate {
    /// Across-run mean profile.
    pub mean: AllocationProfile,
    pub runs: Vec<RunSummary>,
}

impl ProfileEstimate {
    pub fn profiles(&self) -> Vec<AllocationProfile> {
        self.runs.iter().map(|r| r.profile.clone()).collect()
    }

    pub fn mean_diversion(&self) -> f64 {
        self.runs.iter().map(|r| r.diversion).sum::<f64>() / self.runs.len() as f64
    }
}

/// Runs `n_runs` simulations with seeds derived from `master_seed` (the
/// config's own seed is ignored). Runs execute in parallel; results are in
/// run order and independent of scheduling.
pub fn monte_carlo(
    config: &SimulationConfig,
    n_runs: usize,
    master_seed: u64,
) -> Result<Vec<RunSummary>, EngineError> {
    if n_runs == 0 {
        return Err(EngineError::NoRuns);
    }
    config.validate()?;
    (0..n_runs as u64)
        .into_par_iter()
        .map(|k| {
            let seed = run_seed(master_seed, k);
            let cfg = SimulationConfig { seed, ..config.clone() };
            let trace = run_simulation(&cfg)?;
            Ok(RunSummary {
                seed,
                profile: trace.profile(cfg.budget)?,
                length: trace.length,
                diversion: trace.diversion,
                converged: trace.converged,
            })
        })
        .collect()
}

/// Expected allocation profile over `n_runs` Monte Carlo runs.
pub fn expected_profile(
    config: &SimulationConfig,
    n_runs: usize,
    master_seed: u64,
) -> Result<ProfileEstimate, EngineError> {
    let runs = monte_carlo(config, n_runs, master_seed)?;
    let profiles: Vec<AllocationProfile> = runs.iter().map(|r| r.profile.clone()).collect();
    Ok(ProfileEstimate {
        mean: AllocationProfile::mean(&profiles)?,
        runs,
    })
}
