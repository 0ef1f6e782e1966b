//! Fitting `gamma` to observed diversion of public funds.
//!
//! Each country is simulated from its first-year to its last-year levels;
//! the mean normalized diversion `D` over Monte Carlo runs is compared with
//! the empirical corruption level `1 - mean(diversion indicator)`.
//! Countries are ordered by empirical corruption and split into contiguous
//! clusters that share one `gamma`. For every cluster count `k` the best
//! split is found by dynamic programming over segment costs, where a
//! segment's cost is the golden-section minimum of
//! `sum_c (D_c(gamma) - e_c)^2`. The reported `k` minimizes
//! `loss_k + lambda * k * ln(M)`.
//!
//! Each country keeps one derived seed for every `gamma` it is evaluated at
//! (common random numbers), so `D_c` is a deterministic function of `gamma`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coherence::{country_config, CoherenceError, EngineOptions};
use crate::engine::{monte_carlo, EngineError, SimulationConfig};
use crate::network::SpilloverNetwork;
use crate::panel::{IndicatorPanel, PanelError, Role};
use crate::seed::labeled_seed;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("no network for country {0}")]
    NoNetwork(String),
    #[error("invalid gamma search bounds [{0}, {1}]")]
    SearchBoundsInvalid(f64, f64),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Coherence(#[from] CoherenceError),
}

/// `1 - mean` of the diversion-of-funds indicator over all panel years.
pub fn empirical_corruption(panel: &IndicatorPanel, country: &str) -> Result<f64, PanelError> {
    let series = panel.series(country, panel.role_index(Role::DiversionOfFunds))?;
    Ok(1.0 - series.iter().sum::<f64>() / series.len() as f64)
}

/// Mean normalized diversion over `n_runs` runs seeded from `seed`.
pub fn simulated_corruption(config: &SimulationConfig, n_runs: usize, seed: u64) -> Result<f64, EngineError> {
    let runs = monte_carlo(config, n_runs, seed)?;
    Ok(runs.iter().map(|r| r.diversion).sum::<f64>() / runs.len() as f64)
}

/// Golden-section minimization of `f` on `[lo, hi]` to width `tol`.
pub fn golden_section<F, E>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub k_max: usize,
    pub n_runs: usize,
    pub seed: u64,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    /// Golden-section stopping width.
    pub tolerance: f64,
    /// Penalty weight `lambda` on `k ln(M)`.
    pub penalty: f64,
    pub engine: EngineOptions,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            k_max: 8,
            n_runs: 200,
            seed: 0,
            gamma_lo: 1e-3,
            gamma_hi: 2.0,
            tolerance: 1e-3,
            penalty: 1.0,
            engine: EngineOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCandidate {
    pub k: usize,
    pub loss: f64,
    pub penalized: f64,
    pub clusters: Vec<Vec<String>>,
    pub gammas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub gamma: BTreeMap<String, f64>,
    pub cluster: BTreeMap<String, usize>,
    /// Countries per cluster, in empirical-corruption order.
    pub clusters: Vec<Vec<String>>,
    pub k: usize,
    pub loss: f64,
    pub empirical: BTreeMap<String, f64>,
    /// Mean simulated diversion at the fitted gamma.
    pub simulated: BTreeMap<String, f64>,
    pub candidates: Vec<ClusterCandidate>,
}

struct CountryModel {
    code: String,
    config: SimulationConfig,
    seed: u64,
    empirical: f64,
}

struct Evaluator<'a> {
    models: &'a [CountryModel],
    n_runs: usize,
    cache: Mutex<HashMap<(usize, u64), f64>>,
}

impl Evaluator<'_> {
    fn diversion(&self, idx: usize, gamma: f64) -> Result<f64, EngineError> {
        let key = (idx, gamma.to_bits());
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let m = &self.models[idx];
        let cfg = SimulationConfig { gamma, ..m.config.clone() };
        let v = simulated_corruption(&cfg, self.n_runs, m.seed)?;
        self.cache.lock().expect("cache lock").insert(key, v);
        Ok(v)
    }

    fn segment_loss(&self, members: &[usize], gamma: f64) -> Result<f64, EngineError> {
        let parts = members
            .par_iter()
            .map(|&i| Ok((self.diversion(i, gamma)? - self.models[i].empirical).powi(2)))
            .collect::<Result<Vec<f64>, EngineError>>()?;
        Ok(parts.iter().sum())
    }
}

pub fn fit_gamma(
    panel: &IndicatorPanel,
    networks: &BTreeMap<String, SpilloverNetwork>,
    countries: &[String],
    settings: &CalibrationSettings,
) -> Result<CalibrationResult, CalibrationError> {
    let (lo, hi) = (settings.gamma_lo, settings.gamma_hi);
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(CalibrationError::SearchBoundsInvalid(lo, hi));
    }
    if settings.k_max == 0 || settings.n_runs == 0 || countries.is_empty() {
        return Err(CalibrationError::InvalidSettings(
            "k_max, n_runs and the country list must be nonempty".into(),
        ));
    }
    if !(settings.tolerance > 0.0) {
        return Err(CalibrationError::InvalidSettings("tolerance must be positive".into()));
    }

    let mut models = Vec::with_capacity(countries.len());
    for code in countries {
        let network = networks.get(code).ok_or_else(|| CalibrationError::NoNetwork(code.clone()))?;
        let config = country_config(
            panel,
            code,
            panel.first_year_vector(code)?,
            panel.last_year_vector(code)?,
            network,
            1.0,
            &settings.engine,
        )?;
        config.validate()?;
        models.push(CountryModel {
            code: code.clone(),
            config,
            seed: labeled_seed(settings.seed, &["calibration", code]),
            empirical: empirical_corruption(panel, code)?,
        });
    }
    models.sort_by(|a, b| a.empirical.total_cmp(&b.empirical).then_with(|| a.code.cmp(&b.code)));

    let m = models.len();
    let eval = Evaluator {
        models: &models,
        n_runs: settings.n_runs,
        cache: Mutex::new(HashMap::new()),
    };

    // cost[a][b]: fit of the segment a..=b
    let mut cost = vec![vec![(0.0, 0.0); m]; m];
    for a in 0..m {
        for b in a..m {
            let members: Vec<usize> = (a..=b).collect();
            let (gamma, loss) =
                golden_section(|g| eval.segment_loss(&members, g), lo, hi, settings.tolerance)?;
            cost[a][b] = (gamma, loss);
        }
    }

    let k_top = settings.k_max.min(m);
    // best[k][j]: minimal loss splitting the first j countries into k segments
    let mut best = vec![vec![f64::INFINITY; m + 1]; k_top + 1];
    let mut split = vec![vec![0usize; m + 1]; k_top + 1];
    best[0][0] = 0.0;
    for k in 1..=k_top {
        for j in k..=m {
            for i in (k - 1)..j {
                let v = best[k - 1][i] + cost[i][j - 1].1;
                if v < best[k][j] {
                    best[k][j] = v;
                    split[k][j] = i;
                }
            }
        }
    }

    let ln_m = (m as f64).ln();
    let mut candidates = Vec::with_capacity(k_top);
    for k in 1..=k_top {
        let mut bounds = Vec::with_capacity(k);
        let mut j = m;
        for kk in (1..=k).rev() {
            let i = split[kk][j];
            bounds.push((i, j - 1));
            j = i;
        }
        bounds.reverse();
        let clusters = bounds
            .iter()
            .map(|&(a, b)| models[a..=b].iter().map(|x| x.code.clone()).collect())
            .collect();
        let gammas = bounds.iter().map(|&(a, b)| cost[a][b].0).collect();
        candidates.push(ClusterCandidate {
            k,
            loss: best[k][m],
            penalized: best[k][m] + settings.penalty * k as f64 * ln_m,
            clusters,
            gammas,
        });
    }

    let chosen = candidates
        .iter()
        .min_by(|a, b| a.penalized.total_cmp(&b.penalized).then(a.k.cmp(&b.k)))
        .expect("at least one candidate")
        .clone();

    let mut gamma = BTreeMap::new();
    let mut cluster = BTreeMap::new();
    let mut simulated = BTreeMap::new();
    for (c, members) in chosen.clusters.iter().enumerate() {
        for code in members {
            gamma.insert(code.clone(), chosen.gammas[c]);
            cluster.insert(code.clone(), c);
            let idx = models.iter().position(|x| &x.code == code).expect("member of models");
            simulated.insert(code.clone(), eval.diversion(idx, chosen.gammas[c])?);
        }
    }
    let empirical = models.iter().map(|x| (x.code.clone(), x.empirical)).collect();

    Ok(CalibrationResult {
        gamma,
        cluster,
        clusters: chosen.clusters.clone(),
        k: chosen.k,
        loss: chosen.loss,
        empirical,
        simulated,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{CountryInfo, Indicator, PanelMeta, PanelParts};

    fn one_country_panel(div_series: &[f64]) -> IndicatorPanel {
        let indicators = (0..5)
            .map(|i| Indicator { id: format!("i{i}"), pillar: 1, direction_adjusted: true })
            .collect();
        let roles = [
            (Role::RuleOfLaw, "i0".to_string()),
            (Role::ControlOfCorruption, "i1".to_string()),
            (Role::DiversionOfFunds, "i2".to_string()),
        ]
        .into_iter()
        .collect();
        let years = div_series.len();
        let mut values = Vec::new();
        for i in 0..5 {
            for y in 0..years {
                values.push(if i == 2 { div_series[y] } else { 0.5 });
            }
        }
        IndicatorPanel::new(PanelParts {
            meta: PanelMeta {
                indicators,
                roles,
                countries: vec![CountryInfo { code: "AAA".into(), ipc: 1.0, budget: 0.5 }],
                early_members: vec![],
                reference: None,
            },
            years: (0..years as i32).map(|k| 2006 + k).collect(),
            values,
        })
        .unwrap()
    }

    #[test]
    fn empirical_corruption_cases() {
        assert_eq!(empirical_corruption(&one_country_panel(&[1.0, 1.0]), "AAA").unwrap(), 0.0);
        assert_eq!(empirical_corruption(&one_country_panel(&[0.0, 0.0]), "AAA").unwrap(), 1.0);
        assert!((empirical_corruption(&one_country_panel(&[0.6, 0.8]), "AAA").unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn golden_section_finds_quadratic_minimum() {
        let (x, fx) = golden_section::<_, ()>(|x| Ok((x - 0.37).powi(2)), 0.0, 2.0, 1e-6).unwrap();
        assert!((x - 0.37).abs() < 1e-6);
        assert!(fx < 1e-11);
        // boundary minimum
        let (x, _) = golden_section::<_, ()>(|x| Ok(x), 0.5, 1.0, 1e-6).unwrap();
        assert!((x - 0.5).abs() < 1e-6);
    }

    #[test]
    fn zero_length_runs_have_no_diversion() {
        let cfg = SimulationConfig {
            initial: vec![0.4, 0.5, 0.6],
            targets: vec![0.4, 0.5, 0.6],
            network: SpilloverNetwork::empty(3),
            gamma: 0.5,
            budget: 0.4,
            beta: 1.0,
            epsilon: 1e-2,
            max_periods: 100,
            seed: 0,
            rule_of_law: 0,
            control_of_corruption: 1,
        };
        assert_eq!(simulated_corruption(&cfg, 10, 3).unwrap(), 0.0);
    }

    #[test]
    fn bad_bounds_and_missing_network() {
        let panel = one_country_panel(&[0.5, 0.5]);
        let countries = vec!["AAA".to_string()];
        let settings = CalibrationSettings { gamma_lo: 1.0, gamma_hi: 0.5, ..Default::default() };
        assert!(matches!(
            fit_gamma(&panel, &BTreeMap::new(), &countries, &settings),
            Err(CalibrationError::SearchBoundsInvalid(..))
        ));
        assert!(matches!(
            fit_gamma(&panel, &BTreeMap::new(), &countries, &CalibrationSettings::default()),
            Err(CalibrationError::NoNetwork(_))
        ));
    }
}
