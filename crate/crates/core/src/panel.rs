//! Development-indicator panels.
//!
//! A panel is a complete country × indicator × year cube of values in
//! `[0, 1]`, plus per-indicator pillar metadata, the three governance role
//! indicators, and per-country income and budget data. Panels are read from a
//! long-format CSV (`country,indicator,year,value`) and a JSON sidecar
//! ([`PanelMeta`]). Incomplete panels are rejected; nothing is imputed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_from_seed;

pub const PILLAR_COUNT: u8 = 13;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    MalformedFile(String),
    #[error("value {value} out of [0,1] for country {country}, indicator {indicator}, year {year}")]
    ValueOutOfRange {
        country: String,
        indicator: String,
        year: i32,
        value: f64,
    },
    #[error("missing cell for country {country}, indicator {indicator}, year {year}")]
    MissingCell {
        country: String,
        indicator: String,
        year: i32,
    },
    #[error("missing role mapping: {0}")]
    MissingRole(Role),
    #[error("unknown country: {0}")]
    UnknownCountry(String),
    #[error("group {0} has no members")]
    EmptyGroup(u8),
    #[error("dimension too small: {0}")]
    DimensionTooSmall(String),
    #[error("invalid panel: {0}")]
    Invalid(String),
}

/// Governance indicators with a dedicated role in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    RuleOfLaw,
    ControlOfCorruption,
    DiversionOfFunds,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::RuleOfLaw, Role::ControlOfCorruption, Role::DiversionOfFunds];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::RuleOfLaw => "rule_of_law",
            Role::ControlOfCorruption => "control_of_corruption",
            Role::DiversionOfFunds => "diversion_of_funds",
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub id: String,
    pub pillar: u8,
    /// Records that higher values already mean better outcomes. No
    /// transformation is applied based on this flag.
    #[serde(default = "default_true")]
    pub direction_adjusted: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryInfo {
    pub code: String,
    /// Income per capita, constant USD.
    pub ipc: f64,
    /// Public expenditure as a fraction of GDP, in `(0, 1]`.
    pub budget: f64,
}

/// JSON sidecar accompanying the long-format CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelMeta {
    pub indicators: Vec<Indicator>,
    #[serde(default)]
    pub roles: BTreeMap<Role, String>,
    pub countries: Vec<CountryInfo>,
    #[serde(default)]
    pub early_members: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

/// Column names of the long-format CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub country: String,
    pub indicator: String,
    pub year: String,
    pub value: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            country: "country".into(),
            indicator: "indicator".into(),
            year: "year".into(),
            value: "value".into(),
        }
    }
}

/// Unvalidated panel contents; [`IndicatorPanel::new`] checks every invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelParts {
    pub meta: PanelMeta,
    pub years: Vec<i32>,
    /// Country-major, then indicator, then year.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PanelParts", into = "PanelParts")]
pub struct IndicatorPanel {
    meta: PanelMeta,
    years: Vec<i32>,
    values: Vec<f64>,
    country_index: HashMap<String, usize>,
    role_index: BTreeMap<Role, usize>,
}

impl TryFrom<PanelParts> for IndicatorPanel {
    type Error = PanelError;

    fn try_from(parts: PanelParts) -> Result<Self, Self::Error> {
        IndicatorPanel::new(parts)
    }
}

impl From<IndicatorPanel> for PanelParts {
    fn from(p: IndicatorPanel) -> Self {
        PanelParts {
            meta: p.meta,
            years: p.years,
            values: p.values,
        }
    }
}

impl IndicatorPanel {
    pub fn new(parts: PanelParts) -> Result<Self, PanelError> {
        let PanelParts { meta, years, values } = parts;

        if years.len() < 2 {
            return Err(PanelError::DimensionTooSmall(format!(
                "need at least 2 years, got {}",
                years.len()
            )));
        }
        if years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PanelError::Invalid("years must be strictly increasing".into()));
        }
        if meta.indicators.is_empty() || meta.countries.is_empty() {
            return Err(PanelError::DimensionTooSmall("empty indicator or country list".into()));
        }

        let mut indicator_index = HashMap::new();
        for (i, ind) in meta.indicators.iter().enumerate() {
            if !(1..=PILLAR_COUNT).contains(&ind.pillar) {
                return Err(PanelError::Invalid(format!(
                    "indicator {} has pillar {} outside 1..={PILLAR_COUNT}",
                    ind.id, ind.pillar
                )));
            }
            if indicator_index.insert(ind.id.clone(), i).is_some() {
                return Err(PanelError::Invalid(format!("duplicate indicator {}", ind.id)));
            }
        }

        let mut country_index = HashMap::new();
        for (c, info) in meta.countries.iter().enumerate() {
            if !(info.budget > 0.0 && info.budget <= 1.0) {
                return Err(PanelError::Invalid(format!(
                    "budget fraction {} of {} outside (0,1]",
                    info.budget, info.code
                )));
            }
            if !info.ipc.is_finite() {
                return Err(PanelError::Invalid(format!("non-finite income for {}", info.code)));
            }
            if country_index.insert(info.code.clone(), c).is_some() {
                return Err(PanelError::Invalid(format!("duplicate country {}", info.code)));
            }
        }

        let mut role_index = BTreeMap::new();
        for role in Role::ALL {
            let id = meta.roles.get(&role).ok_or(PanelError::MissingRole(role))?;
            let idx = *indicator_index.get(id).ok_or_else(|| {
                PanelError::Invalid(format!("role {role} maps to unknown indicator {id}"))
            })?;
            role_index.insert(role, idx);
        }

        for code in meta.early_members.iter().chain(meta.reference.iter()) {
            if !country_index.contains_key(code) {
                return Err(PanelError::UnknownCountry(code.clone()));
            }
        }

        let expected = meta.countries.len() * meta.indicators.len() * years.len();
        if values.len() != expected {
            return Err(PanelError::MalformedFile(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        let n_ind = meta.indicators.len();
        let n_years = years.len();
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                let c = k / (n_ind * n_years);
                let i = (k / n_years) % n_ind;
                let y = k % n_years;
                return Err(PanelError::ValueOutOfRange {
                    country: meta.countries[c].code.clone(),
                    indicator: meta.indicators[i].id.clone(),
                    year: years[y],
                    value: v,
                });
            }
        }

        Ok(Self {
            meta,
            years,
            values,
            country_index,
            role_index,
        })
    }

    pub fn meta(&self) -> &PanelMeta {
        &self.meta
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn indicators(&self) -> &[Indicator] {
        &self.meta.indicators
    }

    pub fn n_indicators(&self) -> usize {
        self.meta.indicators.len()
    }

    pub fn n_countries(&self) -> usize {
        self.meta.countries.len()
    }

    pub fn countries(&self) -> impl Iterator<Item = &str> {
        self.meta.countries.iter().map(|c| c.code.as_str())
    }

    pub fn country_info(&self, code: &str) -> Result<&CountryInfo, PanelError> {
        Ok(&self.meta.countries[self.country_idx(code)?])
    }

    pub fn country_idx(&self, code: &str) -> Result<usize, PanelError> {
        self.country_index
            .get(code)
            .copied()
            .ok_or_else(|| PanelError::UnknownCountry(code.to_string()))
    }

    pub fn contains_country(&self, code: &str) -> bool {
        self.country_index.contains_key(code)
    }

    /// Node index of a role indicator.
    pub fn role_index(&self, role: Role) -> usize {
        self.role_index[&role]
    }

    pub fn pillars(&self) -> Vec<u8> {
        self.meta.indicators.iter().map(|i| i.pillar).collect()
    }

    pub fn value(&self, country: usize, indicator: usize, year: usize) -> f64 {
        let n_years = self.years.len();
        self.values[(country * self.n_indicators() + indicator) * n_years + year]
    }

    /// Indicator vector of `country` at year position `year` (0 = first year).
    pub fn year_vector(&self, country: &str, year: usize) -> Result<Vec<f64>, PanelError> {
        let c = self.country_idx(country)?;
        Ok((0..self.n_indicators()).map(|i| self.value(c, i, year)).collect())
    }

    pub fn first_year_vector(&self, country: &str) -> Result<Vec<f64>, PanelError> {
        self.year_vector(country, 0)
    }

    pub fn last_year_vector(&self, country: &str) -> Result<Vec<f64>, PanelError> {
        self.year_vector(country, self.years.len() - 1)
    }

    pub fn series(&self, country: &str, indicator: usize) -> Result<Vec<f64>, PanelError> {
        let c = self.country_idx(country)?;
        Ok((0..self.years.len()).map(|y| self.value(c, indicator, y)).collect())
    }

    /// Years × indicators matrix for one country.
    pub fn country_matrix(&self, country: &str) -> Result<Vec<Vec<f64>>, PanelError> {
        let c = self.country_idx(country)?;
        Ok((0..self.years.len())
            .map(|y| (0..self.n_indicators()).map(|i| self.value(c, i, y)).collect())
            .collect())
    }

    /// Groups from the sidecar's `reference` and `early_members`, if a
    /// reference country is configured.
    pub fn groups(&self) -> Option<Result<CountryGroups, PanelError>> {
        let reference = self.meta.reference.as_deref()?;
        let early: BTreeSet<String> = self.meta.early_members.iter().cloned().collect();
        Some(classify_groups(self, reference, &early))
    }

    /// Writes the long-format CSV with default column names.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PanelError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["country", "indicator", "year", "value"])
            .map_err(csv_err)?;
        for (c, info) in self.meta.countries.iter().enumerate() {
            for (i, ind) in self.meta.indicators.iter().enumerate() {
                for (y, year) in self.years.iter().enumerate() {
                    w.write_record([
                        info.code.as_str(),
                        ind.id.as_str(),
                        &year.to_string(),
                        &self.value(c, i, y).to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `panel.csv` and `meta.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), PanelError> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(File::create(dir.join("panel.csv"))?)?;
        let meta = serde_json::to_string_pretty(&self.meta)
            .map_err(|e| PanelError::MalformedFile(e.to_string()))?;
        std::fs::write(dir.join("meta.json"), meta)?;
        Ok(())
    }

    /// Canonical JSON dump (re-validated on load).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("panel serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, PanelError> {
        serde_json::from_str(s).map_err(|e| PanelError::MalformedFile(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> PanelError {
    PanelError::MalformedFile(e.to_string())
}

/// Loads a panel from a long-format CSV file and its JSON sidecar.
pub fn load_panel(csv_path: &Path, meta_path: &Path, schema: &ColumnMap) -> Result<IndicatorPanel, PanelError> {
    let meta_text = std::fs::read_to_string(meta_path)?;
    let meta: PanelMeta =
        serde_json::from_str(&meta_text).map_err(|e| PanelError::MalformedFile(format!("sidecar: {e}")))?;
    read_panel(File::open(csv_path)?, meta, schema)
}

/// Builds a panel from CSV content and an already parsed sidecar.
pub fn read_panel<R: Read>(csv_source: R, meta: PanelMeta, schema: &ColumnMap) -> Result<IndicatorPanel, PanelError> {
    for role in Role::ALL {
        if !meta.roles.contains_key(&role) {
            return Err(PanelError::MissingRole(role));
        }
    }

    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(csv_source);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PanelError::MalformedFile(format!("missing column {name}")))
    };
    let (cc, ic, yc, vc) = (
        column(&schema.country)?,
        column(&schema.indicator)?,
        column(&schema.year)?,
        column(&schema.value)?,
    );

    let country_pos: HashMap<&str, usize> =
        meta.countries.iter().enumerate().map(|(i, c)| (c.code.as_str(), i)).collect();
    let indicator_pos: HashMap<&str, usize> =
        meta.indicators.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect();

    let mut cells: HashMap<(usize, usize, i32), f64> = HashMap::new();
    let mut years = BTreeSet::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let field = |k: usize| {
            record
                .get(k)
                .ok_or_else(|| PanelError::MalformedFile(format!("row {}: too few fields", line + 2)))
        };
        let country = field(cc)?;
        let indicator = field(ic)?;
        let c = *country_pos
            .get(country)
            .ok_or_else(|| PanelError::MalformedFile(format!("row {}: country {country} not in sidecar", line + 2)))?;
        let i = *indicator_pos.get(indicator).ok_or_else(|| {
            PanelError::MalformedFile(format!("row {}: indicator {indicator} not in sidecar", line + 2))
        })?;
        let year: i32 = field(yc)?
            .parse()
            .map_err(|_| PanelError::MalformedFile(format!("row {}: bad year", line + 2)))?;
        let value: f64 = field(vc)?
            .parse()
            .map_err(|_| PanelError::MalformedFile(format!("row {}: bad value", line + 2)))?;
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(PanelError::ValueOutOfRange {
                country: country.to_string(),
                indicator: indicator.to_string(),
                year,
                value,
            });
        }
        if cells.insert((c, i, year), value).is_some() {
            return Err(PanelError::MalformedFile(format!(
                "duplicate cell ({country}, {indicator}, {year})"
            )));
        }
        years.insert(year);
    }

    let years: Vec<i32> = years.into_iter().collect();
    let mut values = Vec::with_capacity(meta.countries.len() * meta.indicators.len() * years.len());
    for (c, info) in meta.countries.iter().enumerate() {
        for (i, ind) in meta.indicators.iter().enumerate() {
            for &year in &years {
                let v = cells.get(&(c, i, year)).ok_or_else(|| PanelError::MissingCell {
                    country: info.code.clone(),
                    indicator: ind.id.clone(),
                    year,
                })?;
                values.push(*v);
            }
        }
    }

    IndicatorPanel::new(PanelParts { meta, years, values })
}

/// Country group labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Group {
    /// Early OECD members.
    EarlyMember = 1,
    /// Higher income per capita than the reference country.
    HigherIncome = 2,
    /// The reference country.
    Reference = 3,
    LowerIncome = 4,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::EarlyMember, Group::HigherIncome, Group::Reference, Group::LowerIncome];
}

impl From<Group> for u8 {
    fn from(g: Group) -> u8 {
        g as u8
    }
}

impl TryFrom<u8> for Group {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Group::EarlyMember),
            2 => Ok(Group::HigherIncome),
            3 => Ok(Group::Reference),
            4 => Ok(Group::LowerIncome),
            _ => Err(format!("group label {v} outside 1..=4")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryGroups {
    pub assignment: BTreeMap<String, Group>,
}

impl CountryGroups {
    pub fn group_of(&self, country: &str) -> Option<Group> {
        self.assignment.get(country).copied()
    }

    pub fn members(&self, group: Group) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, g)| **g == group)
            .map(|(c, _)| c.as_str())
            .collect()
    }
}

pub fn classify_groups(
    panel: &IndicatorPanel,
    reference: &str,
    early_members: &BTreeSet<String>,
) -> Result<CountryGroups, PanelError> {
    let ref_ipc = panel.country_info(reference)?.ipc;
    for code in early_members {
        panel.country_idx(code)?;
    }
    if early_members.contains(reference) {
        return Err(PanelError::Invalid(format!(
            "reference country {reference} cannot also be an early member"
        )));
    }
    let assignment = panel
        .meta
        .countries
        .iter()
        .map(|info| {
            let group = if info.code == reference {
                Group::Reference
            } else if early_members.contains(&info.code) {
                Group::EarlyMember
            } else if info.ipc > ref_ipc {
                Group::HigherIncome
            } else {
                Group::LowerIncome
            };
            (info.code.clone(), group)
        })
        .collect();
    Ok(CountryGroups { assignment })
}

/// Mean indicator level per pillar and country group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PillarMeans {
    /// Pillars present in the panel, ascending.
    pub pillars: Vec<u8>,
    /// `means[p][g]` for `pillars[p]` and group `g + 1`; `None` for empty groups.
    pub means: Vec<[Option<f64>; 4]>,
}

impl PillarMeans {
    pub fn get(&self, pillar: u8, group: Group) -> Result<f64, PanelError> {
        let p = self
            .pillars
            .iter()
            .position(|&x| x == pillar)
            .ok_or_else(|| PanelError::Invalid(format!("pillar {pillar} not present")))?;
        self.means[p][group as usize - 1].ok_or(PanelError::EmptyGroup(group as u8))
    }
}

pub fn pillar_means(
    panel: &IndicatorPanel,
    groups: &CountryGroups,
    years: RangeInclusive<i32>,
) -> Result<PillarMeans, PanelError> {
    let year_pos: Vec<usize> = panel
        .years
        .iter()
        .enumerate()
        .filter(|(_, y)| years.contains(y))
        .map(|(k, _)| k)
        .collect();
    if year_pos.is_empty() {
        return Err(PanelError::Invalid(format!(
            "year range {}..={} selects no panel years",
            years.start(),
            years.end()
        )));
    }
    let pillars: BTreeSet<u8> = panel.meta.indicators.iter().map(|i| i.pillar).collect();
    let pillars: Vec<u8> = pillars.into_iter().collect();

    let mut sums = vec![[(0.0f64, 0usize); 4]; pillars.len()];
    for (c, info) in panel.meta.countries.iter().enumerate() {
        let g = groups
            .group_of(&info.code)
            .ok_or_else(|| PanelError::UnknownCountry(info.code.clone()))? as usize
            - 1;
        for (i, ind) in panel.meta.indicators.iter().enumerate() {
            let p = pillars.binary_search(&ind.pillar).expect("pillar collected above");
            for &y in &year_pos {
                sums[p][g].0 += panel.value(c, i, y);
                sums[p][g].1 += 1;
            }
        }
    }
    let means = sums
        .into_iter()
        .map(|row| row.map(|(s, n)| (n > 0).then(|| s / n as f64)))
        .collect();
    Ok(PillarMeans { pillars, means })
}

/// Deterministic synthetic panel of bounded random walks.
///
/// Countries are `C00, C01, ...`, indicators `I00, I01, ...` with pillars
/// assigned round-robin, years start at 2006. The first three indicators
/// carry the rule-of-law, control-of-corruption and diversion-of-funds roles.
pub fn generate_synthetic_panel(
    n_countries: usize,
    n_indicators: usize,
    n_years: usize,
    seed: u64,
) -> Result<IndicatorPanel, PanelError> {
    if n_countries < 2 || n_years < 2 {
        return Err(PanelError::DimensionTooSmall(format!(
            "countries {n_countries} and years {n_years} must both be >= 2"
        )));
    }
    if n_indicators < 5 {
        return Err(PanelError::DimensionTooSmall(format!(
            "need at least 5 indicators, got {n_indicators}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let indicators: Vec<Indicator> = (0..n_indicators)
        .map(|i| Indicator {
            id: format!("I{i:02}"),
            pillar: (i % PILLAR_COUNT as usize) as u8 + 1,
            direction_adjusted: true,
        })
        .collect();
    let countries: Vec<CountryInfo> = (0..n_countries)
        .map(|c| CountryInfo {
            code: format!("C{c:02}"),
            ipc: rng.random_range(1_000.0..60_000.0),
            budget: rng.random_range(0.1..0.5),
        })
        .collect();
    let mut values = Vec::with_capacity(n_countries * n_indicators * n_years);
    for _ in 0..n_countries {
        for _ in 0..n_indicators {
            let mut level: f64 = rng.random_range(0.1..0.8);
            for _ in 0..n_years {
                values.push(level);
                level = (level + rng.random_range(-0.03..0.06)).clamp(0.0, 1.0);
            }
        }
    }
    let roles = Role::ALL
        .iter()
        .enumerate()
        .map(|(k, r)| (*r, indicators[k].id.clone()))
        .collect();
    IndicatorPanel::new(PanelParts {
        meta: PanelMeta {
            indicators,
            roles,
            countries,
            early_members: Vec::new(),
            reference: None,
        },
        years: (0..n_years as i32).map(|k| 2006 + k).collect(),
        values,
    })
}
