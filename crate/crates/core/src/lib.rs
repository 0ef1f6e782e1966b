//! Policy priority inference.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`panel`] loads and validates a country × indicator × year panel of
//!    normalized development indicators.
//! 2. [`network`] estimates a directed spillover network per country
//!    (TMFG filtering of a correlation matrix, then pairwise orientation).
//! 3. [`engine`] simulates the allocation game between a central authority
//!    and public servants over that network.
//! 4. [`calibration`] fits the policy-quality parameter `gamma` so simulated
//!    diversion of funds matches the empirical indicator.
//! 5. [`coherence`] compares retrospective and counterfactual allocation
//!    profiles through the coherence index `h`.
//!
//! [`analysis`] runs country × mode grids on top of these stages and writes
//! report files.

pub mod analysis;
pub mod calibration;
pub mod coherence;
pub mod engine;
pub mod network;
pub mod panel;
pub mod profile;
pub mod seed;
pub mod stats;

pub use analysis::{AnalysisError, CoherenceGrid, ExperimentSpec, GridCell};
pub use calibration::{CalibrationError, CalibrationResult, CalibrationSettings};
pub use coherence::{CoherenceError, CoherenceResult, Metric, Stars};
pub use engine::{EngineError, SimulationConfig, SimulationTrace};
pub use network::{NetworkError, SpilloverNetwork};
pub use panel::{CountryGroups, IndicatorPanel, PanelError, Role};
pub use profile::AllocationProfile;
