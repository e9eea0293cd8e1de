//! Lifecycle phases, predictor correlation, genealogy matching and seasonality.

pub mod causal;
pub mod correlation;
pub mod genealogy;
pub mod lifecycle;
pub mod seasonal;

pub use causal::{CausalEvent, CausalFactorFlags, CausalKind};
pub use correlation::{
    classify_strength, pearson, pearson_values, select_predictors, CorrelationRow,
    CorrelationTable, Strength, StrengthThresholds,
};
pub use genealogy::{genealogy_match, CandidateScore, GenealogyConfig, GenealogyMatch};
pub use lifecycle::{segment_lifecycle, LifecyclePhases, Phase, PhaseConfig};
pub use seasonal::{decompose_seasonal, SeasonalDecomposition};
