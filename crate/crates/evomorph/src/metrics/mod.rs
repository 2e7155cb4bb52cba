//! Run analysis: body distance and diversity, morphological traits,
//! principal components, and per-generation fitness series.

pub mod pca;
pub mod series;
pub mod ted;
pub mod traits;

pub use pca::{pca, MetricsError, PcaResult};
pub use series::{
    assessments_to_threshold, fitness_series, learning_delta_series, mean_ci,
    morphological_intelligence, FitnessRecord,
};
pub use ted::{mean_pairwise_distance, tree_edit_distance, AbstractTree};
pub use traits::{morphological_traits, TRAIT_NAMES};
