//! The invariant surface, its growth, the minimal set and entropy indicators.

pub mod mesh;

pub use mesh::{build_m0, LevelSummary, MeshConfig, MeshNode, PropellerMesh, Strand};
pub mod growth;

pub use growth::{growth_function, growth_type_fit, GrowthCurve, GrowthModel, GrowthTypeReport, ModelFit};
pub mod minimal;

pub use minimal::{minimal_set_sample, MinimalSetSample, PointCloud, SpecialOrbitSample};
pub mod entropy;

pub use entropy::{doubling_map_curve, entropy_estimates, greedy_separated, separated_count, separation_curve, EntropyEstimates, SeparatedCount, SeparationCurve};
