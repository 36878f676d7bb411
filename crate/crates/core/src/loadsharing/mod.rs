//! Time-homogeneous load-sharing models: chain laws, closed-form `Psi`,
//! ordering classes, minimal-stability checks and generators.

pub mod exchangeable;
pub mod generator;
pub mod hyperexp;
pub mod partition;
pub mod spec;
pub mod stability;

pub use exchangeable::{ex_thls_model, ExThls};
pub use generator::{generate_singleton_min_stable, solves_stage_systems, GeneratedModel};
pub use hyperexp::Hyperexp;
pub use partition::{
    conditional_orderstat_law, lambda_partition, mixture_orderstats, orderstats_by_orderings,
    MixtureOrderStats, StabilityBasis, ThlsClass, ThlsPartition,
};
pub use spec::{
    cyclic_preference_model, ordering_probabilities, ordering_probability, thls_psi, OdThlsSpec,
};
pub use stability::{check_min_stable_r3, necessary_min_stable, NecessaryReport, R3Verdict};
