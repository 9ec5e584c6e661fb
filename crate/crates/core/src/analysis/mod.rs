//! Closed-form spike-count bounds, the effective-dimension estimator,
//! empirical Lipschitz estimation, log-log scaling fits and data readers.

mod bounds;
mod data;
mod effdim;
mod lipschitz;
mod scaling;

pub use bounds::{
    bound_report, compression_ratio, design_rule_steps, energy_estimate, input_dependent_bound,
    lower_bound_spikes, BoundInputs, BoundReport, CONSTANT_CONVENTION, DESIGN_RULE_C,
    DESIGN_RULE_C_INTERVAL, E_SOP_JOULES,
};
pub use data::{read_cifar_batches, read_csv_matrix, read_points_csv, CIFAR_RECORD_LEN};
pub use effdim::{effective_dimension, EffDimConfig, EffDimReport, PcaMethod, EXACT_PCA_LIMIT};
pub use lipschitz::{estimate_lipschitz, uniform_box, LipschitzEstimate};
pub use scaling::{fit_scaling_law, ScalingFit};
