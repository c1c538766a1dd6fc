//! Behind-the-meter flexibility: device simulators, sampling of feasible
//! deviation trajectories and the SVDD and virtual-battery surrogates that
//! summarise them.

pub mod devices;
pub mod epso;
pub mod evaluate;
pub mod feasibility;
pub mod surrogate;
pub mod svdd;
pub mod vbattery;

pub use devices::{
    simulate_battery, simulate_ewh, BatteryConfig, BatteryTrace, DeviceFleet, EwhConfig, EwhTrace, Shiftable,
};
pub use epso::{epso_sample, epso_sample_with, farthest_point_selection, mean_pairwise_distance, EpsoParams, TrajectorySet};
pub use evaluate::{build_test_sets, evaluate_surrogates, AccuracyRow, AccuracyTable, TestSets};
pub use feasibility::{check_feasible, FeasibilityContext, FeasibilityReport, FlexTrajectory, Violation, ViolationKind};
pub use surrogate::{contains_series, Surrogate};
pub use svdd::{svdd_classify, svdd_fit, svdd_fit_points, svdd_radius2, Label, SigmoidKernel, SvddModel, SvddParams};
pub use vbattery::{cumulative_soc, vbattery_classify, vbattery_fit, vbattery_fit_rows, vbattery_size, VirtualBattery};
