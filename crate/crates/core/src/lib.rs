//! Subscription provisioning of semantic-data transmissions from edge devices
//! to virtual service providers under stochastic demand.
//!
//! A VSP reserves bundles of transmissions from edge devices before its
//! demand is known (paying a membership fee per device it reserves from) and
//! buys any shortfall on demand at a higher per-transmission price once the
//! demand scenario is realized. [`solvers::solve_sip`] finds the plan with
//! minimal expected total cost; [`baselines`] holds the expected-value and
//! random comparison schemes.

pub mod baselines;
pub mod error;
pub mod ingest;
pub mod model;
pub mod recourse;
pub mod similarity;
pub mod solvers;
pub mod synth;

pub use error::{IngestError, ModelError, SimilarityError, SolverError};
pub use model::{
    on_demand_unit_cost, reservation_bundle_cost, transmission_energy, transmission_time, validate_instance,
    CostBreakdown, DemandScenario, EdgeDevice, ProblemInstance, SimilarityTensor, ValidationReport,
    Violation, Vsp, VspDemand,
};
pub use recourse::{
    evaluate_total, optimal_recourse, shortfall, RecourseDecision, ReservationPlan, Solution,
};
pub use solvers::{
    bundle_upper_bound, solve_dip, solve_sip, sweep_first_stage, DipInstance, SolverConfig, SweepPoint,
};
