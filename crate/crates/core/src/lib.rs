//! Fair trajectory planning for UAV fleets whose missions are written in
//! signal temporal logic.

pub mod dynamics;
pub mod error;
pub mod fairness;
pub mod lengths;
pub mod online;
pub mod planner;
pub mod scenario;
pub mod stl;

pub use dynamics::{FleetState, InputPlan, UavModel};
pub use error::{Error, Result};
pub use fairness::FairnessSpec;
pub use lengths::{LengthTuple, PLBox};
pub use planner::{PlanResult, Planner, PlannerConfig, SolveOutcome};
pub use stl::{Formula, Predicate, Region, Trace};
pub use scenario::Scenario;
