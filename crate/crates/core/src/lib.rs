//! Single-server queues with soft deadlines.
//!
//! Customers arrive with a service requirement and a patience; the deadline
//! is arrival time plus patience. The server is non-preemptive and never
//! idles while someone waits. This crate simulates such queues under
//! several selection policies (EDF, LDF, FIFO, LIFO, random), checks the
//! interchange coupling between two policies busy cycle by busy cycle via
//! the majorization order, and estimates stationary per-customer means of
//! convex functions of the residual patience at service start.

// negated float comparisons are deliberate: NaN must fail the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrivals;
pub mod cli;
pub mod coupling;
pub mod disciplines;
pub mod error;
pub mod majorization;
pub mod queue;
pub mod stats;

pub use arrivals::{
    generate_trace, ArrivalTrace, Customer, DistributionSpec, Horizon, ScenarioConfig,
};
pub use coupling::{verify_coupling, CouplingReport};
pub use disciplines::{check_ll_order, select, DecisionState, DisciplineId};
pub use error::{Error, Result};
pub use majorization::{majorizes, ConvexFn, Permutation};
pub use queue::{simulate, Cycle, Schedule};
pub use stats::{compare_disciplines, palm_mean, ComparisonReport, PalmEstimate};
