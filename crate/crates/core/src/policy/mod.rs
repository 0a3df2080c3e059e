//! Scheduling policies: rate-assigning algorithms driven by the engine.
//!
//! A [`Policy`] is queried with a [`PolicyView`] at every event and answers
//! with a [`Decision`] (rates plus an optional wake time). Policies may keep
//! internal state across queries but must be deterministic functions of the
//! view history and their construction parameters.
//!
//! Submodules provide the concrete algorithms:
//!
//! * [`equal_share`] — uniform rates over the front;
//! * [`wrr`] — weighted round robin on chains from static total-weight
//!   predictions, and its parallel-machine variant with the capacity loop;
//! * [`adaptive`] — proportional and order-based rates from adaptive
//!   predictions queried at every event;
//! * [`order_static`] — fixed rates from a single initial order;
//! * [`follow`] — nonpreemptive execution of action or input predictions;
//! * [`time_share`] — runs two policies against virtual progress ledgers on
//!   fractions λ and 1−λ of the machine, with [`robustify`] as the λ = 1/2
//!   combination with equal share.

use crate::engine::{Decision, PolicyView};
use crate::instance::JobId;

pub mod adaptive;
pub mod equal_share;
pub mod follow;
pub mod order_static;
pub mod time_share;
pub mod wrr;

pub use adaptive::{order_adaptive, wrr_adaptive};
pub use equal_share::equal_share;
pub use follow::{follow_action, follow_input};
pub use order_static::{order_static, OrderVariant};
pub use time_share::{robustify, time_share};
pub use wrr::{wdeq_chains, wrr_chains};

/// Failures a policy can raise while deciding rates.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    /// A front job appeared for which the prediction carries no entry.
    #[error("no prediction available for job {id}")]
    MissingPrediction { id: JobId },
    /// A completion revealed more than one successor although the policy
    /// only supports chain precedence.
    #[error("completion of job {completed} revealed {} successors {revealed:?}; chains expected", revealed.len())]
    BranchingDetected { completed: JobId, revealed: Vec<JobId> },
    /// An adaptive oracle could not answer a query.
    #[error("prediction oracle failed: {detail}")]
    OracleFailure { detail: String },
    /// A predicted order does not totally order the current front.
    #[error("predicted order does not rank job {id}")]
    OrderNotTotal { id: JobId },
    /// The initial order is missing an initial front job.
    #[error("initial order is missing initial front job {id}")]
    MissingInitialJob { id: JobId },
    /// A predicted instance has the wrong precedence structure.
    #[error("prediction topology mismatch: {detail}")]
    TopologyMismatch { detail: String },
    /// Predicted and actual chain structure cannot be matched.
    #[error("cannot match chains: expected {expected}, found {found}")]
    UnmatchedChain { expected: usize, found: usize },
}

/// A scheduling algorithm: stateful, deterministic, queried at every event.
pub trait Policy {
    /// Stable identity label (used in result rows and reports).
    fn name(&self) -> String;

    /// Rates (and optional wake time) to apply from the view's time onward.
    fn decide(&mut self, view: &PolicyView) -> Result<Decision, PolicyError>;
}

/// Wraps a closure as a policy; handy for tests and ad-hoc experiments.
pub struct FnPolicy<F> {
    name: String,
    f: F,
}

impl<F> Policy for FnPolicy<F>
where
    F: FnMut(&PolicyView) -> Result<Decision, PolicyError>,
{
    fn name(&self) -> String {
        self.name.clone()
    }

    fn decide(&mut self, view: &PolicyView) -> Result<Decision, PolicyError> {
        (self.f)(view)
    }
}

/// Builds a [`FnPolicy`] with the given label.
pub fn fn_policy<F>(name: &str, f: F) -> FnPolicy<F>
where
    F: FnMut(&PolicyView) -> Result<Decision, PolicyError>,
{
    FnPolicy { name: name.to_string(), f }
}
