//! Exact-arithmetic simulation of non-clairvoyant scheduling with online
//! precedence constraints and learning-augmented predictions.
//!
//! Jobs carry a processing requirement `p` and a weight `w`; precedence edges
//! form a DAG, and a job is *revealed* to the scheduler only when all of its
//! predecessors have completed. Policies see the current front (revealed,
//! unfinished jobs) and job weights — never processing times or successors —
//! and assign each front job a rate in `[0, 1]` with total rate at most `m`
//! (the machine count). The objective is the weighted sum of completion times
//! `Σ w_j · C_j`. All arithmetic is exact (arbitrary-precision rationals), so
//! every comparison in the test suite is an equality or inequality on exact
//! values, never an epsilon check.
//!
//! Module map:
//!
//! * [`rational`] — the exact number type plus parsing/formatting helpers.
//! * [`instance`] — validated job sets with precedence DAGs, topology
//!   classification, antichain width, successor aggregates, JSON schema.
//! * [`engine`] — event-driven continuous-time simulation, trace recording,
//!   McNaughton wrap-around realization, rate-condition witness.
//! * [`policy`] — scheduling policies: equal share, weighted round robin and
//!   its adaptive/capped variants, order-based rates, prediction followers,
//!   and the time-sharing combinator.
//! * [`oracle`] — exact optima: the chain prefix-density rule, brute force
//!   for small instances (single machine and two machines), and the
//!   max-secondary-objective variant used by prediction error measures.
//! * [`prediction`] — prediction bundles (ground truth and seeded noise) and
//!   error measures (weighted inversions, augmented-chain Λ, distortion,
//!   order error L(ε)), plus the weight-split sub-instance construction.
//! * [`adversarial`] — parameterized lower-bound instance families with
//!   machine-readable reference values.
//! * [`random`] — seeded random instance models for experiment sweeps.

pub mod adversarial;
pub mod engine;
pub mod instance;
pub mod oracle;
pub mod policy;
pub mod prediction;
pub mod random;
pub mod rational;

pub use engine::{simulate, Decision, PolicyView, RateVector, ScheduleResult, Trace};
pub use instance::{Instance, Job, JobId};
pub use policy::{Policy, PolicyError};
pub use rational::Rat;
