//! Prediction-free baseline that splits capacity uniformly over the front.
//!
//! Every front job receives rate `min{1, m/|F_t|}`.  With a single machine
//! this is round-robin in the rate model; with `m` machines the front is
//! saturated once it has at most `m` jobs.

use crate::engine::{Decision, PolicyView, RateVector};
use crate::policy::{Policy, PolicyError};
use crate::rational::{rat, Rat};
use num::One;

/// Uniform-rate policy; see [`equal_share`].
pub struct EqualShare;

/// Builds the policy that assigns rate `min{1, m/|F_t|}` to every front job.
pub fn equal_share() -> EqualShare {
    EqualShare
}

impl Policy for EqualShare {
    fn name(&self) -> String {
        "equal_share".to_string()
    }

    fn decide(&mut self, view: &PolicyView) -> Result<Decision, PolicyError> {
        let k = view.front.len();
        if k == 0 {
            return Ok(Decision::rates(RateVector::new()));
        }
        let share = rat(view.machines as i64, k as i64);
        let share = if share > Rat::one() { Rat::one() } else { share };
        let ids: Vec<_> = view.front.iter().map(|f| f.id).collect();
        Ok(Decision::rates(RateVector::uniform(&ids, share)))
    }
}

// ───────────────────────────── tests ─────────────────────────────
