//! Success-rate-driven selection of the fields to fuzz.
//!
//! Walks the candidate list in order; for each candidate it fuzzes the
//! candidate together with everything already accepted, measures the attack
//! success rate over a number of trials, and keeps the candidate only while
//! the rate stays strictly above the threshold. Single pass: a rejected
//! field is not retried after later fields join the accepted list.

use std::collections::BTreeMap;

use crate::packet::FieldPath;
use crate::rng::{derive_seed_indexed, hash_label, rng_from, Rng};

use super::{FuzzError, FuzzPlan};

/// One attack launch under a given fuzzed-field set. Implementations must be
/// deterministic given the field set and the trial RNG.
pub trait SuccessOracle {
    fn trial(&self, fuzzed: &[FieldPath], rng: &mut Rng) -> bool;
}

fn field_set_hash(fields: &[FieldPath]) -> u64 {
    let joined: Vec<String> = fields.iter().map(|f| f.to_string()).collect();
    hash_label(&joined.join(","))
}

/// Measured success rate for one candidate set. Trial RNGs derive from
/// (seed, field-set hash, trial index) so results are independent of how
/// trials are scheduled.
pub fn success_rate<O: SuccessOracle + ?Sized>(
    oracle: &O,
    fields: &[FieldPath],
    trials: u32,
    seed: u64,
) -> f64 {
    let set_hash = field_set_hash(fields);
    let mut successes = 0u32;
    for i in 0..trials {
        let mut rng = rng_from(derive_seed_indexed(seed, "oracle-trial", set_hash ^ u64::from(i)));
        if oracle.trial(fields, &mut rng) {
            successes += 1;
        }
    }
    f64::from(successes) / f64::from(trials)
}

/// Builds the fuzz plan from a candidate field list.
pub fn select_fields<O: SuccessOracle + ?Sized>(
    alist: &[FieldPath],
    oracle: &O,
    trials: u32,
    threshold: f64,
    seed: u64,
) -> Result<FuzzPlan, FuzzError> {
    assert!(trials >= 1, "trials must be at least 1");
    for f in alist {
        let schema = f.schema()?;
        if schema.is_computed() {
            return Err(FuzzError::ComputedFieldInAList(f.to_string()));
        }
    }
    let mut accepted: Vec<FieldPath> = Vec::new();
    for candidate in alist {
        let mut attempt = accepted.clone();
        attempt.push(candidate.clone());
        let rate = success_rate(oracle, &attempt, trials, seed);
        if rate > threshold {
            accepted = attempt;
        }
    }
    FuzzPlan::new(accepted, seed)
}

/// Analytic oracle where each field carries an independent success factor
/// and the joint success probability is the product over fuzzed fields.
pub struct ProductOracle {
    factors: BTreeMap<FieldPath, f64>,
}

impl ProductOracle {
    pub fn new(factors: &[(FieldPath, f64)]) -> ProductOracle {
        ProductOracle {
            factors: factors.iter().cloned().collect(),
        }
    }

    pub fn joint_probability(&self, fields: &[FieldPath]) -> f64 {
        fields
            .iter()
            .map(|f| self.factors.get(f).copied().unwrap_or(1.0))
            .product()
    }
}

impl SuccessOracle for ProductOracle {
    fn trial(&self, fuzzed: &[FieldPath], rng: &mut Rng) -> bool {
        use rand::Rng as _;
        rng.gen::<f64>() < self.joint_probability(fuzzed)
    }
}
