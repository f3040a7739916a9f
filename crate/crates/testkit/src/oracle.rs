//! Brute-force reference implementations in exact rational arithmetic.
//!
//! Everything here recomputes results from raw sample records by direct
//! enumeration, sharing no code with the aggregation paths it checks.
//! Comparisons use exact value equality (no tolerance): fixture and
//! property-test answers are constructed to be either identical or far
//! apart, so the tolerance regime never matters.

use fobar::core::AnswerValue;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

/// One backward prediction list keyed by (candidate index, mask index).
pub type BackwardRecord = ((usize, usize), Vec<Option<AnswerValue>>);

/// Exact equality: rational values bit-for-bit, labels case-insensitively.
pub fn oracle_equal(a: &AnswerValue, b: &AnswerValue) -> bool {
    match (a, b) {
        (AnswerValue::Numeric { value: va, .. }, AnswerValue::Numeric { value: vb, .. }) => {
            va == vb
        }
        (AnswerValue::Choice { label: la, .. }, AnswerValue::Choice { label: lb, .. }) => {
            la.eq_ignore_ascii_case(lb)
        }
        (AnswerValue::Text { raw: ra }, AnswerValue::Text { raw: rb }) => {
            ra.trim().eq_ignore_ascii_case(rb.trim())
        }
        _ => false,
    }
}

/// One deduplicated candidate with its enumerated votes.
#[derive(Debug, Clone)]
pub struct OracleCandidate {
    pub value: AnswerValue,
    pub votes: u64,
    pub first_seen: usize,
    pub p_forward: BigRational,
}

/// Re-enumerate the vote multiset: for every sample, scan the candidate
/// list built so far. p = votes / total, exactly.
pub fn forward_oracle(samples: &[AnswerValue]) -> Vec<OracleCandidate> {
    let mut candidates: Vec<OracleCandidate> = Vec::new();
    for (i, sample) in samples.iter().enumerate() {
        match candidates
            .iter_mut()
            .find(|c| oracle_equal(&c.value, sample))
        {
            Some(c) => c.votes += 1,
            None => candidates.push(OracleCandidate {
                value: sample.clone(),
                votes: 1,
                first_seen: i,
                p_forward: BigRational::from_integer(BigInt::from(0)),
            }),
        }
    }
    let total = BigInt::from(samples.len() as u64);
    for c in &mut candidates {
        c.p_forward = BigRational::new(BigInt::from(c.votes), total.clone());
    }
    candidates
}

/// Count correct recoveries per candidate by walking every (mask, sample)
/// cell of the prediction grid.
pub fn z_oracle(
    n_candidates: usize,
    predictions: &[BackwardRecord],
    truths: &[AnswerValue],
) -> Vec<u64> {
    let mut z = vec![0u64; n_candidates];
    for ((candidate, mask), preds) in predictions {
        for pred in preds.iter().flatten() {
            if oracle_equal(pred, &truths[*mask]) {
                z[*candidate] += 1;
            }
        }
    }
    z
}

/// Epsilon-smoothed backward proportions with epsilon = 1 / 10^8 as an
/// exact rational.
pub fn backward_oracle(z: &[u64]) -> Vec<BigRational> {
    backward_oracle_with_eps(
        z,
        &BigRational::new(BigInt::from(1), BigInt::from(100_000_000u64)),
    )
}

pub fn backward_oracle_with_eps(z: &[u64], epsilon: &BigRational) -> Vec<BigRational> {
    let k = BigRational::from_integer(BigInt::from(z.len() as u64));
    let total: BigRational = z
        .iter()
        .map(|zi| BigRational::from_integer(BigInt::from(*zi)))
        .sum();
    let denom = &total + epsilon * &k;
    z.iter()
        .map(|zi| (BigRational::from_integer(BigInt::from(*zi)) + epsilon) / &denom)
        .collect()
}

/// Independent scalar route for the geometric combination:
/// exp(alpha*ln f + (1-alpha)*ln b), renormalized. Zero-probability terms
/// short-circuit to zero (and to the other factor at the endpoints).
pub fn combine_oracle(p_forward: &[f64], p_backward: &[f64], alpha: f64) -> Vec<f64> {
    let scores: Vec<f64> = p_forward
        .iter()
        .zip(p_backward)
        .map(|(&f, &b)| {
            let lf = if alpha == 0.0 {
                0.0
            } else if f == 0.0 {
                return 0.0;
            } else {
                alpha * f.ln()
            };
            let lb = if alpha == 1.0 {
                0.0
            } else if b == 0.0 {
                return 0.0;
            } else {
                (1.0 - alpha) * b.ln()
            };
            (lf + lb).exp()
        })
        .collect();
    let beta: f64 = scores.iter().sum();
    scores.into_iter().map(|s| s / beta).collect()
}

/// Argmax with the documented tie rules: combined probability, then forward
/// proportion, then earliest first-seen sample.
pub fn select_oracle(p_combined: &[f64], p_forward: &[f64], first_seen: &[usize]) -> usize {
    let mut best = 0usize;
    for i in 1..p_combined.len() {
        let better = p_combined[i] > p_combined[best]
            || (p_combined[i] == p_combined[best] && p_forward[i] > p_forward[best])
            || (p_combined[i] == p_combined[best]
                && p_forward[i] == p_forward[best]
                && first_seen[i] < first_seen[best]);
        if better {
            best = i;
        }
    }
    best
}

/// Standalone Self-Consistency: majority vote over the extracted answers,
/// ties to the earliest first-seen candidate.
pub fn majority_vote(samples: &[AnswerValue]) -> Option<AnswerValue> {
    let candidates = forward_oracle(samples);
    candidates
        .iter()
        .max_by(|a, b| a.votes.cmp(&b.votes).then(b.first_seen.cmp(&a.first_seen)))
        .map(|c| c.value.clone())
}

/// Standalone backward selection: argmax of the smoothed backward
/// proportions with the same tie rules as the full procedure (forward
/// proportion, then first seen).
pub fn backward_argmax(candidates: &[OracleCandidate], z: &[u64]) -> Option<AnswerValue> {
    let p_b = backward_oracle(z);
    let p_c: Vec<f64> = p_b.iter().map(|p| p.to_f64().unwrap()).collect();
    let p_f: Vec<f64> = candidates
        .iter()
        .map(|c| c.p_forward.to_f64().unwrap())
        .collect();
    let first_seen: Vec<usize> = candidates.iter().map(|c| c.first_seen).collect();
    if candidates.is_empty() {
        return None;
    }
    Some(
        candidates[select_oracle(&p_c, &p_f, &first_seen)]
            .value
            .clone(),
    )
}

pub fn rational_to_f64(value: &BigRational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}
