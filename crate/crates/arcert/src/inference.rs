//! Finite hypothesis classes, maximum-likelihood selection, and Monte-Carlo
//! certification of the information-theoretic error bounds.
//!
//! The selector is the exact finite-class MLE: the member maximizing the
//! joint trajectory log-density, ties broken to the smaller index. Because
//! the selector with this tie-breaking is a deterministic function of the
//! data, the mutual information between the selected law and the trajectory
//! equals the entropy of the selection marginal; [`selection_entropy`] is its
//! plug-in estimate over trials (a slight underestimate in expectation, which
//! the reports note).
//!
//! [`run_trials`] repeats simulate → select over derived per-trial streams
//! and aggregates the Gram-weighted parameter error and the exact squared
//! Hellinger distance of the selected law from the truth. Both per-trial
//! quantities depend only on the selected member, so they are memoized per
//! member; the Hellinger fallback estimate for horizons past the dense cap
//! is seeded by member index. Aggregation runs in member-index order over
//! the selection counts, so summaries are bit-identical for any worker
//! count.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::ar_model::{log_density, simulate, SystemMatrix, Trajectory, DENSE_SIZE_CAP};
use crate::divergence::{hellinger_sq_exact, hellinger_sq_mc};
use crate::error::{Error, Result};
use crate::gram::weighted_error;
use crate::seed::SeedSpec;

/// Two members closer than this (max-abs entrywise) count as identical.
pub const DISTINCTNESS_TOL: f64 = 1e-12;

/// Cap on the number of grid members.
pub const GRID_CAP: usize = 1_000_000;

/// Sample count for the Monte-Carlo Hellinger fallback past the dense cap.
pub const HELLINGER_FALLBACK_SAMPLES: usize = 10_000;

/// A finite indexed set of pairwise-distinct dynamics matrices.
#[derive(Debug, Clone)]
pub struct HypothesisClass {
    members: Vec<SystemMatrix>,
    truth_index: Option<usize>,
}

impl HypothesisClass {
    /// Validating constructor: non-empty, shared dimension, pairwise
    /// distinct beyond [`DISTINCTNESS_TOL`]. Quadratic in the member count;
    /// grid classes skip it because they are distinct by construction.
    pub fn new(members: Vec<SystemMatrix>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidClass("class must not be empty".into()));
        }
        let dim = members[0].dim();
        for (j, m) in members.iter().enumerate() {
            if m.dim() != dim {
                return Err(Error::InvalidClass(format!(
                    "member {j} has dimension {} but member 0 has {dim}",
                    m.dim()
                )));
            }
        }
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                if members[i].max_abs_diff(&members[j]) <= DISTINCTNESS_TOL {
                    return Err(Error::InvalidClass(format!(
                        "members {i} and {j} coincide within {DISTINCTNESS_TOL:e}"
                    )));
                }
            }
        }
        Ok(HypothesisClass {
            members,
            truth_index: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn member(&self, index: usize) -> &SystemMatrix {
        &self.members[index]
    }

    pub fn members(&self) -> &[SystemMatrix] {
        &self.members
    }

    /// Index of the member marked as the truth, if any.
    pub fn truth_index(&self) -> Option<usize> {
        self.truth_index
    }

    /// Index of the first member within [`DISTINCTNESS_TOL`] of `m`.
    pub fn position_of(&self, m: &SystemMatrix) -> Option<usize> {
        self.members
            .iter()
            .position(|c| c.max_abs_diff(m) <= DISTINCTNESS_TOL)
    }

    /// Ensure `truth` is a member: locate it or append it, record its index
    /// and return it.
    pub fn inject_truth(&mut self, truth: &SystemMatrix) -> Result<usize> {
        if truth.dim() != self.dim() {
            return Err(Error::InvalidClass(format!(
                "truth has dimension {} but the class has {}",
                truth.dim(),
                self.dim()
            )));
        }
        let idx = match self.position_of(truth) {
            Some(idx) => idx,
            None => {
                self.members.push(truth.clone());
                self.members.len() - 1
            }
        };
        self.truth_index = Some(idx);
        Ok(idx)
    }
}

/// Cartesian grid class: `points_per_axis` equispaced values spanning
/// `[c_ij − radius, c_ij + radius]` independently in each of the `d²`
/// entries, so the class has `points_per_axis^(d²)` members.
///
/// Member order is the odometer over entries in row-major order with the
/// last entry varying fastest. `points_per_axis = 1` yields `{center}`.
pub fn grid_class(
    center: &SystemMatrix,
    radius: f64,
    points_per_axis: usize,
) -> Result<HypothesisClass> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "grid radius must be a positive finite number, got {radius}"
        )));
    }
    if points_per_axis == 0 {
        return Err(Error::InvalidArgument(
            "points_per_axis must be ≥ 1".into(),
        ));
    }
    let d = center.dim();
    let slots = d * d;
    let mut count: usize = 1;
    for _ in 0..slots {
        count = count.checked_mul(points_per_axis).unwrap_or(usize::MAX);
        if count > GRID_CAP {
            return Err(Error::InvalidArgument(format!(
                "grid of {points_per_axis}^{slots} members exceeds cap {GRID_CAP}"
            )));
        }
    }
    if points_per_axis == 1 {
        return Ok(HypothesisClass {
            members: vec![center.clone()],
            truth_index: None,
        });
    }
    let step = 2.0 * radius / (points_per_axis - 1) as f64;
    if step <= DISTINCTNESS_TOL {
        return Err(Error::InvalidArgument(format!(
            "grid spacing {step:e} is below the distinctness tolerance"
        )));
    }
    let mut members = Vec::with_capacity(count);
    let mut ticks = vec![0usize; slots];
    loop {
        let entries: Vec<f64> = ticks
            .iter()
            .enumerate()
            .map(|(s, &t)| {
                center.entries()[(s / d, s % d)] - radius + step * t as f64
            })
            .collect();
        members.push(SystemMatrix::from_row_slice(d, &entries)?);
        // Odometer increment, last slot fastest.
        let mut slot = slots;
        loop {
            if slot == 0 {
                return Ok(HypothesisClass {
                    members,
                    truth_index: None,
                });
            }
            slot -= 1;
            ticks[slot] += 1;
            if ticks[slot] < points_per_axis {
                break;
            }
            ticks[slot] = 0;
        }
    }
}

/// Exact finite-class MLE: the smallest index attaining the maximal joint
/// log-density. Returns the full likelihood vector for diagnostics (NaN for
/// members whose evaluation overflowed).
///
/// Errors only when every member evaluates non-finite, which distinguishes
/// numeric overflow from an ordinary selection.
pub fn mle_select(traj: &Trajectory, class: &HypothesisClass) -> Result<(usize, Vec<f64>)> {
    if traj.dim() != class.dim() {
        return Err(Error::DimensionMismatch {
            context: "mle selection",
            expected: class.dim(),
            got: traj.dim(),
        });
    }
    let mut lls = Vec::with_capacity(class.len());
    let mut best: Option<(usize, f64)> = None;
    for (j, member) in class.members().iter().enumerate() {
        let ll = match log_density(traj, member) {
            Ok(v) => v,
            Err(_) => f64::NAN,
        };
        lls.push(ll);
        if ll.is_finite() && best.map_or(true, |(_, b)| ll > b) {
            best = Some((j, ll));
        }
    }
    match best {
        Some((idx, _)) => Ok((idx, lls)),
        None => Err(Error::AllLikelihoodsNonFinite { count: class.len() }),
    }
}

/// Unconstrained Gaussian MLE baseline (ordinary least squares):
/// `Â = (Σ_{k≥2} z_k z_{k-1}ᵀ)(Σ_{k≥2} z_{k-1} z_{k-1}ᵀ)⁺`, with a
/// pseudo-inverse so rank-deficient regressor moments are handled.
pub fn ols_fit(traj: &Trajectory) -> Result<SystemMatrix> {
    let n = traj.horizon();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "least-squares fit needs a horizon of at least 2".into(),
        ));
    }
    let d = traj.dim();
    let mut cross = DMatrix::<f64>::zeros(d, d);
    let mut moment = DMatrix::<f64>::zeros(d, d);
    for k in 1..n {
        let prev = traj.state(k - 1);
        cross += traj.state(k) * prev.transpose();
        moment += prev * prev.transpose();
    }
    let svd = moment.svd(true, true);
    let eps = svd.singular_values.max() * 1e-12;
    let pinv = svd
        .pseudo_inverse(eps)
        .map_err(|e| Error::InvalidArgument(format!("pseudo-inverse failed: {e}")))?;
    SystemMatrix::new(cross * pinv)
}

/// Plug-in entropy of a selection-count vector, in nats: `−Σ (c_j/T)·log(c_j/T)`
/// over the nonzero counts. Always ≤ log of the class size.
pub fn selection_entropy(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument(
            "selection counts are all zero".into(),
        ));
    }
    let t = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.ln()
        })
        .sum();
    Ok(h.max(0.0))
}

/// Monte-Carlo aggregates over repeated simulate → select trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub class_size: usize,
    pub horizon: usize,
    pub trials: usize,
    /// How often each member was selected; sums to `trials`.
    pub selection_counts: Vec<u64>,
    pub truth_index: usize,
    pub mean_weighted_error: f64,
    pub se_weighted_error: f64,
    /// Mean per-trial squared Hellinger distance of the selected law from
    /// the truth (exact below the dense cap, sampled above it).
    pub mean_hellinger_sq: f64,
    pub se_hellinger_sq: f64,
    /// Fraction of trials whose selection differs from the truth.
    pub mean_misselection: f64,
}

#[derive(Debug, Clone)]
struct MemberStats {
    weighted_error: f64,
    hellinger_sq: f64,
    /// Sampling variance of `hellinger_sq` (0 when exact).
    hellinger_var: f64,
}

/// Repeat simulate → MLE-select `trials` times and aggregate.
///
/// Trial `t` draws from stream `seed.stream_index + t`, independently of any
/// parallel execution; callers reusing one base seed must allocate disjoint
/// stream ranges. Requires the truth to be a member (within
/// [`DISTINCTNESS_TOL`]); refuses otherwise rather than certify a
/// misspecified bound.
pub fn run_trials(
    astar: &SystemMatrix,
    class: &HypothesisClass,
    horizon: usize,
    trials: usize,
    seed: SeedSpec,
) -> Result<TrialSummary> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be ≥ 1".into()));
    }
    let truth_index = class.position_of(astar).ok_or_else(|| {
        Error::InvalidClass(format!(
            "truth is not a class member within {DISTINCTNESS_TOL:e}"
        ))
    })?;

    // Both per-trial statistics depend only on the selected member, so they
    // are computed once per member. The fallback estimate is seeded by the
    // member index, never the trial, keeping results order-independent.
    let cache: Vec<OnceLock<Result<MemberStats>>> =
        (0..class.len()).map(|_| OnceLock::new()).collect();
    let member_stats = |idx: usize| -> Result<MemberStats> {
        cache[idx]
            .get_or_init(|| {
                let member = class.member(idx);
                let we = weighted_error(astar, member, horizon)?;
                let (h2, h2_var) = if horizon * class.dim() <= DENSE_SIZE_CAP {
                    let est = hellinger_sq_exact(member, astar, horizon)?;
                    (est.value, 0.0)
                } else {
                    let est = hellinger_sq_mc(
                        member,
                        astar,
                        horizon,
                        HELLINGER_FALLBACK_SAMPLES,
                        seed.child(idx as u64),
                    )?;
                    (est.value, est.std_error * est.std_error)
                };
                Ok(MemberStats {
                    weighted_error: we,
                    hellinger_sq: h2,
                    hellinger_var: h2_var,
                })
            })
            .clone()
    };

    let selections: Vec<Result<usize>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let traj = simulate(astar, horizon, seed.offset(t as u64))?;
            let (idx, _) = mle_select(&traj, class)?;
            member_stats(idx)?;
            Ok(idx)
        })
        .collect();

    let mut counts = vec![0u64; class.len()];
    for (t, sel) in selections.into_iter().enumerate() {
        counts[sel.map_err(|e| e.at_trial(t))?] += 1;
    }

    // Aggregate in member-index order from the counts; this keeps every
    // reported number independent of scheduling.
    let t = trials as f64;
    let mut we_sum = 0.0;
    let mut we_sq = 0.0;
    let mut h2_sum = 0.0;
    let mut h2_sq = 0.0;
    let mut h2_mc_var = 0.0;
    for (idx, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let stats = member_stats(idx)?;
        let w = c as f64;
        we_sum += w * stats.weighted_error;
        we_sq += w * stats.weighted_error * stats.weighted_error;
        h2_sum += w * stats.hellinger_sq;
        h2_sq += w * stats.hellinger_sq * stats.hellinger_sq;
        h2_mc_var += (w / t) * (w / t) * stats.hellinger_var;
    }
    let mean_we = we_sum / t;
    let mean_h2 = h2_sum / t;
    let sample_var = |sum: f64, sum_sq: f64| {
        if trials < 2 {
            0.0
        } else {
            ((sum_sq - sum * sum / t) / (t - 1.0)).max(0.0)
        }
    };
    let se_we = (sample_var(we_sum, we_sq) / t).sqrt();
    // Between-trial spread plus the (count-weighted) sampling variance of
    // any Monte-Carlo member values.
    let se_h2 = (sample_var(h2_sum, h2_sq) / t + h2_mc_var).sqrt();

    Ok(TrialSummary {
        class_size: class.len(),
        horizon,
        trials,
        mean_misselection: (trials as u64 - counts[truth_index]) as f64 / t,
        selection_counts: counts,
        truth_index,
        mean_weighted_error: mean_we,
        se_weighted_error: se_we,
        mean_hellinger_sq: mean_h2,
        se_hellinger_sq: se_h2,
    })
}

/// Certificate for the weighted-error bound: left side, plug-in mutual
/// information, both right-hand sides, and whether each holds with a 3·SE
/// margin on the Monte-Carlo left side.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub lhs: f64,
    pub se_lhs: f64,
    /// Plug-in estimate of the selector/data mutual information, in nats.
    pub mi_estimate: f64,
    /// `2·10⁴ · mi_estimate / n`.
    pub rhs_mi: f64,
    /// `2·10⁴ · log(class size) / n`.
    pub rhs_log_card: f64,
    pub holds_mi: bool,
    pub holds_log_card: bool,
    /// `rhs_mi / lhs`; infinite when the left side is exactly zero.
    pub slack_ratio: f64,
}

/// The certified constant in front of `I/n`.
pub const BOUND_CONSTANT: f64 = 2.0e4;

/// Evaluate the weighted-error certificate from a trial summary.
///
/// A bound "holds" when `lhs − 3·SE ≤ rhs`; the plug-in entropy is biased
/// low, which is reported rather than corrected.
pub fn theorem1_certificate(summary: &TrialSummary, class: &HypothesisClass) -> BoundReport {
    let mi = selection_entropy(&summary.selection_counts)
        .expect("trial summaries hold at least one selection");
    let n = summary.horizon as f64;
    let lhs = summary.mean_weighted_error;
    let se_lhs = summary.se_weighted_error;
    let rhs_mi = BOUND_CONSTANT * mi / n;
    let rhs_log_card = BOUND_CONSTANT * (class.len() as f64).ln() / n;
    BoundReport {
        lhs,
        se_lhs,
        mi_estimate: mi,
        rhs_mi,
        rhs_log_card,
        holds_mi: lhs - 3.0 * se_lhs <= rhs_mi,
        holds_log_card: lhs - 3.0 * se_lhs <= rhs_log_card,
        slack_ratio: if lhs == 0.0 {
            f64::INFINITY
        } else {
            rhs_mi / lhs
        },
    }
}

/// Certificate for the Hellinger chain
/// `E[H²] ≤ −2·log(1 − E[H²]/2) ≤ 2·Î`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Report {
    /// Trial-mean squared Hellinger distance of the selection from truth.
    pub e_h2: f64,
    pub se_e_h2: f64,
    /// `−2·log(1 − e_h2/2)` at the point estimate.
    pub middle_term: f64,
    /// `2 ·` plug-in selection entropy.
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluate the Hellinger-chain certificate with a 3·SE downward tolerance
/// on the estimated mean (the middle term is increasing in it, so the
/// tolerance maps through monotonically).
pub fn theorem2_certificate(summary: &TrialSummary) -> Theorem2Report {
    let e_h2 = summary.mean_hellinger_sq;
    let se = summary.se_hellinger_sq;
    let middle = |x: f64| -2.0 * (1.0 - x / 2.0).ln();
    let middle_term = middle(e_h2);
    let rhs = 2.0
        * selection_entropy(&summary.selection_counts)
            .expect("trial summaries hold at least one selection");
    let lower = (e_h2 - 3.0 * se).max(0.0);
    Theorem2Report {
        e_h2,
        se_e_h2: se,
        middle_term,
        rhs,
        holds: lower <= middle_term && middle(lower) <= rhs,
    }
}
