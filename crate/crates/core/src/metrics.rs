//! Error functionals, decay-rate fitting and Monte Carlo epsilon-time
//! estimation.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Framework;
use crate::gossip::{GossipState, Trace};
use crate::network::Scenario;
use crate::spectral;

/// `sum_{(i,j) in E} ||A_ij (p_hat_j - p_hat_i)||^2`, with `A_ij` computed
/// from the framework's true positions.
pub fn total_bearing_error(fw: &Framework, estimates: &DVector<f64>) -> Result<f64> {
    let d = fw.dim();
    check_len(estimates, d * fw.node_count())?;
    Ok((0..fw.edge_count())
        .map(|k| {
            let a = fw.edge_weight(k).into_matrix();
            let (i, j) = fw.edges()[k];
            (a * (estimates.rows(j * d, d) - estimates.rows(i * d, d))).norm_squared()
        })
        .sum())
}

/// Same functional using the scenario's cached edge weights.
pub(crate) fn scenario_bearing_error(scen: &Scenario, estimates: &DVector<f64>) -> f64 {
    let d = scen.dim();
    let mut total = 0.0;
    let mut diff = vec![0.0; d];
    for (k, &(i, j)) in scen.framework().edges().iter().enumerate() {
        let a = scen.edge_weight(k);
        for c in 0..d {
            diff[c] = estimates[j * d + c] - estimates[i * d + c];
        }
        for r in 0..d {
            let v: f64 = (0..d).map(|c| a[(r, c)] * diff[c]).sum();
            total += v * v;
        }
    }
    total
}

/// `||p_hat_f - p_f||`; beacon blocks are ignored.
pub fn follower_error(scen: &Scenario, estimates: &DVector<f64>) -> Result<f64> {
    check_len(estimates, scen.true_positions().len())?;
    Ok(follower_error_unchecked(scen, estimates))
}

pub(crate) fn follower_error_unchecked(scen: &Scenario, estimates: &DVector<f64>) -> f64 {
    let d = scen.dim();
    let p = scen.true_positions();
    scen.followers()
        .iter()
        .flat_map(|&f| (0..d).map(move |c| f * d + c))
        .map(|idx| (estimates[idx] - p[idx]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn check_len(v: &DVector<f64>, expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: v.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub bearing_error: f64,
    pub follower_error: f64,
    /// `follower_error` over the follower error of the scenario's `p_hat(0)`.
    pub ratio: f64,
}

pub fn summarize(scen: &Scenario, estimates: &DVector<f64>) -> Result<ErrorSummary> {
    let follower = follower_error(scen, estimates)?;
    let initial = follower_error_unchecked(scen, scen.initial_estimates());
    Ok(ErrorSummary {
        bearing_error: scenario_bearing_error(scen, estimates),
        follower_error: follower,
        ratio: if initial > 0.0 { follower / initial } else { 0.0 },
    })
}

pub const MIN_FIT_RECORDS: usize = 10;

/// Least-squares slope of `ln(bearing_error)` against slot over records at or
/// after `burn_in` with a positive error. Negative means exponential decay.
pub fn fit_exponential_rate(trace: &Trace, burn_in: u64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = trace
        .records
        .iter()
        .filter(|r| r.slot >= burn_in && r.bearing_error > 0.0)
        .map(|r| (r.slot as f64, r.bearing_error.ln()))
        .collect();
    if pts.len() < MIN_FIT_RECORDS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_RECORDS,
            have: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonTimeEstimate {
    pub epsilon: f64,
    /// Smallest `k` from which `P(ratio_j >= eps) <= eps` holds empirically for
    /// every simulated `j >= k`.
    pub empirical_k: u64,
    /// `K(eps)` from the spectral radius of `E[W^T W]`.
    pub bound_k: f64,
    pub trials: usize,
    /// Fraction of trials with `ratio >= eps` at `k = ceil(K(eps))`; NaN when
    /// the bound lies beyond the simulated horizon.
    pub exceedance_at_bound: f64,
}

impl EpsilonTimeEstimate {
    /// Normal-approximation 95% binomial half-width at probability `eps`.
    pub fn binomial_slack(&self) -> f64 {
        1.96 * (self.epsilon * (1.0 - self.epsilon) / self.trials as f64).sqrt()
    }
}

pub const MIN_TRIALS: usize = 100;
pub const DEFAULT_TRIALS: usize = 500;
/// Largest `ceil K(eps)` that trials are extended to.
pub const MAX_BOUND_HORIZON: u64 = 1_000_000;

/// Single-epsilon form of [`empirical_epsilon_times`].
pub fn empirical_epsilon_time(
    scen: &Scenario,
    alpha: f64,
    epsilon: f64,
    trials: usize,
    max_slots: u64,
    base_seed: u64,
) -> Result<EpsilonTimeEstimate> {
    empirical_epsilon_times(scen, alpha, &[epsilon], trials, max_slots, base_seed)
        .map(|mut v| v.remove(0))
}

/// Runs `trials` simulations from the scenario's `p_hat(0)` (trial `t` seeded
/// with `base_seed + t`) and measures the epsilon-time for each epsilon.
/// Each trial runs to `max(max_slots, ceil K(eps))` over the bounds that do
/// not exceed [`MAX_BOUND_HORIZON`]; larger bounds are reported but not
/// simulated, and their `exceedance_at_bound` is NaN.
///
/// Only the scenario's own initial condition is certified; the supremum over
/// initial conditions is not attempted.
pub fn empirical_epsilon_times(
    scen: &Scenario,
    alpha: f64,
    eps_list: &[f64],
    trials: usize,
    max_slots: u64,
    base_seed: u64,
) -> Result<Vec<EpsilonTimeEstimate>> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidParams(format!(
            "at least {MIN_TRIALS} trials are required, got {trials}"
        )));
    }
    if let Some(&bad) = eps_list.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::InvalidParams(format!("epsilon {bad} not in (0, 1)")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParams(format!("step size {alpha} must be positive")));
    }
    let initial = follower_error_unchecked(scen, scen.initial_estimates());
    if initial == 0.0 {
        return Err(Error::InvalidParams("initial estimates are already exact".into()));
    }

    let rho = crate::linalg::symmetric_spectral_radius(&spectral::expected_gram_matrix(scen, alpha));
    let bounds: Vec<f64> = eps_list.iter().map(|&e| spectral::k_epsilon(rho, e)).collect();
    let horizon = bounds
        .iter()
        .filter(|b| b.ceil() <= MAX_BOUND_HORIZON as f64)
        .map(|b| b.ceil() as u64)
        .fold(max_slots, u64::max);
    let len = horizon as usize + 1;

    // exceed[e][k] = number of trials with ratio >= eps_e at slot k
    let zero = || vec![vec![0u32; len]; eps_list.len()];
    let exceed = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut counts = zero();
            let mut state = GossipState::new(scen, base_seed.wrapping_add(t));
            for k in 0..len {
                if k > 0 {
                    state.step(alpha)?;
                }
                let ratio = follower_error_unchecked(scen, state.estimates()) / initial;
                for (e, &eps) in eps_list.iter().enumerate() {
                    if ratio >= eps {
                        counts[e][k] += 1;
                    }
                }
            }
            Ok::<_, Error>(counts)
        })
        .try_reduce(zero, |mut a, b| {
            for (ra, rb) in a.iter_mut().zip(b) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += y;
                }
            }
            Ok(a)
        })?;

    let n = trials as f64;
    eps_list
        .iter()
        .enumerate()
        .map(|(e, &eps)| {
            let frac = |k: usize| exceed[e][k] as f64 / n;
            if frac(len - 1) > eps {
                return Err(Error::BoundNotReached {
                    epsilon: eps,
                    max_slots: horizon,
                });
            }
            let empirical_k = (0..len)
                .rev()
                .take_while(|&k| frac(k) <= eps)
                .last()
                .unwrap_or(len - 1) as u64;
            let exceedance_at_bound = if bounds[e].ceil() <= horizon as f64 {
                frac(bounds[e].ceil() as usize)
            } else {
                f64::NAN
            };
            Ok(EpsilonTimeEstimate {
                epsilon: eps,
                empirical_k,
                bound_k: bounds[e],
                trials,
                exceedance_at_bound,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks;
    use crate::geometry::Position;
    use crate::gossip::{TraceMetadata, TraceRecord};

    fn synthetic(errors: impl Fn(u64) -> f64) -> Trace {
        Trace {
            records: (0..50)
                .map(|i| TraceRecord {
                    slot: i * 20,
                    event: None,
                    bearing_error: errors(i * 20),
                    follower_error: 0.0,
                })
                .collect(),
            metadata: TraceMetadata {
                seed: 0,
                alpha: 1.0,
                scenario_hash: String::new(),
                slots_run: 980,
                record_stride: 20,
            },
            snapshots: Vec::new(),
        }
    }

    #[test]
    fn bearing_error_examples() {
        let scen = benchmarks::fig1a_scenario(0);
        let fw = scen.framework();
        let p = scen.true_positions();
        assert!(total_bearing_error(fw, p).unwrap() < 1e-28);

        let shifted = DVector::from_iterator(8, p.iter().enumerate().map(|(k, x)| 2.5 * x + [1.0, -3.0][k % 2]));
        assert!(total_bearing_error(fw, &shifted).unwrap() < 1e-26);

        // vertical edge => A = diag(1, 0); relative estimate (2, 5) -> 4
        let fw = Framework::new(vec![Position::new(&[0.0, 0.0]), Position::new(&[0.0, 1.0])], &[(0, 1)])
            .unwrap();
        let est = DVector::from_vec(vec![0.0, 0.0, 2.0, 5.0]);
        assert!((total_bearing_error(&fw, &est).unwrap() - 4.0).abs() < 1e-15);
        assert!(total_bearing_error(&fw, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn cached_and_recomputed_bearing_errors_agree() {
        let scen = benchmarks::fig1a_scenario(5);
        let a = total_bearing_error(scen.framework(), scen.initial_estimates()).unwrap();
        let b = scenario_bearing_error(&scen, scen.initial_estimates());
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn follower_error_examples() {
        let scen = benchmarks::fig1a_scenario(0);
        let mut est = scen.true_positions().clone();
        assert_eq!(follower_error(&scen, &est).unwrap(), 0.0);
        est[4] += 3.0;
        est[5] += 4.0;
        assert!((follower_error(&scen, &est).unwrap() - 5.0).abs() < 1e-15);
        est[0] += 100.0;
        assert!((follower_error(&scen, &est).unwrap() - 5.0).abs() < 1e-15);
        assert!(follower_error(&scen, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn fit_examples() {
        let slope = fit_exponential_rate(&synthetic(|k| (-0.001 * k as f64).exp()), 0).unwrap();
        assert!((slope + 0.001).abs() < 1e-9);
        let flat = fit_exponential_rate(&synthetic(|_| 3.0), 0).unwrap();
        assert!(flat.abs() < 1e-15);
        assert!(matches!(
            fit_exponential_rate(&synthetic(|_| 1.0), 900),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn epsilon_time_validation() {
        let scen = benchmarks::three_node_scenario(0);
        assert!(empirical_epsilon_time(&scen, 1.0, 0.1, 10, 100, 0).is_err());
        assert!(empirical_epsilon_time(&scen, 1.0, 1.5, 100, 100, 0).is_err());
    }

    #[test]
    fn astronomical_bounds_are_not_simulated() {
        let scen = benchmarks::small_sinc_scenario(0);
        let err = empirical_epsilon_time(&scen, 0.5, 0.5, 100, 10, 0).unwrap_err();
        assert_eq!(
            err,
            Error::BoundNotReached {
                epsilon: 0.5,
                max_slots: 10
            }
        );
    }

    #[test]
    fn epsilon_near_one_is_reached_quickly() {
        let scen = benchmarks::three_node_scenario(0);
        let est = empirical_epsilon_time(&scen, 1.0, 0.999, 100, 200, 0).unwrap();
        // at k = 0 every trial has ratio 1 >= 0.999
        assert!(est.empirical_k >= 1);
        assert!(est.empirical_k <= 20);
    }
}
