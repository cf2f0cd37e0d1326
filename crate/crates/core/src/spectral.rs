//! Expected matrix-weighted Laplacian and the spectral quantities that govern
//! convergence of the gossip iteration: step-size bounds, the expected update
//! and Gram matrices, their spectral radii, and the epsilon-time bound.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Framework, RigidityReport};
use crate::gossip::{build_update_matrix, SlotEvent};
use crate::linalg::{self, DEFAULT_RANK_TOL};
use crate::network::{ProbabilityModel, Scenario};

/// Minimum eigenvalues above `-PSD_TOL` count as non-negative.
pub const PSD_TOL: f64 = 1e-10;

/// Fraction of the second-moment bound used when no step size is given.
pub const DEFAULT_ALPHA_FRACTION: f64 = 0.9;

/// Blocks of `L_ff` whose smallest pivot falls below this fraction of the
/// largest are treated as singular.
const SINGULAR_PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedLaplacian {
    pub full: DMatrix<f64>,
    pub laa: DMatrix<f64>,
    pub laf: DMatrix<f64>,
    pub lfa: DMatrix<f64>,
    pub lff: DMatrix<f64>,
    beacons: Vec<usize>,
    followers: Vec<usize>,
    dim: usize,
}

impl ExpectedLaplacian {
    pub fn beacons(&self) -> &[usize] {
        &self.beacons
    }

    pub fn followers(&self) -> &[usize] {
        &self.followers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beacon_count(&self) -> usize {
        self.beacons.len()
    }
}

/// Assembles `L^M` with off-diagonal blocks `-(A_ij P_ij + A_ji P_ji)/n` and
/// diagonal blocks equal to the negated block-row sums, then partitions it
/// into beacon and follower blocks. When the beacons are the first `n_a`
/// nodes the partition is the usual split at row/column `d * n_a`.
pub fn expected_laplacian(
    fw: &Framework,
    prob: &ProbabilityModel,
    beacons: &[usize],
) -> Result<ExpectedLaplacian> {
    let n = fw.node_count();
    let d = fw.dim();
    if prob.node_count() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: prob.node_count(),
        });
    }
    let mut beacon_set = beacons.to_vec();
    beacon_set.sort_unstable();
    beacon_set.dedup();
    if beacon_set.iter().any(|&b| b >= n) || beacon_set.len() != beacons.len() {
        return Err(Error::InvalidParams("beacon ids must be distinct nodes".into()));
    }
    let followers: Vec<usize> = (0..n)
        .filter(|i| beacon_set.binary_search(i).is_err())
        .collect();

    let inv_n = 1.0 / n as f64;
    let mut full = DMatrix::zeros(d * n, d * n);
    for (k, &(i, j)) in fw.edges().iter().enumerate() {
        let a = fw.edge_weight(k).into_matrix();
        // A_ij = A_ji for projection weights
        let m = &a * ((prob.get(i, j) + prob.get(j, i)) * inv_n);
        for &(r, c, sign) in &[(i, j, -1.0), (j, i, -1.0), (i, i, 1.0), (j, j, 1.0)] {
            let mut blk = full.view_mut((r * d, c * d), (d, d));
            blk += &m * sign;
        }
    }

    let laa = linalg::block_submatrix(&full, &beacon_set, &beacon_set, d);
    let laf = linalg::block_submatrix(&full, &beacon_set, &followers, d);
    let lfa = linalg::block_submatrix(&full, &followers, &beacon_set, d);
    let lff = linalg::block_submatrix(&full, &followers, &followers, d);
    Ok(ExpectedLaplacian {
        full,
        laa,
        laf,
        lfa,
        lff,
        beacons: beacon_set,
        followers,
        dim: d,
    })
}

/// [`expected_laplacian`] for a scenario's own graph, selection and beacons.
pub fn scenario_laplacian(scen: &Scenario) -> ExpectedLaplacian {
    expected_laplacian(scen.framework(), scen.probability(), scen.beacons())
        .expect("scenario is internally consistent")
}

/// Rank of the full expected Laplacian, reported against `dn - d - 1`.
pub fn laplacian_rank_report(
    lap: &ExpectedLaplacian,
    fw: &Framework,
    rel_tol: f64,
) -> RigidityReport {
    let rank = linalg::numerical_rank(&lap.full, rel_tol);
    RigidityReport::from_rank(rank, fw.node_count(), fw.dim())
}

/// Ascending eigenvalues of `L_ff`.
pub fn grounded_spectrum(lap: &ExpectedLaplacian) -> Vec<f64> {
    linalg::symmetric_eigenvalues(&lap.lff)
}

/// Solves `L_ff p_f = -L_fa p_a` for the follower positions.
pub fn localize_from_beacons(lap: &ExpectedLaplacian, p_a: &DVector<f64>) -> Result<DVector<f64>> {
    if p_a.len() != lap.lfa.ncols() {
        return Err(Error::DimensionMismatch {
            expected: lap.lfa.ncols(),
            actual: p_a.len(),
        });
    }
    if lap.lff.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let chol = lap
        .lff
        .clone()
        .cholesky()
        .ok_or(Error::SingularGroundedLaplacian)?;
    let pivots = chol.l_dirty().diagonal().map(|x| x * x);
    if pivots.min() <= SINGULAR_PIVOT_TOL * pivots.max() {
        return Err(Error::SingularGroundedLaplacian);
    }
    let rhs = -(&lap.lfa * p_a);
    let p_f = chol.solve(&rhs);
    let residual = (&lap.lff * &p_f - &rhs).norm();
    if !p_f.iter().all(|x| x.is_finite()) || residual > 1e-8 * rhs.norm().max(1.0) {
        return Err(Error::SingularGroundedLaplacian);
    }
    Ok(p_f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizeBounds {
    /// `2 / lambda_max(L_ff)`: first-moment stability.
    pub mean_bound: f64,
    /// `2 / max ||A_ij||` over all edges.
    pub projection_norm_bound: f64,
    /// Largest step for which every single-event update matrix has its
    /// spectrum in `(-1, 1]`: `1/||A||` on follower-follower edges,
    /// `2/||A||` on beacon-follower edges.
    pub event_bound: f64,
    /// `min(mean_bound, event_bound)`.
    pub second_moment_bound: f64,
    pub lambda_max_lff: f64,
}

impl StepSizeBounds {
    /// `min(mean_bound, projection_norm_bound)`. Looser than
    /// `second_moment_bound` whenever followers talk to each other.
    pub fn projection_form(&self) -> f64 {
        self.mean_bound.min(self.projection_norm_bound)
    }

    pub fn default_alpha(&self) -> f64 {
        DEFAULT_ALPHA_FRACTION * self.second_moment_bound
    }

    pub fn admits(&self, alpha: f64) -> bool {
        alpha > 0.0 && alpha < self.second_moment_bound
    }
}

pub fn step_size_bounds(lap: &ExpectedLaplacian, fw: &Framework) -> Result<StepSizeBounds> {
    let spectrum = grounded_spectrum(lap);
    let (Some(&lmin), Some(&lmax)) = (spectrum.first(), spectrum.last()) else {
        return Err(Error::SingularGroundedLaplacian);
    };
    if lmin <= PSD_TOL * lmax.max(1e-300) || lmax <= 0.0 {
        return Err(Error::SingularGroundedLaplacian);
    }
    let mean_bound = 2.0 / lmax;

    let is_beacon = |i: usize| lap.beacons.binary_search(&i).is_ok();
    let mut max_norm = 0.0f64;
    let mut event_bound = f64::INFINITY;
    for (k, &(i, j)) in fw.edges().iter().enumerate() {
        let norm = linalg::symmetric_norm(fw.edge_weight(k).matrix());
        max_norm = max_norm.max(norm);
        let followers_on_edge = usize::from(!is_beacon(i)) + usize::from(!is_beacon(j));
        // pair update on two followers moves the difference by 2 * alpha * A
        let limit = match followers_on_edge {
            2 => 1.0 / norm,
            1 => 2.0 / norm,
            _ => f64::INFINITY,
        };
        event_bound = event_bound.min(limit);
    }
    let projection_norm_bound = if max_norm > 0.0 {
        2.0 / max_norm
    } else {
        f64::INFINITY
    };

    Ok(StepSizeBounds {
        mean_bound,
        projection_norm_bound,
        event_bound,
        second_moment_bound: mean_bound.min(event_bound),
        lambda_max_lff: lmax,
    })
}

/// Eigenvalues of `I - alpha L_ff` all lie in `(-1, 1)`.
pub fn mean_dynamics_stable(lap: &ExpectedLaplacian, alpha: f64) -> bool {
    grounded_spectrum(lap)
        .iter()
        .all(|&l| (1.0 - alpha * l).abs() < 1.0)
}

/// Every slot event with a positive probability, as `(probability, event)`.
/// Probabilities are `P_ij / n` for waker `i` and partner `j`.
pub fn enumerate_events(scen: &Scenario) -> Vec<(f64, SlotEvent)> {
    let n = scen.node_count() as f64;
    let mut out = Vec::new();
    for i in 0..scen.node_count() {
        for &(j, p) in scen.probability().row(i) {
            if p > 0.0 {
                let ev = SlotEvent::between(scen, i, j).expect("row support is on edges");
                out.push((p / n, ev));
            }
        }
    }
    out
}

/// `E[W]` by summing every event's update matrix weighted by its
/// probability. Independent of the Laplacian assembly, so it can be checked
/// against `I - alpha L_ff`.
pub fn expected_update_matrix(scen: &Scenario, alpha: f64) -> DMatrix<f64> {
    let size = scen.dim() * scen.followers().len();
    let mut acc = DMatrix::zeros(size, size);
    for (p, ev) in enumerate_events(scen) {
        build_update_matrix(scen, &ev, alpha).add_scaled_to(&mut acc, p);
    }
    acc
}

/// `E[W^T W]` over the same event distribution.
pub fn expected_gram_matrix(scen: &Scenario, alpha: f64) -> DMatrix<f64> {
    let size = scen.dim() * scen.followers().len();
    let mut acc = DMatrix::zeros(size, size);
    for (p, ev) in enumerate_events(scen) {
        build_update_matrix(scen, &ev, alpha)
            .gram()
            .add_scaled_to(&mut acc, p);
    }
    acc
}

/// `K(eps) = 3 ln(1/eps) / ln(1/rho)`; infinite when `rho >= 1`.
pub fn k_epsilon(rho: f64, epsilon: f64) -> f64 {
    if rho >= 1.0 {
        return f64::INFINITY;
    }
    if rho <= 0.0 {
        return 0.0;
    }
    3.0 * (1.0 / epsilon).ln() / (1.0 / rho).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub bounds: StepSizeBounds,
    pub alpha: f64,
    /// `0 < alpha < second_moment_bound`.
    pub admissible: bool,
    pub rho_ew: f64,
    pub rho_ewtw: f64,
    /// `(eps, K(eps))` in the order requested.
    pub k_epsilon: Vec<(f64, f64)>,
}

impl SpectralReport {
    /// Reason the step size is flagged, if it is.
    pub fn warning(&self) -> Option<String> {
        (!self.admissible).then(|| {
            Error::InadmissibleStepSize {
                alpha: self.alpha,
                bound: self.bounds.second_moment_bound,
            }
            .to_string()
        })
    }
}

/// Full spectral analysis of a scenario at step size `alpha` (or the default
/// step size when `None`). An inadmissible step size is flagged on the
/// report rather than rejected.
pub fn spectral_report(
    scen: &Scenario,
    alpha: Option<f64>,
    eps_list: &[f64],
) -> Result<SpectralReport> {
    if let Some(&bad) = eps_list.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::InvalidParams(format!("epsilon {bad} not in (0, 1)")));
    }
    if scen.beacons().len() < 2 {
        return Err(Error::TooFewBeacons(scen.beacons().len()));
    }
    let lap = scenario_laplacian(scen);
    let bounds = step_size_bounds(&lap, scen.framework())?;
    let alpha = alpha.unwrap_or_else(|| bounds.default_alpha());
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParams(format!("step size {alpha} must be positive")));
    }
    let rho_ew = linalg::symmetric_spectral_radius(&expected_update_matrix(scen, alpha));
    let rho_ewtw = linalg::symmetric_spectral_radius(&expected_gram_matrix(scen, alpha));
    let k = eps_list.iter().map(|&e| (e, k_epsilon(rho_ewtw, e))).collect();
    Ok(SpectralReport {
        bounds,
        alpha,
        admissible: bounds.admits(alpha),
        rho_ew,
        rho_ewtw,
        k_epsilon: k,
    })
}

/// [`laplacian_rank_report`] at the default tolerance.
pub fn laplacian_rank(lap: &ExpectedLaplacian, fw: &Framework) -> RigidityReport {
    laplacian_rank_report(lap, fw, DEFAULT_RANK_TOL)
}
