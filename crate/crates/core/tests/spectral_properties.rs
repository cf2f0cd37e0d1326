mod common;

use bearing_gossip::benchmarks;
use bearing_gossip::gossip::{build_update_matrix, EventCase};
use bearing_gossip::linalg::{max_abs_diff, symmetric_eigenvalues, symmetric_spectral_radius};
use bearing_gossip::network::{make_scenario_unvalidated, uniform_selection, InitMode, Scenario};
use bearing_gossip::spectral::{
    enumerate_events, expected_gram_matrix, expected_update_matrix, grounded_spectrum, k_epsilon,
    scenario_laplacian, spectral_report, step_size_bounds, PSD_TOL,
};
use bearing_gossip::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn scenarios() -> Vec<(&'static str, Scenario)> {
    vec![
        ("three-node", benchmarks::three_node_scenario(0)),
        ("fig1a", benchmarks::fig1a_scenario(0)),
        ("mesh81", benchmarks::small_sinc_scenario(0)),
    ]
}

#[test]
fn expected_update_is_one_step_of_the_mean_dynamics() {
    for (name, scen) in scenarios() {
        let lff = scenario_laplacian(&scen).lff;
        for alpha in [0.0, 0.3, 1.0] {
            let ew = expected_update_matrix(&scen, alpha);
            let oracle = DMatrix::identity(lff.nrows(), lff.ncols()) - &lff * alpha;
            let diff = max_abs_diff(&ew, &oracle);
            assert!(diff <= 1e-12, "{name} alpha={alpha}: {diff:e}");
            assert_eq!(ew, ew.transpose(), "{name}");
        }
    }
}

#[test]
fn expected_gram_matches_dense_products() {
    for (name, scen) in scenarios().into_iter().take(2) {
        let alpha = 0.7;
        let size = scen.dim() * scen.followers().len();
        let mut oracle = DMatrix::zeros(size, size);
        for (p, ev) in enumerate_events(&scen) {
            let w = build_update_matrix(&scen, &ev, alpha).to_dense();
            oracle += w.transpose() * &w * p;
        }
        let gram = expected_gram_matrix(&scen, alpha);
        assert!(max_abs_diff(&gram, &oracle) < 1e-13, "{name}");
        assert!(symmetric_eigenvalues(&gram)[0] >= -PSD_TOL, "{name}");
    }
}

#[test]
fn second_moment_dominates_the_squared_mean() {
    for (name, scen) in scenarios() {
        let alpha = step_size_bounds(&scenario_laplacian(&scen), scen.framework())
            .unwrap()
            .default_alpha();
        let rho_w = symmetric_spectral_radius(&expected_update_matrix(&scen, alpha));
        let rho_g = symmetric_spectral_radius(&expected_gram_matrix(&scen, alpha));
        assert!(rho_g >= rho_w * rho_w - 1e-12, "{name}: {rho_g} < {rho_w}^2");
    }
}

#[test]
fn admissible_steps_are_stable() {
    for (name, scen) in scenarios() {
        let lap = scenario_laplacian(&scen);
        let bounds = step_size_bounds(&lap, scen.framework()).unwrap();
        assert!(bounds.second_moment_bound <= bounds.mean_bound);
        assert!((bounds.projection_norm_bound - 2.0).abs() < 1e-12);
        for frac in [0.1, 0.5, 0.9, 0.99] {
            let alpha = frac * bounds.second_moment_bound;
            for l in grounded_spectrum(&lap) {
                let mu = 1.0 - alpha * l;
                assert!(mu > -1.0 && mu < 1.0, "{name}: eigenvalue {mu}");
            }
            let report = spectral_report(&scen, Some(alpha), &[0.1]).unwrap();
            assert!(report.admissible);
            assert!(report.rho_ewtw < 1.0, "{name} alpha={alpha}: {}", report.rho_ewtw);
        }
    }
}

#[test]
fn single_beacon_leaves_a_neutral_mode() {
    for fw in [benchmarks::fig1a(), benchmarks::sinc_mesh_framework(1.0, 0.5).unwrap()] {
        let prob = uniform_selection(&fw).unwrap();
        let d = fw.dim();
        let scen =
            make_scenario_unvalidated(fw, &[0], prob, InitMode::default_box(d), 0).unwrap();
        let lap = scenario_laplacian(&scen);
        assert!(grounded_spectrum(&lap)[0] <= 1e-10);
        assert_eq!(
            step_size_bounds(&lap, scen.framework()),
            Err(Error::SingularGroundedLaplacian)
        );
        for alpha in [0.2, 0.9] {
            let rho = symmetric_spectral_radius(&expected_gram_matrix(&scen, alpha));
            assert!(rho >= 1.0 - 1e-10, "rho {rho}");
        }
        assert!(matches!(spectral_report(&scen, Some(0.5), &[0.1]), Err(Error::TooFewBeacons(1))));
    }
}

#[test]
fn three_node_event_matrices_are_symmetric_contractions() {
    let scen = benchmarks::three_node_scenario(0);
    for alpha in [0.1, 1.0, 1.9] {
        for (_, ev) in enumerate_events(&scen) {
            let w = build_update_matrix(&scen, &ev, alpha).to_dense();
            assert_eq!(w, w.transpose());
            for mu in symmetric_eigenvalues(&w) {
                assert!(mu > -1.0 && mu <= 1.0 + 1e-12, "{:?} {mu}", ev.case);
            }
            if ev.case == EventCase::BeaconBeacon {
                assert_eq!(w, DMatrix::identity(2, 2));
            }
        }
    }
}

proptest! {
    #[test]
    fn k_epsilon_is_monotone(rho in 0.01f64..0.999, eps in 0.001f64..0.98, t in 0.001f64..0.01) {
        let k = k_epsilon(rho, eps);
        prop_assert!(k > 0.0 && k.is_finite());
        prop_assert!(k_epsilon(rho, eps + t) < k);
        prop_assert!(k_epsilon((rho + t).min(0.9999), eps) > k);
    }
}
