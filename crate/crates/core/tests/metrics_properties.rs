mod common;

use bearing_gossip::benchmarks;
use bearing_gossip::metrics::{empirical_epsilon_times, total_bearing_error};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

// sum over edges of A_k (x_i - x_j), as a matrix acting on the stacked vector
fn bearing_laplacian(fw: &bearing_gossip::geometry::Framework) -> DMatrix<f64> {
    let d = fw.dim();
    let n = fw.node_count();
    let mut l = DMatrix::zeros(d * n, d * n);
    for (k, &(i, j)) in fw.edges().iter().enumerate() {
        let a = fw.edge_weight(k).into_matrix();
        for (r, c, s) in [(i, i, 1.0), (j, j, 1.0), (i, j, -1.0), (j, i, -1.0)] {
            let mut blk = l.view_mut((r * d, c * d), (d, d));
            blk += &a * s;
        }
    }
    l
}

#[test]
fn bearing_error_is_a_quadratic_form() {
    let mut rng = common::rng(77);
    for fw in [
        benchmarks::fig1a(),
        benchmarks::sinc_mesh_framework(1.0, 0.5).unwrap(),
        common::random_framework(&mut rng, 6, 3, 0.5),
    ] {
        let l = bearing_laplacian(&fw);
        for _ in 0..50 {
            let x = DVector::from_fn(l.nrows(), |_, _| rng.gen_range(-4.0..4.0));
            let direct = total_bearing_error(&fw, &x).unwrap();
            let quad = (x.transpose() * &l * &x)[0];
            assert!((direct - quad).abs() <= 1e-10 * direct.max(1.0), "{direct} vs {quad}");
        }
        let p = fw.stacked_positions();
        let shifted = p.map(|v| 2.5 * v + 1.0);
        assert!(total_bearing_error(&fw, &shifted).unwrap() < 1e-20);
    }
}

#[test]
fn epsilon_time_is_non_increasing_in_epsilon() {
    let scen = benchmarks::fig1a_scenario(2);
    let rows = empirical_epsilon_times(&scen, 0.5, &[0.05, 0.1, 0.2], 200, 0, 40).unwrap();
    assert!(rows[0].empirical_k >= rows[1].empirical_k);
    assert!(rows[1].empirical_k >= rows[2].empirical_k);
    assert!(rows[0].bound_k > rows[1].bound_k && rows[1].bound_k > rows[2].bound_k);
    for r in &rows {
        assert!((r.empirical_k as f64) <= r.bound_k.ceil());
        assert!(r.exceedance_at_bound <= r.epsilon + r.binomial_slack());
    }
}

#[test]
fn monte_carlo_is_deterministic_across_thread_schedules() {
    let scen = benchmarks::three_node_scenario(4);
    let a = empirical_epsilon_times(&scen, 1.0, &[0.1, 0.3], 300, 50, 9).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| empirical_epsilon_times(&scen, 1.0, &[0.1, 0.3], 300, 50, 9).unwrap());
    assert_eq!(a, b);
}
