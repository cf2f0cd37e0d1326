mod common;

use bearing_gossip::benchmarks;
use bearing_gossip::geometry::{
    bearing_rigidity_matrix, bearing_vector, projection_matrix, rigidity_test, Framework, Position,
};
use bearing_gossip::linalg::{numerical_rank, DEFAULT_RANK_TOL};
use bearing_gossip::network::uniform_selection;
use bearing_gossip::spectral::{expected_laplacian, laplacian_rank_report, ExpectedLaplacian};
use nalgebra::{DMatrix, DVector, Rotation2};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn laplacian(fw: &Framework) -> ExpectedLaplacian {
    let prob = uniform_selection(fw).unwrap();
    expected_laplacian(fw, &prob, &[]).unwrap()
}

// orthonormal basis of {v : m v = 0} for symmetric PSD m
fn null_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l <= DEFAULT_RANK_TOL * top)
        .map(|(k, _)| eig.eigenvectors.column(k).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

fn check_same_null_space(fw: &Framework) {
    let r = bearing_rigidity_matrix(fw);
    let lap = laplacian(fw);
    let rank_r = numerical_rank(&r, DEFAULT_RANK_TOL);
    let lap_report = laplacian_rank_report(&lap, fw, DEFAULT_RANK_TOL);
    assert_eq!(lap_report.rigidity_matrix_rank, rank_r);

    let nr = null_basis(&(r.transpose() * &r));
    let nl = null_basis(&lap.full);
    assert_eq!(nr.ncols(), nl.ncols());
    assert_eq!(nl.ncols(), lap_report.null_space_dimension);
    let scale_l = lap.full.norm();
    let scale_r = r.norm();
    assert!((&lap.full * &nr).norm() <= 1e-8 * scale_l);
    assert!((&r * &nl).norm() <= 1e-8 * scale_r);
}

#[test]
fn laplacian_and_rigidity_matrix_share_rank_and_null_space() {
    let mut rng = common::rng(2024);
    for t in 0..10 {
        let n = 4 + t % 5;
        let fw = common::trilateration_chain(&mut rng, n);
        assert!(rigidity_test(&fw, DEFAULT_RANK_TOL).unwrap().is_rigid);
        check_same_null_space(&fw);

        let k = rng.gen_range(0..fw.edge_count());
        let cut = fw.without_edge(k);
        assert!(!rigidity_test(&cut, DEFAULT_RANK_TOL).unwrap().is_rigid);
        check_same_null_space(&cut);
    }
}

#[test]
fn random_three_dimensional_frameworks_agree() {
    let mut rng = common::rng(7);
    for _ in 0..6 {
        let fw = common::random_framework(&mut rng, 6, 3, 0.4);
        check_same_null_space(&fw);
    }
}

#[test]
fn rank_never_exceeds_the_rigid_rank() {
    let mut rng = common::rng(11);
    for _ in 0..20 {
        let n = rng.gen_range(2..8);
        let d = rng.gen_range(2..4);
        let fw = common::random_framework(&mut rng, n, d, 0.8);
        let rep = rigidity_test(&fw, DEFAULT_RANK_TOL).unwrap();
        assert!(rep.rigidity_matrix_rank <= d * n - d - 1);
    }
}

#[test]
fn rigidity_is_invariant_under_similarity_transforms() {
    let base = benchmarks::fig1a();
    let edges = base.edges().to_vec();
    let mut rng = common::rng(5);
    for _ in 0..10 {
        let rot = Rotation2::new(rng.gen_range(0.0..std::f64::consts::TAU));
        let scale = rng.gen_range(0.1..10.0);
        let shift = nalgebra::Vector2::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let moved: Vec<Position> = base
            .positions()
            .iter()
            .map(|p| {
                let q = rot * nalgebra::Vector2::new(p.0[0], p.0[1]) * scale + shift;
                Position::new(&[q.x, q.y])
            })
            .collect();
        let fw = Framework::new(moved, &edges).unwrap();
        let rep = rigidity_test(&fw, DEFAULT_RANK_TOL).unwrap();
        assert!(rep.is_rigid);
        assert_eq!(rep.rigidity_matrix_rank, 5);
        assert!(!rigidity_test(&fw.without_edge(3), DEFAULT_RANK_TOL).unwrap().is_rigid);
    }
}

#[test]
fn relabeling_nodes_preserves_the_spectrum() {
    let mut rng = common::rng(31);
    let fw = common::random_framework(&mut rng, 7, 2, 0.5);
    let spectrum = |fw: &Framework| {
        let mut ev: Vec<f64> = laplacian(fw).full.symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        ev
    };
    let base = spectrum(&fw);
    let base_rank = laplacian_rank_report(&laplacian(&fw), &fw, DEFAULT_RANK_TOL).rigidity_matrix_rank;
    for _ in 0..5 {
        let mut perm: Vec<usize> = (0..fw.node_count()).collect();
        perm.shuffle(&mut rng);
        let mut pts = vec![fw.positions()[0].clone(); fw.node_count()];
        for (old, &new) in perm.iter().enumerate() {
            pts[new] = fw.positions()[old].clone();
        }
        let edges: Vec<(usize, usize)> = fw.edges().iter().map(|&(i, j)| (perm[i], perm[j])).collect();
        let relabeled = Framework::new(pts, &edges).unwrap();
        let other = spectrum(&relabeled);
        for (a, b) in base.iter().zip(&other) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let lap = laplacian(&relabeled);
        assert_eq!(
            laplacian_rank_report(&lap, &relabeled, DEFAULT_RANK_TOL).rigidity_matrix_rank,
            base_rank
        );
    }
}

proptest! {
    #[test]
    fn projection_trace_is_d_minus_one(
        d in 2usize..5,
        a in prop::collection::vec(-10.0f64..10.0, 4),
        b in prop::collection::vec(-10.0f64..10.0, 4),
    ) {
        let pi = Position::new(&a[..d]);
        let pj = Position::new(&b[..d]);
        prop_assume!((&pi.0 - &pj.0).norm() > 1e-6);
        let gij = bearing_vector(&pi, &pj).unwrap();
        let gji = bearing_vector(&pj, &pi).unwrap();
        let aij = projection_matrix(&gij).unwrap();
        let aji = projection_matrix(&gji).unwrap();
        prop_assert_eq!(aij.matrix(), aji.matrix());
        prop_assert!((aij.matrix().trace() - (d as f64 - 1.0)).abs() < 1e-10);
        prop_assert!((aij.matrix() * gij.direction()).norm() < 1e-12);
    }
}
