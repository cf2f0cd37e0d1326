//! Reference frameworks and scenarios.
//!
//! Node ids are zero-based: the four-node examples use nodes `0..4`, and the
//! sinc mesh beacons `{0, 1}` are the first two grid nodes.

use crate::geometry::{Framework, Position};
use crate::network::{
    gen_sinc_mesh, gen_sinc_mesh_scaled, make_scenario, proximity_graph, uniform_selection,
    InitMode, Scenario, SINC_MESH_RADIUS,
};
use crate::Result;

fn four_node_positions() -> Vec<Position> {
    vec![
        Position::new(&[1.0, 1.0]),
        Position::new(&[0.0, 0.0]),
        Position::new(&[0.0, 1.0]),
        Position::new(&[-1.0, 0.0]),
    ]
}

/// Infinitesimally bearing rigid four-node framework in the plane.
pub fn fig1a() -> Framework {
    Framework::new(
        four_node_positions(),
        &[(0, 1), (1, 3), (3, 2), (2, 1), (0, 2)],
    )
    .expect("static framework")
}

/// [`fig1a`] without the edge between nodes 1 and 2; not rigid.
pub fn fig1b() -> Framework {
    Framework::new(four_node_positions(), &[(0, 1), (1, 3), (3, 2), (0, 2)])
        .expect("static framework")
}

/// Two beacons at `(0,0)` and `(2,0)` with a single follower at `(1,1)`.
pub fn three_node() -> Framework {
    Framework::new(
        vec![
            Position::new(&[0.0, 0.0]),
            Position::new(&[2.0, 0.0]),
            Position::new(&[1.0, 1.0]),
        ],
        &[(0, 2), (1, 2)],
    )
    .expect("static framework")
}

/// Builds a scenario with uniform neighbor selection and the default
/// initial-estimate box.
pub fn uniform_scenario(fw: Framework, beacons: &[usize], seed: u64) -> Result<Scenario> {
    let prob = uniform_selection(&fw)?;
    let init = InitMode::default_box(fw.dim());
    make_scenario(fw, beacons, prob, init, seed)
}

pub fn three_node_scenario(seed: u64) -> Scenario {
    uniform_scenario(three_node(), &[0, 1], seed).expect("static scenario")
}

pub fn fig1a_scenario(seed: u64) -> Scenario {
    uniform_scenario(fig1a(), &[0, 1], seed).expect("static scenario")
}

/// Sinc-mesh framework on the reduced grid with the benchmark radius.
pub fn sinc_mesh_framework(half_width: f64, spacing: f64) -> Result<Framework> {
    proximity_graph(gen_sinc_mesh_scaled(half_width, spacing)?, SINC_MESH_RADIUS)
}

/// The 81-node desk-scale mesh (half width 2, spacing 0.5), beacons `{0, 1}`.
pub fn small_sinc_scenario(seed: u64) -> Scenario {
    let fw = sinc_mesh_framework(2.0, 0.5).expect("static parameters");
    uniform_scenario(fw, &[0, 1], seed).expect("static scenario")
}

/// The full 1089-node mesh, beacons `{0, 1}`.
pub fn full_sinc_scenario(seed: u64) -> Scenario {
    let fw = proximity_graph(gen_sinc_mesh(), SINC_MESH_RADIUS).expect("static parameters");
    uniform_scenario(fw, &[0, 1], seed).expect("static scenario")
}
