#![allow(dead_code)]

use bearing_gossip::geometry::{Framework, Position};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Position> {
    (0..n)
        .map(|_| {
            let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
            Position::new(&c)
        })
        .collect()
}

/// Planar trilateration chain: each new node attached to two earlier nodes.
/// Generic positions make it minimally bearing rigid (`2n - 3` edges).
pub fn trilateration_chain(rng: &mut ChaCha8Rng, n: usize) -> Framework {
    let pts = random_points(rng, n, 2);
    let mut edges = vec![(0, 1)];
    for v in 2..n {
        let mut earlier: Vec<usize> = (0..v).collect();
        earlier.shuffle(rng);
        edges.push((earlier[0], v));
        edges.push((earlier[1], v));
    }
    Framework::new(pts, &edges).unwrap()
}

/// Random edge-subset framework with every node attached.
pub fn random_framework(rng: &mut ChaCha8Rng, n: usize, d: usize, p: f64) -> Framework {
    let pts = random_points(rng, n, d);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    for i in 0..n {
        if !edges.iter().any(|&(a, b)| a == i || b == i) {
            edges.push((i, (i + 1) % n));
        }
    }
    Framework::new(pts, &edges).unwrap()
}
