//! Scenario construction: proximity graphs, neighbor-selection probabilities,
//! beacon designation and initial estimates.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Framework, Position, COINCIDENT_TOL};

/// Tolerance on row sums of a selection distribution.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Neighbor-selection distribution: row `i` holds `P_ij` for `j` in `N(i)`.
///
/// Stored sparsely; each row is sorted by neighbor index and only lists
/// neighbors of `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityModel {
    rows: Vec<Vec<(usize, f64)>>,
}

impl ProbabilityModel {
    /// Builds a model from sparse rows and checks it against `fw`.
    pub fn from_rows(fw: &Framework, mut rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
        }
        let model = ProbabilityModel { rows };
        model.validate(fw)?;
        Ok(model)
    }

    /// Builds a model from a dense `n x n` matrix. Zero entries are dropped.
    pub fn from_dense(fw: &Framework, dense: &DMatrix<f64>) -> Result<Self> {
        let n = fw.node_count();
        if dense.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: dense.nrows(),
            });
        }
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| dense[(i, j)] != 0.0)
                    .map(|j| (j, dense[(i, j)]))
                    .collect()
            })
            .collect();
        Self::from_rows(fw, rows)
    }

    fn validate(&self, fw: &Framework) -> Result<()> {
        let n = fw.node_count();
        if self.rows.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.rows.len(),
            });
        }
        for (i, row) in self.rows.iter().enumerate() {
            let mut sum = 0.0;
            for (pos, &(j, p)) in row.iter().enumerate() {
                if pos > 0 && row[pos - 1].0 == j {
                    return Err(Error::InvalidProbability(format!("duplicate entry P[{i}][{j}]")));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidProbability(format!("P[{i}][{j}] = {p} not in [0, 1]")));
                }
                if p > 0.0 && fw.edge_index(i, j).is_none() {
                    return Err(Error::InvalidProbability(format!(
                        "P[{i}][{j}] > 0 but ({i}, {j}) is not an edge"
                    )));
                }
                sum += p;
            }
            if fw.degree(i) > 0 && (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidProbability(format!("row {i} sums to {sum}")));
            }
        }
        for &(i, j) in fw.edges() {
            if self.get(i, j) + self.get(j, i) <= 0.0 {
                return Err(Error::InvalidProbability(format!(
                    "edge ({i}, {j}) is never selected: P_ij + P_ji = 0"
                )));
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |&(k, _)| k)
            .map(|pos| row[pos].1)
            .unwrap_or(0.0)
    }

    /// Nonzero-capable entries of row `i`, sorted by neighbor index.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                m[(i, j)] = p;
            }
        }
        m
    }

    /// Probability that the pair `{i, j}` interacts in a given slot.
    pub fn pair_probability(&self, i: usize, j: usize) -> f64 {
        (self.get(i, j) + self.get(j, i)) / self.node_count() as f64
    }
}

/// `P_ij = 1/|N_i|` for each neighbor `j` of `i`.
pub fn uniform_selection(fw: &Framework) -> Result<ProbabilityModel> {
    let rows = (0..fw.node_count())
        .map(|i| {
            let deg = fw.degree(i);
            if deg == 0 {
                return Err(Error::IsolatedNode(i));
            }
            let p = 1.0 / deg as f64;
            Ok(fw.neighbors(i).map(|j| (j, p)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    ProbabilityModel::from_rows(fw, rows)
}

/// Edges between every pair of nodes at Euclidean distance `<= radius`.
pub fn proximity_graph(positions: Vec<Position>, radius: f64) -> Result<Framework> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParams(format!("radius {radius} must be positive")));
    }
    let n = positions.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = (&positions[i].0 - &positions[j].0).norm();
            if dist <= COINCIDENT_TOL {
                return Err(Error::CoincidentNodes(i, j));
            }
            if dist <= radius {
                edges.push((i, j));
            }
        }
    }
    Framework::new(positions, &edges)
}

/// Proximity radius of the benchmark sinc mesh.
pub const SINC_MESH_RADIUS: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn sinc(r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        r.sin() / r
    }
}

/// The 33 x 33 grid on `[-8, 8]^2` with spacing 0.5, lifted onto
/// `z = sin(r)/r`. Nodes are ordered with `y` varying fastest.
pub fn gen_sinc_mesh() -> Vec<Position> {
    gen_sinc_mesh_scaled(8.0, 0.5).expect("fixed parameters are valid")
}

/// Same surface on the grid `{-h, -h + s, ..., h}^2`.
pub fn gen_sinc_mesh_scaled(half_width: f64, spacing: f64) -> Result<Vec<Position>> {
    if !(half_width > 0.0 && spacing > 0.0 && spacing <= half_width) {
        return Err(Error::InvalidParams(format!(
            "need half_width > 0 and 0 < spacing <= half_width, got ({half_width}, {spacing})"
        )));
    }
    let steps = (2.0 * half_width / spacing + 1e-9).floor() as usize;
    let axis: Vec<f64> = (0..=steps).map(|k| -half_width + k as f64 * spacing).collect();
    let mut out = Vec::with_capacity(axis.len() * axis.len());
    for &x in &axis {
        for &y in &axis {
            let z = sinc((x * x + y * y).sqrt());
            out.push(Position::new(&[x, y, z]));
        }
    }
    Ok(out)
}

/// How follower estimates are initialised.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// Independent uniform draws per coordinate from `[lo_c, hi_c]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Stacked `dn` vector; beacon blocks are overwritten with true positions.
    Explicit(DVector<f64>),
}

impl InitMode {
    /// `[-8, 8] x [-8, 8] x [-8, 2]` in three dimensions, `[-8, 8]^d` otherwise.
    pub fn default_box(d: usize) -> Self {
        let lo = vec![-8.0; d];
        let mut hi = vec![8.0; d];
        if d == 3 {
            hi[2] = 2.0;
        }
        InitMode::UniformBox { lo, hi }
    }
}

/// A localization problem instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    framework: Framework,
    beacons: Vec<usize>,
    probability: ProbabilityModel,
    init: InitMode,
    seed: u64,
    true_positions: DVector<f64>,
    initial_estimates: DVector<f64>,
    followers: Vec<usize>,
    // compact follower index per node, None for beacons
    follower_slot: Vec<Option<usize>>,
    // projection weight per canonical edge, from true positions
    weights: Vec<DMatrix<f64>>,
}

/// Builds a scenario. Requires at least two beacons.
pub fn make_scenario(
    framework: Framework,
    beacons: &[usize],
    probability: ProbabilityModel,
    init: InitMode,
    seed: u64,
) -> Result<Scenario> {
    if beacons.len() < 2 {
        return Err(Error::TooFewBeacons(beacons.len()));
    }
    make_scenario_unvalidated(framework, beacons, probability, init, seed)
}

/// [`make_scenario`] without the beacon-count precondition. Intended for
/// analysing non-localizable setups (e.g. a single beacon).
pub fn make_scenario_unvalidated(
    framework: Framework,
    beacons: &[usize],
    probability: ProbabilityModel,
    init: InitMode,
    seed: u64,
) -> Result<Scenario> {
    let n = framework.node_count();
    let d = framework.dim();
    let mut beacon_set = beacons.to_vec();
    beacon_set.sort_unstable();
    beacon_set.dedup();
    if beacon_set.len() != beacons.len() {
        return Err(Error::InvalidParams("duplicate beacon ids".into()));
    }
    if let Some(&b) = beacon_set.iter().find(|&&b| b >= n) {
        return Err(Error::InvalidParams(format!("beacon {b} is not a node (n = {n})")));
    }
    probability.validate(&framework)?;

    let mut follower_slot = vec![None; n];
    let mut followers = Vec::with_capacity(n - beacon_set.len());
    for i in 0..n {
        if beacon_set.binary_search(&i).is_err() {
            follower_slot[i] = Some(followers.len());
            followers.push(i);
        }
    }

    let true_positions = framework.stacked_positions();
    let initial_estimates = match &init {
        InitMode::UniformBox { lo, hi } => {
            if lo.len() != d || hi.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: lo.len().min(hi.len()),
                });
            }
            if lo.iter().zip(hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
                return Err(Error::InvalidParams("init box must have finite lo <= hi".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut est = true_positions.clone();
            for &f in &followers {
                for c in 0..d {
                    let u: f64 = rng.gen();
                    est[f * d + c] = lo[c] + u * (hi[c] - lo[c]);
                }
            }
            est
        }
        InitMode::Explicit(v) => {
            if v.len() != d * n {
                return Err(Error::DimensionMismatch {
                    expected: d * n,
                    actual: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParams("initial estimates must be finite".into()));
            }
            let mut est = v.clone();
            for &b in &beacon_set {
                est.rows_mut(b * d, d).copy_from(&true_positions.rows(b * d, d));
            }
            est
        }
    };

    let weights = (0..framework.edge_count())
        .map(|k| framework.edge_weight(k).into_matrix())
        .collect();

    Ok(Scenario {
        framework,
        beacons: beacon_set,
        probability,
        init,
        seed,
        true_positions,
        initial_estimates,
        followers,
        follower_slot,
        weights,
    })
}

impl Scenario {
    pub fn framework(&self) -> &Framework {
        &self.framework
    }

    pub fn probability(&self) -> &ProbabilityModel {
        &self.probability
    }

    /// Beacon ids in ascending order.
    pub fn beacons(&self) -> &[usize] {
        &self.beacons
    }

    /// Follower ids in ascending order; position in this list is the
    /// follower's compact index.
    pub fn followers(&self) -> &[usize] {
        &self.followers
    }

    pub fn is_beacon(&self, i: usize) -> bool {
        self.follower_slot[i].is_none()
    }

    pub fn follower_index(&self, i: usize) -> Option<usize> {
        self.follower_slot[i]
    }

    pub fn init_mode(&self) -> &InitMode {
        &self.init
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.framework.dim()
    }

    pub fn node_count(&self) -> usize {
        self.framework.node_count()
    }

    /// Stacked true configuration `p`.
    pub fn true_positions(&self) -> &DVector<f64> {
        &self.true_positions
    }

    /// Stacked `p_hat(0)`; beacon blocks equal true positions.
    pub fn initial_estimates(&self) -> &DVector<f64> {
        &self.initial_estimates
    }

    /// Projection weight of canonical edge `k`, from true positions.
    pub fn edge_weight(&self, k: usize) -> &DMatrix<f64> {
        &self.weights[k]
    }

    /// `A_ij` for the edge joining `i` and `j`.
    pub fn weight_between(&self, i: usize, j: usize) -> Option<&DMatrix<f64>> {
        self.framework.edge_index(i, j).map(|k| &self.weights[k])
    }

    /// Stacked follower positions `p_f`.
    pub fn follower_positions(&self) -> DVector<f64> {
        self.gather(&self.true_positions, &self.followers)
    }

    /// Stacked beacon positions `p_a`.
    pub fn beacon_positions(&self) -> DVector<f64> {
        self.gather(&self.true_positions, &self.beacons)
    }

    /// Follower blocks of a stacked `dn` vector.
    pub fn follower_part(&self, stacked: &DVector<f64>) -> DVector<f64> {
        self.gather(stacked, &self.followers)
    }

    fn gather(&self, stacked: &DVector<f64>, ids: &[usize]) -> DVector<f64> {
        let d = self.dim();
        let mut out = DVector::zeros(d * ids.len());
        for (slot, &i) in ids.iter().enumerate() {
            out.rows_mut(slot * d, d).copy_from(&stacked.rows(i * d, d));
        }
        out
    }

    /// SHA-256 over the scenario's defining data (positions, edges, beacons,
    /// selection rows, initial estimates), hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |x: u64| h.update(x.to_le_bytes());
        put(self.dim() as u64);
        put(self.node_count() as u64);
        for x in self.true_positions.iter() {
            put(x.to_bits());
        }
        put(self.framework.edge_count() as u64);
        for &(i, j) in self.framework.edges() {
            put(i as u64);
            put(j as u64);
        }
        put(self.beacons.len() as u64);
        for &b in &self.beacons {
            put(b as u64);
        }
        for i in 0..self.node_count() {
            let row = self.probability.row(i);
            put(row.len() as u64);
            for &(j, p) in row {
                put(j as u64);
                put(p.to_bits());
            }
        }
        for x in self.initial_estimates.iter() {
            put(x.to_bits());
        }
        hex::encode(h.finalize())
    }

    /// Writes follower blocks back into a copy of the true configuration.
    pub fn embed_followers(&self, follower_stack: &DVector<f64>) -> DVector<f64> {
        let d = self.dim();
        let mut out = self.true_positions.clone();
        for (slot, &i) in self.followers.iter().enumerate() {
            out.rows_mut(i * d, d).copy_from(&follower_stack.rows(slot * d, d));
        }
        out
    }
}
