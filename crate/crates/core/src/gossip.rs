//! Randomized pairwise gossip for bearing-only localization.
//!
//! One slot = one node woken uniformly at random, which then picks a neighbor
//! from its selection row. The pair updates its estimates through the edge's
//! projection weight:
//!
//! * beacon/beacon: nothing changes;
//! * follower/follower: both move, `p_i -= a A (p_i - p_j)` and symmetrically;
//! * beacon/follower: only the follower moves, towards the beacon's true
//!   position. Either side may be the one that woke up.
//!
//! The same step written on the stacked follower error is multiplication by a
//! symmetric matrix that differs from the identity only on the participants'
//! blocks; [`build_update_matrix`] returns it in that compact form.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::network::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventCase {
    BeaconBeacon,
    FollowerFollower,
    BeaconFollower,
}

impl EventCase {
    pub fn as_str(self) -> &'static str {
        match self {
            EventCase::BeaconBeacon => "beacon-beacon",
            EventCase::FollowerFollower => "follower-follower",
            EventCase::BeaconFollower => "beacon-follower",
        }
    }
}

impl std::str::FromStr for EventCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beacon-beacon" => Ok(EventCase::BeaconBeacon),
            "follower-follower" => Ok(EventCase::FollowerFollower),
            "beacon-follower" => Ok(EventCase::BeaconFollower),
            other => Err(Error::Parse(format!("unknown event case '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlotEvent {
    pub waker: usize,
    pub partner: usize,
    pub case: EventCase,
}

impl SlotEvent {
    /// Event for `waker` selecting `partner`, classified against the
    /// scenario's beacon set.
    pub fn between(scen: &Scenario, waker: usize, partner: usize) -> Result<Self> {
        if scen.framework().edge_index(waker, partner).is_none() {
            return Err(Error::InvalidParams(format!(
                "nodes {waker} and {partner} are not neighbors"
            )));
        }
        let case = match (scen.is_beacon(waker), scen.is_beacon(partner)) {
            (true, true) => EventCase::BeaconBeacon,
            (false, false) => EventCase::FollowerFollower,
            _ => EventCase::BeaconFollower,
        };
        Ok(SlotEvent {
            waker,
            partner,
            case,
        })
    }
}

/// Follower-error update matrix `W` of one event, stored as the identity
/// plus a dense block on the participating followers.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateMatrix {
    size: usize,
    block: usize,
    // compact follower indices of the participants
    slots: Vec<usize>,
    // (slots.len() * block) square
    local: DMatrix<f64>,
}

impl UpdateMatrix {
    /// Side length `d * n_f`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn participants(&self) -> &[usize] {
        &self.slots
    }

    pub fn local_block(&self) -> &DMatrix<f64> {
        &self.local
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut w = DMatrix::identity(self.size, self.size);
        self.scatter_local(&mut w, 1.0, true);
        w
    }

    /// `W^T W`, with the same sparsity layout.
    pub fn gram(&self) -> UpdateMatrix {
        UpdateMatrix {
            size: self.size,
            block: self.block,
            slots: self.slots.clone(),
            local: self.local.transpose() * &self.local,
        }
    }

    /// `acc += weight * W`.
    pub fn add_scaled_to(&self, acc: &mut DMatrix<f64>, weight: f64) {
        assert_eq!(acc.shape(), (self.size, self.size));
        for k in 0..self.size {
            acc[(k, k)] += weight;
        }
        self.scatter_local(acc, weight, false);
    }

    // writes (or adds) weight * (local - I) onto the participant blocks
    fn scatter_local(&self, target: &mut DMatrix<f64>, weight: f64, overwrite: bool) {
        let b = self.block;
        for (li, &si) in self.slots.iter().enumerate() {
            for (lj, &sj) in self.slots.iter().enumerate() {
                for r in 0..b {
                    for c in 0..b {
                        let mut v = self.local[(li * b + r, lj * b + c)];
                        if overwrite {
                            target[(si * b + r, sj * b + c)] = v;
                        } else {
                            if li == lj && r == c {
                                v -= 1.0;
                            }
                            target[(si * b + r, sj * b + c)] += weight * v;
                        }
                    }
                }
            }
        }
    }

    /// `W x` for a stacked follower vector.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.size);
        let b = self.block;
        let mut local_in = DVector::zeros(self.slots.len() * b);
        for (l, &s) in self.slots.iter().enumerate() {
            local_in.rows_mut(l * b, b).copy_from(&x.rows(s * b, b));
        }
        let local_out = &self.local * local_in;
        let mut out = x.clone();
        for (l, &s) in self.slots.iter().enumerate() {
            out.rows_mut(s * b, b).copy_from(&local_out.rows(l * b, b));
        }
        out
    }
}

/// Update matrix `W_ij` acting on the stacked follower error.
pub fn build_update_matrix(scen: &Scenario, ev: &SlotEvent, alpha: f64) -> UpdateMatrix {
    let d = scen.dim();
    let size = d * scen.followers().len();
    let a = scen
        .weight_between(ev.waker, ev.partner)
        .expect("event endpoints are neighbors");
    let eye = DMatrix::<f64>::identity(d, d);
    let (slots, local) = match ev.case {
        EventCase::BeaconBeacon => (Vec::new(), DMatrix::zeros(0, 0)),
        EventCase::BeaconFollower => {
            let f = if scen.is_beacon(ev.waker) {
                ev.partner
            } else {
                ev.waker
            };
            let slot = scen.follower_index(f).expect("follower");
            (vec![slot], &eye - a * alpha)
        }
        EventCase::FollowerFollower => {
            let si = scen.follower_index(ev.waker).expect("follower");
            let sj = scen.follower_index(ev.partner).expect("follower");
            let diag = &eye - a * alpha;
            let off = a * alpha;
            let mut local = DMatrix::zeros(2 * d, 2 * d);
            local.view_mut((0, 0), (d, d)).copy_from(&diag);
            local.view_mut((d, d), (d, d)).copy_from(&diag);
            local.view_mut((0, d), (d, d)).copy_from(&off);
            local.view_mut((d, 0), (d, d)).copy_from(&off);
            (vec![si, sj], local)
        }
    };
    UpdateMatrix {
        size,
        block: d,
        slots,
        local,
    }
}

/// Cumulative selection distribution per node.
#[derive(Debug, Clone)]
struct Selector {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Selector {
    fn new(scen: &Scenario) -> Self {
        let rows = (0..scen.node_count())
            .map(|i| {
                let mut acc = 0.0;
                scen.probability()
                    .row(i)
                    .iter()
                    .filter(|&&(_, p)| p > 0.0)
                    .map(|&(j, p)| {
                        acc += p;
                        (j, acc)
                    })
                    .collect()
            })
            .collect();
        Selector { rows }
    }

    fn pick(&self, i: usize, u: f64) -> Option<usize> {
        let row = &self.rows[i];
        let total = row.last()?.1;
        let target = u * total;
        let pos = row.partition_point(|&(_, c)| c <= target);
        Some(row[pos.min(row.len() - 1)].0)
    }
}

/// Mutable simulation state over a borrowed, immutable scenario.
#[derive(Debug, Clone)]
pub struct GossipState<'a> {
    scenario: &'a Scenario,
    estimates: DVector<f64>,
    slot: u64,
    rng: ChaCha8Rng,
    selector: Selector,
}

impl<'a> GossipState<'a> {
    /// Starts from the scenario's initial estimates.
    pub fn new(scenario: &'a Scenario, seed: u64) -> Self {
        Self::with_estimates(scenario, scenario.initial_estimates().clone(), seed)
    }

    /// Starts from arbitrary estimates; beacon blocks are reset to the true
    /// beacon positions.
    pub fn with_estimates(scenario: &'a Scenario, mut estimates: DVector<f64>, seed: u64) -> Self {
        assert_eq!(estimates.len(), scenario.true_positions().len());
        let d = scenario.dim();
        for &b in scenario.beacons() {
            estimates
                .rows_mut(b * d, d)
                .copy_from(&scenario.true_positions().rows(b * d, d));
        }
        GossipState {
            scenario,
            estimates,
            slot: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            selector: Selector::new(scenario),
        }
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    pub fn estimates(&self) -> &DVector<f64> {
        &self.estimates
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Stacked follower error `p_hat_f - p_f`.
    pub fn follower_error_vector(&self) -> DVector<f64> {
        self.scenario.follower_part(&self.estimates) - self.scenario.follower_positions()
    }

    /// Draws the waker uniformly and its partner from the waker's row.
    pub fn sample_event(&mut self) -> Result<SlotEvent> {
        let n = self.scenario.node_count();
        let waker = self.rng.gen_range(0..n);
        let u: f64 = self.rng.gen();
        let partner = self
            .selector
            .pick(waker, u)
            .ok_or(Error::IsolatedNode(waker))?;
        SlotEvent::between(self.scenario, waker, partner)
    }

    /// Applies one event and advances the slot counter.
    pub fn apply_event(&mut self, ev: &SlotEvent, alpha: f64) {
        let scen = self.scenario;
        let d = scen.dim();
        let a = scen
            .weight_between(ev.waker, ev.partner)
            .expect("event endpoints are neighbors");
        match ev.case {
            EventCase::BeaconBeacon => {}
            EventCase::FollowerFollower => {
                let delta = self.correction(a, ev.waker, ev.partner, alpha);
                for c in 0..d {
                    self.estimates[ev.waker * d + c] -= delta[c];
                    self.estimates[ev.partner * d + c] += delta[c];
                }
            }
            EventCase::BeaconFollower => {
                let (f, b) = if scen.is_beacon(ev.waker) {
                    (ev.partner, ev.waker)
                } else {
                    (ev.waker, ev.partner)
                };
                let delta = self.correction(a, f, b, alpha);
                for c in 0..d {
                    self.estimates[f * d + c] -= delta[c];
                }
            }
        }
        self.slot += 1;
    }

    // alpha * A (p_hat_i - p_hat_j)
    fn correction(&self, a: &DMatrix<f64>, i: usize, j: usize, alpha: f64) -> Vec<f64> {
        let d = a.nrows();
        let diff: Vec<f64> = (0..d)
            .map(|c| self.estimates[i * d + c] - self.estimates[j * d + c])
            .collect();
        (0..d)
            .map(|r| alpha * (0..d).map(|c| a[(r, c)] * diff[c]).sum::<f64>())
            .collect()
    }

    /// Samples and applies one slot.
    pub fn step(&mut self, alpha: f64) -> Result<SlotEvent> {
        let ev = self.sample_event()?;
        self.apply_event(&ev, alpha);
        Ok(ev)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub slot: u64,
    /// The event executed in this slot; `None` for the initial record.
    pub event: Option<SlotEvent>,
    pub bearing_error: f64,
    pub follower_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub seed: u64,
    pub alpha: f64,
    pub scenario_hash: String,
    pub slots_run: u64,
    pub record_stride: u64,
}

/// Full estimate vector captured at a given slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub slot: u64,
    pub estimates: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub metadata: TraceMetadata,
    pub snapshots: Vec<Snapshot>,
}

impl Trace {
    pub fn initial(&self) -> &TraceRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace always has an initial record")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub alpha: f64,
    pub slots: u64,
    pub seed: u64,
    pub record_stride: u64,
    /// Slots at which the full estimate vector is kept.
    pub snapshot_slots: Vec<u64>,
}

pub const DEFAULT_RECORD_STRIDE: u64 = 10;

impl RunOptions {
    pub fn new(alpha: f64, slots: u64, seed: u64) -> Self {
        RunOptions {
            alpha,
            slots,
            seed,
            record_stride: DEFAULT_RECORD_STRIDE,
            snapshot_slots: Vec::new(),
        }
    }
}

/// `{0, N/8, N/4, N/2, 3N/4, N}` (integer division).
pub fn figure_snapshot_schedule(slots: u64) -> Vec<u64> {
    let mut s = vec![0, slots / 8, slots / 4, slots / 2, 3 * slots / 4, slots];
    s.dedup();
    s
}

/// Runs `slots` slots, recording errors at slot 0, every `record_stride`
/// slots and at the final slot.
pub fn run(scen: &Scenario, alpha: f64, slots: u64, seed: u64, record_stride: u64) -> Result<Trace> {
    let opts = RunOptions {
        record_stride,
        ..RunOptions::new(alpha, slots, seed)
    };
    run_with(scen, &opts)
}

pub fn run_with(scen: &Scenario, opts: &RunOptions) -> Result<Trace> {
    if !(opts.alpha > 0.0 && opts.alpha.is_finite()) {
        return Err(Error::InvalidParams(format!("step size {} must be positive", opts.alpha)));
    }
    if opts.record_stride == 0 {
        return Err(Error::InvalidParams("record stride must be at least 1".into()));
    }
    let mut state = GossipState::new(scen, opts.seed);
    let mut snap_slots = opts.snapshot_slots.clone();
    snap_slots.sort_unstable();
    snap_slots.dedup();
    let mut next_snap = snap_slots.iter().peekable();
    let mut snapshots = Vec::new();

    let record = |state: &GossipState, event| TraceRecord {
        slot: state.slot(),
        event,
        bearing_error: metrics::scenario_bearing_error(scen, state.estimates()),
        follower_error: metrics::follower_error_unchecked(scen, state.estimates()),
    };

    let mut records = vec![record(&state, None)];
    if next_snap.peek() == Some(&&0) {
        snapshots.push(Snapshot {
            slot: 0,
            estimates: state.estimates().clone(),
        });
        next_snap.next();
    }
    for _ in 0..opts.slots {
        let ev = state.step(opts.alpha)?;
        let k = state.slot();
        if k.is_multiple_of(opts.record_stride) || k == opts.slots {
            records.push(record(&state, Some(ev)));
        }
        while next_snap.peek() == Some(&&k) {
            snapshots.push(Snapshot {
                slot: k,
                estimates: state.estimates().clone(),
            });
            next_snap.next();
        }
    }

    Ok(Trace {
        records,
        metadata: TraceMetadata {
            seed: opts.seed,
            alpha: opts.alpha,
            scenario_hash: scen.fingerprint(),
            slots_run: opts.slots,
            record_stride: opts.record_stride,
        },
        snapshots,
    })
}
