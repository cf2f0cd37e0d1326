//! On-disk formats.
//!
//! Scenario and report documents are JSON. Traces, snapshots and Monte Carlo
//! summaries are CSV with fixed headers. Node ids are zero-based everywhere.
//!
//! Scenario document fields:
//!
//! | field               | meaning                                                   |
//! |---------------------|-----------------------------------------------------------|
//! | `dimension`         | `d`                                                       |
//! | `positions`         | `n` coordinate arrays of length `d`                       |
//! | `edges`             | optional `[i, j]` pairs; derived from `radius` if absent  |
//! | `radius`            | proximity radius (inclusive)                              |
//! | `beacons`           | beacon node ids                                           |
//! | `probability`       | `"uniform"` or `n` dense rows                             |
//! | `init_box`          | `{lo, hi}` sampling box for follower estimates            |
//! | `initial_estimates` | optional explicit `n x d` estimates (overrides the box)   |
//! | `seed`              | seed for sampling the initial estimates                   |

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Framework, Position, RigidityReport};
use crate::gossip::{EventCase, SlotEvent, Trace, TraceRecord};
use crate::metrics::EpsilonTimeEstimate;
use crate::network::{
    make_scenario, proximity_graph, uniform_selection, InitMode, ProbabilityModel, Scenario,
};
use crate::spectral::SpectralReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbabilityKeyword {
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbabilitySpec {
    Named(ProbabilityKeyword),
    Rows(Vec<Vec<f64>>),
}

impl Default for ProbabilitySpec {
    fn default() -> Self {
        ProbabilitySpec::Named(ProbabilityKeyword::Uniform)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub dimension: usize,
    pub positions: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    pub beacons: Vec<usize>,
    #[serde(default)]
    pub probability: ProbabilitySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_box: Option<InitBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_estimates: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioDoc {
    /// Describes `scen` with explicit positions and edges. `radius` is
    /// recorded for reference only.
    pub fn from_scenario(scen: &Scenario, radius: Option<f64>) -> Self {
        let fw = scen.framework();
        let d = fw.dim();
        let probability = match uniform_selection(fw) {
            Ok(u) if &u == scen.probability() => ProbabilitySpec::default(),
            _ => {
                let dense = scen.probability().to_dense();
                ProbabilitySpec::Rows(
                    dense.row_iter().map(|r| r.iter().cloned().collect()).collect(),
                )
            }
        };
        let (init_box, initial_estimates) = match scen.init_mode() {
            InitMode::UniformBox { lo, hi } => (
                Some(InitBox {
                    lo: lo.clone(),
                    hi: hi.clone(),
                }),
                None,
            ),
            InitMode::Explicit(v) => (None, Some(split_blocks(v, d))),
        };
        ScenarioDoc {
            dimension: d,
            positions: fw.positions().iter().map(|p| p.0.iter().cloned().collect()).collect(),
            edges: Some(fw.edges().iter().map(|&(i, j)| [i, j]).collect()),
            radius,
            beacons: scen.beacons().to_vec(),
            probability,
            init_box,
            initial_estimates,
            seed: scen.seed(),
        }
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let d = self.dimension;
        if let Some((i, p)) = self.positions.iter().enumerate().find(|(_, p)| p.len() != d) {
            return Err(Error::Parse(format!(
                "position {i} has {} coordinates, dimension is {d}",
                p.len()
            )));
        }
        let positions: Vec<Position> = self.positions.iter().map(|p| Position::new(p)).collect();
        let fw = match (&self.edges, self.radius) {
            (Some(edges), _) => {
                let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
                Framework::new(positions, &pairs)?
            }
            (None, Some(r)) => proximity_graph(positions, r)?,
            (None, None) => {
                return Err(Error::Parse("scenario needs either 'edges' or 'radius'".into()))
            }
        };
        let prob = match &self.probability {
            ProbabilitySpec::Named(ProbabilityKeyword::Uniform) => uniform_selection(&fw)?,
            ProbabilitySpec::Rows(rows) => {
                let n = fw.node_count();
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Parse(format!("probability must be {n} rows of {n}")));
                }
                let dense = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                ProbabilityModel::from_dense(&fw, &dense)?
            }
        };
        let init = match (&self.initial_estimates, &self.init_box) {
            (Some(est), _) => {
                if est.len() != fw.node_count() || est.iter().any(|e| e.len() != d) {
                    return Err(Error::Parse("initial_estimates must be n rows of d".into()));
                }
                InitMode::Explicit(DVector::from_iterator(
                    d * est.len(),
                    est.iter().flatten().cloned(),
                ))
            }
            (None, Some(b)) => InitMode::UniformBox {
                lo: b.lo.clone(),
                hi: b.hi.clone(),
            },
            (None, None) => InitMode::default_box(d),
        };
        make_scenario(fw, &self.beacons, prob, init, self.seed)
    }
}

fn split_blocks(v: &DVector<f64>, d: usize) -> Vec<Vec<f64>> {
    v.as_slice().chunks(d).map(|c| c.to_vec()).collect()
}

pub fn read_scenario_doc(path: &Path) -> Result<ScenarioDoc> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    read_scenario_doc(path)?.to_scenario()
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityDoc {
    pub nodes: usize,
    pub edges: usize,
    pub dimension: usize,
    #[serde(flatten)]
    pub report: RigidityReport,
}

/// Spectral report document. `K` maps each epsilon to `K(eps)`; `null`
/// stands for an infinite bound.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDoc {
    pub lambda_max_Lff: f64,
    pub mean_bound: f64,
    pub second_moment_bound: f64,
    pub projection_norm_bound: f64,
    pub event_bound: Option<f64>,
    pub alpha_used: f64,
    pub admissible: bool,
    pub rho_EW: f64,
    pub rho_EWtW: f64,
    pub K: BTreeMap<String, Option<f64>>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&SpectralReport> for SpectralDoc {
    fn from(r: &SpectralReport) -> Self {
        SpectralDoc {
            lambda_max_Lff: r.bounds.lambda_max_lff,
            mean_bound: r.bounds.mean_bound,
            second_moment_bound: r.bounds.second_moment_bound,
            projection_norm_bound: r.bounds.projection_norm_bound,
            event_bound: finite(r.bounds.event_bound),
            alpha_used: r.alpha,
            admissible: r.admissible,
            rho_EW: r.rho_ew,
            rho_EWtW: r.rho_ewtw,
            K: r
                .k_epsilon
                .iter()
                .map(|&(e, k)| (format!("{e}"), finite(k)))
                .collect(),
        }
    }
}

pub const TRACE_HEADER: [&str; 6] = [
    "slot",
    "waker",
    "partner",
    "case",
    "bearing_error",
    "follower_error",
];

pub fn write_trace_csv<W: Write>(out: W, trace: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        let (waker, partner, case) = match &r.event {
            Some(ev) => (ev.waker.to_string(), ev.partner.to_string(), ev.case.as_str().to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            r.slot.to_string(),
            waker,
            partner,
            case,
            r.bearing_error.to_string(),
            r.follower_error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(TRACE_HEADER) {
        return Err(Error::Parse(format!("unexpected trace header {headers:?}")));
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Parse(format!("bad number '{s}'"))) };
    let id = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::Parse(format!("bad node id '{s}'"))) };
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let event = if rec[1].is_empty() {
                None
            } else {
                Some(SlotEvent {
                    waker: id(&rec[1])?,
                    partner: id(&rec[2])?,
                    case: rec[3].parse::<EventCase>()?,
                })
            };
            Ok(TraceRecord {
                slot: rec[0]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad slot '{}'", &rec[0])))?,
                event,
                bearing_error: num(&rec[4])?,
                follower_error: num(&rec[5])?,
            })
        })
        .collect()
}

fn coord_names(d: usize) -> Vec<String> {
    match d {
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        _ => (0..d).map(|c| format!("c{c}")).collect(),
    }
}

/// One row per node: `node,role,x,y[,z]`.
pub fn write_positions_csv<W: Write>(out: W, scen: &Scenario, stacked: &DVector<f64>) -> Result<()> {
    let d = scen.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["node".to_string(), "role".to_string()];
    header.extend(coord_names(d));
    w.write_record(&header)?;
    for i in 0..scen.node_count() {
        let role = if scen.is_beacon(i) { "beacon" } else { "follower" };
        let mut row = vec![i.to_string(), role.to_string()];
        row.extend((0..d).map(|c| stacked[i * d + c].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_edges_csv<W: Write>(out: W, fw: &Framework) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j"])?;
    for &(i, j) in fw.edges() {
        w.write_record([i.to_string(), j.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Headerless coordinate rows, one node per line.
pub fn read_coordinates_csv<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    rdr.records()
        .map(|rec| {
            rec?.iter()
                .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad coordinate '{s}'"))))
                .collect()
        })
        .collect()
}

/// Edge list with an `i,j` header, as written by [`write_edges_csv`].
pub fn read_edges_csv<R: Read>(input: R) -> Result<Vec<[usize; 2]>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    rdr.deserialize::<(usize, usize)>()
        .map(|r| r.map(|(i, j)| [i, j]).map_err(Error::from))
        .collect()
}

pub const MONTECARLO_HEADER: [&str; 5] = [
    "epsilon",
    "empirical_k",
    "bound_k",
    "trials",
    "exceedance_at_bound",
];

pub fn write_montecarlo_csv<W: Write>(out: W, rows: &[EpsilonTimeEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MONTECARLO_HEADER)?;
    for r in rows {
        w.write_record([
            r.epsilon.to_string(),
            r.empirical_k.to_string(),
            r.bound_k.to_string(),
            r.trials.to_string(),
            r.exceedance_at_bound.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks;
    use crate::gossip;

    #[test]
    fn generated_scenarios_round_trip() {
        for scen in [
            benchmarks::fig1a_scenario(3),
            benchmarks::three_node_scenario(9),
            benchmarks::small_sinc_scenario(1),
        ] {
            let doc = ScenarioDoc::from_scenario(&scen, Some(0.5));
            let text = to_json_string(&doc).unwrap();
            let back: ScenarioDoc = serde_json::from_str(&text).unwrap();
            assert_eq!(back, doc);
            assert_eq!(back.to_scenario().unwrap(), scen);
        }
    }

    #[test]
    fn explicit_rows_and_estimates_round_trip() {
        let fw = benchmarks::fig1b();
        let dense = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 0.25, 0.75, 0.0, 0.5, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.0],
        );
        let prob = ProbabilityModel::from_dense(&fw, &dense).unwrap();
        let init = InitMode::Explicit(DVector::from_vec(vec![0.1; 8]));
        let scen = make_scenario(fw, &[0, 1], prob, init, 0).unwrap();
        let doc = ScenarioDoc::from_scenario(&scen, None);
        assert!(matches!(doc.probability, ProbabilitySpec::Rows(_)));
        let back: ScenarioDoc = serde_json::from_str(&to_json_string(&doc).unwrap()).unwrap();
        assert_eq!(back.to_scenario().unwrap(), scen);
    }

    #[test]
    fn radius_only_document() {
        let text = r#"{
            "dimension": 2,
            "positions": [[0, 0], [2, 0], [1, 1]],
            "radius": 1.5,
            "beacons": [0, 1],
            "probability": "uniform",
            "seed": 4
        }"#;
        let doc: ScenarioDoc = serde_json::from_str(text).unwrap();
        let scen = doc.to_scenario().unwrap();
        assert_eq!(scen.framework().edges(), &[(0, 2), (1, 2)]);
        assert_eq!(scen.init_mode(), &InitMode::default_box(2));
    }

    #[test]
    fn malformed_documents_are_rejected() {
        let bad = [
            r#"{"dimension": 2, "positions": [[0, 0], [1]], "radius": 2, "beacons": [0, 1]}"#,
            r#"{"dimension": 2, "positions": [[0, 0], [1, 0]], "beacons": [0, 1]}"#,
            r#"{"dimension": 2, "positions": [[0, 0], [1, 0]], "radius": 2, "beacons": [0]}"#,
            r#"{"dimension": 2, "positions": [[0, 0], [1, 0]], "radius": 2, "beacons": [0, 1], "probability": "random"}"#,
        ];
        for text in bad {
            let parsed: std::result::Result<ScenarioDoc, _> = serde_json::from_str(text);
            if let Ok(doc) = parsed {
                assert!(doc.to_scenario().is_err(), "{text}");
            }
        }
    }

    #[test]
    fn trace_csv_round_trip() {
        let scen = benchmarks::fig1a_scenario(0);
        let trace = gossip::run(&scen, 0.5, 30, 2, 4).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("slot,waker,partner,case,bearing_error,follower_error\n0,,,,"));
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), trace.records);
    }

    #[test]
    fn coordinate_and_edge_readers() {
        let coords = read_coordinates_csv("0, 0\n2,0\n1,1.5\n".as_bytes()).unwrap();
        assert_eq!(coords, vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 1.5]]);
        assert!(read_coordinates_csv("0,x\n".as_bytes()).is_err());
        let fw = benchmarks::fig1a();
        let mut buf = Vec::new();
        write_edges_csv(&mut buf, &fw).unwrap();
        let edges = read_edges_csv(buf.as_slice()).unwrap();
        let expect: Vec<[usize; 2]> = fw.edges().iter().map(|&(i, j)| [i, j]).collect();
        assert_eq!(edges, expect);
    }

    #[test]
    fn montecarlo_csv_layout() {
        let rows = [EpsilonTimeEstimate {
            epsilon: 0.1,
            empirical_k: 12,
            bound_k: 40.5,
            trials: 500,
            exceedance_at_bound: 0.0,
        }];
        let mut buf = Vec::new();
        write_montecarlo_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epsilon,empirical_k,bound_k,trials,exceedance_at_bound\n0.1,12,40.5,500,0\n"
        );
    }
}
