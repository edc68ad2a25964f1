//! Random planar networks, noisy range measurements and instance files.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower clamp applied to noisy distances.
pub const MIN_DISTANCE: f64 = 1e-8;

/// Instance file format version written by [`save_instance`].
pub const INSTANCE_VERSION: u32 = 1;

const PLACEMENT_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, o: &Point2) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTruth {
    pub anchors: Vec<Point2>,
    pub sensors: Vec<Point2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// `d_hat = d + sigma * g`
    #[default]
    Additive,
    /// `d_hat = d * (1 + sigma * g)`
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Uniform in `[-0.5, 0.5]^2`.
    #[default]
    UnitSquareCentered,
}

impl Placement {
    pub fn contains(&self, p: &Point2) -> bool {
        match self {
            Placement::UnitSquareCentered => {
                (-0.5..=0.5).contains(&p.x) && (-0.5..=0.5).contains(&p.y)
            }
        }
    }
}

/// Sensor-to-sensor measurement `(i, j, d_hat)` with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorEdge {
    pub i: usize,
    pub j: usize,
    pub d_hat: f64,
}

/// Sensor-to-anchor measurement `(j, k, d_hat)`: sensor `j`, anchor `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorEdge {
    pub j: usize,
    pub k: usize,
    pub d_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementGraph {
    pub n: usize,
    pub m: usize,
    pub sensor_edges: Vec<SensorEdge>,
    pub anchor_edges: Vec<AnchorEdge>,
    pub radio_range: f64,
    pub noise_std: f64,
    pub noise_model: NoiseModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n: usize,
    pub m: usize,
    pub radio_range: f64,
    pub noise_std: f64,
    #[serde(default)]
    pub noise_model: NoiseModel,
    #[serde(default)]
    pub max_degree: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub placement: Placement,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n: 80,
            m: 5,
            radio_range: 0.25,
            noise_std: 0.05,
            noise_model: NoiseModel::Additive,
            max_degree: None,
            seed: 0,
            placement: Placement::UnitSquareCentered,
        }
    }
}

#[derive(Debug, Error)]
pub enum NetgenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("invalid measurement graph: {0}")]
    InvalidGraph(String),
    #[error("no measurements within radio range {0}")]
    EmptyGraph(f64),
    #[error("truth has {got_n} sensors and {got_m} anchors, config expects {n} and {m}")]
    TruthMismatch {
        n: usize,
        m: usize,
        got_n: usize,
        got_m: usize,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("instance format error: {0}")]
    Format(String),
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), NetgenError> {
        let bad = |s: &str| Err(NetgenError::InvalidConfig(s.to_string()));
        if self.n < 1 {
            return bad("at least one sensor is required (n >= 1)");
        }
        if !(self.radio_range > 0.0 && self.radio_range.is_finite()) {
            return bad("radio_range must be positive and finite");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be nonnegative and finite");
        }
        if self.max_degree == Some(0) {
            return bad("max_degree must be at least 1");
        }
        Ok(())
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws sensors then anchors uniformly from the placement region.
pub fn generate_network(cfg: &GenConfig) -> Result<NetworkTruth, NetgenError> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, PLACEMENT_STREAM);
    let mut draw = |count: usize| -> Vec<Point2> {
        (0..count)
            .map(|_| match cfg.placement {
                Placement::UnitSquareCentered => {
                    let x: f64 = rng.random::<f64>() - 0.5;
                    let y: f64 = rng.random::<f64>() - 0.5;
                    Point2::new(x, y)
                }
            })
            .collect()
    };
    let sensors = draw(cfg.n);
    let anchors = draw(cfg.m);
    Ok(NetworkTruth { anchors, sensors })
}

/// Creates noisy measurements for every pair within radio range.
///
/// Noise is drawn for every in-range pair in canonical order (sensor pairs by
/// `(i, j)`, then sensor-anchor pairs by `(j, k)`) before any degree cap is
/// applied, so capped and uncapped graphs share measurements on common edges.
pub fn build_measurements(
    truth: &NetworkTruth,
    cfg: &GenConfig,
) -> Result<MeasurementGraph, NetgenError> {
    cfg.validate()?;
    let (n, m) = (truth.sensors.len(), truth.anchors.len());
    if n != cfg.n || m != cfg.m {
        return Err(NetgenError::TruthMismatch {
            n: cfg.n,
            m: cfg.m,
            got_n: n,
            got_m: m,
        });
    }
    let r = cfg.radio_range;
    let mut rng = stream_rng(cfg.seed, NOISE_STREAM);
    let mut noisy = |d: f64| -> f64 {
        let g: f64 = rng.sample(StandardNormal);
        let v = match cfg.noise_model {
            NoiseModel::Additive => d + cfg.noise_std * g,
            NoiseModel::Multiplicative => d * (1.0 + cfg.noise_std * g),
        };
        v.max(MIN_DISTANCE)
    };

    // (i, j, true distance, measured distance)
    let mut sensor_cand = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = truth.sensors[i].dist(&truth.sensors[j]);
            if d <= r {
                sensor_cand.push((i, j, d, noisy(d)));
            }
        }
    }
    let mut anchor_edges = Vec::new();
    for j in 0..n {
        for k in 0..m {
            let d = truth.sensors[j].dist(&truth.anchors[k]);
            if d <= r {
                anchor_edges.push(AnchorEdge {
                    j,
                    k,
                    d_hat: noisy(d),
                });
            }
        }
    }

    let sensor_edges = match cfg.max_degree {
        None => sensor_cand
            .into_iter()
            .map(|(i, j, _, d_hat)| SensorEdge { i, j, d_hat })
            .collect(),
        Some(cap) => cap_degree(sensor_cand, n, cap),
    };

    if sensor_edges.is_empty() && anchor_edges.is_empty() {
        return Err(NetgenError::EmptyGraph(r));
    }
    Ok(MeasurementGraph {
        n,
        m,
        sensor_edges,
        anchor_edges,
        radio_range: r,
        noise_std: cfg.noise_std,
        noise_model: cfg.noise_model,
    })
}

/// Greedy nearest-first pruning: edges are visited by increasing true
/// distance and kept while both endpoints are below the cap.
fn cap_degree(mut cand: Vec<(usize, usize, f64, f64)>, n: usize, cap: usize) -> Vec<SensorEdge> {
    let order: Vec<(usize, usize)> = cand.iter().map(|c| (c.0, c.1)).collect();
    cand.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    let mut deg = vec![0usize; n];
    let mut keep = std::collections::BTreeSet::new();
    for &(i, j, _, _) in &cand {
        if deg[i] < cap && deg[j] < cap {
            deg[i] += 1;
            deg[j] += 1;
            keep.insert((i, j));
        }
    }
    let mut by_pair: std::collections::BTreeMap<(usize, usize), f64> =
        cand.iter().map(|c| ((c.0, c.1), c.3)).collect();
    order
        .into_iter()
        .filter(|p| keep.contains(p))
        .map(|(i, j)| SensorEdge {
            i,
            j,
            d_hat: by_pair.remove(&(i, j)).expect("kept pair is a candidate"),
        })
        .collect()
}

/// Generates a network and its measurements in one call.
pub fn generate_instance(cfg: &GenConfig) -> Result<(NetworkTruth, MeasurementGraph), NetgenError> {
    let truth = generate_network(cfg)?;
    let graph = build_measurements(&truth, cfg)?;
    Ok((truth, graph))
}

impl MeasurementGraph {
    /// Number of measured distances, `|N_s| + |N_a|`.
    pub fn num_edges(&self) -> usize {
        self.sensor_edges.len() + self.anchor_edges.len()
    }

    /// Sensor-to-sensor degree of every sensor.
    pub fn sensor_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for e in &self.sensor_edges {
            deg[e.i] += 1;
            deg[e.j] += 1;
        }
        deg
    }

    /// Checks index ranges, orientation, positivity and duplicates.
    pub fn validate(&self) -> Result<(), NetgenError> {
        let bad = |s: String| Err(NetgenError::InvalidGraph(s));
        if self.n < 1 {
            return bad("graph has no sensors".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for (idx, e) in self.sensor_edges.iter().enumerate() {
            if e.i >= e.j || e.j >= self.n {
                return bad(format!(
                    "sensor edge {idx} ({}, {}) is out of range or not ordered i < j",
                    e.i, e.j
                ));
            }
            if !(e.d_hat > 0.0 && e.d_hat.is_finite()) {
                return bad(format!(
                    "sensor edge {idx} has non-positive distance {}",
                    e.d_hat
                ));
            }
            if !seen.insert((0, e.i, e.j)) {
                return bad(format!("duplicate sensor edge ({}, {})", e.i, e.j));
            }
        }
        for (idx, e) in self.anchor_edges.iter().enumerate() {
            if e.j >= self.n || e.k >= self.m {
                return bad(format!(
                    "anchor edge {idx} ({}, {}) is out of range",
                    e.j, e.k
                ));
            }
            if !(e.d_hat > 0.0 && e.d_hat.is_finite()) {
                return bad(format!(
                    "anchor edge {idx} has non-positive distance {}",
                    e.d_hat
                ));
            }
            if !seen.insert((1, e.j, e.k)) {
                return bad(format!("duplicate anchor edge ({}, {})", e.j, e.k));
            }
        }
        if self.num_edges() == 0 {
            return Err(NetgenError::EmptyGraph(self.radio_range));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    version: u32,
    n: usize,
    m: usize,
    radio_range: f64,
    noise_std: f64,
    noise_model: NoiseModel,
    anchors: Vec<[f64; 2]>,
    sensors: Vec<[f64; 2]>,
    sensor_edges: Vec<(usize, usize, f64)>,
    anchor_edges: Vec<(usize, usize, f64)>,
}

/// Serializes an instance to the JSON instance format.
pub fn instance_to_string(truth: &NetworkTruth, graph: &MeasurementGraph) -> String {
    let file = InstanceFile {
        version: INSTANCE_VERSION,
        n: graph.n,
        m: graph.m,
        radio_range: graph.radio_range,
        noise_std: graph.noise_std,
        noise_model: graph.noise_model,
        anchors: truth.anchors.iter().map(|p| [p.x, p.y]).collect(),
        sensors: truth.sensors.iter().map(|p| [p.x, p.y]).collect(),
        sensor_edges: graph
            .sensor_edges
            .iter()
            .map(|e| (e.i, e.j, e.d_hat))
            .collect(),
        anchor_edges: graph
            .anchor_edges
            .iter()
            .map(|e| (e.j, e.k, e.d_hat))
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("instance serializes");
    s.push('\n');
    s
}

/// Parses the JSON instance format and validates the result.
pub fn instance_from_str(text: &str) -> Result<(NetworkTruth, MeasurementGraph), NetgenError> {
    let f: InstanceFile =
        serde_json::from_str(text).map_err(|e| NetgenError::Format(e.to_string()))?;
    if f.version != INSTANCE_VERSION {
        return Err(NetgenError::Format(format!(
            "unsupported version {} (expected {INSTANCE_VERSION})",
            f.version
        )));
    }
    if f.sensors.len() != f.n || f.anchors.len() != f.m {
        return Err(NetgenError::Format(format!(
            "field n={} / m={} disagrees with {} sensors / {} anchors listed",
            f.n,
            f.m,
            f.sensors.len(),
            f.anchors.len()
        )));
    }
    let pt = |p: &[f64; 2]| Point2::new(p[0], p[1]);
    let truth = NetworkTruth {
        anchors: f.anchors.iter().map(pt).collect(),
        sensors: f.sensors.iter().map(pt).collect(),
    };
    if truth
        .anchors
        .iter()
        .chain(&truth.sensors)
        .any(|p| !p.x.is_finite() || !p.y.is_finite())
    {
        return Err(NetgenError::Format("coordinates must be finite".into()));
    }
    let graph = MeasurementGraph {
        n: f.n,
        m: f.m,
        sensor_edges: f
            .sensor_edges
            .into_iter()
            .map(|(i, j, d_hat)| SensorEdge { i, j, d_hat })
            .collect(),
        anchor_edges: f
            .anchor_edges
            .into_iter()
            .map(|(j, k, d_hat)| AnchorEdge { j, k, d_hat })
            .collect(),
        radio_range: f.radio_range,
        noise_std: f.noise_std,
        noise_model: f.noise_model,
    };
    graph.validate().map_err(|e| match e {
        NetgenError::InvalidGraph(s) => NetgenError::Format(s),
        other => other,
    })?;
    Ok((truth, graph))
}

pub fn save_instance(
    truth: &NetworkTruth,
    graph: &MeasurementGraph,
    path: impl AsRef<Path>,
) -> Result<(), NetgenError> {
    let path = path.as_ref();
    fs::write(path, instance_to_string(truth, graph)).map_err(|source| NetgenError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_instance(
    path: impl AsRef<Path>,
) -> Result<(NetworkTruth, MeasurementGraph), NetgenError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| NetgenError::Io {
        path: path.display().to_string(),
        source,
    })?;
    instance_from_str(&text)
}

/// Mixes a master seed and a network index into an independent 64-bit seed
/// (splitmix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
