//! On-disk JSON formats: curve parameters, topologies, per-node LCDs, the
//! public directory, and the CA's sensitive state file.
//!
//! All field values are decimal strings so the formats survive a move to
//! wider integers unchanged; curve points are `{x, y}` objects or the string
//! `"inf"`. Maps are keyed by stringified node ids and serialized in key
//! order, which keeps identical states byte-identical on disk.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::{CurvePoint, CurveParams, FieldElement, FieldVector, PointVector};
use crate::authority::{CaState, Cluster, Lcd, PublicComponent, SecretComponent};
use crate::error::{Error, Result};
use crate::topology::{Ant, NodeId};

/// Marker embedded in the CA state file; everything under it is CA-private.
pub const SENSITIVE_MARKER: &str =
    "CA-PRIVATE: contains arrow pre-image vectors and all node secrets";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CurveFile {
    pub q: String,
    pub a: String,
    pub b: String,
    pub gx: String,
    pub gy: String,
    pub p: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TopologyFile {
    pub n: NodeId,
    pub edges: Vec<[NodeId; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roots: Option<Vec<NodeId>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(untagged)]
pub enum PointJson {
    Marker(String),
    Affine { x: String, y: String },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct LcdFile {
    pub node: NodeId,
    pub k: [String; 2],
    pub t: [String; 2],
    pub public: BTreeMap<String, Vec<PointJson>>,
}

pub type DirectoryFile = BTreeMap<String, BTreeMap<String, Vec<PointJson>>>;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ClusterJson {
    pub master: NodeId,
    pub members: Vec<NodeId>,
    pub gamma: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaStateFile {
    pub sensitivity: String,
    pub curve: CurveFile,
    pub topology: TopologyFile,
    pub lcds: Vec<LcdFile>,
    /// Arrow pre-image vectors, keyed `"i-j"`. CA eyes only.
    pub ca_secrets: BTreeMap<String, [String; 2]>,
    pub clusters: Vec<ClusterJson>,
    pub replacements: BTreeMap<String, u32>,
    /// Ratio p / N recorded at export time; only p > N is enforced.
    pub field_to_node_ratio: f64,
}

fn parse_u64(s: &str, what: &str) -> Result<u64> {
    s.parse::<u64>()
        .map_err(|_| Error::FileFormat(format!("{what}: expected a decimal integer, got {s:?}")))
}

fn parse_residue(s: &str, modulus: u64, what: &str) -> Result<FieldElement> {
    let v = parse_u64(s, what)?;
    if v >= modulus {
        return Err(Error::FileFormat(format!(
            "{what}: value {v} is not reduced modulo {modulus}"
        )));
    }
    Ok(FieldElement::new(v, modulus))
}

fn parse_node_key(s: &str) -> Result<NodeId> {
    s.parse::<NodeId>()
        .map_err(|_| Error::FileFormat(format!("map key {s:?} is not a node id")))
}

// -- curve --

pub fn curve_to_file(curve: &CurveParams) -> CurveFile {
    let (gx, gy) = match curve.base_point() {
        CurvePoint::Affine { x, y } => (x.value(), y.value()),
        CurvePoint::Infinity => unreachable!("validated base points are affine"),
    };
    CurveFile {
        q: curve.q().to_string(),
        a: curve.a().value().to_string(),
        b: curve.b().value().to_string(),
        gx: gx.to_string(),
        gy: gy.to_string(),
        p: curve.subgroup_order().to_string(),
    }
}

pub fn curve_from_file(file: &CurveFile) -> Result<CurveParams> {
    CurveParams::new(
        parse_u64(&file.q, "curve.q")?,
        parse_u64(&file.a, "curve.a")?,
        parse_u64(&file.b, "curve.b")?,
        parse_u64(&file.gx, "curve.gx")?,
        parse_u64(&file.gy, "curve.gy")?,
        parse_u64(&file.p, "curve.p")?,
    )
}

// -- topology --

pub fn topology_to_file(graph: &Ant, roots: Option<Vec<NodeId>>) -> TopologyFile {
    let edges = graph
        .arrows()
        .filter(|(i, j)| i < j)
        .map(|(i, j)| [i, j])
        .collect();
    TopologyFile {
        n: graph.node_count(),
        edges,
        roots,
    }
}

/// Edges are unordered pairs and get symmetrized here.
pub fn topology_from_file(file: &TopologyFile) -> Result<Ant> {
    Ant::from_edges(file.n, file.edges.iter().map(|&[i, j]| (i, j)))
}

// -- points and vectors --

fn point_to_json(point: &CurvePoint) -> PointJson {
    match point {
        CurvePoint::Infinity => PointJson::Marker("inf".into()),
        CurvePoint::Affine { x, y } => PointJson::Affine {
            x: x.value().to_string(),
            y: y.value().to_string(),
        },
    }
}

fn point_from_json(json: &PointJson, curve: &CurveParams) -> Result<CurvePoint> {
    let point = match json {
        PointJson::Marker(s) if s == "inf" => CurvePoint::Infinity,
        PointJson::Marker(s) => {
            return Err(Error::FileFormat(format!(
                "unknown point marker {s:?}, expected \"inf\""
            )))
        }
        PointJson::Affine { x, y } => CurvePoint::Affine {
            x: parse_residue(x, curve.q(), "point.x")?,
            y: parse_residue(y, curve.q(), "point.y")?,
        },
    };
    if !curve.is_on_curve(&point) {
        return Err(Error::InvalidPoint);
    }
    Ok(point)
}

fn point_vector_to_json(v: &PointVector) -> Vec<PointJson> {
    v.points().iter().map(point_to_json).collect()
}

fn point_vector_from_json(json: &[PointJson], curve: &CurveParams) -> Result<PointVector> {
    if json.is_empty() {
        return Err(Error::FileFormat("empty point vector".into()));
    }
    Ok(PointVector::new(
        json.iter()
            .map(|p| point_from_json(p, curve))
            .collect::<Result<Vec<_>>>()?,
    ))
}

fn vector_to_pair(v: &FieldVector) -> [String; 2] {
    assert_eq!(v.len(), 2, "file formats are fixed at two dimensions");
    [v.coord(0).value().to_string(), v.coord(1).value().to_string()]
}

fn vector_from_pair(pair: &[String; 2], modulus: u64, what: &str) -> Result<FieldVector> {
    let a = parse_residue(&pair[0], modulus, what)?;
    let b = parse_residue(&pair[1], modulus, what)?;
    Ok(FieldVector::new(vec![a, b]))
}

// -- lcd --

pub fn lcd_to_file(lcd: &Lcd) -> LcdFile {
    LcdFile {
        node: lcd.node,
        k: vector_to_pair(&lcd.secret.k),
        t: vector_to_pair(&lcd.secret.t),
        public: lcd
            .public
            .iter()
            .map(|(j, v)| (j.to_string(), point_vector_to_json(v)))
            .collect(),
    }
}

pub fn lcd_from_file(file: &LcdFile, curve: &CurveParams) -> Result<Lcd> {
    let p = curve.subgroup_order();
    let mut public: PublicComponent = BTreeMap::new();
    for (key, points) in &file.public {
        public.insert(parse_node_key(key)?, point_vector_from_json(points, curve)?);
    }
    Ok(Lcd {
        node: file.node,
        secret: SecretComponent {
            k: vector_from_pair(&file.k, p, "lcd.k")?,
            t: vector_from_pair(&file.t, p, "lcd.t")?,
        },
        public,
    })
}

// -- directory --

pub fn directory_to_file(directory: &BTreeMap<NodeId, PublicComponent>) -> DirectoryFile {
    directory
        .iter()
        .map(|(i, public)| {
            (
                i.to_string(),
                public
                    .iter()
                    .map(|(j, v)| (j.to_string(), point_vector_to_json(v)))
                    .collect(),
            )
        })
        .collect()
}

// -- ca state --

pub fn ca_state_to_file(state: &CaState) -> CaStateFile {
    CaStateFile {
        sensitivity: SENSITIVE_MARKER.into(),
        curve: curve_to_file(state.curve()),
        topology: topology_to_file(state.topology(), None),
        lcds: state.lcds().values().map(lcd_to_file).collect(),
        ca_secrets: state
            .ca_secrets()
            .iter()
            .map(|(&(i, j), m)| (format!("{i}-{j}"), vector_to_pair(m)))
            .collect(),
        clusters: state
            .clusters()
            .values()
            .map(|c| ClusterJson {
                master: c.master,
                members: c.members.iter().copied().collect(),
                gamma: c.gamma.value().to_string(),
            })
            .collect(),
        replacements: state
            .replacements_map()
            .iter()
            .map(|(&i, &c)| (i.to_string(), c))
            .collect(),
        field_to_node_ratio: state.field_to_node_ratio(),
    }
}

pub fn ca_state_from_file(file: &CaStateFile) -> Result<CaState> {
    let curve = curve_from_file(&file.curve)?;
    let topology = topology_from_file(&file.topology)?;
    let p = curve.subgroup_order();

    let mut lcds = BTreeMap::new();
    for lcd_file in &file.lcds {
        let lcd = lcd_from_file(lcd_file, &curve)?;
        lcds.insert(lcd.node, lcd);
    }
    let mut ca_secrets = BTreeMap::new();
    for (key, pair) in &file.ca_secrets {
        let (i, j) = key
            .split_once('-')
            .ok_or_else(|| Error::FileFormat(format!("arrow key {key:?} is not \"i-j\"")))?;
        ca_secrets.insert(
            (parse_node_key(i)?, parse_node_key(j)?),
            vector_from_pair(pair, p, "ca_secrets")?,
        );
    }
    let mut clusters = BTreeMap::new();
    for c in &file.clusters {
        clusters.insert(
            c.master,
            Cluster {
                master: c.master,
                members: c.members.iter().copied().collect(),
                gamma: parse_residue(&c.gamma, p, "cluster.gamma")?,
            },
        );
    }
    let mut replacements = BTreeMap::new();
    for (key, count) in &file.replacements {
        replacements.insert(parse_node_key(key)?, *count);
    }
    let state = CaState::from_parts(topology, curve, lcds, ca_secrets, clusters, replacements)?;
    state.verify_invariants()?;
    Ok(state)
}

// -- io helpers --

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_curve(path: &Path) -> Result<CurveParams> {
    curve_from_file(&read_json(path)?)
}

pub fn save_curve(path: &Path, curve: &CurveParams) -> Result<()> {
    write_json(path, &curve_to_file(curve))
}

pub fn load_topology(path: &Path) -> Result<(Ant, Option<Vec<NodeId>>)> {
    let file: TopologyFile = read_json(path)?;
    Ok((topology_from_file(&file)?, file.roots))
}

pub fn load_lcd(path: &Path, curve: &CurveParams) -> Result<Lcd> {
    lcd_from_file(&read_json(path)?, curve)
}

pub fn save_lcd(path: &Path, lcd: &Lcd) -> Result<()> {
    write_json(path, &lcd_to_file(lcd))
}

pub fn load_ca_state(path: &Path) -> Result<CaState> {
    ca_state_from_file(&read_json(path)?)
}

pub fn save_ca_state(path: &Path, state: &CaState) -> Result<()> {
    write_json(path, &ca_state_to_file(state))
}
