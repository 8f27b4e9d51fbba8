//! Network description documents.
//!
//! A description is a JSON document with an explicit `schema_version`. Every
//! number is a bare JSON number in SI units; unknown fields are rejected and
//! every error names the offending path, e.g. `pipes[2].length`.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "topology": "joint",
//!   "pipes": [
//!     { "role": "downstream", "index": 0, "diameter": 0.5, "length": 5000.0,
//!       "friction": 0.01, "gas_constant": 518.3, "temperature": 288.15,
//!       "compressibility": 0.9, "nominal_flow": 40.0,
//!       "nominal_inlet_pressure": 4.9e6 },
//!     { "role": "joining", "index": 1, ... },
//!     { "role": "joining", "index": 2, ... }
//!   ],
//!   "analysis": { "omega_min": 1e-5, "omega_max": 10.0, "points_per_decade": 60 }
//! }
//! ```
//!
//! Series descriptions may instead give one top-level
//! `"operating_point": { "flow": ..., "inlet_pressure": ... }` and omit the
//! per-pipe nominal values; the inlet pressure is then carried down the chain
//! by each pipe's steady momentum balance.

use std::fmt;
use std::path::Path;

use gasnet_core::pipe::{propagate_series_operating_points, STANDARD_GRAVITY};
use gasnet_core::{
    compute_coefficients, Error as CoreError, JointSpec, LinearCoefficients, Network,
    OperatingPoint, PipeParameters, SeriesSpec, StarSpec,
};
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Series,
    Joint,
    Star,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Series => "series",
            Topology::Joint => "joint",
            Topology::Star => "star",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Series,
    Downstream,
    Joining,
    Branching,
}

impl Role {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "series" => Role::Series,
            "downstream" => Role::Downstream,
            "joining" => Role::Joining,
            "branching" => Role::Branching,
            _ => return None,
        })
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Series => "series",
            Role::Downstream => "downstream",
            Role::Joining => "joining",
            Role::Branching => "branching",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipeEntry {
    /// Position in the document's `pipes` array.
    pub position: usize,
    pub role: Role,
    pub index: usize,
    pub params: PipeParameters,
    pub operating_point: OperatingPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisDefaults {
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub points_per_decade: Option<usize>,
    pub horizon: Option<f64>,
}

/// A validated description with pipes sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDescription {
    pub topology: Topology,
    pub pipes: Vec<PipeEntry>,
    pub analysis: AnalysisDefaults,
}

/// Validation failure at a path inside the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescriptionError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for DescriptionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for DescriptionError {}

fn err(path: impl Into<String>, message: impl Into<String>) -> DescriptionError {
    DescriptionError {
        path: path.into(),
        message: message.into(),
    }
}

type Parsed<T> = std::result::Result<T, DescriptionError>;

const TOP_FIELDS: &[&str] = &[
    "schema_version",
    "topology",
    "pipes",
    "operating_point",
    "analysis",
];
const PIPE_FIELDS: &[&str] = &[
    "role",
    "index",
    "diameter",
    "area",
    "length",
    "elevation_change",
    "friction",
    "gas_constant",
    "temperature",
    "compressibility",
    "gravity",
    "nominal_flow",
    "nominal_inlet_pressure",
];
const OPERATING_POINT_FIELDS: &[&str] = &["flow", "inlet_pressure"];
const ANALYSIS_FIELDS: &[&str] = &["omega_min", "omega_max", "points_per_decade", "horizon"];

fn join(base: &str, key: &str) -> String {
    if base.is_empty() {
        key.to_string()
    } else {
        format!("{base}.{key}")
    }
}

struct Object<'a> {
    path: String,
    map: &'a Map<String, Value>,
}

impl<'a> Object<'a> {
    fn new(path: String, value: &'a Value, allowed: &[&str]) -> Parsed<Self> {
        let map = value.as_object().ok_or_else(|| {
            err(
                path.clone(),
                format!("expected an object, found {}", kind(value)),
            )
        })?;
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(err(join(&path, key), "unknown field"));
            }
        }
        Ok(Self { path, map })
    }

    fn path(&self, key: &str) -> String {
        join(&self.path, key)
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key)
    }

    fn required(&self, key: &str) -> Parsed<&'a Value> {
        self.get(key)
            .ok_or_else(|| err(self.path(key), "missing required field"))
    }

    fn number(&self, key: &str) -> Parsed<Option<f64>> {
        self.get(key)
            .map(|v| number(&self.path(key), v))
            .transpose()
    }

    fn required_number(&self, key: &str) -> Parsed<f64> {
        number(&self.path(key), self.required(key)?)
    }

    fn count(&self, key: &str) -> Parsed<Option<usize>> {
        self.get(key).map(|v| count(&self.path(key), v)).transpose()
    }

    fn string(&self, key: &str) -> Parsed<&'a str> {
        let v = self.required(key)?;
        v.as_str().ok_or_else(|| {
            err(
                self.path(key),
                format!("expected a string, found {}", kind(v)),
            )
        })
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn number(path: &str, v: &Value) -> Parsed<f64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| err(path, "number is not representable as a finite float")),
        Value::String(s) => Err(err(
            path,
            format!("expected a bare number in SI units, found the string {s:?} (unit suffixes are not accepted)"),
        )),
        other => Err(err(path, format!("expected a number, found {}", kind(other)))),
    }
}

fn count(path: &str, v: &Value) -> Parsed<usize> {
    v.as_u64()
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| err(path, format!("expected a non-negative integer, found {v}")))
}

struct RawPipe {
    position: usize,
    role: Role,
    index: usize,
    params: PipeParameters,
    operating_point: Option<OperatingPoint>,
}

fn parse_pipe(position: usize, value: &Value) -> Parsed<RawPipe> {
    let obj = Object::new(format!("pipes[{position}]"), value, PIPE_FIELDS)?;
    let role_str = obj.string("role")?;
    let role = Role::parse(role_str).ok_or_else(|| {
        err(
            obj.path("role"),
            format!("unknown role {role_str:?}; expected series, downstream, joining or branching"),
        )
    })?;
    let index = count(&obj.path("index"), obj.required("index")?)?;
    let diameter = obj.required_number("diameter")?;
    let area = obj
        .number("area")?
        .unwrap_or(std::f64::consts::PI * diameter * diameter / 4.0);
    let params = PipeParameters {
        area,
        diameter,
        length: obj.required_number("length")?,
        elevation_change: obj.number("elevation_change")?.unwrap_or(0.0),
        friction: obj.required_number("friction")?,
        gas_constant: obj.required_number("gas_constant")?,
        temperature: obj.required_number("temperature")?,
        compressibility: obj.required_number("compressibility")?,
        gravity: obj.number("gravity")?.unwrap_or(STANDARD_GRAVITY),
    };
    params.validate().map_err(|e| at_pipe(position, e))?;
    let operating_point = match (
        obj.number("nominal_flow")?,
        obj.number("nominal_inlet_pressure")?,
    ) {
        (Some(flow), Some(inlet_pressure)) => {
            let op = OperatingPoint {
                flow,
                inlet_pressure,
            };
            op.validate().map_err(|e| at_pipe(position, e))?;
            Some(op)
        }
        (None, None) => None,
        (Some(_), None) => {
            return Err(err(
                obj.path("nominal_inlet_pressure"),
                "missing required field",
            ))
        }
        (None, Some(_)) => return Err(err(obj.path("nominal_flow"), "missing required field")),
    };
    Ok(RawPipe {
        position,
        role,
        index,
        params,
        operating_point,
    })
}

fn at_pipe(position: usize, e: CoreError) -> DescriptionError {
    match e {
        CoreError::InvalidParameter {
            field,
            value,
            reason,
        } => err(
            format!("pipes[{position}].{field}"),
            format!("{reason} (got {value})"),
        ),
        other => err(format!("pipes[{position}]"), other.to_string()),
    }
}

/// Indices expected for each role, given the role counts.
fn check_roles(topology: Topology, pipes: &[RawPipe]) -> Parsed<()> {
    let count = |r: Role| pipes.iter().filter(|p| p.role == r).count();
    let (series, downstream, joining, branching) = (
        count(Role::Series),
        count(Role::Downstream),
        count(Role::Joining),
        count(Role::Branching),
    );
    let allowed: &[Role] = match topology {
        Topology::Series => &[Role::Series],
        Topology::Joint => &[Role::Downstream, Role::Joining],
        Topology::Star => &[Role::Joining, Role::Branching],
    };
    for p in pipes {
        if !allowed.contains(&p.role) {
            return Err(err(
                format!("pipes[{}].role", p.position),
                format!("role {} is not allowed in a {topology} network", p.role),
            ));
        }
    }
    let expected = |p: &RawPipe| -> (usize, usize) {
        match (topology, p.role) {
            (Topology::Series, _) => (0, series),
            (Topology::Joint, Role::Downstream) => (0, 1),
            (Topology::Joint, _) => (1, joining + 1),
            (Topology::Star, Role::Joining) => (1, joining + 1),
            (Topology::Star, _) => (joining + 1, joining + branching + 1),
        }
    };
    match topology {
        Topology::Joint if downstream != 1 => {
            return Err(err(
                "pipes",
                format!("a joint needs exactly one downstream pipe, found {downstream}"),
            ))
        }
        Topology::Joint | Topology::Star if joining == 0 => {
            return Err(err(
                "pipes",
                format!("a {topology} needs at least one joining pipe"),
            ))
        }
        Topology::Star if branching == 0 => {
            return Err(err("pipes", "a star needs at least one branching pipe"))
        }
        _ => {}
    }
    let mut seen = vec![false; pipes.len() + 2];
    for p in pipes {
        let (lo, hi) = expected(p);
        if p.index < lo || p.index >= hi {
            return Err(err(
                format!("pipes[{}].index", p.position),
                format!(
                    "{} pipe index {} outside the expected range {lo}..={}",
                    p.role,
                    p.index,
                    hi - 1
                ),
            ));
        }
        if std::mem::replace(&mut seen[p.index], true) {
            return Err(err(
                format!("pipes[{}].index", p.position),
                format!("duplicate pipe index {}", p.index),
            ));
        }
    }
    Ok(())
}

pub fn parse_network_str(text: &str) -> Parsed<NetworkDescription> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| err("", format!("malformed JSON: {e}")))?;
    let top = Object::new(String::new(), &doc, TOP_FIELDS)?;

    let version = top.required("schema_version")?;
    if version.as_u64() != Some(SCHEMA_VERSION) {
        return Err(err(
            "schema_version",
            format!("unsupported schema version {version}; expected {SCHEMA_VERSION}"),
        ));
    }
    let topology = match top.string("topology")? {
        "series" => Topology::Series,
        "joint" => Topology::Joint,
        "star" => Topology::Star,
        other => {
            return Err(err(
                "topology",
                format!("unknown topology {other:?}; expected series, joint or star"),
            ))
        }
    };
    let pipes_value = top.required("pipes")?;
    let list = pipes_value.as_array().ok_or_else(|| {
        err(
            "pipes",
            format!("expected an array, found {}", kind(pipes_value)),
        )
    })?;
    if list.is_empty() {
        return Err(err("pipes", "at least one pipe is required"));
    }
    let mut raw = list
        .iter()
        .enumerate()
        .map(|(k, v)| parse_pipe(k, v))
        .collect::<Parsed<Vec<_>>>()?;
    check_roles(topology, &raw)?;
    raw.sort_by_key(|p| p.index);

    let shared = top
        .get("operating_point")
        .map(|v| -> Parsed<(f64, f64)> {
            let obj = Object::new("operating_point".into(), v, OPERATING_POINT_FIELDS)?;
            Ok((
                obj.required_number("flow")?,
                obj.required_number("inlet_pressure")?,
            ))
        })
        .transpose()?;
    let points: Vec<OperatingPoint> = match shared {
        Some((flow, inlet_pressure)) => {
            if topology != Topology::Series {
                return Err(err(
                    "operating_point",
                    "a shared operating point is only available for series networks",
                ));
            }
            if let Some(p) = raw.iter().find(|p| p.operating_point.is_some()) {
                return Err(err(
                    format!("pipes[{}]", p.position),
                    "per-pipe nominal values conflict with the shared operating_point",
                ));
            }
            let params: Vec<PipeParameters> = raw.iter().map(|p| p.params).collect();
            propagate_series_operating_points(&params, inlet_pressure, flow).map_err(
                |e| match e {
                    CoreError::InvalidParameter { value, reason, .. }
                        if value == inlet_pressure =>
                    {
                        err(
                            "operating_point.inlet_pressure",
                            format!("{reason} (got {value})"),
                        )
                    }
                    CoreError::InvalidParameter {
                        field,
                        value,
                        reason,
                    } => err(
                        "operating_point",
                        format!("{field}: {reason} (got {value})"),
                    ),
                    other => err("operating_point", other.to_string()),
                },
            )?
        }
        None => raw
            .iter()
            .map(|p| {
                p.operating_point.ok_or_else(|| {
                    err(
                        format!("pipes[{}].nominal_flow", p.position),
                        "missing required field",
                    )
                })
            })
            .collect::<Parsed<_>>()?,
    };

    let analysis = match top.get("analysis") {
        None => AnalysisDefaults {
            omega_min: None,
            omega_max: None,
            points_per_decade: None,
            horizon: None,
        },
        Some(v) => {
            let obj = Object::new("analysis".into(), v, ANALYSIS_FIELDS)?;
            let positive = |key: &str| -> Parsed<Option<f64>> {
                match obj.number(key)? {
                    Some(x) if x <= 0.0 => {
                        Err(err(obj.path(key), format!("must be positive (got {x})")))
                    }
                    other => Ok(other),
                }
            };
            let analysis = AnalysisDefaults {
                omega_min: positive("omega_min")?,
                omega_max: positive("omega_max")?,
                points_per_decade: obj.count("points_per_decade")?,
                horizon: positive("horizon")?,
            };
            if analysis.points_per_decade == Some(0) {
                return Err(err("analysis.points_per_decade", "must be positive"));
            }
            analysis
        }
    };

    Ok(NetworkDescription {
        topology,
        pipes: raw
            .into_iter()
            .zip(points)
            .map(|(p, operating_point)| PipeEntry {
                position: p.position,
                role: p.role,
                index: p.index,
                params: p.params,
                operating_point,
            })
            .collect(),
        analysis,
    })
}

pub fn parse_network(path: &Path) -> Parsed<NetworkDescription> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err("", format!("cannot read {}: {e}", path.display())))?;
    parse_network_str(&text)
}

impl NetworkDescription {
    fn coefficients(&self, role: Role) -> Parsed<Vec<LinearCoefficients>> {
        self.pipes
            .iter()
            .filter(|p| p.role == role)
            .map(|p| {
                compute_coefficients(&p.params, &p.operating_point)
                    .map_err(|e| at_pipe(p.position, e))
            })
            .collect()
    }

    /// Linearized network. Pipes are already sorted by index.
    pub fn network(&self) -> Parsed<Network> {
        let built = match self.topology {
            Topology::Series => {
                SeriesSpec::new(self.coefficients(Role::Series)?).map(Network::Series)
            }
            Topology::Joint => {
                let down = self.coefficients(Role::Downstream)?;
                JointSpec::new(down[0], self.coefficients(Role::Joining)?).map(Network::Joint)
            }
            Topology::Star => StarSpec::new(
                self.coefficients(Role::Joining)?,
                self.coefficients(Role::Branching)?,
            )
            .map(Network::Star),
        };
        built.map_err(|e| err("pipes", e.to_string()))
    }

    pub fn pipe(&self, index: usize) -> Option<&PipeEntry> {
        self.pipes.iter().find(|p| p.index == index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pipe(role: &str, index: usize) -> String {
        format!(
            r#"{{"role": "{role}", "index": {index}, "diameter": 0.5, "length": 1000.0, "friction": 0.01,
                "gas_constant": 518.3, "temperature": 288.15,
                "compressibility": 0.9, "nominal_flow": 20.0, "nominal_inlet_pressure": 5e6}}"#
        )
    }

    fn doc(topology: &str, pipes: &[String]) -> String {
        format!(
            r#"{{"schema_version": 1, "topology": "{topology}", "pipes": [{}]}}"#,
            pipes.join(",")
        )
    }

    #[test]
    fn minimal_single_pipe_is_a_one_pipe_series() {
        let d = parse_network_str(&doc("series", &[pipe("series", 0)])).unwrap();
        assert_eq!(d.topology, Topology::Series);
        match d.network().unwrap() {
            Network::Series(s) => assert_eq!(s.len(), 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn joint_with_pipes_zero_to_three() {
        let pipes: Vec<String> = [
            ("joining", 2),
            ("downstream", 0),
            ("joining", 3),
            ("joining", 1),
        ]
        .iter()
        .map(|(r, i)| pipe(r, *i))
        .collect();
        let d = parse_network_str(&doc("joint", &pipes)).unwrap();
        assert_eq!(
            d.pipes.iter().map(|p| p.index).collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );
        match d.network().unwrap() {
            Network::Joint(s) => assert_eq!(s.joining_count(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_length_names_the_field() {
        let bad = pipe("series", 1).replace("\"length\": 1000.0", "\"length\": -5.0");
        let e = parse_network_str(&doc("series", &[pipe("series", 0), bad])).unwrap_err();
        assert_eq!(e.path, "pipes[1].length");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = pipe("series", 0).replace("\"index\"", "\"colour\": 1, \"index\"");
        let e = parse_network_str(&doc("series", &[bad])).unwrap_err();
        assert_eq!(e.path, "pipes[0].colour");
        let e = parse_network_str(
            r#"{"schema_version": 1, "topology": "series", "pipes": [], "extra": 0}"#,
        )
        .unwrap_err();
        assert_eq!(e.path, "extra");
    }

    #[test]
    fn unit_suffixes_are_rejected() {
        let bad = pipe("series", 0).replace("\"length\": 1000.0", "\"length\": \"1 km\"");
        let e = parse_network_str(&doc("series", &[bad])).unwrap_err();
        assert_eq!(e.path, "pipes[0].length");
        assert!(e.message.contains("unit"));
    }

    #[test]
    fn roles_must_fit_the_topology_and_indices_be_contiguous() {
        let e = parse_network_str(&doc("series", &[pipe("joining", 0)])).unwrap_err();
        assert_eq!(e.path, "pipes[0].role");
        let e =
            parse_network_str(&doc("series", &[pipe("series", 0), pipe("series", 2)])).unwrap_err();
        assert_eq!(e.path, "pipes[1].index");
        let e = parse_network_str(&doc("star", &[pipe("joining", 1), pipe("branching", 3)]))
            .unwrap_err();
        assert_eq!(e.path, "pipes[1].index");
        let e = parse_network_str(&doc("joint", &[pipe("joining", 1)])).unwrap_err();
        assert_eq!(e.path, "pipes");
    }

    #[test]
    fn schema_version_is_required() {
        let text = doc("series", &[pipe("series", 0)])
            .replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert_eq!(parse_network_str(&text).unwrap_err().path, "schema_version");
    }

    #[test]
    fn shared_operating_point_propagates_down_a_series() {
        let strip = |s: String| {
            s.replace(
                ", \"nominal_flow\": 20.0, \"nominal_inlet_pressure\": 5e6",
                "",
            )
        };
        let pipes = [strip(pipe("series", 0)), strip(pipe("series", 1))];
        let text = format!(
            r#"{{"schema_version": 1, "topology": "series", "pipes": [{}],
                "operating_point": {{"flow": 20.0, "inlet_pressure": 5e6}}}}"#,
            pipes.join(",")
        );
        let d = parse_network_str(&text).unwrap();
        assert_eq!(d.pipes[0].operating_point.inlet_pressure, 5e6);
        assert!(d.pipes[1].operating_point.inlet_pressure < 5e6);
        assert_eq!(d.pipes[1].operating_point.flow, 20.0);
    }

    #[test]
    fn missing_nominal_values_without_shared_point() {
        let bad = pipe("series", 0).replace(
            ", \"nominal_flow\": 20.0, \"nominal_inlet_pressure\": 5e6",
            "",
        );
        let e = parse_network_str(&doc("series", &[bad])).unwrap_err();
        assert_eq!(e.path, "pipes[0].nominal_flow");
    }
}
