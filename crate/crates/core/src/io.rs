//! JSON and Newick file formats.
//!
//! Rationals travel as `"p/q"` strings. Tables are sparse maps from a state
//! written `"x1,x2,..."` to a value; absent states are zero.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::lattice::LatticeFamily;
use crate::models::{Emission, HmmParams, SecantParams};
use crate::moments::{CoordinateSystem, CoordinateVector, DiscreteDistribution, Mode, StateSpace};
use crate::scalar::{format_rational, parse_rational, Rational};
use crate::trees::{EdgeTable, GmmParams, TreeTopology};

/// Parses JSON text, mapping syntax errors to [`Error::Parse`] with position.
pub fn parse_json(what: &str, text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::parse(what, e.line(), e.column(), e.to_string()))
}

fn field<'a>(v: &'a Value, key: &str, what: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| Error::InvalidArgument(format!("{what}: missing field {key:?}")))
}

pub fn rational_from_json(v: &Value) -> Result<Rational> {
    match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) => parse_rational(&n.to_string()),
        other => Err(Error::InvalidArgument(format!("expected a rational, got {other}"))),
    }
}

pub fn rational_to_json(r: &Rational) -> Value {
    Value::String(format_rational(r))
}

fn rationals_from_json(v: &Value) -> Result<Vec<Rational>> {
    v.as_array()
        .ok_or_else(|| Error::InvalidArgument(format!("expected an array, got {v}")))?
        .iter()
        .map(rational_from_json)
        .collect()
}

fn usizes_from_json(v: &Value, what: &str) -> Result<Vec<usize>> {
    v.as_array()
        .ok_or_else(|| Error::InvalidArgument(format!("{what}: expected an array")))?
        .iter()
        .map(|x| {
            x.as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("{what}: expected a nonnegative integer, got {x}")))
        })
        .collect()
}

fn state_key(x: &[usize]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_state(key: &str, space: &StateSpace) -> Result<Vec<usize>> {
    let x: Vec<usize> = key
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidArgument(format!("bad state key {key:?}")))?;
    if x.len() != space.n_vars() || x.iter().zip(space.arities()).any(|(v, r)| v >= r) {
        return Err(Error::InvalidArgument(format!("state {key:?} is outside the space")));
    }
    Ok(x)
}

fn space_to_json(space: &StateSpace, out: &mut Map<String, Value>) {
    out.insert("arities".into(), json!(space.arities()));
    if !space.has_default_values() {
        let values: Vec<Vec<Value>> = space
            .values()
            .iter()
            .map(|v| v.iter().map(rational_to_json).collect())
            .collect();
        out.insert("values".into(), json!(values));
    }
}

fn space_from_json(v: &Value) -> Result<StateSpace> {
    let arities = usizes_from_json(field(v, "arities", "state space")?, "arities")?;
    match v.get("values") {
        None | Some(Value::Null) => StateSpace::new(&arities),
        Some(vals) => {
            let rows = vals
                .as_array()
                .ok_or_else(|| Error::InvalidArgument("values must be an array of arrays".into()))?
                .iter()
                .map(rationals_from_json)
                .collect::<Result<Vec<_>>>()?;
            StateSpace::with_values(&arities, rows)
        }
    }
}

fn table_to_json(space: &StateSpace, values: &[Rational]) -> Value {
    let mut table = Map::new();
    for (x, v) in space.states().zip(values) {
        if !num_traits::Zero::is_zero(v) {
            table.insert(state_key(&x), rational_to_json(v));
        }
    }
    Value::Object(table)
}

fn table_from_json(v: &Value, space: &StateSpace) -> Result<Vec<Rational>> {
    let obj = field(v, "table", "table")?
        .as_object()
        .ok_or_else(|| Error::InvalidArgument("table must be an object".into()))?;
    let mut values = vec![Rational::from_integer(0.into()); space.size()];
    for (k, val) in obj {
        let x = parse_state(k, space)?;
        values[space.index_of(&x)] = rational_from_json(val)?;
    }
    Ok(values)
}

pub fn distribution_to_json(d: &DiscreteDistribution) -> Value {
    let mut out = Map::new();
    space_to_json(d.space(), &mut out);
    out.insert("table".into(), table_to_json(d.space(), d.table()));
    Value::Object(out)
}

/// Reads a distribution; negative entries switch to algebraic mode.
pub fn distribution_from_json(v: &Value) -> Result<DiscreteDistribution> {
    let space = space_from_json(v)?;
    let table = table_from_json(v, &space)?;
    let mode = if table.iter().any(num_traits::Signed::is_negative) {
        Mode::Algebraic
    } else {
        Mode::Probabilistic
    };
    DiscreteDistribution::new(space, table, mode)
}

fn system_to_json(system: &CoordinateSystem, out: &mut Map<String, Value>) {
    out.insert("system".into(), json!(system.name()));
    match system.family() {
        Some(LatticeFamily::Tree(t)) => {
            out.insert("tree".into(), json!(t.to_newick()));
        }
        Some(LatticeFamily::Full) | None => {}
        Some(f) => {
            out.insert("family".into(), json!(f.name()));
        }
    }
}

fn system_from_json(v: &Value) -> Result<CoordinateSystem> {
    let name = field(v, "system", "coordinate vector")?
        .as_str()
        .ok_or_else(|| Error::InvalidArgument("system must be a string".into()))?;
    Ok(match name {
        "probabilities" => CoordinateSystem::Probabilities,
        "moments" => CoordinateSystem::Moments,
        "centralmoments" => CoordinateSystem::CentralMoments,
        "cumulants" => CoordinateSystem::Cumulants(LatticeFamily::Full),
        "lcumulants" => {
            let fam = field(v, "family", "lcumulants")?
                .as_str()
                .ok_or_else(|| Error::InvalidArgument("family must be a string".into()))?;
            CoordinateSystem::Cumulants(fam.parse()?)
        }
        "treecumulants" => {
            let nwk = field(v, "tree", "treecumulants")?
                .as_str()
                .ok_or_else(|| Error::InvalidArgument("tree must be a Newick string".into()))?;
            CoordinateSystem::tree(TreeTopology::parse_newick(nwk)?)
        }
        other => return Err(Error::InvalidArgument(format!("unknown system {other:?}"))),
    })
}

pub fn vector_to_json(v: &CoordinateVector<Rational>) -> Value {
    let mut out = Map::new();
    system_to_json(v.system(), &mut out);
    space_to_json(v.space(), &mut out);
    out.insert("table".into(), table_to_json(v.space(), v.values()));
    Value::Object(out)
}

/// Float rendering: table values become JSON numbers.
pub fn vector_to_json_f64(v: &CoordinateVector<f64>) -> Value {
    let mut out = Map::new();
    system_to_json(v.system(), &mut out);
    space_to_json(v.space(), &mut out);
    let mut table = Map::new();
    for (x, val) in v.iter() {
        if *val != 0.0 {
            table.insert(state_key(&x), json!(val));
        }
    }
    out.insert("table".into(), Value::Object(table));
    Value::Object(out)
}

/// Reads a coordinate vector; a file without `system` is a distribution.
pub fn vector_from_json(v: &Value) -> Result<CoordinateVector<Rational>> {
    let system = if v.get("system").is_some() {
        system_from_json(v)?
    } else {
        CoordinateSystem::Probabilities
    };
    let space = space_from_json(v)?;
    let values = table_from_json(v, &space)?;
    CoordinateVector::new(space, system, values)
}

fn edge_table_to_json(t: &EdgeTable) -> Value {
    json!(t
        .iter()
        .map(|row| row.iter().map(rational_to_json).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn edge_table_from_json(v: &Value) -> Result<EdgeTable> {
    let rows = v
        .as_array()
        .filter(|r| r.len() == 2)
        .ok_or_else(|| Error::InvalidArgument("an edge table is a 2x2 array".into()))?;
    let row = |r: &Value| -> Result<[Rational; 2]> {
        let vals = rationals_from_json(r)?;
        <[Rational; 2]>::try_from(vals).map_err(|_| Error::InvalidArgument("an edge table is a 2x2 array".into()))
    };
    Ok([row(&rows[0])?, row(&rows[1])?])
}

/// `{ root_dist, edges: [{u, v, table}] }` with node names from the tree.
pub fn gmm_params_to_json(tree: &TreeTopology, p: &GmmParams) -> Value {
    let edges: Vec<Value> = p
        .edges()
        .iter()
        .map(|(u, v, t)| json!({"u": tree.name(*u), "v": tree.name(*v), "table": edge_table_to_json(t)}))
        .collect();
    json!({
        "root": tree.name(p.root()),
        "root_dist": p.root_dist().iter().map(rational_to_json).collect::<Vec<_>>(),
        "edges": edges,
    })
}

/// Reads model parameters. An optional `root` field re-roots the tree;
/// otherwise the tree's own root is used.
pub fn gmm_params_from_json(tree: &TreeTopology, v: &Value) -> Result<(TreeTopology, GmmParams)> {
    let node = |name: &str| {
        tree.node_by_name(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no node named {name:?} in the tree")))
    };
    let tree = match v.get("root").and_then(Value::as_str) {
        Some(r) => tree.with_root(node(r)?)?,
        None => tree.clone(),
    };
    let root_dist = rationals_from_json(field(v, "root_dist", "model parameters")?)?;
    let root_dist = <[Rational; 2]>::try_from(root_dist)
        .map_err(|_| Error::InvalidArgument("root_dist needs two entries".into()))?;
    let mut edges = Vec::new();
    for e in field(v, "edges", "model parameters")?
        .as_array()
        .ok_or_else(|| Error::InvalidArgument("edges must be an array".into()))?
    {
        let name = |k: &str| -> Result<usize> {
            match field(e, k, "edge")? {
                Value::String(s) => node(s),
                Value::Number(n) => node(&n.to_string()),
                other => Err(Error::InvalidArgument(format!("bad node reference {other}"))),
            }
        };
        edges.push((
            name("u")?,
            name("v")?,
            edge_table_from_json(field(e, "table", "edge")?)?,
        ));
    }
    let p = GmmParams::new(&tree, root_dist, edges)?;
    Ok((tree, p))
}

pub fn secant_to_json(p: &SecantParams) -> Value {
    json!({
        "t": rational_to_json(&p.t),
        "a": p.a.iter().map(rational_to_json).collect::<Vec<_>>(),
        "b": p.b.iter().map(rational_to_json).collect::<Vec<_>>(),
    })
}

pub fn secant_from_json(v: &Value) -> Result<SecantParams> {
    SecantParams::new(
        rational_from_json(field(v, "t", "secant parameters")?)?,
        rationals_from_json(field(v, "a", "secant parameters")?)?,
        rationals_from_json(field(v, "b", "secant parameters")?)?,
    )
}

/// `{ initial, transitions: [2x2], emissions: [{values, table: [row0, row1]}] }`.
pub fn hmm_to_json(p: &HmmParams) -> Value {
    let emissions: Vec<Value> = p
        .emissions()
        .iter()
        .map(|e| {
            json!({
                "values": e.values.iter().map(rational_to_json).collect::<Vec<_>>(),
                "table": e.table.iter().map(|r| r.iter().map(rational_to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "initial": p.initial().iter().map(rational_to_json).collect::<Vec<_>>(),
        "transitions": p.transitions().iter().map(edge_table_to_json).collect::<Vec<_>>(),
        "emissions": emissions,
    })
}

pub fn hmm_from_json(v: &Value) -> Result<HmmParams> {
    let initial = <[Rational; 2]>::try_from(rationals_from_json(field(v, "initial", "hmm")?)?)
        .map_err(|_| Error::InvalidArgument("initial needs two entries".into()))?;
    let transitions = field(v, "transitions", "hmm")?
        .as_array()
        .ok_or_else(|| Error::InvalidArgument("transitions must be an array".into()))?
        .iter()
        .map(edge_table_from_json)
        .collect::<Result<Vec<_>>>()?;
    let emissions = field(v, "emissions", "hmm")?
        .as_array()
        .ok_or_else(|| Error::InvalidArgument("emissions must be an array".into()))?
        .iter()
        .map(|e| {
            let values = rationals_from_json(field(e, "values", "emission")?)?;
            let rows = field(e, "table", "emission")?
                .as_array()
                .filter(|r| r.len() == 2)
                .ok_or_else(|| Error::InvalidArgument("emission table needs two rows".into()))?;
            Ok(Emission {
                values,
                table: [rationals_from_json(&rows[0])?, rationals_from_json(&rows[1])?],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    HmmParams::new(initial, transitions, emissions)
}
