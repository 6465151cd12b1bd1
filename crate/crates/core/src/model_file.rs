//! The plain-text model format.
//!
//! ```text
//! # comments run to the end of a line
//! holant                 # header: holant | vertexspin | tensor | cube
//! 3 2                    # vertex and edge count (graph headers only)
//! 0 1                    # one line per edge, 0-indexed
//! 1 2
//! family = edge_cover    # holant: a named family with its parameters ...
//! lambda = 1.0
//! rho = 0.5
//! field.0 = 2.0          # optional override of the field of site 0, spin 1
//! ```
//!
//! Keys per header:
//!
//! - `holant`: `family` with `lambda`, `rho`, `beta`, `gamma` as the family
//!   requires, or `local.<v> = f(0) … f(deg v)` for every vertex with `lambda`.
//! - `vertexspin`: `q`, then `matrix = …` (all edges) or `matrix.<e> = …`,
//!   row-major `q×q`.
//! - `tensor`: `q`, then `tensor = at_most_one` (binary) or `tensor.<v> = …`
//!   with `q^deg(v)` entries, first incident edge most significant.
//! - `cube`: `n`, then `coef.<i>,<j>,… = c` and `coef.const = c`.
//!
//! Every header accepts `field = x` (uniform), `field.<site> = x` and
//! `field.<site>.<spin> = x`. Lists are separated by spaces or commas.
//! Unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::extended::at_most_one_tensor;
use crate::graph::Graph;
use crate::model::{Family, FourierPotential, Interaction, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Header {
    Holant,
    VertexSpin,
    Tensor,
    Cube,
}

struct Line<'a> {
    number: usize,
    text: &'a str,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, what: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| err(line, format!("{what}: cannot parse `{}`", s.trim())))
}

fn parse_list(line: usize, key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_num(line, key, t))
        .collect()
}

/// Parse a model file.
pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let mut lines = text.lines().enumerate().filter_map(|(i, l)| {
        let t = l.split('#').next().unwrap_or("").trim();
        (!t.is_empty()).then_some(Line { number: i + 1, text: t })
    });
    let first = lines.next().ok_or_else(|| err(1, "empty model file"))?;
    let header = match first.text {
        "holant" => Header::Holant,
        "vertexspin" => Header::VertexSpin,
        "tensor" => Header::Tensor,
        "cube" => Header::Cube,
        other => {
            return Err(err(
                first.number,
                format!("unknown header `{other}` (expected holant, vertexspin, tensor or cube)"),
            ))
        }
    };
    let graph = if header == Header::Cube {
        None
    } else {
        let head = lines.next().ok_or_else(|| err(first.number, "missing `n m` line"))?;
        let parts: Vec<&str> = head.text.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(err(head.number, "expected `n m`"));
        }
        let n: usize = parse_num(head.number, "vertex count", parts[0])?;
        let m: usize = parse_num(head.number, "edge count", parts[1])?;
        let mut edges = Vec::with_capacity(m);
        for i in 0..m {
            let l = lines
                .next()
                .ok_or_else(|| err(head.number, format!("expected {m} edge lines, found {i}")))?;
            let p: Vec<&str> = l.text.split_whitespace().collect();
            if p.len() != 2 || p[0].contains('=') {
                return Err(err(l.number, format!("expected edge `u v`, got `{}`", l.text)));
            }
            edges.push((parse_num(l.number, "vertex", p[0])?, parse_num(l.number, "vertex", p[1])?));
        }
        Some(Graph::new(n, edges).map_err(|e| err(head.number, e.to_string()))?)
    };
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for l in lines {
        let (k, v) = l
            .text
            .split_once('=')
            .ok_or_else(|| err(l.number, format!("expected `key = value`, got `{}`", l.text)))?;
        let k = k.trim().to_string();
        if let Some((prev, _)) = entries.get(&k) {
            return Err(err(l.number, format!("key `{k}` repeated (first on line {prev})")));
        }
        entries.insert(k, (l.number, v.trim().to_string()));
    }
    let last_line = text.lines().count().max(1);
    let mut doc = Doc {
        entries,
        last_line,
    };
    let fields = doc.take_fields()?;
    let (model, spin_count) = match header {
        Header::Holant => holant(&mut doc, graph.expect("graph header"))?,
        Header::VertexSpin => vertex_spin(&mut doc, graph.expect("graph header"))?,
        Header::Tensor => tensor(&mut doc, graph.expect("graph header"))?,
        Header::Cube => cube(&mut doc)?,
    };
    if let Some((k, (line, _))) = doc.entries.iter().next() {
        return Err(err(*line, format!("unknown key `{k}` for this header")));
    }
    apply_fields(model, spin_count, fields)
}

struct Doc {
    entries: BTreeMap<String, (usize, String)>,
    last_line: usize,
}

struct FieldSpec {
    uniform: Option<(usize, f64)>,
    overrides: Vec<(usize, usize, usize, f64)>,
}

impl Doc {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn take_prefixed(&mut self, prefix: &str) -> Vec<(String, usize, String)> {
        let keys: Vec<String> = self.entries.keys().filter(|k| k.starts_with(prefix)).cloned().collect();
        keys.into_iter()
            .map(|k| {
                let (line, v) = self.entries.remove(&k).expect("listed key");
                (k[prefix.len()..].to_string(), line, v)
            })
            .collect()
    }

    fn require(&mut self, key: &str) -> Result<(usize, String)> {
        self.take(key)
            .ok_or_else(|| err(self.last_line, format!("missing key `{key}`")))
    }

    fn take_fields(&mut self) -> Result<FieldSpec> {
        let uniform = match self.take("field") {
            Some((l, v)) => Some((l, parse_num(l, "field", &v)?)),
            None => None,
        };
        let mut overrides = Vec::new();
        for (rest, line, v) in self.take_prefixed("field.") {
            let mut parts = rest.split('.');
            let site = parse_num(line, "field site", parts.next().unwrap_or(""))?;
            let spin = match parts.next() {
                Some(s) => parse_num(line, "field spin", s)?,
                None => 1,
            };
            if parts.next().is_some() {
                return Err(err(line, "expected `field.<site>` or `field.<site>.<spin>`"));
            }
            overrides.push((line, site, spin, parse_num(line, "field", &v)?));
        }
        Ok(FieldSpec { uniform, overrides })
    }
}

fn holant(doc: &mut Doc, graph: Graph) -> Result<(ModelSpec, usize)> {
    let locals = doc.take_prefixed("local.");
    if let Some((line, name)) = doc.take("family") {
        if let Some((_, l, _)) = locals.first() {
            return Err(err(*l, "`local.*` cannot be combined with `family`"));
        }
        let mut params = BTreeMap::new();
        for key in ["lambda", "rho", "beta", "gamma"] {
            if let Some((l, v)) = doc.take(key) {
                params.insert(key.to_string(), parse_num::<f64>(l, key, &v)?);
            }
        }
        let family = Family::from_params(&name, &params).map_err(|e| err(line, e.to_string()))?;
        let model = family.build(graph).map_err(|e| err(line, e.to_string()))?;
        return Ok((model, 2));
    }
    let lambda = match doc.take("lambda") {
        Some((l, v)) => parse_num(l, "lambda", &v)?,
        None => 1.0,
    };
    let n = graph.vertex_count();
    let mut local: Vec<Option<Vec<f64>>> = vec![None; n];
    for (rest, line, v) in locals {
        let vtx: usize = parse_num(line, "local vertex", &rest)?;
        if vtx >= n {
            return Err(err(line, format!("vertex {vtx} out of range 0..{n}")));
        }
        local[vtx] = Some(parse_list(line, "local", &v)?);
    }
    let local = local
        .into_iter()
        .enumerate()
        .map(|(v, f)| f.ok_or_else(|| err(doc.last_line, format!("missing `family` or `local.{v}`"))))
        .collect::<Result<Vec<_>>>()?;
    let m = graph.edge_count();
    let model = ModelSpec::new(Interaction::BinarySymmetricHolant { graph, local }, vec![vec![lambda]; m])
        .map_err(|e| err(doc.last_line, e.to_string()))?;
    Ok((model, 2))
}

fn take_q(doc: &mut Doc) -> Result<usize> {
    let (l, v) = doc.require("q")?;
    let q: usize = parse_num(l, "q", &v)?;
    if q < 2 {
        return Err(err(l, "q must be at least 2"));
    }
    Ok(q)
}

/// Per-item lists from either a shared key or indexed keys.
fn per_item(
    doc: &mut Doc,
    key: &str,
    count: usize,
    shared: impl Fn(usize, &str, usize) -> Result<Vec<f64>>,
) -> Result<Vec<Vec<f64>>> {
    let indexed = doc.take_prefixed(&format!("{key}."));
    if let Some((line, v)) = doc.take(key) {
        if let Some((_, l, _)) = indexed.first() {
            return Err(err(*l, format!("`{key}.*` cannot be combined with `{key}`")));
        }
        return (0..count).map(|i| shared(line, &v, i)).collect();
    }
    let mut out: Vec<Option<Vec<f64>>> = vec![None; count];
    for (rest, line, v) in indexed {
        let i: usize = parse_num(line, key, &rest)?;
        if i >= count {
            return Err(err(line, format!("{key} index {i} out of range 0..{count}")));
        }
        out[i] = Some(parse_list(line, key, &v)?);
    }
    out.into_iter()
        .enumerate()
        .map(|(i, x)| x.ok_or_else(|| err(doc.last_line, format!("missing `{key}` or `{key}.{i}`"))))
        .collect()
}

fn vertex_spin(doc: &mut Doc, graph: Graph) -> Result<(ModelSpec, usize)> {
    let q = take_q(doc)?;
    let matrices = per_item(doc, "matrix", graph.edge_count(), |l, v, _| parse_list(l, "matrix", v))?;
    let model = ModelSpec::with_unit_fields(Interaction::VertexSpin { graph, q, matrices })
        .map_err(|e| err(doc.last_line, e.to_string()))?;
    Ok((model, q))
}

fn tensor(doc: &mut Doc, graph: Graph) -> Result<(ModelSpec, usize)> {
    let q = take_q(doc)?;
    let g = graph.clone();
    let tensors = per_item(doc, "tensor", graph.vertex_count(), |l, v, i| {
        if v == "at_most_one" {
            if q != 2 {
                return Err(err(l, "`at_most_one` needs q = 2"));
            }
            Ok(at_most_one_tensor(g.degree(i)))
        } else {
            parse_list(l, "tensor", v)
        }
    })?;
    let model = ModelSpec::with_unit_fields(Interaction::TensorNetwork { graph, q, tensors })
        .map_err(|e| err(doc.last_line, e.to_string()))?;
    Ok((model, q))
}

fn cube(doc: &mut Doc) -> Result<(ModelSpec, usize)> {
    let (l, v) = doc.require("n")?;
    let n: usize = parse_num(l, "n", &v)?;
    let mut coefficients = BTreeMap::new();
    for (rest, line, v) in doc.take_prefixed("coef.") {
        let subset: Vec<usize> = if rest == "const" {
            Vec::new()
        } else {
            rest.split(',').map(|t| parse_num(line, "coef subset", t)).collect::<Result<_>>()?
        };
        coefficients.insert(subset, parse_num::<f64>(line, "coef", &v)?);
    }
    let potential = FourierPotential::new(n, coefficients).map_err(|e| err(l, e.to_string()))?;
    let model = ModelSpec::with_unit_fields(Interaction::CubeFourier { potential })
        .map_err(|e| err(l, e.to_string()))?;
    Ok((model, 2))
}

fn apply_fields(model: ModelSpec, q: usize, spec: FieldSpec) -> Result<ModelSpec> {
    if spec.uniform.is_none() && spec.overrides.is_empty() {
        return Ok(model);
    }
    let mut fields = model.fields().to_vec();
    if let Some((line, x)) = spec.uniform {
        if model.family().is_some() {
            return Err(err(line, "use `lambda` for named families"));
        }
        fields.iter_mut().flatten().for_each(|f| *f = x);
    }
    for (line, site, spin, x) in spec.overrides {
        if site >= fields.len() || spin == 0 || spin >= q {
            return Err(err(line, format!("no field for site {site}, spin {spin}")));
        }
        fields[site][spin - 1] = x;
    }
    let line = spec.uniform.map(|u| u.0).unwrap_or(0);
    model.with_fields(fields).map_err(|e| err(line, e.to_string()))
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

/// Write a model in the text format; [`parse_model`] reads it back.
pub fn write_model(model: &ModelSpec) -> String {
    let mut out = String::new();
    let graph_lines = |out: &mut String, g: &Graph| {
        let _ = writeln!(out, "{} {}", g.vertex_count(), g.edge_count());
        for &(u, v) in g.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
    };
    let mut default_field = 1.0;
    match model.interaction() {
        Interaction::BinarySymmetricHolant { graph, local } => {
            out.push_str("holant\n");
            graph_lines(&mut out, graph);
            if let Some(f) = model.family() {
                let _ = writeln!(out, "family = {}", f.name());
                let params: Vec<(&str, f64)> = match *f {
                    Family::Matchings { lambda } => vec![("lambda", lambda)],
                    Family::EdgeCover { lambda, rho } | Family::EvenSubgraph { lambda, rho } => {
                        vec![("lambda", lambda), ("rho", rho)]
                    }
                    Family::TwoSpinEdge { beta, gamma, lambda } => {
                        vec![("beta", beta), ("gamma", gamma), ("lambda", lambda)]
                    }
                    Family::IsingLine { beta, lambda } => vec![("beta", beta), ("lambda", lambda)],
                };
                for (k, v) in params {
                    let _ = writeln!(out, "{k} = {v}");
                }
                default_field = f.lambda();
            } else {
                for (v, f) in local.iter().enumerate() {
                    let _ = writeln!(out, "local.{v} = {}", join(f));
                }
            }
        }
        Interaction::VertexSpin { graph, q, matrices } => {
            out.push_str("vertexspin\n");
            graph_lines(&mut out, graph);
            let _ = writeln!(out, "q = {q}");
            for (e, m) in matrices.iter().enumerate() {
                let _ = writeln!(out, "matrix.{e} = {}", join(m));
            }
        }
        Interaction::TensorNetwork { graph, q, tensors } => {
            out.push_str("tensor\n");
            graph_lines(&mut out, graph);
            let _ = writeln!(out, "q = {q}");
            for (v, t) in tensors.iter().enumerate() {
                let _ = writeln!(out, "tensor.{v} = {}", join(t));
            }
        }
        Interaction::CubeFourier { potential } => {
            out.push_str("cube\n");
            let _ = writeln!(out, "n = {}", potential.n);
            for (s, c) in &potential.coefficients {
                let key = if s.is_empty() {
                    "const".to_string()
                } else {
                    s.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
                };
                let _ = writeln!(out, "coef.{key} = {c}");
            }
        }
    }
    for (s, row) in model.fields().iter().enumerate() {
        for (k, &x) in row.iter().enumerate() {
            if x != default_field {
                let _ = writeln!(out, "field.{s}.{} = {x}", k + 1);
            }
        }
    }
    out
}
