//! Text and JSON formats for graphs and QUBOs.
//!
//! Text form: a header `n m sense` followed by `m` lines `i j w`. For a
//! QUBO, `sense` is `max` or `min`, `i j w` with `i != j` is a pair term and
//! `i i w` a linear term. For a graph the sense token is `graph`, `i j w` is
//! an edge and `i i w` an optional node weight. Lines starting with `#` are
//! ignored. Weights are written in shortest round-trip form, so reading back
//! a written file reproduces every coefficient bit for bit.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{QuboInstance, Sense, WeightedGraph};
use crate::{Error, Result};

/// A graph or a QUBO read from a file.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Graph(WeightedGraph),
    Qubo(QuboInstance),
}

#[derive(Serialize, Deserialize)]
struct QuboJson {
    n: usize,
    sense: Sense,
    linear: Vec<f64>,
    quadratic: Vec<(usize, usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_weights: Option<Vec<f64>>,
}

pub fn qubo_to_text(q: &QuboInstance) -> String {
    let linear: Vec<(usize, f64)> = q
        .linear()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(i, &c)| (i, c))
        .collect();
    let sense = match q.sense() {
        Sense::Maximize => "max",
        Sense::Minimize => "min",
    };
    let mut out = format!("{} {} {}\n", q.n(), linear.len() + q.quadratic().len(), sense);
    for (i, c) in linear {
        writeln!(out, "{i} {i} {c}").unwrap();
    }
    for &(i, j, w) in q.quadratic() {
        writeln!(out, "{i} {j} {w}").unwrap();
    }
    out
}

pub fn graph_to_text(g: &WeightedGraph) -> String {
    let nw = g.node_weights().unwrap_or(&[]);
    let mut out = format!("{} {} graph\n", g.n(), nw.len() + g.num_edges());
    for (i, w) in nw.iter().enumerate() {
        writeln!(out, "{i} {i} {w}").unwrap();
    }
    for &(i, j, w) in g.edges() {
        writeln!(out, "{i} {j} {w}").unwrap();
    }
    out
}

pub fn qubo_to_json(q: &QuboInstance) -> String {
    let doc = QuboJson {
        n: q.n(),
        sense: q.sense(),
        linear: q.linear().to_vec(),
        quadratic: q.quadratic().to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("serialisable")
}

pub fn graph_to_json(g: &WeightedGraph) -> String {
    let doc = GraphJson {
        n: g.n(),
        edges: g.edges().to_vec(),
        node_weights: g.node_weights().map(<[f64]>::to_vec),
    };
    serde_json::to_string_pretty(&doc).expect("serialisable")
}

/// Parses either format, detecting JSON by a leading `{`.
pub fn parse_problem(text: &str) -> Result<Problem> {
    if text.trim_start().starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("sense").is_some() {
            let doc: QuboJson = serde_json::from_value(value)?;
            let linear = doc.linear;
            Ok(Problem::Qubo(QuboInstance::new(doc.n, doc.sense, linear, doc.quadratic)?))
        } else {
            let doc: GraphJson = serde_json::from_value(value)?;
            let g = WeightedGraph::new(doc.n, doc.edges)?;
            Ok(Problem::Graph(match doc.node_weights {
                Some(w) => g.with_node_weights(w)?,
                None => g,
            }))
        }
    } else {
        parse_text(text)
    }
}

fn parse_text(text: &str) -> Result<Problem> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Parse {
            line: hline,
            msg: "header must be `n m sense`".into(),
        });
    }
    let n: usize = parse_field(fields[0], hline)?;
    let m: usize = parse_field(fields[1], hline)?;
    let kind = fields[2];
    let mut diag: Vec<Option<f64>> = vec![None; n];
    let mut pairs = Vec::with_capacity(m);
    let mut count = 0;
    for (line, body) in lines {
        let f: Vec<&str> = body.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: "expected `i j w`".into(),
            });
        }
        let i: usize = parse_field(f[0], line)?;
        let j: usize = parse_field(f[1], line)?;
        let w: f64 = parse_field(f[2], line)?;
        if i >= n || j >= n {
            return Err(Error::Parse {
                line,
                msg: format!("index out of range for n = {n}"),
            });
        }
        if i == j {
            if diag[i].replace(w).is_some() {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate diagonal entry {i}"),
                });
            }
        } else {
            pairs.push((i, j, w));
        }
        count += 1;
    }
    if count != m {
        return Err(Error::Parse {
            line: hline,
            msg: format!("header promises {m} entries, found {count}"),
        });
    }
    if kind == "graph" {
        let g = WeightedGraph::new(n, pairs)?;
        if diag.iter().any(Option::is_some) {
            let w = diag.into_iter().map(|d| d.unwrap_or(0.0)).collect();
            return Ok(Problem::Graph(g.with_node_weights(w)?));
        }
        return Ok(Problem::Graph(g));
    }
    let sense: Sense = kind.parse().map_err(|_| Error::Parse {
        line: hline,
        msg: format!("unknown sense {kind:?}"),
    })?;
    let linear = diag.into_iter().map(|d| d.unwrap_or(0.0)).collect();
    Ok(Problem::Qubo(QuboInstance::new(n, sense, linear, pairs)?))
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {s:?}"),
    })
}
