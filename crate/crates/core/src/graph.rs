//! Patrolling graphs: vertices, timed edges and targets.
//!
//! Vertices carry opaque string ids externally and dense indices internally.
//! The document order of vertices defines the dense index of each vertex, and
//! the document order of edges defines successor order.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("malformed graph document: {0}")]
    Malformed(String),
    #[error("graph has no vertices")]
    NoVertices,
    #[error("graph has no targets")]
    NoTargets,
    #[error("duplicate vertex {0}")]
    DuplicateVertex(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("duplicate edge {from}->{to}")]
    DuplicateEdge { from: String, to: String },
    #[error("self-loop at vertex {0}")]
    SelfLoop(String),
    #[error("non-positive time on edge {from}->{to}")]
    NonPositiveTime { from: String, to: String },
    #[error("non-positive cost at target {0}")]
    NonPositiveCost(String),
    #[error("non-positive attack time at target {0}")]
    NonPositiveAttackTime(String),
    #[error("beta out of range (0,1] at target {0}")]
    BetaOutOfRange(String),
}

/// Parameters of a vulnerable vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    /// Cost `alpha` lost when an attack succeeds.
    pub cost: f64,
    /// Time units needed to complete an attack.
    pub attack_time: u32,
    /// Probability that a visit detects an ongoing attack.
    pub detection: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub time: u32,
}

/// A validated patrolling graph. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PatrollingGraph {
    ids: Vec<String>,
    lookup: HashMap<String, usize>,
    targets: Vec<Option<Target>>,
    target_vertices: Vec<usize>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphStats {
    pub alpha_max: f64,
    pub d_max: u32,
    pub time_max: u32,
    pub time_avg: f64,
    pub strongly_connected: bool,
    pub n_vertices: usize,
    pub n_targets: usize,
    pub n_edges: usize,
}

/// Incremental construction; all validation happens in [`GraphBuilder::build`].
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    vertices: Vec<(String, Option<Target>)>,
    edges: Vec<(String, String, i64)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, id: impl Into<String>) -> &mut Self {
        self.vertices.push((id.into(), None));
        self
    }

    pub fn target(&mut self, id: impl Into<String>, cost: f64, attack_time: u32, detection: f64) -> &mut Self {
        self.vertices.push((
            id.into(),
            Some(Target {
                cost,
                attack_time,
                detection,
            }),
        ));
        self
    }

    pub fn edge(&mut self, from: impl Into<String>, to: impl Into<String>, time: u32) -> &mut Self {
        self.edges.push((from.into(), to.into(), time as i64));
        self
    }

    /// Adds `a -> b` and `b -> a` with the same time.
    pub fn undirected(&mut self, a: &str, b: &str, time: u32) -> &mut Self {
        self.edge(a, b, time).edge(b, a, time)
    }

    pub fn build(&self) -> Result<PatrollingGraph, GraphError> {
        if self.vertices.is_empty() {
            return Err(GraphError::NoVertices);
        }
        let mut lookup = HashMap::with_capacity(self.vertices.len());
        let mut ids = Vec::with_capacity(self.vertices.len());
        let mut targets = Vec::with_capacity(self.vertices.len());
        for (i, (id, target)) in self.vertices.iter().enumerate() {
            if lookup.insert(id.clone(), i).is_some() {
                return Err(GraphError::DuplicateVertex(id.clone()));
            }
            if let Some(t) = target {
                if !(t.cost > 0.0) || !t.cost.is_finite() {
                    return Err(GraphError::NonPositiveCost(id.clone()));
                }
                if t.attack_time == 0 {
                    return Err(GraphError::NonPositiveAttackTime(id.clone()));
                }
                if !(t.detection > 0.0 && t.detection <= 1.0) {
                    return Err(GraphError::BetaOutOfRange(id.clone()));
                }
            }
            ids.push(id.clone());
            targets.push(*target);
        }
        let target_vertices: Vec<usize> = (0..ids.len()).filter(|&v| targets[v].is_some()).collect();
        if target_vertices.is_empty() {
            return Err(GraphError::NoTargets);
        }

        let mut edges = Vec::with_capacity(self.edges.len());
        let mut out_edges = vec![Vec::new(); ids.len()];
        let mut seen = HashMap::new();
        for (from, to, time) in &self.edges {
            let u = *lookup
                .get(from)
                .ok_or_else(|| GraphError::UnknownVertex(from.clone()))?;
            let v = *lookup.get(to).ok_or_else(|| GraphError::UnknownVertex(to.clone()))?;
            if u == v {
                return Err(GraphError::SelfLoop(from.clone()));
            }
            if *time <= 0 || *time > u32::MAX as i64 {
                return Err(GraphError::NonPositiveTime {
                    from: from.clone(),
                    to: to.clone(),
                });
            }
            if seen.insert((u, v), ()).is_some() {
                return Err(GraphError::DuplicateEdge {
                    from: from.clone(),
                    to: to.clone(),
                });
            }
            out_edges[u].push(edges.len());
            edges.push(Edge {
                from: u,
                to: v,
                time: *time as u32,
            });
        }

        Ok(PatrollingGraph {
            ids,
            lookup,
            targets,
            target_vertices,
            edges,
            out_edges,
        })
    }
}

impl PatrollingGraph {
    pub fn n_vertices(&self) -> usize {
        self.ids.len()
    }

    pub fn id(&self, v: usize) -> &str {
        &self.ids[v]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vertex(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn target(&self, v: usize) -> Option<&Target> {
        self.targets[v].as_ref()
    }

    /// Target vertices in vertex order.
    pub fn targets(&self) -> &[usize] {
        &self.target_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Edge ids leaving `v`, in document order.
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    pub fn alpha_max(&self) -> f64 {
        self.target_vertices
            .iter()
            .map(|&v| self.targets[v].unwrap().cost)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn d_max(&self) -> u32 {
        self.target_vertices
            .iter()
            .map(|&v| self.targets[v].unwrap().attack_time)
            .max()
            .unwrap_or(0)
    }

    pub fn stats(&self) -> GraphStats {
        let n_edges = self.edges.len();
        let time_max = self.edges.iter().map(|e| e.time).max().unwrap_or(0);
        let time_avg = if n_edges == 0 {
            0.0
        } else {
            self.edges.iter().map(|e| e.time as f64).sum::<f64>() / n_edges as f64
        };
        GraphStats {
            alpha_max: self.alpha_max(),
            d_max: self.d_max(),
            time_max,
            time_avg,
            strongly_connected: self.is_strongly_connected(),
            n_vertices: self.ids.len(),
            n_targets: self.target_vertices.len(),
            n_edges,
        }
    }

    /// Forward and backward reachability from vertex 0.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.ids.len();
        let mut preds = vec![Vec::new(); n];
        for e in &self.edges {
            preds[e.to].push(e.from);
        }
        let succs: Vec<Vec<usize>> = (0..n)
            .map(|v| self.out_edges[v].iter().map(|&e| self.edges[e].to).collect())
            .collect();
        reaches_all(&succs) && reaches_all(&preds)
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            vertices: self
                .ids
                .iter()
                .zip(&self.targets)
                .map(|(id, t)| VertexDoc {
                    id: id.clone(),
                    target: t.map(|t| TargetDoc {
                        cost: t.cost,
                        attack_time: t.attack_time as i64,
                        detection: t.detection,
                    }),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    from: self.ids[e.from].clone(),
                    to: self.ids[e.to].clone(),
                    time: e.time as i64,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("graph document serializes")
    }
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == adj.len()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub vertices: Vec<VertexDoc>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDoc {
    pub cost: f64,
    pub attack_time: i64,
    pub detection: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub from: String,
    pub to: String,
    pub time: i64,
}

impl GraphDocument {
    pub fn into_graph(self) -> Result<PatrollingGraph, GraphError> {
        let mut b = GraphBuilder::new();
        for v in self.vertices {
            match v.target {
                None => {
                    b.vertex(v.id);
                }
                Some(t) => {
                    if t.attack_time <= 0 || t.attack_time > u32::MAX as i64 {
                        return Err(GraphError::NonPositiveAttackTime(v.id));
                    }
                    b.target(v.id, t.cost, t.attack_time as u32, t.detection);
                }
            }
        }
        for e in self.edges {
            b.edges.push((e.from, e.to, e.time));
        }
        b.build()
    }
}

/// Parses a graph document; see [`GraphDocument`] for the schema.
pub fn parse_graph(text: &str) -> Result<PatrollingGraph, GraphError> {
    let doc: GraphDocument = serde_json::from_str(text).map_err(|e| GraphError::Malformed(e.to_string()))?;
    doc.into_graph()
}
