use super::{EdgeSpec, MetricGraph, PeriodicCell};
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDoc {
    pub id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub id: String,
    pub source: String,
    pub target: String,
    pub length: f64,
    pub conductivity: f64,
}

/// `glue` pairs `[a, b]` identify vertex `b` of copy k with vertex `a` of copy k+1 (mod copies).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicDoc {
    pub copies: usize,
    pub glue: Vec<[String; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub vertices: Vec<VertexDoc>,
    pub edges: Vec<EdgeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<PeriodicDoc>,
}

impl GraphDoc {
    pub fn from_graph(g: &MetricGraph) -> Self {
        GraphDoc {
            vertices: g.vertex_ids().iter().map(|id| VertexDoc { id: id.clone() }).collect(),
            edges: g
                .edges()
                .iter()
                .map(|e| EdgeDoc {
                    id: e.id.clone(),
                    source: g.vertex_id(e.source).to_string(),
                    target: g.vertex_id(e.target).to_string(),
                    length: e.length,
                    conductivity: e.conductivity,
                })
                .collect(),
            periodic: None,
        }
    }

    pub fn build(&self) -> Result<MetricGraph> {
        let Some(p) = &self.periodic else {
            return MetricGraph::new(
                self.vertices.iter().map(|v| v.id.clone()).collect(),
                self.edges.iter().map(spec).collect(),
            );
        };
        if p.copies == 0 {
            return invalid("periodic.copies must be at least 1");
        }
        let nv = self.vertices.len();
        let lookup: HashMap<&str, usize> =
            self.vertices.iter().enumerate().map(|(i, v)| (v.id.as_str(), i)).collect();
        let find = |id: &str| {
            lookup
                .get(id)
                .copied()
                .ok_or_else(|| crate::Error::Invalid(format!("periodic.glue names unknown vertex {id:?}")))
        };

        // union-find over all copies of all vertices
        let mut parent: Vec<usize> = (0..nv * p.copies).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for [a, b] in &p.glue {
            let (a, b) = (find(a)?, find(b)?);
            for k in 0..p.copies {
                let x = root(&mut parent, k * nv + b);
                let y = root(&mut parent, ((k + 1) % p.copies) * nv + a);
                if x != y {
                    parent[x.max(y)] = x.min(y);
                }
            }
        }
        let name = |k: usize, v: usize| format!("{}#{}", self.vertices[v].id, k);
        let mut names = Vec::new();
        let mut rename = vec![String::new(); nv * p.copies];
        for i in 0..nv * p.copies {
            let r = root(&mut parent, i);
            if r == i {
                names.push(name(i / nv, i % nv));
            }
        }
        for i in 0..nv * p.copies {
            let r = root(&mut parent, i);
            rename[i] = name(r / nv, r % nv);
        }
        let mut specs = Vec::new();
        for k in 0..p.copies {
            for e in &self.edges {
                let (s, t) = (find(&e.source)?, find(&e.target)?);
                specs.push(EdgeSpec {
                    id: format!("{}#{}", e.id, k),
                    source: rename[k * nv + s].clone(),
                    target: rename[k * nv + t].clone(),
                    length: e.length,
                    conductivity: e.conductivity,
                });
            }
        }
        Ok(MetricGraph::new(names, specs)?
            .with_cell(PeriodicCell { copies: p.copies, edges_per_copy: self.edges.len() }))
    }
}

fn spec(e: &EdgeDoc) -> EdgeSpec {
    EdgeSpec::new(e.id.clone(), e.source.clone(), e.target.clone(), e.length, e.conductivity)
}

impl MetricGraph {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(text)
            .map_err(|e| crate::Error::Invalid(format!("graph schema: {e}")))?;
        doc.build()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphDoc::from_graph(self)).expect("graph documents serialize")
    }
}
