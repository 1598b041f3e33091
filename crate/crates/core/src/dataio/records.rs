//! Actional (`D_a`) and relational (`D_r`) records. Each record carries its
//! endpoints' roles and attributes, so a graph can be rebuilt from the two
//! record files alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::graph::{
    build_graph, Action, ActionRelationalGraph, HiddenKind, HiddenVertex, Object, Relation, RelationClass, Subject,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointRole {
    Subject,
    Object,
    Darknet,
    Broker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub id: String,
    pub role: EndpointRole,
    /// `(b, f)` for subjects, `(s, p)` for objects, zeros for hidden vertices.
    pub features: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub from: Endpoint,
    pub to: Endpoint,
    pub t_start: f64,
    pub t_end: f64,
}

impl ActionRecord {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationRecord {
    pub a: Endpoint,
    pub b: Endpoint,
    pub class: RelationClass,
    pub w_forward: f64,
    pub w_backward: f64,
}

/// Rebuilds `G(S, O, H, A, R)` from record endpoints. Vertex sets come out
/// sorted by id.
pub fn graph_from_records(
    actions: &[ActionRecord],
    relations: &[RelationRecord],
) -> Result<ActionRelationalGraph, DataError> {
    let mut vertices: BTreeMap<&str, &Endpoint> = BTreeMap::new();
    let endpoints = actions
        .iter()
        .flat_map(|a| [&a.from, &a.to])
        .chain(relations.iter().flat_map(|r| [&r.a, &r.b]));
    for e in endpoints {
        match vertices.get(e.id.as_str()) {
            Some(prev) if prev.role != e.role || prev.features != e.features => {
                return Err(DataError::InvalidSpec(format!("endpoint {:?} described inconsistently", e.id)));
            }
            Some(_) => {}
            None => {
                vertices.insert(&e.id, e);
            }
        }
    }
    let (mut subjects, mut objects, mut hidden) = (Vec::new(), Vec::new(), Vec::new());
    for e in vertices.values() {
        match e.role {
            EndpointRole::Subject => {
                subjects.push(Subject { id: e.id.clone(), behavior: e.features[0], feedback: e.features[1] })
            }
            EndpointRole::Object => {
                objects.push(Object { id: e.id.clone(), state: e.features[0], probability: e.features[1] })
            }
            EndpointRole::Darknet => hidden.push(HiddenVertex { id: e.id.clone(), kind: HiddenKind::Darknet }),
            EndpointRole::Broker => hidden.push(HiddenVertex { id: e.id.clone(), kind: HiddenKind::Broker }),
        }
    }
    let actions = actions
        .iter()
        .map(|a| Action { from: a.from.id.clone(), to: a.to.id.clone(), t_start: a.t_start, t_end: a.t_end })
        .collect();
    let relations = relations
        .iter()
        .map(|r| Relation {
            endpoint_a: r.a.id.clone(),
            endpoint_b: r.b.id.clone(),
            class: r.class,
            w_forward: r.w_forward,
            w_backward: r.w_backward,
        })
        .collect();
    Ok(build_graph(subjects, objects, hidden, actions, relations)?)
}
