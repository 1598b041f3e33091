//! Action-relational graph `G(S, O, H, A, R)` and the graynet `G_N`.
//!
//! Subjects are clients, objects are servers, hidden vertices are darknets
//! or brokers. Granularization clusters each hidden vertex into the seed it
//! has the strongest action affinity with; hidden vertices whose best
//! affinity stays below the granularity threshold are dropped from the
//! graynet.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("DuplicateId: vertex id {0:?} appears more than once")]
    DuplicateId(String),
    #[error("DanglingEndpoint: {0}")]
    DanglingEndpoint(String),
    #[error("NegativeWeight: relation {a:?}-{b:?} has weight {weight}")]
    NegativeWeight { a: String, b: String, weight: f64 },
    #[error("invalid action {from:?}->{to:?}: t_start {t_start} > t_end {t_end}")]
    InvalidAction { from: String, to: String, t_start: f64, t_end: f64 },
    #[error("object {0:?} has probability outside [0,1]")]
    InvalidProbability(String),
    #[error("UnknownVertex: {0:?}")]
    UnknownVertex(String),
    #[error("EmptySeedSet: at least one {0} seed is required")]
    EmptySeedSet(&'static str),
    #[error("seed {0:?} is not a {1}")]
    InvalidSeed(String, &'static str),
    #[error("NonpositiveGranularity: t_g = {0}")]
    NonpositiveGranularity(f64),
    #[error("graph document: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    pub behavior: f64,
    pub feedback: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Object {
    pub id: String,
    pub state: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenKind {
    Darknet,
    Broker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenVertex {
    pub id: String,
    pub kind: HiddenKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub from: String,
    pub to: String,
    pub t_start: f64,
    pub t_end: f64,
}

impl Action {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    fn touches(&self, a: &str, b: &str) -> bool {
        (self.from == a && self.to == b) || (self.from == b && self.to == a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationClass {
    SubjectSubject,
    ObjectObject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub endpoint_a: String,
    pub endpoint_b: String,
    pub class: RelationClass,
    pub w_forward: f64,
    pub w_backward: f64,
}

/// Which of the three vertex sets an id belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    Subject,
    Object,
    Hidden,
}

/// A validated `G(S, O, H, A, R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDocument", into = "GraphDocument")]
pub struct ActionRelationalGraph {
    subjects: Vec<Subject>,
    objects: Vec<Object>,
    hidden: Vec<HiddenVertex>,
    actions: Vec<Action>,
    relations: Vec<Relation>,
    #[serde(skip)]
    kinds: HashMap<String, VertexKind>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct GraphDocument {
    subjects: Vec<Subject>,
    objects: Vec<Object>,
    hidden: Vec<HiddenVertex>,
    actions: Vec<Action>,
    relations: Vec<Relation>,
}

impl TryFrom<GraphDocument> for ActionRelationalGraph {
    type Error = GraphError;

    fn try_from(doc: GraphDocument) -> Result<Self, GraphError> {
        build_graph(doc.subjects, doc.objects, doc.hidden, doc.actions, doc.relations)
    }
}

impl From<ActionRelationalGraph> for GraphDocument {
    fn from(g: ActionRelationalGraph) -> Self {
        GraphDocument {
            subjects: g.subjects,
            objects: g.objects,
            hidden: g.hidden,
            actions: g.actions,
            relations: g.relations,
        }
    }
}

/// Validates the five vertex/edge sets into a graph.
pub fn build_graph(
    subjects: Vec<Subject>,
    objects: Vec<Object>,
    hidden: Vec<HiddenVertex>,
    actions: Vec<Action>,
    relations: Vec<Relation>,
) -> Result<ActionRelationalGraph, GraphError> {
    let mut kinds = HashMap::with_capacity(subjects.len() + objects.len() + hidden.len());
    let ids = subjects
        .iter()
        .map(|s| (&s.id, VertexKind::Subject))
        .chain(objects.iter().map(|o| (&o.id, VertexKind::Object)))
        .chain(hidden.iter().map(|h| (&h.id, VertexKind::Hidden)));
    for (id, kind) in ids {
        if kinds.insert(id.clone(), kind).is_some() {
            return Err(GraphError::DuplicateId(id.clone()));
        }
    }
    for o in &objects {
        if !(0.0..=1.0).contains(&o.probability) {
            return Err(GraphError::InvalidProbability(o.id.clone()));
        }
    }
    for a in &actions {
        for end in [&a.from, &a.to] {
            if !kinds.contains_key(end) {
                return Err(GraphError::DanglingEndpoint(format!(
                    "action endpoint {end:?} is not a vertex"
                )));
            }
        }
        if !(a.t_start <= a.t_end) {
            return Err(GraphError::InvalidAction {
                from: a.from.clone(),
                to: a.to.clone(),
                t_start: a.t_start,
                t_end: a.t_end,
            });
        }
    }
    for r in &relations {
        let want = match r.class {
            RelationClass::SubjectSubject => VertexKind::Subject,
            RelationClass::ObjectObject => VertexKind::Object,
        };
        for end in [&r.endpoint_a, &r.endpoint_b] {
            match kinds.get(end) {
                Some(k) if *k == want => {}
                Some(k) => {
                    return Err(GraphError::DanglingEndpoint(format!(
                        "relation endpoint {end:?} is a {k:?}, class {:?} needs {want:?}",
                        r.class
                    )))
                }
                None => {
                    return Err(GraphError::DanglingEndpoint(format!(
                        "relation endpoint {end:?} is not a vertex"
                    )))
                }
            }
        }
        for w in [r.w_forward, r.w_backward] {
            if !w.is_finite() || w < 0.0 {
                return Err(GraphError::NegativeWeight {
                    a: r.endpoint_a.clone(),
                    b: r.endpoint_b.clone(),
                    weight: w,
                });
            }
        }
    }
    Ok(ActionRelationalGraph { subjects, objects, hidden, actions, relations, kinds })
}

impl ActionRelationalGraph {
    pub fn empty() -> Self {
        build_graph(vec![], vec![], vec![], vec![], vec![]).expect("empty graph is valid")
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn objects(&self) -> &[Object] {
        &self.objects
    }

    pub fn hidden(&self) -> &[HiddenVertex] {
        &self.hidden
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn kind_of(&self, id: &str) -> Option<VertexKind> {
        self.kinds.get(id).copied()
    }

    /// Two scalar attributes per vertex: `(b, f)` for subjects, `(s, p)` for
    /// objects, zeros for hidden vertices.
    pub fn features(&self, id: &str) -> Option<[f64; 2]> {
        match self.kind_of(id)? {
            VertexKind::Subject => {
                self.subjects.iter().find(|s| s.id == id).map(|s| [s.behavior, s.feedback])
            }
            VertexKind::Object => {
                self.objects.iter().find(|o| o.id == id).map(|o| [o.state, o.probability])
            }
            VertexKind::Hidden => Some([0.0, 0.0]),
        }
    }

    /// Returns a copy with new actions appended, re-validated.
    pub fn with_actions(&self, extra: impl IntoIterator<Item = Action>) -> Result<Self, GraphError> {
        let mut actions = self.actions.clone();
        actions.extend(extra);
        build_graph(
            self.subjects.clone(),
            self.objects.clone(),
            self.hidden.clone(),
            actions,
            self.relations.clone(),
        )
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<(), GraphError> {
        serde_json::to_writer_pretty(writer, self).map_err(|e| GraphError::Format(e.to_string()))
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, GraphError> {
        serde_json::from_reader(reader).map_err(|e| GraphError::Format(e.to_string()))
    }
}

/// Sum over actions joining the two vertices of `1 / (1 + t_end - t_start)`.
pub fn hidden_affinity(
    graph: &ActionRelationalGraph,
    hidden_id: &str,
    seed_id: &str,
) -> Result<f64, GraphError> {
    match graph.kind_of(hidden_id) {
        Some(VertexKind::Hidden) => {}
        _ => return Err(GraphError::UnknownVertex(hidden_id.to_string())),
    }
    match graph.kind_of(seed_id) {
        Some(VertexKind::Subject | VertexKind::Object) => {}
        _ => return Err(GraphError::UnknownVertex(seed_id.to_string())),
    }
    Ok(graph
        .actions
        .iter()
        .filter(|a| a.touches(hidden_id, seed_id))
        .map(|a| 1.0 / (1.0 + a.duration()))
        .sum())
}

/// The granularized graynet `G_N(S, O, A, R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graynet {
    /// The base graph keeping only hidden vertices that joined a cluster.
    pub base: ActionRelationalGraph,
    pub granularity: f64,
    /// `S*`: seed subject id to cluster members (seed included).
    pub subject_clusters: BTreeMap<String, BTreeSet<String>>,
    /// `O*`: seed object id to cluster members (seed included).
    pub object_clusters: BTreeMap<String, BTreeSet<String>>,
    /// `A*`
    pub congruity_actions: Vec<Action>,
    /// `R*`
    pub congruity_relations: Vec<Relation>,
}

impl Graynet {
    pub fn assigned_hidden(&self) -> usize {
        self.subject_clusters
            .values()
            .chain(self.object_clusters.values())
            .map(|c| c.len() - 1)
            .sum()
    }

    /// Seed whose cluster holds `vertex`, if any.
    pub fn cluster_of(&self, vertex: &str) -> Option<&str> {
        self.subject_clusters
            .iter()
            .chain(self.object_clusters.iter())
            .find(|(_, members)| members.contains(vertex))
            .map(|(seed, _)| seed.as_str())
    }
}

/// Clusters hidden vertices into the given subject and object seeds.
pub fn granularize(
    graph: &ActionRelationalGraph,
    t_g: f64,
    subject_seeds: &[String],
    object_seeds: &[String],
) -> Result<Graynet, GraphError> {
    if !(t_g > 0.0) || !t_g.is_finite() {
        return Err(GraphError::NonpositiveGranularity(t_g));
    }
    if subject_seeds.is_empty() {
        return Err(GraphError::EmptySeedSet("subject"));
    }
    if object_seeds.is_empty() {
        return Err(GraphError::EmptySeedSet("object"));
    }
    for s in subject_seeds {
        if graph.kind_of(s) != Some(VertexKind::Subject) {
            return Err(GraphError::InvalidSeed(s.clone(), "subject"));
        }
    }
    for o in object_seeds {
        if graph.kind_of(o) != Some(VertexKind::Object) {
            return Err(GraphError::InvalidSeed(o.clone(), "object"));
        }
    }

    // Seeds in ascending id order, so the first maximum wins ties.
    let seeds: BTreeSet<&String> = subject_seeds.iter().chain(object_seeds).collect();

    let mut subject_clusters: BTreeMap<String, BTreeSet<String>> =
        subject_seeds.iter().map(|s| (s.clone(), BTreeSet::from([s.clone()]))).collect();
    let mut object_clusters: BTreeMap<String, BTreeSet<String>> =
        object_seeds.iter().map(|o| (o.clone(), BTreeSet::from([o.clone()]))).collect();

    let mut kept_hidden = Vec::new();
    for h in &graph.hidden {
        let mut best: Option<(&String, f64)> = None;
        for seed in &seeds {
            let aff = hidden_affinity(graph, &h.id, seed)?;
            if best.is_none_or(|(_, b)| aff > b) {
                best = Some((seed, aff));
            }
        }
        if let Some((seed, aff)) = best {
            if aff >= t_g {
                let cluster = match graph.kind_of(seed) {
                    Some(VertexKind::Subject) => subject_clusters.get_mut(seed.as_str()),
                    _ => object_clusters.get_mut(seed.as_str()),
                };
                cluster.expect("seed has a cluster").insert(h.id.clone());
                kept_hidden.push(h.clone());
            }
        }
    }

    let member_of: HashMap<&str, &str> = subject_clusters
        .iter()
        .chain(object_clusters.iter())
        .flat_map(|(seed, members)| members.iter().map(move |m| (m.as_str(), seed.as_str())))
        .collect();
    let same_cluster = |a: &str, b: &str| match (member_of.get(a), member_of.get(b)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    };
    let congruity_actions: Vec<Action> =
        graph.actions.iter().filter(|a| same_cluster(&a.from, &a.to)).cloned().collect();
    let congruity_relations: Vec<Relation> = graph
        .relations
        .iter()
        .filter(|r| same_cluster(&r.endpoint_a, &r.endpoint_b))
        .cloned()
        .collect();

    let kept: BTreeSet<&str> = kept_hidden.iter().map(|h| h.id.as_str()).collect();
    let visible = |id: &str| graph.kind_of(id) != Some(VertexKind::Hidden) || kept.contains(id);
    let base_actions =
        graph.actions.iter().filter(|a| visible(&a.from) && visible(&a.to)).cloned().collect();
    let base = build_graph(
        graph.subjects.clone(),
        graph.objects.clone(),
        kept_hidden,
        base_actions,
        graph.relations.clone(),
    )?;

    Ok(Graynet {
        base,
        granularity: t_g,
        subject_clusters,
        object_clusters,
        congruity_actions,
        congruity_relations,
    })
}
