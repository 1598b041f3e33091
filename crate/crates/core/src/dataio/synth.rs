//! Labeled, non-IID synthetic traffic.
//!
//! Normal packets draw bytes from one seeded categorical distribution over
//! `0x00..=0x7F`. Anomaly packets draw from the same distribution shifted by
//! `0x40` and start with the 4-byte [`MOTIF`], whose first byte `0xDE` lies
//! outside the normal support, so no normal flow can contain it. Private
//! flows are spread over clients with a per-class Dirichlet allocation of
//! concentration `skew`.

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::records::{ActionRecord, Endpoint, EndpointRole, RelationRecord};
use super::{DataError, FlowRecord, Label};
use crate::graph::RelationClass;
use crate::seed;

pub const MOTIF: [u8; 4] = [0xDE, 0xAD, 0xBE, 0xEF];
const NORMAL_SUPPORT: usize = 0x80;
const ANOMALY_SHIFT: u8 = 0x40;

const STREAM_LABELS: u64 = 100;
const STREAM_BYTES: u64 = 101;
const STREAM_ALLOC: u64 = 102;
const STREAM_GRAPH: u64 = 103;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_flows: usize,
    pub anomaly_fraction: f64,
    pub n_clients: usize,
    /// Dirichlet concentration of the label-skewed client allocation.
    pub skew: f64,
    pub seed: u64,
    /// Inclusive `[min, max]` packet length in bytes.
    pub packet_len_range: [usize; 2],
    /// Inclusive `[min, max]` packets per flow.
    pub packets_per_flow_range: [usize; 2],
    /// Share of flows that go to the public dataset `D_g`.
    pub public_fraction: f64,
    pub n_servers: usize,
    pub n_hidden: usize,
    /// Actions generated per graph vertex.
    pub actions_per_vertex: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_flows: 1000,
            anomaly_fraction: 0.1,
            n_clients: 4,
            skew: 0.5,
            seed: 0,
            packet_len_range: [16, 96],
            packets_per_flow_range: [2, 10],
            public_fraction: 0.5,
            n_servers: 2,
            n_hidden: 4,
            actions_per_vertex: 4,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidSpec(m.to_string()));
        if self.n_flows == 0 {
            return bad("n_flows must be positive");
        }
        if !(0.0..=1.0).contains(&self.anomaly_fraction) {
            return bad("anomaly_fraction must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.public_fraction) {
            return bad("public_fraction must lie in [0, 1]");
        }
        if self.n_clients == 0 || self.n_servers == 0 {
            return bad("n_clients and n_servers must be positive");
        }
        if !(self.skew > 0.0) || !self.skew.is_finite() {
            return bad("skew must be positive");
        }
        let [lo, hi] = self.packet_len_range;
        if lo < MOTIF.len() || lo > hi {
            return bad("packet_len_range must be nonempty with min >= 4");
        }
        let [lo, hi] = self.packets_per_flow_range;
        if lo == 0 || lo > hi {
            return bad("packets_per_flow_range must be nonempty with min >= 1");
        }
        Ok(())
    }

    pub fn client_id(i: usize) -> String {
        format!("c{i}")
    }

    pub fn server_id(i: usize) -> String {
        format!("s{i}")
    }
}

/// `D_g`, per-client `{D_ps}`, `D_a` and `D_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub public: Vec<FlowRecord>,
    pub private: Vec<Vec<FlowRecord>>,
    pub actions: Vec<ActionRecord>,
    pub relations: Vec<RelationRecord>,
}

impl SynthData {
    pub fn all_flows(&self) -> impl Iterator<Item = &FlowRecord> {
        self.public.iter().chain(self.private.iter().flatten())
    }
}

pub fn synthesize(spec: &SynthSpec) -> Result<SynthData, DataError> {
    spec.validate()?;

    let n_anomaly = (spec.n_flows as f64 * spec.anomaly_fraction).round() as usize;
    let mut labels: Vec<Label> =
        (0..spec.n_flows).map(|i| if i < n_anomaly { Label::Anomaly } else { Label::Normal }).collect();
    labels.shuffle(&mut seed::rng(spec.seed, STREAM_LABELS, 0));

    let mut rng = seed::rng(spec.seed, STREAM_BYTES, 0);
    let weights: Vec<f64> = (0..NORMAL_SUPPORT).map(|_| 0.05 + rng.random::<f64>()).collect();
    let bytes = WeightedIndex::new(&weights).expect("positive weights");
    let flows: Vec<FlowRecord> = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let n_packets = rng.random_range(spec.packets_per_flow_range[0]..=spec.packets_per_flow_range[1]);
            let packets = (0..n_packets)
                .map(|_| {
                    let len = rng.random_range(spec.packet_len_range[0]..=spec.packet_len_range[1]);
                    let mut p: Vec<u8> = (0..len).map(|_| bytes.sample(&mut rng) as u8).collect();
                    if label == Label::Anomaly {
                        for b in p.iter_mut() {
                            *b += ANOMALY_SHIFT;
                        }
                        p[..MOTIF.len()].copy_from_slice(&MOTIF);
                    }
                    p
                })
                .collect();
            FlowRecord::new(format!("flow-{i:06}"), packets, label)
        })
        .collect();

    let n_public = (spec.n_flows as f64 * spec.public_fraction).round() as usize;
    let mut flows = flows.into_iter();
    let public: Vec<FlowRecord> = flows
        .by_ref()
        .take(n_public)
        .map(|mut f| {
            f.attributes.insert("source".into(), "public".into());
            f
        })
        .collect();
    let pool: Vec<FlowRecord> = flows.collect();
    let private = allocate(pool, spec)?;

    let (actions, relations) = graph_records(spec);
    Ok(SynthData { public, private, actions, relations })
}

/// Per-class Dirichlet proportions turned into counts by largest remainder.
fn allocate(pool: Vec<FlowRecord>, spec: &SynthSpec) -> Result<Vec<Vec<FlowRecord>>, DataError> {
    let n = spec.n_clients;
    let mut rng = seed::rng(spec.seed, STREAM_ALLOC, 0);
    let mut owner = vec![0usize; pool.len()];
    for class in [Label::Anomaly, Label::Normal] {
        let members: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].label == class).collect();
        let shares = dirichlet(n, spec.skew, &mut rng)?;
        let counts = largest_remainder(&shares, members.len());
        let mut it = members.into_iter();
        for (client, count) in counts.into_iter().enumerate() {
            for i in it.by_ref().take(count) {
                owner[i] = client;
            }
        }
    }
    // Every client gets at least one flow while the pool allows it.
    if pool.len() >= n {
        for empty in 0..n {
            if owner.contains(&empty) {
                continue;
            }
            let mut sizes = vec![0usize; n];
            owner.iter().for_each(|&o| sizes[o] += 1);
            let donor = (0..n).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).expect("n >= 1");
            let idx = owner.iter().rposition(|&o| o == donor).expect("donor owns flows");
            owner[idx] = empty;
        }
    }
    let mut private = vec![Vec::new(); n];
    for (mut flow, client) in pool.into_iter().zip(owner) {
        flow.attributes.insert("owner".into(), SynthSpec::client_id(client));
        private[client].push(flow);
    }
    Ok(private)
}

fn dirichlet(n: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, DataError> {
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| DataError::InvalidSpec(format!("skew: {e}")))?;
    let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        Ok(draws.into_iter().map(|d| d / total).collect())
    } else {
        // Extreme concentration underflows; all mass goes to one client.
        let mut shares = vec![0.0; n];
        shares[rng.random_range(0..n)] = 1.0;
        Ok(shares)
    }
}

fn largest_remainder(shares: &[f64], total: usize) -> Vec<usize> {
    let exact: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn graph_records(spec: &SynthSpec) -> (Vec<ActionRecord>, Vec<RelationRecord>) {
    let mut rng = seed::rng(spec.seed, STREAM_GRAPH, 0);
    let mut vertices = Vec::new();
    for i in 0..spec.n_clients {
        let features = [rng.random::<f64>(), rng.random::<f64>()];
        vertices.push(Endpoint { id: SynthSpec::client_id(i), role: EndpointRole::Subject, features });
    }
    for i in 0..spec.n_servers {
        let features = [rng.random::<f64>(), rng.random::<f64>()];
        vertices.push(Endpoint { id: SynthSpec::server_id(i), role: EndpointRole::Object, features });
    }
    for i in 0..spec.n_hidden {
        let role = if i % 2 == 0 { EndpointRole::Darknet } else { EndpointRole::Broker };
        vertices.push(Endpoint { id: format!("h{i}"), role, features: [0.0, 0.0] });
    }

    let mut actions = Vec::new();
    if vertices.len() >= 2 {
        for _ in 0..spec.actions_per_vertex * vertices.len() {
            let a = rng.random_range(0..vertices.len());
            let mut b = rng.random_range(0..vertices.len() - 1);
            if b >= a {
                b += 1;
            }
            let t_start = rng.random_range(0.0..100.0);
            let duration = -(1.0 - rng.random::<f64>()).ln();
            actions.push(ActionRecord {
                from: vertices[a].clone(),
                to: vertices[b].clone(),
                t_start,
                t_end: t_start + duration,
            });
        }
    }

    let mut relations = Vec::new();
    let groups = [
        (EndpointRole::Subject, RelationClass::SubjectSubject),
        (EndpointRole::Object, RelationClass::ObjectObject),
    ];
    for (role, class) in groups {
        let members: Vec<&Endpoint> = vertices.iter().filter(|v| v.role == role).collect();
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                if rng.random_bool(0.5) {
                    relations.push(RelationRecord {
                        a: members[i].clone(),
                        b: members[j].clone(),
                        class,
                        w_forward: rng.random::<f64>(),
                        w_backward: rng.random::<f64>(),
                    });
                }
            }
        }
    }
    (actions, relations)
}
