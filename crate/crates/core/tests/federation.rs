//! End-to-end behavior of the broker procedure on small synthetic data.

use std::path::Path;

use graynet::federation::{checksum, client_stream, run_federation, FederationOutcome};
use graynet::nn::{self, Role};
use graynet::trainer::client_local_train;
use graynet::ExperimentConfig;

fn config(seed: u64, rounds: usize, n_servers: usize) -> ExperimentConfig {
    let text = format!(
        "seed = {seed}\n\
         [synth]\nn_flows = 200\nn_clients = 2\n\
         [hyper]\nembed_dim = 8\nextract_depth = 2\nsupport_size = 40\npacket_len = 16\nmax_packets = 2\n\
         [train]\nlearning_rate = 0.05\nmax_epochs = 10\npatience = 3\n\
         [model]\nhidden_width = 6\n[model.error]\nlambda = [0.001]\n\
         [federation]\nn_servers = {n_servers}\nrounds = {rounds}\nclients_per_round = 2\n"
    );
    ExperimentConfig::from_toml(&text, Path::new("fed.toml")).unwrap()
}

fn run(cfg: &ExperimentConfig) -> FederationOutcome {
    let data = cfg.federation_data(cfg.datasets().unwrap()).unwrap();
    run_federation(&data, &cfg.federation, &cfg.train_context(), &cfg.featurizer().unwrap()).unwrap()
}

#[test]
fn identical_seeds_give_identical_models() {
    let a = run(&config(3, 2, 1));
    let b = run(&config(3, 2, 1));
    assert_eq!(checksum(&a.params).unwrap(), checksum(&b.params).unwrap());
    assert_eq!(a.rounds, b.rounds);
    assert_eq!(a.predictions, b.predictions);
    assert_eq!(a.e_star.to_bits(), b.e_star.to_bits());
}

#[test]
fn zero_rounds_stop_at_the_server_merged_model() {
    let none = run(&config(5, 0, 1));
    let one = run(&config(5, 1, 1));
    assert!(none.rounds.is_empty());
    assert_eq!(checksum(&none.params).unwrap(), one.rounds[0].pre_checksum);
}

#[test]
fn rounds_form_a_checksum_chain() {
    let out = run(&config(7, 3, 1));
    assert_eq!(out.rounds.len(), 3);
    for (i, r) in out.rounds.iter().enumerate() {
        assert_eq!(r.round, i);
        assert_eq!(r.selected_clients.len(), 2);
        assert!(r.messages > 0 && r.bytes > 0);
    }
    for pair in out.rounds.windows(2) {
        assert_eq!(pair[0].post_checksum, pair[1].pre_checksum);
    }
    assert_eq!(out.rounds.last().unwrap().post_checksum, checksum(&out.params).unwrap());
    assert!((0.0..=1.0).contains(&out.e_star));
}

#[test]
fn accepted_merges_never_raise_validation_error() {
    let out = run(&config(11, 1, 1));
    assert!(!out.merges.is_empty());
    for m in &out.merges {
        if m.accepted {
            assert!(m.error_candidate <= m.error_before, "{m:?}");
        } else {
            assert!(m.error_candidate > m.error_before, "{m:?}");
        }
    }
}

#[test]
fn two_servers_split_the_layers() {
    let out = run(&config(13, 1, 2));
    assert_eq!(out.servers.len(), 2);
    assert_eq!(out.merges.len(), 2);
    let ranges: Vec<[usize; 2]> = out.merges.iter().map(|m| m.layers).collect();
    assert_eq!(ranges[0][0], 0);
    assert_eq!(ranges[0][1], ranges[1][0]);
    assert!(out.params.values().all(|v| v.is_finite()));
}

#[test]
fn client_training_is_seeded_and_local() {
    let cfg = config(17, 1, 1);
    let data = cfg.federation_data(cfg.datasets().unwrap()).unwrap();
    let featurizer = cfg.featurizer().unwrap();
    let ctx = cfg.train_context();
    let theta = graynet::federation::initial_model(&ctx, featurizer.input_width());
    let d_ps = &data.private[0];

    let a = client_local_train(&ctx, &theta, &featurizer, d_ps, client_stream(0, 0)).unwrap();
    let b = client_local_train(&ctx, &theta, &featurizer, d_ps, client_stream(0, 0)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_samples, d_ps.len());
    assert_eq!(a.params.role, Role::Federated);

    let mut frozen = ctx.clone();
    frozen.cfg.learning_rate = 0.0;
    let c = client_local_train(&frozen, &theta, &featurizer, d_ps, client_stream(0, 0)).unwrap();
    assert!(c.params.values().zip(theta.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn client_training_reduces_local_error() {
    let cfg = config(19, 1, 1);
    let data = cfg.federation_data(cfg.datasets().unwrap()).unwrap();
    let featurizer = cfg.featurizer().unwrap();
    let mut ctx = cfg.train_context();
    ctx.cfg.local_epochs = 20;
    let theta = graynet::federation::initial_model(&ctx, featurizer.input_width());
    let d_ps: Vec<_> = data.private.concat();
    assert!(d_ps.len() >= 50);
    let samples = featurizer.samples(&d_ps).unwrap();
    let obj = ctx.model.error.global_objective();
    let before = nn::mean_error(&theta, ctx.model.activation, &obj, &samples).unwrap();
    let update = client_local_train(&ctx, &theta, &featurizer, &d_ps, client_stream(0, 0)).unwrap();
    let after = nn::mean_error(&update.params, ctx.model.activation, &obj, &samples).unwrap();
    assert!(after < before, "{after} >= {before}");
}
