//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach stdout; exits nonzero if any
//! criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use graynet::config::ExperimentConfig;
use graynet::dataio::capture::ByteOrder;
use graynet::dataio::{read_capture, read_flows, write_capture, write_flows, CaptureFile, CapturedPacket, DataError};
use graynet::dataio::{FlowRecord, Label};
use graynet::federation::{client_stream, run_federation, server_context, FederationData};
use graynet::harness::{run_sweep, Axis, SweepSpec};
use graynet::metrics::{g_error, kfold_split, ConfusionRates};
use graynet::nn::{
    self, decode_params, encode_params, project_support, ActivationSpec, InitConfig, NetworkParams, Objective, Role,
    Sample,
};
use graynet::pipeline::OUTPUT_WIDTH;
use graynet::seed;
use graynet::trainer::{
    self, adapt_depth, client_local_train, constrained_phases, layerwise_train, ModelSpec, PhaseDatasets, Split,
    TrainConfig, TrainContext,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

// ---------------------------------------------------------------- 1

fn rates(tp: f64, tn: f64, xi: f64) -> ConfusionRates {
    ConfusionRates { tp, fn_: 1.0 - tp, tn, fp: 1.0 - tn, xi }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let perfect = g_error(&rates(1.0, 1.0, 0.35)).unwrap();
    let worst = g_error(&rates(0.0, 0.0, 0.35)).unwrap();
    let fixture = g_error(&ConfusionRates { tp: 0.9, fn_: 0.1, tn: 0.8, fp: 0.2, xi: 0.35 }).unwrap();
    // hand evaluation: (0.35·0.1 + 0.65·0.2) / (1 + 0.35·0.8 + 0.65·0.9) = 0.165 / 1.865,
    // which is 0.0884718 when written to seven decimals
    let oracle = 0.165 / 1.865;
    let elapsed = start.elapsed();
    let pass = perfect == 0.0
        && worst == 1.0
        && (fixture - oracle).abs() <= 1e-9
        && format!("{fixture:.7}") == "0.0884718"
        && elapsed < Duration::from_secs(1);
    verdict(
        pass,
        format!(
            "perfect={perfect} worst={worst} fixture={fixture:.10} (hand {oracle:.10}, |Δ|={:.1e}) in {:.3}s",
            (fixture - oracle).abs(),
            secs(elapsed)
        ),
    )
}

// ---------------------------------------------------------------- 2

fn max_rel_fd_error(p: &NetworkParams, act: ActivationSpec, obj: &Objective, batch: &[Sample]) -> f64 {
    let g = nn::gradient(p, act, obj, batch).unwrap();
    let h = 1e-5;
    let mut probe = p.clone();
    let mut worst: f64 = 0.0;
    for (idx, analytic) in g.values().copied().enumerate() {
        let orig = *p.values().nth(idx).unwrap();
        *probe.values_mut().nth(idx).unwrap() = orig + h;
        let up = nn::error(&probe, act, obj, batch).unwrap();
        *probe.values_mut().nth(idx).unwrap() = orig - h;
        let down = nn::error(&probe, act, obj, batch).unwrap();
        *probe.values_mut().nth(idx).unwrap() = orig;
        let numeric = (up - down) / (2.0 * h);
        // relative error; both sides vanishing counts as agreement
        let err = if analytic.abs() < 1e-8 && numeric.abs() < 1e-8 {
            (analytic - numeric).abs()
        } else {
            (analytic - numeric).abs() / analytic.abs().max(numeric.abs())
        };
        worst = worst.max(err);
    }
    worst
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut rng = seed::rng(2, 0, 0);
    let act = ActivationSpec::default();
    let obj = Objective::unconstrained(0.1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let cfg = InitConfig {
            input_width: rng.random_range(1..=16),
            hidden_width: rng.random_range(1..=16),
            output_width: rng.random_range(1..=16),
            hidden_layers: rng.random_range(0..=3),
            scale: 0.5,
        };
        let p = NetworkParams::init(Role::Congruity, &cfg, &mut rng);
        let batch: Vec<Sample> = (0..3)
            .map(|_| {
                Sample::labeled(
                    (0..cfg.input_width).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    (0..cfg.output_width).map(|_| rng.random_range(-1.0..1.0)).collect(),
                )
            })
            .collect();
        worst = worst.max(max_rel_fd_error(&p, act, &obj, &batch));
    }
    let elapsed = start.elapsed();
    verdict(
        worst < 1e-4 && elapsed < Duration::from_secs(30),
        format!("max relative error {worst:.3e} over 50 nets in {:.2}s", secs(elapsed)),
    )
}

// ---------------------------------------------------------------- 3

fn small_config(seed: u64) -> ExperimentConfig {
    let text = format!(
        "seed = {seed}\nfolds = 2\n\
         [synth]\nn_flows = 240\nn_clients = 1\n\
         [hyper]\nembed_dim = 8\nextract_depth = 2\nsupport_size = 40\npacket_len = 16\nmax_packets = 2\n\
         [train]\nlearning_rate = 0.05\nmax_epochs = 30\npatience = 4\n\
         [model]\nhidden_width = 6\n[model.error]\nlambda = [0.001]\n\
         [federation]\nn_servers = 1\nrounds = 3\nclients_per_round = 1\n"
    );
    ExperimentConfig::from_toml(&text, Path::new("small.toml")).unwrap()
}

/// The broker's step sequence executed directly, without partitioning,
/// transport or aggregation.
fn centralized(cfg: &ExperimentConfig, data: &FederationData) -> NetworkParams {
    let ctx = cfg.train_context();
    let featurizer = cfg.featurizer().unwrap();
    let width = featurizer.input_width();
    let mut theta = graynet::federation::initial_model(&ctx, width);
    let split = Split {
        train: featurizer.samples(&data.public.train).unwrap(),
        validation: featurizer.samples(&data.public.validation).unwrap(),
    };
    let server = server_context(&ctx, 0);
    let (p, _) = layerwise_train(&server, &theta, &split).unwrap();
    let (p, _) = adapt_depth(&server, &p, &split).unwrap();
    let phases = PhaseDatasets {
        d_g: split.clone(),
        d_a: trainer::encode_actions(&data.actions, width, OUTPUT_WIDTH),
        d_r: trainer::encode_relations(&data.relations, width, OUTPUT_WIDTH),
    };
    let p = constrained_phases(&server, &p, &phases).unwrap().params;
    let obj = ctx.model.error.global_objective();
    let before = nn::mean_error(&theta, ctx.model.activation, &obj, &split.validation).unwrap();
    let after = nn::mean_error(&p, ctx.model.activation, &obj, &split.validation).unwrap();
    if after <= before {
        theta = p.with_role(Role::Congruity);
    }
    for round in 0..cfg.federation.rounds {
        let update =
            client_local_train(&ctx, &theta, &featurizer, &data.private[0], client_stream(round, 0)).unwrap();
        theta = update.params.with_role(Role::Congruity);
    }
    theta
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let cfg = small_config(11);
    let data = cfg.federation_data(cfg.datasets().unwrap()).unwrap();
    let out = run_federation(&data, &cfg.federation, &cfg.train_context(), &cfg.featurizer().unwrap()).unwrap();
    let oracle = centralized(&cfg, &data);
    let same_shape = out.params.same_shape(&oracle);
    let max_diff = out.params.values().zip(oracle.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    verdict(
        same_shape && max_diff < 1e-12 && elapsed < Duration::from_secs(60),
        format!(
            "H_max {} vs {}, max |Δθ| = {max_diff:.3e}, {} rounds, in {:.2}s",
            out.params.h_max(),
            oracle.h_max(),
            out.rounds.len(),
            secs(elapsed)
        ),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Verdict {
    let mut base = small_config(4);
    base.synth.n_clients = 2;
    base.synth.n_flows = 300;
    base.federation.rounds = 1;
    base.train.max_epochs = 40;
    base.train.patience = 5;
    base.model.error.lambda = vec![0.001];
    let base = base.resolved();
    let spec = SweepSpec { axis: Axis::ExtractDepth, values: vec![3, 5, 7], base, folds: 2 };
    let result = run_sweep(&spec).unwrap();
    let mut runs = 0;
    let mut growths = 0;
    let mut pass = true;
    for row in &result.rows {
        for run in &row.runs {
            runs += 1;
            pass &= run.depth_cap == row.value && run.depth_final <= run.depth_cap;
            for report in &run.depth_reports {
                pass &= report.depth_final <= row.value;
                let accepted: Vec<f64> =
                    report.depth_trace.iter().filter(|s| s.accepted).map(|s| s.saturated_error).collect();
                growths += accepted.len().saturating_sub(1);
                pass &= accepted.windows(2).all(|w| w[1] < w[0]);
            }
        }
    }
    let depths: Vec<usize> = result.rows.iter().flat_map(|r| r.runs.iter().map(|x| x.depth_final)).collect();
    verdict(pass, format!("{runs} runs over caps 3/5/7, final H_max {depths:?}, {growths} accepted growths checked"))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Verdict {
    let mut rng = seed::rng(5, 0, 0);
    let (input, output) = (12, 10);
    let sample = |rng: &mut rand_chacha::ChaCha8Rng| {
        Sample::labeled(
            (0..input).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..output).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
    };
    let ctx = TrainContext {
        cfg: TrainConfig { learning_rate: 0.05, max_epochs: 10, ..Default::default() },
        model: ModelSpec {
            hidden_width: 8,
            error: nn::ErrorConfig { lambda: vec![0.1], support_k: 4, beta_a: 0.5, beta_r: 0.75, beta_g: 1.0 },
            ..Default::default()
        },
    };
    let phases = PhaseDatasets {
        d_g: Split {
            train: (0..64).map(|_| sample(&mut rng)).collect(),
            validation: (0..16).map(|_| sample(&mut rng)).collect(),
        },
        d_a: (0..64).map(|_| sample(&mut rng)).collect(),
        d_r: (0..64).map(|_| sample(&mut rng)).collect(),
    };
    let init = InitConfig { input_width: input, hidden_width: 8, output_width: output, hidden_layers: 1, scale: 0.5 };
    let p = NetworkParams::init(Role::Congruity, &init, &mut rng);
    let out = constrained_phases(&ctx, &p, &phases).unwrap();
    let probe: Vec<Sample> = (0..64).map(|_| sample(&mut rng)).collect();
    let mut pass = out.phases.len() == 3;
    let mut worst = Vec::new();
    for record in &out.phases {
        let expected = (ctx.model.error.scaled_support(record.phase.beta(&ctx.model.error))) as usize;
        pass &= record.support == expected;
        let most = probe
            .iter()
            .map(|s| {
                let y = nn::predict(&record.params, ctx.model.activation, &s.input, Some(record.support)).unwrap();
                y.iter().filter(|v| **v != 0.0).count()
            })
            .max()
            .unwrap();
        pass &= most <= expected;
        worst.push(format!("{:?}: {most}≤{expected}", record.phase));
    }
    let mut idempotent = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=40);
        let k = rng.random_range(1..=n + 2);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let once = project_support(&v, k).unwrap();
        if project_support(&once, k).unwrap() == once {
            idempotent += 1;
        }
    }
    pass &= idempotent == 1000;
    verdict(pass, format!("probe nonzeros {}; projection idempotent on {idempotent}/1000", worst.join(", ")))
}

// ---------------------------------------------------------------- 6 and 8

fn desk_config() -> ExperimentConfig {
    let text = "seed = 1\nfolds = 2\n\
        [synth]\nn_flows = 2000\nanomaly_fraction = 0.1\nn_clients = 4\nskew = 0.5\n\
        [hyper]\nembed_dim = 32\nextract_depth = 3\nsupport_size = 200\npacket_len = 64\nmax_packets = 4\n\
        [train]\nlearning_rate = 0.05\n\
        [model]\nhidden_width = 16\n[model.error]\nlambda = [0.001]\n\
        [federation]\nrounds = 2\n";
    ExperimentConfig::from_toml(text, Path::new("desk.toml")).unwrap()
}

fn criteria_6_and_8() -> (Verdict, Verdict) {
    let start = Instant::now();
    let cfg = desk_config();
    let spec = SweepSpec { axis: Axis::EmbedDim, values: vec![32], base: cfg, folds: 2 };
    let result = run_sweep(&spec).unwrap();
    let elapsed = start.elapsed();
    let row = &result.rows[0];
    let c6 = verdict(
        row.mean <= 0.05 && row.control_mean >= 0.15 && elapsed < Duration::from_secs(600),
        format!(
            "mean G_E {:.4} (folds {:?}), control {:.4}, in {:.1}s",
            row.mean,
            row.runs.iter().map(|r| format!("{:.4}", r.g_error)).collect::<Vec<_>>(),
            row.control_mean,
            secs(elapsed)
        ),
    );

    let messages: usize = row.runs.iter().map(|r| r.audit.messages).sum();
    let bytes: usize = row.runs.iter().map(|r| r.audit.bytes).sum();
    let leaked: usize = row.runs.iter().map(|r| r.audit.leaked_windows).sum();
    let c8 = verdict(
        structural_message_check() && leaked == 0 && messages > 0,
        format!("message variants carry parameters and counts only; audited {messages} messages / {bytes} bytes, {leaked} payload windows found"),
    );
    (c6, c8)
}

/// Exhaustive destructuring: adding a field or variant to `Message` breaks
/// this function, forcing the privacy review to be repeated.
fn structural_message_check() -> bool {
    use graynet::federation::Message;
    fn fields(m: &Message) -> (usize, usize) {
        match m {
            Message::AssignServer { server, layer_start, layer_end, params, n_samples } => {
                let (_, _, _, _, _): (&String, &usize, &usize, &NetworkParams, &usize) =
                    (server, layer_start, layer_end, params, n_samples);
                (1, 1)
            }
            Message::ServerResult { server, params, n_samples } => {
                let (_, _, _): (&String, &NetworkParams, &usize) = (server, params, n_samples);
                (1, 1)
            }
            Message::PlaceClient { client, round, params } => {
                let (_, _, _): (&String, &usize, &NetworkParams) = (client, round, params);
                (1, 0)
            }
            Message::ClientUpdate { client, round, params, n_samples } => {
                let (_, _, _, _): (&String, &usize, &NetworkParams, &usize) = (client, round, params, n_samples);
                (1, 1)
            }
        }
    }
    let p = NetworkParams::from_layers(Role::Federated, vec![nn::LayerParams::zeros(1, 1)]).unwrap();
    let all = [
        Message::AssignServer { server: "s0".into(), layer_start: 0, layer_end: 1, params: p.clone(), n_samples: 1 },
        Message::ServerResult { server: "s0".into(), params: p.clone(), n_samples: 1 },
        Message::PlaceClient { client: "c0".into(), round: 0, params: p.clone() },
        Message::ClientUpdate { client: "c0".into(), round: 0, params: p, n_samples: 1 },
    ];
    all.iter().all(|m| fields(m).0 == 1)
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    std::fs::write(
        &config,
        "seed = 7\nfolds = 2\n[synth]\nn_flows = 160\nn_clients = 2\n\
         [hyper]\nembed_dim = 4\nextract_depth = 1\nsupport_size = 20\npacket_len = 16\nmax_packets = 2\n\
         [train]\nmax_epochs = 5\n[model]\nhidden_width = 4\n[federation]\nrounds = 1\n\
         [sweep]\nembed_dim = [4, 8]\n",
    )
    .unwrap();
    let run = |out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_graynet"))
            .args(["sweep", "--config"])
            .arg(&config)
            .args(["--axis", "embed_dim", "--out"])
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(dir.path().join(out).join("sweep_embed_dim.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    verdict(a == b && !a.is_empty(), format!("two sweep runs, CSV {} bytes each, identical: {}", a.len(), a == b))
}

// ---------------------------------------------------------------- 9

fn random_flow(rng: &mut rand_chacha::ChaCha8Rng, i: usize) -> FlowRecord {
    let packets = (0..rng.random_range(1..6))
        .map(|_| (0..rng.random_range(1..64)).map(|_| rng.random::<u8>()).collect())
        .collect();
    let label = [Label::Anomaly, Label::Normal, Label::Unlabeled][rng.random_range(0..3)];
    let mut f = FlowRecord::new(format!("flow-{i}"), packets, label);
    if rng.random_bool(0.5) {
        f.attributes.insert("client".into(), format!("c{}", rng.random_range(0..4)));
    }
    f
}

fn criterion_9() -> Verdict {
    let mut checks = Vec::new();
    let packets = vec![
        CapturedPacket { ts_sec: 1, ts_usec: 500, orig_len: 6, data: vec![1, 2, 3, 4] },
        CapturedPacket { ts_sec: 2, ts_usec: 0, orig_len: 2, data: vec![9, 9] },
    ];
    for order in [ByteOrder::Big, ByteOrder::Little] {
        let cap = CaptureFile::new(order, packets.clone());
        let bytes = write_capture(&cap);
        checks.push((format!("{order:?} round trip"), read_capture(&bytes).map(|c| c == cap).unwrap_or(false)));
        let truncated = &bytes[..bytes.len() - 1];
        checks.push((
            format!("{order:?} truncation"),
            matches!(read_capture(truncated), Err(DataError::TruncatedRecord(_))),
        ));
    }
    let mut bad = write_capture(&CaptureFile::new(ByteOrder::Little, vec![]));
    bad[..4].copy_from_slice(&[0, 1, 2, 3]);
    checks.push(("bad magic".into(), matches!(read_capture(&bad), Err(DataError::BadMagic(_)))));

    let mut rng = seed::rng(9, 0, 0);
    let flows: Vec<FlowRecord> = (0..1000).map(|i| random_flow(&mut rng, i)).collect();
    let mut first = Vec::new();
    write_flows(&mut first, &flows).unwrap();
    let back = read_flows(&first[..]).unwrap();
    let mut second = Vec::new();
    write_flows(&mut second, &back).unwrap();
    checks.push(("1000-flow round trip".into(), back == flows && first == second));

    let init = InitConfig { input_width: 7, hidden_width: 5, output_width: 3, hidden_layers: 2, scale: 3.0 };
    let p = NetworkParams::init(Role::Federated, &init, &mut rng);
    let enc = encode_params(&p).unwrap();
    let dec = decode_params(&enc).unwrap();
    let bitwise = dec.values().zip(p.values()).all(|(a, b)| a.to_bits() == b.to_bits())
        && dec.role == p.role
        && encode_params(&dec).unwrap() == enc;
    checks.push(("parameter codec bitwise".into(), bitwise));

    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.as_str()).collect();
    verdict(
        failed.is_empty(),
        if failed.is_empty() { format!("{} checks", checks.len()) } else { format!("failed: {}", failed.join(", ")) },
    )
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Verdict {
    let mut pass = true;
    for n in 100..=110 {
        let folds = kfold_split(n, 10, n as u64).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        pass &= folds.len() == 10
            && all == (0..n).collect::<Vec<_>>()
            && sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1;
    }
    verdict(pass, "n = 100..=110, k = 10: disjoint, covering, sizes within 1")
}

fn main() {
    let mut results: Vec<(usize, Verdict)> = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3()),
        (4, criterion_4()),
        (5, criterion_5()),
    ];
    let (c6, c8) = criteria_6_and_8();
    results.push((6, c6));
    results.push((7, criterion_7()));
    results.push((8, c8));
    results.push((9, criterion_9()));
    results.push((10, criterion_10()));

    let mut failures = 0;
    for (n, v) in &results {
        println!("criterion {n:>2}: {} — {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failures += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failures} failed", results.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
