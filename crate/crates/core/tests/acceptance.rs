//! Acceptance suite. Runs every criterion in order and prints one
//! `PASS`/`FAIL` line each; exits non-zero if any criterion fails.
//!
//! Run alone with `cargo test --release --test acceptance`.

mod common;

use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use fedsim::cli::{preset_config, similarity_study, ExperimentConfig, Preset};
use fedsim::cost::{bytes_per_round, flops_per_local_batch, flops_per_round, ArchSpec};
use fedsim::data::{generate_synthetic, ClientShard};
use fedsim::engine::{
    aggregate_average, fednova_aggregate, local_stream, run_experiment, run_round, sample_batch_indices,
    AlgorithmConfig, Budgets, FederatedData, FederationState, SimulationConfig,
};
use fedsim::eval::{
    build_report, cost_to_target, direction_similarity, final_accuracy, run_similarity_study,
    windowed_accuracy, CentralConfig, CostKind, CostToTarget, MetricPoint, MetricSeries, StreakBasis,
    ThresholdReport, STREAK, WINDOW,
};
use fedsim::nn::{
    backward, backward_with_hidden_grad, forward, moon_contrastive, sgd_step, update_running_stats, MlpDims,
    MlpModel, Mode, OptimizerState,
};
use fedsim::rng::RngStream;
use fedsim::vertical::{extract, partition, reassemble};
use fedsim::AlgorithmKind;
use rand::Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// 1. gradients vs finite differences

/// Components smaller than this are compared absolutely: the analytic side
/// runs in f32, and a gradient that is exactly zero in theory (the bias in
/// front of batch norm) comes out as cancellation noise around 1e-6.
const RELATIVE_FLOOR: f64 = 1e-2;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

fn criterion_1() -> Outcome {
    let mut checked = 0usize;
    let mut moon_cases = 0usize;
    let mut components = 0usize;
    let mut strict = 0usize;
    let mut worst = 0f64;
    let mut seed = 0u64;
    while checked < 120 {
        seed += 1;
        let mut rng = RngStream::new(seed).derive("gradcheck").rng();
        let dims = ok(MlpDims::new(
            rng.random_range(2..6),
            rng.random_range(2..7),
            rng.random_range(2..5),
        ))?;
        let b = rng.random_range(3..9);
        let model = random_model(dims, &mut rng);
        let x = random_features(b, dims.input, &mut rng);
        let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..dims.classes)).collect();
        let params = Params::from_model(&model);
        let xr = rows_f64(&x);

        // Finite differences are meaningless across a ReLU kink.
        let f = forward_train(&params, &xr);
        let margin = f.pre_relu.iter().flatten().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        if margin < 2e-3 {
            continue;
        }

        let with_moon = seed.is_multiple_of(2);
        let zg: Vec<Vec<f64>> = (0..b)
            .map(|_| (0..dims.hidden).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let zp: Vec<Vec<f64>> = (0..b)
            .map(|_| (0..dims.hidden).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let mu = rng.random_range(0.5..2.0);
        let tau = if seed.is_multiple_of(4) { 0.5 } else { 1.0 };
        let term = MoonTerm {
            z_glob: &zg,
            z_prev: &zp,
            mu,
            tau,
        };

        let (_, cache) = ok(forward(&model, x.view(), Mode::Train))?;
        let grads = if with_moon {
            let (_, gz) = ok(moon_contrastive(
                cache.hidden.view(),
                to_array(&zg).view(),
                to_array(&zp).view(),
                mu,
                tau,
            ))?;
            ok(backward_with_hidden_grad(&model, &cache, &labels, Some(gz.view())))?
        } else {
            ok(backward(&model, &cache, &labels))?
        };
        let fd = finite_difference(&params, &xr, &labels, with_moon.then_some(&term), 1e-4);
        for (t, (a, n)) in grads.slices().into_iter().zip(&fd).enumerate() {
            for (i, (&a, &n)) in a.iter().zip(n).enumerate() {
                let a = f64::from(a);
                components += 1;
                strict += usize::from(a.abs().max(n.abs()) >= RELATIVE_FLOOR);
                let err = relative_error(a, n);
                worst = worst.max(err);
                ensure!(
                    err <= 1e-3,
                    "seed {seed} tensor {t} entry {i}: analytic {a:e} vs numeric {n:e}"
                );
            }
        }
        checked += 1;
        moon_cases += usize::from(with_moon);
    }
    Ok(format!(
        "{checked} models ({moon_cases} with the contrastive term), {components} components ({strict} above the floor), worst rel err {worst:.2e}"
    ))
}

// ---------------------------------------------------------------------------
// 2. reductions

fn small_cfg(algorithm: AlgorithmConfig, seed: u64, rounds: usize) -> SimulationConfig {
    let mut cfg = SimulationConfig::new(algorithm);
    cfg.seed = seed;
    cfg.participation = 0.4;
    cfg.hidden = 12;
    cfg.ist_site_hidden = 3;
    cfg.algorithm.batch_size = 8;
    cfg.budgets = Budgets {
        flops: 1e15,
        bytes: 1e15,
        max_rounds: rounds,
    };
    cfg
}

fn same_run(a: &SimulationConfig, b: &SimulationConfig, data: &FederatedData) -> Result<bool, String> {
    let ra = ok(run_experiment(a, data))?;
    let rb = ok(run_experiment(b, data))?;
    let hist_eq = ra.history.len() == rb.history.len()
        && ra.history.iter().zip(&rb.history).all(|(x, y)| {
            x.clients == y.clients
                && x.test_accuracy.map(f64::to_bits) == y.test_accuracy.map(f64::to_bits)
        });
    Ok(hist_eq && bits(&ra.model) == bits(&rb.model))
}

fn criterion_2() -> Outcome {
    let mut cases = 0;
    for seed in 1..=3u64 {
        let data = tiny_federation(seed, 10, 0.3, 30);

        let mut avg = AlgorithmConfig::new(AlgorithmKind::FedAvg).with_local_rounds(3);
        avg.momentum = 0.9;
        let mut prox = AlgorithmConfig::new(AlgorithmKind::FedProx).with_local_rounds(3).with_mu(0.0);
        prox.momentum = 0.9;
        ensure!(
            same_run(&small_cfg(avg.clone(), seed, 8), &small_cfg(prox, seed, 8), &data)?,
            "FedProx(mu=0) diverged from FedAvg (seed {seed})"
        );

        let ist = AlgorithmConfig::new(AlgorithmKind::Ist).with_local_rounds(2);
        let mut istprox = AlgorithmConfig::new(AlgorithmKind::IstProx).with_local_rounds(2).with_mu(0.0);
        istprox.momentum = ist.momentum;
        ensure!(
            same_run(&small_cfg(ist, seed, 8), &small_cfg(istprox, seed, 8), &data)?,
            "ISTProx(mu=0) diverged from IST (seed {seed})"
        );

        let mut avg1 = avg.clone().with_local_rounds(1);
        avg1.momentum = 0.9;
        let mut nova = AlgorithmConfig::new(AlgorithmKind::FedNova).with_local_rounds(1).with_mu(0.0);
        nova.momentum = 0.9;
        nova.fednova_tau_eff = Some(1.0);
        ensure!(
            same_run(&small_cfg(avg1, seed, 8), &small_cfg(nova, seed, 8), &data)?,
            "FedNova(tau=1, tau_eff=1) diverged from FedAvg (seed {seed})"
        );

        // The aggregation rule itself on arbitrary client models.
        let mut rng = RngStream::new(seed).derive("nova").rng();
        let dims = ok(MlpDims::new(4, 5, 3))?;
        let prev = random_model(dims, &mut rng);
        let clients: Vec<MlpModel> = (0..4).map(|_| random_model(dims, &mut rng)).collect();
        let refs: Vec<&MlpModel> = clients.iter().collect();
        let w = [0.25; 4];
        let nv = ok(fednova_aggregate(&prev, &refs, &[1; 4], &w, 1.0))?;
        let av = ok(aggregate_average(&refs, &w))?;
        ensure!(bits(&nv) == bits(&av), "fednova_aggregate != aggregate_average at tau=1");

        ensure!(ist_matches_sgd(seed)?, "IST with one site left the centralized SGD trajectory (seed {seed})");
        cases += 5;
    }
    Ok(format!("{cases} bit-exact comparisons over seeds 1..3"))
}

/// IST with a single site against hand-composed momentum SGD on its shard.
fn ist_matches_sgd(seed: u64) -> Result<bool, String> {
    let data = tiny_federation(seed, 1, 1.0, 60);
    let mut cfg = small_cfg(AlgorithmConfig::new(AlgorithmKind::Ist).with_local_rounds(4), seed, 5);
    cfg.participation = 1.0;
    cfg.ist_site_hidden = 9;
    let lr = cfg.algorithm.lr;
    let mut state = ok(FederationState::new(&cfg, &data))?;
    let mut reference = state.global.clone();
    for round in 1..=5 {
        ok(run_round(&mut state, &cfg, &data, lr, false))?;
        let mut opt = ok(OptimizerState::new(&reference, lr, cfg.algorithm.momentum))?;
        let mut rng = local_stream(cfg.seed, round, 0).rng();
        for _ in 0..cfg.algorithm.local_rounds {
            let idx = ok(sample_batch_indices(&data.shards[0], cfg.algorithm.batch_size, &mut rng))?;
            let batch = ok(data.train.gather(&idx))?;
            let (_, cache) = ok(forward(&reference, batch.features.view(), Mode::Train))?;
            let g = ok(backward(&reference, &cache, &batch.labels))?;
            ok(update_running_stats(&mut reference, &cache))?;
            ok(sgd_step(&mut reference, &g, &mut opt))?;
        }
        if bits(&state.global) != bits(&reference) {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// 3. one-step FedAvg equals a union-batch step

fn criterion_3() -> Outcome {
    let mut worst = 0f64;
    for seed in 1..=5u64 {
        let data = tiny_federation(seed, 6, 0.5, 32);
        let mut algo = AlgorithmConfig::new(AlgorithmKind::FedAvg).with_local_rounds(1);
        algo.momentum = 0.0;
        let mut cfg = small_cfg(algo, seed, 1);
        cfg.participation = 1.0;
        let lr = 0.05f32;
        let mut state = ok(FederationState::new(&cfg, &data))?;
        let start = state.global.clone();
        ok(run_round(&mut state, &cfg, &data, lr, false))?;

        // Union-batch step: mean of per-client-batch gradients (batch-norm
        // statistics per client batch), accumulated in f64.
        let n_params: Vec<usize> = start.trainable().iter().map(|s| s.len()).collect();
        let mut mean_grad: Vec<Vec<f64>> = n_params.iter().map(|&n| vec![0.0; n]).collect();
        let mut mean_stats = [vec![0.0f64; start.bn_mean.len()], vec![0.0f64; start.bn_var.len()]];
        let s = data.n_clients() as f64;
        for c in 0..data.n_clients() {
            let mut rng = local_stream(cfg.seed, 1, c).rng();
            let idx = ok(sample_batch_indices(&data.shards[c], cfg.algorithm.batch_size, &mut rng))?;
            let batch = ok(data.train.gather(&idx))?;
            let (_, cache) = ok(forward(&start, batch.features.view(), Mode::Train))?;
            let g = ok(backward(&start, &cache, &batch.labels))?;
            for (acc, gs) in mean_grad.iter_mut().zip(g.slices()) {
                for (a, &v) in acc.iter_mut().zip(gs) {
                    *a += f64::from(v) / s;
                }
            }
            let mut m = start.clone();
            ok(update_running_stats(&mut m, &cache))?;
            for (acc, st) in mean_stats.iter_mut().zip(m.running_stats()) {
                for (a, &v) in acc.iter_mut().zip(st) {
                    *a += f64::from(v) / s;
                }
            }
        }
        for ((p0, p1), g) in start.trainable().into_iter().zip(state.global.trainable()).zip(&mean_grad) {
            for ((&a, &b), &g) in p0.iter().zip(p1).zip(g) {
                let expect = f64::from(a) - f64::from(lr) * g;
                let d = (f64::from(b) - expect).abs();
                worst = worst.max(d);
                ensure!(d <= 1e-6, "seed {seed}: parameter off by {d:e}");
            }
        }
        for (st, want) in state.global.running_stats().into_iter().zip(&mean_stats) {
            for (&v, &w) in st.iter().zip(want) {
                ensure!((f64::from(v) - w).abs() <= 1e-6, "seed {seed}: running statistic off");
            }
        }
    }
    Ok(format!("5 seeds x 6 clients, max deviation {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 4. IST round trip

fn criterion_4() -> Outcome {
    let mut rng = RngStream::new(4).derive("roundtrip").rng();
    for case in 0..1000 {
        let n2 = rng.random_range(1..=48);
        let s = rng.random_range(1..=n2);
        let dims = ok(MlpDims::new(rng.random_range(1..5), n2, rng.random_range(1..5)))?;
        let model = random_model(dims, &mut rng);
        let asn = ok(partition(n2, s, case, &mut rng))?;
        let subnets = (0..s).map(|site| extract(&model, &asn, site)).collect::<Result<Vec<_>, _>>();
        let subnets = ok(subnets)?;
        let mut seen = vec![0u32; n2];
        for sub in &subnets {
            ensure!(!sub.neurons.is_empty(), "case {case}: empty site");
            for &n in &sub.neurons {
                seen[n] += 1;
            }
        }
        ensure!(seen.iter().all(|&c| c == 1), "case {case}: cover not disjoint-exhaustive");
        let sizes: Vec<usize> = subnets.iter().map(|s| s.neurons.len()).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        ensure!(hi - lo <= 1, "case {case}: unbalanced sizes {sizes:?}");
        let back = ok(reassemble(&subnets, &asn, &vec![1.0; s]))?;
        ensure!(bits(&back) == bits(&model), "case {case}: round trip not bit-exact (n2={n2}, s={s})");
    }
    Ok("1000 random (n2, s) cases bit-exact, covers disjoint and exhaustive".into())
}

// ---------------------------------------------------------------------------
// 5. cost model identities

fn arch(n1: usize, n2: usize, n3: usize, b: usize, s: usize) -> Result<ArchSpec, String> {
    ok(ArchSpec::new(ok(MlpDims::new(n1, n2, n3))?, b, s))
}

fn criterion_5() -> Outcome {
    let a = arch(3072, 1000, 200, 32, 10)?;
    for kind in [AlgorithmKind::FedAvg, AlgorithmKind::FedProx, AlgorithmKind::FedAdam, AlgorithmKind::FedNova] {
        let f = flops_per_local_batch(&a, kind);
        ensure!(f == 431_616_000.0, "{kind}: {f} FLOPs per batch");
    }
    let moon = flops_per_local_batch(&a, AlgorithmKind::Moon);
    ensure!(moon - 431_616_000.0 == 393_216_000.0, "MOON extra {}", moon - 431_616_000.0);
    let ist = flops_per_local_batch(&arch(3072, 3000, 200, 32, 10)?, AlgorithmKind::Ist);
    ensure!(ist == 129_484_800.0, "IST per-site FLOPs {ist}");
    let per_round = flops_per_round(&a, AlgorithmKind::FedAvg, 25);
    ensure!(per_round == 107_904_000_000.0, "FedAvg round at 25 local steps: {per_round}");

    let p = MlpDims::new(3072, 1000, 200).unwrap().parameter_count() as u64;
    for s in 1..=40 {
        let avg = bytes_per_round(&arch(3072, 1000, 200, 32, s)?, AlgorithmKind::FedAvg);
        ensure!(avg == 2 * s as u64 * 4 * p, "averaging bytes at s={s}: {avg}");
        if 3 * s <= 1000 {
            let tripled = bytes_per_round(&arch(3072, 1000, 200, 32, 3 * s)?, AlgorithmKind::FedAvg);
            ensure!(tripled == 3 * avg, "tripling s={s} gave {tripled} vs {}", 3 * avg);
        }
        let ist = bytes_per_round(&arch(3072, 1000, 200, 32, s)?, AlgorithmKind::Ist);
        let b2_term = 2 * (s as u64 - 1) * 200 * 4;
        ensure!(ist == 2 * 4 * p + b2_term, "IST bytes at s={s}: {ist}");
    }
    let ist10 = bytes_per_round(&a, AlgorithmKind::Ist) as f64;
    let b2_share = (2 * 9 * 200 * 4) as f64 / ist10;
    ensure!(b2_share < 1e-3, "b2 replication is {b2_share:e} of IST traffic at s=10");
    Ok(format!("per-batch and per-round identities exact; b2 share of IST bytes at s=10 is {b2_share:.2e}"))
}

// ---------------------------------------------------------------------------
// 6. evaluation protocol

fn hand_series(acc: &[f64], cost: f64) -> MetricSeries {
    MetricSeries {
        points: acc
            .iter()
            .enumerate()
            .map(|(i, &a)| MetricPoint {
                round: i + 1,
                accuracy: a,
                cum_flops: cost * (i + 1) as f64,
                cum_bytes: cost * (i + 1) as f64,
            })
            .collect(),
    }
}

fn criterion_6() -> Outcome {
    let open = Budgets {
        flops: 1e300,
        bytes: 1e300,
        max_rounds: usize::MAX,
    };
    ensure!(windowed_accuracy(&[0.5; 15], WINDOW) == vec![0.5; 15], "constant window");
    ensure!(windowed_accuracy(&[0.37], WINDOW) == vec![0.37], "single-entry window");
    let mut nine_zeros = vec![0.0; 9];
    nine_zeros.push(1.0);
    ensure!((windowed_accuracy(&nine_zeros, WINDOW)[9] - 0.1).abs() < 1e-12, "ten-round mean");
    ensure!(final_accuracy(&[0.7; 30], WINDOW) == 0.7, "constant final");
    let mut spike = vec![0.2; 20];
    spike.push(0.9);
    spike.extend([0.2; 20]);
    ensure!((final_accuracy(&spike, WINDOW) - 0.27).abs() < 1e-12, "spike final");

    let rising = hand_series(&[0.1, 0.9, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5], 10.0);
    let c = cost_to_target(&rising, 0.5, CostKind::Flops, STREAK, &open, StreakBasis::Windowed);
    ensure!(c == CostToTarget::Reached(60.0), "streak bookkeeping gave {c:?}");
    let above = hand_series(&[0.9; 10], 1.0);
    ensure!(
        cost_to_target(&above, 0.5, CostKind::Bytes, STREAK, &open, StreakBasis::Windowed)
            == CostToTarget::Reached(5.0),
        "immediate streak"
    );
    ensure!(
        cost_to_target(&above, 0.95, CostKind::Flops, STREAK, &open, StreakBasis::Windowed).is_fail(),
        "unreachable target must FAIL"
    );
    let tight = Budgets {
        flops: 4.5,
        bytes: 1e300,
        max_rounds: usize::MAX,
    };
    ensure!(
        cost_to_target(&above, 0.5, CostKind::Flops, STREAK, &tight, StreakBasis::Windowed).is_fail(),
        "budget exhaustion before the streak must FAIL"
    );

    let report = ok(build_report(
        &[
            ("a".to_string(), hand_series(&[0.8; 12], 1.0)),
            ("b".to_string(), hand_series(&[0.6; 12], 1.0)),
        ],
        &open,
        StreakBasis::Windowed,
    ))?;
    ensure!((report.target_accuracy - 0.72).abs() < 1e-12, "target {}", report.target_accuracy);
    ensure!(report.methods[0].gflops_to_target == CostToTarget::Reached(5e-9), "method a cost");
    ensure!(report.methods[1].gflops_to_target.is_fail() && report.methods[1].gb_to_target.is_fail(), "b FAIL");
    Ok("windows, finals, streaks, FAIL on unreachable and on budget exhaustion, report target".into())
}

// ---------------------------------------------------------------------------
// 7 and 9. desk-scale orderings

const BUDGET_BOUND: Budgets = Budgets {
    flops: 5e11,
    bytes: 5e9,
    max_rounds: 100_000,
};

fn desk_contest(seed: u64, alpha: f64) -> Result<ThresholdReport, String> {
    let (train, test) = ok(generate_synthetic(20, 64, 500, 100, 3.0, seed))?;
    let data = ok(FederatedData::partitioned(train, test, 100, alpha, 500, seed))?;
    let mut runs = Vec::new();
    for (name, kind) in [("ist", AlgorithmKind::Ist), ("fedavg", AlgorithmKind::FedAvg), ("fedprox", AlgorithmKind::FedProx)] {
        let mut cfg = SimulationConfig::new(preset_config(kind, Preset::Flops));
        cfg.seed = seed;
        cfg.budgets = BUDGET_BOUND;
        let out = ok(run_experiment(&cfg, &data))?;
        runs.push((name.to_string(), MetricSeries::from_history(&out.history)));
    }
    ok(build_report(&runs, &BUDGET_BOUND, StreakBasis::Windowed))
}

/// `FAIL` ranks above every finite cost.
fn cost_rank(c: CostToTarget) -> f64 {
    c.value().unwrap_or(f64::INFINITY)
}

fn describe(r: &ThresholdReport) -> String {
    r.methods
        .iter()
        .map(|m| {
            let unit = |c: CostToTarget, u: &str| match c.value() {
                Some(v) => format!("{v:.3}{u}"),
                None => "FAIL".to_string(),
            };
            format!("{} {}/{}", m.method, unit(m.gflops_to_target, "G"), unit(m.gb_to_target, "GB"))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

struct Desk {
    skewed_seed1: Option<ThresholdReport>,
}

fn criterion_7(desk: &mut Desk) -> Outcome {
    let mut passes = 0;
    let mut fails = 0;
    let mut notes = Vec::new();
    for seed in 1..=5u64 {
        let r = desk_contest(seed, 0.01)?;
        let get = |m: &str| r.get(m).cloned().ok_or_else(|| format!("missing {m}"));
        let (ist, avg, prox) = (get("ist")?, get("fedavg")?, get("fedprox")?);
        let a = !ist.gflops_to_target.is_fail() && cost_rank(ist.gflops_to_target) < cost_rank(avg.gflops_to_target);
        let b = !prox.gflops_to_target.is_fail() && cost_rank(prox.gflops_to_target) < cost_rank(avg.gflops_to_target);
        let c = !ist.gb_to_target.is_fail() && cost_rank(ist.gb_to_target) <= cost_rank(avg.gb_to_target);
        let pass = a && b && c;
        notes.push(format!("seed {seed} {} [{}]", if pass { "ok" } else { "no" }, describe(&r)));
        if seed == 1 {
            desk.skewed_seed1 = Some(r);
        }
        if pass {
            passes += 1;
        } else {
            fails += 1;
        }
        // The verdict is settled once three seeds agree either way.
        if passes >= 3 || fails >= 3 {
            break;
        }
    }
    let summary = notes.join("; ");
    ensure!(passes >= 3, "{passes} passing seeds: {summary}");
    Ok(format!("{passes} passing seeds: {summary}"))
}

fn criterion_9(desk: &mut Desk) -> Outcome {
    let iid = desk_contest(1, 1e6)?;
    for m in &iid.methods {
        ensure!(
            !m.gflops_to_target.is_fail() && !m.gb_to_target.is_fail(),
            "{} fails to reach the i.i.d. target: {}",
            m.method,
            describe(&iid)
        );
    }
    let skewed = match desk.skewed_seed1.take() {
        Some(r) => r,
        None => desk_contest(1, 0.01)?,
    };
    let mut ratios = Vec::new();
    let mut best_finite = 0f64;
    let mut any = false;
    for m in &iid.methods {
        let base = m.gflops_to_target.value().unwrap_or(f64::NAN);
        let sk = skewed.get(&m.method).map(|s| s.gflops_to_target).unwrap_or(CostToTarget::Fail);
        match sk.value() {
            Some(v) => {
                let ratio = v / base;
                best_finite = best_finite.max(ratio);
                any |= ratio >= 5.0;
                ratios.push(format!("{} x{ratio:.1}", m.method));
            }
            None => {
                any = true;
                ratios.push(format!("{} FAIL when skewed", m.method));
            }
        }
    }
    ensure!(any, "no method slowed by 5x: {}", ratios.join(", "));
    Ok(format!(
        "i.i.d. target {:.3} reached by all; skewed/iid GFLOPs {}; largest finite ratio {best_finite:.1}",
        iid.target_accuracy,
        ratios.join(", ")
    ))
}

// ---------------------------------------------------------------------------
// 8. MOON overhead

fn criterion_8() -> Outcome {
    let data = tiny_federation(8, 10, 0.5, 30);
    let mut charged = Vec::new();
    for kind in [AlgorithmKind::Moon, AlgorithmKind::FedProx] {
        let mut algo = AlgorithmConfig::new(kind).with_local_rounds(3).with_mu(0.5);
        algo.momentum = 0.9;
        let cfg = small_cfg(algo, 8, 4);
        let mut state = ok(FederationState::new(&cfg, &data))?;
        let mut per_round = Vec::new();
        for _ in 0..4 {
            let before = state.cost.flops;
            ok(run_round(&mut state, &cfg, &data, cfg.algorithm.lr, false))?;
            per_round.push(state.cost.flops - before);
        }
        charged.push((per_round, state.global.dims()));
    }
    let d = charged[0].1;
    let (n1, n2, n3) = (d.input as f64, d.hidden as f64, d.classes as f64);
    let num = 8.0 * n1 * n2 + 6.0 * n2 * n3;
    let den = 4.0 * n1 * n2 + 6.0 * n2 * n3;
    for (m, p) in charged[0].0.iter().zip(&charged[1].0) {
        ensure!(m * den == p * num, "round ratio {} vs {}", m / p, num / den);
    }
    // Full-size feature vectors with 1000 hidden units; the ratio depends on
    // the class count, reaching about 1.95 at 100 classes.
    let ratio_at = |n3: usize| {
        let a = ArchSpec::new(MlpDims::new(3072, 1000, n3).unwrap(), 32, 10).unwrap();
        flops_per_round(&a, AlgorithmKind::Moon, 5) / flops_per_round(&a, AlgorithmKind::FedProx, 5)
    };
    let (r100, r200) = (ratio_at(100), ratio_at(200));
    let want = |n3: f64| (8.0 * 3072.0 * 1000.0 + 6.0 * 1000.0 * n3) / (4.0 * 3072.0 * 1000.0 + 6.0 * 1000.0 * n3);
    ensure!((r100 - want(100.0)).abs() < 1e-12 && (r200 - want(200.0)).abs() < 1e-12, "closed form");
    ensure!((r100 - 1.95).abs() < 0.005, "ratio at 100 classes {r100}");
    Ok(format!(
        "engine rounds match {:.4} exactly; {r100:.4} at 100 classes, {r200:.4} at 200",
        num / den
    ))
}

// ---------------------------------------------------------------------------
// 10. similarity diagnostic

fn criterion_10() -> Outcome {
    // Identical trainers: one client holding one sample, batch of one, one
    // step, so the federated round and the centralized epoch see the same batch.
    let (train, test) = ok(generate_synthetic(4, 6, 10, 5, 3.0, 10))?;
    let shard = ClientShard {
        client_id: 0,
        indices: vec![7],
        histogram: {
            let mut h = vec![0; 4];
            h[train.labels[7]] = 1;
            h
        },
    };
    let data = ok(FederatedData::new(train, test, vec![shard], 10))?;
    let mut algo = AlgorithmConfig::new(AlgorithmKind::FedAvg).with_local_rounds(1);
    algo.batch_size = 1;
    let mut cfg = SimulationConfig::new(algo);
    cfg.participation = 1.0;
    cfg.hidden = 8;
    let central = CentralConfig {
        lr: cfg.algorithm.lr,
        momentum: cfg.algorithm.momentum,
        batch_size: 1,
        seed: 10,
    };
    let mut rng = RngStream::new(10).derive("checkpoints").rng();
    let dims = ok(MlpDims::new(6, 8, 4))?;
    let checkpoints: Vec<MlpModel> = (0..5).map(|_| random_model(dims, &mut rng)).collect();
    let pts = ok(run_similarity_study(&checkpoints, &cfg, 1, &data, &central))?;
    for p in &pts {
        ensure!((p.similarity - 1.0).abs() <= 1e-6, "identical trainers gave {}", p.similarity);
    }
    let mut still = cfg.clone();
    still.algorithm.lr = 0.0;
    let frozen = CentralConfig { lr: 0.0, ..central };
    let zero = ok(run_similarity_study(&checkpoints, &still, 1, &data, &frozen))?;
    ensure!(zero.iter().all(|p| p.similarity == 0.0), "lr=0 must report 0");

    let start = MlpModel::zeros(dims);
    let mut fed = start.clone();
    fed.w1[[0, 0]] = 1.0;
    let mut cen = start.clone();
    cen.b2[0] = 1.0;
    let orth = ok(direction_similarity(&start, &fed, &cen))?;
    ensure!(orth == 0.0, "orthogonal displacements gave {orth}");
    cen.w1[[0, 0]] = 1.0;
    let diag = ok(direction_similarity(&start, &fed, &cen))?;
    ensure!((diag - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12, "(1,0)x(1,1) gave {diag}");

    let mut exp = ExperimentConfig::new(AlgorithmKind::FedAvg, Some(Preset::Flops));
    exp.data.alpha = 0.01;
    exp.similarity.epochs = 20;
    ok(exp.validate())?;
    let desk = ok(exp.data.load())?;
    let rows = ok(similarity_study(&exp, &desk))?;
    let mut means = Vec::new();
    for (method, pts) in &rows {
        let mean = pts.iter().map(|p| p.similarity).sum::<f64>() / pts.len() as f64;
        means.push(format!("{method} {mean:+.3}"));
        ensure!(mean > 0.0, "{method} mean similarity {mean}");
    }
    Ok(format!("identical 1.0, orthogonal 0, desk means: {}", means.join(", ")))
}

// ---------------------------------------------------------------------------
// 11. CLI determinism across thread counts

const DETERMINISM_CONFIG: &str = "\
[experiment]
name = NAME
algorithm = ALGO
preset = flops
seed = 5
participation = 0.5

[data]
classes = 10
dim = 32
train_per_class = 100
test_per_class = 40
data_seed = 5
n_clients = 20
alpha = 0.1
samples_per_client = 100

[budgets]
max_rounds = 60
";

fn run_cli(config: &Path, out: &Path, threads: &str) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_fedsim"))
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("FEDSIM_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        status.status.success(),
        "fedsim run failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    Ok(())
}

fn criterion_11() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let mut compared = 0;
    for algo in ["fedavg", "ist", "moon"] {
        let cfg = dir.path().join(format!("{algo}.ini"));
        ok(std::fs::write(&cfg, DETERMINISM_CONFIG.replace("NAME", algo).replace("ALGO", algo)))?;
        let outs: Vec<_> = ["1", "1", "4"]
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let out = dir.path().join(format!("{algo}-{i}"));
                run_cli(&cfg, &out, t).map(|_| out)
            })
            .collect::<Result<_, _>>()?;
        for file in [format!("{algo}.history.csv"), format!("{algo}.summary.json")] {
            let first = ok(std::fs::read(outs[0].join(&file)))?;
            ensure!(!first.is_empty(), "{file} is empty");
            for o in &outs[1..] {
                ensure!(ok(std::fs::read(o.join(&file)))? == first, "{file} differs in {}", o.display());
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} artifacts byte-identical across 3 runs (FEDSIM_THREADS=1,1,4)"))
}

// ---------------------------------------------------------------------------

fn run(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let took = t.elapsed();
    let (pass, detail) = match result {
        Ok(d) if took <= limit => (true, d),
        Ok(d) => (false, format!("over time limit {limit:?}: {d}")),
        Err(e) => (false, e),
    };
    let line = format!(
        "criterion {id:>2} {:<4} {name} ({:.1}s): {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        took.as_secs_f64()
    );
    // Bypass the test harness' output capture.
    let _ = std::io::stdout().write_all(line.as_bytes());
    let _ = std::io::stdout().flush();
    pass
}

fn main() {
    let filter: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let wanted = |id: usize| filter.is_empty() || filter.contains(&id);
    let mut desk = Desk { skewed_seed1: None };
    let mut results = Vec::new();
    let min = |m: u64| Duration::from_secs(60 * m);
    let secs = Duration::from_secs;
    if wanted(1) {
        results.push(run(1, "gradient check", secs(30), criterion_1));
    }
    if wanted(2) {
        results.push(run(2, "algorithm reductions", secs(60), criterion_2));
    }
    if wanted(3) {
        results.push(run(3, "data-parallel equivalence", secs(10), criterion_3));
    }
    if wanted(4) {
        results.push(run(4, "IST round trip", secs(10), criterion_4));
    }
    if wanted(5) {
        results.push(run(5, "cost identities", secs(1), criterion_5));
    }
    if wanted(6) {
        results.push(run(6, "evaluation protocol", secs(1), criterion_6));
    }
    if wanted(7) {
        results.push(run(7, "skewed ordering", min(15), || criterion_7(&mut desk)));
    }
    if wanted(8) {
        results.push(run(8, "MOON overhead ratio", secs(1), criterion_8));
    }
    if wanted(9) {
        results.push(run(9, "i.i.d. vs skewed", min(15), || criterion_9(&mut desk)));
    }
    if wanted(10) {
        results.push(run(10, "similarity diagnostic", min(10), criterion_10));
    }
    if wanted(11) {
        results.push(run(11, "CLI determinism", min(5), criterion_11));
    }
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
