//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any
//! fails. Pass criterion numbers to run a subset: `cargo test --test acceptance -- 3 9`.
//!
//! Criteria 5 to 7 run on Cora when `BLINK_CORA_DIR` (or `data/cora` at the workspace
//! root) holds `cora.content` and `cora.cites`, and on the synthetic Cora-shaped graph
//! otherwise. The line says which.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use blink::dataset::{find_content_pair, load_content_format};
use blink::denoiser::{
    bayes_posterior, evidence_likelihoods, log_likelihood, mle_link_probability, posterior, Ablation, MleOptions,
};
use blink::gnn::{loss_and_gradients, Features, Params, Propagation};
use blink::graph::{degree_sequence, sample_beta_model, Adjacency, DegreeSequence, Graph};
use blink::harness::{run_experiment_on, summarize, ExperimentConfig, Mechanism, Summary};
use blink::randomizer::{link_ldp, perturb_graph, sample_laplace, PrivacyBudget};
use blink::reconstruct::{baseline_dprr, baseline_ldpgcn, baseline_rr, baseline_symrr, blink_hard, EstimatedGraph};
use blink::rng::seeded;
use blink::synthetic::{beta_graph, cora_like, BetaGraph};
use fixedbitset::FixedBitSet;
use ndarray::Array2;
use rand::Rng;

type Check = (bool, String);

fn cora() -> (Graph, &'static str) {
    let dirs = std::env::var_os("BLINK_CORA_DIR")
        .map(PathBuf::from)
        .into_iter()
        .chain([PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/cora")]);
    for dir in dirs {
        if let Some((content, cites)) = find_content_pair(&dir, "cora") {
            let ds = load_content_format(&content, &cites).expect("Cora files present but unreadable");
            return (ds.graph, "Cora");
        }
    }
    (cora_like(0), "synthetic Cora stand-in")
}

fn logistic(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

fn group(summary: &[Summary], m: Mechanism, eps: f64, delta: f64) -> &Summary {
    summary
        .iter()
        .find(|s| s.mechanism == m && s.epsilon == eps && s.delta == delta)
        .unwrap_or_else(|| panic!("no group for {m} eps={eps} delta={delta}"))
}

/// Posterior against brute-force enumeration of the joint over (link, bit_ij, bit_ji).
fn criterion_1() -> Check {
    let priors = [1e-3, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999];
    let flips = [1e-4, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.45, 0.5];
    let mut worst: f64 = 0.0;
    for &p in &priors {
        for &f in &flips {
            // joint[a][b1][b2] = P(A = a, bit_ij = b1, bit_ji = b2)
            let mut joint = [[[0.0; 2]; 2]; 2];
            for (a, slab) in joint.iter_mut().enumerate() {
                let pa = if a == 1 { p } else { 1.0 - p };
                for (b1, row) in slab.iter_mut().enumerate() {
                    for (b2, cell) in row.iter_mut().enumerate() {
                        let keep = |b: usize| if b == a { 1.0 - f } else { f };
                        *cell = pa * keep(b1) * keep(b2);
                    }
                }
            }
            for b1 in 0..2 {
                for b2 in 0..2 {
                    let oracle = joint[1][b1][b2] / (joint[0][b1][b2] + joint[1][b1][b2]);
                    let (q, q_prime) = evidence_likelihoods(b1 == 1, b2 == 1, f);
                    let got = bayes_posterior(p, q, q_prime);
                    worst = worst.max((got - oracle).abs());
                }
            }
        }
    }
    (worst <= 1e-12, format!("9x9x4 grid, max |P - oracle| = {worst:.2e} (tol 1e-12)"))
}

fn criterion_2() -> Check {
    // epsilon = 2 with half on each channel: eps_a = eps_d = 1.
    let budget = PrivacyBudget::new(2.0, 0.5).unwrap();
    let f = 1.0 / (1.0 + std::f64::consts::E);
    let mut rng = seeded(2024);
    let mut row = FixedBitSet::with_capacity(1000);
    for j in (0..1000).step_by(2) {
        row.insert(j);
    }
    let mut flips = 0usize;
    for _ in 0..1000 {
        let msg = link_ldp(&row, &budget, &mut rng);
        flips += (&msg.noisy_row ^ &row).count_ones(..);
    }
    let bits = 1e6;
    let sigma = (bits * f * (1.0 - f)).sqrt();
    let z = (flips as f64 - bits * f) / sigma;

    let short = FixedBitSet::with_capacity(8);
    let (mut abs_sum, mut pos_sum) = (0.0, 0.0);
    let draws = 1_000_000;
    for _ in 0..draws {
        let noise = link_ldp(&short, &budget, &mut rng).noisy_degree.unwrap();
        abs_sum += noise.abs();
        pos_sum += noise.max(0.0);
    }
    let mean_abs = abs_sum / draws as f64;
    let mean_pos = pos_sum / draws as f64;
    let abs_rel = (mean_abs - 1.0).abs();
    let pos_rel = (mean_pos - 0.5).abs() / 0.5;
    (
        z.abs() <= 3.0 && abs_rel <= 0.01 && pos_rel <= 0.02,
        format!(
            "flip rate {:.5} vs {f:.5} ({z:+.2} sigma, tol 3); E|l| {mean_abs:.4} vs 1 ({:.2}%, tol 1%); E[l+] {mean_pos:.4} vs 0.5 ({:.2}%, tol 2%)",
            flips as f64 / bits,
            100.0 * abs_rel,
            100.0 * pos_rel
        ),
    )
}

fn criterion_3() -> Check {
    let opts = MleOptions::default();
    let mut worst_regular: f64 = 0.0;
    for (n, d) in [(5usize, 2.0), (50, 7.0), (500, 20.0)] {
        let fit = mle_link_probability(&DegreeSequence(vec![d; n]), &opts).unwrap();
        let target = d / (n - 1) as f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst_regular = worst_regular.max((fit.prior_prob(i, j) - target).abs());
                }
            }
        }
    }
    let mut rng = seeded(33);
    let n = 200;
    let beta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let adj = sample_beta_model(&beta, 34).unwrap();
    let fit = mle_link_probability(&degree_sequence(&adj), &opts).unwrap();
    let mut gap = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            gap += (fit.prior_prob(i, j) - logistic(beta[i] + beta[j])).abs();
        }
    }
    let mean_gap = gap / (n * (n - 1) / 2) as f64;
    (
        worst_regular <= 1e-6 && mean_gap <= 0.05,
        format!("regular n=5/50/500 max error {worst_regular:.2e} (tol 1e-6); beta model n=200 mean |p_hat - p| {mean_gap:.4} (tol 0.05)"),
    )
}

fn criterion_4() -> Check {
    let n = 100;
    let m = 1.0;
    let beta: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { m } else { -m }).collect();
    let truth = degree_sequence(&sample_beta_model(&beta, 4).unwrap());
    let base = log_likelihood(&truth, &beta);
    let mut rng = seeded(44);
    let mut ok = true;
    let mut parts = Vec::new();
    for eps_d in [0.5, 1.0] {
        let draws: Vec<f64> = (0..10_000)
            .map(|_| {
                let noisy = DegreeSequence(truth.values().iter().map(|d| d + sample_laplace(1.0 / eps_d, &mut rng)).collect());
                log_likelihood(&noisy, &beta)
            })
            .collect();
        for a in [2.0, 3.0] {
            let slack = a * (n as f64).sqrt() * m / (eps_d * eps_d);
            let rate = draws.iter().filter(|&&l| base < l - slack).count() as f64 / draws.len() as f64;
            let limit = 1.0 / (a * a) + 0.01;
            ok &= rate <= limit;
            parts.push(format!("eps_d={eps_d} a={a}: {rate:.4} <= {limit:.4}"));
        }
    }
    (ok, format!("violation rates over 10^4 draws, n=100, M=1: {}", parts.join("; ")))
}

fn criterion_5(graph: &Graph, source: &str) -> Check {
    let config = ExperimentConfig {
        mechanisms: vec![Mechanism::BlinkSoft],
        epsilons: (1..=8).map(f64::from).collect(),
        deltas: vec![0.1],
        trials: 10,
        seed: 5,
        ..Default::default()
    };
    let records = run_experiment_on(&config, graph.clone()).unwrap();
    let summary = summarize(&records);
    let mut ok = true;
    let mut maes = Vec::new();
    let mut parts = Vec::new();
    for &eps in &config.epsilons {
        let s = group(&summary, Mechanism::BlinkSoft, eps, 0.1);
        let l1 = s.l1_error.unwrap().mean;
        let bound = s.mae_bound.unwrap();
        ok &= l1 <= 1.05 * bound;
        maes.push(s.mae.unwrap().mean);
        parts.push(format!("{eps}: {l1:.0}/{bound:.0}"));
    }
    let decreasing = maes.windows(2).all(|w| w[1] < w[0]);
    let last = maes[7];
    ok &= decreasing && last < 1e-4;
    (
        ok,
        format!(
            "{source}, delta=0.1, 10 trials; mean l1 / bound by eps [{}] (slack 5%); MAE strictly decreasing: {decreasing}; MAE at eps=8 {last:.2e} (tol 1e-4)",
            parts.join(", ")
        ),
    )
}

fn criterion_6(graph: &Graph, source: &str) -> Check {
    let truth = &graph.adjacency;
    let eps = 64.0;
    let split = perturb_graph(truth, &PrivacyBudget::new(eps, 0.1).unwrap(), 61);
    let full = perturb_graph(truth, &PrivacyBudget::new(eps, 0.0).unwrap(), 62);
    let p = posterior(&split, &MleOptions::default(), Ablation::Full).unwrap();
    let estimates: Vec<EstimatedGraph> = vec![
        blink_hard(&p),
        baseline_rr(&full).unwrap(),
        baseline_symrr(truth, eps, 63).unwrap(),
        baseline_ldpgcn(truth, eps, 64).unwrap(),
        baseline_dprr(&split, 65).unwrap(),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for est in &estimates {
        let exact = est.as_binary() == Some(truth);
        ok &= exact;
        let diff = est.l1_distance(truth) as usize;
        parts.push(format!("{} {}", est.provenance.mechanism, if exact { "exact".into() } else { format!("off by {diff}") }));
    }
    // With no degree channel DPRR's count estimate is exact too; reported, not scored.
    let unsplit = baseline_dprr(&full, 65).unwrap().as_binary() == Some(truth);
    (
        ok,
        format!(
            "{source}, eps=64, delta=0.1: {} (dprr with delta=0: {})",
            parts.join("; "),
            if unsplit { "exact" } else { "not exact" }
        ),
    )
}

fn criterion_7(graph: &Graph, source: &str) -> Check {
    let epsilons: Vec<f64> = (1..=8).map(f64::from).collect();
    let base = ExperimentConfig {
        trials: 5,
        train: true,
        seed: 7,
        ..Default::default()
    };
    let run = |mechanisms: Vec<Mechanism>, epsilons: Vec<f64>, delta: f64| {
        let config = ExperimentConfig {
            mechanisms,
            epsilons,
            deltas: vec![delta],
            ..base.clone()
        };
        summarize(&run_experiment_on(&config, graph.clone()).unwrap())
    };
    let acc = |s: &[Summary], m, eps, delta| 100.0 * group(s, m, eps, delta).test_accuracy.unwrap().mean;

    let grid = run(
        vec![Mechanism::Mlp, Mechanism::Gcn, Mechanism::BlinkHard, Mechanism::Rr, Mechanism::LdpGcn],
        epsilons.clone(),
        0.1,
    );
    let high = run(vec![Mechanism::BlinkSoft, Mechanism::BlinkHybrid], vec![8.0], 0.1);
    let low = run(vec![Mechanism::BlinkHard], vec![1.0], 0.9);

    let mlp = acc(&grid, Mechanism::Mlp, 1.0, 0.1);
    let gcn = acc(&grid, Mechanism::Gcn, 1.0, 0.1);
    let a = gcn >= mlp + 5.0;
    let hard_low = acc(&low, Mechanism::BlinkHard, 1.0, 0.9);
    let b = hard_low >= mlp - 2.0;
    let at8 = [
        acc(&grid, Mechanism::BlinkHard, 8.0, 0.1),
        acc(&high, Mechanism::BlinkSoft, 8.0, 0.1),
        acc(&high, Mechanism::BlinkHybrid, 8.0, 0.1),
    ];
    let c = at8.iter().all(|&x| (x - gcn).abs() <= 3.0);
    let mut d = true;
    let mut by_eps = Vec::new();
    for &eps in &epsilons {
        let hard = acc(&grid, Mechanism::BlinkHard, eps, 0.1);
        let rr = acc(&grid, Mechanism::Rr, eps, 0.1);
        let ldp = acc(&grid, Mechanism::LdpGcn, eps, 0.1);
        d &= hard >= rr.max(ldp) - 1.0;
        by_eps.push(format!("{eps}: {hard:.1}/{rr:.1}/{ldp:.1}"));
    }
    (
        a && b && c && d,
        format!(
            "{source}, 5 trials, accuracy %. (a) gcn {gcn:.1} vs mlp {mlp:.1} [{}]; (b) blink_hard eps=1 delta=0.9 {hard_low:.1} [{}]; (c) hard/soft/hybrid at eps=8 {:.1}/{:.1}/{:.1} [{}]; (d) hard/rr/ldpgcn by eps [{}] [{}]",
            verdict(a),
            verdict(b),
            at8[0],
            at8[1],
            at8[2],
            verdict(c),
            by_eps.join(", "),
            verdict(d)
        ),
    )
}

fn finite_difference_error(prop: &Propagation, n: usize) -> f64 {
    let mut rng = seeded(81);
    let raw = Array2::from_shape_simple_fn((n, 9), || if rng.random::<f64>() < 0.4 { 1.0 } else { 0.0 });
    let x = Features::new(&raw, true);
    let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
    let nodes: Vec<usize> = (0..n).filter(|i| i % 3 != 0).collect();
    let params = Params::init(9, 8, 4, &mut seeded(82));
    let wd = 5e-4;
    let (_, grads) = loss_and_gradients(&params, prop, &x, &labels, &nodes, wd, None);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for block in 0..4 {
        for k in 0..params.slices()[block].len() {
            let mut plus = params.clone();
            plus.slices_mut()[block][k] += h;
            let mut minus = params.clone();
            minus.slices_mut()[block][k] -= h;
            let numeric = (loss_and_gradients(&plus, prop, &x, &labels, &nodes, wd, None).0
                - loss_and_gradients(&minus, prop, &x, &labels, &nodes, wd, None).0)
                / (2.0 * h);
            let analytic = grads.slices()[block][k];
            worst = worst.max((numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6));
        }
    }
    worst
}

fn criterion_8() -> Check {
    let n = 80;
    let mut rng = seeded(80);
    let mut adj = Adjacency::empty(n);
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < 0.05 {
                adj.add_edge(i, j);
            }
            let v: f64 = rng.random();
            w[[i, j]] = v;
            w[[j, i]] = v;
        }
    }
    let binary = finite_difference_error(&Propagation::from_adjacency(&adj), n);
    let weighted = finite_difference_error(&Propagation::from_dense_weights(&w), n);
    (
        binary <= 1e-4 && weighted <= 1e-4,
        format!("every parameter, central differences h=1e-5: binary graph max rel error {binary:.2e}, weighted graph {weighted:.2e} (tol 1e-4)"),
    )
}

fn criterion_9() -> Check {
    let (graph, _) = beta_graph(&BetaGraph::default(), 9).unwrap();
    let epsilons: Vec<f64> = (1..=8).map(f64::from).collect();
    let mae_by = |ablation| {
        let config = ExperimentConfig {
            mechanisms: vec![Mechanism::BlinkSoft],
            epsilons: epsilons.clone(),
            deltas: vec![0.2],
            trials: 10,
            ablation,
            seed: 9,
            ..Default::default()
        };
        let s = summarize(&run_experiment_on(&config, graph.clone()).unwrap());
        epsilons
            .iter()
            .map(|&e| group(&s, Mechanism::BlinkSoft, e, 0.2).mae.unwrap().mean)
            .collect::<Vec<_>>()
    };
    let full = mae_by(Ablation::Full);
    let prior = mae_by(Ablation::PriorOnly);
    let evidence = mae_by(Ablation::EvidenceOnly);
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 0..epsilons.len() {
        ok &= full[k] <= prior[k].min(evidence[k]);
        parts.push(format!("{}: {:.2e}/{:.2e}/{:.2e}", epsilons[k], full[k], prior[k], evidence[k]));
    }
    (ok, format!("beta model n=500, delta=0.2, 10 trials, full/prior/evidence MAE [{}]", parts.join(", ")))
}

fn criterion_10() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let blink = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_blink")).args(args).current_dir(d).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    std::fs::write(
        d.join("config.json"),
        r#"{
  "dataset": {"kind": "beta_model", "n": 300, "seed": 10},
  "mechanisms": ["mlp", "gcn", "blink_hard", "blink_soft", "blink_hybrid", "rr", "symrr", "ldpgcn", "dprr"],
  "epsilons": [1, 4, 8],
  "deltas": [0.1, 0.5],
  "trials": 2,
  "train": true,
  "model": {"epochs": 20},
  "seed": 10
}"#,
    )
    .unwrap();
    blink(&["sweep", "--config", "config.json", "--output-dir", "first"]);
    blink(&["sweep", "--config", "config.json", "--output-dir", "second"]);
    blink(&["sweep", "--config", "config.json", "--workers", "2", "--output-dir", "third"]);
    let first = std::fs::read(d.join("first/runs.csv")).unwrap();
    let same = first == std::fs::read(d.join("second/runs.csv")).unwrap();
    let same_threads = first == std::fs::read(d.join("third/runs.csv")).unwrap();
    (
        same && same_threads,
        format!(
            "three sweeps of a 9-mechanism grid ({} bytes): repeat identical {same}, 2 workers identical {same_threads}",
            first.len()
        ),
    )
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let selected = |k: u32| wanted.is_empty() || wanted.contains(&k);
    let needs_cora = [5, 6, 7].iter().any(|&k| selected(k));
    let (graph, source) = if needs_cora { cora() } else { (cora_like(0), "unused") };

    let criteria: Vec<(u32, Box<dyn Fn() -> Check + '_>)> = vec![
        (1, Box::new(criterion_1)),
        (2, Box::new(criterion_2)),
        (3, Box::new(criterion_3)),
        (4, Box::new(criterion_4)),
        (5, Box::new(|| criterion_5(&graph, source))),
        (6, Box::new(|| criterion_6(&graph, source))),
        (7, Box::new(|| criterion_7(&graph, source))),
        (8, Box::new(criterion_8)),
        (9, Box::new(criterion_9)),
        (10, Box::new(criterion_10)),
    ];
    let mut failed = Vec::new();
    for (k, check) in criteria.iter().filter(|(k, _)| selected(*k)) {
        let start = Instant::now();
        let (ok, detail) = check();
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {k:>2} {} ({secs:.1}s): {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(*k);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
