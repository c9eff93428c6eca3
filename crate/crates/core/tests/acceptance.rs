//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line is printed. Pass criterion
//! numbers to run a subset: `cargo test --test acceptance -- 3 5`.
//! MNIST is read from `$PARSPIKE_DATA_DIR`, else `<workspace>/data/mnist`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use parspike::analysis::{
    check_alif_identity, check_prf_lif_identity, check_stationary_variance, estimate_energy,
    listops_layers, settle_steps, simulate_frequency_response, AlifCoupling, EnergyModel,
    ModelFamily,
};
use parspike::bench::{bench, speedups, BenchConfig};
use parspike::equiv::{run_equivalence_suite, EquivConfig, NeuronChoice};
use parspike::io::{ingest_mnist, locate_mnist, DATA_DIR_ENV};
use parspike::neurons::{alif_sequential, lif_sequential, AlifParams, LifParams};
use parspike::seqcore::{SeqKind, SequenceBatch};
use parspike::traingrad::{
    impulse_task, sdtcm_gradient_check, train, Architecture, GradCheckConfig, Model, NeuronKind,
    TrainConfig,
};

const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn lif_equivalence() -> Outcome {
    let r = run_equivalence_suite(NeuronChoice::Lif, &EquivConfig::default(), SEED).unwrap();
    outcome(
        r.passed,
        format!(
            "{} cases, {} spike mismatches, max membrane delta {:.2e}, failing seeds {:?}",
            r.cases, r.spike_mismatches, r.max_membrane_delta, r.failing_seeds
        ),
    )
}

fn prf_equivalence() -> Outcome {
    let r = run_equivalence_suite(NeuronChoice::Prf, &EquivConfig::default(), SEED).unwrap();
    outcome(
        r.passed,
        format!(
            "{} cases (sequential, parallel, deployment), {} spike mismatches, max potential delta {:.2e}, failing seeds {:?}",
            r.cases, r.spike_mismatches, r.max_membrane_delta, r.failing_seeds
        ),
    )
}

fn lif_alif() -> Outcome {
    let r = check_alif_identity(1000, 512, AlifCoupling::UnitDecay, SEED).unwrap();
    let matched = check_alif_identity(1000, 512, AlifCoupling::MatchedDecay, SEED).unwrap();
    let x = SequenceBatch::from_lane(vec![1.0; 3], SeqKind::Current).unwrap();
    let beta = 0.5;
    let (lif, _) = lif_sequential(&x, &LifParams::new(vec![beta], 1.0).unwrap()).unwrap();
    let alif = alif_sequential(
        &x,
        &AlifParams {
            v_th: 1.0,
            beta,
            rho: 1.0,
        },
        beta,
    )
    .unwrap();
    outcome(
        r.passed(),
        format!(
            "rho = 1: {} of {} cases differ (c = (1, 1, 1), beta 0.5: lif {:?}, alif {:?}); rho = beta: {} differ",
            r.mismatched_cases,
            r.cases,
            lif.data(),
            alif.data(),
            matched.mismatched_cases
        ),
    )
}

fn prf_lif_identity() -> Outcome {
    let r = check_prf_lif_identity(100, 512, SEED).unwrap();
    outcome(
        r.max_abs_diff == 0.0 && r.max_imag == 0.0,
        format!(
            "100 cases, max |Re u - u_lif| {:e}, max |Im u| {:e}",
            r.max_abs_diff, r.max_imag
        ),
    )
}

fn stationary_variance() -> Outcome {
    let (delta, tau) = (0.5, 4.0);
    let steps = settle_steps(delta, tau);
    let r = check_stationary_variance(tau, delta, 1.0, 100_000, steps, SEED).unwrap();
    let transient = (-2.0 * delta * steps as f64 / tau).exp();
    let small = check_stationary_variance(100.0, 1.0, 1.0, 2, 1, SEED).unwrap();
    let gap = (small.approx_var - small.exact_var).abs() / small.exact_var;
    let values_ok = (r.exact_var - 1.1302).abs() < 5e-5 && r.approx_var == 1.0;
    outcome(
        r.z_score() <= 3.0 && transient < 1e-3 && gap <= 0.01 && values_ok,
        format!(
            "empirical {:.5} vs exact {:.5} ({:.2} SE, T = {steps}); approx {:.4}; delta/tau = 0.01 gap {:.5}",
            r.empirical_var,
            r.exact_var,
            r.z_score(),
            r.approx_var,
            gap
        ),
    )
}

fn frequency_peak() -> Outcome {
    let (tau, theta, delta) = (2.0, 0.5, 0.1);
    let omegas: Vec<f64> = (0..=100).map(|k| theta * k as f64 / 50.0).collect();
    let r = simulate_frequency_response(tau, theta, delta, &omegas, 4096).unwrap();
    let (arg, peak) =
        r.magnitude.iter().enumerate().fold(
            (0, f64::MIN),
            |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
        );
    let rel = (peak - tau).abs() / tau;
    outcome(
        arg == 50 && rel <= 0.1,
        format!(
            "argmax omega {:.3} (theta {theta}), peak {peak:.4} vs tau {tau} ({:.2}% off)",
            omegas[arg],
            100.0 * rel
        ),
    )
}

fn gradients() -> Outcome {
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for bidirectional in [false, true] {
        let r = sdtcm_gradient_check(&GradCheckConfig {
            bidirectional,
            seed: SEED,
            ..GradCheckConfig::default()
        })
        .unwrap();
        worst = worst.max(r.max_rel_error);
        details.push(format!(
            "{}: {} values, max rel {:.2e} at {}[{}]",
            if bidirectional {
                "bidirectional"
            } else {
                "causal"
            },
            r.checked,
            r.max_rel_error,
            r.worst.0,
            r.worst.1
        ));
    }
    outcome(worst <= 1e-5, details.join("; "))
}

fn speedup() -> Outcome {
    let records = bench(&BenchConfig::default(), SEED).unwrap();
    let sp = speedups(&records);
    let faster = sp.iter().all(|&(_, s)| s > 1.0);
    let monotone = sp.windows(2).all(|w| w[1].1 >= w[0].1);
    let at_1024 = sp.iter().find(|(l, _)| *l == 1024).map_or(0.0, |p| p.1);
    outcome(
        faster && monotone && at_1024 >= 2.0,
        format!(
            "sequential/parallel total time {} on {} thread(s)",
            sp.iter()
                .map(|(l, s)| format!("L={l}: {s:.3}x"))
                .collect::<Vec<_>>()
                .join(", "),
            rayon::current_num_threads()
        ),
    )
}

fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn long_range() -> Outcome {
    let cfg = TrainConfig {
        epochs: 50,
        seed: 7,
        ..TrainConfig::default()
    };
    let train_set = impulse_task(512, 256, 1).unwrap();
    let test_set = impulse_task(256, 256, 2).unwrap();
    let best = |arch| {
        let mut m = Model::new(cfg.model_config(arch, 1, 2), 11).unwrap();
        train(&mut m, &train_set, Some(&test_set), &cfg)
            .unwrap()
            .iter()
            .filter_map(|e| e.test_accuracy)
            .fold(0.0, f64::max)
    };
    let prf = best(Architecture::FeedForward(NeuronKind::Prf));
    let lif = best(Architecture::FeedForward(NeuronKind::Lif { beta: 0.5 }));

    let dir = data_dir();
    let split = locate_mnist(&dir, "train").or_else(|| locate_mnist(&dir, "t10k"));
    let (smoke_ok, smoke) = match split {
        None => (false, format!("no MNIST files in {}", dir.display())),
        Some((images, labels)) => {
            let data = ingest_mnist(&images, &labels, None, Some(10_000)).unwrap();
            let smoke_cfg = TrainConfig {
                epochs: 5,
                seed: 7,
                ..TrainConfig::default()
            };
            let mut m = Model::new(
                smoke_cfg.model_config(Architecture::FeedForward(NeuronKind::Prf), 1, 10),
                11,
            )
            .unwrap();
            let losses: Vec<f64> = train(&mut m, &data, None, &smoke_cfg)
                .unwrap()
                .iter()
                .map(|e| e.loss)
                .collect();
            (
                data.len() == 10_000 && losses.windows(2).all(|w| w[1] < w[0]),
                format!(
                    "sMNIST {} samples, loss {}",
                    data.len(),
                    losses
                        .iter()
                        .map(|l| format!("{l:.4}"))
                        .collect::<Vec<_>>()
                        .join(" > ")
                ),
            )
        }
    };
    outcome(
        prf >= 0.95 && lif <= 0.70 && smoke_ok,
        format!(
            "impulse L=256, 50 epochs: PRF best {prf:.3}, LIF(beta 0.5) best {lif:.3}; {smoke}"
        ),
    )
}

fn energy_ratio() -> Outcome {
    let m = EnergyModel::default();
    let layers = listops_layers(64);
    let ours = estimate_energy(ModelFamily::Ours, &layers, 2000, &m).unwrap();
    let s4 = estimate_energy(ModelFamily::S4LegS, &layers, 2000, &m).unwrap();
    let ratio = ours.total_mj / s4.total_mj;
    let reference = 0.075 / 5.104;
    let factor = (ratio / reference).max(reference / ratio);
    outcome(
        ratio <= 0.05 && factor <= 3.0,
        format!(
            "ours {:.4} mJ / S4-LegS {:.4} mJ = {ratio:.4}; reference {reference:.4}, factor {factor:.2}",
            ours.total_mj, s4.total_mj
        ),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            1,
            "lif-equivalence",
            Duration::from_secs(60),
            lif_equivalence,
        ),
        (
            2,
            "prf-equivalence",
            Duration::from_secs(60),
            prf_equivalence,
        ),
        (3, "lif-alif-identity", Duration::from_secs(30), lif_alif),
        (
            4,
            "prf-lif-identity",
            Duration::from_secs(60),
            prf_lif_identity,
        ),
        (
            5,
            "stationary-variance",
            Duration::from_secs(120),
            stationary_variance,
        ),
        (6, "frequency-peak", Duration::from_secs(60), frequency_peak),
        (7, "gradient-check", Duration::from_secs(60), gradients),
        (8, "parallel-speedup", Duration::from_secs(600), speedup),
        (9, "long-range", Duration::from_secs(1200), long_range),
        (10, "energy-ratio", Duration::from_secs(1), energy_ratio),
    ];
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = Vec::new();
    for (id, name, limit, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let passed = o.passed && took <= limit;
        println!(
            "criterion {id:>2} {name:<20} {} [{:.1} s, limit {} s] {}",
            if passed { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            limit.as_secs(),
            o.detail
        );
        if !passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
