use std::path::Path;

use anyhow::Context;
use num_complex::Complex64;
use parspike::analysis::{
    check_alif_identity, check_prf_lif_identity, check_stationary_variance, discrete_gain,
    estimate_energy, firing_rate_stats, frequency_response, listops_layers, settle_steps,
    simulate_frequency_response, AlifCoupling, ModelFamily,
};
use parspike::bench::{bench as run_bench, speedups};
use parspike::config::EquivCheck;
use parspike::equiv::{run_equivalence_suite, NeuronChoice};
use parspike::io::emit_report;
use parspike::neurons::{
    lif_parallel, lif_sequential, prf_deploy_run, prf_parallel, prf_sequential, LifParams,
    PrfParams,
};
use parspike::seqcore::{SeqKind, SequenceBatch};
use parspike::traingrad::{
    evaluate, sdtcm_gradient_check, train as fit, Checkpoint, SpikeMode, Tape,
};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

use crate::tasks;
use crate::Ctx;

/// Collects pass/fail lines for one command.
struct Checks {
    all_passed: bool,
    any: bool,
}

impl Checks {
    fn new() -> Self {
        Self {
            all_passed: true,
            any: false,
        }
    }

    fn record(&mut self, name: &str, passed: bool, detail: impl std::fmt::Display) {
        println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
        self.all_passed &= passed;
        self.any = true;
    }

    fn done(self) -> bool {
        self.all_passed
    }
}

fn write<T: Serialize>(ctx: &Ctx, records: &[T]) -> anyhow::Result<()> {
    if let Some(path) = &ctx.out {
        emit_report(records, ctx.format, path)
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {} records to {}", records.len(), path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct SimRow {
    step: usize,
    batch: usize,
    channel: usize,
    input: f64,
    spike: f64,
    membrane: f64,
    membrane_im: f64,
}

fn max_delta(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(1.0, f64::max);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
        / scale
}

pub fn simulate(ctx: &Ctx) -> anyhow::Result<bool> {
    let c = &ctx.config.simulate;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(ctx.seed);
    let n = c.steps * c.batch * c.channels;
    let data: Vec<f64> = (0..n)
        .map(|_| c.input_scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let x = SequenceBatch::new(data, c.steps, c.batch, c.channels, SeqKind::Current)?;
    let mut checks = Checks::new();
    let (spikes, membrane) = match c.neuron {
        NeuronChoice::Lif => {
            let p = LifParams::new(vec![c.beta], c.v_th)?;
            let (s, u) = lif_sequential(&x, &p)?;
            let par = lif_parallel(&x, &p)?;
            let up = par
                .membrane()
                .map(SeqKind::Potential, |v| Complex64::new(v, 0.0));
            let us = u.map(SeqKind::Potential, |v| Complex64::new(v, 0.0));
            checks.record(
                "spikes",
                par.spikes == s,
                "parallel vs sequential spike trains",
            );
            let d = max_delta(up.data(), us.data());
            checks.record(
                "membrane",
                d <= c.tolerance,
                format!("scaled delta {d:.3e}"),
            );
            (s, us)
        }
        NeuronChoice::Prf => {
            let p = PrfParams::new(vec![c.tau], vec![c.theta], vec![c.delta], c.v_th)?;
            let (s, u) = prf_sequential(&x, &p)?;
            let (sp, up) = prf_parallel(&x, &p)?;
            let (sd, ud) = prf_deploy_run(&x, &p)?;
            checks.record(
                "spikes",
                sp == s && sd == s,
                "parallel and deployment vs sequential spike trains",
            );
            let d = max_delta(up.data(), u.data()).max(max_delta(ud.data(), u.data()));
            checks.record(
                "membrane",
                d <= c.tolerance,
                format!("scaled delta {d:.3e}"),
            );
            (s, u)
        }
    };
    let rate = spikes.data().iter().sum::<f64>() / n as f64;
    println!("firing rate {rate:.4}");
    let mut rows = Vec::with_capacity(n);
    for t in 0..c.steps {
        for b in 0..c.batch {
            for ch in 0..c.channels {
                let m = membrane.get(t, b, ch);
                rows.push(SimRow {
                    step: t,
                    batch: b,
                    channel: ch,
                    input: x.get(t, b, ch),
                    spike: spikes.get(t, b, ch),
                    membrane: m.re,
                    membrane_im: m.im,
                });
            }
        }
    }
    write(ctx, &rows)?;
    Ok(checks.done())
}

#[derive(Serialize)]
struct EquivRow {
    check: &'static str,
    case: usize,
    seed: u64,
    steps: usize,
    batch: usize,
    channels: usize,
    spike_mismatches: usize,
    membrane_delta: f64,
}

pub fn equiv(ctx: &Ctx) -> anyhow::Result<bool> {
    let e = &ctx.config.equiv;
    let mut checks = Checks::new();
    let mut rows = Vec::new();
    for check in &e.checks {
        match check {
            EquivCheck::Lif | EquivCheck::Prf => {
                let (neuron, name) = match check {
                    EquivCheck::Lif => (NeuronChoice::Lif, "lif"),
                    _ => (NeuronChoice::Prf, "prf"),
                };
                let r = run_equivalence_suite(neuron, &e.suite, ctx.seed)?;
                let replay = r
                    .failing_seeds
                    .first()
                    .map(|s| format!(", first failing seed {s}"))
                    .unwrap_or_default();
                checks.record(
                    name,
                    r.passed,
                    format!(
                        "{} cases, {} spike mismatches, max membrane delta {:.3e}, {} failing{replay}",
                        r.cases,
                        r.spike_mismatches,
                        r.max_membrane_delta,
                        r.failing_seeds.len()
                    ),
                );
                rows.extend(r.per_case.into_iter().map(|c| EquivRow {
                    check: name,
                    case: c.case,
                    seed: c.seed,
                    steps: c.steps,
                    batch: c.batch,
                    channels: c.channels,
                    spike_mismatches: c.spike_mismatches,
                    membrane_delta: c.membrane_delta,
                }));
            }
            EquivCheck::AlifIdentity => {
                let r = check_alif_identity(
                    e.identity_cases,
                    e.identity_max_steps,
                    e.alif_coupling,
                    ctx.seed,
                )?;
                let detail = match &r.counterexample {
                    Some((seed, beta, input, lif, alif)) if input.len() <= 12 => format!(
                        "{} of {} cases differ; seed {seed}, beta {beta:.4}, input {input:.3?}, lif {lif:?}, alif {alif:?}",
                        r.mismatched_cases, r.cases
                    ),
                    Some((seed, beta, input, ..)) => format!(
                        "{} of {} cases differ; first at seed {seed} (beta {beta:.4}, T = {})",
                        r.mismatched_cases,
                        r.cases,
                        input.len()
                    ),
                    None => format!("{} cases identical", r.cases),
                };
                checks.record(
                    &format!("alif identity ({:?})", e.alif_coupling),
                    r.passed(),
                    detail,
                );
                if e.alif_coupling == AlifCoupling::UnitDecay {
                    let m = check_alif_identity(
                        e.identity_cases,
                        e.identity_max_steps,
                        AlifCoupling::MatchedDecay,
                        ctx.seed,
                    )?;
                    println!(
                        "info: with adaptation decay rho = beta, {} of {} cases differ",
                        m.mismatched_cases, m.cases
                    );
                }
            }
            EquivCheck::PrfLifIdentity => {
                let r = check_prf_lif_identity(e.identity_cases, e.identity_max_steps, ctx.seed)?;
                checks.record(
                    "prf-lif-identity",
                    r.max_abs_diff == 0.0 && r.max_imag == 0.0,
                    format!(
                        "max |Re u - u_lif| = {:e}, max |Im u| = {:e}",
                        r.max_abs_diff, r.max_imag
                    ),
                );
            }
        }
    }
    if !rows.is_empty() {
        write(ctx, &rows)?;
    }
    Ok(checks.done())
}

pub fn bench(ctx: &Ctx) -> anyhow::Result<bool> {
    let b = &ctx.config.bench;
    let records = run_bench(&b.bench, ctx.seed)?;
    for r in &records {
        println!(
            "L={:<6} {:<10} {:<8} {:>10.2} ms",
            r.seq_len,
            format!("{:?}", r.mode).to_lowercase(),
            format!("{:?}", r.phase).to_lowercase(),
            r.ms
        );
    }
    write(ctx, &records)?;
    let sp = speedups(&records);
    let mut checks = Checks::new();
    for &(l, s) in sp.iter().filter(|(l, _)| *l >= 256) {
        checks.record(
            &format!("faster at L={l}"),
            s > 1.0,
            format!("speedup {s:.3}x"),
        );
    }
    let monotone = sp.windows(2).all(|w| w[1].1 >= w[0].1);
    checks.record(
        "monotone speedup",
        monotone,
        sp.iter()
            .map(|(l, s)| format!("{l}:{s:.3}"))
            .collect::<Vec<_>>()
            .join(" "),
    );
    if let Some(&(_, s)) = sp.iter().find(|(l, _)| *l == b.check_len) {
        checks.record(
            &format!("speedup at L={}", b.check_len),
            s >= b.min_speedup,
            format!("{s:.3}x, need {}x", b.min_speedup),
        );
    }
    Ok(checks.done())
}

pub fn train(ctx: &Ctx, checkpoint: Option<&Path>) -> anyhow::Result<bool> {
    let t = &ctx.config.train;
    let mut checks = Checks::new();
    if let Some(g) = &t.gradcheck {
        let r = sdtcm_gradient_check(&parspike::traingrad::GradCheckConfig {
            seed: ctx.seed,
            ..g.clone()
        })?;
        checks.record(
            "gradient check",
            r.max_rel_error <= t.max_rel_error,
            format!(
                "{} values, max relative error {:.3e} at {}[{}]",
                r.checked, r.max_rel_error, r.worst.0, r.worst.1
            ),
        );
    }
    let (train_set, test_set) = tasks::datasets(t, &ctx.data_dir, ctx.seed)?;
    let (mut model, hyper) = tasks::model(t, &train_set, ctx.seed)?;
    eprintln!(
        "training on {} samples of length {}, testing on {}",
        train_set.len(),
        train_set.steps(),
        test_set.len()
    );
    let test = (!test_set.is_empty()).then_some(&test_set);
    let history = fit(&mut model, &train_set, test, &hyper)?;
    for m in &history {
        println!(
            "epoch {:>3} loss {:.5} train {:.4} test {}",
            m.epoch,
            m.loss,
            m.train_accuracy,
            m.test_accuracy.map_or("-".into(), |a| format!("{a:.4}"))
        );
    }
    write(ctx, &history)?;
    if let Some(p) = checkpoint {
        Checkpoint::from_model(&model)
            .save(p)
            .with_context(|| format!("saving {}", p.display()))?;
        eprintln!("saved checkpoint to {}", p.display());
    }
    let best = history
        .iter()
        .filter_map(|m| m.test_accuracy)
        .fold(f64::NAN, f64::max);
    if let Some(min) = t.min_test_accuracy {
        checks.record(
            "reaches accuracy",
            best >= min,
            format!("best test accuracy {best:.4}, need >= {min}"),
        );
    }
    if let Some(max) = t.max_test_accuracy {
        checks.record(
            "stays below accuracy",
            best <= max,
            format!("best test accuracy {best:.4}, need <= {max}"),
        );
    }
    if t.require_monotone_loss {
        let ok = history.windows(2).all(|w| w[1].loss < w[0].loss);
        let losses: Vec<String> = history.iter().map(|m| format!("{:.4}", m.loss)).collect();
        checks.record("monotone loss", ok, losses.join(" > "));
    }
    if !checks.any {
        checks.record(
            "finite loss",
            history.iter().all(|m| m.loss.is_finite()),
            "training completed",
        );
    }
    Ok(checks.done())
}

#[derive(Serialize)]
struct FreqRow {
    omega: f64,
    simulated: f64,
    discrete: f64,
    closed_form: f64,
}

pub fn freq(ctx: &Ctx) -> anyhow::Result<bool> {
    let f = &ctx.config.freq;
    let omegas = f.omegas();
    let sim = simulate_frequency_response(f.tau, f.theta, f.delta, &omegas, f.steps)?;
    let closed = frequency_response(f.tau, f.theta, &omegas)?;
    let rows: Vec<FreqRow> = omegas
        .iter()
        .enumerate()
        .map(|(i, &w)| FreqRow {
            omega: w,
            simulated: sim.magnitude[i],
            discrete: discrete_gain(f.delta, f.tau, f.theta, w),
            closed_form: closed.magnitude[i],
        })
        .collect();
    write(ctx, &rows)?;
    let (arg, peak) = sim
        .magnitude
        .iter()
        .enumerate()
        .fold(
            (0, f64::MIN),
            |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
        );
    let mut checks = Checks::new();
    checks.record(
        "peak frequency",
        arg == f.half_points,
        format!(
            "argmax at omega {:.4} (grid step {:.4}), theta {}",
            omegas[arg],
            f.theta / f.half_points as f64,
            f.theta
        ),
    );
    let rel = (peak - f.tau).abs() / f.tau;
    checks.record(
        "peak magnitude",
        rel <= f.tolerance,
        format!("{peak:.4} vs tau {}, relative gap {rel:.4}", f.tau),
    );
    Ok(checks.done())
}

#[derive(Serialize)]
struct VarianceRow {
    tau: f64,
    delta: f64,
    sigma: f64,
    trials: usize,
    steps: usize,
    empirical: f64,
    exact: f64,
    approx: f64,
    standard_error: f64,
}

pub fn variance(ctx: &Ctx) -> anyhow::Result<bool> {
    let v = &ctx.config.variance;
    let steps = v.steps.unwrap_or_else(|| settle_steps(v.delta, v.tau));
    let r = check_stationary_variance(v.tau, v.delta, v.sigma, v.trials, steps, ctx.seed)?;
    let mut checks = Checks::new();
    checks.record(
        "stationary variance",
        r.z_score() <= v.max_z,
        format!(
            "empirical {:.5}, exact {:.5}, approx {:.5}, {:.2} standard errors (T = {steps})",
            r.empirical_var,
            r.exact_var,
            r.approx_var,
            r.z_score()
        ),
    );
    let small_tau = v.delta / v.small_ratio;
    // The ratio does not depend on sigma.
    let s = check_stationary_variance(small_tau, v.delta, 1.0, 2, 1, ctx.seed)?;
    let gap = (s.approx_var - s.exact_var).abs() / s.exact_var;
    checks.record(
        "small-step approximation",
        gap <= v.small_tolerance,
        format!(
            "delta/tau = {}: approx {:.5} vs exact {:.5}, gap {gap:.5}",
            v.small_ratio, s.approx_var, s.exact_var
        ),
    );
    write(
        ctx,
        &[VarianceRow {
            tau: v.tau,
            delta: v.delta,
            sigma: v.sigma,
            trials: v.trials,
            steps,
            empirical: r.empirical_var,
            exact: r.exact_var,
            approx: r.approx_var,
            standard_error: r.standard_error,
        }],
    )?;
    Ok(checks.done())
}

#[derive(Serialize)]
struct EnergyRow {
    family: String,
    layers: usize,
    seq_len: usize,
    mac: f64,
    ac: f64,
    m: f64,
    total_mj: f64,
    ratio_to_s4: f64,
}

pub fn energy(ctx: &Ctx) -> anyhow::Result<bool> {
    let e = &ctx.config.energy;
    let layers = listops_layers(e.state);
    let s4 = estimate_energy(ModelFamily::S4LegS, &layers, e.seq_len, &e.model)?;
    let mut rows = Vec::new();
    let mut ours_ratio = f64::NAN;
    for fam in [
        ModelFamily::S4LegS,
        ModelFamily::BinaryS4D,
        ModelFamily::Gsu,
        ModelFamily::Ours,
    ] {
        let r = estimate_energy(fam, &layers, e.seq_len, &e.model)?;
        let ratio = r.total_mj / s4.total_mj;
        if fam == ModelFamily::Ours {
            ours_ratio = ratio;
        }
        let l = e.seq_len as f64;
        println!("{fam:<11} {:>10.4} mJ  ratio {ratio:.5}", r.total_mj);
        rows.push(EnergyRow {
            family: fam.to_string(),
            layers: r.layers.len(),
            seq_len: e.seq_len,
            mac: r.layers.iter().map(|x| x.mac).sum::<f64>() * l,
            ac: r.layers.iter().map(|x| x.ac).sum::<f64>() * l,
            m: r.layers.iter().map(|x| x.m).sum::<f64>() * l,
            total_mj: r.total_mj,
            ratio_to_s4: ratio,
        });
    }
    write(ctx, &rows)?;
    let mut checks = Checks::new();
    checks.record(
        "energy ratio",
        ours_ratio <= e.max_ratio,
        format!("{ours_ratio:.5}, need <= {}", e.max_ratio),
    );
    let factor = (ours_ratio / e.reference_ratio).max(e.reference_ratio / ours_ratio);
    checks.record(
        "reference ratio",
        factor <= e.reference_factor,
        format!(
            "{ours_ratio:.5} vs {:.5}, factor {factor:.3}",
            e.reference_ratio
        ),
    );
    Ok(checks.done())
}

#[derive(Serialize)]
struct RateRow {
    layer: String,
    rate: f64,
}

pub fn stats(ctx: &Ctx, checkpoint: Option<&Path>) -> anyhow::Result<bool> {
    let t = &ctx.config.train;
    let (_, test_set) = tasks::datasets(t, &ctx.data_dir, ctx.seed)?;
    let data = test_set.take(ctx.config.stats.samples);
    let (mut model, hyper) = tasks::model(t, &data, ctx.seed)?;
    let ckpt = checkpoint
        .map(Path::to_path_buf)
        .or_else(|| ctx.config.stats.checkpoint.as_ref().map(Into::into));
    if let Some(p) = ckpt {
        Checkpoint::load(&p)
            .and_then(|c| c.apply(&mut model))
            .with_context(|| format!("loading {}", p.display()))?;
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let (x, _) = data.batch(&idx);
    let mut tape = Tape::new();
    let pass = model.forward(&mut tape, &x, SpikeMode::Heaviside)?;
    let layers: Vec<&[f64]> = pass.spikes.iter().map(|&s| tape.value(s).data()).collect();
    let rates = firing_rate_stats(&layers);
    let mut rows: Vec<RateRow> = rates
        .per_layer
        .iter()
        .enumerate()
        .map(|(i, &r)| RateRow {
            layer: i.to_string(),
            rate: r,
        })
        .collect();
    rows.push(RateRow {
        layer: "average".into(),
        rate: rates.average,
    });
    for r in &rows {
        println!("layer {:<8} rate {:.5}", r.layer, r.rate);
    }
    let (loss, acc) = evaluate(&model, &data, hyper.batch_size)?;
    println!("loss {loss:.5} accuracy {acc:.4} on {} samples", data.len());
    write(ctx, &rows)?;
    let mut checks = Checks::new();
    checks.record(
        "rates in range",
        rates.per_layer.iter().all(|r| (0.0..=1.0).contains(r)),
        format!(
            "{} spiking layers, average {:.5}",
            rates.per_layer.len(),
            rates.average
        ),
    );
    Ok(checks.done())
}
