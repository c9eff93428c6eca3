//! Training-step timing: per-step sequential graph vs convolution plus scan.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{BenchRecord, Phase, RunMode};
use crate::seqcore::build_lif_kernel;
use crate::traingrad::{Gradients, SpikeMode, SurrogateSpec, Tape, Tensor, Threshold, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub seq_lens: Vec<usize>,
    pub batch: usize,
    pub channels: usize,
    pub repeats: usize,
    pub beta: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seq_lens: vec![256, 1024, 4096],
            batch: 64,
            channels: 128,
            repeats: 3,
            beta: 0.9,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats < 3 {
            return Err(Error::Config(format!(
                "repeats is {}, need at least 3",
                self.repeats
            )));
        }
        if self.seq_lens.is_empty()
            || self.seq_lens.contains(&0)
            || self.batch == 0
            || self.channels == 0
        {
            return Err(Error::Config(
                "sequence lengths, batch and channels must be >= 1".into(),
            ));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("beta {} outside (0, 1)", self.beta)));
        }
        Ok(())
    }
}

/// LIF layer with `V_th = 1` and loss `Σ w ⊙ S`, built one step at a time.
/// The reset term is taken from the previous spike value, as in the parallel form.
pub fn sequential_step(
    tape: &mut Tape,
    input: &Tensor,
    weights: &Tensor,
    beta: f64,
) -> Result<(Var, Var)> {
    let steps = input.shape()[0];
    let x = tape.input(input.clone());
    let mut parts = Vec::with_capacity(steps);
    let mut prev: Option<(Var, Var)> = None;
    for t in 0..steps {
        let c = tape.time_slice(x, t)?;
        let u = match prev {
            None => c,
            Some((u, s)) => {
                let fired = tape.constant(tape.value(s).clone());
                let r = tape.axpby(u, fired, beta, -beta)?;
                tape.add(r, c)?
            }
        };
        let s = tape.spike(
            u,
            Threshold::Scalar(1.0),
            None,
            SurrogateSpec::default(),
            SpikeMode::Heaviside,
        )?;
        parts.push(s);
        prev = Some((u, s));
    }
    let spikes = tape.stack(&parts)?;
    Ok((x, tape.weighted_sum(spikes, weights)?))
}

/// The same layer and loss through FFT convolution and the reset scan.
pub fn parallel_step(
    tape: &mut Tape,
    input: &Tensor,
    weights: &Tensor,
    beta: f64,
) -> Result<(Var, Var)> {
    let (steps, n) = (input.shape()[0], input.last_dim());
    let x = tape.input(input.clone());
    let k = build_lif_kernel(&vec![beta; n], steps)?;
    let kernel = tape.constant(Tensor::new(vec![steps, n], k.values().to_vec())?);
    let up = tape.convolve(x, kernel)?;
    let d = tape.reset_scan(up, 1.0, &[beta])?;
    let s = tape.spike(
        up,
        Threshold::Detached(d),
        None,
        SurrogateSpec::default(),
        SpikeMode::Heaviside,
    )?;
    Ok((x, tape.weighted_sum(s, weights)?))
}

type StepFn = fn(&mut Tape, &Tensor, &Tensor, f64) -> Result<(Var, Var)>;

fn time_once(
    f: StepFn,
    input: &Tensor,
    weights: &Tensor,
    beta: f64,
) -> Result<(f64, f64, Gradients)> {
    let start = Instant::now();
    let mut tape = Tape::new();
    let (_, loss) = f(&mut tape, input, weights, beta)?;
    let forward = start.elapsed().as_secs_f64() * 1e3;
    let start = Instant::now();
    let grads = tape.backward(loss)?;
    let backward = start.elapsed().as_secs_f64() * 1e3;
    Ok((forward, backward, grads))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median forward, backward and total milliseconds per mode and length,
/// after one discarded warm-up run of each.
pub fn bench(config: &BenchConfig, seed: u64) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut out = Vec::new();
    for &steps in &config.seq_lens {
        let shape = vec![steps, config.batch, config.channels];
        let len = steps * config.batch * config.channels;
        let input = Tensor::new(
            shape.clone(),
            (0..len).map(|_| rng.sample(StandardNormal)).collect(),
        )?;
        let weights = Tensor::new(
            shape,
            (0..len).map(|_| rng.sample(StandardNormal)).collect(),
        )?;
        for (mode, f) in [
            (RunMode::Sequential, sequential_step as StepFn),
            (RunMode::Parallel, parallel_step),
        ] {
            time_once(f, &input, &weights, config.beta)?;
            let (mut fw, mut bw, mut total) = (Vec::new(), Vec::new(), Vec::new());
            for _ in 0..config.repeats {
                let (f_ms, b_ms, _) = time_once(f, &input, &weights, config.beta)?;
                fw.push(f_ms);
                bw.push(b_ms);
                total.push(f_ms + b_ms);
            }
            for (phase, times) in [
                (Phase::Forward, fw),
                (Phase::Backward, bw),
                (Phase::Total, total),
            ] {
                out.push(BenchRecord {
                    seq_len: steps,
                    batch: config.batch,
                    channels: config.channels,
                    mode,
                    phase,
                    ms: median(times).max(f64::MIN_POSITIVE),
                    repeats: config.repeats,
                });
            }
        }
    }
    Ok(out)
}

/// `(L, sequential total / parallel total)` for every length with both modes.
pub fn speedups(records: &[BenchRecord]) -> Vec<(usize, f64)> {
    let total = |l: usize, m: RunMode| {
        records
            .iter()
            .find(|r| r.seq_len == l && r.mode == m && r.phase == Phase::Total)
            .map(|r| r.ms)
    };
    let mut lens: Vec<usize> = records.iter().map(|r| r.seq_len).collect();
    lens.sort_unstable();
    lens.dedup();
    lens.into_iter()
        .filter_map(|l| {
            Some((
                l,
                total(l, RunMode::Sequential)? / total(l, RunMode::Parallel)?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn data(steps: usize, b: usize, n: usize, seed: u64) -> Tensor {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        Tensor::new(
            vec![steps, b, n],
            (0..steps * b * n)
                .map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn both_graphs_agree() {
        let (x, w) = (data(40, 3, 4, 1), data(40, 3, 4, 2));
        let mut ts = Tape::new();
        let (xs, ls) = sequential_step(&mut ts, &x, &w, 0.8).unwrap();
        let mut tp = Tape::new();
        let (xp, lp) = parallel_step(&mut tp, &x, &w, 0.8).unwrap();
        assert_abs_diff_eq!(ts.value(ls).item(), tp.value(lp).item(), epsilon = 1e-12);
        let gs = ts.backward(ls).unwrap();
        let gp = tp.backward(lp).unwrap();
        for (a, b) in gs
            .get(xs)
            .unwrap()
            .data()
            .iter()
            .zip(gp.get(xp).unwrap().data())
        {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn records_cover_every_combination() {
        let cfg = BenchConfig {
            seq_lens: vec![4, 8],
            batch: 2,
            channels: 3,
            ..BenchConfig::default()
        };
        let r = bench(&cfg, 0).unwrap();
        assert_eq!(r.len(), 2 * 2 * 3);
        assert!(r.iter().all(|x| x.validate().is_ok()));
        assert_eq!(speedups(&r).len(), 2);
    }

    #[test]
    fn too_few_repeats_rejected() {
        let cfg = BenchConfig {
            repeats: 2,
            ..BenchConfig::default()
        };
        assert!(bench(&cfg, 0).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
