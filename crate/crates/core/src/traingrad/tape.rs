use std::collections::HashMap;

use num_complex::Complex64;

use super::surrogate::SurrogateSpec;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::neurons::decoupled_reset_scan;
use crate::seqcore::{prf_decay, Convolver, SeqKind};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How a spike node behaves in the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpikeMode {
    /// Exact step forward, surrogate derivative backward.
    #[default]
    Heaviside,
    /// Smoothed step in both directions. Only for finite-difference checks.
    Smooth,
}

#[derive(Debug, Clone)]
pub enum Threshold {
    Scalar(f64),
    /// Element-wise threshold read from another node, never differentiated.
    Detached(Var),
}

#[derive(Debug)]
enum Op {
    Leaf,
    Affine {
        x: usize,
        w: usize,
        b: Option<usize>,
        rows: usize,
        fan_in: usize,
        fan_out: usize,
    },
    Axpby {
        a: usize,
        b: usize,
        ca: f64,
        cb: f64,
    },
    MulChannel {
        x: usize,
        scale: usize,
    },
    PrfKernel {
        log_delta: usize,
        log_tau: usize,
        theta: usize,
        powers: Vec<Complex64>,
    },
    Convolve {
        x: usize,
        k: usize,
    },
    Spike {
        u: usize,
        threshold: Threshold,
        alpha: Option<usize>,
        surrogate: SurrogateSpec,
        mode: SpikeMode,
    },
    Concat {
        a: usize,
        b: usize,
    },
    Reverse {
        x: usize,
    },
    MeanTime {
        x: usize,
    },
    TimeSlice {
        x: usize,
        t: usize,
    },
    Stack {
        parts: Vec<usize>,
    },
    CrossEntropy {
        logits: usize,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    WeightedSum {
        x: usize,
        weights: Vec<f64>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Record of one forward pass, replayed in reverse by [`Tape::backward`].
///
/// Sequence tensors are time-major `(T, B, N)`; kernels are `(T, N)`.
pub struct Tape {
    nodes: Vec<Node>,
    convolvers: HashMap<usize, Convolver>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for Tape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

fn seq_dims(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match t.shape() {
        &[a, b, c] => Ok((a, b, c)),
        s => Err(Error::shape(format!("{what} must be (T, B, N), got {s:?}"))),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            convolvers: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    fn convolver(&mut self, steps: usize) -> Convolver {
        self.convolvers
            .entry(steps)
            .or_insert_with(|| Convolver::new(steps))
            .clone()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Leaf that receives a gradient but is not a parameter (e.g. network input).
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// `x · W + b` over the last axis. `W` is `(in, out)` row-major.
    ///
    /// Zero entries of `x` are skipped, so spike inputs cost one add per spike.
    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xv = &self.nodes[x.0].value;
        let wv = &self.nodes[w.0].value;
        let (fan_in, fan_out) = match wv.shape() {
            &[i, o] => (i, o),
            s => return Err(Error::shape(format!("weight must be 2-D, got {s:?}"))),
        };
        if xv.last_dim() != fan_in {
            return Err(Error::shape(format!(
                "input width {} does not match weight fan-in {fan_in}",
                xv.last_dim()
            )));
        }
        if let Some(b) = b {
            if self.nodes[b.0].value.shape() != [fan_out] {
                return Err(Error::shape("bias length must equal fan-out"));
            }
        }
        let rows = xv.len() / fan_in;
        let mut out = vec![0.0; rows * fan_out];
        let wd = wv.data();
        for (xr, or) in xv
            .data()
            .chunks_exact(fan_in)
            .zip(out.chunks_exact_mut(fan_out))
        {
            if let Some(b) = b {
                or.copy_from_slice(self.nodes[b.0].value.data());
            }
            for (i, &xi) in xr.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for (o, &wij) in or.iter_mut().zip(&wd[i * fan_out..(i + 1) * fan_out]) {
                    *o += xi * wij;
                }
            }
        }
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().expect("non-empty") = fan_out;
        let needs = self.needs(x.0) || self.needs(w.0) || b.is_some_and(|b| self.needs(b.0));
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Affine {
                x: x.0,
                w: w.0,
                b: b.map(|b| b.0),
                rows,
                fan_in,
                fan_out,
            },
            needs,
        ))
    }

    /// `ca·a + cb·b`.
    pub fn axpby(&mut self, a: Var, b: Var, ca: f64, cb: f64) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.shape() != bv.shape() {
            return Err(Error::shape(format!(
                "{:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| ca * x + cb * y)
            .collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        let needs = self.needs(a.0) || self.needs(b.0);
        Ok(self.push(
            value,
            Op::Axpby {
                a: a.0,
                b: b.0,
                ca,
                cb,
            },
            needs,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.axpby(a, b, 1.0, 1.0)
    }

    /// Multiply every row of `x` by a per-channel vector.
    pub fn mul_channel(&mut self, x: Var, scale: Var) -> Result<Var> {
        let (xv, sv) = (&self.nodes[x.0].value, &self.nodes[scale.0].value);
        let n = xv.last_dim();
        if sv.shape() != [n] {
            return Err(Error::shape(
                "channel scale must have one entry per channel",
            ));
        }
        let s = sv.data();
        let data = xv
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v * s[i % n])
            .collect();
        let value = Tensor::new(xv.shape().to_vec(), data)?;
        let needs = self.needs(x.0) || self.needs(scale.0);
        Ok(self.push(
            value,
            Op::MulChannel {
                x: x.0,
                scale: scale.0,
            },
            needs,
        ))
    }

    /// Real part of the resonate-and-fire kernel `Δ·A^t`, `A = exp(Δ(−1/τ + iθ))`,
    /// from log-parameterized `Δ` and `τ`. Shape `(T, N)`.
    pub fn prf_kernel(
        &mut self,
        log_delta: Var,
        log_tau: Var,
        theta: Var,
        steps: usize,
    ) -> Result<Var> {
        let ld = self.nodes[log_delta.0].value.data();
        let lt = self.nodes[log_tau.0].value.data();
        let th = self.nodes[theta.0].value.data();
        let n = ld.len();
        if lt.len() != n || th.len() != n || steps == 0 {
            return Err(Error::shape("PRF parameter vectors must share one length"));
        }
        let mut powers = Vec::with_capacity(steps * n);
        let mut cur = vec![Complex64::new(1.0, 0.0); n];
        let decay: Vec<Complex64> = (0..n)
            .map(|c| prf_decay(ld[c].exp(), lt[c].exp(), th[c]))
            .collect();
        for _ in 0..steps {
            powers.extend_from_slice(&cur);
            for (p, a) in cur.iter_mut().zip(&decay) {
                *p *= a;
            }
        }
        let data = powers
            .iter()
            .enumerate()
            .map(|(i, p)| ld[i % n].exp() * p.re)
            .collect();
        let value = Tensor::new(vec![steps, n], data)?;
        let needs = self.needs(log_delta.0) || self.needs(log_tau.0) || self.needs(theta.0);
        Ok(self.push(
            value,
            Op::PrfKernel {
                log_delta: log_delta.0,
                log_tau: log_tau.0,
                theta: theta.0,
                powers,
            },
            needs,
        ))
    }

    /// Causal convolution of a `(T, B, N)` sequence with a `(T, N)` kernel.
    pub fn convolve(&mut self, x: Var, kernel: Var) -> Result<Var> {
        let (t, b, n) = seq_dims(&self.nodes[x.0].value, "convolution input")?;
        if self.nodes[kernel.0].value.shape() != [t, n] {
            return Err(Error::shape(format!(
                "kernel {:?} does not fit input ({t}, {b}, {n})",
                self.nodes[kernel.0].value.shape()
            )));
        }
        let conv = self.convolver(t);
        let out = conv.convolve_raw(
            self.nodes[x.0].value.data(),
            b,
            n,
            self.nodes[kernel.0].value.data(),
        );
        let needs = self.needs(x.0) || self.needs(kernel.0);
        Ok(self.push(
            Tensor::new(vec![t, b, n], out)?,
            Op::Convolve {
                x: x.0,
                k: kernel.0,
            },
            needs,
        ))
    }

    /// Dynamic reset threshold of the decoupled LIF. The result is a constant
    /// of the graph: no gradient flows through it.
    pub fn reset_scan(&mut self, uprime: Var, v_th: f64, beta: &[f64]) -> Result<Var> {
        let seq = self.nodes[uprime.0].value.to_sequence(SeqKind::Potential)?;
        let d = decoupled_reset_scan(&seq, v_th, beta)?;
        Ok(self.constant(Tensor::from_sequence(&d)))
    }

    /// `alpha · H(u − threshold)`, with the step replaced by its surrogate in backward.
    pub fn spike(
        &mut self,
        u: Var,
        threshold: Threshold,
        alpha: Option<Var>,
        surrogate: SurrogateSpec,
        mode: SpikeMode,
    ) -> Result<Var> {
        let uv = &self.nodes[u.0].value;
        if let Threshold::Detached(d) = &threshold {
            if self.nodes[d.0].value.shape() != uv.shape() {
                return Err(Error::shape("threshold must match the membrane shape"));
            }
        }
        let n = uv.last_dim();
        if let Some(a) = alpha {
            if self.nodes[a.0].value.shape() != [n] {
                return Err(Error::shape("alpha must have one entry per channel"));
            }
        }
        let data = uv
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let th = match &threshold {
                    Threshold::Scalar(v) => *v,
                    Threshold::Detached(d) => self.nodes[d.0].value.data()[i],
                };
                let h = match mode {
                    SpikeMode::Heaviside => {
                        if x >= th {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    SpikeMode::Smooth => surrogate.smooth(x - th),
                };
                match alpha {
                    Some(a) => h * self.nodes[a.0].value.data()[i % n],
                    None => h,
                }
            })
            .collect();
        let value = Tensor::new(uv.shape().to_vec(), data)?;
        let needs = self.needs(u.0) || alpha.is_some_and(|a| self.needs(a.0));
        Ok(self.push(
            value,
            Op::Spike {
                u: u.0,
                threshold,
                alpha: alpha.map(|a| a.0),
                surrogate,
                mode,
            },
            needs,
        ))
    }

    /// Join two sequences along the channel axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, ba, na) = seq_dims(&self.nodes[a.0].value, "concat input")?;
        let (tb, bb, nb) = seq_dims(&self.nodes[b.0].value, "concat input")?;
        if ta != tb || ba != bb {
            return Err(Error::shape("concat inputs differ in time or batch"));
        }
        let (av, bv) = (self.nodes[a.0].value.data(), self.nodes[b.0].value.data());
        let mut out = Vec::with_capacity(av.len() + bv.len());
        for (ra, rb) in av.chunks_exact(na).zip(bv.chunks_exact(nb)) {
            out.extend_from_slice(ra);
            out.extend_from_slice(rb);
        }
        let needs = self.needs(a.0) || self.needs(b.0);
        Ok(self.push(
            Tensor::new(vec![ta, ba, na + nb], out)?,
            Op::Concat { a: a.0, b: b.0 },
            needs,
        ))
    }

    /// Reverse the time axis.
    pub fn reverse(&mut self, x: Var) -> Result<Var> {
        let (t, b, n) = seq_dims(&self.nodes[x.0].value, "reverse input")?;
        let value = Tensor::new(
            vec![t, b, n],
            reverse_time(self.nodes[x.0].value.data(), b * n),
        )?;
        let needs = self.needs(x.0);
        Ok(self.push(value, Op::Reverse { x: x.0 }, needs))
    }

    /// Mean over time: `(T, B, N) → (B, N)`.
    pub fn mean_time(&mut self, x: Var) -> Result<Var> {
        let (t, b, n) = seq_dims(&self.nodes[x.0].value, "pooling input")?;
        let mut out = vec![0.0; b * n];
        for row in self.nodes[x.0].value.data().chunks_exact(b * n) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        for o in &mut out {
            *o /= t as f64;
        }
        let needs = self.needs(x.0);
        Ok(self.push(
            Tensor::new(vec![b, n], out)?,
            Op::MeanTime { x: x.0 },
            needs,
        ))
    }

    /// The `(B, N)` slab at time `t`.
    pub fn time_slice(&mut self, x: Var, t: usize) -> Result<Var> {
        let (steps, b, n) = seq_dims(&self.nodes[x.0].value, "slice input")?;
        if t >= steps {
            return Err(Error::shape(format!(
                "step {t} out of range for {steps} steps"
            )));
        }
        let data = self.nodes[x.0].value.data()[t * b * n..(t + 1) * b * n].to_vec();
        let needs = self.needs(x.0);
        Ok(self.push(
            Tensor::new(vec![b, n], data)?,
            Op::TimeSlice { x: x.0, t },
            needs,
        ))
    }

    /// Stack `(B, N)` slabs into a `(T, B, N)` sequence.
    pub fn stack(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(Error::Empty("nothing to stack"))?;
        let shape = self.nodes[first.0].value.shape().to_vec();
        let (b, n) = match shape[..] {
            [b, n] => (b, n),
            _ => return Err(Error::shape("stack parts must be (B, N)")),
        };
        let mut out = Vec::with_capacity(parts.len() * b * n);
        for p in parts {
            let v = &self.nodes[p.0].value;
            if v.shape() != shape {
                return Err(Error::shape("stack parts differ in shape"));
            }
            out.extend_from_slice(v.data());
        }
        let needs = parts.iter().any(|p| self.needs(p.0));
        let value = Tensor::new(vec![parts.len(), b, n], out)?;
        Ok(self.push(
            value,
            Op::Stack {
                parts: parts.iter().map(|p| p.0).collect(),
            },
            needs,
        ))
    }

    /// Mean softmax cross-entropy of `(B, C)` logits against class labels.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = &self.nodes[logits.0].value;
        let (b, c) = match lv.shape() {
            &[b, c] => (b, c),
            s => return Err(Error::shape(format!("logits must be (B, C), got {s:?}"))),
        };
        if labels.len() != b {
            return Err(Error::shape("one label per batch row"));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::param(format!(
                "label {l} out of range for {c} classes"
            )));
        }
        let mut probs = vec![0.0; b * c];
        let mut loss = 0.0;
        for (r, (row, p)) in lv
            .data()
            .chunks_exact(c)
            .zip(probs.chunks_exact_mut(c))
            .enumerate()
        {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
            for (pi, v) in p.iter_mut().zip(row) {
                *pi = (v - m).exp() / z;
            }
            loss += z.ln() + m - row[labels[r]];
        }
        let needs = self.needs(logits.0);
        Ok(self.push(
            Tensor::scalar(loss / b as f64),
            Op::CrossEntropy {
                logits: logits.0,
                labels: labels.to_vec(),
                probs,
            },
            needs,
        ))
    }

    /// `Σ x ⊙ weights` with constant weights of the same shape.
    pub fn weighted_sum(&mut self, x: Var, weights: &Tensor) -> Result<Var> {
        let xv = &self.nodes[x.0].value;
        if xv.shape() != weights.shape() {
            return Err(Error::shape("weights must match the input shape"));
        }
        let s = xv
            .data()
            .iter()
            .zip(weights.data())
            .map(|(a, b)| a * b)
            .sum();
        let needs = self.needs(x.0);
        Ok(self.push(
            Tensor::scalar(s),
            Op::WeightedSum {
                x: x.0,
                weights: weights.data().to_vec(),
            },
            needs,
        ))
    }

    /// Reverse-mode sweep seeded with `d loss / d loss = 1`. `loss` must be a scalar.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::shape("backward() needs a scalar loss"));
        }
        self.backward_with(loss, Tensor::scalar(1.0))
    }

    /// Reverse-mode sweep from `output` with an explicit upstream gradient.
    /// Only leaf gradients are kept.
    pub fn backward_with(&self, output: Var, seed: Tensor) -> Result<Gradients> {
        if seed.shape() != self.nodes[output.0].value.shape() {
            return Err(Error::shape(format!(
                "seed {:?} does not match output {:?}",
                seed.shape(),
                self.nodes[output.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed);
        let mut leaves = HashMap::new();
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                leaves.insert(i, g);
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }
        Ok(Gradients { grads: leaves })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], i: usize, g: Tensor) {
        if !self.nodes[i].needs_grad {
            return;
        }
        match &mut grads[i] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn accumulate_with(
        &self,
        grads: &mut [Option<Tensor>],
        i: usize,
        f: impl FnOnce() -> Vec<f64>,
    ) {
        if self.nodes[i].needs_grad {
            let shape = self.nodes[i].value.shape().to_vec();
            let g = Tensor::new(shape, f()).expect("gradient matches value shape");
            self.accumulate(grads, i, g);
        }
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &self.nodes[i].op {
            Op::Leaf => {}
            &Op::Affine {
                x,
                w,
                b,
                rows,
                fan_in,
                fan_out,
            } => {
                let xv = self.nodes[x].value.data();
                let wv = self.nodes[w].value.data();
                self.accumulate_with(grads, x, || {
                    let mut gx = vec![0.0; rows * fan_in];
                    for (gr, gxr) in gd.chunks_exact(fan_out).zip(gx.chunks_exact_mut(fan_in)) {
                        for (k, gxk) in gxr.iter_mut().enumerate() {
                            let wr = &wv[k * fan_out..(k + 1) * fan_out];
                            *gxk = wr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        }
                    }
                    gx
                });
                self.accumulate_with(grads, w, || {
                    let mut gw = vec![0.0; fan_in * fan_out];
                    for (xr, gr) in xv.chunks_exact(fan_in).zip(gd.chunks_exact(fan_out)) {
                        for (k, &xk) in xr.iter().enumerate() {
                            if xk == 0.0 {
                                continue;
                            }
                            for (o, gv) in gw[k * fan_out..(k + 1) * fan_out].iter_mut().zip(gr) {
                                *o += xk * gv;
                            }
                        }
                    }
                    gw
                });
                if let Some(b) = b {
                    self.accumulate_with(grads, b, || {
                        let mut gb = vec![0.0; fan_out];
                        for gr in gd.chunks_exact(fan_out) {
                            for (o, v) in gb.iter_mut().zip(gr) {
                                *o += v;
                            }
                        }
                        gb
                    });
                }
            }
            &Op::Axpby { a, b, ca, cb } => {
                self.accumulate_with(grads, a, || gd.iter().map(|v| ca * v).collect());
                self.accumulate_with(grads, b, || gd.iter().map(|v| cb * v).collect());
            }
            &Op::MulChannel { x, scale } => {
                let s = self.nodes[scale].value.data();
                let n = s.len();
                self.accumulate_with(grads, x, || {
                    gd.iter().enumerate().map(|(j, v)| v * s[j % n]).collect()
                });
                let xv = self.nodes[x].value.data();
                self.accumulate_with(grads, scale, || {
                    let mut gs = vec![0.0; n];
                    for (j, (v, xj)) in gd.iter().zip(xv).enumerate() {
                        gs[j % n] += v * xj;
                    }
                    gs
                });
            }
            Op::PrfKernel {
                log_delta,
                log_tau,
                theta,
                powers,
            } => {
                self.prf_kernel_backward(*log_delta, *log_tau, *theta, powers, gd, grads);
            }
            &Op::Convolve { x, k } => {
                let (t, b, n) = seq_dims(&self.nodes[x].value, "").expect("checked in forward");
                let conv = self
                    .convolvers
                    .get(&t)
                    .cloned()
                    .unwrap_or_else(|| Convolver::new(t));
                let kv = self.nodes[k].value.data();
                self.accumulate_with(grads, x, || conv.correlate_raw(gd, b, n, kv));
                let xv = self.nodes[x].value.data();
                self.accumulate_with(grads, k, || conv.kernel_grad_raw(gd, xv, b, n));
            }
            Op::Spike {
                u,
                threshold,
                alpha,
                surrogate,
                mode,
            } => {
                let uv = self.nodes[*u].value.data();
                let n = self.nodes[*u].value.last_dim();
                let th = |j: usize| match threshold {
                    Threshold::Scalar(v) => *v,
                    Threshold::Detached(d) => self.nodes[d.0].value.data()[j],
                };
                let alpha_v = alpha.map(|a| self.nodes[a].value.data());
                self.accumulate_with(grads, *u, || {
                    gd.iter()
                        .enumerate()
                        .map(|(j, v)| {
                            let scale = alpha_v.map_or(1.0, |a| a[j % n]);
                            v * scale * surrogate.grad(uv[j] - th(j))
                        })
                        .collect()
                });
                if let Some(a) = alpha {
                    self.accumulate_with(grads, *a, || {
                        let mut ga = vec![0.0; n];
                        for (j, v) in gd.iter().enumerate() {
                            let x = uv[j] - th(j);
                            let h = match mode {
                                SpikeMode::Heaviside => {
                                    if x >= 0.0 {
                                        1.0
                                    } else {
                                        0.0
                                    }
                                }
                                SpikeMode::Smooth => surrogate.smooth(x),
                            };
                            ga[j % n] += v * h;
                        }
                        ga
                    });
                }
            }
            &Op::Concat { a, b } => {
                let na = self.nodes[a].value.last_dim();
                let nb = self.nodes[b].value.last_dim();
                self.accumulate_with(grads, a, || {
                    gd.chunks_exact(na + nb)
                        .flat_map(|r| r[..na].to_vec())
                        .collect()
                });
                self.accumulate_with(grads, b, || {
                    gd.chunks_exact(na + nb)
                        .flat_map(|r| r[na..].to_vec())
                        .collect()
                });
            }
            &Op::Reverse { x } => {
                let shape = self.nodes[x].value.shape();
                let width = shape[1] * shape[2];
                self.accumulate_with(grads, x, || reverse_time(gd, width));
            }
            &Op::MeanTime { x } => {
                let t = self.nodes[x].value.shape()[0];
                let scale = 1.0 / t as f64;
                self.accumulate_with(grads, x, || {
                    let row: Vec<f64> = gd.iter().map(|v| v * scale).collect();
                    row.repeat(t)
                });
            }
            &Op::TimeSlice { x, t } => {
                let shape = self.nodes[x].value.shape();
                let width = shape[1] * shape[2];
                match &mut grads[x] {
                    Some(acc) => {
                        for (a, g) in acc.data_mut()[t * width..(t + 1) * width]
                            .iter_mut()
                            .zip(gd)
                        {
                            *a += g;
                        }
                    }
                    None => self.accumulate_with(grads, x, || {
                        let mut out = vec![0.0; shape[0] * width];
                        out[t * width..(t + 1) * width].copy_from_slice(gd);
                        out
                    }),
                }
            }
            Op::Stack { parts } => {
                let width = gd.len() / parts.len();
                for (t, &p) in parts.iter().enumerate() {
                    self.accumulate_with(grads, p, || gd[t * width..(t + 1) * width].to_vec());
                }
            }
            Op::WeightedSum { x, weights } => {
                self.accumulate_with(grads, *x, || weights.iter().map(|w| w * gd[0]).collect());
            }
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let b = labels.len();
                let c = probs.len() / b;
                let scale = gd[0] / b as f64;
                self.accumulate_with(grads, *logits, || {
                    let mut gl: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                    for (r, &l) in labels.iter().enumerate() {
                        gl[r * c + l] -= scale;
                    }
                    gl
                });
            }
        }
    }

    fn prf_kernel_backward(
        &self,
        log_delta: usize,
        log_tau: usize,
        theta: usize,
        powers: &[Complex64],
        gk: &[f64],
        grads: &mut [Option<Tensor>],
    ) {
        let ld = self.nodes[log_delta].value.data();
        let lt = self.nodes[log_tau].value.data();
        let th = self.nodes[theta].value.data();
        let n = ld.len();
        let mut g_delta = vec![0.0; n];
        let mut g_tau = vec![0.0; n];
        let mut g_theta = vec![0.0; n];
        for (idx, (p, g)) in powers.iter().zip(gk).enumerate() {
            let (j, c) = ((idx / n) as f64, idx % n);
            let delta = ld[c].exp();
            let tau = lt[c].exp();
            let rate = Complex64::new(-1.0 / tau, th[c]);
            // d/dΔ [Δ·e^{jΔγ}] = e^{jΔγ}(1 + jΔγ)
            g_delta[c] += g * (p * (1.0 + rate * (j * delta))).re;
            g_tau[c] += g * j * delta * delta / (tau * tau) * p.re;
            g_theta[c] -= g * j * delta * delta * p.im;
        }
        self.accumulate_with(grads, log_delta, || {
            g_delta.iter().zip(ld).map(|(g, l)| g * l.exp()).collect()
        });
        self.accumulate_with(grads, log_tau, || {
            g_tau.iter().zip(lt).map(|(g, l)| g * l.exp()).collect()
        });
        self.accumulate_with(grads, theta, || g_theta);
    }
}

fn reverse_time(data: &[f64], width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(data.len());
    for row in data.chunks_exact(width).rev() {
        out.extend_from_slice(row);
    }
    out
}

/// Leaf gradients from one backward sweep.
#[derive(Debug, Default)]
pub struct Gradients {
    grads: HashMap<usize, Tensor>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(&v.0)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.remove(&v.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded(shape: &[usize], seed: u64) -> Tensor {
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            })
            .collect();
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    /// Check every leaf gradient of `f` against central differences.
    fn check(leaves: Vec<Tensor>, f: impl Fn(&mut Tape, &[Var]) -> Var) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = leaves.iter().map(|l| tape.param(l.clone())).collect();
        let out = f(&mut tape, &vars);
        let grads = tape.backward(out).unwrap();
        let h = 1e-6;
        for (li, leaf) in leaves.iter().enumerate() {
            let analytic = grads
                .get(vars[li])
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(leaf.shape()));
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 1e-8;
            for k in 0..leaf.len() {
                let eval = |delta: f64| {
                    let mut t = Tape::new();
                    let vs: Vec<Var> = leaves
                        .iter()
                        .enumerate()
                        .map(|(j, l)| {
                            let mut l = l.clone();
                            if j == li {
                                l.data_mut()[k] += delta;
                            }
                            t.param(l)
                        })
                        .collect();
                    let o = f(&mut t, &vs);
                    t.value(o).item()
                };
                let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                worst = worst.max((numeric - analytic.data()[k]).abs());
                scale = scale.max(numeric.abs());
            }
            assert!(
                worst / scale < 1e-5,
                "leaf {li}: abs err {worst}, scale {scale}"
            );
        }
    }

    fn reduce(tape: &mut Tape, x: Var, seed: u64) -> Var {
        let w = seeded(tape.value(x).shape(), seed);
        tape.weighted_sum(x, &w).unwrap()
    }

    #[test]
    fn affine_and_elementwise() {
        check(
            vec![seeded(&[3, 2, 4], 1), seeded(&[4, 5], 2), seeded(&[5], 3)],
            |t, v| {
                let y = t.affine(v[0], v[1], Some(v[2])).unwrap();
                reduce(t, y, 9)
            },
        );
        check(
            vec![
                seeded(&[3, 2, 4], 4),
                seeded(&[3, 2, 4], 5),
                seeded(&[4], 6),
            ],
            |t, v| {
                let y = t.axpby(v[0], v[1], 0.7, -1.3).unwrap();
                let y = t.mul_channel(y, v[2]).unwrap();
                reduce(t, y, 10)
            },
        );
    }

    #[test]
    fn convolution_and_kernel() {
        let ld = Tensor::new(vec![3], vec![-1.2, -0.3, -2.0]).unwrap();
        let lt = Tensor::new(vec![3], vec![0.7, 1.5, 0.1]).unwrap();
        let th = Tensor::new(vec![3], vec![0.4, 2.0, -0.9]).unwrap();
        check(vec![seeded(&[12, 2, 3], 7), ld, lt, th], |t, v| {
            let k = t.prf_kernel(v[1], v[2], v[3], 12).unwrap();
            let y = t.convolve(v[0], k).unwrap();
            reduce(t, y, 11)
        });
    }

    #[test]
    fn structural_ops() {
        check(
            vec![seeded(&[5, 2, 3], 12), seeded(&[5, 2, 2], 13)],
            |t, v| {
                let r = t.reverse(v[0]).unwrap();
                let c = t.concat(r, v[1]).unwrap();
                let s0 = t.time_slice(c, 0).unwrap();
                let s3 = t.time_slice(c, 3).unwrap();
                let st = t.stack(&[s3, s0, s3]).unwrap();
                let m = t.mean_time(c).unwrap();
                let a = reduce(t, st, 14);
                let b = reduce(t, m, 15);
                t.add(a, b).unwrap()
            },
        );
    }

    #[test]
    fn smooth_spike_and_cross_entropy() {
        let alpha = Tensor::new(vec![3], vec![0.8, 1.3, 0.5]).unwrap();
        check(
            vec![seeded(&[4, 2, 3], 16), alpha, seeded(&[3, 4], 17)],
            |t, v| {
                let s = t
                    .spike(
                        v[0],
                        Threshold::Scalar(0.1),
                        Some(v[1]),
                        SurrogateSpec::default(),
                        SpikeMode::Smooth,
                    )
                    .unwrap();
                let m = t.mean_time(s).unwrap();
                let logits = t.affine(m, v[2], None).unwrap();
                t.cross_entropy(logits, &[3, 0]).unwrap()
            },
        );
    }

    #[test]
    fn heaviside_spike_uses_surrogate_backward() {
        let mut tape = Tape::new();
        let u = tape.param(Tensor::new(vec![1, 1, 3], vec![0.5, 1.0, 1.5]).unwrap());
        let d = tape.constant(Tensor::new(vec![1, 1, 3], vec![1.0, 1.0, 1.0]).unwrap());
        let s = tape
            .spike(
                u,
                Threshold::Detached(d),
                None,
                SurrogateSpec::default(),
                SpikeMode::Heaviside,
            )
            .unwrap();
        assert_eq!(tape.value(s).data(), &[0.0, 1.0, 1.0]);
        let g = tape
            .backward_with(s, Tensor::filled(&[1, 1, 3], 1.0))
            .unwrap();
        let spec = SurrogateSpec::default();
        let gu = g.get(u).unwrap().data();
        assert_eq!(gu, &[spec.grad(-0.5), spec.grad(0.0), spec.grad(0.5)]);
        assert!(g.get(d).is_none());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut tape = Tape::new();
        let x = tape.constant(seeded(&[4, 1, 2], 3));
        let w = tape.param(seeded(&[2, 2], 4));
        let y = tape.affine(x, w, None).unwrap();
        let g = tape.backward_with(y, Tensor::zeros(&[4, 1, 2])).unwrap();
        assert!(g.get(w).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_model_matches_least_squares_gradient() {
        // loss = Σ_r Σ_o (x·W)_ro · y_ro, so dL/dW = xᵀ y.
        let x = seeded(&[6, 3], 21);
        let y = seeded(&[6, 2], 22);
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let w = tape.param(seeded(&[3, 2], 23));
        let out = tape.affine(xv, w, None).unwrap();
        let loss = tape.weighted_sum(out, &y).unwrap();
        let g = tape.backward(loss).unwrap();
        for i in 0..3 {
            for o in 0..2 {
                let expected: f64 = (0..6)
                    .map(|r| x.data()[r * 3 + i] * y.data()[r * 2 + o])
                    .sum();
                assert!((g.get(w).unwrap().data()[i * 2 + o] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[4, 1, 2]));
        let w = tape.param(Tensor::zeros(&[3, 2]));
        assert!(tape.affine(x, w, None).is_err());
        let k = tape.constant(Tensor::zeros(&[3, 2]));
        assert!(tape.convolve(x, k).is_err());
        assert!(tape.time_slice(x, 4).is_err());
        assert!(tape.backward(x).is_err());
    }
}
