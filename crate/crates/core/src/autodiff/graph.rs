use rand::Rng;

use crate::autodiff::conv::{self, ConvGeom, Padding};
use crate::autodiff::gru::{self, DirParams, GruCache, GruGeom};
use crate::autodiff::linalg::{gemm, Layout};
use crate::autodiff::norm::{self, BatchNormState, BatchStats, BnCache};
use crate::autodiff::pool;
use crate::autodiff::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Lower clamp applied to probabilities before the logarithm in
/// [`Graph::cross_entropy`].
pub const LOG_CLAMP: f64 = 1e-7;

/// Handle to a tensor recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sum(Var),
    SumSquares(Var),
    Reshape(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Dropout {
        input: Var,
        mask: Vec<T>,
    },
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Var,
        geom: ConvGeom,
    },
    MaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    AvgPoolFreq(Var),
    Dense {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        din: usize,
        dout: usize,
    },
    Softmax(Var),
    Gru {
        input: Var,
        params: [Var; 6],
        geom: GruGeom,
        cache: GruCache<T>,
    },
    BatchNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        channels: usize,
        cache: BnCache<T>,
    },
    CrossEntropy {
        probs: Var,
        targets: Vec<T>,
        rows: usize,
    },
    ToSequence {
        input: Var,
        dims: (usize, usize, usize, usize),
    },
    ScaleTime {
        input: Var,
        weights: Var,
        dims: (usize, usize, usize, usize),
    },
    WeightedSumTime {
        seq: Var,
        weights: Var,
        dims: (usize, usize, usize),
    },
    LastStep {
        input: Var,
        dims: (usize, usize, usize),
    },
}

#[derive(Debug)]
struct Node<T: Scalar> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// A recorded computation. Nodes are appended in evaluation order, so the
/// arena index order is a topological order and reverse traversal is a valid
/// backward schedule.
#[derive(Debug)]
pub struct Graph<T: Scalar = f32> {
    nodes: Vec<Node<T>>,
    leaf_grads: Vec<Option<Vec<T>>>,
    last_visits: usize,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            leaf_grads: Vec::new(),
            last_visits: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.leaf_grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn unary(&mut self, input: Var, value: Tensor<T>, op: Op<T>) -> Var {
        let rg = self.requires_grad(input);
        self.push(value, op, rg)
    }

    /// A trainable input; gradients accumulate on it during [`Graph::backward`].
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a trainable leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<Tensor<T>> {
        let g = self.leaf_grads[v.0].as_ref()?;
        Some(Tensor::new(self.shape(v), g.clone()).expect("gradient shape matches value"))
    }

    pub fn zero_grad(&mut self) {
        self.leaf_grads.iter_mut().for_each(|g| *g = None);
    }

    /// Number of nodes processed by the most recent backward pass.
    pub fn last_backward_visits(&self) -> usize {
        self.last_visits
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(format!(
                "{op}: shapes {:?} and {:?} differ",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    // ----- elementwise -----

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(self.shape(a), data)?;
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x * y).collect();
        let value = Tensor::new(self.shape(a), data)?;
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let value = self.value(a).map(|v| v * c);
        self.unary(a, value, Op::Scale(a, c))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.unary(a, value, Op::Sum(a))
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).data().iter().map(|&v| v * v).sum());
        self.unary(a, value, Op::SumSquares(a))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        Ok(self.unary(a, value, Op::Reshape(a)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(T::zero()));
        self.unary(a, value, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.tanh());
        self.unary(a, value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| T::one() / (T::one() + (-v).exp()));
        self.unary(a, value, Op::Sigmoid(a))
    }

    /// Inverted dropout: in training, each element is zeroed with
    /// probability `p` and survivors are scaled by `1/(1-p)`. Identity at
    /// inference.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, p: f64, mode: Mode, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::contract(format!("dropout probability {p} outside [0, 1)")));
        }
        if mode == Mode::Infer || p == 0.0 {
            let value = self.value(a).clone();
            return Ok(self.unary(a, value, Op::Reshape(a)));
        }
        let keep = T::lit(1.0 / (1.0 - p));
        let mask: Vec<T> = (0..self.value(a).len())
            .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
            .collect();
        let data = self.value(a).data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let value = Tensor::new(self.shape(a), data)?;
        Ok(self.unary(a, value, Op::Dropout { input: a, mask }))
    }

    // ----- layers -----

    /// 2-D convolution over `F×T×Cin` (or batched `N×F×T×Cin`) input with a
    /// `kf×kt×Cin×Cout` kernel.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, stride: (usize, usize), padding: Padding) -> Result<Var> {
        let geom = ConvGeom::new(self.shape(input), self.shape(kernel), self.shape(bias), stride, padding)?;
        let out = conv::forward(&geom, self.value(input).data(), self.value(kernel).data(), self.value(bias).data());
        let value = Tensor::new(&geom.out_shape(self.shape(input).len()), out)?;
        let rg = [input, kernel, bias].iter().any(|&v| self.requires_grad(v));
        Ok(self.push(
            value,
            Op::Conv2d {
                input,
                kernel,
                bias,
                geom,
            },
            rg,
        ))
    }

    /// Non-overlapping max pooling; the stride equals the window.
    pub fn maxpool2d(&mut self, input: Var, window: (usize, usize)) -> Result<Var> {
        let (out, argmax, shape) = pool::maxpool_forward(self.shape(input), self.value(input).data(), window)?;
        let value = Tensor::new(&shape, out)?;
        Ok(self.unary(input, value, Op::MaxPool { input, argmax }))
    }

    /// Mean over the frequency axis, `F×T×C -> 1×T×C`.
    pub fn avgpool_freq(&mut self, input: Var) -> Result<Var> {
        let (out, shape) = pool::avgpool_freq_forward(self.shape(input), self.value(input).data())?;
        let value = Tensor::new(&shape, out)?;
        Ok(self.unary(input, value, Op::AvgPoolFreq(input)))
    }

    /// Affine map over the last axis: `[..., Din] × [Din, Dout] + [Dout]`.
    pub fn dense(&mut self, input: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
        let in_shape = self.shape(input).to_vec();
        let &[din, dout] = self.shape(weight) else {
            return Err(Error::dim(format!("dense weight must be rank 2, got {:?}", self.shape(weight))));
        };
        if in_shape.last() != Some(&din) {
            return Err(Error::dim(format!("dense input {in_shape:?} does not end in {din}")));
        }
        if let Some(b) = bias {
            if self.shape(b) != [dout] {
                return Err(Error::dim(format!("dense bias {:?} does not match {dout}", self.shape(b))));
            }
        }
        let x = self.value(input).data();
        let rows = x.len() / din;
        let mut out = match bias {
            Some(b) => self.value(b).data().repeat(rows),
            None => vec![T::zero(); rows * dout],
        };
        gemm(
            x,
            Layout::row_major(rows, din),
            self.value(weight).data(),
            Layout::row_major(din, dout),
            &mut out,
            Layout::row_major(rows, dout),
            true,
        );
        let mut out_shape = in_shape;
        *out_shape.last_mut().expect("rank >= 1") = dout;
        let value = Tensor::new(&out_shape, out)?;
        let rg = self.requires_grad(input) || self.requires_grad(weight) || bias.is_some_and(|b| self.requires_grad(b));
        Ok(self.push(
            value,
            Op::Dense {
                input,
                weight,
                bias,
                din,
                dout,
            },
            rg,
        ))
    }

    /// Softmax over the last axis, computed with max subtraction.
    pub fn softmax(&mut self, input: Var) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let k = *shape.last().ok_or_else(|| Error::dim("softmax of a rank-0 tensor"))?;
        let mut out = self.value(input).data().to_vec();
        for row in out.chunks_exact_mut(k) {
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut s = T::zero();
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            row.iter_mut().for_each(|v| *v = *v / s);
        }
        let value = Tensor::new(&shape, out)?;
        Ok(self.unary(input, value, Op::Softmax(input)))
    }

    /// Bidirectional GRU over `Tseq×Din` (or `N×Tseq×Din`) input. `params`
    /// holds `[W, U, b]` for the forward then the backward direction.
    /// Output step `t` is `[h_fwd_t, h_bwd_t]`.
    pub fn gru_bidirectional(&mut self, input: Var, params: [Var; 6]) -> Result<Var> {
        let geom = GruGeom::new(
            self.shape(input),
            [
                (self.shape(params[0]), self.shape(params[1]), self.shape(params[2])),
                (self.shape(params[3]), self.shape(params[4]), self.shape(params[5])),
            ],
        )?;
        let (out, cache) = gru::forward(&geom, self.value(input).data(), self.dir_params(&params));
        let value = Tensor::new(&geom.out_shape(self.shape(input).len()), out)?;
        let rg = self.requires_grad(input) || params.iter().any(|&p| self.requires_grad(p));
        Ok(self.push(
            value,
            Op::Gru {
                input,
                params,
                geom,
                cache,
            },
            rg,
        ))
    }

    fn dir_params(&self, p: &[Var; 6]) -> [DirParams<'_, T>; 2] {
        [
            DirParams {
                w: self.value(p[0]).data(),
                u: self.value(p[1]).data(),
                b: self.value(p[2]).data(),
            },
            DirParams {
                w: self.value(p[3]).data(),
                u: self.value(p[4]).data(),
                b: self.value(p[5]).data(),
            },
        ]
    }

    /// Batch normalization over the last (channel) axis. In training mode the
    /// batch statistics are returned so the caller can update running stats.
    #[allow(clippy::too_many_arguments)]
    pub fn batchnorm_raw(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[T],
        running_var: &[T],
        epsilon: f64,
        mode: Mode,
    ) -> Result<(Var, Option<BatchStats<T>>)> {
        let c = norm::check_channels(self.shape(input), self.shape(gamma), self.shape(beta))?;
        if running_mean.len() != c || running_var.len() != c {
            return Err(Error::dim(format!("batchnorm running stats do not have {c} channels")));
        }
        let (y, cache, stats) = norm::forward(
            self.value(input).data(),
            c,
            self.value(gamma).data(),
            self.value(beta).data(),
            running_mean,
            running_var,
            epsilon,
            mode,
        );
        let value = Tensor::new(self.shape(input), y)?;
        let rg = [input, gamma, beta].iter().any(|&v| self.requires_grad(v));
        let var = self.push(
            value,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                channels: c,
                cache,
            },
            rg,
        );
        Ok((var, stats))
    }

    /// Batch normalization driven by a [`BatchNormState`]. Registers gamma and
    /// beta as trainable leaves and, in training mode, folds the batch
    /// statistics into the running averages. Returns `(output, gamma, beta)`.
    pub fn batchnorm(&mut self, input: Var, state: &mut BatchNormState<T>, mode: Mode) -> Result<(Var, Var, Var)> {
        let gamma = self.param(state.gamma.clone());
        let beta = self.param(state.beta.clone());
        let (out, stats) = self.batchnorm_raw(
            input,
            gamma,
            beta,
            state.running_mean.data(),
            state.running_var.data(),
            state.epsilon,
            mode,
        )?;
        if let Some(stats) = stats {
            state.update_running(&stats);
        }
        Ok((out, gamma, beta))
    }

    /// Mean over rows of `-Σ target·log(max(prob, 1e-7))`, for `N×K` inputs.
    pub fn cross_entropy(&mut self, probs: Var, targets: &Tensor<T>) -> Result<Var> {
        let shape = self.shape(probs).to_vec();
        if shape != targets.shape() || shape.len() != 2 {
            return Err(Error::dim(format!(
                "cross_entropy needs matching N×K inputs, got {shape:?} and {:?}",
                targets.shape()
            )));
        }
        let floor = T::lit(LOG_CLAMP);
        let rows = shape[0];
        let total: T = self
            .value(probs)
            .data()
            .iter()
            .zip(targets.data())
            .map(|(&p, &t)| -t * p.max(floor).ln())
            .sum();
        let value = Tensor::scalar(total / T::lit(rows as f64));
        Ok(self.unary(
            probs,
            value,
            Op::CrossEntropy {
                probs,
                targets: targets.data().to_vec(),
                rows,
            },
        ))
    }

    // ----- attention plumbing -----

    /// `N×F×T×C -> N×T×(F·C)`: time-major sequence with frequency and channel
    /// flattened per step.
    pub fn to_sequence(&mut self, input: Var) -> Result<Var> {
        let (n, f, t, c) = pool::nftc(self.shape(input), "to_sequence")?;
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(x.len());
        for b in 0..n {
            for ti in 0..t {
                for fi in 0..f {
                    let base = ((b * f + fi) * t + ti) * c;
                    out.extend_from_slice(&x[base..base + c]);
                }
            }
        }
        let value = Tensor::new(&[n, t, f * c], out)?;
        Ok(self.unary(
            input,
            value,
            Op::ToSequence {
                input,
                dims: (n, f, t, c),
            },
        ))
    }

    /// Multiplies every `(f, c)` entry of time column `t` by `weights[n, t]`.
    pub fn scale_time(&mut self, input: Var, weights: Var) -> Result<Var> {
        let (n, f, t, c) = pool::nftc(self.shape(input), "scale_time")?;
        if self.value(weights).len() != n * t {
            return Err(Error::dim(format!(
                "scale_time weights {:?} do not cover {n}×{t}",
                self.shape(weights)
            )));
        }
        let x = self.value(input).data();
        let a = self.value(weights).data();
        let mut out = Vec::with_capacity(x.len());
        for b in 0..n {
            for fi in 0..f {
                for ti in 0..t {
                    let w = a[b * t + ti];
                    let base = ((b * f + fi) * t + ti) * c;
                    out.extend(x[base..base + c].iter().map(|&v| v * w));
                }
            }
        }
        let value = Tensor::new(self.shape(input), out)?;
        let rg = self.requires_grad(input) || self.requires_grad(weights);
        Ok(self.push(
            value,
            Op::ScaleTime {
                input,
                weights,
                dims: (n, f, t, c),
            },
            rg,
        ))
    }

    /// `v[n] = Σ_t weights[n, t] · seq[n, t]` for `N×T×D` sequences.
    pub fn weighted_sum_time(&mut self, seq: Var, weights: Var) -> Result<Var> {
        let (n, t, d) = seq_dims(self.shape(seq), "weighted_sum_time")?;
        if self.value(weights).len() != n * t {
            return Err(Error::dim(format!(
                "weighted_sum_time weights {:?} do not cover {n}×{t}",
                self.shape(weights)
            )));
        }
        let h = self.value(seq).data();
        let a = self.value(weights).data();
        let mut out = vec![T::zero(); n * d];
        for b in 0..n {
            let acc = &mut out[b * d..(b + 1) * d];
            for ti in 0..t {
                let w = a[b * t + ti];
                for (o, &v) in acc.iter_mut().zip(&h[(b * t + ti) * d..(b * t + ti + 1) * d]) {
                    *o += w * v;
                }
            }
        }
        let shape = if self.shape(seq).len() == 2 { vec![d] } else { vec![n, d] };
        let value = Tensor::new(&shape, out)?;
        let rg = self.requires_grad(seq) || self.requires_grad(weights);
        Ok(self.push(
            value,
            Op::WeightedSumTime {
                seq,
                weights,
                dims: (n, t, d),
            },
            rg,
        ))
    }

    /// Output of the final time step of an `N×T×D` sequence.
    pub fn last_step(&mut self, input: Var) -> Result<Var> {
        let (n, t, d) = seq_dims(self.shape(input), "last_step")?;
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(n * d);
        for b in 0..n {
            out.extend_from_slice(&x[(b * t + t - 1) * d..(b * t + t) * d]);
        }
        let shape = if self.shape(input).len() == 2 { vec![d] } else { vec![n, d] };
        let value = Tensor::new(&shape, out)?;
        Ok(self.unary(
            input,
            value,
            Op::LastStep {
                input,
                dims: (n, t, d),
            },
        ))
    }

    // ----- reverse pass -----

    /// Populates gradients of `loss` with respect to every trainable leaf.
    /// Repeated calls accumulate until [`Graph::zero_grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);
        let mut visits = 0;
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            visits += 1;
            if let Op::Leaf = node.op {
                match &mut self.leaf_grads[i] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &v)| *a += v),
                    slot @ None => *slot = Some(g),
                }
                continue;
            }
            for (input, contrib) in self.local_grads(i, &g) {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, &v)| *a += v),
                    slot @ None => *slot = Some(contrib),
                }
            }
        }
        self.last_visits = visits;
        Ok(())
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Vector-Jacobian products of node `i` for upstream gradient `g`.
    fn local_grads(&self, i: usize, g: &[T]) -> Vec<(Var, Vec<T>)> {
        let node = &self.nodes[i];
        let val = |v: Var| self.nodes[v.0].value.data();
        let zip_map = |a: &[T], f: &dyn Fn(T, T) -> T| -> Vec<T> { a.iter().zip(g).map(|(&x, &d)| f(x, d)).collect() };
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::Add(a, b) => vec![(*a, g.to_vec()), (*b, g.to_vec())],
            Op::Mul(a, b) => vec![
                (*a, zip_map(val(*b), &|y, d| y * d)),
                (*b, zip_map(val(*a), &|x, d| x * d)),
            ],
            Op::Scale(a, c) => vec![(*a, g.iter().map(|&d| d * *c).collect())],
            Op::Sum(a) => vec![(*a, vec![g[0]; val(*a).len()])],
            Op::SumSquares(a) => {
                let two = T::lit(2.0);
                vec![(*a, val(*a).iter().map(|&x| two * x * g[0]).collect())]
            }
            Op::Reshape(a) => vec![(*a, g.to_vec())],
            Op::Relu(a) => vec![(*a, zip_map(val(*a), &|x, d| if x > T::zero() { d } else { T::zero() }))],
            Op::Tanh(a) => vec![(*a, zip_map(node.value.data(), &|y, d| d * (T::one() - y * y)))],
            Op::Sigmoid(a) => vec![(*a, zip_map(node.value.data(), &|y, d| d * y * (T::one() - y)))],
            Op::Dropout { input, mask } => vec![(*input, zip_map(mask, &|m, d| m * d))],
            Op::Conv2d {
                input,
                kernel,
                bias,
                geom,
            } => {
                let r = conv::backward(
                    geom,
                    val(*input),
                    val(*kernel),
                    g,
                    (self.needs(*input), self.needs(*kernel), self.needs(*bias)),
                );
                [(*input, r.dx), (*kernel, r.dk), (*bias, r.db)]
                    .into_iter()
                    .filter_map(|(v, d)| d.map(|d| (v, d)))
                    .collect()
            }
            Op::MaxPool { input, argmax } => vec![(*input, pool::maxpool_backward(val(*input).len(), argmax, g))],
            Op::AvgPoolFreq(a) => vec![(*a, pool::avgpool_freq_backward(self.nodes[a.0].value.shape(), g))],
            Op::Dense {
                input,
                weight,
                bias,
                din,
                dout,
            } => {
                let (din, dout) = (*din, *dout);
                let x = val(*input);
                let rows = x.len() / din;
                let mut out = Vec::new();
                if self.needs(*input) {
                    let mut dx = vec![T::zero(); x.len()];
                    gemm(
                        g,
                        Layout::row_major(rows, dout),
                        val(*weight),
                        Layout::row_major(din, dout).t(),
                        &mut dx,
                        Layout::row_major(rows, din),
                        false,
                    );
                    out.push((*input, dx));
                }
                if self.needs(*weight) {
                    let mut dw = vec![T::zero(); din * dout];
                    gemm(
                        x,
                        Layout::row_major(rows, din).t(),
                        g,
                        Layout::row_major(rows, dout),
                        &mut dw,
                        Layout::row_major(din, dout),
                        false,
                    );
                    out.push((*weight, dw));
                }
                if let Some(b) = bias.filter(|&b| self.needs(b)) {
                    let mut db = vec![T::zero(); dout];
                    for grow in g.chunks_exact(dout) {
                        db.iter_mut().zip(grow).for_each(|(a, &v)| *a += v);
                    }
                    out.push((b, db));
                }
                out
            }
            Op::Softmax(a) => {
                let y = node.value.data();
                let k = *node.value.shape().last().expect("rank >= 1");
                let mut dx = Vec::with_capacity(y.len());
                for (yrow, grow) in y.chunks_exact(k).zip(g.chunks_exact(k)) {
                    let dot: T = yrow.iter().zip(grow).map(|(&a, &b)| a * b).sum();
                    dx.extend(yrow.iter().zip(grow).map(|(&yv, &gv)| yv * (gv - dot)));
                }
                vec![(*a, dx)]
            }
            Op::Gru {
                input,
                params,
                geom,
                cache,
            } => {
                let (dx, [fwd, bwd]) = gru::backward(geom, val(*input), self.dir_params(params), cache, g);
                vec![
                    (*input, dx),
                    (params[0], fwd.dw),
                    (params[1], fwd.du),
                    (params[2], fwd.db),
                    (params[3], bwd.dw),
                    (params[4], bwd.du),
                    (params[5], bwd.db),
                ]
            }
            Op::BatchNorm {
                input,
                gamma,
                beta,
                channels,
                cache,
            } => {
                let (dx, dgamma, dbeta) = norm::backward(g, *channels, val(*gamma), cache);
                vec![(*input, dx), (*gamma, dgamma), (*beta, dbeta)]
            }
            Op::CrossEntropy { probs, targets, rows } => {
                let floor = T::lit(LOG_CLAMP);
                let inv_n = T::one() / T::lit(*rows as f64);
                let dp = val(*probs)
                    .iter()
                    .zip(targets)
                    .map(|(&p, &t)| if p > floor { -t / p * inv_n * g[0] } else { T::zero() })
                    .collect();
                vec![(*probs, dp)]
            }
            Op::ToSequence { input, dims } => {
                let (n, f, t, c) = *dims;
                let mut dx = vec![T::zero(); n * f * t * c];
                let mut src = 0;
                for b in 0..n {
                    for ti in 0..t {
                        for fi in 0..f {
                            let base = ((b * f + fi) * t + ti) * c;
                            dx[base..base + c].copy_from_slice(&g[src..src + c]);
                            src += c;
                        }
                    }
                }
                vec![(*input, dx)]
            }
            Op::ScaleTime { input, weights, dims } => {
                let (n, f, t, c) = *dims;
                let x = val(*input);
                let a = val(*weights);
                let mut dx = vec![T::zero(); x.len()];
                let mut da = vec![T::zero(); n * t];
                for b in 0..n {
                    for fi in 0..f {
                        for ti in 0..t {
                            let base = ((b * f + fi) * t + ti) * c;
                            let w = a[b * t + ti];
                            let mut s = T::zero();
                            for k in base..base + c {
                                dx[k] = g[k] * w;
                                s += g[k] * x[k];
                            }
                            da[b * t + ti] += s;
                        }
                    }
                }
                vec![(*input, dx), (*weights, da)]
            }
            Op::WeightedSumTime { seq, weights, dims } => {
                let (n, t, d) = *dims;
                let h = val(*seq);
                let a = val(*weights);
                let mut dh = vec![T::zero(); h.len()];
                let mut da = vec![T::zero(); n * t];
                for b in 0..n {
                    let gv = &g[b * d..(b + 1) * d];
                    for ti in 0..t {
                        let base = (b * t + ti) * d;
                        let w = a[b * t + ti];
                        let mut s = T::zero();
                        for k in 0..d {
                            dh[base + k] = w * gv[k];
                            s += h[base + k] * gv[k];
                        }
                        da[b * t + ti] = s;
                    }
                }
                vec![(*seq, dh), (*weights, da)]
            }
            Op::LastStep { input, dims } => {
                let (n, t, d) = *dims;
                let mut dx = vec![T::zero(); n * t * d];
                for b in 0..n {
                    dx[(b * t + t - 1) * d..(b * t + t) * d].copy_from_slice(&g[b * d..(b + 1) * d]);
                }
                vec![(*input, dx)]
            }
        }
    }
}

fn seq_dims(shape: &[usize], op: &str) -> Result<(usize, usize, usize)> {
    match *shape {
        [t, d] => Ok((1, t, d)),
        [n, t, d] => Ok((n, t, d)),
        _ => Err(Error::dim(format!("{op} expects rank 2 or 3 input, got {shape:?}"))),
    }
}
