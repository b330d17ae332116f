//! Central finite-difference oracle for checking analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Mode, Padding, Tensor, Var};
use crate::error::{Error, Result};

/// Perturbation used by the central difference.
pub const FD_STEP: f64 = 1e-4;

/// Relative-error bound for the per-operation checks in [`op_suite`].
pub const OP_TOLERANCE: f64 = 1e-4;

/// Gradients smaller than this are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub elements: usize,
    /// Elements whose central difference straddled a switching point (ReLU,
    /// max-pool winner) and were judged against a one-sided difference.
    pub kinks: usize,
}

impl GradCheck {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }
}

/// Per-element `|a − n| / max(|a|, |n|, REL_FLOOR)`, maximised over all
/// elements of all tensors.
pub fn max_rel_error(analytic: &[Tensor<f64>], numeric: &[Tensor<f64>]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| a.data().iter().zip(n.data()))
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}

/// `(f(x + h·e_i) − f(x − h·e_i)) / 2h` for every element of every input.
pub fn central_difference<F>(inputs: &[Tensor<f64>], step: f64, mut f: F) -> Result<Vec<Tensor<f64>>>
where
    F: FnMut(&[Tensor<f64>]) -> Result<f64>,
{
    let mut work = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for k in 0..inputs.len() {
        let mut grad = Tensor::zeros(inputs[k].shape());
        for i in 0..inputs[k].len() {
            let orig = inputs[k].data()[i];
            work[k].data_mut()[i] = orig + step;
            let plus = f(&work)?;
            work[k].data_mut()[i] = orig - step;
            let minus = f(&work)?;
            work[k].data_mut()[i] = orig;
            grad.data_mut()[i] = (plus - minus) / (2.0 * step);
        }
        out.push(grad);
    }
    Ok(out)
}

/// Builds the graph once with every input as a trainable leaf, runs
/// backward, and compares against [`central_difference`] of the same graph.
pub fn check<F>(name: &str, inputs: &[Tensor<f64>], build: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    check_with_step(name, inputs, FD_STEP, build)
}

/// [`check`] with an explicit finite-difference step.
pub fn check_with_step<F>(name: &str, inputs: &[Tensor<f64>], step: f64, build: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let analytic = analytic_grads(inputs, &build)?;
    let numeric = central_difference(inputs, step, |xs| {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.constant(x.clone())).collect();
        let loss = build(&mut g, &vars)?;
        Ok(g.value(loss).item())
    })?;
    Ok(GradCheck {
        name: name.to_string(),
        max_rel_error: max_rel_error(&analytic, &numeric),
        elements: inputs.iter().map(Tensor::len).sum(),
        kinks: 0,
    })
}

/// Gradient check for piecewise-smooth functions.
///
/// Each element is compared against the central difference and both
/// one-sided differences `(f(x+h) − f(x))/h` and `(f(x) − f(x−h))/h`, keeping
/// the smallest relative error. Where `f` is smooth over `[x−h, x+h]` the
/// central difference is the tightest; where a switching point lies inside
/// the step, the analytic (sub)gradient equals the one-sided derivative on the
/// side that does not cross it. `tolerance` decides which elements count as
/// kinks in the report.
pub fn check_piecewise<F>(name: &str, inputs: &[Tensor<f64>], step: f64, tolerance: f64, build: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let analytic = analytic_grads(inputs, &build)?;
    let eval = |xs: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.constant(x.clone())).collect();
        let loss = build(&mut g, &vars)?;
        Ok(g.value(loss).item())
    };
    let base = eval(inputs)?;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR);
    let mut work = inputs.to_vec();
    let (mut worst, mut kinks) = (0.0f64, 0);
    for k in 0..inputs.len() {
        for i in 0..inputs[k].len() {
            let orig = inputs[k].data()[i];
            work[k].data_mut()[i] = orig + step;
            let plus = eval(&work)?;
            work[k].data_mut()[i] = orig - step;
            let minus = eval(&work)?;
            work[k].data_mut()[i] = orig;
            let a = analytic[k].data()[i];
            let central = rel(a, (plus - minus) / (2.0 * step));
            let one_sided = rel(a, (plus - base) / step).min(rel(a, (base - minus) / step));
            if central > tolerance && one_sided <= tolerance {
                kinks += 1;
            }
            worst = worst.max(central.min(one_sided));
        }
    }
    Ok(GradCheck {
        name: name.to_string(),
        max_rel_error: worst,
        elements: inputs.iter().map(Tensor::len).sum(),
        kinks,
    })
}

pub fn analytic_grads<F>(inputs: &[Tensor<f64>], build: &F) -> Result<Vec<Tensor<f64>>>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.param(x.clone())).collect();
    let loss = build(&mut g, &vars)?;
    if g.value(loss).len() != 1 {
        return Err(Error::contract("gradient check needs a scalar loss"));
    }
    g.backward(loss)?;
    Ok(vars
        .iter()
        .map(|&v| g.grad(v).unwrap_or_else(|| Tensor::zeros(g.shape(v))))
        .collect())
}

fn uniform(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Magnitudes in `[0.05, 1)` so ReLU kinks stay outside the step.
fn off_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let v: f64 = rng.random_range(0.05..1.0);
        if rng.random::<bool>() {
            v
        } else {
            -v
        }
    })
}

/// Reduces an output to a scalar through a fixed random projection, so every
/// output element contributes a distinct weight to the loss.
fn project(g: &mut Graph<f64>, out: Var, seed: u64) -> Result<Var> {
    let r = uniform(g.shape(out), &mut ChaCha8Rng::seed_from_u64(seed));
    let r = g.constant(r);
    let prod = g.mul(out, r)?;
    Ok(g.sum(prod))
}

/// Checks every differentiable operation of the engine on small random
/// inputs in 64-bit precision. Max pooling goes through
/// [`check_piecewise`]; everything else through [`check`].
pub fn op_suite(seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let conv = [uniform(&[2, 5, 6, 2], &mut rng), uniform(&[3, 2, 2, 3], &mut rng), uniform(&[3], &mut rng)];
    for (name, padding, stride) in [
        ("conv2d_same", Padding::Same, (1, 1)),
        ("conv2d_valid", Padding::Valid, (1, 1)),
        ("conv2d_strided", Padding::Same, (2, 3)),
    ] {
        out.push(check(name, &conv, |g, v| {
            let y = g.conv2d(v[0], v[1], v[2], stride, padding)?;
            project(g, y, 1)
        })?);
    }

    let fm = uniform(&[2, 6, 7, 2], &mut rng);
    out.push(check_piecewise("maxpool2d", std::slice::from_ref(&fm), FD_STEP, OP_TOLERANCE, |g, v| {
        let y = g.maxpool2d(v[0], (2, 3))?;
        project(g, y, 2)
    })?);
    out.push(check("avgpool_freq", &[fm], |g, v| {
        let y = g.avgpool_freq(v[0])?;
        project(g, y, 3)
    })?);

    let dense = [uniform(&[3, 4], &mut rng), uniform(&[4, 5], &mut rng), uniform(&[5], &mut rng)];
    out.push(check("dense", &dense, |g, v| {
        let y = g.dense(v[0], v[1], Some(v[2]))?;
        project(g, y, 4)
    })?);
    let logits = [uniform(&[3, 5], &mut rng)];
    out.push(check("softmax", &logits, |g, v| {
        let y = g.softmax(v[0])?;
        project(g, y, 5)
    })?);
    let targets = Tensor::new(&[3, 5], vec![0.2, 0.8, 0., 0., 0., 0., 0., 1., 0., 0., 0.1, 0.1, 0.1, 0.3, 0.4])?;
    out.push(check("softmax+cross_entropy", &logits, |g, v| {
        let p = g.softmax(v[0])?;
        g.cross_entropy(p, &targets)
    })?);

    let (din, h) = (3, 4);
    let mut gru = vec![uniform(&[2, 4, din], &mut rng)];
    for _ in 0..2 {
        gru.push(uniform(&[din, 3 * h], &mut rng));
        gru.push(uniform(&[h, 3 * h], &mut rng));
        gru.push(uniform(&[3 * h], &mut rng));
    }
    out.push(check("gru_bidirectional", &gru, |g, v| {
        let y = g.gru_bidirectional(v[0], [v[1], v[2], v[3], v[4], v[5], v[6]])?;
        project(g, y, 6)
    })?);

    let bn = [uniform(&[3, 2, 2, 3], &mut rng), uniform(&[3], &mut rng), uniform(&[3], &mut rng)];
    let (rm, rv) = ([0.1, -0.2, 0.3], [0.5, 1.5, 2.0]);
    for (name, mode) in [("batchnorm_train", Mode::Train), ("batchnorm_infer", Mode::Infer)] {
        out.push(check(name, &bn, |g, v| {
            let (y, _) = g.batchnorm_raw(v[0], v[1], v[2], &rm, &rv, 1e-5, mode)?;
            project(g, y, 7)
        })?);
    }

    let x = [off_zero(&[4, 3], &mut rng)];
    out.push(check("relu", &x, |g, v| {
        let y = g.relu(v[0]);
        project(g, y, 8)
    })?);
    out.push(check("tanh", &x, |g, v| {
        let y = g.tanh(v[0]);
        project(g, y, 9)
    })?);
    out.push(check("sigmoid", &x, |g, v| {
        let y = g.sigmoid(v[0]);
        project(g, y, 10)
    })?);
    out.push(check("dropout", &x, |g, v| {
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let y = g.dropout(v[0], 0.5, Mode::Train, &mut r)?;
        project(g, y, 11)
    })?);

    let fm = uniform(&[2, 3, 4, 2], &mut rng);
    let w = uniform(&[2, 4], &mut rng);
    out.push(check("to_sequence", std::slice::from_ref(&fm), |g, v| {
        let y = g.to_sequence(v[0])?;
        project(g, y, 12)
    })?);
    out.push(check("scale_time", &[fm, w.clone()], |g, v| {
        let y = g.scale_time(v[0], v[1])?;
        project(g, y, 13)
    })?);
    let seq = uniform(&[2, 4, 5], &mut rng);
    out.push(check("weighted_sum_time", &[seq.clone(), w], |g, v| {
        let y = g.weighted_sum_time(v[0], v[1])?;
        project(g, y, 14)
    })?);
    out.push(check("last_step", &[seq], |g, v| {
        let y = g.last_step(v[0])?;
        project(g, y, 15)
    })?);
    Ok(out)
}
