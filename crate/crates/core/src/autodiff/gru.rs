//! Fused bidirectional GRU with hand-written backpropagation through time.
//!
//! Per direction, with gates packed as `[z | r | n]` along the last axis of
//! `W: D×3H`, `U: H×3H`, `b: 3H`:
//!
//! ```text
//! z  = σ(x·W_z + h·U_z + b_z)
//! r  = σ(x·W_r + h·U_r + b_r)
//! n  = tanh(x·W_n + (r ⊙ h)·U_n + b_n)
//! h' = z ⊙ h + (1 − z) ⊙ n
//! ```
//!
//! The reset gate is applied to the previous state before the recurrent
//! matrix multiply. Both directions start from a zero state.

use crate::autodiff::linalg::{gemm, Layout};
use crate::autodiff::tensor::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub(crate) struct GruGeom {
    pub n: usize,
    pub steps: usize,
    pub din: usize,
    pub hidden: usize,
}

impl GruGeom {
    /// `input` is `[N, T, D]` or `[T, D]`; `w`, `u`, `b` are the shapes of one
    /// direction's parameters (both directions must agree).
    pub fn new(input: &[usize], dirs: [(&[usize], &[usize], &[usize]); 2]) -> Result<Self> {
        let (n, steps, din) = match *input {
            [t, d] => (1, t, d),
            [n, t, d] => (n, t, d),
            _ => return Err(Error::dim(format!("gru input must be rank 2 or 3, got {input:?}"))),
        };
        let (w0, _, _) = dirs[0];
        let [_, h3] = *w0 else {
            return Err(Error::dim(format!("gru input weight must be rank 2, got {w0:?}")));
        };
        if h3 % 3 != 0 || h3 == 0 {
            return Err(Error::dim(format!("gru gate width {h3} is not a multiple of 3")));
        }
        let hidden = h3 / 3;
        for (w, u, b) in dirs {
            if w != [din, 3 * hidden] || u != [hidden, 3 * hidden] || b != [3 * hidden] {
                return Err(Error::dim(format!(
                    "gru parameters W{w:?} U{u:?} b{b:?} do not match input width {din} and hidden {hidden}"
                )));
            }
        }
        Ok(GruGeom { n, steps, din, hidden })
    }

    pub fn out_shape(&self, rank: usize) -> Vec<usize> {
        if rank == 2 {
            vec![self.steps, 2 * self.hidden]
        } else {
            vec![self.n, self.steps, 2 * self.hidden]
        }
    }
}

/// Activations saved for one direction: per `(batch, step)` in processing
/// order, the previous state and the gate values.
#[derive(Clone, Debug)]
pub(crate) struct DirCache<T> {
    h_prev: Vec<T>,
    z: Vec<T>,
    r: Vec<T>,
    cand: Vec<T>,
}

#[derive(Clone, Debug)]
pub(crate) struct GruCache<T> {
    dirs: [DirCache<T>; 2],
}

pub(crate) struct DirParams<'a, T> {
    pub w: &'a [T],
    pub u: &'a [T],
    pub b: &'a [T],
}

fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

fn time_index(g: &GruGeom, dir: usize, s: usize) -> usize {
    if dir == 0 {
        s
    } else {
        g.steps - 1 - s
    }
}

/// `X·W + b` for every `(batch, step)` row at once: `(n·steps) × 3H`.
fn input_projection<T: Scalar>(g: &GruGeom, x: &[T], p: &DirParams<'_, T>) -> Vec<T> {
    let rows = g.n * g.steps;
    let h3 = 3 * g.hidden;
    let mut a = p.b.repeat(rows);
    gemm(
        x,
        Layout::row_major(rows, g.din),
        p.w,
        Layout::row_major(g.din, h3),
        &mut a,
        Layout::row_major(rows, h3),
        true,
    );
    a
}

pub(crate) fn forward<T: Scalar>(
    g: &GruGeom,
    x: &[T],
    params: [DirParams<'_, T>; 2],
) -> (Vec<T>, GruCache<T>) {
    let (n, h) = (g.n, g.hidden);
    let h3 = 3 * h;
    let mut out = vec![T::zero(); n * g.steps * 2 * h];
    let mut caches = Vec::with_capacity(2);
    let mut rec = vec![T::zero(); n * 2 * h];
    let mut cand_pre = vec![T::zero(); n * h];
    let mut rh = vec![T::zero(); n * h];
    for (dir, p) in params.iter().enumerate() {
        let len = n * g.steps * h;
        let mut cache = DirCache {
            h_prev: vec![T::zero(); len],
            z: vec![T::zero(); len],
            r: vec![T::zero(); len],
            cand: vec![T::zero(); len],
        };
        let xw = input_projection(g, x, p);
        let mut state = vec![T::zero(); n * h];
        for s in 0..g.steps {
            let t = time_index(g, dir, s);
            // recurrent contribution to the update and reset gates
            gemm(
                &state,
                Layout::row_major(n, h),
                p.u,
                Layout::strided(h, 2 * h, h3),
                &mut rec,
                Layout::row_major(n, 2 * h),
                false,
            );
            for b in 0..n {
                let a = &xw[(b * g.steps + t) * h3..(b * g.steps + t + 1) * h3];
                let c = (b * g.steps + s) * h;
                for j in 0..h {
                    let z = sigmoid(a[j] + rec[b * 2 * h + j]);
                    let r = sigmoid(a[h + j] + rec[b * 2 * h + h + j]);
                    cache.z[c + j] = z;
                    cache.r[c + j] = r;
                    rh[b * h + j] = r * state[b * h + j];
                    cand_pre[b * h + j] = a[2 * h + j];
                }
            }
            gemm(
                &rh,
                Layout::row_major(n, h),
                &p.u[2 * h..],
                Layout::strided(h, h, h3),
                &mut cand_pre,
                Layout::row_major(n, h),
                true,
            );
            for b in 0..n {
                let c = (b * g.steps + s) * h;
                let o = (b * g.steps + t) * 2 * h + dir * h;
                for j in 0..h {
                    let cand = cand_pre[b * h + j].tanh();
                    let z = cache.z[c + j];
                    let hp = state[b * h + j];
                    cache.h_prev[c + j] = hp;
                    cache.cand[c + j] = cand;
                    let hn = z * hp + (T::one() - z) * cand;
                    state[b * h + j] = hn;
                    out[o + j] = hn;
                }
            }
        }
        caches.push(cache);
    }
    let bwd = caches.pop().expect("two directions");
    let fwd = caches.pop().expect("two directions");
    (out, GruCache { dirs: [fwd, bwd] })
}

pub(crate) struct DirGrads<T> {
    pub dw: Vec<T>,
    pub du: Vec<T>,
    pub db: Vec<T>,
}

pub(crate) fn backward<T: Scalar>(
    g: &GruGeom,
    x: &[T],
    params: [DirParams<'_, T>; 2],
    cache: &GruCache<T>,
    dy: &[T],
) -> (Vec<T>, [DirGrads<T>; 2]) {
    let (n, h) = (g.n, g.hidden);
    let h3 = 3 * h;
    let rows = n * g.steps;
    let mut dx = vec![T::zero(); x.len()];
    let mut grads = Vec::with_capacity(2);
    // per-step scratch, all `n × …` row-major
    let mut da = vec![T::zero(); n * h3];
    let mut drh = vec![T::zero(); n * h];
    let mut hp = vec![T::zero(); n * h];
    let mut rh = vec![T::zero(); n * h];
    for (dir, p) in params.iter().enumerate() {
        let c = &cache.dirs[dir];
        let mut du = vec![T::zero(); p.u.len()];
        // pre-activation gradients of every (batch, time) row, in time order
        let mut da_all = vec![T::zero(); rows * h3];
        let mut dh = vec![T::zero(); n * h];
        let mut dh_prev = vec![T::zero(); n * h];
        for s in (0..g.steps).rev() {
            let t = time_index(g, dir, s);
            for b in 0..n {
                let o = (b * g.steps + t) * 2 * h + dir * h;
                let ci = (b * g.steps + s) * h;
                for j in 0..h {
                    let k = b * h + j;
                    dh[k] += dy[o + j];
                    let (z, cand, hv) = (c.z[ci + j], c.cand[ci + j], c.h_prev[ci + j]);
                    hp[k] = hv;
                    rh[k] = c.r[ci + j] * hv;
                    dh_prev[k] = dh[k] * z;
                    da[b * h3 + j] = dh[k] * (hv - cand) * z * (T::one() - z);
                    da[b * h3 + 2 * h + j] = dh[k] * (T::one() - z) * (T::one() - cand * cand);
                }
            }
            // candidate path through (r ⊙ h)·U_n
            gemm(
                &da[2 * h..],
                Layout::strided(n, h, h3),
                &p.u[2 * h..],
                Layout::strided(h, h, h3).t(),
                &mut drh,
                Layout::row_major(n, h),
                false,
            );
            for b in 0..n {
                let ci = (b * g.steps + s) * h;
                for j in 0..h {
                    let k = b * h + j;
                    let r = c.r[ci + j];
                    dh_prev[k] += drh[k] * r;
                    da[b * h3 + h + j] = drh[k] * hp[k] * r * (T::one() - r);
                }
            }
            gemm(
                &hp,
                Layout::row_major(n, h).t(),
                &da,
                Layout::strided(n, 2 * h, h3),
                &mut du,
                Layout::strided(h, 2 * h, h3),
                true,
            );
            gemm(
                &rh,
                Layout::row_major(n, h).t(),
                &da[2 * h..],
                Layout::strided(n, h, h3),
                &mut du[2 * h..],
                Layout::strided(h, h, h3),
                true,
            );
            gemm(
                &da,
                Layout::strided(n, 2 * h, h3),
                p.u,
                Layout::strided(h, 2 * h, h3).t(),
                &mut dh_prev,
                Layout::row_major(n, h),
                true,
            );
            for b in 0..n {
                let row = (b * g.steps + t) * h3;
                da_all[row..row + h3].copy_from_slice(&da[b * h3..(b + 1) * h3]);
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
        let mut dw = vec![T::zero(); p.w.len()];
        gemm(
            x,
            Layout::row_major(rows, g.din).t(),
            &da_all,
            Layout::row_major(rows, h3),
            &mut dw,
            Layout::row_major(g.din, h3),
            false,
        );
        gemm(
            &da_all,
            Layout::row_major(rows, h3),
            p.w,
            Layout::row_major(g.din, h3).t(),
            &mut dx,
            Layout::row_major(rows, g.din),
            true,
        );
        let mut db = vec![T::zero(); h3];
        for row in da_all.chunks_exact(h3) {
            db.iter_mut().zip(row).for_each(|(a, &d)| *a += d);
        }
        grads.push(DirGrads { dw, du, db });
    }
    let bwd = grads.pop().expect("two directions");
    let fwd = grads.pop().expect("two directions");
    (dx, [fwd, bwd])
}
