use crate::autodiff::tensor::Scalar;
use crate::error::{Error, Result};

/// Splits a rank-3 `F×T×C` or rank-4 `N×F×T×C` shape into `(n, f, t, c)`.
pub(crate) fn nftc(shape: &[usize], op: &str) -> Result<(usize, usize, usize, usize)> {
    match *shape {
        [f, t, c] => Ok((1, f, t, c)),
        [n, f, t, c] => Ok((n, f, t, c)),
        _ => Err(Error::dim(format!("{op} expects rank 3 or 4 input, got {shape:?}"))),
    }
}

pub(crate) fn with_rank(rank: usize, n: usize, f: usize, t: usize, c: usize) -> Vec<usize> {
    if rank == 3 {
        vec![f, t, c]
    } else {
        vec![n, f, t, c]
    }
}

/// Non-overlapping max pooling (window equals stride). Trailing rows and
/// columns that do not fill a window are dropped.
///
/// Returns the pooled values, output shape, and for each output element the
/// flat input index of the winning element. Ties keep the first position in
/// row-major window order.
pub(crate) fn maxpool_forward<T: Scalar>(
    shape: &[usize],
    x: &[T],
    window: (usize, usize),
) -> Result<(Vec<T>, Vec<usize>, Vec<usize>)> {
    let (n, f, t, c) = nftc(shape, "maxpool2d")?;
    let (wf, wt) = window;
    if wf == 0 || wt == 0 {
        return Err(Error::contract("maxpool2d window must be >= 1"));
    }
    if wf > f || wt > t {
        return Err(Error::dim(format!(
            "maxpool2d window ({wf},{wt}) larger than input ({f},{t})"
        )));
    }
    let (of, ot) = (f / wf, t / wt);
    let mut out = Vec::with_capacity(n * of * ot * c);
    let mut arg = Vec::with_capacity(n * of * ot * c);
    for b in 0..n {
        for i in 0..of {
            for j in 0..ot {
                for ch in 0..c {
                    let mut best = T::neg_infinity();
                    let mut best_idx = usize::MAX;
                    for di in 0..wf {
                        for dj in 0..wt {
                            let idx = ((b * f + i * wf + di) * t + j * wt + dj) * c + ch;
                            let v = x[idx];
                            if best_idx == usize::MAX || v > best || (v.is_nan() && !best.is_nan()) {
                                best = v;
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    arg.push(best_idx);
                }
            }
        }
    }
    Ok((out, arg, with_rank(shape.len(), n, of, ot, c)))
}

pub(crate) fn maxpool_backward<T: Scalar>(in_len: usize, argmax: &[usize], dy: &[T]) -> Vec<T> {
    let mut dx = vec![T::zero(); in_len];
    for (&idx, &d) in argmax.iter().zip(dy) {
        dx[idx] += d;
    }
    dx
}

/// Mean over the frequency axis: `N×F×T×C -> N×1×T×C`.
pub(crate) fn avgpool_freq_forward<T: Scalar>(shape: &[usize], x: &[T]) -> Result<(Vec<T>, Vec<usize>)> {
    let (n, f, t, c) = nftc(shape, "avgpool_freq")?;
    let inv = T::one() / T::lit(f as f64);
    let mut out = vec![T::zero(); n * t * c];
    for b in 0..n {
        for i in 0..f {
            let src = &x[(b * f + i) * t * c..(b * f + i + 1) * t * c];
            let dst = &mut out[b * t * c..(b + 1) * t * c];
            for (o, &v) in dst.iter_mut().zip(src) {
                *o += v;
            }
        }
    }
    for o in out.iter_mut() {
        *o *= inv;
    }
    Ok((out, with_rank(shape.len(), n, 1, t, c)))
}

pub(crate) fn avgpool_freq_backward<T: Scalar>(shape: &[usize], dy: &[T]) -> Vec<T> {
    let (n, f, t, c) = nftc(shape, "avgpool_freq").expect("validated in forward");
    let inv = T::one() / T::lit(f as f64);
    let mut dx = Vec::with_capacity(n * f * t * c);
    for b in 0..n {
        let src = &dy[b * t * c..(b + 1) * t * c];
        for _ in 0..f {
            dx.extend(src.iter().map(|&d| d * inv));
        }
    }
    dx
}
