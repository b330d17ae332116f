//! Channel-last 2-D convolution kernels.
//!
//! Input layout is `N×F×T×Cin`, kernel layout `kf×kt×Cin×Cout`. Each sample
//! is unrolled into a patch matrix so that the convolution becomes a single
//! matrix product with the kernel viewed as `(kf·kt·Cin)×Cout`.

use crate::autodiff::linalg::{gemm, Layout};
use crate::autodiff::tensor::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding so that `out = ceil(in / stride)`.
    Same,
    /// No padding; `out = floor((in - k) / stride) + 1`.
    Valid,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub f: usize,
    pub t: usize,
    pub cin: usize,
    pub kf: usize,
    pub kt: usize,
    pub cout: usize,
    pub sf: usize,
    pub st: usize,
    pub pad_f: usize,
    pub pad_t: usize,
    pub of: usize,
    pub ot: usize,
}

fn out_dim(input: usize, k: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(input);
            Some((out, total / 2))
        }
        Padding::Valid => (k <= input).then(|| ((input - k) / stride + 1, 0)),
    }
}

impl ConvGeom {
    /// `input` is `[N, F, T, C]` or `[F, T, C]`.
    pub fn new(
        input: &[usize],
        kernel: &[usize],
        bias: &[usize],
        stride: (usize, usize),
        padding: Padding,
    ) -> Result<Self> {
        let (n, f, t, cin) = match *input {
            [f, t, c] => (1, f, t, c),
            [n, f, t, c] => (n, f, t, c),
            _ => return Err(Error::dim(format!("conv2d input must be rank 3 or 4, got {input:?}"))),
        };
        let [kf, kt, kcin, cout] = *kernel else {
            return Err(Error::dim(format!("conv2d kernel must be rank 4, got {kernel:?}")));
        };
        if kcin != cin {
            return Err(Error::dim(format!(
                "conv2d input has {cin} channels but kernel expects {kcin}"
            )));
        }
        if bias != [cout] {
            return Err(Error::dim(format!("conv2d bias {bias:?} does not match {cout} filters")));
        }
        if stride.0 == 0 || stride.1 == 0 {
            return Err(Error::contract("conv2d stride must be >= 1"));
        }
        let (of, pad_f) = out_dim(f, kf, stride.0, padding)
            .ok_or_else(|| Error::dim(format!("kernel height {kf} exceeds input height {f}")))?;
        let (ot, pad_t) = out_dim(t, kt, stride.1, padding)
            .ok_or_else(|| Error::dim(format!("kernel width {kt} exceeds input width {t}")))?;
        Ok(ConvGeom {
            n,
            f,
            t,
            cin,
            kf,
            kt,
            cout,
            sf: stride.0,
            st: stride.1,
            pad_f,
            pad_t,
            of,
            ot,
        })
    }

    pub fn out_shape(&self, rank: usize) -> Vec<usize> {
        if rank == 3 {
            vec![self.of, self.ot, self.cout]
        } else {
            vec![self.n, self.of, self.ot, self.cout]
        }
    }

    pub fn out_len(&self) -> usize {
        self.n * self.of * self.ot * self.cout
    }

    /// Input coordinate for output position `o` and kernel tap `k`, if inside.
    #[inline]
    fn src(o: usize, k: usize, stride: usize, pad: usize, limit: usize) -> Option<usize> {
        let p = (o * stride + k).checked_sub(pad)?;
        (p < limit).then_some(p)
    }
}

/// Unrolls the receptive field of every output position of sample `n` into
/// one row of `cols` (`(of·ot) × (kf·kt·cin)`), zero-filling padding.
fn im2col<T: Scalar>(g: &ConvGeom, x: &[T], n: usize, cols: &mut [T]) {
    let width = g.kf * g.kt * g.cin;
    for of in 0..g.of {
        for ot in 0..g.ot {
            let row = &mut cols[(of * g.ot + ot) * width..(of * g.ot + ot + 1) * width];
            for i in 0..g.kf {
                let fi = ConvGeom::src(of, i, g.sf, g.pad_f, g.f);
                for j in 0..g.kt {
                    let dst = &mut row[(i * g.kt + j) * g.cin..(i * g.kt + j + 1) * g.cin];
                    match (fi, ConvGeom::src(ot, j, g.st, g.pad_t, g.t)) {
                        (Some(fi), Some(tj)) => {
                            let base = ((n * g.f + fi) * g.t + tj) * g.cin;
                            dst.copy_from_slice(&x[base..base + g.cin]);
                        }
                        _ => dst.fill(T::zero()),
                    }
                }
            }
        }
    }
}

/// Adds the rows of `cols` back onto the input positions they were read from.
fn col2im<T: Scalar>(g: &ConvGeom, cols: &[T], n: usize, dx: &mut [T]) {
    let width = g.kf * g.kt * g.cin;
    for of in 0..g.of {
        for ot in 0..g.ot {
            let row = &cols[(of * g.ot + ot) * width..(of * g.ot + ot + 1) * width];
            for i in 0..g.kf {
                let Some(fi) = ConvGeom::src(of, i, g.sf, g.pad_f, g.f) else {
                    continue;
                };
                for j in 0..g.kt {
                    let Some(tj) = ConvGeom::src(ot, j, g.st, g.pad_t, g.t) else {
                        continue;
                    };
                    let base = ((n * g.f + fi) * g.t + tj) * g.cin;
                    let src = &row[(i * g.kt + j) * g.cin..(i * g.kt + j + 1) * g.cin];
                    for (d, &v) in dx[base..base + g.cin].iter_mut().zip(src) {
                        *d += v;
                    }
                }
            }
        }
    }
}

pub(crate) fn forward<T: Scalar>(g: &ConvGeom, x: &[T], k: &[T], b: &[T]) -> Vec<T> {
    let positions = g.of * g.ot;
    let width = g.kf * g.kt * g.cin;
    let mut out = vec![T::zero(); g.out_len()];
    let mut cols = vec![T::zero(); positions * width];
    for n in 0..g.n {
        im2col(g, x, n, &mut cols);
        let y = &mut out[n * positions * g.cout..(n + 1) * positions * g.cout];
        for row in y.chunks_exact_mut(g.cout) {
            row.copy_from_slice(b);
        }
        gemm(
            &cols,
            Layout::row_major(positions, width),
            k,
            Layout::row_major(width, g.cout),
            y,
            Layout::row_major(positions, g.cout),
            true,
        );
    }
    out
}

pub(crate) struct ConvGrads<T> {
    pub dx: Option<Vec<T>>,
    pub dk: Option<Vec<T>>,
    pub db: Option<Vec<T>>,
}

pub(crate) fn backward<T: Scalar>(
    g: &ConvGeom,
    x: &[T],
    k: &[T],
    dy: &[T],
    need: (bool, bool, bool),
) -> ConvGrads<T> {
    let positions = g.of * g.ot;
    let width = g.kf * g.kt * g.cin;
    let mut dx = need.0.then(|| vec![T::zero(); x.len()]);
    let mut dk = need.1.then(|| vec![T::zero(); k.len()]);
    let db = need.2.then(|| {
        let mut db = vec![T::zero(); g.cout];
        for row in dy.chunks_exact(g.cout) {
            db.iter_mut().zip(row).for_each(|(a, &d)| *a += d);
        }
        db
    });
    let mut cols = vec![T::zero(); positions * width];
    for n in 0..g.n {
        let dy_n = &dy[n * positions * g.cout..(n + 1) * positions * g.cout];
        if let Some(dk) = dk.as_mut() {
            im2col(g, x, n, &mut cols);
            gemm(
                &cols,
                Layout::row_major(positions, width).t(),
                dy_n,
                Layout::row_major(positions, g.cout),
                dk,
                Layout::row_major(width, g.cout),
                true,
            );
        }
        if let Some(dx) = dx.as_mut() {
            gemm(
                dy_n,
                Layout::row_major(positions, g.cout),
                k,
                Layout::row_major(width, g.cout).t(),
                &mut cols,
                Layout::row_major(positions, width),
                false,
            );
            col2im(g, &cols, n, dx);
        }
    }
    ConvGrads { dx, dk, db }
}
