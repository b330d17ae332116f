//! Safe strided matrix multiply on top of [`Scalar::gemm`].

use crate::autodiff::tensor::Scalar;

/// Shape and strides of a matrix view into a flat slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Layout {
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl Layout {
    pub fn row_major(rows: usize, cols: usize) -> Self {
        Layout { rows, cols, rs: cols, cs: 1 }
    }

    /// Row-major view whose rows are `row_stride` apart, e.g. a column block
    /// of a wider matrix.
    pub fn strided(rows: usize, cols: usize, row_stride: usize) -> Self {
        Layout {
            rows,
            cols,
            rs: row_stride,
            cs: 1,
        }
    }

    pub fn t(self) -> Self {
        Layout {
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    fn span(self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.rs + (self.cols - 1) * self.cs + 1
        }
    }

    fn strides(self) -> (isize, isize) {
        (self.rs as isize, self.cs as isize)
    }
}

/// `C = A·B`, or `C += A·B` when `accumulate` is set.
pub(crate) fn gemm<T: Scalar>(a: &[T], la: Layout, b: &[T], lb: Layout, c: &mut [T], lc: Layout, accumulate: bool) {
    assert_eq!(la.cols, lb.rows, "gemm inner dimensions");
    assert_eq!((lc.rows, lc.cols), (la.rows, lb.cols), "gemm output shape");
    assert!(la.span() <= a.len() && lb.span() <= b.len() && lc.span() <= c.len(), "gemm view out of bounds");
    let (m, k, n) = (la.rows, la.cols, lb.cols);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            for i in 0..m {
                for j in 0..n {
                    c[i * lc.rs + j * lc.cs] = T::zero();
                }
            }
        }
        return;
    }
    let beta = if accumulate { T::one() } else { T::zero() };
    // SAFETY: all three views were bounds-checked above, and `c` is a unique
    // borrow so it cannot alias `a` or `b`.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            la.strides(),
            b.as_ptr(),
            lb.strides(),
            beta,
            c.as_mut_ptr(),
            lc.strides(),
        );
    }
}
