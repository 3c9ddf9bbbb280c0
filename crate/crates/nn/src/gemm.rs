//! Bounds-checked wrappers around the `matrixmultiply` kernels.
//!
//! Views are described by an offset into a flat buffer plus row and column
//! strides, which lets callers address per-head or per-timestep slices of a
//! larger activation buffer without copying.

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct MatRef<'a, F> {
    pub data: &'a [F],
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

#[derive(Debug)]
pub struct MatMut<'a, F> {
    pub data: &'a mut [F],
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

fn last_index(offset: usize, rows: usize, cols: usize, rs: usize, cs: usize) -> Option<usize> {
    if rows == 0 || cols == 0 {
        None
    } else {
        Some(offset + (rows - 1) * rs + (cols - 1) * cs)
    }
}

impl<'a, F> MatRef<'a, F> {
    /// Contiguous row-major `rows × cols` matrix.
    pub fn new(data: &'a [F], rows: usize, cols: usize) -> Self {
        Self { data, offset: 0, rows, cols, rs: cols, cs: 1 }
    }

    pub fn strided(data: &'a [F], offset: usize, rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        Self { data, offset, rows, cols, rs, cs }
    }

    /// The transpose is free: swap shape and strides.
    pub fn t(self) -> Self {
        Self { rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs, ..self }
    }

    fn check(&self) {
        if let Some(last) = last_index(self.offset, self.rows, self.cols, self.rs, self.cs) {
            assert!(last < self.data.len(), "matrix view out of bounds ({last} >= {})", self.data.len());
        }
    }
}

impl<'a, F> MatMut<'a, F> {
    pub fn new(data: &'a mut [F], rows: usize, cols: usize) -> Self {
        Self { data, offset: 0, rows, cols, rs: cols, cs: 1 }
    }

    pub fn strided(data: &'a mut [F], offset: usize, rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        Self { data, offset, rows, cols, rs, cs }
    }

    fn check(&self) {
        if let Some(last) = last_index(self.offset, self.rows, self.cols, self.rs, self.cs) {
            assert!(last < self.data.len(), "matrix view out of bounds ({last} >= {})", self.data.len());
        }
    }
}

/// `c ← alpha · a · b + beta · c`.
///
/// With `beta == 0` the previous contents of `c` are ignored.
pub fn gemm<F: Scalar>(alpha: F, a: MatRef<'_, F>, b: MatRef<'_, F>, beta: F, c: MatMut<'_, F>) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert_eq!(a.rows, c.rows, "row count differs");
    assert_eq!(b.cols, c.cols, "column count differs");
    a.check();
    b.check();
    c.check();
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    if a.cols == 0 {
        for i in 0..c.rows {
            for j in 0..c.cols {
                let at = c.offset + i * c.rs + j * c.cs;
                c.data[at] = if beta == F::zero() { F::zero() } else { beta * c.data[at] };
            }
        }
        return;
    }
    // SAFETY: every view was bounds-checked above, and `c` is borrowed
    // mutably so it cannot alias `a` or `b`.
    unsafe {
        F::gemm_raw(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr().add(a.offset),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr().add(b.offset),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr().add(c.offset),
            c.rs as isize,
            c.cs as isize,
        );
    }
}

/// Row-major convenience form: `c[m×n] ← alpha · op(a) · op(b) + beta · c`.
///
/// `a` is stored `m×k` (or `k×m` when `trans_a`), `b` is `k×n` (or `n×k`).
#[allow(clippy::too_many_arguments)]
pub fn matmul<F: Scalar>(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    k: usize,
    n: usize,
    alpha: F,
    a: &[F],
    b: &[F],
    beta: F,
    c: &mut [F],
) {
    let a = if trans_a { MatRef::new(a, k, m).t() } else { MatRef::new(a, m, k) };
    let b = if trans_b { MatRef::new(b, n, k).t() } else { MatRef::new(b, k, n) };
    gemm(alpha, a, b, beta, MatMut::new(c, m, n));
}
