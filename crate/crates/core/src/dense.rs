//! Blocked LU factorization and triangular solves on column-major complex
//! storage. The trailing updates go through `matrixmultiply::zgemm`, which
//! carries almost all of the flops.

use matrixmultiply::{zgemm, CGemmOption};
use num_complex::Complex64;

use crate::operator::{CMatrix, ZERO};

const BLOCK: usize = 48;

/// C[m×n] ← beta·C + alpha·A[m×k]·B[k×n]; all column-major with the given
/// leading dimensions.
///
/// # Safety
/// Pointers must address the stated extents, and C must not overlap A or B.
#[allow(clippy::too_many_arguments)]
unsafe fn gemm_raw(
    m: usize,
    k: usize,
    n: usize,
    alpha: Complex64,
    a: *const Complex64,
    lda: usize,
    b: *const Complex64,
    ldb: usize,
    beta: Complex64,
    c: *mut Complex64,
    ldc: usize,
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    // Complex64 is #[repr(C)] { re, im }, the same layout as [f64; 2].
    zgemm(
        CGemmOption::Standard,
        CGemmOption::Standard,
        m,
        k,
        n,
        [alpha.re, alpha.im],
        a.cast(),
        1,
        lda as isize,
        b.cast(),
        1,
        ldb as isize,
        [beta.re, beta.im],
        c.cast(),
        1,
        ldc as isize,
    );
}

/// Dense product A·B.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    let mut c = CMatrix::zeros(a.nrows(), b.ncols());
    // SAFETY: fresh output buffer, extents taken from the matrices themselves.
    unsafe {
        gemm_raw(
            a.nrows(),
            a.ncols(),
            b.ncols(),
            Complex64::new(1.0, 0.0),
            a.as_ptr(),
            a.nrows(),
            b.as_ptr(),
            b.nrows(),
            ZERO,
            c.as_mut_ptr(),
            c.nrows(),
        );
    }
    c
}

/// y ← A·x.
pub(crate) fn matvec_into(a: &CMatrix, x: &[Complex64], y: &mut [Complex64]) {
    assert_eq!(a.ncols(), x.len(), "matvec shape mismatch");
    assert_eq!(a.nrows(), y.len(), "matvec shape mismatch");
    // SAFETY: y is a distinct mutable slice of the right length.
    unsafe {
        gemm_raw(
            a.nrows(),
            a.ncols(),
            1,
            Complex64::new(1.0, 0.0),
            a.as_ptr(),
            a.nrows(),
            x.as_ptr(),
            x.len(),
            ZERO,
            y.as_mut_ptr(),
            y.len(),
        );
    }
}

/// C ← A·B for column-major slices, A m×k, B k×n.
pub(crate) fn matmul_slices(
    m: usize,
    k: usize,
    n: usize,
    a: &[Complex64],
    b: &[Complex64],
    c: &mut [Complex64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: extents checked above; c is a distinct mutable slice.
    unsafe {
        gemm_raw(
            m,
            k,
            n,
            Complex64::new(1.0, 0.0),
            a.as_ptr(),
            m,
            b.as_ptr(),
            k,
            ZERO,
            c.as_mut_ptr(),
            m,
        );
    }
}

/// In-place LU with partial pivoting: on return `a` holds L (unit lower,
/// below the diagonal) and U (on and above). `piv[j]` is the row swapped with
/// row `j` at step `j`.
pub(crate) fn lu_in_place(a: &mut CMatrix) -> Vec<usize> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut piv = vec![0; n];
    let data = a.as_mut_slice();

    let mut j0 = 0;
    while j0 < n {
        let jb = BLOCK.min(n - j0);
        let j1 = j0 + jb;

        for j in j0..j1 {
            let mut p = j;
            let mut best = data[j + j * n].norm_sqr();
            for i in j + 1..n {
                let v = data[i + j * n].norm_sqr();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[j] = p;
            if p != j {
                for c in 0..n {
                    data.swap(j + c * n, p + c * n);
                }
            }
            let pivot = data[j + j * n];
            if pivot == ZERO {
                continue;
            }
            let inv = pivot.inv();
            for i in j + 1..n {
                data[i + j * n] *= inv;
            }
            for c in j + 1..j1 {
                let f = data[j + c * n];
                if f == ZERO {
                    continue;
                }
                let (left, right) = data.split_at_mut(c * n);
                let lcol = &left[j * n..j * n + n];
                let col = &mut right[..n];
                for i in j + 1..n {
                    col[i] -= lcol[i] * f;
                }
            }
        }

        if j1 < n {
            // U12 ← L11⁻¹ A12
            for c in j1..n {
                for j in j0..j1 {
                    let f = data[j + c * n];
                    if f == ZERO {
                        continue;
                    }
                    for i in j + 1..j1 {
                        let l = data[i + j * n];
                        data[i + c * n] -= l * f;
                    }
                }
            }
            // A22 ← A22 − L21·U12
            let base = data.as_mut_ptr();
            // SAFETY: L21 (rows j1.., cols j0..j1), U12 (rows j0..j1, cols
            // j1..) and A22 (rows j1.., cols j1..) are disjoint blocks of the
            // same n×n buffer.
            unsafe {
                gemm_raw(
                    n - j1,
                    jb,
                    n - j1,
                    Complex64::new(-1.0, 0.0),
                    base.add(j1 + j0 * n),
                    n,
                    base.add(j0 + j1 * n),
                    n,
                    Complex64::new(1.0, 0.0),
                    base.add(j1 + j1 * n),
                    n,
                );
            }
        }
        j0 = j1;
    }
    piv
}

/// Solve A·X = B in place given the output of [`lu_in_place`].
pub(crate) fn lu_solve_in_place(lu: &CMatrix, piv: &[usize], b: &mut CMatrix) {
    let n = lu.nrows();
    assert_eq!(b.nrows(), n, "right-hand side has wrong row count");
    let r = b.ncols();
    let l = lu.as_slice();
    let bd = b.as_mut_slice();

    for (j, &p) in piv.iter().enumerate() {
        if p != j {
            for c in 0..r {
                bd.swap(j + c * n, p + c * n);
            }
        }
    }

    // forward: unit lower
    let mut j0 = 0;
    while j0 < n {
        let j1 = (j0 + BLOCK).min(n);
        for c in 0..r {
            let col = &mut bd[c * n..c * n + n];
            for j in j0..j1 {
                let f = col[j];
                if f == ZERO {
                    continue;
                }
                let lcol = &l[j * n..j * n + n];
                for i in j + 1..j1 {
                    col[i] -= lcol[i] * f;
                }
            }
        }
        if j1 < n {
            let bp = bd.as_mut_ptr();
            // SAFETY: rows j0..j1 and rows j1..n of B are disjoint; L is a
            // separate allocation.
            unsafe {
                gemm_raw(
                    n - j1,
                    j1 - j0,
                    r,
                    Complex64::new(-1.0, 0.0),
                    l.as_ptr().add(j1 + j0 * n),
                    n,
                    bp.add(j0),
                    n,
                    Complex64::new(1.0, 0.0),
                    bp.add(j1),
                    n,
                );
            }
        }
        j0 = j1;
    }

    // backward: upper
    let mut j1 = n;
    while j1 > 0 {
        let j0 = j1.saturating_sub(BLOCK);
        for c in 0..r {
            let col = &mut bd[c * n..c * n + n];
            for j in (j0..j1).rev() {
                col[j] /= l[j + j * n];
                let f = col[j];
                if f == ZERO {
                    continue;
                }
                let ucol = &l[j * n..j * n + n];
                for i in j0..j {
                    col[i] -= ucol[i] * f;
                }
            }
        }
        if j0 > 0 {
            let bp = bd.as_mut_ptr();
            // SAFETY: rows j0..j1 and rows 0..j0 of B are disjoint.
            unsafe {
                gemm_raw(
                    j0,
                    j1 - j0,
                    r,
                    Complex64::new(-1.0, 0.0),
                    l.as_ptr().add(j0 * n),
                    n,
                    bp.add(j0),
                    n,
                    Complex64::new(1.0, 0.0),
                    bp,
                    n,
                );
            }
        }
        j1 = j0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize, seed: u64) -> CMatrix {
        // xorshift, deterministic and dependency free
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        CMatrix::from_fn(n, n, |_, _| Complex64::new(next(), next()))
    }

    #[test]
    fn matmul_matches_nalgebra() {
        let a = test_matrix(37, 1);
        let b = test_matrix(37, 2);
        let diff = crate::operator::max_norm(&(matmul(&a, &b) - &a * &b));
        assert!(diff < 1e-13, "{diff}");
    }

    #[test]
    fn blocked_lu_solves_across_block_boundaries() {
        for n in [1, 5, BLOCK - 1, BLOCK, BLOCK + 3, 2 * BLOCK + 17] {
            let a = test_matrix(n, n as u64);
            let x_true = test_matrix(n, 99).columns(0, 3.min(n)).into_owned();
            let mut b = &a * &x_true;
            let mut lu = a.clone();
            let piv = lu_in_place(&mut lu);
            lu_solve_in_place(&lu, &piv, &mut b);
            let err = crate::operator::max_norm(&(&b - &x_true));
            assert!(err < 1e-10, "n = {n}: {err}");
        }
    }
}

/// Compressed-row copy of a dense matrix, for repeated matrix-vector
/// products with Liouvillians that are mostly zero.
#[derive(Clone, Debug)]
pub(crate) struct SparseRows {
    indptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseRows {
    /// Keep entries with |a_ij| > rel_drop · max|a|.
    pub(crate) fn from_dense(a: &CMatrix, rel_drop: f64) -> Self {
        let cut = rel_drop * a.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let mut indptr = Vec::with_capacity(a.nrows() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        indptr.push(0);
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let z = a[(i, j)];
                if z.norm() > cut {
                    cols.push(j);
                    vals.push(z);
                }
            }
            indptr.push(cols.len());
        }
        Self { indptr, cols, vals }
    }

    pub(crate) fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y ← scale · A x + y
    pub(crate) fn mul_add(&self, x: &[Complex64], scale: Complex64, y: &mut [Complex64]) {
        for (i, out) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
            let mut acc = Complex64::new(0.0, 0.0);
            for (v, &c) in self.vals[lo..hi].iter().zip(&self.cols[lo..hi]) {
                acc += v * x[c];
            }
            *out += scale * acc;
        }
    }
}
