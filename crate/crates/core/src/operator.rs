//! Dense complex operator algebra on composite Hilbert spaces.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>` (column-major storage). A
//! composite space is ordered photon ⊗ qubit₁ ⊗ qubit₂, the photon factor in
//! the Fock basis |0⟩..|n_max⟩ and every qubit in the basis (|g⟩, |e⟩). The
//! flat index of |n; q₁, q₂⟩ is therefore `n·4 + 2·q₁ + q₂` for two qubits,
//! with q = 0 for |g⟩ and 1 for |e⟩. [`ket_index`] converts the
//! |q₁,q₂,n⟩ ordering used in physics notation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative Hermiticity tolerance for operators built by this crate.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// A square complex matrix tagged with the dimensions of its tensor factors.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumOperator {
    data: CMatrix,
    dims: Vec<usize>,
}

impl QuantumOperator {
    pub fn new(data: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let side: usize = dims.iter().product();
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                found: data.ncols(),
            });
        }
        if dims.is_empty() || side != data.nrows() {
            return Err(Error::DimensionMismatch {
                expected: side,
                found: data.nrows(),
            });
        }
        Ok(Self { data, dims })
    }

    pub fn identity(dims: &[usize]) -> Self {
        let side = dims.iter().product();
        Self {
            data: CMatrix::identity(side, side),
            dims: dims.to_vec(),
        }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let side = dims.iter().product();
        Self {
            data: CMatrix::zeros(side, side),
            dims: dims.to_vec(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Side length of the matrix.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self {
            data: self.data.adjoint(),
            dims: self.dims.clone(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    pub fn max_norm(&self) -> f64 {
        max_norm(&self.data)
    }

    /// ‖A − A†‖_max in units of ‖A‖_max (zero for the zero matrix).
    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.data)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect() <= HERMITIAN_TOL
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            data: &self.data * Complex64::new(factor, 0.0),
            dims: self.dims.clone(),
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.check_dims(other);
        Self {
            data: &self.data * &other.data - &other.data * &self.data,
            dims: self.dims.clone(),
        }
    }

    fn check_dims(&self, other: &Self) {
        assert_eq!(self.dims, other.dims, "operator dimensions differ");
    }
}

impl std::ops::Add for &QuantumOperator {
    type Output = QuantumOperator;
    fn add(self, rhs: Self) -> QuantumOperator {
        self.check_dims(rhs);
        QuantumOperator {
            data: &self.data + &rhs.data,
            dims: self.dims.clone(),
        }
    }
}

impl std::ops::Sub for &QuantumOperator {
    type Output = QuantumOperator;
    fn sub(self, rhs: Self) -> QuantumOperator {
        self.check_dims(rhs);
        QuantumOperator {
            data: &self.data - &rhs.data,
            dims: self.dims.clone(),
        }
    }
}

impl std::ops::Mul for &QuantumOperator {
    type Output = QuantumOperator;
    fn mul(self, rhs: Self) -> QuantumOperator {
        self.check_dims(rhs);
        QuantumOperator {
            data: &self.data * &rhs.data,
            dims: self.dims.clone(),
        }
    }
}

pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let scale = max_norm(m);
    if scale == 0.0 {
        return 0.0;
    }
    max_norm(&(m - m.adjoint())) / scale
}

/// Bosonic annihilation operator truncated to |0⟩..|n_max⟩.
pub fn annihilation(n_max: usize) -> Result<QuantumOperator> {
    if n_max == 0 {
        return Err(Error::InvalidTruncation(n_max));
    }
    let d = n_max + 1;
    let mut a = CMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    QuantumOperator::new(a, vec![d])
}

/// σ⁻ = |g⟩⟨e| in the basis (|g⟩, |e⟩).
pub fn qubit_lowering() -> QuantumOperator {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 1)] = ONE;
    QuantumOperator { data: m, dims: vec![2] }
}

pub fn qubit_raising() -> QuantumOperator {
    qubit_lowering().dagger()
}

/// σ_x = σ⁻ + σ⁺.
pub fn sigma_x() -> QuantumOperator {
    let lower = qubit_lowering();
    &lower + &lower.dagger()
}

/// σ_z = σ⁺σ⁻ − σ⁻σ⁺, so |e⟩ has eigenvalue +1 and |g⟩ has −1.
pub fn sigma_z() -> QuantumOperator {
    let lower = qubit_lowering();
    let raise = lower.dagger();
    &(&raise * &lower) - &(&lower * &raise)
}

/// Kronecker product A ⊗ B.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Lift `op` acting on subsystem `slot` to the composite space `dims`.
pub fn embed(op: &QuantumOperator, slot: usize, dims: &[usize]) -> Result<QuantumOperator> {
    if slot >= dims.len() {
        return Err(Error::SlotOutOfRange {
            slot,
            count: dims.len(),
        });
    }
    if op.dim() != dims[slot] {
        return Err(Error::DimensionMismatch {
            expected: dims[slot],
            found: op.dim(),
        });
    }
    let left: usize = dims[..slot].iter().product();
    let right: usize = dims[slot + 1..].iter().product();
    let lifted = kron(
        &kron(&CMatrix::identity(left, left), op.matrix()),
        &CMatrix::identity(right, right),
    );
    QuantumOperator::new(lifted, dims.to_vec())
}

/// Qubit basis state, in the order used by the composite basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QubitState {
    Ground,
    Excited,
}

/// Flat basis index of the ket written |q₁,q₂,…,n⟩ (qubits first, photon
/// number last) in the internal photon ⊗ qubits ordering.
pub fn ket_index(qubits: &[QubitState], photons: usize) -> usize {
    qubits.iter().fold(photons, |acc, q| {
        2 * acc
            + match q {
                QubitState::Ground => 0,
                QubitState::Excited => 1,
            }
    })
}

/// Spectral decomposition of a Hermitian matrix.
///
/// `values` are ascending; column `k` of `vectors` is the eigenvector of
/// `values[k]`, with its largest-magnitude component made real-positive.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    /// V·diag(values)·V†
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::new(self.values[k], 0.0);
        }
        scaled * self.vectors.adjoint()
    }
}

const EIG_MAX_ITER: usize = 10_000;
const DEGENERACY_TOL: f64 = 1e-12;

pub fn eig_hermitian(h: &QuantumOperator) -> Result<EigenDecomposition> {
    eig_hermitian_matrix(h.matrix())
}

pub fn eig_hermitian_matrix(h: &CMatrix) -> Result<EigenDecomposition> {
    let defect = hermitian_defect(h);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let n = h.nrows();
    // symmetrize so the backend sees an exactly Hermitian input
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig =
        SymmetricEigen::try_new(sym, f64::EPSILON, EIG_MAX_ITER).ok_or(Error::NoConvergence)?;

    let mut order: Vec<usize> = (0..n).collect();
    // stable: exact ties keep the backend's column order
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }

    let scale = values.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[start] <= DEGENERACY_TOL * scale {
            end += 1;
        }
        if end - start > 1 {
            gram_schmidt(&mut vectors, start, end);
        }
        start = end;
    }

    for mut col in vectors.column_iter_mut() {
        let mut best = 0;
        let mut best_norm = -1.0;
        for (i, z) in col.iter().enumerate() {
            // tie rule: first index wins unless clearly larger
            if z.norm() > best_norm * (1.0 + 1e-12) {
                best = i;
                best_norm = z.norm();
            }
        }
        let pivot = col[best];
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            col *= phase;
            col[best] = Complex64::new(col[best].re, 0.0);
        }
    }

    Ok(EigenDecomposition { values, vectors })
}

fn gram_schmidt(v: &mut CMatrix, start: usize, end: usize) {
    for j in start..end {
        for k in start..j {
            let proj = v.column(k).dotc(&v.column(j));
            let basis = v.column(k).into_owned();
            let mut col = v.column_mut(j);
            col.axpy(-proj, &basis, ONE);
        }
        let norm = v.column(j).norm();
        v.column_mut(j).unscale_mut(norm);
    }
}

/// LU factorization with partial pivoting and a singularity diagnostic.
pub struct LuFactor {
    lu: CMatrix,
    piv: Vec<usize>,
    pivot_ratio: f64,
}

/// Pivots smaller than this fraction of the largest pivot are treated as zero.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

impl LuFactor {
    pub fn new(mut a: CMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let piv = crate::dense::lu_in_place(&mut a);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..a.nrows() {
            let p = a[(i, i)].norm();
            lo = lo.min(p);
            hi = hi.max(p);
        }
        let pivot_ratio = if hi > 0.0 { lo / hi } else { 0.0 };
        if !(pivot_ratio > SINGULAR_PIVOT_RATIO) {
            return Err(Error::Singular { pivot_ratio });
        }
        Ok(Self {
            lu: a,
            piv,
            pivot_ratio,
        })
    }

    /// min |pivot| / max |pivot|, a cheap reciprocal-condition proxy.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    pub fn solve_vec(&self, b: &CVector) -> Result<CVector> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: b.len(),
            });
        }
        let mut x = CMatrix::from_column_slice(b.len(), 1, b.as_slice());
        crate::dense::lu_solve_in_place(&self.lu, &self.piv, &mut x);
        Ok(CVector::from_column_slice(x.as_slice()))
    }

    pub fn solve_mat(&self, b: &CMatrix) -> Result<CMatrix> {
        let mut x = b.clone();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, b: &mut CMatrix) -> Result<()> {
        if b.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: b.nrows(),
            });
        }
        crate::dense::lu_solve_in_place(&self.lu, &self.piv, b);
        Ok(())
    }
}

/// Tolerance factor on ‖Ax − b‖ ≤ tol·(‖A‖‖x‖ + ‖b‖).
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

/// Solve A·x = b by LU with partial pivoting, verifying the residual.
pub fn solve_linear(a: &CMatrix, b: &CVector) -> Result<CVector> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.len(),
        });
    }
    let lu = LuFactor::new(a.clone())?;
    let x = lu.solve_vec(b)?;
    let residual = (a * &x - b).norm();
    let bound = SOLVE_RESIDUAL_TOL * (a.norm() * x.norm() + b.norm());
    if residual > bound {
        return Err(Error::Residual {
            residual,
            tolerance: bound,
        });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn annihilation_entries() {
        let a = annihilation(1).unwrap();
        assert_eq!(a.matrix()[(0, 1)], ONE);
        assert_eq!(a.matrix()[(0, 0)], ZERO);
        assert_eq!(a.matrix()[(1, 0)], ZERO);

        let a2 = annihilation(2).unwrap();
        assert_abs_diff_eq!(a2.matrix()[(1, 2)].re, 1.41421356, epsilon = 1e-8);

        let a3 = annihilation(3).unwrap();
        let number = &a3.dagger() * &a3;
        for n in 0..4 {
            assert_abs_diff_eq!(number.matrix()[(n, n)].re, n as f64, epsilon = 1e-14);
        }
        assert!(matches!(annihilation(0), Err(Error::InvalidTruncation(0))));
    }

    #[test]
    fn pauli_algebra() {
        let lo = qubit_lowering();
        let hi = lo.dagger();
        let anti = &(&lo * &hi) + &(&hi * &lo);
        assert_eq!(anti, QuantumOperator::identity(&[2]));

        let sx = sigma_x();
        assert_eq!(&sx * &sx, QuantumOperator::identity(&[2]));

        let eig = eig_hermitian(&sigma_z()).unwrap();
        assert_eq!(eig.values, vec![-1.0, 1.0]);
    }

    #[test]
    fn embed_disjoint_slots_commute() {
        let dims = [3, 2];
        let a = annihilation(2).unwrap();
        let num = embed(&(&a.dagger() * &a), 0, &dims).unwrap();
        let sz = embed(&sigma_z(), 1, &dims).unwrap();
        assert_eq!(&num * &sz, &sz * &num);
        assert_eq!(sz.trace(), ZERO);
        assert_eq!(
            embed(&QuantumOperator::identity(&[2]), 1, &dims).unwrap(),
            QuantumOperator::identity(&dims)
        );
    }

    #[test]
    fn embed_errors() {
        assert!(matches!(
            embed(&sigma_z(), 2, &[3, 2]),
            Err(Error::SlotOutOfRange { slot: 2, count: 2 })
        ));
        assert!(matches!(
            embed(&sigma_z(), 0, &[3, 2]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ket_label_ordering() {
        use QubitState::*;
        // |e,g,0⟩ → photon 0, qubit1 excited
        assert_eq!(ket_index(&[Excited, Ground], 0), 2);
        assert_eq!(ket_index(&[Ground, Excited], 0), 1);
        assert_eq!(ket_index(&[Ground, Ground], 1), 4);
        assert_eq!(ket_index(&[Excited], 3), 7);
    }

    #[test]
    fn eig_diagonal_and_sigma_x() {
        let h = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2.0), c(0.0), c(1.0)]));
        let eig = eig_hermitian_matrix(&h).unwrap();
        assert_eq!(eig.values, vec![0.0, 1.0, 2.0]);

        let eig = eig_hermitian(&sigma_x()).unwrap();
        assert_abs_diff_eq!(eig.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[1], 1.0, epsilon = 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // (|g⟩ − |e⟩)/√2 with the first (largest, tied) component positive
        assert_abs_diff_eq!(eig.vectors[(0, 0)].re, s, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.vectors[(1, 0)].re, -s, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.vectors[(0, 1)].re, s, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.vectors[(1, 1)].re, s, epsilon = 1e-12);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = qubit_lowering().into_matrix();
        assert!(matches!(eig_hermitian_matrix(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn solve_small_systems() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2.0), c(4.0)]));
        let x = solve_linear(&a, &CVector::from_vec(vec![c(2.0), c(8.0)])).unwrap();
        assert_abs_diff_eq!(x[0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1].re, 2.0, epsilon = 1e-15);

        let b = CVector::from_vec(vec![Complex64::new(0.3, -1.0), c(7.0), I]);
        let x = solve_linear(&CMatrix::identity(3, 3), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn solve_rejects_singular() {
        let mut a = CMatrix::identity(3, 3);
        a[(2, 2)] = ZERO;
        let err = solve_linear(&a, &CVector::from_element(3, ONE)).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }
}
