//! Dense density matrices over small qubit registers.
//!
//! Qubit 0 is the leftmost symbol of a basis label `|i0 i1 ... i(n-1)>`, so the
//! basis index of that label is `sum_j i_j 2^(n-1-j)`. All entropies are in bits.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Entrywise Hermiticity tolerance.
pub const TOL_HERM: f64 = 1e-10;
/// Trace tolerance for a valid state.
pub const TOL_TRACE: f64 = 1e-10;
/// Negative eigenvalues in `[-EIGEN_CLAMP, 0)` are treated as round-off.
pub const EIGEN_CLAMP: f64 = 1e-9;
/// Tolerance on `U U^dagger = I`.
pub const TOL_UNITARY: f64 = 1e-10;
/// Largest imaginary residue accepted from `Tr(rho O)` with Hermitian `O`.
pub const TOL_IMAG: f64 = 1e-9;

pub const DEFAULT_MAX_QUBITS: usize = 12;
/// Environment variable overriding [`DEFAULT_MAX_QUBITS`].
pub const MAX_QUBITS_ENV: &str = "MULTICORR_MAX_QUBITS";

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Register size cap, read once from [`MAX_QUBITS_ENV`].
pub fn max_qubits() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var(MAX_QUBITS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .filter(|&v: &usize| v >= 1)
            .unwrap_or(DEFAULT_MAX_QUBITS)
    })
}

pub fn check_capacity(n_qubits: usize) -> Result<()> {
    let limit = max_qubits();
    if n_qubits > limit {
        return Err(Error::Capacity {
            requested: n_qubits,
            limit,
        });
    }
    Ok(())
}

/// Position of `qubit` inside a full basis index.
#[inline]
pub(crate) fn qubit_mask(qubit: usize, n_qubits: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

/// Full-register offsets for every sub-label over `qubits`; entry `a` places the
/// bits of `a` (most significant first) at the listed qubit positions.
pub(crate) fn scatter_table(qubits: &[usize], n_qubits: usize) -> Vec<usize> {
    let m = qubits.len();
    (0..1usize << m)
        .map(|a| {
            qubits.iter().enumerate().fold(0, |acc, (t, &q)| {
                if (a >> (m - 1 - t)) & 1 == 1 {
                    acc | qubit_mask(q, n_qubits)
                } else {
                    acc
                }
            })
        })
        .collect()
}

/// Sorted set of distinct qubit indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(transparent)]
pub struct QubitSet(Vec<usize>);

impl QubitSet {
    /// Sorts the indices; duplicates are rejected.
    pub fn new(mut qubits: Vec<usize>) -> Result<Self> {
        qubits.sort_unstable();
        if let Some(w) = qubits.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateQubit(w[0]));
        }
        Ok(Self(qubits))
    }

    pub fn all(n_qubits: usize) -> Self {
        Self((0..n_qubits).collect())
    }

    pub fn single(qubit: usize) -> Self {
        Self(vec![qubit])
    }

    pub fn from_mask(mask: usize, n_qubits: usize) -> Self {
        Self((0..n_qubits).filter(|q| mask >> q & 1 == 1).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, qubit: usize) -> bool {
        self.0.binary_search(&qubit).is_ok()
    }

    pub fn check_within(&self, n_qubits: usize) -> Result<()> {
        match self.0.last() {
            Some(&q) if q >= n_qubits => Err(Error::IndexOutOfRange { index: q, n_qubits }),
            _ => Ok(()),
        }
    }

    pub fn complement(&self, n_qubits: usize) -> Self {
        Self((0..n_qubits).filter(|q| !self.contains(*q)).collect())
    }

    /// Bitmask over basis indices selecting these qubits.
    pub fn index_mask(&self, n_qubits: usize) -> usize {
        self.0
            .iter()
            .fold(0, |acc, &q| acc | qubit_mask(q, n_qubits))
    }
}

impl fmt::Display for QubitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, q) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{q}")?;
        }
        write!(f, "}}")
    }
}

/// Single-qubit Pauli operators.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Matrix2<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::X => Matrix2::new(C0, C1, C1, C0),
            Pauli::Y => Matrix2::new(C0, -i, i, C0),
            Pauli::Z => Matrix2::new(C1, C0, C0, -C1),
        }
    }

    /// Index into a Bloch vector `(x, y, z)`.
    pub fn axis(self) -> usize {
        match self {
            Pauli::X => 0,
            Pauli::Y => 1,
            Pauli::Z => 2,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::X => 'x',
            Pauli::Y => 'y',
            Pauli::Z => 'z',
        }
    }
}

/// `I`, `X`, `Y`, `Z` in that order.
pub fn pauli_basis() -> [Matrix2<Complex64>; 4] {
    [
        Matrix2::identity(),
        Pauli::X.matrix(),
        Pauli::Y.matrix(),
        Pauli::Z.matrix(),
    ]
}

/// `(n . sigma)` for a real 3-vector `n`.
pub fn bloch_operator(n: [f64; 3]) -> Matrix2<Complex64> {
    Pauli::X.matrix() * Complex64::from(n[0])
        + Pauli::Y.matrix() * Complex64::from(n[1])
        + Pauli::Z.matrix() * Complex64::from(n[2])
}

/// Single-qubit state `(I + r . sigma) / 2`.
pub fn bloch_state(r: [f64; 3]) -> Matrix2<Complex64> {
    (Matrix2::identity() + bloch_operator(r)) * Complex64::from(0.5)
}

/// Eigenvalues of a Hermitian matrix, real part only, in descending order.
///
/// Exactly diagonal input short-circuits to its diagonal.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let dev = hermiticity_defect(m);
    if dev > TOL_HERM {
        return Err(Error::NotHermitian(dev));
    }
    let n = m.nrows();
    let diagonal = (0..n).all(|r| (0..n).all(|c| r == c || m[(r, c)] == C0));
    let mut vals: Vec<f64> = if diagonal {
        (0..n).map(|i| m[(i, i)].re).collect()
    } else {
        // Symmetrize first so the solver sees an exactly Hermitian input.
        let h = (m + m.adjoint()) * Complex64::from(0.5);
        h.symmetric_eigenvalues().iter().copied().collect()
    };
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

pub fn unitarity_defect(u: &CMatrix) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let prod = u * u.adjoint();
    let id = CMatrix::identity(u.nrows(), u.ncols());
    (prod - id).iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Binary entropy `H(x) = -x log2 x - (1-x) log2 (1-x)` in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    if !(-SLACK..=1.0 + SLACK).contains(&x) || x.is_nan() {
        return Err(Error::Domain {
            value: x,
            domain: "[0, 1]",
        });
    }
    let x = x.clamp(0.0, 1.0);
    Ok(xlog2x_neg(x) + xlog2x_neg(1.0 - x))
}

/// `-p log2 p` with `0 log 0 = 0`.
#[inline]
pub fn xlog2x_neg(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits of a (sub)normalized probability list.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs.iter().map(|&p| xlog2x_neg(p)).sum()
}

/// Eigenvalues of a density matrix, descending, clamped and renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    /// Clamps round-off negatives in `[-EIGEN_CLAMP, 0)` to zero and renormalizes.
    pub fn from_raw(mut eigenvalues: Vec<f64>) -> Result<Self> {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        if let Some(&min) = eigenvalues.last() {
            if min < -EIGEN_CLAMP {
                return Err(Error::NotPositive(min));
            }
        }
        for v in &mut eigenvalues {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let total: f64 = eigenvalues.iter().sum();
        if total > 0.0 {
            for v in &mut eigenvalues {
                *v /= total;
            }
        }
        Ok(Self { eigenvalues })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.eigenvalues)
    }
}

/// A trace-one positive Hermitian matrix on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(n_qubits: usize, data: CMatrix) -> Result<Self> {
        check_capacity(n_qubits)?;
        let dim = 1usize << n_qubits;
        if data.nrows() != dim || data.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.nrows(),
            });
        }
        let dev = hermiticity_defect(&data);
        if dev > TOL_HERM {
            return Err(Error::NotHermitian(dev));
        }
        let tr = data.trace();
        if (tr.re - 1.0).abs() > TOL_TRACE || tr.im.abs() > TOL_TRACE {
            return Err(Error::InvalidTrace(tr.re));
        }
        let eig = hermitian_eigenvalues(&data)?;
        if let Some(&min) = eig.last() {
            if min < -EIGEN_CLAMP {
                return Err(Error::NotPositive(min));
            }
        }
        Ok(Self { n_qubits, data })
    }

    /// Skips validation; callers guarantee the invariants hold.
    pub(crate) fn from_trusted(n_qubits: usize, data: CMatrix) -> Self {
        debug_assert_eq!(data.nrows(), 1 << n_qubits);
        Self { n_qubits, data }
    }

    /// Diagonal state with the given basis-state probabilities.
    pub fn from_diagonal(n_qubits: usize, probs: &[f64]) -> Result<Self> {
        check_capacity(n_qubits)?;
        let dim = 1usize << n_qubits;
        if probs.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: probs.len(),
            });
        }
        if let Some(&p) = probs.iter().find(|&&p| p < 0.0 || p.is_nan()) {
            return Err(Error::NotPositive(p));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TOL_TRACE {
            return Err(Error::InvalidTrace(total));
        }
        let mut data = CMatrix::zeros(dim, dim);
        for (i, &p) in probs.iter().enumerate() {
            data[(i, i)] = Complex64::from(p);
        }
        Ok(Self { n_qubits, data })
    }

    /// Projector onto a state vector; the vector is normalized first.
    pub fn pure(n_qubits: usize, amplitudes: &[Complex64]) -> Result<Self> {
        check_capacity(n_qubits)?;
        let dim = 1usize << n_qubits;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: amplitudes.len(),
            });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidTrace(0.0));
        }
        let v: Vec<Complex64> = amplitudes.iter().map(|a| a / norm).collect();
        let data = CMatrix::from_fn(dim, dim, |r, c| v[r] * v[c].conj());
        Ok(Self { n_qubits, data })
    }

    /// Computational basis state `|label>`, with `label[0]` the leftmost bit.
    pub fn basis_state(label: &[u8]) -> Result<Self> {
        let n = label.len();
        check_capacity(n)?;
        let index = label
            .iter()
            .fold(0usize, |acc, &b| (acc << 1) | usize::from(b != 0));
        let dim = 1usize << n;
        let mut data = CMatrix::zeros(dim, dim);
        data[(index, index)] = C1;
        Ok(Self { n_qubits: n, data })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_capacity(n_qubits)?;
        let dim = 1usize << n_qubits;
        let data = CMatrix::identity(dim, dim) * Complex64::from(1.0 / dim as f64);
        Ok(Self { n_qubits, data })
    }

    /// Single-qubit state from a 2x2 matrix.
    pub fn qubit(m: Matrix2<Complex64>) -> Result<Self> {
        Self::new(1, CMatrix::from_fn(2, 2, |r, c| m[(r, c)]))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[(row, col)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[(i, i)].re).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|r| (0..d).all(|c| r == c || self.data[(r, c)] == C0))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).norm()))
    }

    /// Kronecker product with `self`'s qubits leftmost.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let n = self.n_qubits + other.n_qubits;
        check_capacity(n)?;
        Ok(Self::from_trusted(n, self.data.kronecker(&other.data)))
    }

    /// Reduced state on `keep`, in ascending qubit order.
    pub fn partial_trace(&self, keep: &QubitSet) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::EmptyQubitSet);
        }
        keep.check_within(self.n_qubits)?;
        let n = self.n_qubits;
        if keep.len() == n {
            return Ok(self.clone());
        }
        let traced = keep.complement(n);
        let kept = scatter_table(keep.as_slice(), n);
        let rest = scatter_table(traced.as_slice(), n);
        let m = kept.len();
        let mut out = CMatrix::zeros(m, m);
        for (a, &ra) in kept.iter().enumerate() {
            for (b, &rb) in kept.iter().enumerate() {
                let mut acc = C0;
                for &t in &rest {
                    acc += self.data[(ra | t, rb | t)];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(Self::from_trusted(keep.len(), out))
    }

    /// Reorders qubits: qubit `j` of the result is qubit `order[j]` of `self`.
    pub fn permute_qubits(&self, order: &[usize]) -> Result<DensityMatrix> {
        let n = self.n_qubits;
        if order.len() != n {
            return Err(Error::Arity {
                expected: n,
                got: order.len(),
            });
        }
        let set = QubitSet::new(order.to_vec())?;
        set.check_within(n)?;
        let map = scatter_table(order, n);
        let dim = self.dim();
        let data = CMatrix::from_fn(dim, dim, |r, c| self.data[(map[r], map[c])]);
        Ok(Self::from_trusted(n, data))
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        Spectrum::from_raw(hermitian_eigenvalues(&self.data)?)
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> Result<f64> {
        Ok(self.spectrum()?.entropy())
    }

    /// Zeroes coherences between different computational values of the listed qubits.
    pub fn dephase(&self, qubits: &QubitSet) -> Result<DensityMatrix> {
        qubits.check_within(self.n_qubits)?;
        let mask = qubits.index_mask(self.n_qubits);
        let dim = self.dim();
        let data = CMatrix::from_fn(dim, dim, |r, c| {
            if (r ^ c) & mask == 0 {
                self.data[(r, c)]
            } else {
                C0
            }
        });
        Ok(Self::from_trusted(self.n_qubits, data))
    }

    pub fn dephase_all(&self) -> DensityMatrix {
        self.dephase(&QubitSet::all(self.n_qubits))
            .expect("full register is always in range")
    }

    /// `rho -> U rho U^dagger` with `u` acting on `qubits`, first listed qubit most
    /// significant in `u`'s row index.
    pub fn apply_unitary(&self, u: &CMatrix, qubits: &[usize]) -> Result<DensityMatrix> {
        let n = self.n_qubits;
        let set = QubitSet::new(qubits.to_vec())?;
        if set.is_empty() {
            return Err(Error::EmptyQubitSet);
        }
        set.check_within(n)?;
        let m = qubits.len();
        if u.nrows() != 1 << m || u.ncols() != 1 << m {
            return Err(Error::DimensionMismatch {
                expected: 1 << m,
                got: u.nrows(),
            });
        }
        let dev = unitarity_defect(u);
        if dev > TOL_UNITARY {
            return Err(Error::NotUnitary(dev));
        }
        let local = scatter_table(qubits, n);
        let rest = scatter_table(set.complement(n).as_slice(), n);
        let dim = self.dim();
        let k = local.len();
        let mut x = self.data.clone();
        let mut buf = vec![C0; k];
        // Left multiplication by U, column by column.
        for col in 0..dim {
            for &r in &rest {
                for (a, &la) in local.iter().enumerate() {
                    buf[a] = x[(la | r, col)];
                }
                for (a, &la) in local.iter().enumerate() {
                    let mut acc = C0;
                    for (b, &v) in buf.iter().enumerate() {
                        acc += u[(a, b)] * v;
                    }
                    x[(la | r, col)] = acc;
                }
            }
        }
        // Right multiplication by U^dagger, row by row.
        for row in 0..dim {
            for &r in &rest {
                for (a, &la) in local.iter().enumerate() {
                    buf[a] = x[(row, la | r)];
                }
                for (a, &la) in local.iter().enumerate() {
                    let mut acc = C0;
                    for (b, &v) in buf.iter().enumerate() {
                        acc += v * u[(a, b)].conj();
                    }
                    x[(row, la | r)] = acc;
                }
            }
        }
        Ok(Self::from_trusted(n, x))
    }

    /// Applies a single-qubit unitary to each listed qubit.
    pub fn apply_local_unitaries(
        &self,
        ops: &[(usize, Matrix2<Complex64>)],
    ) -> Result<DensityMatrix> {
        let mut out = self.clone();
        for &(q, u) in ops {
            let u = CMatrix::from_fn(2, 2, |r, c| u[(r, c)]);
            out = out.apply_unitary(&u, &[q])?;
        }
        Ok(out)
    }

    /// Transpose on the tensor factor of `subset`. The result is Hermitian but
    /// not necessarily positive.
    pub fn partial_transpose(&self, subset: &QubitSet) -> Result<CMatrix> {
        partial_transpose_matrix(&self.data, self.n_qubits, subset)
    }

    /// `Tr(rho O)` for a Hermitian operator on the full register.
    pub fn expectation(&self, obs: &CMatrix) -> Result<f64> {
        if obs.nrows() != self.dim() || obs.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: obs.nrows(),
            });
        }
        let dev = hermiticity_defect(obs);
        if dev > TOL_HERM {
            return Err(Error::NotHermitian(dev));
        }
        let dim = self.dim();
        let mut acc = C0;
        for r in 0..dim {
            for c in 0..dim {
                acc += self.data[(r, c)] * obs[(c, r)];
            }
        }
        if acc.im.abs() > TOL_IMAG {
            return Err(Error::ImaginaryExpectation(acc.im));
        }
        Ok(acc.re)
    }

    /// `Tr[rho (A_0 (x) ... (x) A_(n-1))]` for every choice of one operator per
    /// qubit from `site_ops[q]`.
    ///
    /// The returned table is row-major over the per-site choices with qubit 0
    /// slowest, so its length is the product of the `site_ops` lengths.
    pub fn product_expectations(
        &self,
        site_ops: &[Vec<Matrix2<Complex64>>],
    ) -> Result<Vec<Complex64>> {
        let n = self.n_qubits;
        if site_ops.len() != n {
            return Err(Error::Arity {
                expected: n,
                got: site_ops.len(),
            });
        }
        let tensor = self.pair_tensor();
        let functionals: Vec<Vec<Vec<Complex64>>> = site_ops
            .iter()
            .map(|ops| {
                ops.iter()
                    .map(|a| vec![a[(0, 0)], a[(1, 0)], a[(0, 1)], a[(1, 1)]])
                    .collect()
            })
            .collect();
        Ok(contract_sites(tensor, 4, &functionals))
    }

    /// Pair tensor of `self`: site `q` carries the index `2 r_q + c_q`, qubit 0 slowest.
    pub(crate) fn pair_tensor(&self) -> Vec<Complex64> {
        let dim = self.dim();
        let spread: Vec<usize> = (0..dim).map(spread_bits).collect();
        let mut tensor = vec![C0; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                tensor[(spread[r] << 1) | spread[c]] = self.data[(r, c)];
            }
        }
        tensor
    }

    /// Inverse of [`Self::pair_tensor`]; validates the result.
    pub(crate) fn from_pair_tensor(n_qubits: usize, tensor: &[Complex64]) -> Result<DensityMatrix> {
        let dim = 1usize << n_qubits;
        let spread: Vec<usize> = (0..dim).map(spread_bits).collect();
        let data = CMatrix::from_fn(dim, dim, |r, c| tensor[(spread[r] << 1) | spread[c]]);
        DensityMatrix::new(n_qubits, data)
    }

    /// `Tr[rho (A_0 (x) ... (x) A_(n-1))]` for one operator per qubit.
    pub fn product_expectation(&self, ops: &[Matrix2<Complex64>]) -> Result<Complex64> {
        let site_ops: Vec<Vec<_>> = ops.iter().map(|a| vec![*a]).collect();
        Ok(self.product_expectations(&site_ops)?[0])
    }

    /// Bloch vector of the single-qubit marginal at `qubit`.
    pub fn bloch_vector(&self, qubit: usize) -> Result<[f64; 3]> {
        let m = self.partial_trace(&QubitSet::single(qubit))?;
        let a = m.data[(0, 1)];
        Ok([
            2.0 * a.re,
            -2.0 * a.im,
            (m.data[(0, 0)] - m.data[(1, 1)]).re,
        ])
    }
}

/// Contracts a tensor with `functionals.len()` sites of local dimension `d_in`
/// (site 0 slowest). Site `q`'s index is replaced by one output index per
/// functional in `functionals[q]`, each a length-`d_in` weight vector.
pub(crate) fn contract_sites(
    mut tensor: Vec<Complex64>,
    d_in: usize,
    functionals: &[Vec<Vec<Complex64>>],
) -> Vec<Complex64> {
    let n = functionals.len();
    debug_assert_eq!(tensor.len(), d_in.pow(n as u32));
    let mut suffix = 1usize;
    for q in (0..n).rev() {
        let prefix = d_in.pow(q as u32);
        let ws = &functionals[q];
        let arity = ws.len();
        let mut next = vec![C0; prefix * arity * suffix];
        for p in 0..prefix {
            let src = p * d_in * suffix;
            let dst = p * arity * suffix;
            for (o, w) in ws.iter().enumerate() {
                for s in 0..suffix {
                    let mut acc = C0;
                    for (i, wv) in w.iter().enumerate() {
                        acc += tensor[src + i * suffix + s] * wv;
                    }
                    next[dst + o * suffix + s] = acc;
                }
            }
        }
        tensor = next;
        suffix *= arity;
    }
    tensor
}

/// Moves bit `b` of `x` to bit `2b`.
pub(crate) fn spread_bits(x: usize) -> usize {
    let mut out = 0;
    let mut b = 0;
    let mut v = x;
    while v != 0 {
        out |= (v & 1) << (2 * b);
        v >>= 1;
        b += 1;
    }
    out
}

/// Full-register operator `A_0 (x) ... (x) A_(n-1)`.
pub fn kron_all(ops: &[Matrix2<Complex64>]) -> CMatrix {
    ops.iter().fold(CMatrix::identity(1, 1), |acc, a| {
        acc.kronecker(&CMatrix::from_fn(2, 2, |r, c| a[(r, c)]))
    })
}

/// Partial transpose of any operator on `n_qubits` qubits.
pub fn partial_transpose_matrix(
    m: &CMatrix,
    n_qubits: usize,
    subset: &QubitSet,
) -> Result<CMatrix> {
    subset.check_within(n_qubits)?;
    let dim = 1usize << n_qubits;
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: m.nrows(),
        });
    }
    let mask = subset.index_mask(n_qubits);
    Ok(CMatrix::from_fn(dim, dim, |r, c| {
        let swap = (r ^ c) & mask;
        m[(r ^ swap, c ^ swap)]
    }))
}

/// CNOT with the first listed qubit as control.
pub fn cnot() -> CMatrix {
    let mut u = CMatrix::zeros(4, 4);
    u[(0, 0)] = C1;
    u[(1, 1)] = C1;
    u[(2, 3)] = C1;
    u[(3, 2)] = C1;
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ghz_classical(n: usize) -> DensityMatrix {
        let mut p = vec![0.0; 1 << n];
        p[0] = 0.5;
        p[(1 << n) - 1] = 0.5;
        DensityMatrix::from_diagonal(n, &p).unwrap()
    }

    fn bell() -> DensityMatrix {
        let s = 1.0 / 2f64.sqrt();
        DensityMatrix::pure(2, &[s.into(), C0, C0, s.into()]).unwrap()
    }

    #[test]
    fn tensor_of_basis_states() {
        let a = DensityMatrix::basis_state(&[0]).unwrap();
        let b = DensityMatrix::basis_state(&[1]).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab, DensityMatrix::basis_state(&[0, 1]).unwrap());
    }

    #[test]
    fn tensor_of_maximally_mixed() {
        let h = DensityMatrix::maximally_mixed(1).unwrap();
        assert_eq!(
            h.tensor(&h).unwrap(),
            DensityMatrix::maximally_mixed(2).unwrap()
        );
    }

    #[test]
    fn tensor_capacity() {
        let a = DensityMatrix::maximally_mixed(7).unwrap();
        let err = a.tensor(&a).unwrap_err();
        assert!(matches!(err, Error::Capacity { requested: 14, .. }));
    }

    #[test]
    fn ghz_pair_marginal() {
        let rho = ghz_classical(4);
        let m = rho
            .partial_trace(&QubitSet::new(vec![1, 3]).unwrap())
            .unwrap();
        assert_eq!(m.diagonal(), vec![0.5, 0.0, 0.0, 0.5]);
        assert!(m.is_diagonal());
    }

    #[test]
    fn partial_trace_rejects_out_of_range() {
        let rho = ghz_classical(3);
        assert!(matches!(
            rho.partial_trace(&QubitSet::single(3)),
            Err(Error::IndexOutOfRange {
                index: 3,
                n_qubits: 3
            })
        ));
        assert!(matches!(
            rho.partial_trace(&QubitSet::new(vec![]).unwrap()),
            Err(Error::EmptyQubitSet)
        ));
    }

    #[test]
    fn qubit_set_rejects_duplicates() {
        assert_eq!(QubitSet::new(vec![2, 0, 2]), Err(Error::DuplicateQubit(2)));
        assert_eq!(QubitSet::new(vec![2, 0]).unwrap().as_slice(), &[0, 2]);
    }

    #[test]
    fn spectrum_basics() {
        let half = DensityMatrix::maximally_mixed(1).unwrap();
        assert_eq!(half.spectrum().unwrap().eigenvalues(), &[0.5, 0.5]);
        let zero = DensityMatrix::basis_state(&[0]).unwrap();
        assert_eq!(zero.spectrum().unwrap().eigenvalues(), &[1.0, 0.0]);
    }

    #[test]
    fn spectrum_clamps_round_off_only() {
        let s = Spectrum::from_raw(vec![0.5, 0.5 + 5e-10, -5e-10]).unwrap();
        assert_eq!(*s.eigenvalues().last().unwrap(), 0.0);
        assert_abs_diff_eq!(s.eigenvalues().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(matches!(
            Spectrum::from_raw(vec![1.1, -0.1]),
            Err(Error::NotPositive(_))
        ));
    }

    #[test]
    fn entropy_of_pure_and_mixed() {
        assert_abs_diff_eq!(bell().entropy().unwrap(), 0.0, epsilon = 1e-12);
        for n in 1..=4 {
            let m = DensityMatrix::maximally_mixed(n).unwrap();
            assert_abs_diff_eq!(m.entropy().unwrap(), n as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // -0.4 log2 0.4 - 0.6 log2 0.6
        assert_abs_diff_eq!(
            binary_entropy(0.4).unwrap(),
            0.970950594454669,
            epsilon = 1e-12
        );
        assert!(binary_entropy(1.0 + 1e-13).is_ok());
        assert!(matches!(binary_entropy(1.01), Err(Error::Domain { .. })));
        assert!(binary_entropy(-0.2).is_err());
    }

    #[test]
    fn dephasing_plus_state() {
        let s = 1.0 / 2f64.sqrt();
        let plus = DensityMatrix::pure(1, &[s.into(), s.into()]).unwrap();
        let d = plus.dephase_all();
        assert!(d.max_abs_diff(&DensityMatrix::maximally_mixed(1).unwrap()) < 1e-15);
    }

    #[test]
    fn dephasing_diagonal_is_noop() {
        let rho = ghz_classical(3);
        assert_eq!(rho.dephase_all(), rho);
    }

    #[test]
    fn partial_dephasing_keeps_same_value_blocks() {
        let b = bell();
        let d = b.dephase(&QubitSet::single(0)).unwrap();
        // Coherence |00><11| differs on qubit 0 and is removed.
        assert_eq!(d.get(0, 3), C0);
        assert_eq!(d.get(0, 0), b.get(0, 0));
    }

    #[test]
    fn cnot_builds_four_qubit_ghz() {
        let pre = ghz_classical(3)
            .tensor(&DensityMatrix::basis_state(&[0]).unwrap())
            .unwrap();
        let post = pre.apply_unitary(&cnot(), &[0, 3]).unwrap();
        assert_eq!(post, ghz_classical(4));
    }

    #[test]
    fn pauli_x_flips_first_qubit() {
        let rho = DensityMatrix::basis_state(&[0, 0, 0]).unwrap();
        let x = CMatrix::from_fn(2, 2, |r, c| Pauli::X.matrix()[(r, c)]);
        let out = rho.apply_unitary(&x, &[0]).unwrap();
        assert_eq!(out, DensityMatrix::basis_state(&[1, 0, 0]).unwrap());
        let id = CMatrix::identity(4, 4);
        assert_eq!(rho.apply_unitary(&id, &[2, 1]).unwrap(), rho);
    }

    #[test]
    fn apply_unitary_rejects_non_unitary() {
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        let bad = CMatrix::identity(2, 2) * Complex64::from(2.0);
        assert!(matches!(
            rho.apply_unitary(&bad, &[0]),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn control_order_matters() {
        // |10> with CNOT controlled on qubit 1 stays, controlled on qubit 0 flips.
        let rho = DensityMatrix::basis_state(&[1, 0]).unwrap();
        assert_eq!(rho.apply_unitary(&cnot(), &[1, 0]).unwrap(), rho);
        assert_eq!(
            rho.apply_unitary(&cnot(), &[0, 1]).unwrap(),
            DensityMatrix::basis_state(&[1, 1]).unwrap()
        );
    }

    #[test]
    fn bell_partial_transpose() {
        let pt = bell().partial_transpose(&QubitSet::single(1)).unwrap();
        let ev = hermitian_eigenvalues(&pt).unwrap();
        assert_abs_diff_eq!(*ev.last().unwrap(), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn product_state_is_ppt() {
        let a = DensityMatrix::qubit(bloch_state([0.3, -0.2, 0.5])).unwrap();
        let b = DensityMatrix::qubit(bloch_state([0.0, 0.6, -0.1])).unwrap();
        let ab = a.tensor(&b).unwrap();
        let pt = ab.partial_transpose(&QubitSet::single(0)).unwrap();
        let ev = hermitian_eigenvalues(&pt).unwrap();
        let ev0 = ab.spectrum().unwrap();
        for (x, y) in ev.iter().zip(ev0.eigenvalues()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        assert!(*ev.last().unwrap() >= -1e-12);
    }

    #[test]
    fn expectation_values() {
        let z = kron_all(&[Pauli::Z.matrix()]);
        let x = kron_all(&[Pauli::X.matrix()]);
        assert_eq!(
            DensityMatrix::basis_state(&[0])
                .unwrap()
                .expectation(&z)
                .unwrap(),
            1.0
        );
        assert_eq!(
            DensityMatrix::maximally_mixed(1)
                .unwrap()
                .expectation(&x)
                .unwrap(),
            0.0
        );
        let zzzz = kron_all(&[Pauli::Z.matrix(); 4]);
        assert_eq!(ghz_classical(4).expectation(&zzzz).unwrap(), 1.0);
    }

    #[test]
    fn expectation_rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = C1;
        let rho = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(matches!(rho.expectation(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn product_expectations_match_full_operators() {
        let b = bell()
            .tensor(&DensityMatrix::qubit(bloch_state([0.1, 0.2, 0.3])).unwrap())
            .unwrap();
        let basis = pauli_basis();
        let table = b
            .product_expectations(&[basis.to_vec(), basis.to_vec(), basis.to_vec()])
            .unwrap();
        for (idx, v) in table.iter().enumerate() {
            let ops = [basis[idx / 16], basis[(idx / 4) % 4], basis[idx % 4]];
            let full = kron_all(&ops);
            let direct: Complex64 = (b.matrix() * full).trace();
            assert_abs_diff_eq!(v.re, direct.re, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, direct.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn bloch_vector_roundtrip() {
        let r = [0.3, -0.4, 0.5];
        let rho = DensityMatrix::qubit(bloch_state(r)).unwrap();
        let got = rho.bloch_vector(0).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(got[i], r[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let mut m = CMatrix::identity(2, 2);
        assert!(matches!(
            DensityMatrix::new(1, m.clone()),
            Err(Error::InvalidTrace(_))
        ));
        m[(0, 0)] = Complex64::from(1.5);
        m[(1, 1)] = Complex64::from(-0.5);
        assert!(matches!(
            DensityMatrix::new(1, m),
            Err(Error::NotPositive(_))
        ));
        let mut h = CMatrix::identity(2, 2) * Complex64::from(0.5);
        h[(0, 1)] = Complex64::new(0.0, 0.1);
        assert!(matches!(
            DensityMatrix::new(1, h),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn permute_swaps_labels() {
        let rho = DensityMatrix::basis_state(&[1, 0, 0]).unwrap();
        let p = rho.permute_qubits(&[1, 2, 0]).unwrap();
        assert_eq!(p, DensityMatrix::basis_state(&[0, 0, 1]).unwrap());
    }
}
