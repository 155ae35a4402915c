//! Constructors for the state families analysed by this crate, plus seeded
//! random states used as test fodder.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{bloch_state, check_capacity, xlog2x_neg, CMatrix, DensityMatrix, QubitSet};

/// MI (bits) a random correlated classical state must exceed across its designated cut.
pub const CORRELATED_MI_FLOOR: f64 = 0.05;
/// Rejection rounds before a random correlated state gives up.
pub const MAX_REJECTION_ROUNDS: usize = 1000;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `(|0...0><0...0| + |1...1><1...1|) / 2`.
pub fn ghz_classical(n: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::Scope("ghz_classical needs n >= 1".into()));
    }
    check_capacity(n)?;
    let dim = 1usize << n;
    let mut p = vec![0.0; dim];
    p[0] += 0.5;
    p[dim - 1] += 0.5;
    DensityMatrix::from_diagonal(n, &p)
}

/// Uniform mixture of all even-parity computational strings, each with weight `2^(1-n)`.
pub fn parity_even_classical(n: usize) -> Result<DensityMatrix> {
    if n < 2 {
        return Err(Error::Scope("parity_even needs n >= 2".into()));
    }
    check_capacity(n)?;
    let w = 2f64.powi(1 - n as i32);
    let p: Vec<f64> = (0..1usize << n)
        .map(|i| if i.count_ones() % 2 == 0 { w } else { 0.0 })
        .collect();
    DensityMatrix::from_diagonal(n, &p)
}

fn hamming_shell(n: usize, ones: usize) -> Vec<Complex64> {
    (0..1usize << n)
        .map(|i| {
            if i.count_ones() as usize == ones {
                Complex64::from(1.0)
            } else {
                Complex64::from(0.0)
            }
        })
        .collect()
}

/// Projector onto the uniform superposition of single-excitation strings.
pub fn w_state(n: usize) -> Result<DensityMatrix> {
    if n < 2 {
        return Err(Error::Scope("W state needs n >= 2".into()));
    }
    check_capacity(n)?;
    DensityMatrix::pure(n, &hamming_shell(n, 1))
}

/// Projector onto the uniform superposition of single-hole strings.
pub fn wbar_state(n: usize) -> Result<DensityMatrix> {
    if n < 2 {
        return Err(Error::Scope("W-bar state needs n >= 2".into()));
    }
    check_capacity(n)?;
    DensityMatrix::pure(n, &hamming_shell(n, n - 1))
}

fn require_odd(n: usize) -> Result<()> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::Scope(format!(
            "Kaszlikowski states are defined for odd n >= 3, got n = {n}"
        )));
    }
    Ok(())
}

/// Equal mixture of the W and W-bar projectors, odd `n >= 3` only.
pub fn kaszlikowski(n: usize) -> Result<DensityMatrix> {
    require_odd(n)?;
    let w = w_state(n)?;
    let wbar = wbar_state(n)?;
    let data = (w.into_matrix() + wbar.into_matrix()) * Complex64::from(0.5);
    DensityMatrix::new(n, data)
}

/// Kaszlikowski state dephased on every qubit: uniform weight `1/(2n)` on the
/// single-excitation and single-hole strings.
pub fn dephased_kaszlikowski(n: usize) -> Result<DensityMatrix> {
    Ok(kaszlikowski(n)?.dephase_all())
}

/// Closed-form `k`-qubit marginal of the dephased Kaszlikowski state.
///
/// Weight `(n-k)/(2n)` sits on `0^k` and `1^k`, `1/(2n)` on every single-excitation
/// and single-hole string; for `k <= 2` coinciding strings add up.
pub fn reduced_kaszlikowski_closed_form(n: usize, k: usize) -> Result<DensityMatrix> {
    require_odd(n)?;
    if k == 0 || k > n {
        return Err(Error::Domain {
            value: k as f64,
            domain: "1 <= k <= n",
        });
    }
    check_capacity(k)?;
    let dim = 1usize << k;
    let two_n = 2.0 * n as f64;
    let mut p = vec![0.0; dim];
    p[0] += (n - k) as f64 / two_n;
    p[dim - 1] += (n - k) as f64 / two_n;
    for (i, v) in p.iter_mut().enumerate() {
        let ones = i.count_ones() as usize;
        if ones == 1 {
            *v += 1.0 / two_n;
        }
        if ones == k - 1 {
            *v += 1.0 / two_n;
        }
    }
    DensityMatrix::from_diagonal(k, &p)
}

/// Single-qubit state with a Bloch vector drawn uniformly from the unit ball.
pub fn random_qubit_state<R: Rng + ?Sized>(rng: &mut R) -> Matrix2<Complex64> {
    loop {
        let r = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        if r.iter().map(|x: &f64| x * x).sum::<f64>() <= 1.0 {
            return bloch_state(r);
        }
    }
}

/// Haar-random single-qubit unitary from a normalized Gaussian quaternion.
pub fn random_qubit_unitary<R: Rng + ?Sized>(rng: &mut R) -> Matrix2<Complex64> {
    let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let [a, b, c, d] = q.map(|x| x / norm);
    let alpha = Complex64::new(a, b);
    let beta = Complex64::new(c, d);
    Matrix2::new(alpha, -beta.conj(), beta, alpha.conj())
}

/// Full-rank random state `G G^dagger / Tr` from a complex Ginibre matrix.
pub fn random_state_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DensityMatrix> {
    check_capacity(n)?;
    let dim = 1usize << n;
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m /= Complex64::from(tr);
    // Exact Hermitian symmetrization removes product round-off.
    let m = (&m + m.adjoint()) * Complex64::from(0.5);
    DensityMatrix::new(n, m)
}

pub fn random_state(n: usize, seed: u64) -> Result<DensityMatrix> {
    random_state_with(n, &mut seeded_rng(seed))
}

fn require_two(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Scope(
            "random multipartite states need n >= 2".into(),
        ));
    }
    check_capacity(n)
}

pub fn random_product_classical_with<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> Result<DensityMatrix> {
    require_two(n)?;
    let mut state: Option<DensityMatrix> = None;
    for _ in 0..n {
        let p: f64 = rng.random();
        let q = DensityMatrix::from_diagonal(1, &[p, 1.0 - p])?;
        state = Some(match state {
            None => q,
            Some(s) => s.tensor(&q)?,
        });
    }
    Ok(state.expect("n >= 2"))
}

/// Product of independent diagonal single-qubit states.
pub fn random_product_classical(n: usize, seed: u64) -> Result<DensityMatrix> {
    random_product_classical_with(n, &mut seeded_rng(seed))
}

pub fn random_product_quantum_with<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> Result<DensityMatrix> {
    require_two(n)?;
    let mut state = DensityMatrix::qubit(random_qubit_state(rng))?;
    for _ in 1..n {
        state = state.tensor(&DensityMatrix::qubit(random_qubit_state(rng))?)?;
    }
    Ok(state)
}

/// Product of independent single-qubit states with random Bloch vectors.
pub fn random_product_quantum(n: usize, seed: u64) -> Result<DensityMatrix> {
    random_product_quantum_with(n, &mut seeded_rng(seed))
}

/// Designated cut of [`random_correlated_classical`]: qubit 0 against the rest.
pub fn designated_cut(n: usize) -> (QubitSet, QubitSet) {
    (
        QubitSet::single(0),
        QubitSet::new((1..n).collect()).expect("distinct"),
    )
}

/// Shannon mutual information between the first qubit and the rest of a
/// distribution over `n`-bit strings.
fn first_qubit_mi(probs: &[f64], n: usize) -> f64 {
    let half = 1usize << (n - 1);
    let pa = [
        probs[..half].iter().sum::<f64>(),
        probs[half..].iter().sum::<f64>(),
    ];
    let pb: Vec<f64> = (0..half).map(|j| probs[j] + probs[half + j]).collect();
    let h = |v: &[f64]| v.iter().map(|&p| xlog2x_neg(p)).sum::<f64>();
    h(&pa) + h(&pb) - h(probs)
}

pub fn random_correlated_classical_with<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> Result<DensityMatrix> {
    require_two(n)?;
    let dim = 1usize << n;
    for _ in 0..MAX_REJECTION_ROUNDS {
        // Flat Dirichlet sample.
        let w: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / total).collect();
        if first_qubit_mi(&p, n) > CORRELATED_MI_FLOOR {
            return DensityMatrix::from_diagonal(n, &p);
        }
    }
    Err(Error::RngExhausted(MAX_REJECTION_ROUNDS))
}

/// Diagonal state whose distribution has more than [`CORRELATED_MI_FLOOR`] bits of
/// mutual information across [`designated_cut`].
pub fn random_correlated_classical(n: usize, seed: u64) -> Result<DensityMatrix> {
    random_correlated_classical_with(n, &mut seeded_rng(seed))
}

/// `rho_A (x) rho_B` with Ginibre-random factors, placed on the qubits of `a`
/// and its complement.
pub fn random_product_across_with<R: Rng + ?Sized>(
    n: usize,
    a: &QubitSet,
    rng: &mut R,
) -> Result<DensityMatrix> {
    a.check_within(n)?;
    let b = a.complement(n);
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidCut("both sides must be non-empty".into()));
    }
    let ra = random_state_with(a.len(), rng)?;
    let rb = random_state_with(b.len(), rng)?;
    let joint = ra.tensor(&rb)?;
    // Joint qubit t sits at original position order[t]; invert that map.
    let order: Vec<usize> = a.iter().chain(b.iter()).collect();
    let mut inverse = vec![0; n];
    for (t, &q) in order.iter().enumerate() {
        inverse[q] = t;
    }
    joint.permute_qubits(&inverse)
}

/// Named state families accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GhzClassical,
    ParityEven,
    W,
    Wbar,
    Kaszlikowski,
    DephasedKaszlikowski,
    ReducedKaszlikowski,
    RandomProduct,
    RandomClassical,
    RandomProductQuantum,
}

impl Family {
    pub const ALL: [Family; 10] = [
        Family::GhzClassical,
        Family::ParityEven,
        Family::W,
        Family::Wbar,
        Family::Kaszlikowski,
        Family::DephasedKaszlikowski,
        Family::ReducedKaszlikowski,
        Family::RandomProduct,
        Family::RandomClassical,
        Family::RandomProductQuantum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::GhzClassical => "ghz_classical",
            Family::ParityEven => "parity_even",
            Family::W => "w",
            Family::Wbar => "wbar",
            Family::Kaszlikowski => "kaszlikowski",
            Family::DephasedKaszlikowski => "dephased_kaszlikowski",
            Family::ReducedKaszlikowski => "reduced_kaszlikowski",
            Family::RandomProduct => "random_product",
            Family::RandomClassical => "random_classical",
            Family::RandomProductQuantum => "random_product_quantum",
        }
    }

    pub fn is_random(self) -> bool {
        matches!(
            self,
            Family::RandomProduct | Family::RandomClassical | Family::RandomProductQuantum
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown state family '{s}'"))
    }
}

/// A family plus its size parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpec {
    pub family: Family,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl StateSpec {
    pub fn new(family: Family, n: usize) -> Self {
        Self {
            family,
            n,
            k: None,
            seed: None,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Qubit count of the built state.
    pub fn qubits(&self) -> usize {
        match self.family {
            Family::ReducedKaszlikowski => self.k.unwrap_or(self.n),
            _ => self.n,
        }
    }

    pub fn build(&self) -> Result<DensityMatrix> {
        let seed = self.seed.unwrap_or(0);
        match self.family {
            Family::GhzClassical => ghz_classical(self.n),
            Family::ParityEven => parity_even_classical(self.n),
            Family::W => w_state(self.n),
            Family::Wbar => wbar_state(self.n),
            Family::Kaszlikowski => kaszlikowski(self.n),
            Family::DephasedKaszlikowski => dephased_kaszlikowski(self.n),
            Family::ReducedKaszlikowski => {
                let k = self
                    .k
                    .ok_or_else(|| Error::Scope("reduced_kaszlikowski needs k".into()))?;
                reduced_kaszlikowski_closed_form(self.n, k)
            }
            Family::RandomProduct => random_product_classical(self.n, seed),
            Family::RandomClassical => random_correlated_classical(self.n, seed),
            Family::RandomProductQuantum => random_product_quantum(self.n, seed),
        }
    }
}
