//! n-party covariance `<(X_1 - <X_1>) ... (X_n - <X_n>)>` of local observables.
//!
//! Three routes are provided: direct evaluation for one observable tuple, an
//! exhaustive scan over all `3^n` Pauli tuples, and random-restart maximization of
//! `|Cov|` over unit traceless observables. Identity parts are annihilated by the
//! centering, so `X = a I + b (n . sigma)` contributes only the factor `b`.

use std::fmt;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{angles_of, maximize, Angles, AscentConfig, SphereObjective};
use crate::qmat::{bloch_operator, check_capacity, pauli_basis, DensityMatrix, Pauli, TOL_IMAG};

/// Vanishing threshold for exhaustive scans.
pub const SCAN_TOL: f64 = 1e-10;
/// Vanishing threshold for optimizer verdicts.
pub const OPTIMIZER_TOL: f64 = 1e-7;
pub const DEFAULT_RESTARTS: usize = 32;

const UNIT_TOL: f64 = 1e-12;

/// Observable on one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteObservable {
    Pauli(Pauli),
    /// `offset * I + gain * (axis . sigma)` with a unit `axis`.
    Bloch {
        axis: [f64; 3],
        gain: f64,
        offset: f64,
    },
}

impl SiteObservable {
    pub fn bloch(axis: [f64; 3], gain: f64, offset: f64) -> Result<Self> {
        let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::Domain {
                value: norm,
                domain: "unit Bloch axis",
            });
        }
        Ok(SiteObservable::Bloch { axis, gain, offset })
    }

    pub fn axis(&self) -> [f64; 3] {
        match *self {
            SiteObservable::Pauli(p) => {
                let mut a = [0.0; 3];
                a[p.axis()] = 1.0;
                a
            }
            SiteObservable::Bloch { axis, .. } => axis,
        }
    }

    pub fn gain(&self) -> f64 {
        match *self {
            SiteObservable::Pauli(_) => 1.0,
            SiteObservable::Bloch { gain, .. } => gain,
        }
    }

    pub fn offset(&self) -> f64 {
        match *self {
            SiteObservable::Pauli(_) => 0.0,
            SiteObservable::Bloch { offset, .. } => offset,
        }
    }

    pub fn matrix(&self) -> Matrix2<Complex64> {
        match *self {
            SiteObservable::Pauli(p) => p.matrix(),
            SiteObservable::Bloch { axis, gain, offset } => {
                Matrix2::identity() * Complex64::from(offset)
                    + bloch_operator(axis) * Complex64::from(gain)
            }
        }
    }
}

/// One observable per qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalObservable(pub Vec<SiteObservable>);

impl LocalObservable {
    pub fn from_paulis(paulis: &[Pauli]) -> Self {
        Self(paulis.iter().map(|&p| SiteObservable::Pauli(p)).collect())
    }

    /// Unit traceless observables `n_i . sigma`.
    pub fn from_directions(dirs: &[[f64; 3]]) -> Result<Self> {
        dirs.iter()
            .map(|&d| SiteObservable::bloch(d, 1.0, 0.0))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn sites(&self) -> &[SiteObservable] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The Pauli string, when every site is a named Pauli.
    pub fn pauli_string(&self) -> Option<String> {
        self.0
            .iter()
            .map(|s| match s {
                SiteObservable::Pauli(p) => Some(p.symbol()),
                _ => None,
            })
            .collect()
    }
}

impl fmt::Display for LocalObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = self.pauli_string() {
            return f.write_str(&s);
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            let [x, y, z] = s.axis();
            write!(f, "{:+.4}*({x:+.4},{y:+.4},{z:+.4})", s.gain())?;
            if s.offset() != 0.0 {
                write!(f, "{:+.4}I", s.offset())?;
            }
        }
        Ok(())
    }
}

/// `Tr[rho (x)_i (X_i - <X_i> I)]` with `<X_i>` the single-site expectation.
pub fn covariance(rho: &DensityMatrix, obs: &LocalObservable) -> Result<f64> {
    let n = rho.n_qubits();
    if obs.len() != n {
        return Err(Error::Arity {
            expected: n,
            got: obs.len(),
        });
    }
    let mut centered = Vec::with_capacity(n);
    for (q, site) in obs.sites().iter().enumerate() {
        let x = site.matrix();
        let marginal = rho.partial_trace(&crate::qmat::QubitSet::single(q))?;
        let mean = (marginal.matrix()[(0, 0)] * x[(0, 0)]
            + marginal.matrix()[(0, 1)] * x[(1, 0)]
            + marginal.matrix()[(1, 0)] * x[(0, 1)]
            + marginal.matrix()[(1, 1)] * x[(1, 1)])
            .re;
        centered.push(x - Matrix2::identity() * Complex64::from(mean));
    }
    let v = rho.product_expectation(&centered)?;
    if v.im.abs() > TOL_IMAG {
        return Err(Error::ImaginaryExpectation(v.im));
    }
    Ok(v.re)
}

/// All Pauli-string expectations `Tr[rho sigma_mu0 (x) ... ]`, `mu in {I,X,Y,Z}`,
/// indexed by `sum_q mu_q 4^(n-1-q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliMoments {
    n_qubits: usize,
    values: Vec<f64>,
}

impl PauliMoments {
    pub fn of(rho: &DensityMatrix) -> Result<Self> {
        let n = rho.n_qubits();
        check_capacity(n)?;
        let basis = pauli_basis().to_vec();
        let table = rho.product_expectations(&vec![basis; n])?;
        Ok(Self {
            n_qubits: n,
            values: table.iter().map(|z| z.re).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Single-site Bloch vectors read off the weight-one moments.
    pub fn bloch_vectors(&self) -> Vec<[f64; 3]> {
        let n = self.n_qubits;
        (0..n)
            .map(|q| {
                let stride = 1usize << (2 * (n - 1 - q));
                [
                    self.values[stride],
                    self.values[2 * stride],
                    self.values[3 * stride],
                ]
            })
            .collect()
    }

    /// Contracts site `q` against `coeffs[q]`; `None` leaves that index open.
    /// Returns the tensor over the open sites (qubit order preserved).
    fn contract(&self, coeffs: &[Option<[f64; 4]>]) -> Vec<f64> {
        let mut tensor = self.values.clone();
        let mut suffix = 1usize;
        for q in (0..self.n_qubits).rev() {
            let prefix = 1usize << (2 * q);
            match coeffs[q] {
                None => suffix *= 4,
                Some(c) => {
                    let mut next = vec![0.0; prefix * suffix];
                    for p in 0..prefix {
                        let src = p * 4 * suffix;
                        for s in 0..suffix {
                            next[p * suffix + s] =
                                (0..4).map(|m| c[m] * tensor[src + m * suffix + s]).sum();
                        }
                    }
                    tensor = next;
                }
            }
        }
        tensor
    }
}

/// Centered coefficient vector of `d . sigma` at a site with Bloch vector `r`.
fn centered_coeffs(d: [f64; 3], r: [f64; 3]) -> [f64; 4] {
    [-(d[0] * r[0] + d[1] * r[1] + d[2] * r[2]), d[0], d[1], d[2]]
}

/// Covariances of all `3^n` Pauli tuples, in lexicographic order over `x < y < z`
/// with qubit 0 varying slowest.
pub fn pauli_covariances(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let moments = PauliMoments::of(rho)?;
    let means = moments.bloch_vectors();
    let values = moments.values;
    if moments.n_qubits == 0 {
        return Ok(vec![values[0]]);
    }
    let branches: Vec<Vec<f64>> = (0..3)
        .into_par_iter()
        .map(|p| {
            let mut out = Vec::new();
            let v = contract_first(&values, means[0][p], p);
            scan_rec(&v, 1, &means, &mut out);
            out
        })
        .collect();
    Ok(branches.concat())
}

fn contract_first(t: &[f64], mean: f64, p: usize) -> Vec<f64> {
    let s = t.len() / 4;
    (0..s).map(|j| -mean * t[j] + t[(p + 1) * s + j]).collect()
}

fn scan_rec(t: &[f64], site: usize, means: &[[f64; 3]], out: &mut Vec<f64>) {
    if site == means.len() {
        out.push(t[0]);
        return;
    }
    for p in 0..3 {
        let v = contract_first(t, means[site][p], p);
        scan_rec(&v, site + 1, means, out);
    }
}

fn pauli_tuple(mut index: usize, n: usize) -> Vec<Pauli> {
    let mut out = vec![Pauli::X; n];
    for q in (0..n).rev() {
        out[q] = Pauli::ALL[index % 3];
        index /= 3;
    }
    out
}

/// Outcome of a covariance scan or maximization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceScanResult {
    pub max_abs: f64,
    pub argmax: LocalObservable,
    /// Signed covariance at `argmax`.
    pub value_at_argmax: f64,
    pub evaluated_count: usize,
    pub tol: f64,
    pub all_below_tol: bool,
    /// Always true for exhaustive scans.
    pub converged: bool,
}

/// Exhaustive scan of every Pauli tuple. Ties on `|Cov|` go to the
/// lexicographically smallest tuple.
pub fn pauli_scan(rho: &DensityMatrix, tol: f64) -> Result<CovarianceScanResult> {
    let n = rho.n_qubits();
    let values = pauli_covariances(rho)?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if v.abs() > values[best].abs() {
            best = i;
        }
    }
    let max_abs = values[best].abs();
    Ok(CovarianceScanResult {
        max_abs,
        argmax: LocalObservable::from_paulis(&pauli_tuple(best, n)),
        value_at_argmax: values[best],
        evaluated_count: values.len(),
        tol,
        all_below_tol: max_abs < tol,
        converged: true,
    })
}

/// `|Cov|` as a function of one unit direction per site.
pub struct CovarianceObjective {
    moments: PauliMoments,
    means: Vec<[f64; 3]>,
}

impl CovarianceObjective {
    pub fn new(rho: &DensityMatrix) -> Result<Self> {
        let moments = PauliMoments::of(rho)?;
        let means = moments.bloch_vectors();
        Ok(Self { moments, means })
    }

    /// Signed covariance of the unit traceless observables `dirs`.
    pub fn signed(&self, dirs: &[[f64; 3]]) -> f64 {
        let coeffs: Vec<_> = dirs
            .iter()
            .zip(&self.means)
            .map(|(&d, &r)| Some(centered_coeffs(d, r)))
            .collect();
        self.moments.contract(&coeffs)[0]
    }
}

impl SphereObjective for CovarianceObjective {
    fn sites(&self) -> usize {
        self.moments.n_qubits
    }

    fn value(&self, dirs: &[[f64; 3]]) -> f64 {
        self.signed(dirs).abs()
    }

    // Cov is linear in each site's direction once the others are fixed.
    fn restrict<'a>(&'a self, dirs: &[[f64; 3]], site: usize) -> Box<dyn Fn([f64; 3]) -> f64 + 'a> {
        let coeffs: Vec<_> = dirs
            .iter()
            .zip(&self.means)
            .enumerate()
            .map(|(q, (&d, &r))| {
                if q == site {
                    None
                } else {
                    Some(centered_coeffs(d, r))
                }
            })
            .collect();
        let w = self.moments.contract(&coeffs);
        let r = self.means[site];
        Box::new(move |d| {
            let c = centered_coeffs(d, r);
            (c[0] * w[0] + c[1] * w[1] + c[2] * w[2] + c[3] * w[3]).abs()
        })
    }
}

fn pauli_angles(p: Pauli) -> Angles {
    match p {
        Pauli::X => (std::f64::consts::FRAC_PI_2, 0.0),
        Pauli::Y => (std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
        Pauli::Z => (0.0, 0.0),
    }
}

/// Maximizes `|Cov|` over unit traceless local observables.
///
/// The first restart begins at the best Pauli tuple, so the result is never
/// below the exhaustive Pauli maximum.
pub fn optimize_covariance(
    rho: &DensityMatrix,
    restarts: usize,
    seed: u64,
) -> Result<CovarianceScanResult> {
    let config = AscentConfig {
        restarts: restarts.max(1),
        seed,
        ..Default::default()
    };
    optimize_covariance_with(rho, &config, true)
}

pub fn optimize_covariance_with(
    rho: &DensityMatrix,
    config: &AscentConfig,
    warm_start: bool,
) -> Result<CovarianceScanResult> {
    let objective = CovarianceObjective::new(rho)?;
    let mut warm = Vec::new();
    let mut scanned = 0;
    if warm_start {
        let scan = pauli_scan(rho, OPTIMIZER_TOL)?;
        scanned = scan.evaluated_count;
        let start: Vec<Angles> = scan
            .argmax
            .sites()
            .iter()
            .map(|s| match s {
                SiteObservable::Pauli(p) => pauli_angles(*p),
                other => angles_of(other.axis()),
            })
            .collect();
        warm.push(start);
    }
    let res = maximize(&objective, config, &warm);
    let dirs = res.directions();
    Ok(CovarianceScanResult {
        max_abs: res.value,
        value_at_argmax: objective.signed(&dirs),
        argmax: LocalObservable::from_directions(&dirs)?,
        evaluated_count: res.evaluations + scanned,
        tol: OPTIMIZER_TOL,
        all_below_tol: res.value < OPTIMIZER_TOL,
        converged: res.converged,
    })
}
