//! Bipartite cuts and what can be said across them: quantum mutual information,
//! exact product tests, the partial-transpose witness, and the decision on
//! genuine multipartite classical correlations.
//!
//! A state is classically correlated across `A:B` in the measurement sense
//! exactly when it is not a product across `A:B` (local informationally
//! complete measurements separate the two cases), so the all-cuts decision here
//! is made on the product test. [`crate::measurement`] checks the measurement
//! side independently.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qmat::{
    binary_entropy, check_capacity, hermitian_eigenvalues, scatter_table, DensityMatrix, QubitSet,
};

/// Entrywise tolerance of the product test.
pub const PRODUCT_TOL: f64 = 1e-9;
/// Mutual information (bits) below which a cut counts as uncorrelated.
pub const MI_TOL: f64 = 1e-7;

/// A bipartition `A:B` of the register; canonical cuts have qubit 0 in `A`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Cut {
    a: QubitSet,
    b: QubitSet,
}

impl Cut {
    /// `A` is `a`; `B` is its complement in an `n_qubits` register.
    pub fn new(a: QubitSet, n_qubits: usize) -> Result<Self> {
        a.check_within(n_qubits)?;
        let b = a.complement(n_qubits);
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidCut(format!("{a} leaves one side empty")));
        }
        Ok(Self { a, b })
    }

    pub fn from_sides(a: QubitSet, b: QubitSet) -> Result<Self> {
        let n = a.len() + b.len();
        let cut = Self::new(a, n)?;
        if cut.b != b {
            return Err(Error::InvalidCut(
                "sides must be disjoint and cover the register".into(),
            ));
        }
        Ok(cut)
    }

    pub fn a(&self) -> &QubitSet {
        &self.a
    }

    pub fn b(&self) -> &QubitSet {
        &self.b
    }

    pub fn n_qubits(&self) -> usize {
        self.a.len() + self.b.len()
    }

    pub fn swapped(&self) -> Self {
        Self {
            a: self.b.clone(),
            b: self.a.clone(),
        }
    }

    pub fn canonical(&self) -> Self {
        if self.a.contains(0) {
            self.clone()
        } else {
            self.swapped()
        }
    }

    fn check_for(&self, rho: &DensityMatrix) -> Result<()> {
        if self.n_qubits() != rho.n_qubits() {
            return Err(Error::InvalidCut(format!(
                "cut covers {} qubits, state has {}",
                self.n_qubits(),
                rho.n_qubits()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Cut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.a, self.b)
    }
}

/// All `2^(n-1) - 1` canonical cuts, ordered by the bitmask of `A` (bit `q` for qubit `q`).
pub fn enumerate_cuts(n: usize) -> Result<Vec<Cut>> {
    if n < 2 {
        return Err(Error::InvalidCut(format!(
            "a {n}-qubit register has no bipartition"
        )));
    }
    check_capacity(n)?;
    let full = (1usize << n) - 1;
    Ok((1..full)
        .step_by(2)
        .map(|mask| Cut::new(QubitSet::from_mask(mask, n), n).expect("non-trivial mask"))
        .collect())
}

/// `S(A) + S(B) - S(AB)` in bits.
pub fn mutual_information(rho: &DensityMatrix, cut: &Cut) -> Result<f64> {
    let total = rho.entropy()?;
    mutual_information_given_total(rho, cut, total)
}

fn mutual_information_given_total(rho: &DensityMatrix, cut: &Cut, total: f64) -> Result<f64> {
    cut.check_for(rho)?;
    let sa = rho.partial_trace(cut.a())?.entropy()?;
    let sb = rho.partial_trace(cut.b())?.entropy()?;
    Ok(sa + sb - total)
}

fn require_kaszlikowski_range(n: usize, k: usize, k_max: usize) -> Result<()> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::Scope(format!(
            "closed forms hold for odd n >= 3, got {n}"
        )));
    }
    if k == 0 || k > k_max {
        return Err(Error::Domain {
            value: k as f64,
            domain: "subset size within the register",
        });
    }
    Ok(())
}

/// Entropy of any `k`-qubit marginal of the dephased Kaszlikowski state:
/// `1` for `k = 1`, `1 + H(2/n)` for `k = 2`, `1 + H(k/n) + (k/n) log2 k` otherwise.
pub fn closed_form_entropy(n: usize, k: usize) -> Result<f64> {
    require_kaszlikowski_range(n, k, n)?;
    let x = k as f64 / n as f64;
    Ok(match k {
        1 => 1.0,
        2 => 1.0 + binary_entropy(x)?,
        _ => 1.0 + binary_entropy(x)? + x * (k as f64).log2(),
    })
}

/// Mutual information of the dephased Kaszlikowski state across any cut with
/// `k` qubits on one side.
pub fn closed_form_mi(n: usize, k: usize) -> Result<f64> {
    require_kaszlikowski_range(n, k, n - 1)?;
    let nf = n as f64;
    if n == 3 {
        return Ok(1.0 / 3.0);
    }
    Ok(if k == 1 || k == n - 1 {
        1.0
    } else if k == 2 || k == n - 2 {
        binary_entropy(2.0 / nf)? + (nf - 2.0) / nf
    } else {
        1.0 + binary_entropy(k as f64 / nf)?
    })
}

/// Pairwise mutual information of the dephased Kaszlikowski state, `1 - H(2/n)`.
pub fn closed_form_pairwise_mi(n: usize) -> Result<f64> {
    require_kaszlikowski_range(n, 2, n)?;
    Ok(1.0 - binary_entropy(2.0 / n as f64)?)
}

/// Mutual information of the two-qubit marginal on `i`, `j`.
pub fn pairwise_mutual_information(rho: &DensityMatrix, i: usize, j: usize) -> Result<f64> {
    let n = rho.n_qubits();
    for q in [i, j] {
        if q >= n {
            return Err(Error::IndexOutOfRange {
                index: q,
                n_qubits: n,
            });
        }
    }
    if i == j {
        return Err(Error::DuplicateQubit(i));
    }
    let pair = rho.partial_trace(&QubitSet::new(vec![i, j])?)?;
    let cut = Cut::new(QubitSet::single(0), 2)?;
    mutual_information(&pair, &cut)
}

/// Symmetric matrix of pairwise mutual informations; the diagonal is zero.
pub fn pairwise_matrix(rho: &DensityMatrix) -> Result<Vec<Vec<f64>>> {
    let n = rho.n_qubits();
    let mut m = vec![vec![0.0; n]; n];
    for (i, j) in (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))) {
        let v = pairwise_mutual_information(rho, i, j)?;
        m[i][j] = v;
        m[j][i] = v;
    }
    Ok(m)
}

/// Largest entrywise `|rho - rho_A (x) rho_B|`, with the product laid out in
/// `rho`'s qubit order.
pub fn product_defect(rho: &DensityMatrix, cut: &Cut) -> Result<f64> {
    cut.check_for(rho)?;
    let n = rho.n_qubits();
    let ra = rho.partial_trace(cut.a())?;
    let rb = rho.partial_trace(cut.b())?;
    let sa = scatter_table(cut.a().as_slice(), n);
    let sb = scatter_table(cut.b().as_slice(), n);
    let mut worst = 0.0f64;
    for (ia, &pa) in sa.iter().enumerate() {
        for (ja, &qa) in sa.iter().enumerate() {
            let x = ra.get(ia, ja);
            for (ib, &pb) in sb.iter().enumerate() {
                for (jb, &qb) in sb.iter().enumerate() {
                    let d = rho.get(pa | pb, qa | qb) - x * rb.get(ib, jb);
                    worst = worst.max(d.norm());
                }
            }
        }
    }
    Ok(worst)
}

/// `rho == rho_A (x) rho_B` within `tol`, entrywise.
pub fn is_product(rho: &DensityMatrix, cut: &Cut, tol: f64) -> Result<bool> {
    Ok(product_defect(rho, cut)? < tol)
}

/// Tensor product of all single-qubit marginals, in register order.
pub fn product_of_marginals(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let mut out = rho.partial_trace(&QubitSet::single(0))?;
    for q in 1..rho.n_qubits() {
        out = out.tensor(&rho.partial_trace(&QubitSet::single(q))?)?;
    }
    Ok(out)
}

/// Smallest eigenvalue of the partial transpose on the `A` side. Negative values
/// certify entanglement across the cut.
pub fn ppt_min_eigenvalue(rho: &DensityMatrix, cut: &Cut) -> Result<f64> {
    cut.check_for(rho)?;
    let pt = rho.partial_transpose(cut.a())?;
    let ev = hermitian_eigenvalues(&pt)?;
    Ok(*ev.last().expect("non-empty spectrum"))
}

/// Per-cut record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub cut: Cut,
    pub mutual_information: f64,
    pub is_product: bool,
    pub product_defect: f64,
    pub ppt_min_eigenvalue: Option<f64>,
    pub hv_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub product_tol: f64,
    pub with_ppt: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            product_tol: PRODUCT_TOL,
            with_ppt: false,
        }
    }
}

/// Reports for every canonical cut, in enumeration order.
pub fn analyze_cuts(
    rho: &DensityMatrix,
    options: &AnalysisOptions,
) -> Result<Vec<CorrelationReport>> {
    let cuts = enumerate_cuts(rho.n_qubits())?;
    let total = rho.entropy()?;
    cuts.into_par_iter()
        .map(|cut| {
            let mi = mutual_information_given_total(rho, &cut, total)?;
            let defect = product_defect(rho, &cut)?;
            let ppt = if options.with_ppt {
                Some(ppt_min_eigenvalue(rho, &cut)?)
            } else {
                None
            };
            Ok(CorrelationReport {
                cut,
                mutual_information: mi,
                is_product: defect < options.product_tol,
                product_defect: defect,
                ppt_min_eigenvalue: ppt,
                hv_value: None,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenuineVerdict {
    /// True iff no canonical cut is a product cut.
    pub genuine: bool,
    /// First product cut found, if any.
    pub separating_cut: Option<Cut>,
    pub reports: Vec<CorrelationReport>,
}

/// Genuine multipartite classical correlations: non-product across every cut.
pub fn genuine_classical_correlations(rho: &DensityMatrix, tol: f64) -> Result<GenuineVerdict> {
    let options = AnalysisOptions {
        product_tol: tol,
        ..Default::default()
    };
    let reports = analyze_cuts(rho, &options)?;
    Ok(verdict_from_reports(reports))
}

pub fn verdict_from_reports(reports: Vec<CorrelationReport>) -> GenuineVerdict {
    let separating_cut = reports.iter().find(|r| r.is_product).map(|r| r.cut.clone());
    GenuineVerdict {
        genuine: separating_cut.is_none(),
        separating_cut,
        reports,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::*;
    use approx::assert_abs_diff_eq;

    fn set(v: &[usize]) -> QubitSet {
        QubitSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cut_enumeration() {
        assert_eq!(enumerate_cuts(2).unwrap().len(), 1);
        let c3: Vec<String> = enumerate_cuts(3)
            .unwrap()
            .iter()
            .map(|c| c.to_string())
            .collect();
        assert_eq!(c3, vec!["{0}:{1,2}", "{0,1}:{2}", "{0,2}:{1}"]);
        assert_eq!(enumerate_cuts(5).unwrap().len(), 15);
        assert!(enumerate_cuts(1).is_err());
        assert!(matches!(enumerate_cuts(13), Err(Error::Capacity { .. })));
    }

    #[test]
    fn cut_validation() {
        assert!(Cut::new(set(&[0, 1, 2]), 3).is_err());
        assert!(Cut::new(set(&[3]), 3).is_err());
        assert!(Cut::from_sides(set(&[0]), set(&[2])).is_err());
        let c = Cut::new(set(&[1]), 3).unwrap();
        assert_eq!(c.canonical().to_string(), "{0,2}:{1}");
    }

    #[test]
    fn dephased_kaszlikowski_mi_spot_values() {
        let d3 = dephased_kaszlikowski(3).unwrap();
        for cut in enumerate_cuts(3).unwrap() {
            assert_abs_diff_eq!(
                mutual_information(&d3, &cut).unwrap(),
                1.0 / 3.0,
                epsilon = 1e-12
            );
        }
        let d5 = dephased_kaszlikowski(5).unwrap();
        let k1 = Cut::new(set(&[0]), 5).unwrap();
        assert_abs_diff_eq!(mutual_information(&d5, &k1).unwrap(), 1.0, epsilon = 1e-12);
        let k2 = Cut::new(set(&[0, 3]), 5).unwrap();
        // H(2/5) + 3/5
        assert_abs_diff_eq!(
            mutual_information(&d5, &k2).unwrap(),
            1.570950594454669,
            epsilon = 1e-12
        );
    }

    #[test]
    fn closed_form_values() {
        // Decimals from direct evaluation of the binary-entropy expressions.
        assert_abs_diff_eq!(
            closed_form_mi(7, 3).unwrap(),
            1.9852281360342516,
            epsilon = 1e-12
        );
        assert_eq!(closed_form_mi(5, 1).unwrap(), 1.0);
        assert_eq!(closed_form_mi(3, 1).unwrap(), 1.0 / 3.0);
        assert_abs_diff_eq!(
            closed_form_entropy(5, 2).unwrap(),
            1.970950594454669,
            epsilon = 1e-12
        );
        assert_eq!(closed_form_entropy(5, 1).unwrap(), 1.0);
        assert_abs_diff_eq!(
            closed_form_entropy(7, 3).unwrap(),
            2.6644977792004614,
            epsilon = 1e-12
        );
        assert!(closed_form_mi(4, 1).is_err());
        assert!(closed_form_mi(5, 5).is_err());
        assert!(closed_form_entropy(5, 0).is_err());
    }

    #[test]
    fn closed_forms_match_enumeration() {
        for n in [3usize, 5, 7] {
            let d = dephased_kaszlikowski(n).unwrap();
            for k in 1..=n {
                let s = d
                    .partial_trace(&QubitSet::new((0..k).collect()).unwrap())
                    .unwrap()
                    .entropy()
                    .unwrap();
                assert_abs_diff_eq!(s, closed_form_entropy(n, k).unwrap(), epsilon = 1e-12);
            }
            for cut in enumerate_cuts(n).unwrap() {
                let mi = mutual_information(&d, &cut).unwrap();
                assert_abs_diff_eq!(
                    mi,
                    closed_form_mi(n, cut.a().len()).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn pairwise_values() {
        let d3 = dephased_kaszlikowski(3).unwrap();
        assert_abs_diff_eq!(
            pairwise_mutual_information(&d3, 0, 2).unwrap(),
            0.08170416594551044,
            epsilon = 1e-12
        );
        let g = ghz_classical(5).unwrap();
        assert_abs_diff_eq!(
            pairwise_mutual_information(&g, 1, 4).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let p = parity_even_classical(4).unwrap();
        for row in pairwise_matrix(&p).unwrap() {
            for v in row {
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
            }
        }
        assert!(pairwise_mutual_information(&g, 2, 2).is_err());
        assert!(pairwise_mutual_information(&g, 0, 5).is_err());
    }

    #[test]
    fn product_tests() {
        let a = random_state(1, 1).unwrap();
        let b = random_state(2, 2).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert!(is_product(&ab, &Cut::new(set(&[0]), 3).unwrap(), PRODUCT_TOL).unwrap());
        let g = ghz_classical(3).unwrap();
        for cut in enumerate_cuts(3).unwrap() {
            assert!(!is_product(&g, &cut, PRODUCT_TOL).unwrap());
        }
        let m = parity_even_classical(4)
            .unwrap()
            .partial_trace(&set(&[0, 1, 2]))
            .unwrap();
        for cut in enumerate_cuts(3).unwrap() {
            assert!(is_product(&m, &cut, PRODUCT_TOL).unwrap());
        }
    }

    #[test]
    fn genuine_decisions() {
        for n in [3, 5, 7] {
            let v = genuine_classical_correlations(&dephased_kaszlikowski(n).unwrap(), PRODUCT_TOL)
                .unwrap();
            assert!(v.genuine);
            assert!(v.reports.iter().all(|r| r.mutual_information > MI_TOL));
        }
        let v = genuine_classical_correlations(&parity_even_classical(4).unwrap(), PRODUCT_TOL)
            .unwrap();
        assert!(v.genuine);
        for r in &v.reports {
            assert_abs_diff_eq!(r.mutual_information, 1.0, epsilon = 1e-12);
        }
        let v =
            genuine_classical_correlations(&random_product_classical(4, 3).unwrap(), PRODUCT_TOL)
                .unwrap();
        assert!(!v.genuine);
        assert_eq!(v.separating_cut.unwrap().to_string(), "{0}:{1,2,3}");
    }

    #[test]
    fn ppt_witness() {
        let d = dephased_kaszlikowski(3).unwrap();
        let k = kaszlikowski(3).unwrap();
        for cut in enumerate_cuts(3).unwrap() {
            assert!(ppt_min_eigenvalue(&d, &cut).unwrap() >= 0.0);
            assert!(ppt_min_eigenvalue(&k, &cut).unwrap() < -1e-6, "{cut}");
        }
        let s = 1.0 / 2f64.sqrt();
        let bell = DensityMatrix::pure(2, &[s.into(), 0.0.into(), 0.0.into(), s.into()]).unwrap();
        let cut = Cut::new(set(&[0]), 2).unwrap();
        assert_abs_diff_eq!(
            ppt_min_eigenvalue(&bell, &cut).unwrap(),
            -0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn traced_w_state_is_npt() {
        let w = w_state(3).unwrap().partial_trace(&set(&[0, 1])).unwrap();
        assert!(ppt_min_eigenvalue(&w, &Cut::new(set(&[0]), 2).unwrap()).unwrap() < 0.0);
    }
}
