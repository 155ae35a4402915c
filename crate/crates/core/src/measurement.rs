//! Local product measurements and what their outcomes reveal.
//!
//! Covers Born-rule outcome tables, the factorization test on those tables, the
//! Henderson-Vedral quantity `S(rho_A) - sum_i p_i S(rho_A^i)` for a measurement
//! on `B`, its maximization over product projective measurements, and state
//! reconstruction from the six-outcome informationally complete POVM
//! `{(I +- sigma_k)/6}`.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;

use crate::correlations::Cut;
use crate::error::{Error, Result};
use crate::optimize::{direction, maximize, AscentConfig, SphereObjective};
use crate::qmat::{
    check_capacity, contract_sites, hermitian_eigenvalues, pauli_basis, scatter_table, spread_bits,
    CMatrix, DensityMatrix, Pauli, Spectrum,
};

/// Tolerance on POVM completeness and element positivity.
pub const POVM_TOL: f64 = 1e-12;
/// Probabilities down to `-PROB_CLAMP` are round-off and clamp to zero.
pub const PROB_CLAMP: f64 = 1e-12;
/// Normalization tolerance of an outcome table.
pub const PROB_SUM_TOL: f64 = 1e-9;
/// Outcomes rarer than this are skipped in the conditional-entropy sum.
pub const MIN_OUTCOME_PROB: f64 = 1e-12;
/// Largest register reconstructed from a `6^n` outcome table.
pub const MAX_IC_QUBITS: usize = 6;

/// Measurement on one qubit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteMeasurement {
    /// Projectors `(I +- n . sigma)/2`, outcome `+` first.
    Projective { axis: [f64; 3] },
    /// `(I + X)/6, (I - X)/6, (I + Y)/6, (I - Y)/6, (I + Z)/6, (I - Z)/6`.
    InformationallyComplete,
    /// Arbitrary POVM elements, checked on use.
    #[serde(skip)]
    Povm(Vec<Matrix2<Complex64>>),
}

impl SiteMeasurement {
    pub fn computational() -> Self {
        SiteMeasurement::Projective {
            axis: [0.0, 0.0, 1.0],
        }
    }

    pub fn elements(&self) -> Vec<Matrix2<Complex64>> {
        let id = Matrix2::<Complex64>::identity();
        match self {
            SiteMeasurement::Projective { axis } => {
                let a = crate::qmat::bloch_operator(*axis);
                let half = Complex64::from(0.5);
                vec![(id + a) * half, (id - a) * half]
            }
            SiteMeasurement::InformationallyComplete => {
                let sixth = Complex64::from(1.0 / 6.0);
                Pauli::ALL
                    .iter()
                    .flat_map(|p| {
                        let s = p.matrix();
                        [(id + s) * sixth, (id - s) * sixth]
                    })
                    .collect()
            }
            SiteMeasurement::Povm(els) => els.clone(),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            SiteMeasurement::Projective { .. } => 2,
            SiteMeasurement::InformationallyComplete => 6,
            SiteMeasurement::Povm(els) => els.len(),
        }
    }

    /// Elements must be Hermitian, positive and sum to the identity.
    pub fn validate(&self) -> Result<()> {
        if let SiteMeasurement::Projective { axis } = self {
            let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > POVM_TOL {
                return Err(Error::InvalidMeasurement(format!(
                    "projective axis has norm {norm}"
                )));
            }
        }
        let els = self.elements();
        if els.is_empty() {
            return Err(Error::InvalidMeasurement("no POVM elements".into()));
        }
        let mut total = Matrix2::<Complex64>::zeros();
        for e in &els {
            let m = CMatrix::from_fn(2, 2, |r, c| e[(r, c)]);
            let ev = hermitian_eigenvalues(&m)
                .map_err(|_| Error::InvalidMeasurement("POVM element is not Hermitian".into()))?;
            if ev[1] < -POVM_TOL {
                return Err(Error::InvalidMeasurement(format!(
                    "POVM element has eigenvalue {:e}",
                    ev[1]
                )));
            }
            total += e;
        }
        let defect = (total - Matrix2::identity())
            .iter()
            .fold(0.0f64, |acc, z| acc.max(z.norm()));
        if defect > POVM_TOL {
            return Err(Error::InvalidMeasurement(format!(
                "POVM elements sum to I only within {defect:e}"
            )));
        }
        Ok(())
    }
}

/// One measurement per qubit, applied independently.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductMeasurement(pub Vec<SiteMeasurement>);

impl ProductMeasurement {
    pub fn computational(n: usize) -> Self {
        Self(vec![SiteMeasurement::computational(); n])
    }

    /// The six-outcome informationally complete POVM on every qubit.
    pub fn ic_povm(n: usize) -> Self {
        Self(vec![SiteMeasurement::InformationallyComplete; n])
    }

    pub fn projective(axes: &[[f64; 3]]) -> Self {
        Self(
            axes.iter()
                .map(|&axis| SiteMeasurement::Projective { axis })
                .collect(),
        )
    }

    pub fn sites(&self) -> &[SiteMeasurement] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.0.iter().try_for_each(SiteMeasurement::validate)
    }

    fn functionals(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.0
            .iter()
            .map(|s| {
                s.elements()
                    .iter()
                    .map(|e| vec![e[(0, 0)], e[(1, 0)], e[(0, 1)], e[(1, 1)]])
                    .collect()
            })
            .collect()
    }
}

/// Joint outcome probabilities of a product measurement, row-major over the
/// per-qubit outcomes with qubit 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    arities: Vec<usize>,
    probs: Vec<f64>,
    informationally_complete: bool,
}

impl OutcomeDistribution {
    /// Clamps round-off negatives and checks normalization.
    pub fn new(arities: Vec<usize>, mut probs: Vec<f64>) -> Result<Self> {
        let size: usize = arities.iter().product();
        if probs.len() != size {
            return Err(Error::DimensionMismatch {
                expected: size,
                got: probs.len(),
            });
        }
        for p in &mut probs {
            if *p < -PROB_CLAMP || p.is_nan() {
                return Err(Error::InvalidMeasurement(format!(
                    "negative probability {p:e}"
                )));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidMeasurement(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self {
            arities,
            probs,
            informationally_complete: false,
        })
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Whether the table came from the six-outcome IC POVM on every qubit.
    pub fn is_informationally_complete(&self) -> bool {
        self.informationally_complete
    }

    fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut d = vec![0; self.arities.len()];
        for q in (0..self.arities.len()).rev() {
            d[q] = index % self.arities[q];
            index /= self.arities[q];
        }
        d
    }

    fn sub_index(&self, digits: &[usize], sites: &[usize]) -> usize {
        sites
            .iter()
            .fold(0, |acc, &q| acc * self.arities[q] + digits[q])
    }

    /// Marginal over `sites` (ascending), in the same layout convention.
    pub fn marginal(&self, sites: &[usize]) -> Vec<f64> {
        let size: usize = sites.iter().map(|&q| self.arities[q]).product();
        let mut out = vec![0.0; size];
        for (i, &p) in self.probs.iter().enumerate() {
            let d = self.digits(i);
            out[self.sub_index(&d, sites)] += p;
        }
        out
    }
}

/// Born-rule table `p(o) = Tr[rho (x)_q E_q^{o_q}]`.
pub fn measure(rho: &DensityMatrix, m: &ProductMeasurement) -> Result<OutcomeDistribution> {
    let n = rho.n_qubits();
    if m.len() != n {
        return Err(Error::Arity {
            expected: n,
            got: m.len(),
        });
    }
    m.validate()?;
    let table = contract_sites(rho.pair_tensor(), 4, &m.functionals());
    let arities = m.sites().iter().map(SiteMeasurement::arity).collect();
    let mut d = OutcomeDistribution::new(arities, table.iter().map(|z| z.re).collect())?;
    d.informationally_complete = m
        .sites()
        .iter()
        .all(|s| *s == SiteMeasurement::InformationallyComplete);
    Ok(d)
}

/// Largest `|p(a, b) - p(a) p(b)|` over joint outcomes of the two sides.
pub fn factorization_defect(d: &OutcomeDistribution, cut: &Cut) -> Result<f64> {
    if cut.n_qubits() != d.arities.len() {
        return Err(Error::InvalidCut(format!(
            "cut covers {} qubits, distribution has {}",
            cut.n_qubits(),
            d.arities.len()
        )));
    }
    let a = cut.a().as_slice();
    let b = cut.b().as_slice();
    let pa = d.marginal(a);
    let pb = d.marginal(b);
    let mut worst = 0.0f64;
    for (i, &p) in d.probs.iter().enumerate() {
        let digits = d.digits(i);
        let prod = pa[d.sub_index(&digits, a)] * pb[d.sub_index(&digits, b)];
        worst = worst.max((p - prod).abs());
    }
    Ok(worst)
}

/// True iff the outcome table factorizes across `cut` within `tol`.
pub fn distribution_factorizes(d: &OutcomeDistribution, cut: &Cut, tol: f64) -> Result<bool> {
    Ok(factorization_defect(d, cut)? < tol)
}

/// Unnormalized post-measurement states of `A`, `Tr_B[(I (x) E_o) rho]`, one per
/// joint outcome `o` on `B`.
pub fn conditional_states(
    rho: &DensityMatrix,
    cut: &Cut,
    m_b: &ProductMeasurement,
) -> Result<Vec<CMatrix>> {
    let n = rho.n_qubits();
    if cut.n_qubits() != n {
        return Err(Error::InvalidCut("cut does not match the state".into()));
    }
    if m_b.len() != cut.b().len() {
        return Err(Error::Arity {
            expected: cut.b().len(),
            got: m_b.len(),
        });
    }
    m_b.validate()?;
    let sa = scatter_table(cut.a().as_slice(), n);
    let sb = scatter_table(cut.b().as_slice(), n);
    let spread: Vec<usize> = (0..sb.len()).map(spread_bits).collect();
    let functionals = m_b.functionals();
    let outcomes: usize = m_b.sites().iter().map(SiteMeasurement::arity).product();
    let da = sa.len();
    let mut out = vec![CMatrix::zeros(da, da); outcomes];
    let mut block = vec![Complex64::new(0.0, 0.0); sb.len() * sb.len()];
    for (ia, &ra) in sa.iter().enumerate() {
        for (ja, &ca) in sa.iter().enumerate() {
            for (ib, &rb) in sb.iter().enumerate() {
                for (jb, &cb) in sb.iter().enumerate() {
                    block[(spread[ib] << 1) | spread[jb]] = rho.get(ra | rb, ca | cb);
                }
            }
            let vals = contract_sites(block.clone(), 4, &functionals);
            for (o, v) in vals.into_iter().enumerate() {
                out[o][(ia, ja)] = v;
            }
        }
    }
    Ok(out)
}

/// `S(rho_A) - sum_o p_o S(rho_A^o)` for the measurement `m_b` on the `B` side.
pub fn hv_classical_correlation(
    rho: &DensityMatrix,
    cut: &Cut,
    m_b: &ProductMeasurement,
) -> Result<f64> {
    let s_a = rho.partial_trace(cut.a())?.entropy()?;
    let mut conditional = 0.0;
    for sigma in conditional_states(rho, cut, m_b)? {
        let p = sigma.trace().re;
        if p < MIN_OUTCOME_PROB {
            continue;
        }
        let normalized = sigma / Complex64::from(p);
        let spec = Spectrum::from_raw(hermitian_eigenvalues(&normalized)?)?;
        conditional += p * spec.entropy();
    }
    Ok(s_a - conditional)
}

/// The Henderson-Vedral quantity as a function of one projective axis per `B` qubit.
pub struct HvObjective<'a> {
    rho: &'a DensityMatrix,
    cut: &'a Cut,
}

impl SphereObjective for HvObjective<'_> {
    fn sites(&self) -> usize {
        self.cut.b().len()
    }

    fn value(&self, dirs: &[[f64; 3]]) -> f64 {
        hv_classical_correlation(self.rho, self.cut, &ProductMeasurement::projective(dirs))
            .unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HvOptimum {
    /// Best value found: a lower bound on the maximum over product projective measurements.
    pub value: f64,
    pub measurement: ProductMeasurement,
    /// Value at computational-basis measurements on `B`.
    pub computational_value: f64,
    pub restarts: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Maximizes the Henderson-Vedral quantity over product projective measurements on
/// `B`. The first restart starts at the computational basis.
pub fn optimize_hv(
    rho: &DensityMatrix,
    cut: &Cut,
    restarts: usize,
    seed: u64,
) -> Result<HvOptimum> {
    let config = AscentConfig {
        restarts: restarts.max(1),
        seed,
        ..Default::default()
    };
    optimize_hv_with(rho, cut, &config)
}

pub fn optimize_hv_with(
    rho: &DensityMatrix,
    cut: &Cut,
    config: &AscentConfig,
) -> Result<HvOptimum> {
    let nb = cut.b().len();
    let computational_value =
        hv_classical_correlation(rho, cut, &ProductMeasurement::computational(nb))?;
    let objective = HvObjective { rho, cut };
    let res = maximize(&objective, config, &[vec![(0.0, 0.0); nb]]);
    let dirs: Vec<[f64; 3]> = res.angles.iter().copied().map(direction).collect();
    Ok(HvOptimum {
        value: res.value,
        measurement: ProductMeasurement::projective(&dirs),
        computational_value,
        restarts: res.restarts,
        evaluations: res.evaluations,
        converged: res.converged,
    })
}

pub fn ic_povm_measurement(n: usize) -> ProductMeasurement {
    ProductMeasurement::ic_povm(n)
}

/// Linear inversion of an IC-POVM outcome table.
///
/// Per qubit, `I` is the sum of the six elements and `sigma_k = 3 (E_{+k} - E_{-k})`,
/// so every Pauli-string expectation is a fixed linear form in the table; the
/// state is then `2^-n sum_mu <sigma_mu> sigma_mu`.
pub fn reconstruct_from_ic(d: &OutcomeDistribution) -> Result<DensityMatrix> {
    let n = d.arities.len();
    if !d.informationally_complete || d.arities.iter().any(|&a| a != 6) {
        return Err(Error::InvalidMeasurement(
            "reconstruction needs the six-outcome IC POVM on every qubit".into(),
        ));
    }
    if n > MAX_IC_QUBITS {
        return Err(Error::Capacity {
            requested: n,
            limit: MAX_IC_QUBITS,
        });
    }
    check_capacity(n)?;
    let c = |v: [f64; 6]| v.iter().map(|&x| Complex64::from(x)).collect::<Vec<_>>();
    let to_moments = vec![
        c([1.0; 6]),
        c([3.0, -3.0, 0.0, 0.0, 0.0, 0.0]),
        c([0.0, 0.0, 3.0, -3.0, 0.0, 0.0]),
        c([0.0, 0.0, 0.0, 0.0, 3.0, -3.0]),
    ];
    let probs: Vec<Complex64> = d.probs.iter().map(|&p| Complex64::from(p)).collect();
    let moments = contract_sites(probs, 6, &vec![to_moments; n]);

    // Pair index 2r + c receives sum_mu <sigma_mu> sigma_mu[r][c] / 2.
    let basis = pauli_basis();
    let half = Complex64::from(0.5);
    let to_pairs: Vec<Vec<Complex64>> = (0..4)
        .map(|pair| {
            let (r, col) = (pair / 2, pair % 2);
            basis.iter().map(|s| s[(r, col)] * half).collect()
        })
        .collect();
    let pairs = contract_sites(moments, 4, &vec![to_pairs; n]);
    DensityMatrix::from_pair_tensor(n, &pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::{enumerate_cuts, is_product, mutual_information, PRODUCT_TOL};
    use crate::qmat::QubitSet;
    use crate::states::*;
    use approx::assert_abs_diff_eq;

    fn cut(a: &[usize], n: usize) -> Cut {
        Cut::new(QubitSet::new(a.to_vec()).unwrap(), n).unwrap()
    }

    fn bell() -> DensityMatrix {
        let s = 1.0 / 2f64.sqrt();
        DensityMatrix::pure(2, &[s.into(), 0.0.into(), 0.0.into(), s.into()]).unwrap()
    }

    #[test]
    fn ghz_computational_outcomes() {
        let d = measure(
            &ghz_classical(3).unwrap(),
            &ProductMeasurement::computational(3),
        )
        .unwrap();
        assert_eq!(d.probs(), &[0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
        for c in enumerate_cuts(3).unwrap() {
            assert!(!distribution_factorizes(&d, &c, 1e-9).unwrap());
        }
    }

    #[test]
    fn ic_outcomes_of_zero_state() {
        let d = measure(
            &DensityMatrix::basis_state(&[0]).unwrap(),
            &ic_povm_measurement(1),
        )
        .unwrap();
        let expected = [1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0, 0.0];
        for (p, e) in d.probs().iter().zip(expected) {
            assert_abs_diff_eq!(*p, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn dephased_kaszlikowski_outcomes() {
        let d = measure(
            &dephased_kaszlikowski(3).unwrap(),
            &ProductMeasurement::computational(3),
        )
        .unwrap();
        for (i, p) in d.probs().iter().enumerate() {
            let expected = if i == 0 || i == 7 { 0.0 } else { 1.0 / 6.0 };
            assert_abs_diff_eq!(*p, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn invalid_povms_are_rejected() {
        let rho = DensityMatrix::maximally_mixed(1).unwrap();
        let half = Matrix2::identity() * Complex64::from(0.5);
        let short = ProductMeasurement(vec![SiteMeasurement::Povm(vec![half])]);
        assert!(matches!(
            measure(&rho, &short),
            Err(Error::InvalidMeasurement(_))
        ));
        let z = Pauli::Z.matrix();
        let negative = ProductMeasurement(vec![SiteMeasurement::Povm(vec![
            z,
            Matrix2::identity() - z,
        ])]);
        assert!(measure(&rho, &negative).is_err());
        let tilted = ProductMeasurement::projective(&[[1.0, 1.0, 0.0]]);
        assert!(measure(&rho, &tilted).is_err());
        assert!(measure(&rho, &ProductMeasurement::computational(2)).is_err());
    }

    #[test]
    fn factorization_on_parity_marginal() {
        let m = parity_even_classical(4)
            .unwrap()
            .partial_trace(&QubitSet::new(vec![0, 1, 2]).unwrap())
            .unwrap();
        let d = measure(&m, &ProductMeasurement::computational(3)).unwrap();
        for c in enumerate_cuts(3).unwrap() {
            assert!(distribution_factorizes(&d, &c, 1e-9).unwrap());
        }
    }

    #[test]
    fn hv_bell_and_product() {
        let v = hv_classical_correlation(
            &bell(),
            &cut(&[0], 2),
            &ProductMeasurement::computational(1),
        )
        .unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        let prod = random_state(1, 3)
            .unwrap()
            .tensor(&random_state(1, 4).unwrap())
            .unwrap();
        let m = ProductMeasurement::projective(&[[0.6, 0.0, 0.8]]);
        assert_abs_diff_eq!(
            hv_classical_correlation(&prod, &cut(&[0], 2), &m).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn hv_dephased_kaszlikowski() {
        let d = dephased_kaszlikowski(3).unwrap();
        let c = cut(&[0], 3);
        let v = hv_classical_correlation(&d, &c, &ProductMeasurement::computational(2)).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, mutual_information(&d, &c).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn hv_rejects_mismatched_measurement() {
        let d = dephased_kaszlikowski(3).unwrap();
        assert!(matches!(
            hv_classical_correlation(&d, &cut(&[0], 3), &ProductMeasurement::computational(1)),
            Err(Error::Arity {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn hv_optimizer_cases() {
        let d = dephased_kaszlikowski(3).unwrap();
        let opt = optimize_hv(&d, &cut(&[0], 3), 8, 1).unwrap();
        assert_abs_diff_eq!(opt.value, 1.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(opt.computational_value, 1.0 / 3.0, epsilon = 1e-12);
        let b = optimize_hv(&bell(), &cut(&[0], 2), 4, 1).unwrap();
        assert_abs_diff_eq!(b.value, 1.0, epsilon = 1e-9);
        let mixed = optimize_hv(
            &DensityMatrix::maximally_mixed(2).unwrap(),
            &cut(&[0], 2),
            4,
            1,
        )
        .unwrap();
        assert_abs_diff_eq!(mixed.value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ic_roundtrip() {
        let zero = DensityMatrix::basis_state(&[0]).unwrap();
        let back = reconstruct_from_ic(&measure(&zero, &ic_povm_measurement(1)).unwrap()).unwrap();
        assert!(back.max_abs_diff(&zero) < 1e-10);
        let k = kaszlikowski(3).unwrap();
        let back = reconstruct_from_ic(&measure(&k, &ic_povm_measurement(3)).unwrap()).unwrap();
        assert!(back.max_abs_diff(&k) < 1e-8);
    }

    #[test]
    fn reconstruction_needs_ic_table() {
        let d = measure(
            &ghz_classical(2).unwrap(),
            &ProductMeasurement::computational(2),
        )
        .unwrap();
        assert!(matches!(
            reconstruct_from_ic(&d),
            Err(Error::InvalidMeasurement(_))
        ));
    }

    #[test]
    fn ic_factorization_tracks_product_structure() {
        let mut rng = seeded_rng(10);
        let a = QubitSet::new(vec![0, 2]).unwrap();
        let rho = random_product_across_with(3, &a, &mut rng).unwrap();
        let d = measure(&rho, &ic_povm_measurement(3)).unwrap();
        for c in enumerate_cuts(3).unwrap() {
            assert_eq!(
                distribution_factorizes(&d, &c, 1e-9).unwrap(),
                is_product(&rho, &c, PRODUCT_TOL).unwrap(),
                "{c}"
            );
        }
    }
}
