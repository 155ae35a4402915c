//! Ancilla extensions and the postulate test for correlation measures.
//!
//! A measure passes on a given extension unless the original state has no
//! genuine correlations according to it (value below threshold) while the
//! extended state does. Failing once is enough to refute the measure.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;

use crate::correlations::{enumerate_cuts, mutual_information, Cut};
use crate::covariance::{pauli_scan, SCAN_TOL};
use crate::error::{Error, Result};
use crate::qmat::{check_capacity, cnot, CMatrix, DensityMatrix, QubitSet, TOL_HERM, TOL_TRACE};
use crate::states::ghz_classical;

/// Below this a measure is read as "no genuine correlations".
pub const DEFAULT_THRESHOLD: f64 = 1e-9;

/// An ancilla qubit handed to one of the original parties.
#[derive(Debug, Clone, PartialEq)]
pub struct Ancilla {
    pub state: Matrix2<Complex64>,
    pub owner: usize,
}

impl Ancilla {
    /// An ancilla prepared in `|0><0|`.
    pub fn zero(owner: usize) -> Self {
        let mut state = Matrix2::zeros();
        state[(0, 0)] = Complex64::new(1.0, 0.0);
        Self { state, owner }
    }
}

/// A unitary applied by one party to some of its holdings. Qubit indices refer
/// to the extended register: `0..n` are the original qubits, `n + j` is ancilla `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperation {
    pub party: usize,
    pub qubits: Vec<usize>,
    pub unitary: CMatrix,
}

/// Attach ancillas, act locally, then give each ancilla to a new party.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Extension {
    ancillas: Vec<Ancilla>,
    operations: Vec<LocalOperation>,
    redistribution: Option<Vec<usize>>,
}

impl Extension {
    /// The do-nothing extension.
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn with_ancilla(mut self, ancilla: Ancilla) -> Self {
        self.ancillas.push(ancilla);
        self
    }

    pub fn with_operation(mut self, op: LocalOperation) -> Self {
        self.operations.push(op);
        self
    }

    /// Party index for each ancilla, in ancilla order. Without this ancilla `j`
    /// goes to party `n + j`.
    pub fn with_redistribution(mut self, parties: Vec<usize>) -> Self {
        self.redistribution = Some(parties);
        self
    }

    pub fn ancillas(&self) -> &[Ancilla] {
        &self.ancillas
    }

    pub fn operations(&self) -> &[LocalOperation] {
        &self.operations
    }

    pub fn ancilla_count(&self) -> usize {
        self.ancillas.len()
    }

    /// New party index of every ancilla for an `n`-party input.
    pub fn redistribution(&self, n: usize) -> Vec<usize> {
        match &self.redistribution {
            Some(r) => r.clone(),
            None => (n..n + self.ancillas.len()).collect(),
        }
    }

    /// Checks ownership, locality and redistribution against an `n`-party input.
    pub fn validate(&self, n: usize) -> Result<()> {
        let k = self.ancillas.len();
        for (j, a) in self.ancillas.iter().enumerate() {
            if a.owner >= n {
                return Err(Error::InvalidExtension(format!(
                    "ancilla {j} owned by unknown party {}",
                    a.owner
                )));
            }
            DensityMatrix::qubit(a.state)?;
        }
        let owner_of = |q: usize| if q < n { q } else { self.ancillas[q - n].owner };
        for op in &self.operations {
            if op.party >= n {
                return Err(Error::InvalidExtension(format!(
                    "operation by unknown party {}",
                    op.party
                )));
            }
            QubitSet::new(op.qubits.clone())?.check_within(n + k)?;
            if let Some(&q) = op.qubits.iter().find(|&&q| owner_of(q) != op.party) {
                return Err(Error::Locality(format!(
                    "party {} acts on qubit {q} held by party {}",
                    op.party,
                    owner_of(q)
                )));
            }
        }
        let targets = self.redistribution(n);
        if targets.len() != k {
            return Err(Error::Arity {
                expected: k,
                got: targets.len(),
            });
        }
        let mut seen = vec![false; k];
        for &p in &targets {
            if p < n || p >= n + k || std::mem::replace(&mut seen[p - n], true) {
                return Err(Error::InvalidExtension(format!(
                    "redistribution must send the {k} ancillas to distinct new parties {n}..{}",
                    n + k
                )));
            }
        }
        Ok(())
    }
}

/// Where a party of the extended state came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PartyOrigin {
    Original,
    Ancilla { index: usize, attached_to: usize },
}

/// Output of [`extend_state`]: party `p` holds qubit `p`.
#[derive(Debug, Clone)]
pub struct ExtendedState {
    pub state: DensityMatrix,
    pub origins: Vec<PartyOrigin>,
}

impl ExtendedState {
    pub fn n_parties(&self) -> usize {
        self.origins.len()
    }

    pub fn parties(&self) -> Vec<QubitSet> {
        singleton_parties(self.origins.len())
    }

    /// Qubits of the parties that existed before the extension.
    pub fn original_qubits(&self) -> QubitSet {
        let kept = (0..self.origins.len())
            .filter(|&p| self.origins[p] == PartyOrigin::Original)
            .collect();
        QubitSet::new(kept).expect("distinct party indices")
    }
}

pub fn singleton_parties(n: usize) -> Vec<QubitSet> {
    (0..n).map(QubitSet::single).collect()
}

/// Runs the extension on an `n`-qubit state with one qubit per party.
pub fn extend_state(rho: &DensityMatrix, ext: &Extension) -> Result<ExtendedState> {
    let n = rho.n_qubits();
    let k = ext.ancilla_count();
    ext.validate(n)?;
    check_capacity(n + k)?;

    let mut state = rho.clone();
    for a in ext.ancillas() {
        state = state.tensor(&DensityMatrix::qubit(a.state)?)?;
    }
    for op in ext.operations() {
        state = state.apply_unitary(&op.unitary, &op.qubits)?;
    }

    let targets = ext.redistribution(n);
    let mut order: Vec<usize> = (0..n + k).collect();
    let mut origins = vec![PartyOrigin::Original; n + k];
    for (j, &p) in targets.iter().enumerate() {
        order[p] = n + j;
        origins[p] = PartyOrigin::Ancilla {
            index: j,
            attached_to: ext.ancillas()[j].owner,
        };
    }
    let state = state.permute_qubits(&order)?;
    debug_assert!((state.matrix().trace().re - 1.0).abs() < TOL_TRACE + TOL_HERM);
    Ok(ExtendedState { state, origins })
}

/// A real-valued multipartite correlation measure over a party structure.
pub trait CorrelationMeasure {
    fn name(&self) -> &str;
    fn evaluate(&self, rho: &DensityMatrix, parties: &[QubitSet]) -> Result<f64>;
}

/// Largest `|Cov|` over all local Pauli strings, one qubit per party.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxAbsPauliCovariance;

impl CorrelationMeasure for MaxAbsPauliCovariance {
    fn name(&self) -> &str {
        "max_abs_pauli_covariance"
    }

    fn evaluate(&self, rho: &DensityMatrix, parties: &[QubitSet]) -> Result<f64> {
        check_singletons(rho, parties)?;
        Ok(pauli_scan(rho, SCAN_TOL)?.max_abs)
    }
}

/// Smallest quantum mutual information over all bipartitions of the parties.
/// Zero when there is at most one party.
#[derive(Debug, Clone, Copy, Default)]
pub struct MinCutMutualInformation;

impl CorrelationMeasure for MinCutMutualInformation {
    fn name(&self) -> &str {
        "min_cut_mutual_information"
    }

    fn evaluate(&self, rho: &DensityMatrix, parties: &[QubitSet]) -> Result<f64> {
        let n = rho.n_qubits();
        check_partition(n, parties)?;
        let m = parties.len();
        if m < 2 {
            return Ok(0.0);
        }
        let mut best = f64::INFINITY;
        for party_cut in enumerate_cuts(m)? {
            let a = party_cut
                .a()
                .iter()
                .flat_map(|p| parties[p].iter())
                .collect();
            let cut = Cut::new(QubitSet::new(a)?, n)?;
            best = best.min(mutual_information(rho, &cut)?);
        }
        Ok(best)
    }
}

fn check_partition(n: usize, parties: &[QubitSet]) -> Result<()> {
    let mut seen = vec![false; n];
    for set in parties {
        if set.is_empty() {
            return Err(Error::EmptyQubitSet);
        }
        set.check_within(n)?;
        for q in set.iter() {
            if std::mem::replace(&mut seen[q], true) {
                return Err(Error::DuplicateQubit(q));
            }
        }
    }
    match seen.iter().position(|&s| !s) {
        Some(q) => Err(Error::InvalidCut(format!("qubit {q} belongs to no party"))),
        None => Ok(()),
    }
}

fn check_singletons(rho: &DensityMatrix, parties: &[QubitSet]) -> Result<()> {
    check_partition(rho.n_qubits(), parties)?;
    if parties.iter().any(|p| p.len() != 1) {
        return Err(Error::Scope(
            "this measure needs one qubit per party".into(),
        ));
    }
    Ok(())
}

/// Before/after values of one measure on one extension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureVerdict {
    pub measure: String,
    pub value_before: f64,
    pub value_after: f64,
    pub threshold: f64,
    pub postulate_violated: bool,
}

impl MeasureVerdict {
    pub fn new(
        measure: impl Into<String>,
        value_before: f64,
        value_after: f64,
        threshold: f64,
    ) -> Self {
        Self {
            measure: measure.into(),
            value_before,
            value_after,
            threshold,
            postulate_violated: value_before < threshold && value_after >= threshold,
        }
    }
}

pub fn check_postulate(
    measure: &dyn CorrelationMeasure,
    rho: &DensityMatrix,
    ext: &Extension,
    threshold: f64,
) -> Result<MeasureVerdict> {
    let extended = extend_state(rho, ext)?;
    let before = measure.evaluate(rho, &singleton_parties(rho.n_qubits()))?;
    let after = measure.evaluate(&extended.state, &extended.parties())?;
    Ok(MeasureVerdict::new(
        measure.name(),
        before,
        after,
        threshold,
    ))
}

/// Three-party classical GHZ, one `|0>` ancilla held by party 0, CNOT from
/// party 0's qubit onto it, ancilla handed to a fourth party.
pub fn ghz_cnot_extension() -> Extension {
    Extension::identity()
        .with_ancilla(Ancilla::zero(0))
        .with_operation(LocalOperation {
            party: 0,
            qubits: vec![0, 3],
            unitary: cnot(),
        })
}

/// The refuting run for the covariance measure.
#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub verdict: MeasureVerdict,
    pub witness: String,
    pub narrative: Vec<String>,
}

pub fn covariance_counterexample(threshold: f64) -> Result<Counterexample> {
    let rho = ghz_classical(3)?;
    let ext = ghz_cnot_extension();
    let extended = extend_state(&rho, &ext)?;
    let measure = MaxAbsPauliCovariance;
    let before = pauli_scan(&rho, SCAN_TOL)?;
    let after = pauli_scan(&extended.state, SCAN_TOL)?;
    let verdict = MeasureVerdict::new(measure.name(), before.max_abs, after.max_abs, threshold);
    let witness = after
        .argmax
        .pauli_string()
        .unwrap_or_else(|| after.argmax.to_string());
    let narrative = vec![
        format!(
            "start: ghz_classical(3), max |Cov| over Pauli strings = {}",
            before.max_abs
        ),
        "party 0 attaches an ancilla in |0> and applies CNOT (its qubit controls the ancilla)"
            .into(),
        "the ancilla is given to new party 3; the result is ghz_classical(4)".into(),
        format!("end: max |Cov| = {} at {}", after.max_abs, witness),
        if verdict.postulate_violated {
            "local operations on a state without covariance created covariance: the postulate fails"
                .into()
        } else {
            "no violation observed at this threshold".into()
        },
    ];
    Ok(Counterexample {
        verdict,
        witness,
        narrative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{random_product_classical, random_state};

    #[test]
    fn ghz_cnot_gives_four_party_ghz() {
        let out = extend_state(&ghz_classical(3).unwrap(), &ghz_cnot_extension()).unwrap();
        assert_eq!(out.n_parties(), 4);
        assert!(out.state.max_abs_diff(&ghz_classical(4).unwrap()) < 1e-12);
        assert_eq!(
            out.origins[3],
            PartyOrigin::Ancilla {
                index: 0,
                attached_to: 0
            }
        );
    }

    #[test]
    fn identity_extension_is_a_noop() {
        let rho = random_state(3, 5).unwrap();
        let out = extend_state(&rho, &Extension::identity()).unwrap();
        assert!(out.state.max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn tracing_out_ancillas_recovers_input() {
        let rho = random_state(2, 8).unwrap();
        let ext = Extension::identity()
            .with_ancilla(Ancilla::zero(1))
            .with_ancilla(Ancilla::zero(0))
            .with_redistribution(vec![3, 2]);
        let out = extend_state(&rho, &ext).unwrap();
        assert_eq!(out.original_qubits().as_slice(), &[0, 1]);
        let back = out.state.partial_trace(&out.original_qubits()).unwrap();
        assert!(back.max_abs_diff(&rho) < 1e-12);
    }

    #[test]
    fn redistribution_places_ancilla() {
        // Ancilla in |1> sent to party 2 of a 2+2 register.
        let one = Ancilla {
            state: Matrix2::new(0.0.into(), 0.0.into(), 0.0.into(), 1.0.into()),
            owner: 0,
        };
        let ext = Extension::identity()
            .with_ancilla(one)
            .with_ancilla(Ancilla::zero(1))
            .with_redistribution(vec![2, 3]);
        let out = extend_state(&DensityMatrix::basis_state(&[0, 0]).unwrap(), &ext).unwrap();
        assert!(
            out.state
                .max_abs_diff(&DensityMatrix::basis_state(&[0, 0, 1, 0]).unwrap())
                < 1e-15
        );
        let swapped = ext.clone().with_redistribution(vec![3, 2]);
        let out = extend_state(&DensityMatrix::basis_state(&[0, 0]).unwrap(), &swapped).unwrap();
        assert!(
            out.state
                .max_abs_diff(&DensityMatrix::basis_state(&[0, 0, 0, 1]).unwrap())
                < 1e-15
        );
    }

    #[test]
    fn nonlocal_operations_are_rejected() {
        let rho = ghz_classical(3).unwrap();
        let across_parties = Extension::identity()
            .with_ancilla(Ancilla::zero(0))
            .with_operation(LocalOperation {
                party: 0,
                qubits: vec![1, 3],
                unitary: cnot(),
            });
        assert!(matches!(
            extend_state(&rho, &across_parties),
            Err(Error::Locality(_))
        ));
        let foreign_ancilla = Extension::identity()
            .with_ancilla(Ancilla::zero(2))
            .with_operation(LocalOperation {
                party: 0,
                qubits: vec![0, 3],
                unitary: cnot(),
            });
        assert!(matches!(
            extend_state(&rho, &foreign_ancilla),
            Err(Error::Locality(_))
        ));
    }

    #[test]
    fn malformed_extensions_are_rejected() {
        let rho = ghz_classical(3).unwrap();
        let bad_owner = Extension::identity().with_ancilla(Ancilla::zero(3));
        assert!(matches!(
            extend_state(&rho, &bad_owner),
            Err(Error::InvalidExtension(_))
        ));
        let dup = Extension::identity()
            .with_ancilla(Ancilla::zero(0))
            .with_ancilla(Ancilla::zero(1))
            .with_redistribution(vec![3, 3]);
        assert!(matches!(
            extend_state(&rho, &dup),
            Err(Error::InvalidExtension(_))
        ));
        let onto_original = Extension::identity()
            .with_ancilla(Ancilla::zero(0))
            .with_redistribution(vec![1]);
        assert!(matches!(
            extend_state(&rho, &onto_original),
            Err(Error::InvalidExtension(_))
        ));
    }

    #[test]
    fn covariance_fails_the_postulate() {
        let v = check_postulate(
            &MaxAbsPauliCovariance,
            &ghz_classical(3).unwrap(),
            &ghz_cnot_extension(),
            DEFAULT_THRESHOLD,
        )
        .unwrap();
        assert!(v.value_before.abs() < 1e-15);
        assert!((v.value_after - 1.0).abs() < 1e-15);
        assert!(v.postulate_violated);
    }

    #[test]
    fn min_cut_mi_precondition_does_not_fire() {
        let v = check_postulate(
            &MinCutMutualInformation,
            &ghz_classical(3).unwrap(),
            &ghz_cnot_extension(),
            DEFAULT_THRESHOLD,
        )
        .unwrap();
        assert!((v.value_before - 1.0).abs() < 1e-9);
        assert!(!v.postulate_violated);
    }

    #[test]
    fn product_input_with_product_ancilla() {
        let rho = random_product_classical(3, 4).unwrap();
        let ext = Extension::identity().with_ancilla(Ancilla::zero(1));
        for m in [
            &MaxAbsPauliCovariance as &dyn CorrelationMeasure,
            &MinCutMutualInformation,
        ] {
            let v = check_postulate(m, &rho, &ext, DEFAULT_THRESHOLD).unwrap();
            assert!(
                v.value_before < 1e-9 && v.value_after < 1e-9,
                "{}",
                m.name()
            );
            assert!(!v.postulate_violated);
        }
    }

    #[test]
    fn counterexample_is_threshold_robust() {
        for thr in [1e-12, 1e-10, 1e-6, 0.5] {
            let c = covariance_counterexample(thr).unwrap();
            assert_eq!(c.verdict.value_before, 0.0);
            assert_eq!(c.verdict.value_after, 1.0);
            assert!(c.verdict.postulate_violated);
            assert_eq!(c.witness, "zzzz");
        }
    }

    #[test]
    fn min_cut_mi_over_grouped_parties() {
        let rho = ghz_classical(4).unwrap();
        let parties = vec![
            QubitSet::new(vec![0, 1]).unwrap(),
            QubitSet::new(vec![2, 3]).unwrap(),
        ];
        let v = MinCutMutualInformation.evaluate(&rho, &parties).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
        assert!(MaxAbsPauliCovariance.evaluate(&rho, &parties).is_err());
        assert!(MinCutMutualInformation
            .evaluate(&rho, &parties[..1])
            .is_err());
    }
}
