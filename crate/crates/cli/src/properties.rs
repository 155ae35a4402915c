//! Randomized invariants of every library module, each run for a fixed number of
//! seeded trials. Properties over a finite domain are checked exhaustively.

use std::fmt;

use multicorr_core::correlations::{
    closed_form_entropy, closed_form_mi, enumerate_cuts, genuine_classical_correlations,
    is_product, mutual_information, pairwise_mutual_information, product_of_marginals, Cut, MI_TOL,
    PRODUCT_TOL,
};
use multicorr_core::covariance::{
    covariance, optimize_covariance, pauli_scan, LocalObservable, SiteObservable,
};
use multicorr_core::measurement::{
    distribution_factorizes, hv_classical_correlation, ic_povm_measurement, measure,
    ProductMeasurement, SiteMeasurement,
};
use multicorr_core::optimize::direction;
use multicorr_core::postulate::{
    covariance_counterexample, extend_state, Ancilla, Extension, LocalOperation, DEFAULT_THRESHOLD,
};
use multicorr_core::qmat::{
    cnot, hermiticity_defect, kron_all, partial_transpose_matrix, CMatrix, EIGEN_CLAMP, TOL_HERM,
};
use multicorr_core::states::*;
use multicorr_core::{DensityMatrix, Error, Pauli, QubitSet};
use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::commands::lemma_trial_state;

pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_SEED: u64 = 20_240_917;

/// Why a property failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure(pub String);

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(format!("unexpected error: {e}"))
    }
}

type Check = Result<(), Failure>;

// Written as a negation so that NaN fails the check.
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(Failure(format!($($fmt)+)));
        }
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub module: &'static str,
    pub name: &'static str,
    pub failure: Option<Failure>,
}

type Property = fn(usize, &mut ChaCha8Rng) -> Check;

const PROPERTIES: &[(&str, &str, Property)] = &[
    ("qmat", "partial trace inverts tensor", ptrace_of_tensor),
    ("qmat", "entropy is additive", entropy_additive),
    (
        "qmat",
        "entropy is unitarily invariant",
        entropy_unitary_invariant,
    ),
    ("qmat", "dephasing is idempotent", dephase_idempotent),
    ("qmat", "partial trace keeps a valid state", ptrace_valid),
    ("qmat", "partial transpose is an involution", pt_involution),
    (
        "states",
        "constructors produce valid states",
        constructors_valid,
    ),
    (
        "states",
        "kaszlikowski sites are unbiased in z",
        kaszlikowski_unbiased,
    ),
    (
        "states",
        "parity_even has unit MI on every cut",
        parity_even_mi,
    ),
    ("states", "ghz_classical pairs have unit MI", ghz_pair_mi),
    (
        "states",
        "reduced kaszlikowski closed form",
        reduced_closed_form,
    ),
    ("covariance", "affine reduction", affine_reduction),
    ("covariance", "multilinearity", multilinearity),
    (
        "covariance",
        "product states have zero covariance",
        product_zero_covariance,
    ),
    (
        "covariance",
        "scan and optimizer agree on kaszlikowski",
        scan_optimizer_agree,
    ),
    ("covariance", "permutation symmetry", permutation_symmetry),
    ("correlations", "MI closed forms", mi_closed_forms),
    (
        "correlations",
        "marginal entropy closed forms",
        entropy_closed_forms,
    ),
    (
        "correlations",
        "MI is non-negative and symmetric",
        mi_nonnegative_symmetric,
    ),
    (
        "correlations",
        "product test matches vanishing MI",
        product_iff_zero_mi,
    ),
    (
        "correlations",
        "1:(n-1) products are fully product",
        one_vs_rest_product,
    ),
    (
        "correlations",
        "genuine verdict matches measurement route",
        genuine_matches_measurements,
    ),
    ("measurement", "Born rule normalization", born_normalization),
    (
        "measurement",
        "IC factorization matches product test",
        lemma_equivalence,
    ),
    (
        "measurement",
        "HV is invariant under local unitaries",
        hv_local_unitary,
    ),
    (
        "measurement",
        "HV equals classical MI on diagonal states",
        hv_equals_mi_diagonal,
    ),
    (
        "measurement",
        "HV is non-negative on diagonal states",
        hv_nonnegative,
    ),
    (
        "postulate",
        "extension keeps a valid state",
        extension_valid,
    ),
    (
        "postulate",
        "ancillas trace out to the input",
        extension_trace_out,
    ),
    (
        "postulate",
        "non-local operations are rejected",
        locality_rejected,
    ),
    (
        "postulate",
        "counterexample values are exact",
        counterexample_exact,
    ),
];

pub fn run_count() -> usize {
    PROPERTIES.len()
}

/// Runs every property with `trials` random cases each.
pub fn run_all(trials: usize, seed: u64) -> Vec<PropertyResult> {
    PROPERTIES
        .iter()
        .enumerate()
        .map(|(i, &(module, name, f))| {
            let mut rng =
                seeded_rng(seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
            PropertyResult {
                module,
                name,
                failure: f(trials, &mut rng).err(),
            }
        })
        .collect()
}

fn random_cut(n: usize, rng: &mut ChaCha8Rng) -> Result<Cut, Error> {
    let cuts = enumerate_cuts(n)?;
    let cut = cuts[rng.random_range(0..cuts.len())].clone();
    Ok(if rng.random() { cut.swapped() } else { cut })
}

fn random_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let cos_t: f64 = rng.random_range(-1.0..1.0);
    direction((cos_t.acos(), rng.random_range(0.0..std::f64::consts::TAU)))
}

fn random_directions(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    (0..n).map(|_| random_direction(rng)).collect()
}

fn to_cmatrix(u: Matrix2<Complex64>) -> CMatrix {
    kron_all(&[u])
}

/// A few layers of random single-qubit unitaries and CNOTs.
fn random_circuit(rho: &DensityMatrix, rng: &mut ChaCha8Rng) -> Result<DensityMatrix, Error> {
    let n = rho.n_qubits();
    let mut out = rho.clone();
    for _ in 0..3 {
        let layer: Vec<_> = (0..n).map(|q| (q, random_qubit_unitary(rng))).collect();
        out = out.apply_local_unitaries(&layer)?;
        if n >= 2 {
            let c = rng.random_range(0..n);
            let t = (c + rng.random_range(1..n)) % n;
            out = out.apply_unitary(&cnot(), &[c, t])?;
        }
    }
    Ok(out)
}

fn ptrace_of_tensor(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let (na, nb) = (rng.random_range(1..=2), rng.random_range(1..=2));
        let a = random_state_with(na, rng)?;
        let b = random_state_with(nb, rng)?;
        let ab = a.tensor(&b)?;
        let back = ab.partial_trace(&QubitSet::new((0..na).collect())?)?;
        let d = back.max_abs_diff(&a);
        ensure!(d < 1e-10, "Tr_B(a (x) b) differs from a by {d:e}");
        let back_b = ab.partial_trace(&QubitSet::new((na..na + nb).collect())?)?;
        let d = back_b.max_abs_diff(&b);
        ensure!(d < 1e-10, "Tr_A(a (x) b) differs from b by {d:e}");
    }
    Ok(())
}

fn entropy_additive(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let a = random_state_with(rng.random_range(1..=2), rng)?;
        let b = random_state_with(rng.random_range(1..=2), rng)?;
        let lhs = a.tensor(&b)?.entropy()?;
        let rhs = a.entropy()? + b.entropy()?;
        ensure!(
            (lhs - rhs).abs() < 1e-8,
            "S(a (x) b) = {lhs}, S(a) + S(b) = {rhs}"
        );
    }
    Ok(())
}

fn entropy_unitary_invariant(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let rho = random_state_with(rng.random_range(1..=4), rng)?;
        let rotated = random_circuit(&rho, rng)?;
        let (s0, s1) = (rho.entropy()?, rotated.entropy()?);
        ensure!((s0 - s1).abs() < 1e-8, "entropy moved from {s0} to {s1}");
    }
    Ok(())
}

fn dephase_idempotent(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let n = rng.random_range(1..=4);
        let rho = random_state_with(n, rng)?;
        let subset = QubitSet::from_mask(rng.random_range(1..1usize << n), n);
        let once = rho.dephase(&subset)?;
        let twice = once.dephase(&subset)?;
        ensure!(
            twice.max_abs_diff(&once) < 1e-12,
            "dephasing {subset} twice changed the state"
        );
        let d = rho
            .dephase_all()
            .dephase_all()
            .max_abs_diff(&rho.dephase_all());
        ensure!(d < 1e-12, "full dephasing twice changed the state by {d:e}");
    }
    Ok(())
}

fn ptrace_valid(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let n = rng.random_range(2..=5);
        let rho = random_state_with(n, rng)?;
        let keep = QubitSet::from_mask(rng.random_range(1..1usize << n), n);
        let r = rho.partial_trace(&keep)?;
        let tr = r.matrix().trace();
        ensure!(
            (tr.re - 1.0).abs() < 1e-10 && tr.im.abs() < 1e-10,
            "trace {tr}"
        );
        let h = hermiticity_defect(r.matrix());
        ensure!(h < TOL_HERM, "hermiticity defect {h:e}");
        let min = r.spectrum()?.eigenvalues().last().copied().unwrap_or(0.0);
        ensure!(min >= -EIGEN_CLAMP, "negative eigenvalue {min:e}");
    }
    Ok(())
}

fn pt_involution(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let n = rng.random_range(1..=4);
        let rho = random_state_with(n, rng)?;
        let subset = QubitSet::from_mask(rng.random_range(0..1usize << n), n);
        let once = rho.partial_transpose(&subset)?;
        let twice = partial_transpose_matrix(&once, n, &subset)?;
        let d = (twice - rho.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        ensure!(
            d == 0.0,
            "partial transpose on {subset} twice is off by {d:e}"
        );
    }
    Ok(())
}

fn constructors_valid(_trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for family in Family::ALL {
        for n in 2..=7 {
            let mut spec = StateSpec::new(family, n).with_seed(rng.random());
            if family == Family::ReducedKaszlikowski {
                spec = spec.with_k(rng.random_range(1..=n));
            }
            let rho = match spec.build() {
                Ok(r) => r,
                Err(Error::Scope(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            let q = rho.n_qubits();
            ensure!(q == spec.qubits(), "{family} n={n}: {q} qubits");
            DensityMatrix::new(q, rho.matrix().clone())
                .map_err(|e| Failure(format!("{family} n={n} is not a valid state: {e}")))?;
        }
    }
    Ok(())
}

fn kaszlikowski_unbiased(_trials: usize, _rng: &mut ChaCha8Rng) -> Check {
    for n in [3, 5, 7] {
        let rho = kaszlikowski(n)?;
        for q in 0..n {
            let z = rho.bloch_vector(q)?[2];
            ensure!(z.abs() < 1e-12, "n={n} qubit {q}: <z> = {z}");
        }
    }
    Ok(())
}

fn parity_even_mi(_trials: usize, _rng: &mut ChaCha8Rng) -> Check {
    for n in 2..=6 {
        let rho = parity_even_classical(n)?;
        for cut in enumerate_cuts(n)? {
            let mi = mutual_information(&rho, &cut)?;
            ensure!((mi - 1.0).abs() < 1e-9, "n={n} cut {cut}: MI {mi}");
        }
    }
    Ok(())
}

fn ghz_pair_mi(_trials: usize, _rng: &mut ChaCha8Rng) -> Check {
    for n in 2..=6 {
        let rho = ghz_classical(n)?;
        for i in 0..n {
            for j in i + 1..n {
                let mi = pairwise_mutual_information(&rho, i, j)?;
                ensure!((mi - 1.0).abs() < 1e-9, "n={n} pair ({i},{j}): MI {mi}");
            }
        }
    }
    Ok(())
}

fn reduced_closed_form(_trials: usize, _rng: &mut ChaCha8Rng) -> Check {
    for n in [3, 5, 7] {
        let full = dephased_kaszlikowski(n)?;
        for k in 1..=n {
            let traced = full.partial_trace(&QubitSet::new((0..k).collect())?)?;
            let d = traced.max_abs_diff(&reduced_kaszlikowski_closed_form(n, k)?);
            ensure!(d < 1e-12, "n={n} k={k}: off by {d:e}");
        }
    }
    Ok(())
}

fn affine_reduction(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let n = rng.random_range(1..=4);
        let rho = random_state_with(n, rng)?;
        let dirs = random_directions(n, rng);
        let gains: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let sites = dirs
            .iter()
            .zip(&gains)
            .map(|(&d, &b)| SiteObservable::bloch(d, b, rng.random_range(-2.0..2.0)))
            .collect::<Result<Vec<_>, _>>()?;
        let affine = covariance(&rho, &LocalObservable(sites))?;
        let unit = covariance(&rho, &LocalObservable::from_directions(&dirs)?)?;
        let expected = gains.iter().product::<f64>() * unit;
        ensure!(
            (affine - expected).abs() < 1e-10,
            "affine {affine} vs scaled {expected}"
        );
    }
    Ok(())
}

fn multilinearity(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let n = rng.random_range(1..=4);
        let rho = random_state_with(n, rng)?;
        let dirs = random_directions(n, rng);
        let base = covariance(&rho, &LocalObservable::from_directions(&dirs)?)?;
        let site = rng.random_range(0..n);
        let c = rng.random_range(-3.0..3.0);
        let mut sites: Vec<SiteObservable> = dirs
            .iter()
            .map(|&d| SiteObservable::bloch(d, 1.0, 0.0))
            .collect::<Result<_, _>>()?;
        sites[site] = SiteObservable::bloch(dirs[site], c, 0.0)?;
        let scaled = covariance(&rho, &LocalObservable(sites))?;
        ensure!(
            (scaled - c * base).abs() < 1e-10,
            "scaling site {site} by {c}: {scaled} vs {}",
            c * base
        );
    }
    Ok(())
}

fn product_zero_covariance(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for t in 0..trials {
        let n = rng.random_range(2..=5);
        let rho = if t % 2 == 0 {
            random_product_quantum_with(n, rng)?
        } else {
            random_product_classical_with(n, rng)?
        };
        let cov = covariance(
            &rho,
            &LocalObservable::from_directions(&random_directions(n, rng))?,
        )?;
        ensure!(cov.abs() < 1e-12, "n={n}: Cov = {cov:e}");
    }
    Ok(())
}

fn scan_optimizer_agree(_trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for n in [3, 5, 7] {
        let rho = kaszlikowski(n)?;
        let scan = pauli_scan(&rho, 1e-10)?;
        let opt = optimize_covariance(&rho, 8, rng.random())?;
        ensure!(scan.all_below_tol, "n={n}: scan max {}", scan.max_abs);
        ensure!(opt.max_abs < 1e-7, "n={n}: optimizer max {}", opt.max_abs);
    }
    Ok(())
}

fn permutation_symmetry(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let n = rng.random_range(3..=5);
        let family = [
            Family::GhzClassical,
            Family::ParityEven,
            Family::W,
            Family::Wbar,
            Family::Kaszlikowski,
        ][rng.random_range(0..5)];
        let n = if family == Family::Kaszlikowski {
            n | 1
        } else {
            n
        };
        let rho = StateSpec::new(family, n).build()?;
        let mut dirs = random_directions(n, rng);
        let before = covariance(&rho, &LocalObservable::from_directions(&dirs)?)?;
        dirs.shuffle(rng);
        let after = covariance(&rho, &LocalObservable::from_directions(&dirs)?)?;
        ensure!(
            (before - after).abs() < 1e-10,
            "{family}({n}): {before} vs {after}"
        );
        let mut paulis: Vec<Pauli> = (0..n).map(|_| Pauli::ALL[rng.random_range(0..3)]).collect();
        let before = covariance(&rho, &LocalObservable::from_paulis(&paulis))?;
        paulis.shuffle(rng);
        let after = covariance(&rho, &LocalObservable::from_paulis(&paulis))?;
        ensure!(
            (before - after).abs() < 1e-10,
            "{family}({n}) Pauli: {before} vs {after}"
        );
    }
    Ok(())
}

fn mi_closed_forms(_trials: usize, _rng: &mut ChaCha8Rng) -> Check {
    for n in [3, 5, 7] {
        let rho = dephased_kaszlikowski(n)?;
        for cut in enumerate_cuts(n)? {
            let mi = mutual_information(&rho, &cut)?;
            let cf = closed_form_mi(n, cut.a().len())?;
            ensure!((mi - cf).abs() < 1e-9, "n={n} cut {cut}: {mi} vs {cf}");
        }
    }
    Ok(())
}

fn entropy_closed_forms(_trials: usize, _rng: &mut ChaCha8Rng) -> Check {
    for n in [3, 5, 7] {
        let rho = dephased_kaszlikowski(n)?;
        for mask in 1..1usize << n {
            let keep = QubitSet::from_mask(mask, n);
            let s = rho.partial_trace(&keep)?.entropy()?;
            let cf = closed_form_entropy(n, keep.len())?;
            ensure!((s - cf).abs() < 1e-9, "n={n} marginal {keep}: {s} vs {cf}");
        }
    }
    Ok(())
}

fn mi_nonnegative_symmetric(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let n = rng.random_range(2..=4);
        let rho = random_state_with(n, rng)?;
        let cut = random_cut(n, rng)?;
        let ab = mutual_information(&rho, &cut)?;
        let ba = mutual_information(&rho, &cut.swapped())?;
        ensure!(ab >= -1e-9, "MI across {cut} is {ab}");
        ensure!(
            (ab - ba).abs() < 1e-9,
            "MI across {cut}: {ab} vs swapped {ba}"
        );
    }
    Ok(())
}

fn product_iff_zero_mi(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for t in 0..trials {
        let n = rng.random_range(2..=4);
        let (_, rho) = lemma_trial_state(n, t, rng)?;
        for cut in enumerate_cuts(n)? {
            let product = is_product(&rho, &cut, PRODUCT_TOL)?;
            let mi = mutual_information(&rho, &cut)?;
            ensure!(
                product == (mi < MI_TOL),
                "cut {cut}: product {product}, MI {mi:e}"
            );
        }
    }
    Ok(())
}

fn one_vs_rest_product(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    let mut fired = 0;
    for t in 0..trials {
        let n = rng.random_range(2..=5);
        let rho = if t % 2 == 0 {
            random_product_classical_with(n, rng)?
        } else {
            random_correlated_classical_with(n, rng)?
        };
        let mut all = true;
        for q in 0..n {
            all &= is_product(&rho, &Cut::new(QubitSet::single(q), n)?, PRODUCT_TOL)?;
        }
        if all {
            fired += 1;
            let d = rho.max_abs_diff(&product_of_marginals(&rho)?);
            ensure!(
                d < 1e-9,
                "n={n}: product on every 1:(n-1) cut but off the full product by {d:e}"
            );
        }
    }
    ensure!(fired > 0, "antecedent never held");
    Ok(())
}

fn ic_genuine(rho: &DensityMatrix) -> Result<bool, Error> {
    let n = rho.n_qubits();
    let d = measure(rho, &ic_povm_measurement(n))?;
    for cut in enumerate_cuts(n)? {
        if distribution_factorizes(&d, &cut, PRODUCT_TOL)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn genuine_matches_measurements(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for t in 0..trials {
        let n = rng.random_range(2..=3);
        let rho = match t % 4 {
            0 | 1 => lemma_trial_state(n, t, rng)?.1,
            2 => random_product_quantum_with(n, rng)?,
            _ => [
                ghz_classical(n)?,
                parity_even_classical(n)?,
                random_correlated_classical_with(n, rng)?,
            ][rng.random_range(0..3)]
            .clone(),
        };
        let verdict = genuine_classical_correlations(&rho, PRODUCT_TOL)?.genuine;
        let measured = ic_genuine(&rho)?;
        ensure!(
            verdict == measured,
            "trial {t}: product route {verdict}, measurement route {measured}"
        );
    }
    Ok(())
}

fn random_site_measurement(rng: &mut ChaCha8Rng) -> SiteMeasurement {
    match rng.random_range(0..3) {
        0 => SiteMeasurement::computational(),
        1 => SiteMeasurement::Projective {
            axis: random_direction(rng),
        },
        _ => SiteMeasurement::InformationallyComplete,
    }
}

fn born_normalization(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let n = rng.random_range(1..=4);
        let rho = random_state_with(n, rng)?;
        let m = ProductMeasurement((0..n).map(|_| random_site_measurement(rng)).collect());
        let d = measure(&rho, &m)?;
        let total: f64 = d.probs().iter().sum();
        ensure!(
            (total - 1.0).abs() < 1e-9,
            "outcome probabilities sum to {total}"
        );
        ensure!(
            d.probs().iter().all(|&p| p >= 0.0),
            "negative outcome probability"
        );
    }
    Ok(())
}

fn lemma_equivalence(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for t in 0..trials {
        let n = rng.random_range(2..=3);
        let (kind, rho) = lemma_trial_state(n, t, rng)?;
        let d = measure(&rho, &ic_povm_measurement(n))?;
        for cut in enumerate_cuts(n)? {
            let f = distribution_factorizes(&d, &cut, PRODUCT_TOL)?;
            let p = is_product(&rho, &cut, PRODUCT_TOL)?;
            ensure!(
                f == p,
                "trial {t} ({}) cut {cut}: factorizes {f}, product {p}",
                kind.name()
            );
        }
    }
    Ok(())
}

fn hv_local_unitary(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let n = rng.random_range(2..=3);
        let rho = random_state_with(n, rng)?;
        let cut = random_cut(n, rng)?;
        let us: Vec<_> = (0..n).map(|q| (q, random_qubit_unitary(rng))).collect();
        let rotated = rho.apply_local_unitaries(&us)?;
        let axes = random_directions(cut.b().len(), rng);
        let m = ProductMeasurement::projective(&axes);
        let m_rot = ProductMeasurement(
            cut.b()
                .iter()
                .zip(m.sites())
                .map(|(q, s)| {
                    let u = us[q].1;
                    SiteMeasurement::Povm(
                        s.elements().iter().map(|e| u * e * u.adjoint()).collect(),
                    )
                })
                .collect(),
        );
        let before = hv_classical_correlation(&rho, &cut, &m)?;
        let after = hv_classical_correlation(&rotated, &cut, &m_rot)?;
        ensure!(
            (before - after).abs() < 1e-9,
            "cut {cut}: {before} vs {after}"
        );
    }
    Ok(())
}

fn random_diagonal(n: usize, t: usize, rng: &mut ChaCha8Rng) -> Result<DensityMatrix, Error> {
    if t.is_multiple_of(3) {
        random_product_classical_with(n, rng)
    } else {
        random_correlated_classical_with(n, rng)
    }
}

fn hv_equals_mi_diagonal(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for t in 0..trials {
        let n = rng.random_range(2..=4);
        let rho = random_diagonal(n, t, rng)?;
        let cut = random_cut(n, rng)?;
        let hv = hv_classical_correlation(
            &rho,
            &cut,
            &ProductMeasurement::computational(cut.b().len()),
        )?;
        let mi = mutual_information(&rho, &cut)?;
        ensure!((hv - mi).abs() < 1e-9, "cut {cut}: HV {hv} vs MI {mi}");
    }
    Ok(())
}

fn hv_nonnegative(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for t in 0..trials {
        let n = rng.random_range(2..=4);
        let rho = random_diagonal(n, t, rng)?;
        let cut = random_cut(n, rng)?;
        let m = ProductMeasurement::projective(&random_directions(cut.b().len(), rng));
        let hv = hv_classical_correlation(&rho, &cut, &m)?;
        ensure!(hv >= -1e-9, "cut {cut}: HV {hv}");
    }
    Ok(())
}

/// Random ancillas, optional local unitaries on each owner's holdings, and a
/// random redistribution.
fn random_extension(n: usize, with_ops: bool, rng: &mut ChaCha8Rng) -> Extension {
    let k = rng.random_range(0..=2);
    let mut ext = Extension::identity();
    for _ in 0..k {
        ext = ext.with_ancilla(Ancilla {
            state: random_qubit_state(rng),
            owner: rng.random_range(0..n),
        });
    }
    if with_ops {
        for _ in 0..rng.random_range(0..=3) {
            let party = rng.random_range(0..n);
            let mut holdings: Vec<usize> = vec![party];
            holdings.extend(
                (0..k)
                    .filter(|&j| ext.ancillas()[j].owner == party)
                    .map(|j| n + j),
            );
            holdings.shuffle(rng);
            let (qubits, unitary) = if holdings.len() >= 2 && rng.random() {
                let u = kron_all(&[random_qubit_unitary(rng), random_qubit_unitary(rng)]);
                (holdings[..2].to_vec(), cnot() * u)
            } else {
                (vec![holdings[0]], to_cmatrix(random_qubit_unitary(rng)))
            };
            ext = ext.with_operation(LocalOperation {
                party,
                qubits,
                unitary,
            });
        }
    }
    let mut targets: Vec<usize> = (n..n + k).collect();
    targets.shuffle(rng);
    ext.with_redistribution(targets)
}

fn extension_valid(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let n = rng.random_range(1..=3);
        let rho = random_state_with(n, rng)?;
        let ext = random_extension(n, true, rng);
        let out = extend_state(&rho, &ext)?;
        let m = n + ext.ancilla_count();
        ensure!(
            out.state.n_qubits() == m && out.n_parties() == m,
            "wrong party count"
        );
        DensityMatrix::new(m, out.state.matrix().clone())
            .map_err(|e| Failure(format!("invalid extension output: {e}")))?;
    }
    Ok(())
}

fn extension_trace_out(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let n = rng.random_range(1..=3);
        let rho = random_state_with(n, rng)?;
        let out = extend_state(&rho, &random_extension(n, false, rng))?;
        let d = out
            .state
            .partial_trace(&out.original_qubits())?
            .max_abs_diff(&rho);
        ensure!(d < 1e-12, "tracing out the ancillas is off by {d:e}");
    }
    Ok(())
}

fn locality_rejected(trials: usize, rng: &mut ChaCha8Rng) -> Check {
    for _ in 0..trials {
        let n = rng.random_range(2..=3);
        let rho = random_state_with(n, rng)?;
        let owner = rng.random_range(0..n);
        let party = (owner + rng.random_range(1..n)) % n;
        // The acting party touches the ancilla owned by someone else, or another
        // party's original qubit.
        let foreign = if rng.random() { n } else { owner };
        let ext = Extension::identity()
            .with_ancilla(Ancilla::zero(owner))
            .with_operation(LocalOperation {
                party,
                qubits: vec![party, foreign],
                unitary: cnot(),
            });
        ensure!(
            matches!(extend_state(&rho, &ext), Err(Error::Locality(_))),
            "party {party} acting on qubit {foreign} was accepted"
        );
    }
    Ok(())
}

fn counterexample_exact(_trials: usize, _rng: &mut ChaCha8Rng) -> Check {
    for thr in [1e-12, 1e-10, DEFAULT_THRESHOLD, 1e-6, 0.5] {
        let v = covariance_counterexample(thr)?.verdict;
        ensure!(
            v.value_before == 0.0 && v.value_after == 1.0,
            "values ({}, {})",
            v.value_before,
            v.value_after
        );
        ensure!(v.postulate_violated, "not flagged at threshold {thr:e}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_properties_hold_briefly() {
        for r in run_all(10, 3) {
            assert!(
                r.failure.is_none(),
                "{}: {}: {}",
                r.module,
                r.name,
                r.failure.unwrap()
            );
        }
    }
}
