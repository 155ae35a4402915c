//! The reproduction checklist: every headline number of the analysis, checked
//! against its expected value with a pinned tolerance.

use multicorr_core::correlations::{
    closed_form_entropy, closed_form_mi, closed_form_pairwise_mi, enumerate_cuts,
    mutual_information, pairwise_mutual_information, ppt_min_eigenvalue, Cut,
};
use multicorr_core::covariance::{optimize_covariance, pauli_scan, DEFAULT_RESTARTS};
use multicorr_core::measurement::{hv_classical_correlation, optimize_hv, ProductMeasurement};
use multicorr_core::postulate::{covariance_counterexample, DEFAULT_THRESHOLD};
use multicorr_core::states::*;
use multicorr_core::{binary_entropy, DensityMatrix, Error, QubitSet};

use crate::commands::{self, CovarianceMode, IC_RECONSTRUCTION_TOL};
use crate::properties;
use crate::report::CheckRow;

/// Outcome of one check: pass flag and a one-line detail.
type Outcome = Result<(bool, String), Error>;

const ODD_SIZES: [usize; 3] = [3, 5, 7];

/// A check takes the property-suite trial count and a seed.
type CheckFn = fn(usize, u64) -> Outcome;

pub const CHECKS: [(&str, CheckFn); 12] = [
    ("covariance of classical GHZ states", |_, _| {
        ghz_covariance()
    }),
    ("kaszlikowski covariance vanishes", |_, seed| {
        kaszlikowski_vanishing(seed)
    }),
    ("postulate counterexample", |_, _| {
        postulate_counterexample()
    }),
    ("dephased kaszlikowski spectrum", |_, _| dephased_spectrum()),
    ("marginal entropy closed form", |_, _| marginal_entropies()),
    ("cut mutual information closed form", |_, _| {
        cut_mutual_information()
    }),
    ("pairwise mutual information closed form", |_, _| {
        pairwise_mi()
    }),
    ("observation states", |_, _| observation_states()),
    ("Henderson-Vedral values", |_, seed| henderson_vedral(seed)),
    ("lemma equivalence", |_, seed| lemma(seed)),
    ("partial-transpose entanglement witness", |_, _| {
        ppt_witness()
    }),
    ("property suite", property_suite),
];

/// Runs every check; `trials` sets the property-suite size.
pub fn run_all(trials: usize, seed: u64) -> Vec<CheckRow> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, &(name, f))| {
            let (passed, detail) =
                f(trials, seed).unwrap_or_else(|e| (false, format!("error: {e}")));
            CheckRow {
                id: i + 1,
                name: name.into(),
                passed,
                detail,
            }
        })
        .collect()
}

fn ghz_covariance() -> Outcome {
    let three = pauli_scan(&ghz_classical(3)?, 1e-10)?;
    let four = pauli_scan(&ghz_classical(4)?, 1e-10)?;
    let argmax = four.argmax.to_string();
    let ok = three.max_abs < 1e-10 && (four.max_abs - 1.0).abs() < 1e-12 && argmax == "zzzz";
    Ok((
        ok,
        format!(
            "n=3 max {:e}; n=4 max {} at {argmax}",
            three.max_abs, four.max_abs
        ),
    ))
}

fn kaszlikowski_vanishing(seed: u64) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in ODD_SIZES {
        let rho = kaszlikowski(n)?;
        let scan = pauli_scan(&rho, 1e-10)?;
        let opt = optimize_covariance(&rho, DEFAULT_RESTARTS, seed)?;
        ok &= scan.all_below_tol && opt.max_abs < 1e-7;
        parts.push(format!(
            "n={n}: scan {:.1e}, optimizer {:.1e}",
            scan.max_abs, opt.max_abs
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn postulate_counterexample() -> Outcome {
    let c = covariance_counterexample(DEFAULT_THRESHOLD)?;
    let v = &c.verdict;
    let ok = v.value_before == 0.0
        && v.value_after == 1.0
        && v.postulate_violated
        && c.witness == "zzzz";
    Ok((
        ok,
        format!(
            "before {}, after {} at {}, violated {}",
            v.value_before, v.value_after, c.witness, v.postulate_violated
        ),
    ))
}

fn dephased_spectrum() -> Outcome {
    let mut worst = 0.0f64;
    for n in ODD_SIZES {
        let s = dephased_kaszlikowski(n)?.entropy()?;
        worst = worst.max((s - (2.0 * n as f64).log2()).abs());
    }
    Ok((worst < 1e-9, format!("max |S - log2(2n)| = {worst:.1e}")))
}

fn marginal_entropies() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in [5, 7] {
        let rho = dephased_kaszlikowski(n)?;
        for mask in 1..1usize << n {
            let keep = QubitSet::from_mask(mask, n);
            let s = rho.partial_trace(&keep)?.entropy()?;
            worst = worst.max((s - closed_form_entropy(n, keep.len())?).abs());
            count += 1;
        }
    }
    // The k = 1 and k = 2 cases in decimal.
    let special = (closed_form_entropy(5, 1)? - 1.0).abs() < 1e-12
        && (closed_form_entropy(5, 2)? - 1.970_950_594_454_668_6).abs() < 1e-12;
    Ok((
        worst < 1e-9 && special,
        format!(
            "{count} marginals, max |S - closed form| = {worst:.1e}; k=1,2 spot values {special}"
        ),
    ))
}

fn cut_mutual_information() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in ODD_SIZES {
        let rho = dephased_kaszlikowski(n)?;
        for cut in enumerate_cuts(n)? {
            let mi = mutual_information(&rho, &cut)?;
            worst = worst.max((mi - closed_form_mi(n, cut.a().len())?).abs());
            count += 1;
        }
    }
    let spot = |n: usize, k: usize| -> Result<f64, Error> {
        let a = QubitSet::new((0..k).collect())?;
        mutual_information(&dephased_kaszlikowski(n)?, &Cut::new(a, n)?)
    };
    let spots = [
        (spot(3, 1)?, 1.0 / 3.0),
        (spot(5, 1)?, 1.0),
        (spot(5, 2)?, 1.570_950_594_454_668_4),
        (spot(7, 3)?, 1.985_228_136_034_251_6),
    ];
    let spots_ok = spots.iter().all(|(v, e)| (v - e).abs() < 1e-9);
    Ok((
        worst < 1e-9 && spots_ok,
        format!("{count} cuts, max |MI - closed form| = {worst:.1e}; spot values {spots_ok}"),
    ))
}

fn pairwise_mi() -> Outcome {
    let mut worst = 0.0f64;
    for n in ODD_SIZES {
        let rho = dephased_kaszlikowski(n)?;
        let expected = 1.0 - binary_entropy(2.0 / n as f64)?;
        debug_assert_eq!(expected, closed_form_pairwise_mi(n)?);
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((pairwise_mutual_information(&rho, i, j)? - expected).abs());
            }
        }
    }
    let n5 = (closed_form_pairwise_mi(5)? - 0.029_049_405_545_331_42).abs() < 1e-12;
    Ok((
        worst < 1e-9 && n5,
        format!("max |MI - (1 - H(2/n))| = {worst:.1e}; n=5 value {n5}"),
    ))
}

fn observation_states() -> Outcome {
    let mut ok = true;
    let mut worst_product = 0.0f64;
    for n in [3, 4, 5] {
        let ghz = ghz_classical(n)?;
        for i in 0..n {
            for j in i + 1..n {
                ok &= (pairwise_mutual_information(&ghz, i, j)? - 1.0).abs() < 1e-9;
            }
        }
        let parity = parity_even_classical(n)?;
        for cut in enumerate_cuts(n)? {
            ok &= (mutual_information(&parity, &cut)? - 1.0).abs() < 1e-9;
        }
        for dropped in 0..n {
            let keep = QubitSet::single(dropped).complement(n);
            let marginal = parity.partial_trace(&keep)?;
            let product = multicorr_core::correlations::product_of_marginals(&marginal)?;
            worst_product = worst_product.max(marginal.max_abs_diff(&product));
        }
    }
    ok &= worst_product < 1e-9;
    Ok((
        ok,
        format!("GHZ pairs and parity cuts at MI 1; (n-1)-marginals off full product by {worst_product:.1e}"),
    ))
}

fn henderson_vedral(seed: u64) -> Outcome {
    let rho = dephased_kaszlikowski(3)?;
    let cut = Cut::new(QubitSet::single(0), 3)?;
    let hv = hv_classical_correlation(&rho, &cut, &ProductMeasurement::computational(2))?;
    let mi = mutual_information(&rho, &cut)?;
    let opt = optimize_hv(&rho, &cut, DEFAULT_RESTARTS, seed)?;

    let s = 1.0 / 2f64.sqrt();
    let bell = DensityMatrix::pure(2, &[s.into(), 0.0.into(), 0.0.into(), s.into()])?;
    let bell_cut = Cut::new(QubitSet::single(0), 2)?;
    let bell_hv = optimize_hv(&bell, &bell_cut, 4, seed)?.value;

    let product = random_product_quantum(3, seed)?;
    let product_hv = optimize_hv(&product, &cut, 4, seed)?.value;

    let ok = (hv - 1.0 / 3.0).abs() < 1e-9
        && (hv - mi).abs() < 1e-9
        && opt.value <= hv + 1e-6
        && opt.value >= hv - 1e-12
        && (bell_hv - 1.0).abs() < 1e-9
        && product_hv.abs() < 1e-9;
    Ok((
        ok,
        format!(
            "computational {hv:.12}, MI {mi:.12}, optimized {:.12}; Bell {bell_hv:.12}; product {product_hv:.1e}",
            opt.value
        ),
    ))
}

fn lemma(seed: u64) -> Outcome {
    let out = commands::run_lemma(3, 20, seed)?;
    let s = &out.summary;
    let kinds_balanced = out
        .rows
        .iter()
        .filter(|r| r.kind == "product_across_cut")
        .count()
        == 10 * 3;
    Ok((
        s.agreeing_trials == 20
            && s.max_reconstruction_error < IC_RECONSTRUCTION_TOL
            && kinds_balanced,
        format!(
            "{}/20 trials agree; reconstruction error {:.1e}",
            s.agreeing_trials, s.max_reconstruction_error
        ),
    ))
}

fn ppt_witness() -> Outcome {
    let rho = kaszlikowski(3)?;
    let values = enumerate_cuts(3)?
        .iter()
        .map(|c| ppt_min_eigenvalue(&rho, c))
        .collect::<Result<Vec<_>, _>>()?;
    let worst = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((
        values.iter().all(|&v| v < -1e-9),
        format!("largest PT minimum eigenvalue over cuts {worst:.6}"),
    ))
}

fn property_suite(trials: usize, seed: u64) -> Outcome {
    let mut results = properties::run_all(trials, seed);
    let determinism = report_determinism(seed);
    let failures: Vec<String> = results
        .drain(..)
        .filter_map(|r| r.failure.map(|f| format!("{}/{}: {f}", r.module, r.name)))
        .chain(determinism.err())
        .collect();
    let total = properties::run_count() + 1;
    if failures.is_empty() {
        Ok((
            true,
            format!("{total} properties, {trials} trials each where randomized"),
        ))
    } else {
        Ok((false, failures.join("; ")))
    }
}

/// Reports built twice from the same arguments render to identical bytes.
fn report_determinism(seed: u64) -> Result<(), String> {
    let spec = StateSpec::new(Family::Kaszlikowski, 3);
    let render = || -> Result<String, Error> {
        let a = commands::cmd_covariance(
            vec![],
            &spec,
            false,
            CovarianceMode::Optimize,
            None,
            4,
            seed,
        )?;
        let b = commands::cmd_cuts(vec![], &spec, true, true, 2, true, seed)?;
        let c = commands::cmd_lemma(vec![], 2, 4, seed)?;
        Ok(a.to_json() + &b.to_json() + &c.to_json() + &c.to_csv())
    };
    let first = render().map_err(|e| format!("cli/determinism: {e}"))?;
    let second = render().map_err(|e| format!("cli/determinism: {e}"))?;
    if first == second {
        Ok(())
    } else {
        Err("cli/determinism: reports differ between identical runs".into())
    }
}
