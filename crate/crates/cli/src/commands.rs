//! One function per subcommand. Each builds a [`ReportDocument`] and records the
//! claims it checked; the binary turns an unverified document into exit code 3.

use multicorr_core::correlations::{
    analyze_cuts, closed_form_mi, closed_form_pairwise_mi, enumerate_cuts, is_product,
    pairwise_mutual_information, product_defect, verdict_from_reports, AnalysisOptions,
    PRODUCT_TOL,
};
use multicorr_core::covariance::{optimize_covariance, pauli_scan, OPTIMIZER_TOL, SCAN_TOL};
use multicorr_core::measurement::{
    distribution_factorizes, factorization_defect, ic_povm_measurement, measure, optimize_hv,
    reconstruct_from_ic,
};
use multicorr_core::postulate::{
    check_postulate, covariance_counterexample, ghz_cnot_extension, MinCutMutualInformation,
    DEFAULT_THRESHOLD,
};
use multicorr_core::states::{
    ghz_classical, random_product_across_with, random_state_with, seeded_rng, Family, StateSpec,
};
use multicorr_core::{DensityMatrix, Error, Result};
use rand::Rng;
use rayon::prelude::*;

use crate::checks;
use crate::report::*;

/// Largest register for which `cuts --hv` runs the measurement optimizer.
pub const MAX_HV_QUBITS: usize = 9;
/// Largest register for `lemma`: the IC outcome table has `6^n` entries.
pub const MAX_LEMMA_QUBITS: usize = 4;
/// Tolerance for comparisons against closed forms.
pub const CLOSED_FORM_TOL: f64 = 1e-9;
/// Slack allowed when an optimizer result is compared with a bound it should not beat.
pub const OPTIMIZER_SLACK: f64 = 1e-6;
pub const IC_RECONSTRUCTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum CovarianceMode {
    #[default]
    Pauli,
    Optimize,
}

impl CovarianceMode {
    fn name(self) -> &'static str {
        match self {
            CovarianceMode::Pauli => "pauli",
            CovarianceMode::Optimize => "optimize",
        }
    }
}

pub fn build_state(spec: &StateSpec, dephase: bool) -> Result<DensityMatrix> {
    let rho = spec.build()?;
    Ok(if dephase { rho.dephase_all() } else { rho })
}

/// Whether every n-party covariance of the family is expected to vanish.
pub fn expected_vanishing(family: Family, n: usize) -> Option<bool> {
    match family {
        Family::Kaszlikowski | Family::DephasedKaszlikowski => Some(true),
        Family::GhzClassical => Some(n % 2 == 1),
        Family::ParityEven => Some(false),
        _ => None,
    }
}

fn kaszlikowski_dephased(spec: &StateSpec, dephase: bool) -> bool {
    spec.family == Family::DephasedKaszlikowski || (spec.family == Family::Kaszlikowski && dephase)
}

/// Closed-form MI across a cut with `size_a` qubits on one side, where known.
pub fn closed_form_cut_mi(spec: &StateSpec, dephase: bool, size_a: usize) -> Option<f64> {
    match spec.family {
        _ if kaszlikowski_dephased(spec, dephase) => closed_form_mi(spec.n, size_a).ok(),
        Family::GhzClassical | Family::ParityEven => Some(1.0),
        Family::RandomProduct | Family::RandomProductQuantum => Some(0.0),
        _ => None,
    }
}

/// Closed-form MI of every two-qubit marginal, where known.
pub fn closed_form_pair_mi(spec: &StateSpec, dephase: bool) -> Option<f64> {
    match spec.family {
        _ if kaszlikowski_dephased(spec, dephase) => closed_form_pairwise_mi(spec.n).ok(),
        Family::GhzClassical => Some(1.0),
        Family::ParityEven => Some(if spec.n == 2 { 1.0 } else { 0.0 }),
        Family::RandomProduct | Family::RandomProductQuantum => Some(0.0),
        _ => None,
    }
}

fn expected_genuine(family: Family) -> Option<bool> {
    match family {
        Family::GhzClassical
        | Family::ParityEven
        | Family::Kaszlikowski
        | Family::DephasedKaszlikowski => Some(true),
        Family::RandomProduct | Family::RandomProductQuantum => Some(false),
        _ => None,
    }
}

fn state_doc(
    command: Vec<String>,
    spec: &StateSpec,
    dephase: bool,
    seed: Option<u64>,
) -> ReportDocument {
    let mut doc = ReportDocument::new(command);
    doc.state = Some(spec.clone());
    doc.dephased = dephase;
    doc.seed = seed;
    doc
}

pub fn cmd_covariance(
    command: Vec<String>,
    spec: &StateSpec,
    dephase: bool,
    mode: CovarianceMode,
    tol: Option<f64>,
    restarts: usize,
    seed: u64,
) -> Result<ReportDocument> {
    let rho = build_state(spec, dephase)?;
    let (scan, tol, restarts) = match mode {
        CovarianceMode::Pauli => {
            let tol = tol.unwrap_or(SCAN_TOL);
            (pauli_scan(&rho, tol)?, tol, None)
        }
        CovarianceMode::Optimize => {
            let tol = tol.unwrap_or(OPTIMIZER_TOL);
            let mut res = optimize_covariance(&rho, restarts, seed)?;
            res.tol = tol;
            res.all_below_tol = res.max_abs < tol;
            (res, tol, Some(restarts))
        }
    };
    let expected = expected_vanishing(spec.family, spec.n);
    let mut doc = state_doc(command, spec, dephase, Some(seed));
    if let Some(e) = expected {
        doc.claim(Claim::new(
            "all_below_tol",
            e,
            scan.all_below_tol,
            e == scan.all_below_tol,
        ));
    }
    doc.covariance = Some(CovarianceSummary {
        mode: mode.name().into(),
        max_abs: sig12(scan.max_abs),
        argmax: scan.argmax.to_string(),
        value_at_argmax: sig12(scan.value_at_argmax),
        evaluated_count: scan.evaluated_count,
        tol,
        all_below_tol: scan.all_below_tol,
        converged: scan.converged,
        restarts,
        expected_vanishing: expected,
    });
    Ok(doc)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_cuts(
    command: Vec<String>,
    spec: &StateSpec,
    dephase: bool,
    with_hv: bool,
    hv_restarts: usize,
    with_ppt: bool,
    seed: u64,
) -> Result<ReportDocument> {
    if with_hv && spec.qubits() > MAX_HV_QUBITS {
        return Err(Error::Capacity {
            requested: spec.qubits(),
            limit: MAX_HV_QUBITS,
        });
    }
    let rho = build_state(spec, dephase)?;
    let options = AnalysisOptions {
        with_ppt,
        ..Default::default()
    };
    let mut reports = analyze_cuts(&rho, &options)?;
    let mut hv_computational = vec![None; reports.len()];
    if with_hv {
        let optima = reports
            .par_iter()
            .map(|r| optimize_hv(&rho, &r.cut, hv_restarts, seed))
            .collect::<Result<Vec<_>>>()?;
        for ((r, c), o) in reports.iter_mut().zip(&mut hv_computational).zip(optima) {
            r.hv_value = Some(o.value);
            *c = Some(o.computational_value);
        }
    }

    let mut doc = state_doc(command, spec, dephase, Some(seed));
    let mut rows = Vec::with_capacity(reports.len());
    let mut worst_delta: Option<f64> = None;
    for (r, hv_c) in reports.iter().zip(&hv_computational) {
        let size_a = r.cut.a().len();
        let closed = closed_form_cut_mi(spec, dephase, size_a);
        let delta = closed.map(|c| (r.mutual_information - c).abs());
        if let Some(d) = delta {
            worst_delta = Some(worst_delta.map_or(d, |w| w.max(d)));
        }
        rows.push(CutRow {
            cut: r.cut.to_string(),
            size_a,
            mutual_information: sig12(r.mutual_information),
            closed_form_mi: sig12_opt(closed),
            abs_delta: sig12_opt(delta),
            is_product: r.is_product,
            product_defect: sig12(r.product_defect),
            ppt_min_eigenvalue: sig12_opt(r.ppt_min_eigenvalue),
            hv_value: sig12_opt(r.hv_value),
            hv_computational: sig12_opt(*hv_c),
        });
    }
    if let Some(w) = worst_delta {
        doc.claim(Claim::new(
            "max |MI - closed form|",
            format!("< {CLOSED_FORM_TOL:e}"),
            sig12(w),
            w < CLOSED_FORM_TOL,
        ));
    }
    if with_ppt && spec.family == Family::Kaszlikowski && !dephase {
        let worst = reports
            .iter()
            .filter_map(|r| r.ppt_min_eigenvalue)
            .fold(f64::NEG_INFINITY, f64::max);
        doc.claim(Claim::new(
            "PPT witness negative on every cut",
            "< 0",
            sig12(worst),
            worst < -PRODUCT_TOL,
        ));
    }
    if with_hv && rho.is_diagonal() {
        let mut ok_equal = true;
        let mut ok_bound = true;
        for (r, c) in reports.iter().zip(&hv_computational) {
            let c = c.expect("hv computed");
            ok_equal &= (c - r.mutual_information).abs() < CLOSED_FORM_TOL;
            ok_bound &= r.hv_value.expect("hv computed") <= r.mutual_information + OPTIMIZER_SLACK;
        }
        doc.claim(Claim::new(
            "computational-basis HV equals MI",
            true,
            ok_equal,
            ok_equal,
        ));
        doc.claim(Claim::new(
            "optimized HV does not exceed MI",
            true,
            ok_bound,
            ok_bound,
        ));
    }

    let verdict = verdict_from_reports(reports);
    if let Some(e) = expected_genuine(spec.family) {
        doc.claim(Claim::new(
            "genuine classical correlations",
            e,
            verdict.genuine,
            e == verdict.genuine,
        ));
    }
    doc.genuine = Some(GenuineSummary {
        genuine: verdict.genuine,
        separating_cut: verdict.separating_cut.map(|c| c.to_string()),
        cut_count: rows.len(),
    });
    doc.cuts = Some(rows);
    Ok(doc)
}

pub fn cmd_pairwise(
    command: Vec<String>,
    spec: &StateSpec,
    dephase: bool,
) -> Result<ReportDocument> {
    let rho = build_state(spec, dephase)?;
    let n = rho.n_qubits();
    let closed = closed_form_pair_mi(spec, dephase);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| pairwise_mutual_information(&rho, i, j))
        .collect::<Result<Vec<_>>>()?;
    let mut doc = state_doc(command, spec, dephase, spec.seed);
    let mut worst = 0.0f64;
    let rows = pairs
        .iter()
        .zip(values)
        .map(|(&(i, j), mi)| {
            let delta = closed.map(|c| (mi - c).abs());
            worst = worst.max(delta.unwrap_or(0.0));
            PairRow {
                i,
                j,
                mutual_information: sig12(mi),
                closed_form_mi: sig12_opt(closed),
                abs_delta: sig12_opt(delta),
            }
        })
        .collect();
    if closed.is_some() && !pairs.is_empty() {
        doc.claim(Claim::new(
            "max |pairwise MI - closed form|",
            format!("< {CLOSED_FORM_TOL:e}"),
            sig12(worst),
            worst < CLOSED_FORM_TOL,
        ));
    }
    doc.pairwise = Some(rows);
    Ok(doc)
}

fn verdict_row(v: &multicorr_core::postulate::MeasureVerdict) -> VerdictRow {
    VerdictRow {
        measure: v.measure.clone(),
        value_before: sig12(v.value_before),
        value_after: sig12(v.value_after),
        threshold: v.threshold,
        postulate_violated: v.postulate_violated,
    }
}

pub fn cmd_postulate(command: Vec<String>, threshold: Option<f64>) -> Result<ReportDocument> {
    let threshold = threshold.unwrap_or(DEFAULT_THRESHOLD);
    let ce = covariance_counterexample(threshold)?;
    let mi = check_postulate(
        &MinCutMutualInformation,
        &ghz_classical(3)?,
        &ghz_cnot_extension(),
        threshold,
    )?;
    let mut doc = ReportDocument::new(command);
    doc.state = Some(StateSpec::new(Family::GhzClassical, 3));
    let v = &ce.verdict;
    doc.claim(Claim::new(
        "covariance (before, after)",
        "(0, 1)",
        format!("({}, {})", sig12(v.value_before), sig12(v.value_after)),
        v.value_before == 0.0 && v.value_after == 1.0,
    ));
    doc.claim(Claim::new(
        "covariance violates the postulate",
        true,
        v.postulate_violated,
        v.postulate_violated,
    ));
    doc.claim(Claim::new(
        "min-cut MI violates the postulate",
        false,
        mi.postulate_violated,
        !mi.postulate_violated,
    ));
    doc.postulate = Some(PostulateSection {
        witness: ce.witness.clone(),
        narrative: ce.narrative.clone(),
        verdicts: vec![verdict_row(&ce.verdict), verdict_row(&mi)],
    });
    Ok(doc)
}

/// Kind of state used in one lemma trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaKind {
    ProductAcrossCut,
    Correlated,
}

impl LemmaKind {
    pub fn name(self) -> &'static str {
        match self {
            LemmaKind::ProductAcrossCut => "product_across_cut",
            LemmaKind::Correlated => "correlated",
        }
    }
}

/// Even trials are products across a random cut, odd trials Ginibre-random states.
pub fn lemma_trial_state<R: Rng + ?Sized>(
    n: usize,
    trial: usize,
    rng: &mut R,
) -> Result<(LemmaKind, DensityMatrix)> {
    if trial.is_multiple_of(2) {
        let cuts = enumerate_cuts(n)?;
        let cut = &cuts[rng.random_range(0..cuts.len())];
        Ok((
            LemmaKind::ProductAcrossCut,
            random_product_across_with(n, cut.a(), rng)?,
        ))
    } else {
        Ok((LemmaKind::Correlated, random_state_with(n, rng)?))
    }
}

pub struct LemmaOutcome {
    pub rows: Vec<LemmaRow>,
    pub summary: LemmaSummary,
}

/// Compares IC-POVM factorization with the product test on every cut of
/// `trials` seeded states, and checks the IC reconstruction.
pub fn run_lemma(n: usize, trials: usize, seed: u64) -> Result<LemmaOutcome> {
    if n > MAX_LEMMA_QUBITS {
        return Err(Error::Capacity {
            requested: n,
            limit: MAX_LEMMA_QUBITS,
        });
    }
    if n < 2 {
        return Err(Error::Scope("the lemma needs at least two qubits".into()));
    }
    let cuts = enumerate_cuts(n)?;
    let mut rng = seeded_rng(seed);
    let mut rows = Vec::new();
    let mut agreeing = 0;
    let mut max_err = 0.0f64;
    for t in 0..trials {
        let (kind, rho) = lemma_trial_state(n, t, &mut rng)?;
        let d = measure(&rho, &ic_povm_measurement(n))?;
        let err = reconstruct_from_ic(&d)?.max_abs_diff(&rho);
        max_err = max_err.max(err);
        let mut all_agree = true;
        for cut in &cuts {
            let factorizes = distribution_factorizes(&d, cut, PRODUCT_TOL)?;
            let product = is_product(&rho, cut, PRODUCT_TOL)?;
            all_agree &= factorizes == product;
            rows.push(LemmaRow {
                trial: t,
                kind: kind.name().into(),
                cut: cut.to_string(),
                factorization_defect: sig12(factorization_defect(&d, cut)?),
                product_defect: sig12(product_defect(&rho, cut)?),
                factorizes,
                is_product: product,
                agree: factorizes == product,
                reconstruction_error: sig12(err),
            });
        }
        agreeing += usize::from(all_agree);
    }
    Ok(LemmaOutcome {
        rows,
        summary: LemmaSummary {
            trials,
            agreeing_trials: agreeing,
            max_reconstruction_error: sig12(max_err),
        },
    })
}

pub fn cmd_lemma(
    command: Vec<String>,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<ReportDocument> {
    let outcome = run_lemma(n, trials, seed)?;
    let mut doc = ReportDocument::new(command);
    doc.seed = Some(seed);
    let s = &outcome.summary;
    doc.claim(Claim::new(
        "factorization agrees with product test",
        format!("{trials}/{trials}"),
        format!("{}/{trials}", s.agreeing_trials),
        s.agreeing_trials == trials,
    ));
    doc.claim(Claim::new(
        "IC reconstruction error",
        format!("< {IC_RECONSTRUCTION_TOL:e}"),
        s.max_reconstruction_error,
        s.max_reconstruction_error < IC_RECONSTRUCTION_TOL,
    ));
    doc.lemma = Some(outcome.rows);
    doc.lemma_summary = Some(outcome.summary);
    Ok(doc)
}

pub fn cmd_reproduce(command: Vec<String>, trials: usize, seed: u64) -> Result<ReportDocument> {
    let rows = checks::run_all(trials, seed);
    let mut doc = ReportDocument::new(command);
    doc.seed = Some(seed);
    let passed = rows.iter().filter(|r| r.passed).count();
    doc.claim(Claim::new(
        "acceptance checks passed",
        format!("{0}/{0}", rows.len()),
        format!("{passed}/{}", rows.len()),
        passed == rows.len(),
    ));
    doc.checks = Some(rows);
    Ok(doc)
}
