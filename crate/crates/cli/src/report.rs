//! The report document every command emits, and its JSON/CSV renderings.

use std::fmt;

use multicorr_core::states::StateSpec;
use serde::Serialize;

/// Bumped whenever `report.schema.json` changes shape.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "multicorr";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rounds to 12 significant digits so renderings carry no round-off noise
/// below that precision. Negative zero becomes zero.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let r: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn sig12_opt(x: Option<f64>) -> Option<f64> {
    x.map(sig12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// One checked claim: what was expected, what was seen.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub verified: bool,
}

impl Claim {
    pub fn new(
        name: impl Into<String>,
        expected: impl fmt::Display,
        observed: impl fmt::Display,
        verified: bool,
    ) -> Self {
        Self {
            name: name.into(),
            expected: expected.to_string(),
            observed: observed.to_string(),
            verified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceSummary {
    pub mode: String,
    pub max_abs: f64,
    pub argmax: String,
    pub value_at_argmax: f64,
    pub evaluated_count: usize,
    pub tol: f64,
    pub all_below_tol: bool,
    pub converged: bool,
    pub restarts: Option<usize>,
    pub expected_vanishing: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutRow {
    pub cut: String,
    pub size_a: usize,
    pub mutual_information: f64,
    pub closed_form_mi: Option<f64>,
    pub abs_delta: Option<f64>,
    pub is_product: bool,
    pub product_defect: f64,
    pub ppt_min_eigenvalue: Option<f64>,
    pub hv_value: Option<f64>,
    pub hv_computational: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenuineSummary {
    pub genuine: bool,
    pub separating_cut: Option<String>,
    pub cut_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictRow {
    pub measure: String,
    pub value_before: f64,
    pub value_after: f64,
    pub threshold: f64,
    pub postulate_violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostulateSection {
    pub witness: String,
    pub narrative: Vec<String>,
    pub verdicts: Vec<VerdictRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaRow {
    pub trial: usize,
    pub kind: String,
    pub cut: String,
    pub factorization_defect: f64,
    pub product_defect: f64,
    pub factorizes: bool,
    pub is_product: bool,
    pub agree: bool,
    pub reconstruction_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSummary {
    pub trials: usize,
    pub agreeing_trials: usize,
    pub max_reconstruction_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRow {
    pub i: usize,
    pub j: usize,
    pub mutual_information: f64,
    pub closed_form_mi: Option<f64>,
    pub abs_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Everything one invocation produced. Sections not relevant to the command are
/// omitted from the JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    pub dephased: bool,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cuts: Option<Vec<CutRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub genuine: Option<GenuineSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub postulate: Option<PostulateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma: Option<Vec<LemmaRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma_summary: Option<LemmaSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairwise: Option<Vec<PairRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckRow>>,
    pub claims: Vec<Claim>,
    pub verified: bool,
}

impl ReportDocument {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command,
            state: None,
            dephased: false,
            seed: None,
            covariance: None,
            cuts: None,
            genuine: None,
            postulate: None,
            lemma: None,
            lemma_summary: None,
            pairwise: None,
            checks: None,
            claims: Vec::new(),
            verified: true,
        }
    }

    pub fn claim(&mut self, claim: Claim) {
        self.verified &= claim.verified;
        self.claims.push(claim);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The command's main table as CSV, followed by the claims table.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(c) = &self.covariance {
            out += &csv_table(std::slice::from_ref(c));
        }
        if let Some(rows) = &self.cuts {
            out += &csv_table(rows);
        }
        if let Some(p) = &self.postulate {
            out += &csv_table(&p.verdicts);
        }
        if let Some(rows) = &self.lemma {
            out += &csv_table(rows);
        }
        if let Some(rows) = &self.pairwise {
            out += &csv_table(rows);
        }
        if let Some(rows) = &self.checks {
            out += &csv_table(rows);
        }
        if !out.is_empty() {
            out.push('\n');
        }
        out += &csv_table(&self.claims);
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

fn csv_table<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("flat row serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(0.029049405545331425), 0.0290494055453);
        assert_eq!(sig12(1.0000000000000002), 1.0);
        assert_eq!(sig12(-0.0), 0.0);
        assert_eq!(sig12(2.9219280948873623).to_string(), "2.92192809489");
        assert_eq!(sig12(1.5e-17), 1.5e-17);
    }

    #[test]
    fn claims_drive_verification() {
        let mut doc = ReportDocument::new(vec!["x".into()]);
        doc.claim(Claim::new("a", 1, 1, true));
        assert!(doc.verified);
        doc.claim(Claim::new("b", 1, 2, false));
        assert!(!doc.verified);
    }

    #[test]
    fn csv_has_header_per_table() {
        let mut doc = ReportDocument::new(vec![]);
        doc.pairwise = Some(vec![PairRow {
            i: 0,
            j: 1,
            mutual_information: 1.0,
            closed_form_mi: None,
            abs_delta: None,
        }]);
        doc.claim(Claim::new("c", "x", "x", true));
        let csv = doc.to_csv();
        assert_eq!(
            csv,
            "i,j,mutual_information,closed_form_mi,abs_delta\n0,1,1.0,,\n\nname,expected,observed,verified\nc,x,x,true\n"
        );
    }
}
