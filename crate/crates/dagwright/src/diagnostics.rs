//! The regression assumption checklist, plus the worked shear-strength
//! example used to exercise it.
//!
//! Five checks, fixed order, fixed classical cutoffs — no p-value machinery,
//! so verdicts are deterministic and testable:
//!
//! | check            | statistic                                   | cutoff            |
//! |------------------|---------------------------------------------|-------------------|
//! | linearity        | R² gain from adding squared fitted values   | 0.05              |
//! | normality        | Jarque–Bera on residuals                    | 5.99              |
//! | collinearity     | max variance inflation factor               | 10                |
//! | independence     | Durbin–Watson on residuals in row order     | outside [1.5,2.5] |
//! | homoscedasticity | Breusch–Pagan n·R² of e² on the predictors  | chi-square 95%    |
//!
//! Row order is the sequence for the independence check; callers whose rows
//! carry no meaningful order should set [`DiagnosticsOptions::unordered`],
//! which turns that verdict into `Inconclusive` instead of crying wolf.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::scm::{Dataset, RegressionFit, ScmError};

/// Chi-square 95th percentiles for 1..=10 degrees of freedom.
const CHI2_95: [f64; 10] = [
    3.841, 5.991, 7.815, 9.488, 11.070, 12.592, 14.067, 15.507, 16.919, 18.307,
];

const RESET_THRESHOLD: f64 = 0.05;
const JB_THRESHOLD: f64 = 5.99;
const VIF_THRESHOLD: f64 = 10.0;
const DW_BAND: (f64, f64) = (1.5, 2.5);

/// Residual second moments at or below `1e-20 * (1 + mean(y^2))` mean the
/// fit is exact to machine precision; the residual-based statistics then
/// take their ideal values instead of amplifying rounding noise.
const DEGENERATE_REL: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagError {
    #[error("{n} rows is too few for diagnostics; need at least {need}")]
    TooFewRows { n: usize, need: usize },
    #[error("need at least two predictors to compute VIF")]
    TooFewPredictors,
    #[error("input `{0}` must be positive")]
    NonPositiveInput(&'static str),
    #[error("fit does not belong to this dataset: {0}")]
    MismatchedFit(String),
    #[error(transparent)]
    Scm(#[from] ScmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// One line of the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub statistic: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub detail: String,
}

/// The five verdicts plus free-form notes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub checks: Vec<AssumptionCheck>,
    pub notes: String,
}

impl DiagnosticsReport {
    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::from("assumption checks:\n");
        for c in &self.checks {
            out.push_str(&format!(
                "  {:<18} statistic {:>12.6}  threshold {:>10.4}  {:?}\n",
                c.name, c.statistic, c.threshold, c.verdict
            ));
        }
        if !self.notes.is_empty() {
            out.push_str(&format!("notes: {}\n", self.notes));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DiagnosticsOptions {
    /// Rows carry no meaningful sequence; the independence check reports
    /// `Inconclusive` rather than trusting row order.
    pub unordered: bool,
}

pub fn check_assumptions(
    dataset: &Dataset,
    fit: &RegressionFit,
) -> Result<DiagnosticsReport, DiagError> {
    check_assumptions_with(dataset, fit, DiagnosticsOptions::default())
}

pub fn check_assumptions_with(
    dataset: &Dataset,
    fit: &RegressionFit,
    options: DiagnosticsOptions,
) -> Result<DiagnosticsReport, DiagError> {
    let n = dataset.n_rows();
    let p = fit.predictors.len();
    let need = p + 5;
    if n < need {
        return Err(DiagError::TooFewRows { n, need });
    }
    if fit.residuals.len() != n {
        return Err(DiagError::MismatchedFit(format!(
            "fit has {} residuals, dataset has {} rows",
            fit.residuals.len(),
            n
        )));
    }
    let y = dataset.column(&fit.response).map_err(DiagError::Scm)?;
    for pred in &fit.predictors {
        dataset.column(pred).map_err(DiagError::Scm)?;
    }

    let e = &fit.residuals;
    let mean_e = e.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = e.iter().map(|v| v - mean_e).collect();
    let m2 = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let y_scale = 1.0 + y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let degenerate = m2 <= DEGENERATE_REL * y_scale;

    let mut checks = Vec::with_capacity(5);
    let mut notes: Vec<String> = Vec::new();
    if degenerate {
        notes.push(
            "residuals are zero to machine precision; residual-based statistics \
             take their ideal values"
                .to_owned(),
        );
    }

    checks.push(linearity_check(dataset, fit, &y, degenerate)?);
    checks.push(normality_check(&centered, m2, n, degenerate));
    checks.push(collinearity_check(dataset, fit)?);
    checks.push(independence_check(e, degenerate, options.unordered, &mut notes));
    checks.push(homoscedasticity_check(dataset, fit, n, p, degenerate, &mut notes)?);

    Ok(DiagnosticsReport {
        checks,
        notes: notes.join("; "),
    })
}

/// RESET-style specification test: refit with the squared fitted values as
/// an extra regressor and measure the R² gain.
fn linearity_check(
    dataset: &Dataset,
    fit: &RegressionFit,
    y: &[f64],
    degenerate: bool,
) -> Result<AssumptionCheck, DiagError> {
    let statistic = if degenerate {
        0.0
    } else {
        let fitted: Vec<f64> = y.iter().zip(&fit.residuals).map(|(v, e)| v - e).collect();
        let mut cols: Vec<Vec<f64>> = vec![vec![1.0; y.len()]];
        for p in &fit.predictors {
            cols.push(dataset.column(p).map_err(DiagError::Scm)?);
        }
        cols.push(fitted.iter().map(|v| v * v).collect());
        match r_squared_of(&cols, y) {
            Some(r2_aug) => (r2_aug - fit.r_squared).max(0.0),
            // The squared fitted values add no direction to the design.
            None => 0.0,
        }
    };
    Ok(AssumptionCheck {
        name: "linearity",
        statistic,
        threshold: RESET_THRESHOLD,
        verdict: pass_if(statistic <= RESET_THRESHOLD),
        detail: "R-squared gain from adding squared fitted values".to_owned(),
    })
}

/// Jarque–Bera from sample skewness and kurtosis of the residuals.
fn normality_check(centered: &[f64], m2: f64, n: usize, degenerate: bool) -> AssumptionCheck {
    let statistic = if degenerate {
        0.0
    } else {
        let m3 = centered.iter().map(|v| v * v * v).sum::<f64>() / n as f64;
        let m4 = centered.iter().map(|v| v * v * v * v).sum::<f64>() / n as f64;
        let skew = m3 / m2.powf(1.5);
        let kurt = m4 / (m2 * m2);
        n as f64 / 6.0 * (skew * skew + (kurt - 3.0) * (kurt - 3.0) / 4.0)
    };
    AssumptionCheck {
        name: "normality",
        statistic,
        threshold: JB_THRESHOLD,
        verdict: pass_if(statistic <= JB_THRESHOLD),
        detail: "Jarque-Bera statistic of the residuals".to_owned(),
    }
}

fn collinearity_check(
    dataset: &Dataset,
    fit: &RegressionFit,
) -> Result<AssumptionCheck, DiagError> {
    let statistic = if fit.predictors.len() < 2 {
        // A lone predictor has nothing to be collinear with.
        1.0
    } else {
        let predictors: Vec<&str> = fit.predictors.iter().map(String::as_str).collect();
        vif(dataset, &predictors)?
            .values()
            .fold(1.0_f64, |acc, v| acc.max(*v))
    };
    Ok(AssumptionCheck {
        name: "collinearity",
        statistic,
        threshold: VIF_THRESHOLD,
        verdict: pass_if(statistic <= VIF_THRESHOLD),
        detail: "largest variance inflation factor".to_owned(),
    })
}

fn independence_check(
    e: &[f64],
    degenerate: bool,
    unordered: bool,
    notes: &mut Vec<String>,
) -> AssumptionCheck {
    let statistic = if degenerate {
        2.0
    } else {
        let num: f64 = e.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
        let den: f64 = e.iter().map(|v| v * v).sum();
        num / den
    };
    let verdict = if unordered {
        notes.push("rows flagged unordered: Durbin-Watson is not meaningful".to_owned());
        Verdict::Inconclusive
    } else {
        pass_if(statistic >= DW_BAND.0 && statistic <= DW_BAND.1)
    };
    AssumptionCheck {
        name: "independence",
        statistic,
        threshold: DW_BAND.0,
        verdict,
        detail: format!(
            "Durbin-Watson in row order; pass band [{}, {}]",
            DW_BAND.0, DW_BAND.1
        ),
    }
}

/// Breusch–Pagan LM statistic: n times the R² of the squared residuals
/// regressed on the predictors.
fn homoscedasticity_check(
    dataset: &Dataset,
    fit: &RegressionFit,
    n: usize,
    p: usize,
    degenerate: bool,
    notes: &mut Vec<String>,
) -> Result<AssumptionCheck, DiagError> {
    if p > CHI2_95.len() {
        notes.push(format!(
            "Breusch-Pagan cutoff table covers up to {} predictors, fit has {p}",
            CHI2_95.len()
        ));
        return Ok(AssumptionCheck {
            name: "homoscedasticity",
            statistic: f64::NAN,
            threshold: f64::NAN,
            verdict: Verdict::Inconclusive,
            detail: "no tabulated chi-square cutoff for this many predictors".to_owned(),
        });
    }
    let threshold = CHI2_95[p - 1];
    let statistic = if degenerate {
        0.0
    } else {
        let esq: Vec<f64> = fit.residuals.iter().map(|v| v * v).collect();
        let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
        for pred in &fit.predictors {
            cols.push(dataset.column(pred).map_err(DiagError::Scm)?);
        }
        match r_squared_of(&cols, &esq) {
            Some(r2) => n as f64 * r2,
            None => 0.0,
        }
    };
    Ok(AssumptionCheck {
        name: "homoscedasticity",
        statistic,
        threshold,
        verdict: pass_if(statistic <= threshold),
        detail: format!("Breusch-Pagan n*R-squared; chi-square 95% at {p} df"),
    })
}

fn pass_if(cond: bool) -> Verdict {
    if cond {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// R² of `y` on the given columns (intercept included by the caller).
/// `None` when the design is rank deficient.
fn r_squared_of(cols: &[Vec<f64>], y: &[f64]) -> Option<f64> {
    let beta = crate::scm::least_squares_guarded(cols, y).ok()?;
    let n = y.len();
    let mut ss_res = 0.0;
    for i in 0..n {
        let fitted: f64 = cols.iter().zip(&beta).map(|(c, b)| c[i] * b).sum();
        let r = y[i] - fitted;
        ss_res += r * r;
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot <= 0.0 {
        return Some(0.0);
    }
    Some((1.0 - ss_res / ss_tot).clamp(0.0, 1.0))
}

/// Variance inflation factors: `VIF_j = 1 / (1 - R²_j)` where `R²_j`
/// regresses predictor `j` on the remaining ones. Exact linear dependence
/// of `j` on the rest yields `f64::INFINITY`.
pub fn vif(dataset: &Dataset, predictors: &[&str]) -> Result<BTreeMap<String, f64>, DiagError> {
    if predictors.len() < 2 {
        return Err(DiagError::TooFewPredictors);
    }
    let n = dataset.n_rows();
    let cols: Vec<Vec<f64>> = predictors
        .iter()
        .map(|p| dataset.column(p).map_err(DiagError::Scm))
        .collect::<Result<_, _>>()?;

    let mut out = BTreeMap::new();
    for (j, name) in predictors.iter().enumerate() {
        let mut design: Vec<Vec<f64>> = vec![vec![1.0; n]];
        for (k, col) in cols.iter().enumerate() {
            if k != j {
                design.push(col.clone());
            }
        }
        let r2 = match r_squared_of(&design, &cols[j]) {
            Some(r2) => r2,
            None => {
                return Err(DiagError::Scm(ScmError::RankDeficient(0.0)));
            }
        };
        let v = if 1.0 - r2 <= 1e-12 {
            f64::INFINITY
        } else {
            1.0 / (1.0 - r2)
        };
        out.insert((*name).to_owned(), v);
    }
    Ok(out)
}

/// Shear capacity of a rectangular reinforced-concrete section, in newtons:
/// `0.66 * rho^(1/3) * sqrt(fc) * bw * d` with `fc` in MPa and `bw`, `d` in
/// millimetres.
pub fn shear_strength(rho: f64, fc: f64, bw: f64, d: f64) -> Result<f64, DiagError> {
    for (v, name) in [(rho, "rho"), (fc, "fc"), (bw, "bw"), (d, "d")] {
        if !(v.is_finite() && v > 0.0) {
            return Err(DiagError::NonPositiveInput(name));
        }
    }
    Ok(0.66 * rho.cbrt() * fc.sqrt() * bw * d)
}

/// Synthetic shear-strength samples over engineering-plausible ranges
/// (conventions, not measured data): `rho` in [0.005, 0.03], `fc` in
/// [20, 60] MPa, `bw` in [200, 600] mm, `d` in [300, 900] mm, plus Gaussian
/// noise with standard deviation `noise_sd` on the response. Columns are
/// `rho, fc, bw, d, Vc`. Deterministic per seed.
pub fn shear_dataset(n: usize, seed: u64, noise_sd: f64) -> Result<Dataset, DiagError> {
    if n < 10 {
        return Err(DiagError::TooFewRows { n, need: 10 });
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(DiagError::NonPositiveInput("noise_sd"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 5];
    for _ in 0..n {
        let rho = rng.gen_range(0.005..0.03);
        let fc = rng.gen_range(20.0..60.0);
        let bw = rng.gen_range(200.0..600.0);
        let d = rng.gen_range(300.0..900.0);
        let noise: f64 = StandardNormal.sample(&mut rng);
        let vc = shear_strength(rho, fc, bw, d).expect("sampled inputs are positive")
            + noise * noise_sd;
        for (col, v) in cols.iter_mut().zip([rho, fc, bw, d, vc]) {
            col.push(v);
        }
    }
    Dataset::from_columns(&["rho", "fc", "bw", "d", "Vc"], &cols).map_err(DiagError::Scm)
}
