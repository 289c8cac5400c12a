//! OLS with classical or HC1 standard errors and the three regression
//! designs built on it: cross-section, period growth and two-way fixed
//! effects panels estimated by least-squares dummy variables.
//!
//! Each design produces a five-column ladder: the key regressor alone, then
//! with economic, sociodemographic and institutional controls one group at a
//! time, then with all controls.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};

/// Long-form analysis data keyed by (entity, year). Missing values are NaN.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    entities: Vec<String>,
    years: Vec<i32>,
    columns: BTreeMap<String, Vec<f64>>,
    index: HashMap<(String, i32), usize>,
}

fn parse_missing(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s == "." || s.eq_ignore_ascii_case("nan") {
        Some(f64::NAN)
    } else {
        s.parse().ok()
    }
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a row. Variables not mentioned are missing for this row; new
    /// variables are missing for earlier rows.
    pub fn push(&mut self, entity: &str, year: i32, values: &[(&str, f64)]) -> Result<()> {
        let key = (entity.to_string(), year);
        if self.index.contains_key(&key) {
            return Err(Error::ModelSpec(format!("duplicate row ({entity}, {year})")));
        }
        let row = self.entities.len();
        self.index.insert(key, row);
        self.entities.push(entity.to_string());
        self.years.push(year);
        for col in self.columns.values_mut() {
            col.push(f64::NAN);
        }
        for &(name, v) in values {
            let col = self.columns.entry(name.to_string()).or_insert_with(|| vec![f64::NAN; row + 1]);
            col[row] = v;
        }
        Ok(())
    }

    /// Read a CSV with entity and year columns. Every other column whose
    /// non-missing cells all parse as numbers becomes a variable.
    pub fn from_csv<R: Read>(reader: R, entity_col: &str, year_col: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let pos = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingVariables(vec![name.to_string()]))
        };
        let (ec, yc) = (pos(entity_col)?, pos(year_col)?);
        let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
        let mut numeric: Vec<(usize, String)> = Vec::new();
        for (j, h) in headers.iter().enumerate() {
            if j == ec || j == yc {
                continue;
            }
            if rows.iter().all(|r| parse_missing(r.get(j).unwrap_or("")).is_some()) {
                numeric.push((j, h.trim().to_string()));
            } else {
                log::info!("skipping non-numeric column {h:?}");
            }
        }
        let mut ds = Dataset::new();
        for (n, r) in rows.iter().enumerate() {
            let year: i32 = r
                .get(yc)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::ModelSpec(format!("row {}: bad year", n + 2)))?;
            let values: Vec<(&str, f64)> = numeric
                .iter()
                .map(|(j, name)| (name.as_str(), parse_missing(r.get(*j).unwrap_or("")).unwrap_or(f64::NAN)))
                .collect();
            ds.push(r.get(ec).unwrap_or("").trim(), year, &values)?;
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn has(&self, var: &str) -> bool {
        self.columns.contains_key(var)
    }

    pub fn value(&self, entity: &str, year: i32, var: &str) -> Option<f64> {
        let row = *self.index.get(&(entity.to_string(), year))?;
        self.columns.get(var).map(|c| c[row]).filter(|v| !v.is_nan())
    }

    fn row_value(&self, row: usize, var: &str) -> f64 {
        self.columns.get(var).map_or(f64::NAN, |c| c[row])
    }

    fn missing_vars<'a>(&self, vars: impl IntoIterator<Item = &'a String>) -> Vec<String> {
        let set: BTreeSet<&String> = vars.into_iter().filter(|v| !self.has(v)).collect();
        set.into_iter().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SeKind {
    #[serde(rename = "classical")]
    Classical,
    #[default]
    #[serde(rename = "HC1", alias = "hc1")]
    Hc1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    CrossSection,
    PeriodGrowth,
    PanelLsdv,
}

fn default_key() -> Vec<String> {
    vec!["eci".to_string()]
}

fn default_lag() -> i32 {
    1
}

/// One regression table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub name: String,
    pub kind: ModelKind,
    pub outcome: String,
    /// Regressors present in every column (the complexity score).
    #[serde(default = "default_key")]
    pub key: Vec<String>,
    #[serde(default)]
    pub economic: Vec<String>,
    #[serde(default)]
    pub sociodemographic: Vec<String>,
    #[serde(default)]
    pub institutional: Vec<String>,
    /// Cross-section year.
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub start_year: Option<i32>,
    #[serde(default)]
    pub end_year: Option<i32>,
    /// Panel lag of the key regressors, in years.
    #[serde(default = "default_lag")]
    pub lag: i32,
    #[serde(default)]
    pub se: SeKind,
    /// Level outcomes are divided by this before fitting. Defaults to 1,000
    /// for cross-section and panel tables and 1 for period growth.
    #[serde(default)]
    pub outcome_scale: Option<f64>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, outcome: &str) -> Self {
        ModelSpec {
            name: String::new(),
            kind,
            outcome: outcome.to_string(),
            key: default_key(),
            economic: vec![],
            sociodemographic: vec![],
            institutional: vec![],
            year: None,
            start_year: None,
            end_year: None,
            lag: 1,
            se: SeKind::Hc1,
            outcome_scale: None,
        }
    }

    pub fn scale(&self) -> f64 {
        self.outcome_scale.unwrap_or(match self.kind {
            ModelKind::PeriodGrowth => 1.0,
            _ => 1000.0,
        })
    }

    /// Control sets for the five columns.
    pub fn ladder(&self) -> [Vec<String>; 5] {
        let all: Vec<String> =
            self.economic.iter().chain(&self.sociodemographic).chain(&self.institutional).cloned().collect();
        [vec![], self.economic.clone(), self.sociodemographic.clone(), self.institutional.clone(), all]
    }

    fn all_vars(&self) -> Vec<String> {
        let mut v = vec![self.outcome.clone()];
        v.extend(self.key.iter().cloned());
        v.extend(self.ladder()[4].iter().cloned());
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub name: String,
    pub coef: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

impl Term {
    pub fn stars(&self) -> &'static str {
        stars(self.p)
    }
}

/// `***` below 0.01, `**` below 0.05, `*` below 0.1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub terms: Vec<Term>,
    pub n_obs: usize,
    /// Rows removed by listwise deletion or design rules.
    pub deleted: usize,
    pub r2: f64,
    pub adj_r2: f64,
    pub resid_se: f64,
    pub df_resid: usize,
    pub f_stat: Option<f64>,
    pub f_p: Option<f64>,
    pub se_kind: SeKind,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub cov: DMatrix<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl RegressionResult {
    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }
}

struct QrFit {
    coef: DVector<f64>,
    bread: DMatrix<f64>,
    residuals: DVector<f64>,
    rss: f64,
}

/// Least squares via Householder QR. Columns whose diagonal R entry is
/// negligible relative to their norm are reported as collinear.
fn qr_fit(y: &DVector<f64>, x: &DMatrix<f64>) -> std::result::Result<QrFit, Vec<usize>> {
    let k = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();
    let collinear: Vec<usize> = (0..k)
        .filter(|&j| {
            let col_norm = x.column(j).norm();
            !(r[(j, j)].abs() > 1e-10 * col_norm.max(f64::MIN_POSITIVE))
        })
        .collect();
    if !collinear.is_empty() {
        return Err(collinear);
    }
    let qty = qr.q().tr_mul(y);
    let coef = r.solve_upper_triangular(&qty).expect("nonsingular R");
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(k, k)).expect("nonsingular R");
    let bread = &r_inv * r_inv.transpose();
    let residuals = y - x * &coef;
    let rss = residuals.norm_squared();
    Ok(QrFit { coef, bread, residuals, rss })
}

fn covariance(fit: &QrFit, x: &DMatrix<f64>, se: SeKind) -> DMatrix<f64> {
    let (n, k) = x.shape();
    match se {
        SeKind::Classical => &fit.bread * (fit.rss / (n - k) as f64),
        SeKind::Hc1 => {
            let mut xe = x.clone();
            for (i, e) in fit.residuals.iter().enumerate() {
                xe.row_mut(i).scale_mut(*e);
            }
            let meat = xe.tr_mul(&xe);
            (&fit.bread * meat * &fit.bread) * (n as f64 / (n - k) as f64)
        }
    }
}

fn t_terms(names: &[String], fit: &QrFit, cov: &DMatrix<f64>, df: usize, pick: &[usize]) -> Vec<Term> {
    let tdist = StudentsT::new(0.0, 1.0, df as f64).ok();
    pick.iter()
        .map(|&j| {
            let coef = fit.coef[j];
            let se = cov[(j, j)].max(0.0).sqrt();
            let t = coef / se;
            let p = if se > 0.0 {
                tdist.as_ref().map_or(f64::NAN, |d| 2.0 * (1.0 - d.cdf(t.abs())))
            } else if coef == 0.0 {
                1.0
            } else {
                0.0
            };
            Term { name: names[j].clone(), coef, se, t, p }
        })
        .collect()
}

fn f_pvalue(f: f64, q: usize, df: usize) -> Option<f64> {
    if !f.is_finite() {
        return (f == f64::INFINITY).then_some(0.0);
    }
    FisherSnedecor::new(q as f64, df as f64).ok().map(|d| 1.0 - d.cdf(f))
}

fn is_intercept(col: nalgebra::DVectorView<'_, f64>) -> bool {
    col.len() > 0 && col[0] != 0.0 && col.iter().all(|v| *v == col[0])
}

/// Ordinary least squares. `x` holds one column per entry of `names`; if one
/// of them is constant the model is treated as having an intercept, which
/// switches R² to the centered form and enables the overall F test.
pub fn ols(y: &[f64], x: &DMatrix<f64>, names: &[String], se: SeKind) -> Result<RegressionResult> {
    let (n, k) = x.shape();
    if names.len() != k || y.len() != n {
        return Err(Error::ModelSpec(format!(
            "design is {n}×{k} with {} names and {} outcomes",
            names.len(),
            y.len()
        )));
    }
    if n <= k {
        return Err(Error::TooFewObservations { n, k });
    }
    if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in regression data".into()));
    }
    let yv = DVector::from_column_slice(y);
    let fit = qr_fit(&yv, x).map_err(|cols| Error::RankDeficient(cols.iter().map(|&j| names[j].clone()).collect()))?;
    let cov = covariance(&fit, x, se);
    let df = n - k;
    let intercept = (0..k).any(|j| is_intercept(x.column(j)));
    let tss = if intercept {
        let mean = yv.mean();
        yv.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
    } else {
        yv.norm_squared()
    };
    let r2 = if tss > 0.0 { (1.0 - fit.rss / tss).clamp(0.0, 1.0) } else { 0.0 };
    let dof_model = if intercept { n - 1 } else { n };
    let adj_r2 = 1.0 - (1.0 - r2) * dof_model as f64 / df as f64;
    let q = if intercept { k - 1 } else { k };
    let f_stat = (q > 0 && tss > 0.0).then(|| ((tss - fit.rss) / q as f64) / (fit.rss / df as f64));
    let f_p = f_stat.and_then(|f| f_pvalue(f, q, df));
    let pick: Vec<usize> = (0..k).collect();
    Ok(RegressionResult {
        terms: t_terms(names, &fit, &cov, df, &pick),
        n_obs: n,
        deleted: 0,
        r2,
        adj_r2,
        resid_se: (fit.rss / df as f64).sqrt(),
        df_resid: df,
        f_stat,
        f_p,
        se_kind: se,
        warnings: vec![],
        cov,
        residuals: fit.residuals.iter().copied().collect(),
    })
}

fn design_with_intercept(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let k = rows.first().map_or(0, Vec::len) + 1;
    DMatrix::from_fn(rows.len(), k, |i, j| if j + 1 == k { 1.0 } else { rows[i][j] })
}

fn fit_column(
    y: Vec<f64>,
    rows: Vec<Vec<f64>>,
    mut names: Vec<String>,
    se: SeKind,
    input_rows: usize,
) -> Result<RegressionResult> {
    names.push("Constant".to_string());
    let x = design_with_intercept(&rows);
    let mut res = ols(&y, &x, &names, se)?;
    res.deleted = input_rows - res.n_obs;
    Ok(res)
}

fn complete(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

/// Five-column cross-sectional ladder for `spec.year`.
pub fn run_cross_section(data: &Dataset, spec: &ModelSpec) -> Result<Vec<RegressionResult>> {
    if spec.kind != ModelKind::CrossSection {
        return Err(Error::ModelSpec("expected a cross_section spec".into()));
    }
    let year = spec.year.ok_or_else(|| Error::ModelSpec("cross_section needs `year`".into()))?;
    let missing = data.missing_vars(&spec.all_vars());
    if !missing.is_empty() {
        return Err(Error::MissingVariables(missing));
    }
    let rows: Vec<usize> = (0..data.len()).filter(|&r| data.years[r] == year).collect();
    if rows.is_empty() {
        return Err(Error::ModelSpec(format!("no rows for year {year}")));
    }
    let scale = spec.scale();
    spec.ladder()
        .iter()
        .map(|controls| {
            let regs: Vec<String> = spec.key.iter().chain(controls).cloned().collect();
            let (mut y, mut xs) = (Vec::new(), Vec::new());
            for &r in &rows {
                let yv = data.row_value(r, &spec.outcome) / scale;
                let xv: Vec<f64> = regs.iter().map(|v| data.row_value(r, v)).collect();
                if yv.is_finite() && complete(&xv) {
                    y.push(yv);
                    xs.push(xv);
                }
            }
            fit_column(y, xs, regs, spec.se, rows.len())
        })
        .collect()
}

/// Five-column ladder of percent change between `start_year` and
/// `end_year`, regressors measured at the start, with the start level of the
/// outcome as an extra control.
pub fn run_period_growth(data: &Dataset, spec: &ModelSpec) -> Result<Vec<RegressionResult>> {
    if spec.kind != ModelKind::PeriodGrowth {
        return Err(Error::ModelSpec("expected a period_growth spec".into()));
    }
    let (start, end) = match (spec.start_year, spec.end_year) {
        (Some(s), Some(e)) if s < e => (s, e),
        _ => return Err(Error::ModelSpec("period_growth needs start_year < end_year".into())),
    };
    let missing = data.missing_vars(&spec.all_vars());
    if !missing.is_empty() {
        return Err(Error::MissingVariables(missing));
    }
    let entities: BTreeSet<&str> = data.entities.iter().map(String::as_str).collect();
    let level_name = format!("{} in {start}", spec.outcome);
    let scale = spec.scale();
    let mut warnings = Vec::new();
    let paired: Vec<(&str, usize, f64)> = entities
        .iter()
        .filter_map(|&e| {
            let s = *data.index.get(&(e.to_string(), start))?;
            let t = *data.index.get(&(e.to_string(), end))?;
            let (ys, ye) = (data.row_value(s, &spec.outcome), data.row_value(t, &spec.outcome));
            (ys.is_finite() && ye.is_finite() && ys != 0.0).then(|| (e, s, (ye - ys) / ys))
        })
        .collect();
    let unpaired = entities.len() - paired.len();
    if unpaired > 0 {
        warnings.push(format!("{unpaired} entities lack a usable {start} or {end} outcome and were dropped"));
    }
    spec.ladder()
        .iter()
        .map(|controls| {
            let mut names: Vec<String> = spec.key.clone();
            names.push(level_name.clone());
            names.extend(controls.iter().cloned());
            let (mut y, mut xs) = (Vec::new(), Vec::new());
            for &(_, s, growth) in &paired {
                let mut xv: Vec<f64> = spec.key.iter().map(|v| data.row_value(s, v)).collect();
                xv.push(data.row_value(s, &spec.outcome) / scale);
                xv.extend(controls.iter().map(|v| data.row_value(s, v)));
                if complete(&xv) {
                    y.push(growth);
                    xs.push(xv);
                }
            }
            let mut res = fit_column(y, xs, names, spec.se, entities.len())?;
            res.warnings.extend(warnings.iter().cloned());
            Ok(res)
        })
        .collect()
}

/// Two-way fixed-effects fit by dummy variables.
#[derive(Debug, Clone)]
pub struct LsdvFit {
    pub result: RegressionResult,
    /// Regressors dropped because the dummies absorb them.
    pub dropped: Vec<String>,
}

/// Regress `y` on `x` plus an intercept, entity dummies and time dummies
/// (first level of each as reference). Reported terms cover `x` only. R² is
/// the within R² relative to the dummies-only fit and the F test is joint on
/// the columns of `x`.
pub fn fit_lsdv(
    y: &[f64],
    x: &DMatrix<f64>,
    names: &[String],
    entity: &[usize],
    time: &[usize],
    se: SeKind,
) -> Result<LsdvFit> {
    let n = y.len();
    if x.nrows() != n || entity.len() != n || time.len() != n || names.len() != x.ncols() {
        return Err(Error::ModelSpec("LSDV inputs have mismatched lengths".into()));
    }
    let levels = |v: &[usize]| -> Vec<usize> {
        let set: BTreeSet<usize> = v.iter().copied().collect();
        set.into_iter().skip(1).collect()
    };
    let (ent_levels, time_levels) = (levels(entity), levels(time));
    let n_fixed = 1 + ent_levels.len() + time_levels.len();
    let fixed = DMatrix::from_fn(n, n_fixed, |i, j| {
        if j == 0 {
            1.0
        } else if j <= ent_levels.len() {
            f64::from(u8::from(entity[i] == ent_levels[j - 1]))
        } else {
            f64::from(u8::from(time[i] == time_levels[j - 1 - ent_levels.len()]))
        }
    });
    let yv = DVector::from_column_slice(y);
    let restricted = qr_fit(&yv, &fixed)
        .map_err(|_| Error::RankDeficient(vec!["entity/time dummies".into()]))?;

    let mut keep: Vec<usize> = (0..x.ncols()).collect();
    let mut dropped = Vec::new();
    let (fit, design) = loop {
        let design = DMatrix::from_fn(n, n_fixed + keep.len(), |i, j| {
            if j < n_fixed {
                fixed[(i, j)]
            } else {
                x[(i, keep[j - n_fixed])]
            }
        });
        if n <= design.ncols() {
            return Err(Error::TooFewObservations { n, k: design.ncols() });
        }
        match qr_fit(&yv, &design) {
            Ok(fit) => break (fit, design),
            Err(cols) => {
                let Some(&j) = cols.iter().find(|&&j| j >= n_fixed) else {
                    return Err(Error::RankDeficient(vec!["entity/time dummies".into()]));
                };
                let name = names[keep[j - n_fixed]].clone();
                log::warn!("{name} has no variation beyond the fixed effects; dropped");
                dropped.push(name);
                keep.remove(j - n_fixed);
            }
        }
    };
    let k = design.ncols();
    let df = n - k;
    let cov = covariance(&fit, &design, se);
    let term_names: Vec<String> = (0..k)
        .map(|j| if j < n_fixed { String::new() } else { names[keep[j - n_fixed]].clone() })
        .collect();
    let pick: Vec<usize> = (n_fixed..k).collect();
    let q = keep.len();
    let r2 = if restricted.rss > 0.0 { (1.0 - fit.rss / restricted.rss).clamp(0.0, 1.0) } else { 0.0 };
    let f_stat = (q > 0 && restricted.rss > 0.0)
        .then(|| ((restricted.rss - fit.rss) / q as f64) / (fit.rss / df as f64));
    let result = RegressionResult {
        terms: t_terms(&term_names, &fit, &cov, df, &pick),
        n_obs: n,
        deleted: 0,
        r2,
        adj_r2: 1.0 - (1.0 - r2) * (n - 1) as f64 / df as f64,
        resid_se: (fit.rss / df as f64).sqrt(),
        df_resid: df,
        f_stat,
        f_p: f_stat.and_then(|f| f_pvalue(f, q, df)),
        se_kind: se,
        warnings: dropped.iter().map(|d| format!("{d} absorbed by fixed effects; dropped")).collect(),
        cov,
        residuals: fit.residuals.iter().copied().collect(),
    };
    Ok(LsdvFit { result, dropped })
}

/// Five-column panel ladder: outcome on lagged key regressors plus controls,
/// entity and year dummies.
pub fn run_panel_lsdv(data: &Dataset, spec: &ModelSpec) -> Result<Vec<RegressionResult>> {
    if spec.kind != ModelKind::PanelLsdv {
        return Err(Error::ModelSpec("expected a panel_lsdv spec".into()));
    }
    if spec.lag < 1 {
        return Err(Error::ModelSpec("panel lag must be at least 1".into()));
    }
    let missing = data.missing_vars(&spec.all_vars());
    if !missing.is_empty() {
        return Err(Error::MissingVariables(missing));
    }
    let distinct_years: BTreeSet<i32> = data.years.iter().copied().collect();
    if distinct_years.len() < 2 {
        return Err(Error::ModelSpec("panel needs at least two years".into()));
    }
    let lag_names: Vec<String> = spec.key.iter().map(|k| format!("l.{k}")).collect();
    let lagged: Vec<Vec<f64>> = (0..data.len())
        .map(|r| {
            let prev = data.index.get(&(data.entities[r].clone(), data.years[r] - spec.lag));
            spec.key.iter().map(|k| prev.map_or(f64::NAN, |&p| data.row_value(p, k))).collect()
        })
        .collect();
    let scale = spec.scale();

    spec.ladder()
        .iter()
        .map(|controls| {
            let mut names = lag_names.clone();
            names.extend(controls.iter().cloned());
            let mut rows: Vec<(usize, f64, Vec<f64>)> = Vec::new();
            for r in 0..data.len() {
                let yv = data.row_value(r, &spec.outcome) / scale;
                let mut xv = lagged[r].clone();
                xv.extend(controls.iter().map(|v| data.row_value(r, v)));
                if yv.is_finite() && complete(&xv) {
                    rows.push((r, yv, xv));
                }
            }
            let mut per_entity: HashMap<&str, usize> = HashMap::new();
            for (r, _, _) in &rows {
                *per_entity.entry(data.entities[*r].as_str()).or_default() += 1;
            }
            let singletons = per_entity.values().filter(|&&c| c < 2).count();
            rows.retain(|(r, _, _)| per_entity[data.entities[*r].as_str()] >= 2);

            let ent_ids: BTreeMap<&str, usize> = {
                let set: BTreeSet<&str> = rows.iter().map(|(r, _, _)| data.entities[*r].as_str()).collect();
                set.into_iter().enumerate().map(|(i, e)| (e, i)).collect()
            };
            let entity: Vec<usize> = rows.iter().map(|(r, _, _)| ent_ids[data.entities[*r].as_str()]).collect();
            let time: Vec<usize> = rows.iter().map(|(r, _, _)| data.years[*r] as usize).collect();
            let y: Vec<f64> = rows.iter().map(|(_, y, _)| *y).collect();
            let x = DMatrix::from_fn(rows.len(), names.len(), |i, j| rows[i].2[j]);
            let mut fit = fit_lsdv(&y, &x, &names, &entity, &time, spec.se)?.result;
            fit.deleted = data.len() - fit.n_obs;
            if singletons > 0 {
                fit.warnings.push(format!("{singletons} entities with fewer than 2 usable years dropped"));
            }
            Ok(fit)
        })
        .collect()
}

pub fn run_model(data: &Dataset, spec: &ModelSpec) -> Result<Vec<RegressionResult>> {
    match spec.kind {
        ModelKind::CrossSection => run_cross_section(data, spec),
        ModelKind::PeriodGrowth => run_period_growth(data, spec),
        ModelKind::PanelLsdv => run_panel_lsdv(data, spec),
    }
}

fn fmt_num(v: f64) -> String {
    let s = if v != 0.0 && v.abs() < 0.01 { format!("{v:.5}") } else { format!("{v:.3}") };
    if s.starts_with("-") && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Plain-text table: coefficients with stars over parenthesized standard
/// errors, one column per model, fit statistics below.
pub fn format_table(title: &str, results: &[RegressionResult]) -> String {
    let mut order: Vec<String> = Vec::new();
    for r in results {
        for t in &r.terms {
            if !order.contains(&t.name) {
                order.push(t.name.clone());
            }
        }
    }
    // constant goes last
    if let Some(p) = order.iter().position(|n| n == "Constant") {
        let c = order.remove(p);
        order.push(c);
    }
    let mut lines: Vec<Vec<String>> = Vec::new();
    let mut header = vec![String::new()];
    header.extend((1..=results.len()).map(|c| format!("({c})")));
    lines.push(header);
    for name in &order {
        let mut coef = vec![name.clone()];
        let mut se = vec![String::new()];
        for r in results {
            match r.term(name) {
                Some(t) => {
                    coef.push(format!("{}{}", fmt_num(t.coef), t.stars()));
                    se.push(format!("({})", fmt_num(t.se)));
                }
                None => {
                    coef.push(String::new());
                    se.push(String::new());
                }
            }
        }
        lines.push(coef);
        lines.push(se);
    }
    let stat = |label: &str, f: &dyn Fn(&RegressionResult) -> String| {
        let mut row = vec![label.to_string()];
        row.extend(results.iter().map(f));
        row
    };
    lines.push(vec![]);
    lines.push(stat("Observations", &|r| r.n_obs.to_string()));
    lines.push(stat("R2", &|r| format!("{:.3}", r.r2)));
    lines.push(stat("Adjusted R2", &|r| format!("{:.3}", r.adj_r2)));
    lines.push(stat("Residual Std. Error", &|r| format!("{:.3} (df = {})", r.resid_se, r.df_resid)));
    lines.push(stat("F Statistic", &|r| match (r.f_stat, r.f_p) {
        (Some(f), Some(p)) => format!("{:.3}{}", f, stars(p)),
        (Some(f), None) => format!("{f:.3}"),
        _ => String::new(),
    }));

    let ncols = results.len() + 1;
    let widths: Vec<usize> = (0..ncols)
        .map(|c| lines.iter().filter_map(|l| l.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let total: usize = widths.iter().sum::<usize>() + 2 * (ncols - 1);
    let rule = "=".repeat(total);
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{rule}");
    for (n, l) in lines.iter().enumerate() {
        if l.is_empty() {
            let _ = writeln!(out, "{}", "-".repeat(total));
            continue;
        }
        let cells: Vec<String> = l
            .iter()
            .enumerate()
            .map(|(c, s)| {
                let pad = widths[c] - s.chars().count();
                if c == 0 {
                    format!("{s}{}", " ".repeat(pad))
                } else {
                    format!("{}{s}", " ".repeat(pad))
                }
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        if n == 0 {
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    let _ = writeln!(out, "{rule}");
    let se_label = match results.first().map(|r| r.se_kind) {
        Some(SeKind::Classical) => "classical",
        _ => "HC1 robust",
    };
    let _ = writeln!(out, "Note: *p<0.1; **p<0.05; ***p<0.01; {se_label} standard errors");
    out
}

/// Long-form results: one row per term and per fit statistic.
pub fn write_results_csv<W: Write>(model: &str, results: &[RegressionResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["model", "column", "term", "estimate", "std_error", "t_value", "p_value", "stars"])?;
    for (c, r) in results.iter().enumerate() {
        let col = (c + 1).to_string();
        for t in &r.terms {
            w.write_record([
                model,
                &col,
                &t.name,
                &t.coef.to_string(),
                &t.se.to_string(),
                &t.t.to_string(),
                &t.p.to_string(),
                t.stars(),
            ])?;
        }
        let stats = [
            ("(n_obs)", r.n_obs as f64),
            ("(deleted)", r.deleted as f64),
            ("(r2)", r.r2),
            ("(adj_r2)", r.adj_r2),
            ("(resid_se)", r.resid_se),
            ("(f_stat)", r.f_stat.unwrap_or(f64::NAN)),
            ("(f_p)", r.f_p.unwrap_or(f64::NAN)),
        ];
        for (name, v) in stats {
            w.write_record([model, &col, name, &v.to_string(), "", "", "", ""])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { xs[i] } else { 1.0 });
        let r = ols(&y, &x, &names(&["x", "Constant"]), SeKind::Hc1).unwrap();
        assert!((r.terms[0].coef - 2.0).abs() < 1e-12);
        assert!((r.terms[1].coef - 3.0).abs() < 1e-12);
        assert!((r.r2 - 1.0).abs() < 1e-12);
        assert!(r.resid_se < 1e-12);
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let x = DMatrix::from_fn(6, 3, |i, j| match j {
            0 => i as f64,
            1 => 2.0 * i as f64,
            _ => 1.0,
        });
        let y = vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.0];
        match ols(&y, &x, &names(&["a", "b", "Constant"]), SeKind::Hc1) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, vec!["b".to_string()]),
            other => panic!("{other:?}"),
        }
        let small = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(ols(&[1.0, 2.0], &small, &names(&["a", "b"]), SeKind::Hc1), Err(Error::TooFewObservations { .. })));
    }

    #[test]
    fn star_legend() {
        assert_eq!(stars(0.009), "***");
        assert_eq!(stars(0.01), "**");
        assert_eq!(stars(0.049), "**");
        assert_eq!(stars(0.05), "*");
        assert_eq!(stars(0.099), "*");
        assert_eq!(stars(0.1), "");
    }

    fn cross_section_data() -> Dataset {
        let mut d = Dataset::new();
        for e in 0..12 {
            let eci = (e as f64 * 0.7).sin();
            let unemp = (e as f64 * 1.3).cos();
            d.push(&format!("e{e}"), 2007, &[("eci", eci), ("unemp", unemp), ("income", 5000.0)]).unwrap();
        }
        d
    }

    #[test]
    fn constant_outcome_gives_zero_slopes() {
        let mut spec = ModelSpec::new(ModelKind::CrossSection, "income");
        spec.year = Some(2007);
        spec.economic = names(&["unemp"]);
        let res = run_cross_section(&cross_section_data(), &spec).unwrap();
        assert_eq!(res.len(), 5);
        for r in &res {
            assert_eq!(r.r2, 0.0);
            for t in r.terms.iter().filter(|t| t.name != "Constant") {
                assert!(t.coef.abs() < 1e-12);
            }
            assert!((r.term("Constant").unwrap().coef - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_variables_listed() {
        let mut spec = ModelSpec::new(ModelKind::CrossSection, "income");
        spec.year = Some(2007);
        spec.institutional = names(&["vote", "union"]);
        match run_cross_section(&cross_section_data(), &spec) {
            Err(Error::MissingVariables(v)) => assert_eq!(v, names(&["union", "vote"])),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_growth_gives_zero_coefficients() {
        let mut d = Dataset::new();
        for e in 0..8 {
            let f = e as f64;
            d.push(&format!("e{e}"), 2007, &[("eci", f.sin()), ("inc", 100.0 + f * f)]).unwrap();
            d.push(&format!("e{e}"), 2009, &[("eci", f.cos()), ("inc", 100.0 + f * f)]).unwrap();
        }
        d.push("lonely", 2007, &[("eci", 0.3), ("inc", 10.0)]).unwrap();
        let mut spec = ModelSpec::new(ModelKind::PeriodGrowth, "inc");
        spec.start_year = Some(2007);
        spec.end_year = Some(2009);
        let res = run_period_growth(&d, &spec).unwrap();
        for r in &res {
            assert!(r.terms.iter().all(|t| t.coef.abs() < 1e-12));
            assert_eq!(r.n_obs, 8);
            assert_eq!(r.deleted, 1);
        }
        assert!(res[0].term("inc in 2007").is_some());
        spec.end_year = Some(2007);
        assert!(run_period_growth(&d, &spec).is_err());
    }

    #[test]
    fn panel_absorbed_regressor_is_dropped() {
        let mut d = Dataset::new();
        for e in 0..4 {
            for t in 0..4 {
                let (fe, ft) = (e as f64, t as f64);
                d.push(
                    &format!("e{e}"),
                    2000 + t,
                    &[("eci", (fe * 1.7 + ft * 0.9).sin()), ("y", fe * 3.0 + ft + (fe * ft).cos()), ("region_size", fe)],
                )
                .unwrap();
            }
        }
        let mut spec = ModelSpec::new(ModelKind::PanelLsdv, "y");
        spec.economic = names(&["region_size"]);
        spec.outcome_scale = Some(1.0);
        let res = run_panel_lsdv(&d, &spec).unwrap();
        assert!(res[1].term("region_size").is_none());
        assert!(res[1].warnings.iter().any(|w| w.contains("region_size")));
        assert_eq!(res[0].n_obs, 12);
        assert_eq!(res[0].deleted, 4);
        assert!(res[0].term("l.eci").is_some());
    }

    #[test]
    fn table_layout() {
        let mut spec = ModelSpec::new(ModelKind::CrossSection, "income");
        spec.year = Some(2007);
        let mut d = cross_section_data();
        d.push("extra", 2007, &[("eci", 0.5), ("unemp", 0.1), ("income", 7000.0)]).unwrap();
        let res = run_cross_section(&d, &spec).unwrap();
        let text = format_table("Income", &res);
        assert!(text.contains("(1)") && text.contains("(5)"));
        assert!(text.contains("Note: *p<0.1; **p<0.05; ***p<0.01"));
        let mut buf = Vec::new();
        write_results_csv("m", &res, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().count() > 10);
    }

    #[test]
    fn dataset_csv() {
        let text = "id,year,name,eci,inc\na,2007,Alpha,0.5,100\nb,2007,Beta,NA,200\n";
        let d = Dataset::from_csv(text.as_bytes(), "id", "year").unwrap();
        assert!(!d.has("name"));
        assert_eq!(d.value("a", 2007, "eci"), Some(0.5));
        assert_eq!(d.value("b", 2007, "eci"), None);
        assert!(Dataset::from_csv(text.as_bytes(), "entity", "year").is_err());
    }
}
