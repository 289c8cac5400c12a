//! Region × industry input matrices.
//!
//! Five strategies turn raw employment into the matrix the complexity
//! solvers consume:
//!
//! | strategy | entry |
//! |---|---|
//! | `BM` | 1 if LQ ≥ 1 |
//! | `RLQ` | LQ |
//! | `WM` | region share of national industry employment |
//! | `Presence` | 1 if employment ≥ 1 |
//! | `CM` | 1 if LQ ≥ 1 or employment > cutoff |

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw employment counts with row (region) and column (industry) codes.
#[derive(Debug, Clone, PartialEq)]
pub struct EmploymentMatrix {
    pub values: DMatrix<f64>,
    pub regions: Vec<String>,
    pub industries: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "BM")]
    Bm,
    #[serde(rename = "RLQ")]
    Rlq,
    #[serde(rename = "WM")]
    Wm,
    Presence,
    #[serde(rename = "CM")]
    Cm,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Bm, Strategy::Rlq, Strategy::Wm, Strategy::Presence, Strategy::Cm];

    pub fn is_binary(self) -> bool {
        matches!(self, Strategy::Bm | Strategy::Presence | Strategy::Cm)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Bm => "BM",
            Strategy::Rlq => "RLQ",
            Strategy::Wm => "WM",
            Strategy::Presence => "Presence",
            Strategy::Cm => "CM",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bm" => Ok(Strategy::Bm),
            "rlq" => Ok(Strategy::Rlq),
            "wm" => Ok(Strategy::Wm),
            "presence" => Ok(Strategy::Presence),
            "cm" => Ok(Strategy::Cm),
            _ => Err(Error::UnknownStrategy(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    /// CM employment cutoff; a cell counts when employment is strictly above it.
    pub cutoff: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams { cutoff: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    pub values: DMatrix<f64>,
    pub strategy: Strategy,
    pub regions: Vec<String>,
    pub industries: Vec<String>,
    pub params: StrategyParams,
}

impl InputMatrix {
    pub fn is_binary(&self) -> bool {
        self.strategy.is_binary()
    }
}

/// Location quotients. Regions or industries with zero total employment get
/// LQ 0 rather than NaN.
pub fn location_quotient(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let grand: f64 = x.iter().sum();
    if !(grand > 0.0) {
        return Err(Error::ZeroTotal);
    }
    let row_tot: Vec<f64> = x.row_iter().map(|r| r.sum()).collect();
    let col_tot: Vec<f64> = x.column_iter().map(|c| c.sum()).collect();
    Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |r, i| {
        if row_tot[r] > 0.0 && col_tot[i] > 0.0 {
            (x[(r, i)] / row_tot[r]) / (col_tot[i] / grand)
        } else {
            0.0
        }
    }))
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn build_input_matrix(
    x: &EmploymentMatrix,
    strategy: Strategy,
    params: StrategyParams,
) -> Result<InputMatrix> {
    if strategy == Strategy::Cm && !(params.cutoff.is_finite() && params.cutoff > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "CM cutoff must be positive and finite, got {}",
            params.cutoff
        )));
    }
    if x.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter("employment must be finite and nonnegative".into()));
    }
    let (nr, ni) = x.values.shape();
    let values = match strategy {
        Strategy::Presence => x.values.map(|v| indicator(v >= 1.0)),
        Strategy::Wm => {
            let col_tot: Vec<f64> = x.values.column_iter().map(|c| c.sum()).collect();
            DMatrix::from_fn(nr, ni, |r, i| {
                if col_tot[i] > 0.0 {
                    x.values[(r, i)] / col_tot[i]
                } else {
                    0.0
                }
            })
        }
        Strategy::Rlq => location_quotient(&x.values)?,
        Strategy::Bm => location_quotient(&x.values)?.map(|lq| indicator(lq >= 1.0)),
        Strategy::Cm => {
            let lq = location_quotient(&x.values)?;
            DMatrix::from_fn(nr, ni, |r, i| {
                indicator(lq[(r, i)] >= 1.0 || x.values[(r, i)] > params.cutoff)
            })
        }
    };
    Ok(InputMatrix {
        values,
        strategy,
        regions: x.regions.clone(),
        industries: x.industries.clone(),
        params,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropped {
    pub code: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneReport {
    pub dropped_regions: Vec<Dropped>,
    pub dropped_industries: Vec<Dropped>,
}

impl PruneReport {
    pub fn is_empty(&self) -> bool {
        self.dropped_regions.is_empty() && self.dropped_industries.is_empty()
    }
}

/// Index sets of the non-empty rows and columns, removing empty ones until
/// none remain.
pub fn nonempty_support(values: &DMatrix<f64>) -> (Vec<usize>, Vec<usize>) {
    let mut rows: Vec<usize> = (0..values.nrows()).collect();
    let mut cols: Vec<usize> = (0..values.ncols()).collect();
    loop {
        let keep_rows: Vec<usize> =
            rows.iter().copied().filter(|&r| cols.iter().any(|&c| values[(r, c)] != 0.0)).collect();
        let keep_cols: Vec<usize> =
            cols.iter().copied().filter(|&c| keep_rows.iter().any(|&r| values[(r, c)] != 0.0)).collect();
        let done = keep_rows.len() == rows.len() && keep_cols.len() == cols.len();
        rows = keep_rows;
        cols = keep_cols;
        if done {
            return (rows, cols);
        }
    }
}

/// Remove all-zero rows and columns.
pub fn prune_empty(m: InputMatrix) -> Result<(InputMatrix, PruneReport)> {
    let (rows, cols) = nonempty_support(&m.values);
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::DegenerateNetwork(format!(
            "{} matrix with {}×{} entries has no nonzero cell",
            m.strategy,
            m.values.nrows(),
            m.values.ncols()
        )));
    }
    let mut report = PruneReport::default();
    for r in 0..m.values.nrows() {
        if !rows.contains(&r) {
            report.dropped_regions.push(Dropped { code: m.regions[r].clone(), reason: "all-zero row".into() });
        }
    }
    for c in 0..m.values.ncols() {
        if !cols.contains(&c) {
            report
                .dropped_industries
                .push(Dropped { code: m.industries[c].clone(), reason: "all-zero column".into() });
        }
    }
    if report.is_empty() {
        return Ok((m, report));
    }
    let values = m.values.select_rows(&rows).select_columns(&cols);
    let pruned = InputMatrix {
        values,
        strategy: m.strategy,
        regions: rows.iter().map(|&r| m.regions[r].clone()).collect(),
        industries: cols.iter().map(|&c| m.industries[c].clone()).collect(),
        params: m.params,
    };
    Ok((pruned, report))
}

/// JSON sidecar written next to a matrix triplet file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub strategy: Strategy,
    pub binary: bool,
    pub params: StrategyParams,
    pub n_regions: usize,
    pub n_industries: usize,
    pub prune_report: PruneReport,
}

/// Write nonzero cells as `region,industry,value`.
pub fn write_triplets<W: Write>(
    values: &DMatrix<f64>,
    regions: &[String],
    industries: &[String],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["region", "industry", "value"])?;
    for r in 0..values.nrows() {
        for i in 0..values.ncols() {
            let v = values[(r, i)];
            if v != 0.0 {
                w.write_record([regions[r].as_str(), industries[i].as_str(), &v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a triplet file. Rows and columns are ordered by first appearance.
pub fn read_triplets<R: Read>(reader: R) -> Result<(DMatrix<f64>, Vec<String>, Vec<String>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut regions: Vec<String> = Vec::new();
    let mut industries: Vec<String> = Vec::new();
    let mut cells = Vec::new();
    let mut rpos = std::collections::HashMap::new();
    let mut ipos = std::collections::HashMap::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 3 {
            return Err(Error::Schema(format!("triplet row {row:?} needs 3 fields")));
        }
        let v: f64 = row[2].parse().map_err(|_| Error::Schema(format!("bad value {:?}", &row[2])))?;
        let r = *rpos.entry(row[0].to_string()).or_insert_with(|| {
            regions.push(row[0].to_string());
            regions.len() - 1
        });
        let i = *ipos.entry(row[1].to_string()).or_insert_with(|| {
            industries.push(row[1].to_string());
            industries.len() - 1
        });
        cells.push((r, i, v));
    }
    let mut m = DMatrix::zeros(regions.len(), industries.len());
    for (r, i, v) in cells {
        m[(r, i)] = v;
    }
    Ok((m, regions, industries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emp(rows: usize, cols: usize, v: &[f64]) -> EmploymentMatrix {
        EmploymentMatrix {
            values: DMatrix::from_row_slice(rows, cols, v),
            regions: (0..rows).map(|r| format!("r{r}")).collect(),
            industries: (0..cols).map(|c| format!("i{c}")).collect(),
        }
    }

    #[test]
    fn lq_hand_value() {
        let lq = location_quotient(&DMatrix::from_row_slice(2, 2, &[9.0, 1.0, 1.0, 9.0])).unwrap();
        assert_eq!(lq[(0, 0)], 1.8);
        assert!((lq[(0, 1)] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn lq_single_region_is_one() {
        let lq = location_quotient(&DMatrix::from_row_slice(1, 3, &[3.0, 7.0, 0.0])).unwrap();
        assert_eq!(lq.as_slice(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn lq_zero_total() {
        assert!(matches!(location_quotient(&DMatrix::zeros(2, 2)), Err(Error::ZeroTotal)));
    }

    #[test]
    fn empty_cell_is_zero_everywhere() {
        let x = emp(2, 2, &[0.0, 5.0, 3.0, 4.0]);
        for s in Strategy::ALL {
            assert_eq!(build_input_matrix(&x, s, StrategyParams::default()).unwrap().values[(0, 0)], 0.0, "{s}");
        }
    }

    #[test]
    fn wm_single_host_gets_one() {
        let x = emp(3, 2, &[0.0, 1.0, 8.0, 1.0, 0.0, 2.0]);
        let wm = build_input_matrix(&x, Strategy::Wm, StrategyParams::default()).unwrap();
        assert_eq!(wm.values.column(0).as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn strategy_parsing_and_cutoff_validation() {
        assert!(matches!("XYZ".parse::<Strategy>(), Err(Error::UnknownStrategy(_))));
        assert_eq!("presence".parse::<Strategy>().unwrap(), Strategy::Presence);
        let x = emp(1, 1, &[1.0]);
        assert!(build_input_matrix(&x, Strategy::Cm, StrategyParams { cutoff: 0.0 }).is_err());
        assert!(build_input_matrix(&x, Strategy::Cm, StrategyParams { cutoff: f64::NAN }).is_err());
    }

    #[test]
    fn cutoff_is_strict() {
        // region 0 is tiny in industry 0 relative to its size, so LQ < 1
        let x = emp(2, 2, &[50.0, 1000.0, 50.0, 1.0]);
        let lq = location_quotient(&x.values).unwrap();
        assert!(lq[(0, 0)] < 1.0);
        let cm = build_input_matrix(&x, Strategy::Cm, StrategyParams::default()).unwrap();
        assert_eq!(cm.values[(0, 0)], 0.0);
        let cm = build_input_matrix(&x, Strategy::Cm, StrategyParams { cutoff: 49.5 }).unwrap();
        assert_eq!(cm.values[(0, 0)], 1.0);
    }

    #[test]
    fn prune_drops_zero_row_and_column() {
        let x = emp(3, 3, &[1.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0]);
        let m = build_input_matrix(&x, Strategy::Wm, StrategyParams::default()).unwrap();
        let (p, report) = prune_empty(m).unwrap();
        assert_eq!(p.values.shape(), (2, 2));
        assert_eq!(p.regions, vec!["r0", "r2"]);
        assert_eq!(p.industries, vec!["i0", "i2"]);
        assert_eq!(report.dropped_regions, vec![Dropped { code: "r1".into(), reason: "all-zero row".into() }]);
        assert_eq!(report.dropped_industries.len(), 1);
    }

    #[test]
    fn prune_identity_and_degenerate() {
        let x = emp(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let m = build_input_matrix(&x, Strategy::Presence, StrategyParams::default()).unwrap();
        let (p, report) = prune_empty(m.clone()).unwrap();
        assert_eq!(p, m);
        assert!(report.is_empty());
        let zero = InputMatrix { values: DMatrix::zeros(2, 2), ..m };
        assert!(matches!(prune_empty(zero), Err(Error::DegenerateNetwork(_))));
    }

    #[test]
    fn triplets_round_trip() {
        let x = emp(2, 3, &[1.5, 0.0, 2.0, 0.0, 3.0, 0.25]);
        let mut buf = Vec::new();
        write_triplets(&x.values, &x.regions, &x.industries, &mut buf).unwrap();
        let (m, r, i) = read_triplets(buf.as_slice()).unwrap();
        assert_eq!(m, x.values.select_columns(&[0, 2, 1]));
        assert_eq!(r, x.regions);
        assert_eq!(i, vec!["i0", "i2", "i1"]);
    }
}
