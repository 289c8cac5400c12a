//! Triangularity ordering, heatmaps, score correlations and group summaries.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::Crosswalk;
use crate::matrix::{EmploymentMatrix, InputMatrix, Strategy};

/// Display cap for RLQ heatmaps.
pub const LQ_TOP_CODE: f64 = 10.0;

/// A matrix reordered so the nested structure shows as a triangle.
///
/// Rows run from least to most diverse region and columns from most to least
/// ubiquitous industry, so a perfectly nested matrix becomes lower-triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedMatrixView {
    /// `region_order[k]` is the original row placed at position `k`.
    pub region_order: Vec<usize>,
    pub industry_order: Vec<usize>,
    pub values: DMatrix<f64>,
    pub regions: Vec<String>,
    pub industries: Vec<String>,
    pub top_code: Option<f64>,
}

fn totals(values: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    (
        values.row_iter().map(|r| r.sum()).collect(),
        values.column_iter().map(|c| c.sum()).collect(),
    )
}

/// Order rows by ascending diversity and columns by descending ubiquity.
/// Ties fall to the optional employment totals (same direction), then to the
/// original position.
pub fn order_values(
    values: &DMatrix<f64>,
    row_tiebreak: Option<&[f64]>,
    col_tiebreak: Option<&[f64]>,
) -> (Vec<usize>, Vec<usize>) {
    let (div, ubi) = totals(values);
    let mut rows: Vec<usize> = (0..values.nrows()).collect();
    rows.sort_by(|&a, &b| {
        div[a]
            .total_cmp(&div[b])
            .then_with(|| row_tiebreak.map_or(std::cmp::Ordering::Equal, |t| t[a].total_cmp(&t[b])))
    });
    let mut cols: Vec<usize> = (0..values.ncols()).collect();
    cols.sort_by(|&a, &b| {
        ubi[b]
            .total_cmp(&ubi[a])
            .then_with(|| col_tiebreak.map_or(std::cmp::Ordering::Equal, |t| t[b].total_cmp(&t[a])))
    });
    (rows, cols)
}

/// Reorder an input matrix for a triangularity plot. `employment`, when
/// given, supplies the total-employment tie-break; it is aligned by code.
pub fn order_for_triangularity(m: &InputMatrix, employment: Option<&EmploymentMatrix>) -> OrderedMatrixView {
    let tiebreaks = employment.map(|x| {
        let (rt, ct) = totals(&x.values);
        let rmap: HashMap<&str, f64> = x.regions.iter().map(String::as_str).zip(rt).collect();
        let cmap: HashMap<&str, f64> = x.industries.iter().map(String::as_str).zip(ct).collect();
        (
            m.regions.iter().map(|c| rmap.get(c.as_str()).copied().unwrap_or(0.0)).collect::<Vec<_>>(),
            m.industries.iter().map(|c| cmap.get(c.as_str()).copied().unwrap_or(0.0)).collect::<Vec<_>>(),
        )
    });
    let top_code = (m.strategy == Strategy::Rlq).then_some(LQ_TOP_CODE);
    let (rt, ct) = match &tiebreaks {
        Some((r, c)) => (Some(r.as_slice()), Some(c.as_slice())),
        None => (None, None),
    };
    view_with_order(&m.values, &m.regions, &m.industries, rt, ct, top_code)
}

/// Same as [`order_for_triangularity`] for a bare matrix with positional codes.
pub fn order_plain(values: &DMatrix<f64>) -> OrderedMatrixView {
    let regions: Vec<String> = (0..values.nrows()).map(|r| r.to_string()).collect();
    let industries: Vec<String> = (0..values.ncols()).map(|c| c.to_string()).collect();
    view_with_order(values, &regions, &industries, None, None, None)
}

/// Order a labelled matrix with no tie-break data and no top-coding.
pub fn order_labeled(values: &DMatrix<f64>, regions: &[String], industries: &[String]) -> OrderedMatrixView {
    view_with_order(values, regions, industries, None, None, None)
}

fn view_with_order(
    values: &DMatrix<f64>,
    regions: &[String],
    industries: &[String],
    row_tiebreak: Option<&[f64]>,
    col_tiebreak: Option<&[f64]>,
    top_code: Option<f64>,
) -> OrderedMatrixView {
    let (rows, cols) = order_values(values, row_tiebreak, col_tiebreak);
    let cap = top_code.unwrap_or(f64::INFINITY);
    let ordered = DMatrix::from_fn(rows.len(), cols.len(), |r, c| values[(rows[r], cols[c])].min(cap));
    OrderedMatrixView {
        values: ordered,
        regions: rows.iter().map(|&r| regions[r].clone()).collect(),
        industries: cols.iter().map(|&c| industries[c].clone()).collect(),
        region_order: rows,
        industry_order: cols,
        top_code,
    }
}

/// True when every row's nonzeros form a prefix of the columns and the
/// prefixes never shrink going down: the staircase of a nested matrix.
pub fn is_staircase(values: &DMatrix<f64>) -> bool {
    let mut prev = 0;
    for row in values.row_iter() {
        let len = row.iter().take_while(|v| **v != 0.0).count();
        if row.iter().skip(len).any(|v| *v != 0.0) || len < prev {
            return false;
        }
        prev = len;
    }
    true
}

/// Square matrix with ones on and below the diagonal and zeros above.
pub fn is_lower_triangular_ones(values: &DMatrix<f64>) -> bool {
    values.is_square()
        && (0..values.nrows())
            .all(|r| (0..values.ncols()).all(|c| values[(r, c)] == if c <= r { 1.0 } else { 0.0 }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapFormat {
    Svg,
    TripletCsv,
}

impl FromStr for HeatmapFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svg" => Ok(HeatmapFormat::Svg),
            "csv" | "triplet-csv" | "triplet_csv" => Ok(HeatmapFormat::TripletCsv),
            _ => Err(Error::InvalidParameter(format!(
                "heatmap format {s:?} (expected svg or triplet-csv)"
            ))),
        }
    }
}

/// Self-contained SVG with one 1×1 rect per nonzero cell, darker for larger
/// values. Values are scaled by the view maximum.
pub fn write_svg<W: Write>(view: &OrderedMatrixView, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let (nr, nc) = view.values.shape();
    let max = view.values.iter().copied().fold(0.0, f64::max);
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{nc}" height="{nr}" viewBox="0 0 {nc} {nr}" shape-rendering="crispEdges">"#
    )?;
    for r in 0..nr {
        for c in 0..nc {
            let v = view.values[(r, c)];
            if v != 0.0 {
                let g = (255.0 * (1.0 - v / max)).round().clamp(0.0, 255.0) as u8;
                writeln!(w, r#"<rect x="{c}" y="{r}" width="1" height="1" fill="rgb({g},{g},{g})"/>"#)?;
            }
        }
    }
    writeln!(w, "</svg>")?;
    w.flush()?;
    Ok(())
}

/// Long-form `row_rank,col_rank,value` for every cell, zeros included.
pub fn write_triplet_csv<W: Write>(view: &OrderedMatrixView, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row_rank", "col_rank", "value"])?;
    for r in 0..view.values.nrows() {
        for c in 0..view.values.ncols() {
            w.write_record([r.to_string(), c.to_string(), view.values[(r, c)].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_triplet_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut cells = Vec::new();
    let (mut nr, mut nc) = (0, 0);
    for row in rdr.records() {
        let row = row?;
        let parse_err = || Error::Schema(format!("bad heatmap row {row:?}"));
        let r: usize = row.get(0).and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
        let c: usize = row.get(1).and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
        let v: f64 = row.get(2).and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
        nr = nr.max(r + 1);
        nc = nc.max(c + 1);
        cells.push((r, c, v));
    }
    let mut m = DMatrix::zeros(nr, nc);
    for (r, c, v) in cells {
        m[(r, c)] = v;
    }
    Ok(m)
}

pub fn export_heatmap(view: &OrderedMatrixView, path: &Path, format: HeatmapFormat) -> Result<()> {
    let file = File::create(path)?;
    match format {
        HeatmapFormat::Svg => write_svg(view, file),
        HeatmapFormat::TripletCsv => write_triplet_csv(view, file),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transform {
    #[default]
    None,
    Log,
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!("length mismatch {} vs {}", a.len(), b.len())));
    }
    if a.len() < 3 {
        return Err(Error::InvalidParameter(format!("correlation needs at least 3 pairs, got {}", a.len())));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if !(saa > 0.0 && sbb > 0.0) {
        return Err(Error::InvalidParameter("zero variance in correlation input".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Average ranks (1-based). Values within `tie_tol` of the previous value in
/// sorted order share a rank.
pub fn ranks(v: &[f64], tie_tol: f64) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] - v[idx[end - 1]] <= tie_tol {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            out[i] = avg;
        }
        start = end;
    }
    out
}

pub fn spearman(a: &[f64], b: &[f64], tie_tol: f64) -> Result<f64> {
    pearson(&ranks(a, tie_tol), &ranks(b, tie_tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlignedCorrelation {
    pub r: f64,
    pub n: usize,
    /// Entities present in only one of the two inputs.
    pub dropped: usize,
}

/// Pearson correlation of two id-keyed score lists over their common ids.
pub fn correlate(a: &[(String, f64)], b: &[(String, f64)], transform_b: Transform) -> Result<AlignedCorrelation> {
    let bmap: HashMap<&str, f64> = b.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, v) in a {
        if let Some(&w) = bmap.get(k.as_str()) {
            let w = match transform_b {
                Transform::None => w,
                Transform::Log => {
                    if !(w > 0.0) {
                        return Err(Error::InvalidParameter(format!("log of nonpositive score {w} for {k}")));
                    }
                    w.ln()
                }
            };
            xs.push(*v);
            ys.push(w);
        }
    }
    let dropped = a.len() + b.len() - 2 * xs.len();
    if dropped > 0 {
        log::info!("correlation inner join dropped {dropped} unmatched entities");
    }
    Ok(AlignedCorrelation { r: pearson(&xs, &ys)?, n: xs.len(), dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub label: String,
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub grouping: String,
    pub rows: Vec<GroupRow>,
}

pub const UNCLASSIFIED: &str = "unclassified";

/// Unweighted mean and sd of scores per attribute value.
pub fn group_summary(scores: &[(String, f64)], grouping: &str, attribute: &Crosswalk) -> GroupSummary {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (code, s) in scores {
        let label = attribute.get(code).unwrap_or(UNCLASSIFIED).to_string();
        groups.entry(label).or_default().push(*s);
    }
    let rows = groups
        .into_iter()
        .map(|(label, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            GroupRow { label, count: v.len(), mean, sd }
        })
        .collect();
    GroupSummary { grouping: grouping.to_string(), rows }
}

impl GroupSummary {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([self.grouping.as_str(), "count", "mean", "sd"])?;
        for r in &self.rows {
            w.write_record([r.label.clone(), r.count.to_string(), r.mean.to_string(), r.sd.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).chain([self.grouping.len()]).max().unwrap_or(0);
        let mut s = format!("{:<width$}  {:>6}  {:>9}  {:>9}\n", self.grouping, "n", "mean", "sd");
        for r in &self.rows {
            let _ = writeln!(s, "{:<width$}  {:>6}  {:>9.3}  {:>9.3}", r.label, r.count, r.mean, r.sd);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub code: String,
    pub label: Option<String>,
    pub tag: Option<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedTable {
    pub top: Vec<RankedEntry>,
    pub bottom: Vec<RankedEntry>,
}

/// Top-n and bottom-n entities by score, both listed in descending score
/// order. `labels` maps codes to names, `tags` to e.g. traded/local.
pub fn top_bottom(
    scores: &[(String, f64)],
    n: usize,
    labels: Option<&Crosswalk>,
    tags: Option<&Crosswalk>,
) -> Result<RankedTable> {
    if n > scores.len() {
        return Err(Error::InvalidParameter(format!("requested top {n} of {} entities", scores.len())));
    }
    let mut sorted: Vec<&(String, f64)> = scores.iter().collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let entry = |rank: usize, (code, score): &(String, f64)| RankedEntry {
        rank,
        code: code.clone(),
        label: labels.and_then(|l| l.get(code)).map(str::to_string),
        tag: tags.and_then(|t| t.get(code)).map(str::to_string),
        score: *score,
    };
    let total = sorted.len();
    Ok(RankedTable {
        top: sorted[..n].iter().enumerate().map(|(k, e)| entry(k + 1, e)).collect(),
        bottom: sorted[total - n..].iter().enumerate().map(|(k, e)| entry(total - n + k + 1, e)).collect(),
    })
}

impl RankedTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["section", "rank", "code", "label", "tag", "score"])?;
        for (section, rows) in [("top", &self.top), ("bottom", &self.bottom)] {
            for e in rows {
                w.write_record([
                    section.to_string(),
                    e.rank.to_string(),
                    e.code.clone(),
                    e.label.clone().unwrap_or_default(),
                    e.tag.clone().unwrap_or_default(),
                    e.score.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
