//! Employment table ingestion: parsing, suppressed-cell imputation and
//! aggregation to the analysis geography and industry level.
//!
//! Codes (FIPS, CBSA, NAICS) only exist at the I/O boundary. Inside an
//! [`EmploymentPanel`] regions and industries are dense integer ids into
//! sorted catalogs, so identical inputs always produce identical ids.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::EmploymentMatrix;

/// Employment or the size-class symbol that replaced it. Exactly one of the
/// two exists for every record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmploymentValue {
    Count(u64),
    Suppressed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEmploymentRecord {
    pub year: i32,
    pub region_code: String,
    pub industry_code: String,
    pub value: EmploymentValue,
}

/// Column mapping for a delimited employment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub year: String,
    /// One or more columns concatenated to form the region code (CBP county
    /// files split FIPS into state and county parts).
    pub region: Vec<String>,
    pub industry: String,
    pub employment: String,
    pub flag: Option<String>,
    pub delimiter: char,
    /// Rows outside this range are rejected.
    pub years: Option<(i32, i32)>,
    /// Keep only industry codes made of exactly this many ASCII digits.
    /// Other rows (e.g. CBP's `44----` roll-ups) are counted as filtered.
    pub industry_digits: Option<usize>,
    /// Treat a literal `0` count that carries a flag as a suppressed cell,
    /// which is how CBP encodes suppression.
    pub zero_count_with_flag_is_suppressed: bool,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            year: "year".into(),
            region: vec!["region".into()],
            industry: "industry".into(),
            employment: "employment".into(),
            flag: Some("flag".into()),
            delimiter: ',',
            years: Some((2007, 2015)),
            industry_digits: None,
            zero_count_with_flag_is_suppressed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reject {
    /// 1-based line number in the source file, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTable {
    pub records: Vec<RawEmploymentRecord>,
    pub rejects: Vec<Reject>,
    pub filtered: usize,
}

fn delimiter_byte(c: char) -> Result<u8> {
    if c.is_ascii() {
        Ok(c as u8)
    } else {
        Err(Error::Schema(format!("delimiter {c:?} is not a single ASCII byte")))
    }
}

/// Parse a delimited employment table. Malformed rows end up in
/// [`ParsedTable::rejects`]; only a structurally unusable header is an error.
pub fn parse_employment_table<R: Read>(reader: R, schema: &Schema) -> Result<ParsedTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter_byte(schema.delimiter)?)
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    // an empty file has no header and no rows
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(ParsedTable::default());
    }

    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut missing = Vec::new();
    let mut need = |name: &str| {
        let pos = find(name);
        if pos.is_none() {
            missing.push(name.to_string());
        }
        pos.unwrap_or(0)
    };
    let year_col = need(&schema.year);
    let region_cols: Vec<usize> = schema.region.iter().map(|c| need(c)).collect();
    let industry_col = need(&schema.industry);
    let employment_col = need(&schema.employment);
    let flag_col = schema.flag.as_deref().map(&mut need);
    if schema.region.is_empty() {
        missing.push("<region>".into());
    }
    if !missing.is_empty() {
        return Err(Error::Schema(format!("missing mandatory columns {missing:?}")));
    }

    let year_range: Option<RangeInclusive<i32>> = schema.years.map(|(a, b)| a..=b);
    let mut out = ParsedTable::default();
    let mut seen: HashSet<(i32, String, String)> = HashSet::new();

    for (idx, row) in rdr.records().enumerate() {
        let line = idx as u64 + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.rejects.push(Reject { line, reason: e.to_string() });
                continue;
            }
        };
        let field = |i: usize| row.get(i).map(str::trim);
        let parsed = (|| -> std::result::Result<Option<RawEmploymentRecord>, String> {
            let year_s = field(year_col).ok_or("missing year field")?;
            let year: i32 = year_s.parse().map_err(|_| format!("bad year {year_s:?}"))?;
            if let Some(range) = &year_range {
                if !range.contains(&year) {
                    return Err(format!("year {year} outside {}..={}", range.start(), range.end()));
                }
            }
            let mut region_code = String::new();
            for &c in &region_cols {
                region_code.push_str(field(c).ok_or("missing region field")?);
            }
            if region_code.is_empty() {
                return Err("empty region code".into());
            }
            let industry_code = field(industry_col).ok_or("missing industry field")?.to_string();
            if industry_code.is_empty() {
                return Err("empty industry code".into());
            }
            if let Some(d) = schema.industry_digits {
                if industry_code.len() != d || !industry_code.bytes().all(|b| b.is_ascii_digit()) {
                    return Ok(None);
                }
            }
            let count = field(employment_col).unwrap_or("");
            let flag = flag_col.and_then(field).unwrap_or("");
            let value = match (count.is_empty(), flag.is_empty()) {
                (false, true) => EmploymentValue::Count(
                    count.parse().map_err(|_| format!("bad employment count {count:?}"))?,
                ),
                (true, false) => EmploymentValue::Suppressed(flag.to_string()),
                (false, false) if schema.zero_count_with_flag_is_suppressed && count == "0" => {
                    EmploymentValue::Suppressed(flag.to_string())
                }
                (false, false) => return Err("row carries both a count and a suppression flag".into()),
                (true, true) => return Err("row carries neither a count nor a suppression flag".into()),
            };
            Ok(Some(RawEmploymentRecord { year, region_code, industry_code, value }))
        })();
        match parsed {
            Ok(Some(rec)) => {
                let key = (rec.year, rec.region_code.clone(), rec.industry_code.clone());
                if !seen.insert(key) {
                    out.rejects.push(Reject {
                        line,
                        reason: format!(
                            "duplicate key ({}, {}, {})",
                            rec.year, rec.region_code, rec.industry_code
                        ),
                    });
                } else {
                    out.records.push(rec);
                }
            }
            Ok(None) => out.filtered += 1,
            Err(reason) => out.rejects.push(Reject { line, reason }),
        }
    }
    Ok(out)
}

pub fn parse_employment_file(path: &Path, schema: &Schema) -> Result<ParsedTable> {
    let file = File::open(path)?;
    parse_employment_table(file, schema)
}

// ---------------------------------------------------------------------------
// Size classes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenClassPolicy {
    /// Imputed value given explicitly in configuration.
    Explicit,
    /// Imputed value defaulted to the class lower bound.
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeClass {
    pub flag: String,
    pub lower: u64,
    /// `None` for the open-ended top class.
    pub upper: Option<u64>,
    pub imputed: f64,
}

impl SizeClass {
    /// Bounded class imputed at its exact arithmetic midpoint.
    pub fn midpoint(flag: &str, lower: u64, upper: u64) -> Self {
        SizeClass {
            flag: flag.to_string(),
            lower,
            upper: Some(upper),
            imputed: (lower as f64 + upper as f64) / 2.0,
        }
    }

    pub fn open(flag: &str, lower: u64, imputed: f64) -> Self {
        SizeClass { flag: flag.to_string(), lower, upper: None, imputed }
    }
}

/// Validated mapping from suppression flag to imputed employment.
#[derive(Debug, Clone, Serialize)]
pub struct SizeClassTable {
    classes: Vec<SizeClass>,
    open_class_policy: Option<OpenClassPolicy>,
}

impl SizeClassTable {
    pub fn new(mut classes: Vec<SizeClass>, open_class_policy: OpenClassPolicy) -> Result<Self> {
        let mut flags = HashSet::new();
        for c in &classes {
            if !flags.insert(c.flag.as_str()) {
                return Err(Error::SizeClass(format!("duplicate flag {:?}", c.flag)));
            }
            if !c.imputed.is_finite() || c.imputed < 0.0 {
                return Err(Error::SizeClass(format!(
                    "class {:?} has negative or non-finite imputed value {}",
                    c.flag, c.imputed
                )));
            }
            if let Some(u) = c.upper {
                if u < c.lower {
                    return Err(Error::SizeClass(format!("class {:?} has upper < lower", c.flag)));
                }
                if c.imputed < c.lower as f64 || c.imputed > u as f64 {
                    return Err(Error::SizeClass(format!(
                        "class {:?} imputes {} outside [{}, {}]",
                        c.flag, c.imputed, c.lower, u
                    )));
                }
            } else if c.imputed < c.lower as f64 {
                return Err(Error::SizeClass(format!(
                    "open class {:?} imputes {} below its lower bound {}",
                    c.flag, c.imputed, c.lower
                )));
            }
        }
        classes.sort_by_key(|c| c.lower);
        let open = classes.iter().filter(|c| c.upper.is_none()).count();
        if open > 1 {
            return Err(Error::SizeClass("more than one open-ended class".into()));
        }
        for w in classes.windows(2) {
            match w[0].upper {
                None => {
                    return Err(Error::SizeClass(format!(
                        "open-ended class {:?} is not the top class",
                        w[0].flag
                    )))
                }
                Some(u) if u >= w[1].lower => {
                    return Err(Error::SizeClass(format!(
                        "classes {:?} and {:?} overlap",
                        w[0].flag, w[1].flag
                    )))
                }
                _ => {}
            }
        }
        Ok(SizeClassTable {
            classes,
            open_class_policy: (open == 1).then_some(open_class_policy),
        })
    }

    /// The twelve CBP employment-size classes (A through M, no D), bounded
    /// classes at their midpoints and the 100,000+ class at its lower bound.
    pub fn cbp_default() -> Self {
        let bounded = [
            ("A", 0, 19),
            ("B", 20, 99),
            ("C", 100, 249),
            ("E", 250, 499),
            ("F", 500, 999),
            ("G", 1000, 2499),
            ("H", 2500, 4999),
            ("I", 5000, 9999),
            ("J", 10000, 24999),
            ("K", 25000, 49999),
            ("L", 50000, 99999),
        ];
        let mut classes: Vec<SizeClass> =
            bounded.iter().map(|&(f, l, u)| SizeClass::midpoint(f, l, u)).collect();
        classes.push(SizeClass::open("M", 100000, 100000.0));
        SizeClassTable::new(classes, OpenClassPolicy::LowerBound).expect("static table is valid")
    }

    /// Read `flag,lower,upper,imputed`. Empty `upper` marks the open class;
    /// empty `imputed` means midpoint for bounded classes and is an error for
    /// the open class unless it reads `lower`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut classes = Vec::new();
        let mut policy = OpenClassPolicy::Explicit;
        for row in rdr.records() {
            let row = row?;
            let get = |i: usize| row.get(i).unwrap_or("");
            let flag = get(0);
            let lower: u64 = get(1)
                .parse()
                .map_err(|_| Error::SizeClass(format!("bad lower bound for {flag:?}")))?;
            let upper = match get(2) {
                "" => None,
                s => Some(s.parse::<u64>().map_err(|_| {
                    Error::SizeClass(format!("bad upper bound for {flag:?}"))
                })?),
            };
            let imputed = match (get(3), upper) {
                ("", Some(u)) => (lower as f64 + u as f64) / 2.0,
                ("", None) => {
                    return Err(Error::SizeClass(format!(
                        "open-ended class {flag:?} needs an explicit imputed value"
                    )))
                }
                ("lower", None) => {
                    policy = OpenClassPolicy::LowerBound;
                    lower as f64
                }
                (s, _) => s
                    .parse()
                    .map_err(|_| Error::SizeClass(format!("bad imputed value for {flag:?}")))?,
            };
            classes.push(SizeClass { flag: flag.to_string(), lower, upper, imputed });
        }
        SizeClassTable::new(classes, policy)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_reader(File::open(path)?)
    }

    pub fn imputed(&self, flag: &str) -> Option<f64> {
        self.classes.iter().find(|c| c.flag == flag).map(|c| c.imputed)
    }

    pub fn classes(&self) -> &[SizeClass] {
        &self.classes
    }

    pub fn open_class_policy(&self) -> Option<OpenClassPolicy> {
        self.open_class_policy
    }
}

// ---------------------------------------------------------------------------
// Crosswalks

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrosswalkKind {
    Geographic,
    Industry,
    /// Named attribute, e.g. `traded_local` or `metro_class`.
    Attribute(String),
}

/// A function from source codes to target codes (or attribute values).
#[derive(Debug, Clone, PartialEq)]
pub struct Crosswalk {
    pub kind: CrosswalkKind,
    mapping: BTreeMap<String, String>,
}

impl Crosswalk {
    pub fn new<I, S, T>(kind: CrosswalkKind, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut mapping = BTreeMap::new();
        for (s, t) in pairs {
            let (s, t) = (s.into(), t.into());
            match mapping.get(&s) {
                Some(prev) if *prev != t => {
                    return Err(Error::Crosswalk(format!(
                        "{s:?} maps to both {prev:?} and {t:?}"
                    )))
                }
                _ => {
                    mapping.insert(s, t);
                }
            }
        }
        Ok(Crosswalk { kind, mapping })
    }

    pub fn identity<I: IntoIterator<Item = String>>(kind: CrosswalkKind, codes: I) -> Self {
        Crosswalk { kind, mapping: codes.into_iter().map(|c| (c.clone(), c)).collect() }
    }

    pub fn get(&self, code: &str) -> Option<&str> {
        self.mapping.get(code).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.mapping.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    /// Two-column `source,target` file with a header row.
    pub fn from_reader<R: Read>(kind: CrosswalkKind, reader: R, delimiter: char) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter_byte(delimiter)?)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut pairs = Vec::new();
        for row in rdr.records() {
            let row = row?;
            if row.len() < 2 {
                return Err(Error::Crosswalk(format!("row {:?} has fewer than two columns", row)));
            }
            pairs.push((row[0].to_string(), row[1].to_string()));
        }
        Crosswalk::new(kind, pairs)
    }

    pub fn from_path(kind: CrosswalkKind, path: &Path, delimiter: char) -> Result<Self> {
        Self::from_reader(kind, File::open(path)?, delimiter)
    }
}

/// Read a three-column `code,attribute,value` file into one crosswalk per
/// attribute name.
pub fn read_attribute_crosswalks<R: Read>(
    reader: R,
    delimiter: char,
) -> Result<BTreeMap<String, Crosswalk>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter_byte(delimiter)?)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut by_attr: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() < 3 {
            return Err(Error::Crosswalk(format!("row {:?} has fewer than three columns", row)));
        }
        by_attr
            .entry(row[1].to_string())
            .or_default()
            .push((row[0].to_string(), row[2].to_string()));
    }
    by_attr
        .into_iter()
        .map(|(name, pairs)| {
            let cw = Crosswalk::new(CrosswalkKind::Attribute(name.clone()), pairs)?;
            Ok((name, cw))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Panel

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CatalogEntry {
    pub code: String,
    pub attributes: BTreeMap<String, String>,
}

/// Sorted code catalog; ids are positions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
    index: HashMap<String, usize>,
}

impl Catalog {
    fn from_codes(codes: BTreeSet<String>) -> Self {
        let entries: Vec<CatalogEntry> =
            codes.into_iter().map(|code| CatalogEntry { code, attributes: BTreeMap::new() }).collect();
        let index = entries.iter().enumerate().map(|(i, e)| (e.code.clone(), i)).collect();
        Catalog { entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn code(&self, id: usize) -> &str {
        &self.entries[id].code
    }

    pub fn id(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    /// Attach attribute values from a crosswalk; codes it does not cover are
    /// left without the attribute.
    pub fn annotate(&mut self, crosswalk: &Crosswalk) {
        let CrosswalkKind::Attribute(name) = &crosswalk.kind else { return };
        for e in &mut self.entries {
            if let Some(v) = crosswalk.get(&e.code) {
                e.attributes.insert(name.clone(), v.to_string());
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelRecord {
    pub year: i32,
    pub region: usize,
    pub industry: usize,
    pub employment: f64,
    /// Part of `employment` that came from size-class imputation.
    pub imputed_employment: f64,
}

impl PanelRecord {
    pub fn is_imputed(&self) -> bool {
        self.imputed_employment > 0.0
    }
}

/// Clean long-form employment panel, keyed uniquely by (year, region, industry).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmploymentPanel {
    records: Vec<PanelRecord>,
    regions: Catalog,
    industries: Catalog,
}

/// Accumulates cells by code, summing duplicates.
#[derive(Debug, Default)]
struct PanelBuilder {
    cells: BTreeMap<(i32, String, String), (f64, f64)>,
    regions: BTreeSet<String>,
    industries: BTreeSet<String>,
}

impl PanelBuilder {
    fn add(&mut self, year: i32, region: &str, industry: &str, employment: f64, imputed: f64) {
        self.regions.insert(region.to_string());
        self.industries.insert(industry.to_string());
        let cell = self
            .cells
            .entry((year, region.to_string(), industry.to_string()))
            .or_insert((0.0, 0.0));
        cell.0 += employment;
        cell.1 += imputed;
    }

    fn build(self) -> EmploymentPanel {
        let regions = Catalog::from_codes(self.regions);
        let industries = Catalog::from_codes(self.industries);
        let records = self
            .cells
            .into_iter()
            .map(|((year, r, i), (employment, imputed_employment))| PanelRecord {
                year,
                region: regions.index[&r],
                industry: industries.index[&i],
                employment,
                imputed_employment,
            })
            .collect();
        EmploymentPanel { records, regions, industries }
    }
}

impl EmploymentPanel {
    pub fn records(&self) -> &[PanelRecord] {
        &self.records
    }

    pub fn regions(&self) -> &Catalog {
        &self.regions
    }

    pub fn industries(&self) -> &Catalog {
        &self.industries
    }

    pub fn regions_mut(&mut self) -> &mut Catalog {
        &mut self.regions
    }

    pub fn industries_mut(&mut self) -> &mut Catalog {
        &mut self.industries
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn years(&self) -> Vec<i32> {
        let set: BTreeSet<i32> = self.records.iter().map(|r| r.year).collect();
        set.into_iter().collect()
    }

    pub fn total_employment(&self) -> f64 {
        self.records.iter().map(|r| r.employment).sum()
    }

    pub fn imputed_employment(&self) -> f64 {
        self.records.iter().map(|r| r.imputed_employment).sum()
    }

    fn rebuild<F>(&self, mut key: F) -> EmploymentPanel
    where
        F: FnMut(&PanelRecord) -> Option<(String, String)>,
    {
        let mut b = PanelBuilder::default();
        for rec in &self.records {
            if let Some((r, i)) = key(rec) {
                b.add(rec.year, &r, &i, rec.employment, rec.imputed_employment);
            }
        }
        b.build()
    }

    /// Drop industries whose code starts with any of `prefixes`.
    pub fn exclude_industries(&self, prefixes: &[String]) -> EmploymentPanel {
        self.rebuild(|rec| {
            let code = self.industries.code(rec.industry);
            (!prefixes.iter().any(|p| code.starts_with(p.as_str())))
                .then(|| (self.regions.code(rec.region).to_string(), code.to_string()))
        })
    }

    /// Keep only the given years.
    pub fn select_years(&self, years: &[i32]) -> EmploymentPanel {
        self.rebuild(|rec| {
            years.contains(&rec.year).then(|| {
                (
                    self.regions.code(rec.region).to_string(),
                    self.industries.code(rec.industry).to_string(),
                )
            })
        })
    }

    /// Canonical serialization: `year,region,industry,employment,imputed`,
    /// sorted by year then region code then industry code.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["year", "region", "industry", "employment", "imputed"])?;
        for rec in &self.records {
            w.write_record([
                rec.year.to_string(),
                self.regions.code(rec.region).to_string(),
                self.industries.code(rec.industry).to_string(),
                rec.employment.to_string(),
                if rec.is_imputed() { "1" } else { "0" }.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`write_csv`](Self::write_csv). A cell flagged imputed is
    /// read back as fully imputed.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut b = PanelBuilder::default();
        let mut seen = HashSet::new();
        for (n, row) in rdr.records().enumerate() {
            let row = row?;
            let bad = |what: &str| Error::Schema(format!("panel row {}: bad {what}", n + 2));
            if row.len() != 5 {
                return Err(bad("field count"));
            }
            let year: i32 = row[0].parse().map_err(|_| bad("year"))?;
            let employment: f64 = row[3].parse().map_err(|_| bad("employment"))?;
            if !(employment >= 0.0) {
                return Err(bad("employment"));
            }
            let imputed = match &row[4] {
                "0" => 0.0,
                "1" => employment,
                _ => return Err(bad("imputed flag")),
            };
            if !seen.insert((year, row[1].to_string(), row[2].to_string())) {
                return Err(bad("duplicate key"));
            }
            b.add(year, &row[1], &row[2], employment, imputed);
        }
        Ok(b.build())
    }
}

/// Replace every suppression flag with its size-class imputed value.
pub fn impute_suppressed(
    records: &[RawEmploymentRecord],
    table: &SizeClassTable,
) -> Result<EmploymentPanel> {
    let mut b = PanelBuilder::default();
    let mut seen = HashSet::new();
    for rec in records {
        if !seen.insert((rec.year, rec.region_code.as_str(), rec.industry_code.as_str())) {
            return Err(Error::Schema(format!(
                "duplicate record ({}, {}, {})",
                rec.year, rec.region_code, rec.industry_code
            )));
        }
        let (emp, imputed) = match &rec.value {
            EmploymentValue::Count(n) => (*n as f64, 0.0),
            EmploymentValue::Suppressed(flag) => {
                let v = table.imputed(flag).ok_or_else(|| Error::UnknownFlag(flag.clone()))?;
                (v, v)
            }
        };
        b.add(rec.year, &rec.region_code, &rec.industry_code, emp, imputed);
    }
    Ok(b.build())
}

/// Sum counties into CBSAs. Counties absent from the crosswalk stay as their
/// own regions.
pub fn aggregate_geography(panel: &EmploymentPanel, crosswalk: &Crosswalk) -> Result<EmploymentPanel> {
    if crosswalk.kind != CrosswalkKind::Geographic {
        return Err(Error::Crosswalk(format!(
            "expected a geographic crosswalk, got {:?}",
            crosswalk.kind
        )));
    }
    Ok(panel.rebuild(|rec| {
        let county = panel.regions.code(rec.region);
        let target = crosswalk.get(county).unwrap_or(county);
        Some((target.to_string(), panel.industries.code(rec.industry).to_string()))
    }))
}

#[derive(Debug, Clone, Copy)]
pub enum IndustryLevel<'a> {
    /// Truncate codes to this many leading characters (2..=6).
    Digits(usize),
    Crosswalk(&'a Crosswalk),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodeError {
    pub code: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct IndustryAggregation {
    pub panel: EmploymentPanel,
    /// Codes that could not be mapped; their records are dropped.
    pub errors: Vec<CodeError>,
}

pub fn aggregate_industry(panel: &EmploymentPanel, level: IndustryLevel<'_>) -> Result<IndustryAggregation> {
    match level {
        IndustryLevel::Digits(d) if !(2..=6).contains(&d) => {
            return Err(Error::InvalidParameter(format!("digit level {d} outside 2..=6")))
        }
        IndustryLevel::Crosswalk(cw) if cw.kind != CrosswalkKind::Industry => {
            return Err(Error::Crosswalk(format!("expected an industry crosswalk, got {:?}", cw.kind)))
        }
        _ => {}
    }
    let mut errors = BTreeMap::new();
    let out = panel.rebuild(|rec| {
        let code = panel.industries.code(rec.industry);
        let target = match level {
            IndustryLevel::Digits(d) => {
                if code.chars().count() < d {
                    errors.insert(code.to_string(), format!("code shorter than {d} digits"));
                    return None;
                }
                code.chars().take(d).collect::<String>()
            }
            IndustryLevel::Crosswalk(cw) => match cw.get(code) {
                Some(t) => t.to_string(),
                None => {
                    errors.insert(code.to_string(), "code not in industry crosswalk".to_string());
                    return None;
                }
            },
        };
        Some((panel.regions.code(rec.region).to_string(), target))
    });
    Ok(IndustryAggregation {
        panel: out,
        errors: errors.into_iter().map(|(code, reason)| CodeError { code, reason }).collect(),
    })
}

/// Region × industry employment for one year. Only regions and industries
/// with a record in that year get a row or column; absent pairs are zero.
pub fn build_matrix(panel: &EmploymentPanel, year: i32) -> Result<EmploymentMatrix> {
    let recs: Vec<&PanelRecord> = panel.records.iter().filter(|r| r.year == year).collect();
    if recs.is_empty() {
        return Err(Error::YearAbsent { requested: year, available: panel.years() });
    }
    let region_ids: BTreeSet<usize> = recs.iter().map(|r| r.region).collect();
    let industry_ids: BTreeSet<usize> = recs.iter().map(|r| r.industry).collect();
    let row_of: HashMap<usize, usize> = region_ids.iter().enumerate().map(|(p, &id)| (id, p)).collect();
    let col_of: HashMap<usize, usize> = industry_ids.iter().enumerate().map(|(p, &id)| (id, p)).collect();
    let mut values = DMatrix::zeros(region_ids.len(), industry_ids.len());
    for r in recs {
        values[(row_of[&r.region], col_of[&r.industry])] += r.employment;
    }
    Ok(EmploymentMatrix {
        values,
        regions: region_ids.iter().map(|&id| panel.regions.code(id).to_string()).collect(),
        industries: industry_ids.iter().map(|&id| panel.industries.code(id).to_string()).collect(),
    })
}
