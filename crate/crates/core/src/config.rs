//! Run configuration: one TOML file, overridable field by field from the
//! command line. Relative paths in a config file resolve against the file's
//! directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::complexity::IndexKind;
use crate::error::{Error, Result};
use crate::ingest::Schema;
use crate::matrix::Strategy;
use crate::regress::ModelSpec;
use crate::synth::CapabilityParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeographyLevel {
    /// Counties folded into metro and micro areas; counties outside any
    /// area stay as themselves.
    #[default]
    CbsaPlusCounties,
    County,
}

impl FromStr for GeographyLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cbsa_plus_counties" | "cbsa" => Ok(Self::CbsaPlusCounties),
            "county" => Ok(Self::County),
            _ => Err(Error::Config(format!("unknown geography level {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndustryLevelConfig {
    Naics(usize),
    #[default]
    BcdSubcluster,
}

impl FromStr for IndustryLevelConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "bcd_subcluster" {
            return Ok(Self::BcdSubcluster);
        }
        match s.strip_prefix("naics").and_then(|d| d.parse().ok()) {
            Some(d) if (2..=6).contains(&d) => Ok(Self::Naics(d)),
            _ => Err(Error::Config(format!("unknown industry level {s:?}; expected naics2..naics6 or bcd_subcluster"))),
        }
    }
}

impl std::fmt::Display for IndustryLevelConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Naics(d) => write!(f, "naics{d}"),
            Self::BcdSubcluster => f.write_str("bcd_subcluster"),
        }
    }
}

impl Serialize for IndustryLevelConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IndustryLevelConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw employment tables, concatenated in order.
    pub employment: Vec<PathBuf>,
    /// Size-class table; the built-in CBP table when absent.
    pub size_classes: Option<PathBuf>,
    /// County → CBSA crosswalk.
    pub geography_crosswalk: Option<PathBuf>,
    /// NAICS → subcluster crosswalk.
    pub industry_crosswalk: Option<PathBuf>,
    /// Three-column attribute file (code, attribute, value).
    pub attributes: Option<PathBuf>,
    /// Merged analysis CSV for regressions.
    pub analysis: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub cutoff: f64,
    /// Fitness convergence tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// ECI power-iteration tolerance.
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
    /// Largest region count solved with a dense eigendecomposition.
    pub dense_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { cutoff: 50.0, tol: 1e-8, max_iter: 1000, eigen_tol: 1e-10, eigen_max_iter: 10_000, dense_limit: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    /// Year to diagnose; the last configured year when absent.
    pub year: Option<i32>,
    /// Any of "svg", "csv".
    pub heatmap_formats: Vec<String>,
    pub top_n: usize,
    /// Attribute names used to group industry scores.
    pub industry_groupings: Vec<String>,
    /// Attribute names used to group region scores.
    pub region_groupings: Vec<String>,
    /// Attribute holding industry names for ranked tables.
    pub label_attribute: Option<String>,
    /// Attribute holding the traded/local tag for ranked tables.
    pub tag_attribute: Option<String>,
    /// Render a heatmap of this triplet file instead of the panel matrices.
    pub matrix: Option<PathBuf>,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig {
            year: None,
            heatmap_formats: vec!["svg".into(), "csv".into()],
            top_n: 20,
            industry_groupings: vec![],
            region_groupings: vec![],
            label_attribute: None,
            tag_attribute: None,
            matrix: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressConfig {
    pub entity_column: String,
    pub year_column: String,
    pub models: Vec<ModelSpec>,
}

impl Default for RegressConfig {
    fn default() -> Self {
        RegressConfig { entity_column: "region".into(), year_column: "year".into(), models: vec![] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Nested,
    #[default]
    Capability,
}

impl FromStr for SynthKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nested" => Ok(Self::Nested),
            "capability" => Ok(Self::Capability),
            _ => Err(Error::Config(format!("unknown synth kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SynthConfig {
    pub kind: SynthKind,
    #[serde(flatten)]
    pub params: CapabilityParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub schema: Schema,
    /// Years to compute; every panel year when empty.
    pub years: Vec<i32>,
    pub geography: GeographyLevel,
    pub industry: IndustryLevelConfig,
    /// Industry code prefixes dropped after aggregation.
    pub exclude_industries: Vec<String>,
    pub strategies: Vec<Strategy>,
    pub indices: Vec<IndexKind>,
    pub solver: SolverConfig,
    pub diagnose: DiagnoseConfig,
    pub regress: RegressConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            schema: Schema::default(),
            years: vec![],
            geography: GeographyLevel::default(),
            industry: IndustryLevelConfig::default(),
            exclude_industries: vec![],
            strategies: vec![Strategy::Cm],
            indices: vec![IndexKind::Eci, IndexKind::Fi],
            solver: SolverConfig::default(),
            diagnose: DiagnoseConfig::default(),
            regress: RegressConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Load a config file and resolve its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|_| Error::MissingFile(path.to_path_buf()))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut cfg.paths;
        for f in &mut p.employment {
            rebase(base, f);
        }
        for f in [
            &mut p.size_classes,
            &mut p.geography_crosswalk,
            &mut p.industry_crosswalk,
            &mut p.attributes,
            &mut p.analysis,
            &mut p.output,
        ]
        .into_iter()
        .flatten()
        {
            rebase(base, f);
        }
        if let Some(m) = &mut cfg.diagnose.matrix {
            rebase(base, m);
        }
        Ok(cfg)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths.output.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Checks shared by every command.
    pub fn validate_common(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("strategies list is empty".into()));
        }
        if self.indices.is_empty() {
            return Err(Error::Config("indices list is empty".into()));
        }
        let s = &self.solver;
        if !(s.cutoff.is_finite() && s.cutoff >= 0.0) {
            return Err(Error::Config(format!("cutoff must be a nonnegative number, got {}", s.cutoff)));
        }
        if !(s.tol > 0.0 && s.eigen_tol > 0.0) || s.max_iter == 0 || s.eigen_max_iter == 0 {
            return Err(Error::Config("solver tolerances and iteration caps must be positive".into()));
        }
        Ok(())
    }

    /// Checks for `ingest`: every referenced input exists.
    pub fn validate_ingest(&self) -> Result<()> {
        self.validate_common()?;
        let p = &self.paths;
        if p.employment.is_empty() {
            return Err(Error::Config("no employment files configured".into()));
        }
        for f in &p.employment {
            require_file(f)?;
        }
        if let Some(f) = &p.size_classes {
            require_file(f)?;
        }
        match (self.geography, &p.geography_crosswalk) {
            (GeographyLevel::CbsaPlusCounties, None) => {
                return Err(Error::Config("geography cbsa_plus_counties needs paths.geography_crosswalk".into()))
            }
            (_, Some(f)) => require_file(f)?,
            _ => {}
        }
        match (self.industry, &p.industry_crosswalk) {
            (IndustryLevelConfig::BcdSubcluster, None) => {
                return Err(Error::Config("industry bcd_subcluster needs paths.industry_crosswalk".into()))
            }
            (_, Some(f)) => require_file(f)?,
            _ => {}
        }
        Ok(())
    }
}

pub fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingFile(path.to_path_buf()))
    }
}

/// Parse `2007-2015`, `2007,2009,2011` or a mix of both.
pub fn parse_years(s: &str) -> Result<Vec<i32>> {
    let bad = || Error::Config(format!("cannot parse years {s:?}"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (i32, i32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_example_parses() {
        let cfg = RunConfig::from_toml(include_str!("../config/example.toml")).unwrap();
        assert_eq!(cfg.years.len(), 9);
        assert_eq!(cfg.regress.models.len(), 2);
        assert_eq!(cfg.synth.params.n_regions, 200);
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file() {
        let cfg = RunConfig::from_toml(
            r#"
            strategies = ["BM", "CM"]
            industry = "naics4"
            geography = "county"
            [solver]
            cutoff = 10
            [[regress.models]]
            kind = "cross_section"
            outcome = "income"
            year = 2015
            "#,
        )
        .unwrap();
        assert_eq!(cfg.strategies, vec![Strategy::Bm, Strategy::Cm]);
        assert_eq!(cfg.industry, IndustryLevelConfig::Naics(4));
        assert_eq!(cfg.solver.cutoff, 10.0);
        assert_eq!(cfg.solver.tol, 1e-8);
        assert_eq!(cfg.regress.models[0].year, Some(2015));
        assert!(RunConfig::from_toml("strategy = []").is_err());
        assert!(RunConfig::from_toml("industry = \"naics7\"").is_err());
    }

    #[test]
    fn empty_lists_rejected() {
        let cfg = RunConfig { indices: vec![], ..Default::default() };
        assert!(cfg.validate_common().is_err());
    }

    #[test]
    fn year_lists() {
        assert_eq!(parse_years("2007-2009").unwrap(), vec![2007, 2008, 2009]);
        assert_eq!(parse_years("2015, 2007,2007").unwrap(), vec![2007, 2015]);
        assert!(parse_years("2009-2007").is_err());
        assert!(parse_years("x").is_err());
    }

    #[test]
    fn missing_crosswalk_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        let emp = dir.path().join("e.csv");
        std::fs::write(&emp, "year,region,industry,employment,flag\n").unwrap();
        let mut cfg = RunConfig::default();
        cfg.paths.employment = vec![emp];
        cfg.industry = IndustryLevelConfig::Naics(2);
        assert!(matches!(cfg.validate_ingest(), Err(Error::Config(_))));
        cfg.paths.geography_crosswalk = Some(dir.path().join("nope.csv"));
        assert!(matches!(cfg.validate_ingest(), Err(Error::MissingFile(_))));
        cfg.geography = GeographyLevel::County;
        cfg.paths.geography_crosswalk = None;
        assert!(cfg.validate_ingest().is_ok());
    }
}
