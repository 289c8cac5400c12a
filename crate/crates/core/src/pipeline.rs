//! Command implementations behind the `regcx` binary.
//!
//! Every command validates its inputs before writing anything, writes only
//! under `<output>/<command>/`, and finishes by writing a `manifest.json`
//! with SHA-256 hashes of its inputs and outputs.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::complexity::{self, ComplexityScores, EciOptions, FitnessOptions, IndexKind};
use crate::config::{require_file, GeographyLevel, IndustryLevelConfig, RunConfig, SynthKind};
use crate::diagnostics::{self, HeatmapFormat, Transform};
use crate::error::{Error, Result};
use crate::ingest::{
    self, read_attribute_crosswalks, Crosswalk, CrosswalkKind, EmploymentPanel, IndustryLevel, SizeClassTable,
};
use crate::matrix::{self, PruneReport, Strategy, StrategyParams};
use crate::regress::{self, Dataset};
use crate::synth;

/// Failure of a whole command, split by exit-code class.
#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    /// Bad configuration or missing inputs; nothing was written.
    #[error("validation failed: {0}")]
    Validation(Error),
    #[error("{0}")]
    Runtime(Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Validation(_) => 2,
            CommandError::Runtime(_) => 1,
        }
    }
}

type CmdResult<T> = std::result::Result<T, CommandError>;

fn invalid<T>(r: Result<T>) -> CmdResult<T> {
    r.map_err(CommandError::Validation)
}

fn runtime<T>(r: Result<T>) -> CmdResult<T> {
    r.map_err(CommandError::Runtime)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub seeds: Vec<u64>,
    pub rng: Option<String>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

impl CommandOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.manifest.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Output directory for one command plus the files written so far.
struct Outputs {
    root: PathBuf,
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn create(cfg: &RunConfig, command: &str) -> Result<Self> {
        let root = cfg.output_dir();
        let dir = root.join(command);
        fs::create_dir_all(&dir)?;
        Ok(Outputs { root, dir, files: vec![] })
    }

    fn write_with<F>(&mut self, name: &str, f: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> Result<()>,
    {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(fs::File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.files.push(path.clone());
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        self.write_with(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    fn finish(
        mut self,
        command: &str,
        cfg: &RunConfig,
        inputs: &[PathBuf],
        seeds: Vec<u64>,
        rng: Option<String>,
        failures: Vec<String>,
    ) -> Result<CommandOutcome> {
        let rel = |p: &Path| p.strip_prefix(&self.root).unwrap_or(p).to_string_lossy().replace('\\', "/");
        self.files.sort();
        self.files.dedup();
        let outputs = self
            .files
            .iter()
            .map(|p| Ok(FileHash { path: rel(p), sha256: hash_file(p)? }))
            .collect::<Result<Vec<_>>>()?;
        let mut input_hashes = inputs
            .iter()
            .map(|p| Ok(FileHash { path: p.to_string_lossy().into_owned(), sha256: hash_file(p)? }))
            .collect::<Result<Vec<_>>>()?;
        input_hashes.sort_by(|a, b| a.path.cmp(&b.path));
        input_hashes.dedup();
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(&serde_json::to_vec(cfg)?),
            inputs: input_hashes,
            outputs,
            seeds,
            rng,
            failures,
        };
        let manifest_path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&manifest_path, text)?;
        Ok(CommandOutcome { manifest_path, manifest })
    }
}

/// Totals reported by `ingest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: Vec<FileReport>,
    pub years: Vec<i32>,
    pub n_regions: usize,
    pub n_industries: usize,
    pub total_employment: f64,
    pub imputed_employment: f64,
    pub imputed_share: f64,
    pub geography: GeographyLevel,
    pub industry: String,
    pub unmapped_industry_codes: usize,
    pub excluded_industry_prefixes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    pub path: String,
    pub records: usize,
    pub rejects: usize,
    pub filtered: usize,
}

pub fn panel_path(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir().join("ingest").join("panel.csv")
}

/// Parse, impute, aggregate and write the canonical panel.
pub fn run_ingest(cfg: &RunConfig) -> CmdResult<CommandOutcome> {
    invalid(cfg.validate_ingest())?;
    let p = &cfg.paths;
    let table = match &p.size_classes {
        Some(path) => invalid(SizeClassTable::from_path(path))?,
        None => SizeClassTable::cbp_default(),
    };
    let delim = cfg.schema.delimiter;
    let geo = match (cfg.geography, &p.geography_crosswalk) {
        (GeographyLevel::CbsaPlusCounties, Some(path)) => {
            Some(invalid(Crosswalk::from_path(CrosswalkKind::Geographic, path, delim))?)
        }
        _ => None,
    };
    let industry_cw = match (cfg.industry, &p.industry_crosswalk) {
        (IndustryLevelConfig::BcdSubcluster, Some(path)) => {
            Some(invalid(Crosswalk::from_path(CrosswalkKind::Industry, path, delim))?)
        }
        _ => None,
    };
    let mut records = Vec::new();
    let mut files = Vec::new();
    let mut all_rejects = Vec::new();
    for path in &p.employment {
        let parsed = invalid(ingest::parse_employment_file(path, &cfg.schema))?;
        files.push(FileReport {
            path: path.to_string_lossy().into_owned(),
            records: parsed.records.len(),
            rejects: parsed.rejects.len(),
            filtered: parsed.filtered,
        });
        for r in &parsed.rejects {
            all_rejects.push((path.to_string_lossy().into_owned(), r.clone()));
        }
        records.extend(parsed.records);
    }

    let panel = runtime(ingest::impute_suppressed(&records, &table))?;
    let panel = match &geo {
        Some(cw) => runtime(ingest::aggregate_geography(&panel, cw))?,
        None => panel,
    };
    let level = match (&cfg.industry, &industry_cw) {
        (IndustryLevelConfig::Naics(d), _) => IndustryLevel::Digits(*d),
        (IndustryLevelConfig::BcdSubcluster, Some(cw)) => IndustryLevel::Crosswalk(cw),
        (IndustryLevelConfig::BcdSubcluster, None) => unreachable!("checked by validate_ingest"),
    };
    let agg = runtime(ingest::aggregate_industry(&panel, level))?;
    if !agg.errors.is_empty() {
        log::warn!("{} industry codes could not be mapped and were dropped", agg.errors.len());
    }
    let mut panel = agg.panel;
    if !cfg.exclude_industries.is_empty() {
        panel = panel.exclude_industries(&cfg.exclude_industries);
    }
    if !cfg.years.is_empty() {
        panel = panel.select_years(&cfg.years);
    }

    let total = panel.total_employment();
    let imputed = panel.imputed_employment();
    let report = IngestReport {
        files,
        years: panel.years(),
        n_regions: panel.regions().len(),
        n_industries: panel.industries().len(),
        total_employment: total,
        imputed_employment: imputed,
        imputed_share: if total > 0.0 { imputed / total } else { 0.0 },
        geography: cfg.geography,
        industry: cfg.industry.to_string(),
        unmapped_industry_codes: agg.errors.len(),
        excluded_industry_prefixes: cfg.exclude_industries.clone(),
    };
    log::info!(
        "ingested {} records: {:.0} employees, {:.0} imputed ({:.1}%)",
        records.len(),
        total,
        imputed,
        100.0 * report.imputed_share
    );

    let mut out = runtime(Outputs::create(cfg, "ingest"))?;
    runtime(out.write_with("panel.csv", |w| panel.write_csv(w)))?;
    runtime(out.write_json("report.json", &report))?;
    runtime(out.write_with("rejects.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["file", "line", "reason"])?;
        for (f, r) in &all_rejects {
            c.write_record([f.as_str(), &r.line.to_string(), &r.reason])?;
        }
        c.flush()?;
        Ok(())
    }))?;
    runtime(out.write_with("unmapped_industries.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["code", "reason"])?;
        for e in &agg.errors {
            c.write_record([&e.code, &e.reason])?;
        }
        c.flush()?;
        Ok(())
    }))?;
    let mut inputs = p.employment.clone();
    inputs.extend([&p.size_classes, &p.geography_crosswalk, &p.industry_crosswalk].into_iter().flatten().cloned());
    runtime(out.finish("ingest", cfg, &inputs, vec![], None, vec![]))
}

fn load_panel(cfg: &RunConfig) -> CmdResult<(EmploymentPanel, PathBuf)> {
    let path = panel_path(cfg);
    invalid(require_file(&path))?;
    let file = runtime(fs::File::open(&path).map_err(Error::from))?;
    let panel = runtime(EmploymentPanel::read_csv(BufReader::new(file)))?;
    Ok((panel, path))
}

fn target_years(cfg: &RunConfig, panel: &EmploymentPanel) -> Vec<i32> {
    if cfg.years.is_empty() {
        panel.years()
    } else {
        cfg.years.clone()
    }
}

/// Metadata written next to each score file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMetadata {
    pub index: IndexKind,
    pub strategy: Strategy,
    pub year: i32,
    pub params: StrategyParams,
    pub n_regions: usize,
    pub n_industries: usize,
    pub convergence: complexity::Convergence,
    pub solver: complexity::SolverPath,
    pub second_eigenvalue: Option<f64>,
    pub sign_convention: String,
    pub prune_report: PruneReport,
}

pub fn score_stem(year: i32, strategy: Strategy, index: IndexKind) -> String {
    format!("{year}_{}_{}", strategy.as_str(), index.as_str())
}

pub fn scores_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir().join("compute")
}

/// Score file layout: `kind,code,score` with kind `region` or `industry`.
pub fn write_scores_csv<W: Write>(
    scores: &ComplexityScores,
    regions: &[String],
    industries: &[String],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["kind", "code", "score"])?;
    for (code, s) in regions.iter().zip(&scores.region_scores) {
        w.write_record(["region", code, &s.to_string()])?;
    }
    for (code, s) in industries.iter().zip(&scores.industry_scores) {
        w.write_record(["industry", code, &s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub type ScoreList = Vec<(String, f64)>;

/// Inverse of [`write_scores_csv`]: (region scores, industry scores).
pub fn read_scores_csv<R: std::io::Read>(reader: R) -> Result<(ScoreList, ScoreList)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let (mut regions, mut industries) = (Vec::new(), Vec::new());
    for (n, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = || Error::Schema(format!("score row {}: malformed", n + 2));
        let score: f64 = row.get(2).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let code = row.get(1).ok_or_else(bad)?.to_string();
        match row.get(0) {
            Some("region") => regions.push((code, score)),
            Some("industry") => industries.push((code, score)),
            _ => return Err(bad()),
        }
    }
    Ok((regions, industries))
}

fn sign_convention(index: IndexKind) -> &'static str {
    match index {
        IndexKind::Eci => "region scores covary nonnegatively with diversity; industry scores with minus ubiquity",
        IndexKind::Fi => "positive fixed point, each side normalized to mean 1",
    }
}

struct ComboOutput {
    stem: String,
    csv: Vec<u8>,
    json: Vec<u8>,
}

fn compute_combo(
    panel: &EmploymentPanel,
    year: i32,
    strategy: Strategy,
    indices: &[IndexKind],
    cfg: &RunConfig,
) -> Vec<std::result::Result<ComboOutput, String>> {
    let fail = |index: IndexKind, e: Error| Err(format!("{}: {e}", score_stem(year, strategy, index)));
    let params = StrategyParams { cutoff: cfg.solver.cutoff };
    let prepared = ingest::build_matrix(panel, year)
        .and_then(|x| matrix::build_input_matrix(&x, strategy, params))
        .and_then(matrix::prune_empty);
    let (m, report) = match prepared {
        Ok(v) => v,
        Err(e) => {
            let msg = e.to_string();
            return indices.iter().map(|&i| fail(i, Error::DegenerateNetwork(msg.clone()))).collect();
        }
    };
    let s = &cfg.solver;
    indices
        .iter()
        .map(|&index| {
            let res = match index {
                IndexKind::Eci => complexity::eci(
                    &m.values,
                    &EciOptions {
                        tol: s.eigen_tol,
                        max_iter: s.eigen_max_iter,
                        dense_limit: s.dense_limit,
                        ..Default::default()
                    },
                ),
                IndexKind::Fi => complexity::fitness(&m.values, &FitnessOptions { max_iter: s.max_iter, tol: s.tol }),
            };
            let scores = match res {
                Ok(v) => v,
                Err(e) => return fail(index, e),
            };
            let meta = ScoreMetadata {
                index,
                strategy,
                year,
                params,
                n_regions: m.regions.len(),
                n_industries: m.industries.len(),
                convergence: scores.convergence,
                solver: scores.solver,
                second_eigenvalue: scores.second_eigenvalue,
                sign_convention: sign_convention(index).to_string(),
                prune_report: report.clone(),
            };
            let mut csv = Vec::new();
            let mut json = Vec::new();
            let written = write_scores_csv(&scores, &m.regions, &m.industries, &mut csv)
                .and_then(|_| serde_json::to_writer_pretty(&mut json, &meta).map_err(Error::from));
            match written {
                Ok(()) => {
                    json.push(b'\n');
                    Ok(ComboOutput { stem: score_stem(year, strategy, index), csv, json })
                }
                Err(e) => fail(index, e),
            }
        })
        .collect()
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Score every (year × strategy × index) combination. A failing combination
/// is recorded and the rest still run.
pub fn run_compute(cfg: &RunConfig, jobs: usize) -> CmdResult<CommandOutcome> {
    invalid(cfg.validate_common())?;
    let (panel, panel_file) = load_panel(cfg)?;
    let years = target_years(cfg, &panel);
    let combos: Vec<(i32, Strategy)> =
        years.iter().flat_map(|&y| cfg.strategies.iter().map(move |&s| (y, s))).collect();
    let pool = invalid(thread_pool(jobs))?;
    let results: Vec<_> = pool.install(|| {
        combos
            .par_iter()
            .flat_map_iter(|&(y, s)| compute_combo(&panel, y, s, &cfg.indices, cfg))
            .collect()
    });
    let mut out = runtime(Outputs::create(cfg, "compute"))?;
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(c) => {
                runtime(out.write_with(&format!("{}.csv", c.stem), |w| Ok(w.write_all(&c.csv)?)))?;
                runtime(out.write_with(&format!("{}.json", c.stem), |w| Ok(w.write_all(&c.json)?)))?;
            }
            Err(msg) => {
                log::error!("{msg}");
                failures.push(msg);
            }
        }
    }
    failures.sort();
    runtime(out.finish("compute", cfg, &[panel_file], vec![], None, failures))
}

fn load_scores(path: &Path) -> CmdResult<(ScoreList, ScoreList)> {
    invalid(require_file(path))?;
    let file = runtime(fs::File::open(path).map_err(Error::from))?;
    runtime(read_scores_csv(BufReader::new(file)))
}

fn heatmap_formats(cfg: &RunConfig) -> Result<Vec<HeatmapFormat>> {
    cfg.diagnose.heatmap_formats.iter().map(|f| f.parse()).collect()
}

fn ext(format: HeatmapFormat) -> &'static str {
    match format {
        HeatmapFormat::Svg => "svg",
        HeatmapFormat::TripletCsv => "csv",
    }
}

/// Heatmaps, correlation tables, group summaries and ranked tables.
pub fn run_diagnose(cfg: &RunConfig) -> CmdResult<CommandOutcome> {
    invalid(cfg.validate_common())?;
    let formats = invalid(heatmap_formats(cfg))?;
    if let Some(matrix_path) = &cfg.diagnose.matrix {
        return diagnose_matrix_file(cfg, matrix_path, &formats);
    }
    let (panel, panel_file) = load_panel(cfg)?;
    let years = target_years(cfg, &panel);
    let year = match cfg.diagnose.year.or_else(|| years.last().copied()) {
        Some(y) => y,
        None => return Err(CommandError::Validation(Error::Config("no year to diagnose".into()))),
    };
    let attributes = match &cfg.paths.attributes {
        Some(path) => {
            invalid(require_file(path))?;
            let f = runtime(fs::File::open(path).map_err(Error::from))?;
            invalid(read_attribute_crosswalks(BufReader::new(f), cfg.schema.delimiter))?
        }
        None => BTreeMap::new(),
    };
    let d = &cfg.diagnose;
    for name in d
        .industry_groupings
        .iter()
        .chain(&d.region_groupings)
        .chain(d.label_attribute.iter())
        .chain(d.tag_attribute.iter())
    {
        if !attributes.contains_key(name) {
            return Err(CommandError::Validation(Error::Config(format!("attribute {name:?} not found in attributes file"))));
        }
    }

    let mut inputs = vec![panel_file];
    let mut scores: BTreeMap<(IndexKind, Strategy), (ScoreList, ScoreList)> = BTreeMap::new();
    for &index in &cfg.indices {
        for &strategy in &cfg.strategies {
            let path = scores_dir(cfg).join(format!("{}.csv", score_stem(year, strategy, index)));
            scores.insert((index, strategy), load_scores(&path)?);
            inputs.push(path);
        }
    }
    if let Some(p) = &cfg.paths.attributes {
        inputs.push(p.clone());
    }

    let x = runtime(ingest::build_matrix(&panel, year))?;
    let mut out = runtime(Outputs::create(cfg, "diagnose"))?;
    let mut failures = Vec::new();

    for &strategy in &cfg.strategies {
        let built = matrix::build_input_matrix(&x, strategy, StrategyParams { cutoff: cfg.solver.cutoff })
            .and_then(matrix::prune_empty);
        match built {
            Ok((m, _)) => {
                let view = diagnostics::order_for_triangularity(&m, Some(&x));
                for &f in &formats {
                    let name = format!("heatmap_{year}_{}.{}", strategy.as_str(), ext(f));
                    let path = out.dir.join(&name);
                    runtime(diagnostics::export_heatmap(&view, &path, f))?;
                    out.files.push(path);
                }
            }
            Err(e) => failures.push(format!("heatmap {year} {strategy}: {e}")),
        }
    }

    for &index in &cfg.indices {
        if cfg.strategies.len() < 2 {
            break;
        }
        let name = format!("correlation_{year}_{}.csv", index.as_str());
        let strategies = &cfg.strategies;
        let mut cells = Vec::new();
        for &a in strategies {
            let mut row = Vec::new();
            for &b in strategies {
                let r = diagnostics::correlate(&scores[&(index, a)].0, &scores[&(index, b)].0, Transform::None);
                row.push(match r {
                    Ok(c) => c.r.to_string(),
                    Err(e) => {
                        failures.push(format!("correlation {index:?} {a}/{b}: {e}"));
                        String::new()
                    }
                });
            }
            cells.push(row);
        }
        runtime(out.write_with(&name, |w| {
            let mut c = csv::Writer::from_writer(w);
            let mut header = vec!["strategy".to_string()];
            header.extend(strategies.iter().map(|s| s.to_string()));
            c.write_record(&header)?;
            for (s, row) in strategies.iter().zip(&cells) {
                let mut rec = vec![s.to_string()];
                rec.extend(row.iter().cloned());
                c.write_record(&rec)?;
            }
            c.flush()?;
            Ok(())
        }))?;
    }

    if cfg.indices.contains(&IndexKind::Eci) && cfg.indices.contains(&IndexKind::Fi) {
        let mut rows = Vec::new();
        for &s in &cfg.strategies {
            match diagnostics::correlate(&scores[&(IndexKind::Eci, s)].0, &scores[&(IndexKind::Fi, s)].0, Transform::Log) {
                Ok(c) => rows.push([s.to_string(), c.r.to_string(), c.n.to_string(), c.dropped.to_string()]),
                Err(e) => failures.push(format!("eci vs log fi {s}: {e}")),
            }
        }
        runtime(out.write_with(&format!("eci_vs_log_fi_{year}.csv"), |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["strategy", "r", "n", "dropped"])?;
            for r in &rows {
                c.write_record(r)?;
            }
            c.flush()?;
            Ok(())
        }))?;
    }

    for ((index, strategy), (regions, industries)) in &scores {
        let stem = score_stem(year, *strategy, *index);
        for (side, list, groupings) in
            [("industry", industries, &d.industry_groupings), ("region", regions, &d.region_groupings)]
        {
            for g in groupings {
                let summary = diagnostics::group_summary(list, g, &attributes[g]);
                runtime(out.write_with(&format!("groups_{stem}_{side}_{g}.csv"), |w| summary.write_csv(w)))?;
                runtime(out.write_text(&format!("groups_{stem}_{side}_{g}.txt"), &summary.to_text()))?;
            }
        }
        let n = d.top_n.min(industries.len());
        if n < d.top_n {
            log::warn!("{stem}: only {} industries, ranking {n}", industries.len());
        }
        let labels = d.label_attribute.as_ref().map(|a| &attributes[a]);
        let tags = d.tag_attribute.as_ref().map(|a| &attributes[a]);
        match diagnostics::top_bottom(industries, n, labels, tags) {
            Ok(t) => {
                runtime(out.write_with(&format!("top_bottom_{stem}.csv"), |w| t.write_csv(w)))?;
            }
            Err(e) => failures.push(format!("top/bottom {stem}: {e}")),
        }
    }

    runtime(out.finish("diagnose", cfg, &inputs, vec![], None, failures))
}

fn diagnose_matrix_file(cfg: &RunConfig, path: &Path, formats: &[HeatmapFormat]) -> CmdResult<CommandOutcome> {
    invalid(require_file(path))?;
    let f = runtime(fs::File::open(path).map_err(Error::from))?;
    let (values, regions, industries) = runtime(matrix::read_triplets(BufReader::new(f)))?;
    let view = diagnostics::order_labeled(&values, &regions, &industries);
    let mut out = runtime(Outputs::create(cfg, "diagnose"))?;
    for &fmt in formats {
        let p = out.dir.join(format!("heatmap_matrix.{}", ext(fmt)));
        runtime(diagnostics::export_heatmap(&view, &p, fmt))?;
        out.files.push(p);
    }
    runtime(out.finish("diagnose", cfg, &[path.to_path_buf()], vec![], None, vec![]))
}

fn file_stem_for(name: &str, k: usize) -> String {
    let clean: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if clean.is_empty() {
        format!("model_{}", k + 1)
    } else {
        clean
    }
}

/// Fit every configured regression model.
pub fn run_regress(cfg: &RunConfig) -> CmdResult<CommandOutcome> {
    let path = match &cfg.paths.analysis {
        Some(p) => p.clone(),
        None => return Err(CommandError::Validation(Error::Config("paths.analysis is not set".into()))),
    };
    invalid(require_file(&path))?;
    if cfg.regress.models.is_empty() {
        return Err(CommandError::Validation(Error::Config("no regression models configured".into())));
    }
    let f = runtime(fs::File::open(&path).map_err(Error::from))?;
    let data = invalid(Dataset::from_csv(BufReader::new(f), &cfg.regress.entity_column, &cfg.regress.year_column))?;
    let mut out = runtime(Outputs::create(cfg, "regress"))?;
    let mut failures = Vec::new();
    for (k, spec) in cfg.regress.models.iter().enumerate() {
        let stem = file_stem_for(&spec.name, k);
        let title = if spec.name.is_empty() { spec.outcome.clone() } else { spec.name.clone() };
        match regress::run_model(&data, spec) {
            Ok(results) => {
                for r in &results {
                    for w in &r.warnings {
                        log::warn!("{stem}: {w}");
                    }
                }
                runtime(out.write_text(&format!("{stem}.txt"), &regress::format_table(&title, &results)))?;
                runtime(out.write_with(&format!("{stem}.csv"), |w| regress::write_results_csv(&stem, &results, w)))?;
            }
            Err(e) => failures.push(format!("{stem}: {e}")),
        }
    }
    runtime(out.finish("regress", cfg, &[path], vec![], None, failures))
}

/// Sidecar for synthetic matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSidecar {
    pub generator: SynthKind,
    pub n_regions: usize,
    pub n_industries: usize,
    pub params: Option<synth::CapabilityParams>,
    pub rng: Option<String>,
    pub attempts: Option<usize>,
}

fn codes(prefix: char, n: usize) -> Vec<String> {
    let width = n.to_string().len();
    (0..n).map(|k| format!("{prefix}{k:0width$}")).collect()
}

/// Generate a synthetic matrix as triplets plus a JSON sidecar.
pub fn run_synth(cfg: &RunConfig) -> CmdResult<CommandOutcome> {
    let s = &cfg.synth;
    let p = s.params;
    let (values, sidecar, counts): (DMatrix<f64>, SynthSidecar, Option<Vec<usize>>) = match s.kind {
        SynthKind::Nested => {
            let m = invalid(synth::generate_nested(p.n_regions, p.n_industries))?;
            let side = SynthSidecar {
                generator: SynthKind::Nested,
                n_regions: p.n_regions,
                n_industries: p.n_industries,
                params: None,
                rng: None,
                attempts: None,
            };
            (m, side, None)
        }
        SynthKind::Capability => {
            let (model, m) = match synth::generate_capability_model(p) {
                Ok(v) => v,
                Err(e @ Error::InvalidParameter(_)) => return Err(CommandError::Validation(e)),
                Err(e) => return Err(CommandError::Runtime(e)),
            };
            let side = SynthSidecar {
                generator: SynthKind::Capability,
                n_regions: p.n_regions,
                n_industries: p.n_industries,
                params: Some(p),
                rng: Some(synth::RNG_ALGORITHM.to_string()),
                attempts: Some(model.attempts),
            };
            (m, side, Some(model.capability_counts()))
        }
    };
    let regions = codes('r', values.nrows());
    let industries = codes('i', values.ncols());
    let mut out = runtime(Outputs::create(cfg, "synth"))?;
    runtime(out.write_with("matrix.csv", |w| matrix::write_triplets(&values, &regions, &industries, w)))?;
    runtime(out.write_json("matrix.json", &sidecar))?;
    if let Some(counts) = &counts {
        runtime(out.write_with("capabilities.csv", |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["region", "capabilities"])?;
            for (r, n) in regions.iter().zip(counts) {
                c.write_record([r.as_str(), &n.to_string()])?;
            }
            c.flush()?;
            Ok(())
        }))?;
    }
    let (seeds, rng) = match s.kind {
        SynthKind::Capability => (vec![p.seed], Some(synth::RNG_ALGORITHM.to_string())),
        SynthKind::Nested => (vec![], None),
    };
    runtime(out.finish("synth", cfg, &[], seeds, rng, vec![]))
}
