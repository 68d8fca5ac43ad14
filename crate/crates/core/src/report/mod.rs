//! End-to-end runs driven by a JSON config, the run manifest, run
//! comparison, and SVG figures.

pub mod svg;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregation::{aggregate_geography, HierarchyScores, Level};
use crate::analysis::{
    correlation_screen, cross_level_screen, evaluate_space, rank_shift_removal, run_pipeline, sobol_exact, sobol_mc,
    uncertainty_bands, CorrelationFlag, CorrelationScreen, MethodSpace, PipelineChoice, PipelineInput,
    PipelineSettings, RankBand, RankShift, RemovalLevel, SobolEstimate, SobolMode, SobolReport, BOOTSTRAP_RESAMPLES,
};
use crate::error::{Error, Result, StageExt};
use crate::imputation::impute;
use crate::io;
use crate::missing::classify_missing;
use crate::model::{Hierarchy, PanelTensor, PopulationWeights};
use crate::normalization::{to_index_scale, NormalizationMethod};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub mode: SobolMode,
    /// Base samples in Monte Carlo mode; ignored in exact mode.
    pub iterations: usize,
    pub resamples: usize,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            mode: SobolMode::Exact,
            iterations: 10_000,
            resamples: BOOTSTRAP_RESAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyConfig {
    pub iterations: usize,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        Self { iterations: 10_000 }
    }
}

fn default_rank_shift() -> Vec<RemovalLevel> {
    vec![RemovalLevel::Indicator, RemovalLevel::Subdomain]
}

fn default_true() -> bool {
    true
}

/// The `run.json` document. Relative paths resolve against the directory
/// holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    pub hierarchy: PathBuf,
    pub population: PathBuf,
    /// Seed for the sensitivity and uncertainty samples.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pipeline: PipelineChoice,
    pub settings: PipelineSettings,
    #[serde(default)]
    pub space: MethodSpace,
    #[serde(default)]
    pub sensitivity: SensitivityConfig,
    #[serde(default)]
    pub uncertainty: UncertaintyConfig,
    #[serde(default = "default_rank_shift")]
    pub rank_shift: Vec<RemovalLevel>,
    #[serde(default)]
    pub renormalize_regions: bool,
    #[serde(default = "default_true")]
    pub plots: bool,
}

impl RunConfig {
    pub fn new(data: PathBuf, hierarchy: PathBuf, population: PathBuf, settings: PipelineSettings) -> Self {
        Self {
            data,
            hierarchy,
            population,
            seed: 0,
            pipeline: PipelineChoice::default(),
            settings,
            space: MethodSpace::default(),
            sensitivity: SensitivityConfig::default(),
            uncertainty: UncertaintyConfig::default(),
            rank_shift: default_rank_shift(),
            renormalize_regions: false,
            plots: true,
        }
    }

    /// Parses and validates a config document. Every failure is a config error.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks that need no input data.
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        if self.sensitivity.mode == SobolMode::MonteCarlo && self.sensitivity.iterations < 2 {
            return Err(Error::Config(
                "Monte Carlo sensitivity needs at least 2 iterations".into(),
            ));
        }
        if self.sensitivity.resamples == 0 {
            return Err(Error::Config("bootstrap resamples must be positive".into()));
        }
        if self.uncertainty.iterations == 0 {
            return Err(Error::Config("uncertainty iterations must be positive".into()));
        }
        if let Some(t) = &self.settings.targets {
            if t.iter().any(|v| !(*v > 0.0)) || (t.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Config("domain targets must be positive and sum to 1".into()));
            }
        }
        Ok(())
    }

    fn resolve(&self, base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    /// Checks against the loaded inputs and fills every default.
    fn materialized(&self, tensor: &PanelTensor, h: &Hierarchy) -> Result<Self> {
        let years = tensor.years();
        let d = h.domains().len();
        if let Some(t) = &self.settings.targets {
            if t.len() != d {
                return Err(Error::Config(format!("{} domain targets for {d} domains", t.len())));
            }
        }
        let mut cfg = self.clone();
        cfg.settings = self.settings.materialized(&years, d);
        for (what, y) in [
            ("baseline", Some(cfg.settings.baseline_year)),
            ("weight", cfg.settings.weight_year),
            ("rank", cfg.settings.rank_year),
        ] {
            let y = y.expect("materialized");
            if !years.contains(&y) {
                return Err(Error::Config(format!("{what} year {y} is not in the data")));
            }
        }
        Ok(cfg)
    }
}

/// Checksummed record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// The config with every default filled in.
    pub config: RunConfig,
    pub config_sha256: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    /// File name → SHA-256 of every output except the manifest.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Writes files into the run directory and records their checksums.
struct RunDir {
    root: PathBuf,
    checksums: BTreeMap<String, String>,
}

impl RunDir {
    fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            checksums: BTreeMap::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        self.checksums.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.put(name, bytes)
    }
}

fn csv_bytes(f: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    f(&mut w)?;
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

pub fn panel_csv(tensor: &PanelTensor) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    io::write_panel_csv(&mut out, tensor, None)?;
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Presentation value of a score: `100 + 10z` on the z-score scale, the
/// score itself on the min–max scale.
pub fn presentation(method: NormalizationMethod, score: f64) -> f64 {
    match method {
        NormalizationMethod::WeightedZScore => to_index_scale(score),
        NormalizationMethod::MinMax => score,
    }
}

/// Long-format index table: `geo,area,level,node,year,score,presentation`
/// for units, regions and the nation at the requested levels.
pub fn index_csv(
    scores: &HierarchyScores,
    levels: &[Level],
    geo: &[&str],
    population: &PopulationWeights,
    h: &Hierarchy,
    renormalize: bool,
    method: NormalizationMethod,
) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(["geo", "area", "level", "node", "year", "score", "presentation"])?;
        for &level in levels {
            let ls = scores.level(level);
            let geography = aggregate_geography(ls, population, h, renormalize)?;
            let tables = [
                ("unit", ls),
                ("region", &geography.regional),
                ("nation", &geography.national),
            ];
            for (kind, table) in tables {
                if !geo.contains(&kind) {
                    continue;
                }
                for (r, area) in table.rows.iter().enumerate() {
                    for (n, node) in table.nodes.iter().enumerate() {
                        for (t, year) in table.years.iter().enumerate() {
                            let v = table.get(r, n, t);
                            w.write_record([
                                kind,
                                area,
                                level.name(),
                                node,
                                &year.to_string(),
                                &v.to_string(),
                                &presentation(method, v).to_string(),
                            ])?;
                        }
                    }
                }
            }
        }
        Ok(())
    })
}

pub fn ranking_csv(units: &[String], index: &[f64], ranks: &[usize]) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(["unit", "index", "rank"])?;
        for ((u, v), r) in units.iter().zip(index).zip(ranks) {
            w.write_record([u.as_str(), &v.to_string(), &r.to_string()])?;
        }
        Ok(())
    })
}

pub fn sobol_csv(report: &SobolReport) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record([
            "factor",
            "S_first",
            "S_total",
            "ci_lo",
            "ci_hi",
            "total_ci_lo",
            "total_ci_hi",
            "n_evaluations",
        ])?;
        for e in &report.factors {
            w.write_record([
                e.factor.clone(),
                opt(e.s_first),
                opt(e.s_total),
                opt(e.ci_first.map(|c| c[0])),
                opt(e.ci_first.map(|c| c[1])),
                opt(e.ci_total.map(|c| c[0])),
                opt(e.ci_total.map(|c| c[1])),
                e.n_evaluations.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Per-unit indices: `unit,variance,first_<factor>…,total_<factor>…`.
pub fn sobol_units_csv(report: &SobolReport) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        let mut header = vec!["unit".to_string(), "variance".to_string()];
        header.extend(report.factors.iter().map(|f| format!("first_{}", f.factor)));
        header.extend(report.factors.iter().map(|f| format!("total_{}", f.factor)));
        w.write_record(&header)?;
        let k = report.factors.len();
        for u in &report.per_unit {
            let mut row = vec![u.unit.clone(), u.variance.to_string()];
            for v in [&u.first, &u.total] {
                match v {
                    Some(xs) => row.extend(xs.iter().map(|x| x.to_string())),
                    None => row.extend(std::iter::repeat_n(String::new(), k)),
                }
            }
            w.write_record(&row)?;
        }
        Ok(())
    })
}

pub fn bands_csv(bands: &[RankBand]) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(["unit", "reference", "median", "p5", "p95"])?;
        for b in bands {
            w.write_record([
                b.unit.clone(),
                b.reference.to_string(),
                b.median.to_string(),
                b.p5.to_string(),
                b.p95.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn rank_shift_csv(shifts: &[RankShift]) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(["removed", "level", "mean_abs_shift", "max_abs_shift"])?;
        for s in shifts {
            let level = match s.level {
                RemovalLevel::Indicator => "indicator",
                RemovalLevel::Subdomain => "subdomain",
            };
            w.write_record([
                s.removed.clone(),
                level.into(),
                s.mean_abs_shift.to_string(),
                s.max_abs_shift.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Square correlation matrix with a leading `node` column.
pub fn correlation_csv(screen: &CorrelationScreen) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        let mut header = vec!["node".to_string()];
        header.extend(screen.names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in screen.names.iter().zip(&screen.matrix) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFlags {
    pub within_level: BTreeMap<String, Vec<CorrelationFlag>>,
    pub cross_level: Vec<CorrelationFlag>,
}

/// Outcome of [`run_all`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

/// Runs impute → treat → normalize → weights → aggregate → analyze and
/// writes every stage output plus `manifest.json` into `out`.
pub fn run_all(config_path: &Path, out: &Path) -> Result<RunSummary> {
    let cfg = RunConfig::from_file(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    run_config(&cfg, base, out)
}

/// [`run_all`] with an already parsed config; relative paths resolve against `base`.
pub fn run_config(cfg: &RunConfig, base: &Path, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let paths = [
        ("data", cfg.resolve(base, &cfg.data)),
        ("hierarchy", cfg.resolve(base, &cfg.hierarchy)),
        ("population", cfg.resolve(base, &cfg.population)),
    ];
    let panel = io::load_panel_files(&paths[0].1, &paths[1].1, &paths[2].1).stage("load")?;
    let cfg = cfg.materialized(&panel.tensor, &panel.hierarchy)?;
    let mut inputs = BTreeMap::new();
    for (name, p) in &paths {
        inputs.insert(name.to_string(), file_sha256(p)?);
    }
    let h = &panel.hierarchy;
    let mut dir = RunDir::new(out)?;

    info!("imputing");
    let gaps = classify_missing(&panel.tensor, &panel.suppressions).stage("impute")?;
    let imputed = impute(&panel.tensor, h, &gaps).stage("impute")?;
    dir.json("gaps.json", &gaps)?;
    dir.put("imputed.csv", panel_csv(&imputed)?)?;

    info!("building the default index");
    let input = PipelineInput::new(imputed, h.clone(), panel.population.clone())?;
    let run = run_pipeline(&input, &cfg.pipeline, &cfg.settings)?;
    dir.put("treated.csv", panel_csv(&run.treated)?)?;
    dir.json("plan.json", &run.plan)?;
    dir.json("params.json", &run.params)?;
    dir.put("z.csv", panel_csv(&run.normalized)?)?;
    dir.json("weights.json", &run.weights_doc)?;
    dir.put(
        "index.csv",
        index_csv(
            &run.scores,
            &Level::ALL,
            &["unit", "region", "nation"],
            &panel.population,
            h,
            cfg.renormalize_regions,
            cfg.pipeline.normalization,
        )?,
    )?;
    let units = input.imputed.units().to_vec();
    dir.put("ranking.csv", ranking_csv(&units, &run.index, &run.ranks)?)?;

    info!("screening correlations");
    let mut within = BTreeMap::new();
    for level in [Level::Indicator, Level::Subdomain, Level::Domain] {
        let screen = correlation_screen(&run.scores, level, None).stage("analyze")?;
        dir.put(&format!("corr_{}.csv", level.name()), correlation_csv(&screen)?)?;
        if cfg.plots && level != Level::Domain {
            let title = format!("{} correlations", level.name());
            dir.put(
                &format!("corr_{}.svg", level.name()),
                svg::heatmap(&title, &screen.names, &screen.matrix).into_bytes(),
            )?;
        }
        within.insert(level.name().to_string(), screen.flags);
    }
    let cross = cross_level_screen(&run.scores, h, None).stage("analyze")?;
    dir.json(
        "corr_flags.json",
        &CorrelationFlags {
            within_level: within,
            cross_level: cross,
        },
    )?;

    info!("evaluating {} method-space points", cfg.space.points().len());
    let space = evaluate_space(&input, &cfg.space, &cfg.settings)?;
    let fs = cfg.space.factor_space();
    let outputs = space.rank_outputs();
    let sa = match cfg.sensitivity.mode {
        SobolMode::Exact => sobol_exact(&fs, &outputs, &units),
        SobolMode::MonteCarlo => sobol_mc(
            &fs,
            &outputs,
            &units,
            cfg.sensitivity.iterations,
            cfg.seed,
            cfg.sensitivity.resamples,
        ),
    }
    .stage("analyze")?;
    dir.put("sa.csv", sobol_csv(&sa)?)?;
    dir.put("sa_units.csv", sobol_units_csv(&sa)?)?;

    let bands = uncertainty_bands(
        &fs,
        &space.ranks,
        &units,
        &run.ranks,
        cfg.uncertainty.iterations,
        cfg.seed,
    )
    .stage("analyze")?;
    dir.put("ua.csv", bands_csv(&bands)?)?;
    if cfg.plots {
        dir.put(
            "sa.svg",
            svg::sobol_bars("Sensitivity indices", &sa.factors).into_bytes(),
        )?;
        dir.put("ua.svg", svg::rank_bands("Rank uncertainty", &bands).into_bytes())?;
    }

    for &level in &cfg.rank_shift {
        let name = match level {
            RemovalLevel::Indicator => "indicator",
            RemovalLevel::Subdomain => "subdomain",
        };
        info!("rank shifts by {name} removal");
        let shifts = rank_shift_removal(&input, &cfg.pipeline, &cfg.settings, level)?;
        dir.put(&format!("rankshift_{name}.csv"), rank_shift_csv(&shifts)?)?;
        if cfg.plots {
            let title = format!("Mean absolute rank shift by {name} removal");
            dir.put(
                &format!("rankshift_{name}.svg"),
                svg::rank_shift_bars(&title, &shifts).into_bytes(),
            )?;
        }
    }

    let config_sha256 = sha256_hex(&serde_json::to_vec(&cfg)?);
    let manifest = Manifest {
        tool: "compindex".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        config: cfg,
        config_sha256,
        inputs,
        outputs: dir.checksums.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    let path = out.join(MANIFEST);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(RunSummary {
        dir: out.to_path_buf(),
        manifest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub unit: String,
    pub index: f64,
    pub rank: usize,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::Reader::from_reader(io::open(path)?))
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    csv_reader(path)?
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn read_ranking(path: &Path) -> Result<Vec<RankingRow>> {
    read_rows(path)
}

pub fn read_bands(path: &Path) -> Result<Vec<RankBand>> {
    read_rows(path)
}

pub fn read_rank_shifts(path: &Path) -> Result<Vec<RankShift>> {
    read_rows(path)
}

#[derive(Deserialize)]
struct SobolRow {
    factor: String,
    #[serde(rename = "S_first")]
    s_first: Option<f64>,
    #[serde(rename = "S_total")]
    s_total: Option<f64>,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    total_ci_lo: Option<f64>,
    total_ci_hi: Option<f64>,
    n_evaluations: usize,
}

/// Reads the factor table written by [`sobol_csv`].
pub fn read_sobol(path: &Path) -> Result<Vec<SobolEstimate>> {
    let pair = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| [a, b]);
    Ok(read_rows::<SobolRow>(path)?
        .into_iter()
        .map(|r| SobolEstimate {
            factor: r.factor,
            s_first: r.s_first,
            s_total: r.s_total,
            ci_first: pair(r.ci_lo, r.ci_hi),
            ci_total: pair(r.total_ci_lo, r.total_ci_hi),
            n_evaluations: r.n_evaluations,
        })
        .collect())
}

/// Reads a matrix written by [`correlation_csv`].
pub fn read_correlation(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv_reader(path)?;
    let names: Vec<String> = r.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut matrix = Vec::with_capacity(names.len());
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Data(format!("{}: `{v}` is not a number", path.display())))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != names.len() {
            return Err(Error::Data(format!("{}: ragged correlation matrix", path.display())));
        }
        matrix.push(row);
    }
    if matrix.len() != names.len() {
        return Err(Error::Data(format!(
            "{}: correlation matrix is not square",
            path.display()
        )));
    }
    Ok((names, matrix))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub unit: String,
    pub rank_a: usize,
    pub rank_b: usize,
    /// `rank_b − rank_a`.
    pub rank_diff: i64,
    pub index_a: f64,
    pub index_b: f64,
    /// `index_b − index_a`.
    pub index_diff: f64,
}

/// Share of units, in percent, by absolute rank shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftBands {
    pub within_10: f64,
    pub from_11_to_30: f64,
    pub at_least_31: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub bands: ShiftBands,
}

/// Unit-by-unit comparison of two rankings, in the unit order of `a`.
pub fn compare_rankings(a: &[RankingRow], b: &[RankingRow]) -> Result<Comparison> {
    let by_unit: BTreeMap<&str, &RankingRow> = b.iter().map(|r| (r.unit.as_str(), r)).collect();
    if a.len() != b.len() || by_unit.len() != b.len() {
        return Err(Error::Data("the runs cover different unit sets".into()));
    }
    let rows: Vec<ComparisonRow> = a
        .iter()
        .map(|ra| {
            let rb = by_unit
                .get(ra.unit.as_str())
                .ok_or_else(|| Error::Data(format!("unit `{}` is missing from the second run", ra.unit)))?;
            Ok(ComparisonRow {
                unit: ra.unit.clone(),
                rank_a: ra.rank,
                rank_b: rb.rank,
                rank_diff: rb.rank as i64 - ra.rank as i64,
                index_a: ra.index,
                index_b: rb.index,
                index_diff: rb.index - ra.index,
            })
        })
        .collect::<Result<_>>()?;
    let n = rows.len().max(1) as f64;
    let pct =
        |f: &dyn Fn(u64) -> bool| 100.0 * rows.iter().filter(|r| f(r.rank_diff.unsigned_abs())).count() as f64 / n;
    let bands = ShiftBands {
        within_10: pct(&|d| d <= 10),
        from_11_to_30: pct(&|d| (11..=30).contains(&d)),
        at_least_31: pct(&|d| d >= 31),
    };
    Ok(Comparison { rows, bands })
}

/// Compares the `ranking.csv` files of two run directories.
pub fn compare_runs(a: &Path, b: &Path) -> Result<Comparison> {
    compare_rankings(
        &read_ranking(&a.join("ranking.csv"))?,
        &read_ranking(&b.join("ranking.csv"))?,
    )
}

pub fn comparison_csv(c: &Comparison) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        for row in &c.rows {
            w.serialize(row)?;
        }
        Ok(())
    })
}
