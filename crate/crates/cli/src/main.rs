use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use compindex::aggregation::{aggregate_hierarchy, aggregate_hierarchy_geometric, Level};
use compindex::analysis::{
    correlation_screen, cross_level_screen, domain_columns, evaluate_space, rank_shift_removal, run_pipeline,
    sobol_exact, sobol_mc, uncertainty_bands, OutputSelector, PipelineInput, RemovalLevel, SobolMode,
};
use compindex::fixture::{synthetic_fixture, write_fixture, FixtureOptions};
use compindex::imputation::impute;
use compindex::io;
use compindex::missing::classify_missing;
use compindex::model::{PanelTensor, Stage, Year};
use compindex::normalization::{fit_method, normalize, NormalizationMethod};
use compindex::report::{self, svg, RunConfig};
use compindex::treatment::{treat, TreatmentMode};
use compindex::weighting::{
    equal_weights, fa_weights, optimize_weights, pca_weights, Estimator, OptimizationSummary, OptimizeOptions,
    Provenance, WeightsDocument,
};
use compindex::{Error, Result};

#[derive(Parser)]
#[command(
    name = "compindex",
    version,
    about = "Build and audit hierarchical composite indicators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill missing and suppressed cells of a raw panel.
    Impute {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        hierarchy: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the gap classification as JSON.
        #[arg(long)]
        gaps: Option<PathBuf>,
    },
    /// Transform or winsorize skewed indicators of an imputed panel.
    Treat {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = TreatArg::Modified)]
        mode: TreatArg,
        /// Winsorization limit per tail in modified mode.
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Normalize a treated panel against a baseline year.
    Normalize {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        population: PathBuf,
        #[arg(long)]
        hierarchy: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Zscore)]
        method: MethodArg,
        #[arg(long)]
        baseline_year: Year,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Derive a weight system from a normalized panel.
    Weights(WeightsArgs),
    /// Aggregate a normalized panel up the hierarchy and across geography.
    Aggregate(AggregateArgs),
    /// Audit an index.
    Analyze {
        #[command(subcommand)]
        what: Analyze,
    },
    /// Render an analysis CSV as SVG.
    Plot {
        #[arg(value_enum)]
        kind: PlotKind,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
    /// Run the whole pipeline and audit from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the rankings of two run directories.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the seeded synthetic panel and a run config into a directory.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = FixtureOptions::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = FixtureOptions::default().units)]
        units: usize,
        #[arg(long, default_value_t = FixtureOptions::default().years)]
        years: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TreatArg {
    Ons,
    Modified,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Zscore,
    Minmax,
}

impl From<MethodArg> for NormalizationMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Zscore => NormalizationMethod::WeightedZScore,
            MethodArg::Minmax => NormalizationMethod::MinMax,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightMethod {
    Equal,
    Fa,
    Pca,
    Optimized,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Linear,
    Nonparametric,
}

#[derive(Args)]
struct WeightsArgs {
    #[arg(long, value_enum)]
    method: WeightMethod,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    hierarchy: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Year of the PCA loadings; the first year when absent.
    #[arg(long)]
    year: Option<Year>,
    /// Comma-separated domain importances for optimized weights.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Linear)]
    estimator: EstimatorArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    hierarchy: PathBuf,
    #[arg(long)]
    population: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "indicator,subdomain,domain,overall")]
    levels: Vec<String>,
    /// Geographic levels: `unit` (or `utla`), `region`, `nation`.
    #[arg(long, value_delimiter = ',', default_value = "unit,region,nation")]
    geo: Vec<String>,
    /// Divide regional sums by the region's population share.
    #[arg(long)]
    renormalize_regions: bool,
    /// Experimental weighted geometric mean on the 100 + 10z scale.
    #[arg(long)]
    geometric: bool,
    /// Scale of the input scores, which fixes the presentation column.
    #[arg(long, value_enum, default_value_t = MethodArg::Zscore)]
    scale: MethodArg,
}

#[derive(Args)]
struct AnalysisArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// `overall` or `domain:<name>`.
    #[arg(long)]
    output_level: Option<String>,
}

#[derive(Subcommand)]
enum Analyze {
    /// Correlation matrix and flags at one level of a normalized panel.
    Corr {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        hierarchy: PathBuf,
        /// Weights used to build subdomain and domain scores; equal when absent.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value = "indicator")]
        level: String,
        /// Single year; all unit-years pooled when absent.
        #[arg(long)]
        year: Option<Year>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        flags: Option<PathBuf>,
    },
    /// Sobol indices over the method space.
    Sa {
        #[command(flatten)]
        common: AnalysisArgs,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Rank uncertainty bands over the method space.
    Ua {
        #[command(flatten)]
        common: AnalysisArgs,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Mean absolute rank shift from removing one node at a time.
    Rankshift {
        #[command(flatten)]
        common: AnalysisArgs,
        #[arg(long, value_enum, default_value_t = LevelArg::Subdomain)]
        level: LevelArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Indicator,
    Subdomain,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Heatmap,
    Bands,
    Sa,
    Rankshift,
}

fn write(path: &Path, bytes: Vec<u8>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a complete panel written by an earlier stage.
fn read_stage(path: &Path, stage: Stage) -> Result<PanelTensor> {
    let (tensor, supp) = io::read_panel_file(path)?;
    if !supp.is_empty() {
        return Err(Error::Data(format!(
            "{}: suppressed cells in a processed panel",
            path.display()
        )));
    }
    tensor.with_stage(stage)
}

fn weights_command(a: &WeightsArgs) -> Result<()> {
    let h = io::read_hierarchy_file(&a.hierarchy)?;
    let z = read_stage(&a.data, Stage::Normalized)?;
    h.check_tensor(&z)?;
    let doc = match a.method {
        WeightMethod::Equal => WeightsDocument::new(&equal_weights(&h), &h),
        WeightMethod::Fa => {
            let (w, diag) = fa_weights(&z, &h)?;
            let mut doc = WeightsDocument::new(&w, &h);
            doc.factor_analysis = Some(diag);
            doc
        }
        WeightMethod::Pca => {
            let year = a.year.unwrap_or_else(|| z.first_year());
            let (w, ve) = pca_weights(&z, &h, year)?;
            for (name, v) in ve.iter().filter(|(_, v)| v.below_threshold) {
                log::warn!(
                    "first component explains {:.1}% of subdomain `{name}` in {year}",
                    100.0 * v.fraction
                );
            }
            let mut doc = WeightsDocument::new(&w, &h);
            doc.variance_explained = Some(ve);
            doc
        }
        WeightMethod::Optimized => {
            let d = h.domains().len();
            let targets = a.targets.clone().unwrap_or_else(|| vec![1.0 / d as f64; d]);
            let estimator = match a.estimator {
                EstimatorArg::Linear => Estimator::Linear,
                EstimatorArg::Nonparametric => Estimator::Nonparametric,
            };
            let base = equal_weights(&h);
            let scores = aggregate_hierarchy(&z, &h, &base)?;
            let opts = OptimizeOptions {
                seed: a.seed,
                ..Default::default()
            };
            let opt = optimize_weights(&domain_columns(&scores.domain), &targets, estimator, &opts)?;
            let w = base.with_domain_weights(opt.weights.clone(), Provenance::Optimized);
            let mut doc = WeightsDocument::new(&w, &h);
            doc.optimization = Some(OptimizationSummary {
                estimator,
                targets,
                achieved: opt.achieved,
                objective: opt.objective,
                initial_objective: opt.initial_objective,
                improved: opt.improved,
            });
            doc
        }
    };
    io::write_json(&a.out, &doc)
}

fn aggregate_command(a: &AggregateArgs) -> Result<()> {
    let h = io::read_hierarchy_file(&a.hierarchy)?;
    let z = read_stage(&a.data, Stage::Normalized)?;
    let population = io::read_population_file(&a.population)?;
    let doc: WeightsDocument = io::read_json(&a.weights)?;
    let w = doc.to_weight_system(&h)?;
    let levels: Vec<Level> = a
        .levels
        .iter()
        .map(|l| Level::parse(l).ok_or_else(|| Error::Config(format!("unknown level `{l}`"))))
        .collect::<Result<_>>()?;
    let geo: Vec<&str> = a
        .geo
        .iter()
        .map(|g| match g.as_str() {
            "unit" | "utla" => Ok("unit"),
            "region" => Ok("region"),
            "nation" => Ok("nation"),
            other => Err(Error::Config(format!("unknown geography `{other}`"))),
        })
        .collect::<Result<_>>()?;
    let (scores, scale) = if a.geometric {
        (aggregate_hierarchy_geometric(&z, &h, &w)?, NormalizationMethod::MinMax)
    } else {
        (aggregate_hierarchy(&z, &h, &w)?, a.scale.into())
    };
    let bytes = report::index_csv(&scores, &levels, &geo, &population, &h, a.renormalize_regions, scale)?;
    write(&a.out, bytes)
}

/// Loads the inputs named by a run config and applies command-line overrides.
fn analysis_setup(a: &AnalysisArgs) -> Result<(RunConfig, PipelineInput)> {
    let mut cfg = RunConfig::from_file(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(level) = &a.output_level {
        cfg.settings.output = level.parse::<OutputSelector>()?;
    }
    let base = a.config.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    let panel = io::load_panel_files(&resolve(&cfg.data), &resolve(&cfg.hierarchy), &resolve(&cfg.population))?;
    let gaps = classify_missing(&panel.tensor, &panel.suppressions)?;
    let imputed = impute(&panel.tensor, &panel.hierarchy, &gaps)?;
    let input = PipelineInput::new(imputed, panel.hierarchy, panel.population)?;
    Ok((cfg, input))
}

fn analyze_command(what: &Analyze) -> Result<()> {
    match what {
        Analyze::Corr {
            data,
            hierarchy,
            weights,
            level,
            year,
            out,
            flags,
        } => {
            let h = io::read_hierarchy_file(hierarchy)?;
            let z = read_stage(data, Stage::Normalized)?;
            let w = match weights {
                Some(p) => io::read_json::<WeightsDocument>(p)?.to_weight_system(&h)?,
                None => equal_weights(&h),
            };
            let level = Level::parse(level).ok_or_else(|| Error::Config(format!("unknown level `{level}`")))?;
            let scores = aggregate_hierarchy(&z, &h, &w)?;
            let screen = correlation_screen(&scores, level, *year)?;
            write(out, report::correlation_csv(&screen)?)?;
            if let Some(path) = flags {
                let mut all = screen.flags.clone();
                if level == Level::Indicator {
                    all.extend(cross_level_screen(&scores, &h, *year)?);
                }
                io::write_json(path, &all)?;
            }
            Ok(())
        }
        Analyze::Sa {
            common,
            mode,
            iterations,
        } => {
            let (mut cfg, input) = analysis_setup(common)?;
            if let Some(m) = mode {
                cfg.sensitivity.mode = match m {
                    ModeArg::Exact => SobolMode::Exact,
                    ModeArg::Mc => SobolMode::MonteCarlo,
                };
            }
            if let Some(n) = iterations {
                cfg.sensitivity.iterations = *n;
            }
            cfg.validate()?;
            let space = evaluate_space(&input, &cfg.space, &cfg.settings)?;
            let fs = cfg.space.factor_space();
            let outputs = space.rank_outputs();
            let sa = match cfg.sensitivity.mode {
                SobolMode::Exact => sobol_exact(&fs, &outputs, &space.units)?,
                SobolMode::MonteCarlo => sobol_mc(
                    &fs,
                    &outputs,
                    &space.units,
                    cfg.sensitivity.iterations,
                    cfg.seed,
                    cfg.sensitivity.resamples,
                )?,
            };
            write(&common.out, report::sobol_csv(&sa)?)
        }
        Analyze::Ua { common, iterations } => {
            let (mut cfg, input) = analysis_setup(common)?;
            if let Some(n) = iterations {
                cfg.uncertainty.iterations = *n;
            }
            cfg.validate()?;
            let reference = run_pipeline(&input, &cfg.pipeline, &cfg.settings)?.ranks;
            let space = evaluate_space(&input, &cfg.space, &cfg.settings)?;
            let bands = uncertainty_bands(
                &cfg.space.factor_space(),
                &space.ranks,
                &space.units,
                &reference,
                cfg.uncertainty.iterations,
                cfg.seed,
            )?;
            write(&common.out, report::bands_csv(&bands)?)
        }
        Analyze::Rankshift { common, level } => {
            let (cfg, input) = analysis_setup(common)?;
            let level = match level {
                LevelArg::Indicator => RemovalLevel::Indicator,
                LevelArg::Subdomain => RemovalLevel::Subdomain,
            };
            let shifts = rank_shift_removal(&input, &cfg.pipeline, &cfg.settings, level)?;
            write(&common.out, report::rank_shift_csv(&shifts)?)
        }
    }
}

fn plot_command(kind: PlotKind, input: &Path, out: &Path, title: Option<&str>) -> Result<()> {
    let svg = match kind {
        PlotKind::Heatmap => {
            let (names, matrix) = report::read_correlation(input)?;
            svg::heatmap(title.unwrap_or("Correlations"), &names, &matrix)
        }
        PlotKind::Bands => svg::rank_bands(title.unwrap_or("Rank uncertainty"), &report::read_bands(input)?),
        PlotKind::Sa => svg::sobol_bars(title.unwrap_or("Sensitivity indices"), &report::read_sobol(input)?),
        PlotKind::Rankshift => svg::rank_shift_bars(
            title.unwrap_or("Mean absolute rank shift"),
            &report::read_rank_shifts(input)?,
        ),
    };
    write(out, svg.into_bytes())
}

fn fixture_command(out: &Path, seed: u64, units: usize, years: usize) -> Result<()> {
    let opts = FixtureOptions {
        seed,
        units,
        years,
        ..FixtureOptions::default()
    };
    if units < 18 || years < 2 {
        return Err(Error::Config("the fixture needs at least 18 units and 2 years".into()));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let fixture = synthetic_fixture(&opts)?;
    write_fixture(&fixture, out)?;
    let cfg = RunConfig::new(
        "data.csv".into(),
        "hierarchy.json".into(),
        "population.csv".into(),
        compindex::analysis::PipelineSettings::new(opts.first_year),
    );
    io::write_json(&out.join("run.json"), &cfg)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Impute {
            data,
            hierarchy,
            out,
            gaps,
        } => {
            let (raw, supp) = io::read_panel_file(&data)?;
            let h = io::read_hierarchy_file(&hierarchy)?;
            h.check_tensor(&raw)?;
            let report = classify_missing(&raw, &supp)?;
            let imputed = impute(&raw, &h, &report)?;
            io::write_panel_file(&out, &imputed, None)?;
            if let Some(path) = gaps {
                io::write_json(&path, &report)?;
            }
            Ok(())
        }
        Command::Treat {
            data,
            mode,
            k_max,
            out,
            plan,
        } => {
            let imputed = read_stage(&data, Stage::Imputed)?;
            let mode = match mode {
                TreatArg::Ons => TreatmentMode::Ons,
                TreatArg::Modified => TreatmentMode::Modified { k_max },
            };
            let (treated, p) = treat(&imputed, mode)?;
            io::write_panel_file(&out, &treated, None)?;
            if let Some(path) = plan {
                io::write_json(&path, &p)?;
            }
            Ok(())
        }
        Command::Normalize {
            data,
            population,
            hierarchy,
            method,
            baseline_year,
            out,
            params,
        } => {
            let treated = read_stage(&data, Stage::Treated)?;
            let h = io::read_hierarchy_file(&hierarchy)?;
            h.check_tensor(&treated)?;
            let pop = io::read_population_file(&population)?;
            let p = fit_method(&treated, &pop, &h, method.into(), baseline_year)?;
            let z = normalize(&treated, &p)?;
            io::write_panel_file(&out, &z, None)?;
            if let Some(path) = params {
                io::write_json(&path, &p)?;
            }
            Ok(())
        }
        Command::Weights(a) => weights_command(&a),
        Command::Aggregate(a) => aggregate_command(&a),
        Command::Analyze { what } => analyze_command(&what),
        Command::Plot {
            kind,
            input,
            out,
            title,
        } => plot_command(kind, &input, &out, title.as_deref()),
        Command::Run { config, out } => {
            let summary = report::run_all(&config, &out)?;
            println!(
                "wrote {} files to {} (config {})",
                summary.manifest.outputs.len() + 1,
                summary.dir.display(),
                &summary.manifest.config_sha256[..12]
            );
            Ok(())
        }
        Command::Compare { a, b, out } => {
            let cmp = report::compare_runs(&a, &b)?;
            write(&out, report::comparison_csv(&cmp)?)?;
            println!("{}", serde_json::to_string_pretty(&cmp.bands)?);
            Ok(())
        }
        Command::Fixture {
            out,
            seed,
            units,
            years,
        } => fixture_command(&out, seed, units, years),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
