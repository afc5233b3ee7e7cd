//! `sketchbot` command line: plan, run, batch, gen and report.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure,
//! 3 internal error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sketchbot_core::error::IoError;
use sketchbot_core::io::{self, NoiseLevels, ParamsFile, ResultsFile, ScenarioFile, SketchFile, SCHEMA_VERSION};
use sketchbot_core::metrics::{aggregate, MetricsReport, ToleranceName, TrialRow};
use sketchbot_core::service::{self, ExecuteOptions, ServiceError};
use sketchbot_core::world::{GeometryMode, LengthCategory, NoiseModel, ScenarioSpec, SceneType};

pub const DATA_DIR_ENV: &str = "SKETCHBOT_DATA_DIR";

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Validation(e) => CliError::Validation(e.to_string()),
            ServiceError::Runtime(m) => CliError::Runtime(m),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            e => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sketchbot", version, about = "Plan, execute and evaluate sketch-instructed robot tasks")]
pub struct Cli {
    /// Directory searched for relative input paths and used for generated files
    #[arg(long, global = true, env = DATA_DIR_ENV, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a sketch and print the macro-action chosen for every segment
    Plan(PlanArgs),
    /// Execute one sketch in a scene and write the trial
    Run(RunArgs),
    /// Run generated trials in parallel and write a results file
    Batch(BatchArgs),
    /// Generate scenario files (scene, sketch and reference path)
    Gen(GenArgs),
    /// Render tables from one or more results files
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Csv,
    Structured,
}

/// Parameter file and per-flag overrides.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Parameter file; flags below override its values
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Forward step length in meters [default: 0.05]
    #[arg(long, value_name = "M")]
    pub d_step: Option<f64>,
    /// Safety distance in meters [default: 0.30]
    #[arg(long, value_name = "M")]
    pub d_safety: Option<f64>,
    /// Required under-obstacle clearance in meters [default: 1.00]
    #[arg(long, value_name = "M")]
    pub h_clearance: Option<f64>,
    /// Maximum path segment length in meters [default: 0.5]
    #[arg(long, value_name = "M")]
    pub l_max: Option<f64>,
    /// Allowed turn magnitudes in degrees, comma separated [default: 45,90]
    #[arg(long, value_name = "DEG,..", value_parser = parse_turn_set)]
    pub turn_set: Option<List<f64>>,
    /// Decision policy
    #[arg(long, default_value = "rules")]
    pub policy: String,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long, value_name = "FILE")]
    pub sketch: PathBuf,
    /// Scene whose scale and start heading ground the sketch
    #[arg(long, value_name = "FILE")]
    pub scene: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "FILE", required_unless_present = "scenario")]
    pub sketch: Option<PathBuf>,
    #[arg(long, value_name = "FILE", required_unless_present = "scenario")]
    pub scene: Option<PathBuf>,
    /// Scenario file; supplies scene, sketch and the reference path
    #[arg(long, value_name = "FILE", conflicts_with_all = ["sketch", "scene"])]
    pub scenario: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Noise seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noise sigmas: longitudinal m, lateral m, rotation deg [default: 0.005,0.005,1.0]
    #[arg(long, value_name = "SL,SLAT,ST", value_parser = parse_noise)]
    pub noise: Option<NoiseLevels>,
    #[arg(long, value_enum, default_value = "floor")]
    pub tolerance_profile: ToleranceArg,
    /// Write the trial document here
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ToleranceArg {
    Floor,
    Tabletop,
}

impl ToleranceArg {
    fn name(self) -> ToleranceName {
        match self {
            ToleranceArg::Floor => ToleranceName::Floor,
            ToleranceArg::Tabletop => ToleranceName::Tabletop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeometryArg {
    Octilinear,
    Freeform,
}

impl From<GeometryArg> for GeometryMode {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Octilinear => GeometryMode::Octilinear,
            GeometryArg::Freeform => GeometryMode::Freeform,
        }
    }
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Scene types, comma separated, or "all"
    #[arg(long, default_value = "all", value_parser = parse_scenes)]
    pub scenes: List<SceneType>,
    /// Length categories, comma separated
    #[arg(long, default_value = "short,medium,long", value_parser = parse_categories)]
    pub categories: List<LengthCategory>,
    /// Trials per category (seeds 0..N) when --seeds is absent
    #[arg(long, default_value_t = 10)]
    pub trials: u64,
    /// Seed list "a,b,c" or range "a..b"
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: Option<List<u64>>,
    /// Noise sigmas: longitudinal m, lateral m, rotation deg [default: 0.005,0.005,1.0]
    #[arg(long, value_name = "SL,SLAT,ST", value_parser = parse_noise)]
    pub noise: Option<NoiseLevels>,
    #[arg(long, value_enum, default_value = "octilinear")]
    pub geometry: GeometryArg,
    #[arg(long, value_enum, default_value = "floor")]
    pub tolerance_profile: ToleranceArg,
    /// Worker threads [default: available cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Write the results document here
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_parser = parse_category)]
    pub category: LengthCategory,
    /// Scene type; cycles through all types when absent
    #[arg(long, value_parser = parse_scene)]
    pub scene_type: Option<SceneType>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long, value_enum, default_value = "octilinear")]
    pub geometry: GeometryArg,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Output directory [default: the data directory]
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Results files
    #[arg(required = true)]
    pub results: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: ReportFormat,
}

/// A comma-separated flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

pub fn parse_turn_set(s: &str) -> Result<List<f64>, String> {
    let v: Vec<f64> = split_list(s)
        .map(|t| t.parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err("turn set is empty".into());
    }
    Ok(List(v))
}

pub fn parse_noise(s: &str) -> Result<NoiseLevels, String> {
    let v: Vec<f64> = split_list(s)
        .map(|t| t.parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<_, _>>()?;
    let levels = match v.as_slice() {
        [x] => NoiseLevels {
            sigma_long_m: *x,
            sigma_lat_m: *x,
            sigma_turn_deg: *x,
        },
        [l, lat, t] => NoiseLevels {
            sigma_long_m: *l,
            sigma_lat_m: *lat,
            sigma_turn_deg: *t,
        },
        _ => return Err("expected three sigmas: longitudinal,lateral,rotation".into()),
    };
    if !levels.model(0).is_valid() {
        return Err("sigmas must be finite and non-negative".into());
    }
    Ok(levels)
}

fn parse_category(s: &str) -> Result<LengthCategory, String> {
    s.parse()
}

fn parse_scene(s: &str) -> Result<SceneType, String> {
    s.parse()
}

fn parse_categories(s: &str) -> Result<List<LengthCategory>, String> {
    split_list(s).map(str::parse).collect::<Result<_, _>>().map(List)
}

fn parse_scenes(s: &str) -> Result<List<SceneType>, String> {
    if s.trim() == "all" {
        return Ok(List(SceneType::ALL.to_vec()));
    }
    split_list(s).map(str::parse).collect::<Result<_, _>>().map(List)
}

pub fn parse_seeds(s: &str) -> Result<List<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("'{a}': {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("'{b}': {e}"))?;
        if b <= a {
            return Err(format!("empty seed range {s}"));
        }
        return Ok(List((a..b).collect()));
    }
    split_list(s)
        .map(|t| t.parse::<u64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<_, _>>()
        .map(List)
}

/// Resolve an input path: as given when it exists, else under the data
/// directory.
fn resolve(path: &Path, data_dir: Option<&Path>) -> PathBuf {
    match data_dir {
        Some(d) if path.is_relative() && !path.exists() => d.join(path),
        _ => path.to_path_buf(),
    }
}

fn load_params(args: &ParamArgs, data_dir: Option<&Path>) -> Result<ParamsFile, CliError> {
    let mut p = match &args.params {
        Some(f) => io::read::<ParamsFile>(resolve(f, data_dir))?,
        None => ParamsFile::default(),
    };
    let c = &mut p.control;
    if let Some(v) = args.d_step {
        c.d_step_m = v;
    }
    if let Some(v) = args.d_safety {
        c.d_safety_m = v;
    }
    if let Some(v) = args.h_clearance {
        c.h_clearance_m = v;
    }
    if let Some(v) = args.l_max {
        c.l_max_m = v;
    }
    if let Some(v) = &args.turn_set {
        c.turn_set = v.0.clone();
    }
    io::validate_control(&p.control, "control.")?;
    io::validate_platform(&p.platform, "platform.")?;
    Ok(p)
}

fn default_noise() -> NoiseLevels {
    NoiseLevels::from_model(&NoiseModel::calibrated(0))
}

fn write_doc<T: Serialize>(path: impl AsRef<Path>, doc: &T) -> Result<(), CliError> {
    io::write(path, doc).map_err(|e| CliError::Runtime(e.to_string()))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Runtime(format!("writing output: {e}")))
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let data_dir = cli.data_dir.as_deref();
    match &cli.command {
        Command::Plan(a) => cmd_plan(a, data_dir, out),
        Command::Run(a) => cmd_run(a, data_dir, out),
        Command::Batch(a) => cmd_batch(a, data_dir, out, err),
        Command::Gen(a) => cmd_gen(a, data_dir, out),
        Command::Report(a) => cmd_report(a, data_dir, out),
    }
}

fn cmd_plan(a: &PlanArgs, data_dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let params = load_params(&a.params, data_dir)?;
    let sketch: SketchFile = io::read(resolve(&a.sketch, data_dir))?;
    let scene = match &a.scene {
        Some(p) => Some(io::load_scene(resolve(p, data_dir))?),
        None => None,
    };
    let plan = service::plan(&sketch, scene.as_ref(), &params, &a.params.policy)?;
    match a.format {
        Format::Structured => emit(out, &io::to_string(&plan)),
        Format::Text => emit(out, &render_plan(&plan)),
    }
}

pub fn render_plan(plan: &service::PlanOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>4} {:>6} {:>9} {:>9} {:>7} {:>6} {:<12} {:>5} {:>5}",
        "seg", "stroke", "length_m", "dpsi_deg", "corners", "rule", "action", "conf", "lanes"
    );
    for r in &plan.rows {
        let _ = writeln!(
            s,
            "{:>4} {:>6} {:>9.3} {:>9.1} {:>7} {:>6} {:<12} {:>5.2} {:>5}",
            r.index,
            r.stroke_index,
            r.length_m,
            r.delta_yaw_deg,
            r.corners,
            r.rule_fired.to_string(),
            r.action.token(),
            r.confidence,
            r.lanes.map_or_else(|| "-".to_string(), |n| n.to_string())
        );
    }
    let actions: Vec<String> = plan.actions.iter().map(|a| a.token()).collect();
    let _ = writeln!(s, "actions: {}", actions.join(" "));
    s
}

fn cmd_run(a: &RunArgs, data_dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let params = load_params(&a.params, data_dir)?;
    let (sketch, scene, reference) = match &a.scenario {
        Some(p) => {
            let f: ScenarioFile = io::read(resolve(p, data_dir))?;
            (f.sketch, f.scene.to_grid()?, Some(f.reference))
        }
        None => {
            let sketch: SketchFile = io::read(resolve(a.sketch.as_ref().unwrap(), data_dir))?;
            let scene = io::load_scene(resolve(a.scene.as_ref().unwrap(), data_dir))?;
            (sketch, scene, None)
        }
    };
    let noise = a.noise.unwrap_or_else(default_noise).model(a.seed);
    let opts = ExecuteOptions {
        noise,
        policy: a.params.policy.clone(),
        tolerance: a.tolerance_profile.name().profile(),
    };
    let trial = service::execute(&sketch, &scene, &params, &opts, reference.as_deref())?;
    if let Some(path) = &a.out {
        write_doc(path, &trial)?;
    }
    match a.format {
        Format::Structured => emit(out, &io::to_string(&trial)),
        Format::Text => {
            let row = trial.judged.as_ref().expect("execute judges the trial");
            let yn = |b: bool| if b { "yes" } else { "no" };
            emit(
                out,
                &format!(
                    "segments {} succeeded {} adherent {} FTCR {} FTSPAR {} DTW {:.4} ({:.4}/m) steps {}/{}\n",
                    row.segments,
                    row.successes,
                    row.adherent,
                    yn(row.ftcr),
                    yn(row.ftspar),
                    row.dtw,
                    row.dtw_per_m,
                    trial.trial.steps,
                    trial.trial.step_budget
                ),
            )
        }
    }
}

/// A batch: generated scenarios for each category and seed, scene types
/// cycling over the selected list.
#[derive(Debug, Clone)]
pub struct BatchConfig {
    pub categories: Vec<LengthCategory>,
    pub scenes: Vec<SceneType>,
    pub seeds: Vec<u64>,
    pub geometry: GeometryMode,
    pub noise: NoiseLevels,
    pub params: ParamsFile,
    pub policy: String,
    pub tolerance: ToleranceName,
    pub jobs: Option<usize>,
}

impl BatchConfig {
    pub fn specs(&self) -> Vec<ScenarioSpec> {
        let mut specs = Vec::with_capacity(self.categories.len() * self.seeds.len());
        for &c in &self.categories {
            for (i, &seed) in self.seeds.iter().enumerate() {
                let st = self.scenes[i % self.scenes.len()];
                specs.push(ScenarioSpec::new(c, st, seed).with_geometry(self.geometry));
            }
        }
        specs
    }
}

/// Run every trial of the batch. Rows come back in spec order whatever the
/// thread count.
pub fn run_batch(cfg: &BatchConfig) -> Result<ResultsFile, CliError> {
    if cfg.scenes.is_empty() || cfg.categories.is_empty() || cfg.seeds.is_empty() {
        return Err(CliError::Validation("batch has no trials".into()));
    }
    let tolerance = cfg.tolerance.profile();
    let specs = cfg.specs();
    let one = |spec: &ScenarioSpec| -> Result<TrialRow, CliError> {
        service::scenario_trial(spec, &cfg.params, &cfg.noise, &cfg.policy, &tolerance)
            .map(|(_, row)| row)
            .map_err(CliError::from)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let rows: Vec<TrialRow> = pool.install(|| specs.par_iter().map(one).collect::<Result<_, _>>())?;
    let report = aggregate(&rows).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(ResultsFile {
        schema_version: SCHEMA_VERSION,
        policy: cfg.policy.clone(),
        control: cfg.params.control.clone(),
        platform: cfg.params.platform.clone(),
        noise: cfg.noise,
        tolerance,
        rows,
        report,
    })
}

fn cmd_batch(a: &BatchArgs, data_dir: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let params = load_params(&a.params, data_dir)?;
    let cfg = BatchConfig {
        categories: a.categories.0.clone(),
        scenes: a.scenes.0.clone(),
        seeds: a.seeds.as_ref().map_or_else(|| (0..a.trials).collect(), |s| s.0.clone()),
        geometry: a.geometry.into(),
        noise: a.noise.unwrap_or_else(default_noise),
        params,
        policy: a.params.policy.clone(),
        tolerance: a.tolerance_profile.name(),
        jobs: a.jobs,
    };
    let _ = writeln!(err, "batch: {} trials", cfg.specs().len());
    let results = run_batch(&cfg)?;
    if let Some(path) = &a.out {
        write_doc(path, &results)?;
    }
    match a.format {
        Format::Structured => emit(out, &io::to_string(&results)),
        Format::Text => emit(out, &results.report.render_text()),
    }
}

fn scenario_name(spec: &ScenarioSpec) -> String {
    format!(
        "{}-{}-{}",
        spec.length_category.label().to_lowercase(),
        spec.scene_type.key(),
        spec.seed
    )
}

fn cmd_gen(a: &GenArgs, data_dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let params = load_params(&a.params, data_dir)?;
    let dir = a.out_dir.clone().or_else(|| data_dir.map(Path::to_path_buf));
    if dir.is_none() && a.count != 1 {
        return Err(CliError::Validation(format!(
            "--out-dir or {DATA_DIR_ENV} is required when --count is not 1"
        )));
    }
    for k in 0..a.count {
        let seed = a.seed + k;
        let st = a.scene_type.unwrap_or(SceneType::ALL[(seed % SceneType::ALL.len() as u64) as usize]);
        let spec = ScenarioSpec::new(a.category, st, seed).with_geometry(a.geometry.into());
        let file = service::scenario(&spec, &params)?;
        match &dir {
            None => match a.format {
                Format::Structured => emit(out, &io::to_string(&file))?,
                Format::Text => emit(out, &gen_line(&file, None))?,
            },
            Some(dir) => {
                let name = scenario_name(&spec);
                for sub in ["scenarios", "scenes", "sketches"] {
                    std::fs::create_dir_all(dir.join(sub))
                        .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.join(sub).display())))?;
                }
                let path = dir.join("scenarios").join(format!("{name}.json"));
                write_doc(&path, &file)?;
                write_doc(dir.join("scenes").join(format!("{name}.json")), &file.scene)?;
                write_doc(dir.join("sketches").join(format!("{name}.json")), &file.sketch)?;
                emit(out, &gen_line(&file, Some(&path)))?;
            }
        }
    }
    Ok(())
}

fn gen_line(f: &ScenarioFile, path: Option<&Path>) -> String {
    format!(
        "{}{} {} seed {} corners {} reference {:.2} m\n",
        path.map_or_else(String::new, |p| format!("{} ", p.display())),
        f.spec.length_category.label(),
        f.spec.scene_type.key(),
        f.spec.seed,
        f.corner_count,
        f.reference.windows(2).map(|w| w[0].distance(w[1])).sum::<f64>()
    )
}

/// One results file summarized for the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEntry {
    pub source: String,
    pub turn_set: Vec<f64>,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportOutput {
    pub schema_version: u32,
    pub entries: Vec<ReportEntry>,
}

/// Side-by-side rates for files that differ in turn set.
pub fn render_turn_set_table(entries: &[ReportEntry]) -> String {
    let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}"));
    let mut s = format!(
        "{:<20} {:>6} {:>7} {:>7} {:>7} {:>7}\n",
        "turn set", "trials", "SSSR", "SSSPAR", "FTCR", "FTSPAR"
    );
    for e in entries {
        let ts: Vec<String> = e.turn_set.iter().map(|t| t.to_string()).collect();
        let r = &e.report.overall;
        let _ = writeln!(
            s,
            "{:<20} {:>6} {:>7} {:>7} {:>7} {:>7}",
            format!("{{{}}}", ts.join(", ")),
            r.trials,
            f(r.sssr),
            f(r.ssspar),
            f(r.ftcr),
            f(r.ftspar)
        );
    }
    s
}

fn cmd_report(a: &ReportArgs, data_dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let mut entries = Vec::new();
    for p in &a.results {
        let path = resolve(p, data_dir);
        let r: ResultsFile = io::read(&path)?;
        entries.push(ReportEntry {
            source: p.display().to_string(),
            turn_set: r.control.turn_set.clone(),
            report: r.report,
        });
    }
    match a.format {
        ReportFormat::Structured => emit(
            out,
            &io::to_string(&ReportOutput {
                schema_version: SCHEMA_VERSION,
                entries,
            }),
        ),
        ReportFormat::Csv => {
            let mut s = String::new();
            for (k, e) in entries.iter().enumerate() {
                let csv = e.report.render_csv();
                let mut lines = csv.lines();
                let header = lines.next().unwrap_or_default();
                if k == 0 {
                    let _ = writeln!(s, "source,turn_set,{header}");
                }
                let ts: Vec<String> = e.turn_set.iter().map(|t| t.to_string()).collect();
                for l in lines {
                    let _ = writeln!(s, "{},{},{l}", e.source, ts.join(" "));
                }
            }
            emit(out, &s)
        }
        ReportFormat::Text => {
            let mut s = String::new();
            for e in &entries {
                let _ = writeln!(s, "== {}", e.source);
                s.push_str(&e.report.render_text());
                s.push('\n');
            }
            if entries.len() > 1 {
                s.push_str("action-space comparison\n");
                s.push_str(&render_turn_set_table(&entries));
            }
            emit(out, &s)
        }
    }
}
