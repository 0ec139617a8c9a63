//! Command implementations behind the `nloskit` binary.
//!
//! Output layout of `simulate`:
//!
//! ```text
//! <out>/run.json             run settings, read back by `report`
//! <out>/scenario.json        the scenario as run (after overrides)
//! <out>/rep_000/log.csv      measurement log
//! <out>/rep_000/truth.csv    k,t,truth_x,truth_y,lap
//! <out>/rep_000/fixes_<estimator>.csv
//! <out>/report.csv, report.txt, cdf_<estimator>.csv
//! <out>/trajectory.svg       first repetition
//! ```
//!
//! `replay` writes the same files without the `rep_` level.

pub mod args;
pub mod svg;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nloskit::io::{
    first_row_of_lap, format_report_table, read_fixes, read_measurement_log, read_truth, write_cdf, write_fixes,
    write_measurement_log, write_report_csv, write_truth, write_truth_rows, TruthRow,
};
use nloskit::scenario::resolve_exclusion;
use nloskit::{run_pipeline, simulate, summarize, ErrorMode, ErrorReport, EstimatorKind, Exclusion, Fix, Scenario};

use args::{Cli, Command, CommonArgs, ReplayArgs, ReportArgs, SimulateArgs};

pub const OUT_ENV: &str = "NLOSKIT_OUT";
const MANIFEST: &str = "run.json";

/// Everything needed to run the estimators over a scenario.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub scenario: Scenario,
    pub estimators: Vec<EstimatorKind>,
    pub reps: usize,
    pub base_seed: u64,
    pub out: PathBuf,
    pub metric: ErrorMode,
    /// Exclusion spec: ranges, `lap1` or `none`.
    pub exclude: String,
    pub svg: bool,
}

impl RunSpec {
    /// A spec with the scenario's own defaults and all estimators.
    pub fn new(scenario: Scenario, out: impl Into<PathBuf>) -> Self {
        Self {
            estimators: EstimatorKind::ALL.to_vec(),
            reps: 1,
            base_seed: scenario.seed,
            out: out.into(),
            metric: scenario.metric(),
            exclude: scenario.report_exclude.clone().unwrap_or_else(|| "none".into()),
            svg: true,
            scenario,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.reps >= 1, "--reps must be at least 1");
        ensure!(!self.estimators.is_empty(), "select at least one estimator");
        let mut seen = self.estimators.clone();
        seen.sort_by_key(|k| k.name());
        seen.dedup();
        ensure!(seen.len() == self.estimators.len(), "estimator listed twice");
        ensure!(self.base_seed.checked_add(self.reps as u64 - 1).is_some(), "seed range overflows u64");
        self.scenario.estimator_config()?;
        Ok(())
    }

    fn seed(&self, rep: usize) -> u64 {
        self.base_seed + rep as u64
    }
}

/// Settings persisted next to the outputs so `report` can reproduce them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub title: String,
    pub estimators: Vec<String>,
    pub metric: String,
    pub exclude: String,
}

/// What a run produced, for callers that want the numbers without reparsing.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub reports: Vec<ErrorReport>,
    /// Fixes per repetition, in estimator order.
    pub fixes: Vec<Vec<(EstimatorKind, Vec<Fix>)>>,
}

/// One repetition's data as seen by the report stage.
struct RepData {
    label: String,
    truth: Vec<TruthRow>,
    fixes: Vec<(String, Vec<Fix>)>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let spec = simulate_spec(&a)?;
            let out = cmd_simulate(&spec)?;
            print_reports(&spec.out, &out.reports);
        }
        Command::Replay(a) => {
            let spec = replay_spec(&a)?;
            let out = cmd_replay(&spec, &a.log, a.truth.as_deref())?;
            print_reports(&spec.out, &out.reports);
        }
        Command::Report(a) => {
            let (out_dir, reports) = cmd_report(&a)?;
            print_reports(&out_dir, &reports);
        }
    }
    Ok(())
}

fn print_reports(out: &Path, reports: &[ErrorReport]) {
    if !reports.is_empty() {
        print!("{}", format_report_table("", reports).trim_start());
    }
    println!("outputs written to {}", out.display());
}

/// `NLOSKIT_OUT` wins over `--out`; `fallback` applies when neither is set.
pub fn resolve_out(flag: Option<&Path>, fallback: &Path) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => flag.map_or_else(|| fallback.to_path_buf(), Path::to_path_buf),
    }
}

/// Loads a bundled scenario by name, or a JSON file by path.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    if let Some(sc) = Scenario::bundled(name_or_path) {
        return Ok(sc);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        let names: Vec<_> = Scenario::bundled_names().collect();
        bail!("scenario {name_or_path:?} is neither a file nor a bundled scenario ({})", names.join(", "));
    }
    Ok(Scenario::load(path)?)
}

pub fn parse_estimators(list: &[String]) -> Result<Vec<EstimatorKind>> {
    list.iter().filter(|s| !s.trim().is_empty()).map(|s| Ok(s.trim().parse()?)).collect()
}

fn parse_metric(m: &str) -> Result<ErrorMode> {
    Ok(m.parse::<ErrorMode>()?)
}

fn apply_common(spec: &mut RunSpec, common: &CommonArgs) -> Result<()> {
    spec.estimators = parse_estimators(&common.estimators)?;
    if let Some(m) = &common.metric {
        spec.metric = parse_metric(m)?;
    }
    if let Some(e) = &common.exclude {
        spec.exclude = e.clone();
    }
    if let Some(chi2) = common.chi2 {
        spec.scenario.estimator.chi2_threshold = chi2;
    }
    spec.svg = !common.no_svg;
    spec.out = resolve_out(common.out.as_deref(), Path::new("out"));
    Ok(())
}

fn simulate_spec(a: &SimulateArgs) -> Result<RunSpec> {
    let scenario = load_scenario(&a.scenario)?;
    let mut spec = RunSpec::new(scenario, "out");
    apply_common(&mut spec, &a.common)?;
    spec.reps = a.reps;
    if let Some(seed) = a.seed {
        spec.base_seed = seed;
    }
    spec.validate()?;
    Ok(spec)
}

fn replay_spec(a: &ReplayArgs) -> Result<RunSpec> {
    let scenario = load_scenario(&a.scenario)?;
    let mut spec = RunSpec::new(scenario, "out");
    // The scenario's default exclusion describes its simulated trajectory, not the log.
    spec.exclude = "none".into();
    apply_common(&mut spec, &a.common)?;
    spec.validate()?;
    Ok(spec)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn fixes_file(kind_slug: &str) -> String {
    format!("fixes_{kind_slug}.csv")
}

/// Runs every repetition of a scenario and writes all artifacts under `spec.out`.
pub fn cmd_simulate(spec: &RunSpec) -> Result<RunOutput> {
    spec.validate()?;
    let sc = &spec.scenario;
    let config = sc.estimator_config()?;
    let anchors = sc.anchors.iter().map(|a| a.position).collect::<Vec<_>>();
    let n = anchors.len();
    fs::create_dir_all(&spec.out).with_context(|| format!("cannot create {}", spec.out.display()))?;

    let results = (0..spec.reps)
        .into_par_iter()
        .map(|j| -> Result<_> {
            let seed = spec.seed(j);
            let ctx = || format!("repetition {j} (seed {seed})");
            let sim = simulate(&sc.sim_config(seed)).with_context(ctx)?;
            let dir = spec.out.join(format!("rep_{j:03}"));
            fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let log_path = dir.join("log.csv");
            write_measurement_log(create(&log_path)?, &sim.epochs, n).with_context(|| log_path.display().to_string())?;
            let truth_path = dir.join("truth.csv");
            write_truth(create(&truth_path)?, &sim.trajectory).with_context(|| truth_path.display().to_string())?;
            let mut fixes = Vec::new();
            for &kind in &spec.estimators {
                let f = run_pipeline(kind, &sim.epochs, &anchors, &config)
                    .with_context(|| format!("{} on {}", kind, ctx()))?;
                let path = dir.join(fixes_file(kind.slug()));
                write_fixes(create(&path)?, &f, n).with_context(|| path.display().to_string())?;
                fixes.push((kind, f));
            }
            let truth: Vec<TruthRow> = sim
                .trajectory
                .samples
                .iter()
                .enumerate()
                .map(|(k, s)| TruthRow { k, t: s.t, position: s.position, lap: Some(s.lap) })
                .collect();
            Ok((sim.walls, truth, fixes))
        })
        .collect::<Result<Vec<_>>>()?;

    let last = spec.seed(spec.reps - 1);
    let plural = if spec.reps == 1 { "" } else { "s" };
    let title = format!("{}: {} repetition{plural}, seeds {}..={last}", sc.name, spec.reps, spec.base_seed);
    let manifest = RunManifest {
        title: title.clone(),
        estimators: spec.estimators.iter().map(|k| k.name().to_string()).collect(),
        metric: spec.metric.to_string(),
        exclude: spec.exclude.clone(),
    };
    write_text(&spec.out.join("scenario.json"), &(sc.to_json() + "\n"))?;
    write_text(&spec.out.join(MANIFEST), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;

    let reps: Vec<RepData> = results
        .iter()
        .enumerate()
        .map(|(j, (_, truth, fixes))| RepData {
            label: format!("rep_{j:03}"),
            truth: truth.clone(),
            fixes: fixes.iter().map(|(k, f)| (k.name().to_string(), f.clone())).collect(),
        })
        .collect();
    let reports = aggregate(&reps, spec.metric, &spec.exclude)?;
    write_reports(&spec.out, &title, &reports)?;

    if spec.svg {
        let (walls, truth, fixes) = &results[0];
        let plot = svg::PlotData {
            title: &format!("{} (seed {})", sc.name, spec.base_seed),
            anchors: &sc.anchors,
            walls,
            truth: Some(truth.iter().map(|r| r.position).collect()),
            paths: fixes.iter().map(|(k, f)| (k.name(), f.iter().map(|x| x.position).collect())).collect(),
        };
        write_text(&spec.out.join("trajectory.svg"), &svg::render(&plot))?;
    }

    Ok(RunOutput { reports, fixes: results.into_iter().map(|(_, _, f)| f).collect() })
}

/// Runs the estimators over a recorded log. Reports are written only when
/// ground truth is available for every epoch.
pub fn cmd_replay(spec: &RunSpec, log_path: &Path, truth_path: Option<&Path>) -> Result<RunOutput> {
    spec.validate()?;
    let sc = &spec.scenario;
    let log = read_measurement_log(open(log_path)?).with_context(|| format!("{}", log_path.display()))?;
    ensure!(!log.epochs.is_empty(), "{}: log has no epochs", log_path.display());
    ensure!(
        log.n_anchors == sc.anchors.len(),
        "{}: log has {} range columns but scenario {:?} has {} anchors",
        log_path.display(),
        log.n_anchors,
        sc.name,
        sc.anchors.len()
    );
    if let [a, b, ..] = log.epochs.as_slice() {
        let step = b.t - a.t;
        if (step - sc.dt).abs() > 1e-6 * sc.dt.max(1.0) {
            eprintln!("warning: log time step {step} differs from the scenario dt {}; filters use dt = {}", sc.dt, sc.dt);
        }
    }

    let truth: Option<Vec<TruthRow>> = match truth_path {
        Some(p) => Some(read_truth(open(p)?).with_context(|| format!("{}", p.display()))?),
        None if log.has_truth() => Some(
            log.epochs.iter().map(|e| TruthRow { k: e.k, t: e.t, position: e.truth.unwrap(), lap: None }).collect(),
        ),
        None => None,
    };

    let config = sc.estimator_config()?;
    let anchors = sc.anchors.iter().map(|a| a.position).collect::<Vec<_>>();
    fs::create_dir_all(&spec.out).with_context(|| format!("cannot create {}", spec.out.display()))?;
    let fixes = spec
        .estimators
        .par_iter()
        .map(|&kind| {
            let f = run_pipeline(kind, &log.epochs, &anchors, &config)
                .with_context(|| format!("{} on {}", kind, log_path.display()))?;
            Ok((kind, f))
        })
        .collect::<Result<Vec<_>>>()?;
    for (kind, f) in &fixes {
        let path = spec.out.join(fixes_file(kind.slug()));
        write_fixes(create(&path)?, f, log.n_anchors).with_context(|| path.display().to_string())?;
    }

    let file_name = log_path.file_name().map_or_else(|| log_path.display().to_string(), |s| s.to_string_lossy().into());
    let title = format!("{}: replay of {file_name}", sc.name);
    let manifest = RunManifest {
        title: title.clone(),
        estimators: spec.estimators.iter().map(|k| k.name().to_string()).collect(),
        metric: spec.metric.to_string(),
        exclude: spec.exclude.clone(),
    };
    write_text(&spec.out.join("scenario.json"), &(sc.to_json() + "\n"))?;
    write_text(&spec.out.join(MANIFEST), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;

    let mut reports = Vec::new();
    match &truth {
        Some(truth) => {
            let path = spec.out.join("truth.csv");
            write_truth_rows(create(&path)?, truth).with_context(|| path.display().to_string())?;
            let rep = RepData {
                label: log_path.display().to_string(),
                truth: truth.clone(),
                fixes: fixes.iter().map(|(k, f)| (k.name().to_string(), f.clone())).collect(),
            };
            reports = aggregate(std::slice::from_ref(&rep), spec.metric, &spec.exclude)?;
            write_reports(&spec.out, &title, &reports)?;
        }
        None => eprintln!("notice: {} has no ground truth; report skipped", log_path.display()),
    }

    if spec.svg {
        let plot = svg::PlotData {
            title: &title,
            anchors: &sc.anchors,
            walls: &sc.walls,
            truth: truth.as_ref().map(|t| t.iter().map(|r| r.position).collect()),
            paths: fixes.iter().map(|(k, f)| (k.name(), f.iter().map(|x| x.position).collect())).collect(),
        };
        write_text(&spec.out.join("trajectory.svg"), &svg::render(&plot))?;
    }

    Ok(RunOutput { reports, fixes: vec![fixes] })
}

fn read_fix_file(path: &Path) -> Result<Vec<Fix>> {
    let (_, fixes) = read_fixes(open(path)?).with_context(|| format!("{}", path.display()))?;
    ensure!(!fixes.is_empty(), "{}: no fixes in file", path.display());
    Ok(fixes)
}

fn estimator_name_from_file(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let short = stem.strip_prefix("fixes_").unwrap_or(&stem);
    short.parse::<EstimatorKind>().map_or_else(|_| short.to_string(), |k| k.name().to_string())
}

fn rep_dirs(input: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(input).with_context(|| format!("cannot read {}", input.display()))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with("rep_") && entry.file_type()?.is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        dirs.push(input.to_path_buf());
    }
    Ok(dirs)
}

/// Recomputes reports from fix files. Returns the output directory and the reports.
pub fn cmd_report(a: &ReportArgs) -> Result<(PathBuf, Vec<ErrorReport>)> {
    let manifest: Option<RunManifest> = match &a.input {
        Some(dir) if dir.join(MANIFEST).exists() => {
            let p = dir.join(MANIFEST);
            let text = fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display()))?;
            Some(serde_json::from_str(&text).with_context(|| format!("{}", p.display()))?)
        }
        _ => None,
    };
    let wanted: Option<Vec<String>> = match &a.estimators {
        Some(list) => Some(parse_estimators(list)?.iter().map(|k| k.name().to_string()).collect()),
        None => None,
    };
    let keep = |name: &str| wanted.as_ref().is_none_or(|w| w.iter().any(|n| n == name));

    let reps: Vec<RepData> = match &a.input {
        Some(input) => {
            let mut reps = Vec::new();
            for dir in rep_dirs(input)? {
                let truth_path = a.truth.clone().unwrap_or_else(|| dir.join("truth.csv"));
                let truth = read_truth(open(&truth_path)?).with_context(|| format!("{}", truth_path.display()))?;
                let mut fixes = Vec::new();
                for kind in EstimatorKind::ALL {
                    let path = dir.join(fixes_file(kind.slug()));
                    if path.exists() && keep(kind.name()) {
                        fixes.push((kind.name().to_string(), read_fix_file(&path)?));
                    }
                }
                ensure!(!fixes.is_empty(), "{}: no fix files found", dir.display());
                reps.push(RepData { label: dir.display().to_string(), truth, fixes });
            }
            reps
        }
        None => {
            let truth_path = a.truth.as_ref().expect("clap requires --truth with --fixes");
            let truth = read_truth(open(truth_path)?).with_context(|| format!("{}", truth_path.display()))?;
            let mut fixes = Vec::new();
            for path in &a.fixes {
                let name = estimator_name_from_file(path);
                if keep(&name) {
                    fixes.push((name, read_fix_file(path)?));
                }
            }
            ensure!(!fixes.is_empty(), "no fix files selected");
            vec![RepData { label: truth_path.display().to_string(), truth, fixes }]
        }
    };

    let metric = match (&a.metric, &manifest) {
        (Some(m), _) => parse_metric(m)?,
        (None, Some(m)) => parse_metric(&m.metric)?,
        (None, None) => ErrorMode::Euclidean,
    };
    let exclude = a.exclude.clone().or_else(|| manifest.as_ref().map(|m| m.exclude.clone())).unwrap_or("none".into());
    let reports = aggregate(&reps, metric, &exclude)?;

    let fallback = a.input.clone().unwrap_or_else(|| PathBuf::from("out"));
    let out = resolve_out(a.out.as_deref(), &fallback);
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let title = manifest.map_or_else(|| "report".to_string(), |m| m.title);
    write_reports(&out, &title, &reports)?;
    Ok((out, reports))
}

/// Checks that the fixes and the truth cover the same epochs.
fn check_epochs(rep: &RepData) -> Result<()> {
    for (name, fixes) in &rep.fixes {
        ensure!(
            fixes.len() == rep.truth.len(),
            "{}: {name} has {} fixes but the truth has {} epochs",
            rep.label,
            fixes.len(),
            rep.truth.len()
        );
        if let Some((f, t)) = fixes.iter().zip(&rep.truth).find(|(f, t)| f.k != t.k) {
            bail!("{}: {name} fix epoch {} does not match truth epoch {}", rep.label, f.k, t.k);
        }
    }
    Ok(())
}

/// Pools per-epoch errors over repetitions, after each repetition's exclusion.
fn aggregate(reps: &[RepData], metric: ErrorMode, exclude: &str) -> Result<Vec<ErrorReport>> {
    ensure!(!reps.is_empty(), "nothing to report");
    let names: Vec<String> = reps[0].fixes.iter().map(|(n, _)| n.clone()).collect();
    let mut pooled: Vec<Vec<(usize, f64)>> = vec![Vec::new(); names.len()];
    let mut description = None;
    for rep in reps {
        check_epochs(rep)?;
        ensure!(rep.fixes.iter().map(|(n, _)| n).eq(names.iter()), "{}: estimator set differs from the first repetition", rep.label);
        let excl = resolve_exclusion(exclude, |lap| first_row_of_lap(&rep.truth, lap))
            .with_context(|| format!("{}: exclusion {exclude:?}", rep.label))?;
        description.get_or_insert_with(|| excl.description.clone());
        let truth: Vec<_> = rep.truth.iter().map(|r| (r.k, r.position)).collect();
        for (slot, (name, fixes)) in pooled.iter_mut().zip(&rep.fixes) {
            let errors = nloskit::compute_errors(fixes, &truth, metric).with_context(|| format!("{}: {name}", rep.label))?;
            slot.extend(errors.into_iter().filter(|(k, _)| !excl.excludes(*k)));
        }
    }
    let shown = Exclusion { ranges: Vec::new(), description: description.unwrap_or_default() };
    names
        .iter()
        .zip(&pooled)
        .map(|(name, errors)| summarize(name, errors, &shown, metric).with_context(|| format!("{name}: exclusion {exclude:?}")))
        .collect()
}

fn write_reports(out: &Path, title: &str, reports: &[ErrorReport]) -> Result<()> {
    let path = out.join("report.csv");
    write_report_csv(create(&path)?, reports).with_context(|| path.display().to_string())?;
    write_text(&out.join("report.txt"), &format_report_table(title, reports))?;
    for r in reports {
        let slug = r.estimator.parse::<EstimatorKind>().map_or_else(|_| r.estimator.to_lowercase(), |k| k.slug().into());
        let path = out.join(format!("cdf_{slug}.csv"));
        let mut w = create(&path)?;
        write_cdf(&mut w, r).with_context(|| path.display().to_string())?;
        w.flush()?;
    }
    Ok(())
}
