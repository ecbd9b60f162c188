use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use uqtrace_core::estimators::registry::ScoringContext;
use uqtrace_core::synth::{self, SynthCorpus};
use uqtrace_core::trace::{load_traces, save_traces, Split, SCHEMA_VERSION};
use uqtrace_core::{DensityModels, EstimatorId, EstimatorParams, Family, Models, Trace};
use uqtrace_eval::report::METRICS_HEADER;
use uqtrace_eval::{
    cross_panel, evaluate, write_metrics_csv, CorrelationMatrix, Dendrogram, EvalConfig, FamilyRoc, MetricReport,
    RankVariability, ScoreTable,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::{ConfigArgs, EvalArgs, ScoreArgs, SelectionArgs, SynthArgs};

fn resolve(config: &ConfigArgs, selection: Option<&SelectionArgs>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &config.config {
        cfg.apply_file(path)?;
    }
    for o in &config.overrides {
        cfg.apply_assignment(o)?;
    }
    if let Some(seed) = config.seed {
        cfg.seed = seed;
    }
    if let Some(sel) = selection {
        if let Some(e) = &sel.estimators {
            cfg.estimators = e.clone();
        }
        if let Some(x) = &sel.exclude {
            cfg.exclude = x.clone();
        }
    }
    Ok(cfg)
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::Config("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(CliError::config)?.install(f),
    }
}

pub fn load(path: &Path) -> Result<Vec<Trace>, CliError> {
    load_traces::<f64>(path, SCHEMA_VERSION)
        .map(|set| set.traces)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_opt(path: Option<&PathBuf>) -> Result<Vec<Trace>, CliError> {
    path.map_or_else(|| Ok(Vec::new()), |p| load(p))
}

/// File name without `.gz` and `.jsonl`/`.json` suffixes.
pub fn panel_name(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let name = name.strip_suffix(".gz").unwrap_or(&name);
    let name = name.strip_suffix(".jsonl").or_else(|| name.strip_suffix(".json")).unwrap_or(name);
    name.to_string()
}

/// Density models for the training-based estimators, fitted on the
/// train-split records of both trace sources. Returns `None` (leaving those
/// estimators missing) when none is selected or fitting is impossible.
fn fit_models(
    params: &EstimatorParams,
    selection: &[EstimatorId],
    traces: &[Trace],
    extra_train: &[Trace],
    background: &[Trace],
) -> Option<Models> {
    if !selection.iter().any(|e| e.family() == Family::Training) {
        return None;
    }
    let train: Vec<Trace> = traces.iter().chain(extra_train).filter(|t| t.split == Split::Train).cloned().collect();
    if train.is_empty() {
        log::warn!("no train-split traces: training-based estimators will be missing");
        return None;
    }
    match DensityModels::fit(&train, background, &params.density) {
        Ok(m) => Some(m),
        Err(e) => {
            log::warn!("density models not fitted ({e}): training-based estimators will be missing");
            None
        }
    }
}

/// Scores the eval-split records of `traces` into a table.
pub fn score_traces(
    params: &EstimatorParams,
    selection: &[EstimatorId],
    traces: &[Trace],
    extra_train: &[Trace],
    background: &[Trace],
) -> ScoreTable<f64> {
    let models = fit_models(params, selection, traces, extra_train, background);
    let ctx = ScoringContext::new(params, models.as_ref());
    let (table, stats) = ScoreTable::score(traces, selection, &ctx);
    for (k, e) in selection.iter().enumerate() {
        if stats.invalid[k] > 0 {
            log::warn!("{}: {} instance(s) rejected as invalid", e.id(), stats.invalid[k]);
        }
        log::info!("{}: {} of {} instances missing", e.id(), stats.missing[k], table.num_instances());
    }
    table
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(CliError::data)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(CliError::data)
}

fn write_scores(path: &Path, table: &ScoreTable<f64>) -> Result<(), CliError> {
    table.write_csv(create(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Resolved settings archived next to the outputs of a run.
#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    inputs: Vec<String>,
    estimators: Vec<&'static str>,
    params: &'a EstimatorParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    eval: Option<&'a EvalConfig>,
}

fn display_all<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Vec<String> {
    paths.into_iter().map(|p| p.display().to_string()).collect()
}

/// `score`: writes `<out>/<run-id>/scores.csv` and `config.json`; returns the run directory.
pub fn score(args: &ScoreArgs) -> Result<PathBuf, CliError> {
    let cfg = resolve(&args.config, Some(&args.selection))?;
    let selection = cfg.selection()?;
    with_threads(args.selection.threads, || {
        let traces = load(&args.traces)?;
        let train = load_opt(args.train_traces.as_ref())?;
        let background = load_opt(args.background_traces.as_ref())?;
        let table = score_traces(&cfg.params, &selection, &traces, &train, &background);
        let dir = args.out.join(args.run_id.clone().unwrap_or_else(|| panel_name(&args.traces)));
        create_dir(&dir)?;
        write_scores(&dir.join("scores.csv"), &table)?;
        let inputs = display_all(
            [Some(&args.traces), args.train_traces.as_ref(), args.background_traces.as_ref()].into_iter().flatten(),
        );
        let manifest = Manifest {
            command: "score",
            inputs,
            estimators: selection.iter().map(|e| e.id()).collect(),
            params: &cfg.params,
            eval: None,
        };
        write_json(&dir.join("config.json"), &manifest)?;
        Ok(dir)
    })
}

/// Picks the per-panel entry of a flag given zero times, once (shared) or once per panel.
fn per_panel<'a>(flag: &str, paths: &'a [PathBuf], panels: usize) -> Result<Vec<Option<&'a PathBuf>>, CliError> {
    match paths.len() {
        0 => Ok(vec![None; panels]),
        1 => Ok(vec![Some(&paths[0]); panels]),
        k if k == panels => Ok(paths.iter().map(Some).collect()),
        k => Err(CliError::Config(format!("--{flag} given {k} times for {panels} panels"))),
    }
}

#[derive(Serialize)]
struct Redundancy<'a> {
    panel: &'a str,
    spearman: &'a CorrelationMatrix<f64>,
    dendrogram: &'a Dendrogram<f64>,
}

#[derive(Serialize)]
struct PanelRoc<'a> {
    panel: &'a str,
    families: &'a [FamilyRoc<f64>],
}

#[derive(Serialize)]
struct RocFile<'a> {
    panels: Vec<PanelRoc<'a>>,
    mean_over_panels: &'a [FamilyRoc<f64>],
}

#[derive(Serialize)]
struct RankFile<'a> {
    panels: &'a [String],
    metric: &'static str,
    missing: &'static str,
    estimators: &'a [RankVariability<f64>],
}

#[derive(Serialize)]
struct KendallFile<'a> {
    panels: &'a [String],
    auroc: &'a CorrelationMatrix<f64>,
    prr: &'a CorrelationMatrix<f64>,
}

/// `eval`: metrics, redundancy, family ROC, rank variability and Kendall
/// files under `<out>/<run-id>/`; returns the run directory.
pub fn eval(args: &EvalArgs) -> Result<PathBuf, CliError> {
    let mut cfg = resolve(&args.config, Some(&args.selection))?;
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if let Some(b) = args.bins {
        cfg.bins = b;
    }
    cfg.group_by_query |= args.group_by_query;
    let eval_cfg = cfg.eval_config()?;
    let panels: Vec<String> = args.traces.iter().map(|p| panel_name(p)).collect();
    for (i, p) in panels.iter().enumerate() {
        if panels[..i].contains(p) {
            return Err(CliError::Config(format!("two trace files share the panel name {p:?}")));
        }
    }
    let n = panels.len();
    if !args.scores.is_empty() && args.scores.len() != n {
        return Err(CliError::Config(format!("--scores given {} times for {n} panels", args.scores.len())));
    }
    let train = per_panel("train-traces", &args.train_traces, n)?;
    let background = per_panel("background-traces", &args.background_traces, n)?;
    let selection = if args.scores.is_empty() { cfg.selection()? } else { Vec::new() };

    with_threads(args.selection.threads, || {
        let mut tables = Vec::with_capacity(n);
        for (p, path) in args.traces.iter().enumerate() {
            let traces = load(path)?;
            let mut table = match args.scores.get(p) {
                Some(scores) => {
                    let file = File::open(scores)
                        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", scores.display())))?;
                    ScoreTable::read_csv(file).map_err(|e| CliError::Data(format!("{}: {e}", scores.display())))?
                }
                None => score_traces(&cfg.params, &selection, &traces, &load_opt(train[p])?, &load_opt(background[p])?),
            };
            table.attach_traces(&traces).map_err(|e| CliError::Data(format!("panel {}: {e}", panels[p])))?;
            if table.num_instances() == 0 {
                return Err(CliError::Data(format!("panel {} has no eval-split instances", panels[p])));
            }
            tables.push(table);
        }
        let reports: Vec<MetricReport<f64>> =
            panels.iter().zip(&tables).map(|(name, t)| evaluate(name, t, &eval_cfg)).collect();
        let cross = cross_panel(&reports);

        let run_id = args.run_id.clone().unwrap_or_else(|| if n == 1 { panels[0].clone() } else { "eval".into() });
        let dir = args.out.join(run_id);
        create_dir(&dir)?;
        if args.scores.is_empty() {
            for (name, t) in panels.iter().zip(&tables) {
                let file = if n == 1 { "scores.csv".to_string() } else { format!("scores_{name}.csv") };
                write_scores(&dir.join(file), t)?;
            }
        }
        write_metrics_csv(create(&dir.join("metrics.csv"))?, &reports).map_err(CliError::data)?;
        let redundancy: Vec<Redundancy> = reports
            .iter()
            .map(|r| Redundancy { panel: &r.panel, spearman: &r.spearman, dendrogram: &r.clusters })
            .collect();
        write_json(&dir.join("redundancy.json"), &redundancy)?;
        let roc = RocFile {
            panels: reports.iter().map(|r| PanelRoc { panel: &r.panel, families: &r.family_roc }).collect(),
            mean_over_panels: &cross.family_roc,
        };
        write_json(&dir.join("family_roc.json"), &roc)?;
        let ranks = RankFile {
            panels: &cross.panels,
            metric: "auroc",
            missing: "panels where an estimator has no defined metric are excluded from its summary",
            estimators: &cross.rank_variability,
        };
        write_json(&dir.join("rank_variability.json"), &ranks)?;
        let kendall = KendallFile { panels: &cross.panels, auroc: &cross.kendall_auroc, prr: &cross.kendall_prr };
        write_json(&dir.join("kendall.json"), &kendall)?;
        let mut inputs = display_all(&args.traces);
        inputs.extend(display_all(args.scores.iter().chain(&args.train_traces).chain(&args.background_traces)));
        let manifest = Manifest {
            command: "eval",
            inputs,
            estimators: selection.iter().map(|e| e.id()).collect(),
            params: &cfg.params,
            eval: Some(&eval_cfg),
        };
        write_json(&dir.join("config.json"), &manifest)?;
        Ok(dir)
    })
}

/// `synth`: writes `eval.jsonl`, `train.jsonl` and `background.jsonl` into `--out`.
pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut cfg = resolve(&args.config, None)?;
    let p = &mut cfg.synth;
    let sizes = [
        (&mut p.n, args.n),
        (&mut p.n_train, args.n_train),
        (&mut p.n_background, args.n_background),
        (&mut p.min_len, args.min_len),
        (&mut p.max_len, args.max_len),
        (&mut p.samples, args.samples),
    ];
    for (field, flag) in sizes {
        if let Some(v) = flag {
            *field = v;
        }
    }
    if let Some(r) = args.hallucination_rate {
        p.hallucination_rate = r;
    }
    if let Some(s) = args.signal {
        p.signal = s;
    }
    let SynthCorpus { eval, train, background } = synth::generate(&cfg.synth, cfg.seed).map_err(CliError::config)?;
    create_dir(&args.out)?;
    for (name, traces) in [("eval.jsonl", &eval), ("train.jsonl", &train), ("background.jsonl", &background)] {
        let path = args.out.join(name);
        save_traces(&path, traces).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn with_std(point: &str, std: &str) -> String {
    let fmt = |s: &str| s.parse::<f64>().map(|x| format!("{x:.3}")).unwrap_or_else(|_| s.to_string());
    if std.parse::<f64>().is_ok() {
        format!("{} ± {}", fmt(point), fmt(std))
    } else {
        fmt(point)
    }
}

/// Renders `metrics.csv` as one aligned table per panel.
pub fn report(path: &Path) -> Result<String, CliError> {
    let file = if path.is_dir() { path.join("metrics.csv") } else { path.to_path_buf() };
    let mut rdr = csv::Reader::from_path(&file).map_err(|e| CliError::Data(format!("{}: {e}", file.display())))?;
    let header = rdr.headers().map_err(CliError::data)?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(CliError::Data(format!("{} is not a metrics table", file.display())));
    }
    let mut out = String::new();
    let mut panel: Option<String> = None;
    for rec in rdr.records() {
        let r = rec.map_err(CliError::data)?;
        if panel.as_deref() != Some(&r[0]) {
            if panel.is_some() {
                out.push('\n');
            }
            let _ = writeln!(out, "panel: {}", &r[0]);
            let _ = writeln!(
                out,
                "{:<26} {:<12} {:>6}  {:<16} {:<16} {:<16}",
                "estimator", "family", "scored", "AUROC", "PRR", "RCE"
            );
            panel = Some(r[0].to_string());
        }
        let _ = writeln!(
            out,
            "{:<26} {:<12} {:>6}  {:<16} {:<16} {:<16}",
            &r[1],
            &r[2],
            &r[3],
            with_std(&r[4], &r[5]),
            with_std(&r[6], &r[7]),
            with_std(&r[8], &r[9])
        );
    }
    Ok(out)
}
