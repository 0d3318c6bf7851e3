use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use solarec::clustering::{
    adjusted_rand_index, assign, kmeans_fit, roc_auc_vs_labels, silhouette, wcss, Assignment, ClusterModel,
    KMeansConfig, RocReport,
};
use solarec::community::{simulate as run_simulation, write_trace_csv, CommunityState};
use solarec::datagen::{gen_community, gen_corpus, gen_corpus_with_prefix, gen_producer, CorpusSpec, Manifest};
use solarec::json::to_canonical_string;
use solarec::profiles::{
    build_feature_vector, parse_consumption_csv, write_consumption_csv, ConsumerDataset, FeatureVector,
    DEFAULT_MIN_COVERAGE,
};
use solarec::recommender::{rank_candidates, AdmissionPolicy, CandidateFailure, Ranking, RecommendError};
use solarec_service::{ApiError, AppState, ServiceOptions, DEFAULT_PORT};

use crate::config::FileConfig;
use crate::{ClusterArgs, CliError, EvaluateArgs, GenArgs, RecommendArgs, ServeArgs, SimulateArgs, DEFAULT_PV_KW};

pub(crate) struct Context {
    pub quiet: bool,
    pub seed: u64,
    pub file: FileConfig,
}

impl Context {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input(format!("{what} {}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::Internal(format!("cannot write {}: {e}", path.display()));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(fail)?;
    }
    fs::write(path, bytes).map_err(fail)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = to_canonical_string(value).map_err(|e| CliError::Internal(e.to_string()))?;
    write_bytes(path, text.as_bytes())
}

fn write_csv(path: &Path, dataset: &ConsumerDataset) -> Result<(), CliError> {
    let mut out = Vec::new();
    write_consumption_csv(dataset, &mut out).map_err(|e| CliError::Internal(e.to_string()))?;
    write_bytes(path, &out)
}

/// `*.csv` files of a directory in file-name order.
fn csv_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| input(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(input)?.path();
        if path.is_file() && path.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.push((stem.to_string(), path.clone()));
            }
        }
    }
    files.sort();
    Ok(files)
}

fn read_dataset(id: &str, path: &Path) -> Result<ConsumerDataset, CliError> {
    let file = fs::File::open(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
    parse_consumption_csv(std::io::BufReader::new(file), id).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn read_datasets(dir: &Path) -> Result<Vec<ConsumerDataset>, CliError> {
    let files = csv_files(dir)?;
    if files.is_empty() {
        return Err(input(format!("no CSV files in {}", dir.display())));
    }
    files.iter().map(|(id, path)| read_dataset(id, path)).collect()
}

fn profiles_for(
    datasets: &[ConsumerDataset],
    layout: solarec::profiles::Layout,
    normalization: solarec::profiles::Normalization,
    min_coverage: f64,
) -> Result<Vec<FeatureVector>, CliError> {
    datasets
        .iter()
        .map(|d| {
            build_feature_vector(d, layout, normalization, min_coverage)
                .map_err(|e| input(format!("consumer `{}`: {e}", d.consumer_id)))
        })
        .collect()
}

pub(crate) fn gen(ctx: &Context, args: GenArgs) -> Result<(), CliError> {
    let defaults = CorpusSpec::default();
    let spec = CorpusSpec {
        seed: ctx.seed,
        days: args.days.or(ctx.file.days).unwrap_or(defaults.days),
        noise_sigma: args.noise_sigma.or(ctx.file.noise_sigma).unwrap_or(defaults.noise_sigma),
        ..defaults
    };
    let pv_kw = args.pv_kw.or(ctx.file.pv_kw).unwrap_or(DEFAULT_PV_KW);
    if spec.days == 0 {
        return Err(input("--days must be at least 1"));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(input("--noise-sigma must be a finite non-negative number"));
    }
    if !(pv_kw > 0.0 && pv_kw.is_finite()) {
        return Err(input("--pv-kw must be a finite positive number"));
    }

    let corpus = gen_corpus(&spec);
    let candidates = gen_corpus_with_prefix(
        &CorpusSpec { seed: spec.seed.wrapping_add(1), counts: [1, 1, 1], ..spec.clone() },
        "cand-",
    );
    let community = gen_community(&corpus, vec![gen_producer("pv-01", pv_kw)]);

    let out = &args.out;
    for ds in &corpus.datasets {
        write_csv(&out.join("consumers").join(format!("{}.csv", ds.consumer_id)), ds)?;
    }
    for ds in &candidates.datasets {
        write_csv(&out.join("candidates").join(format!("{}.csv", ds.consumer_id)), ds)?;
    }
    write_json(&out.join("manifest.json"), &corpus.manifest)?;
    write_json(&out.join("candidates.json"), &candidates.manifest)?;
    write_json(&out.join("community.json"), &community)?;
    write_json(&out.join("policy.json"), &AdmissionPolicy::default())?;

    ctx.say(format!(
        "wrote {} consumers, {} candidates and a {}-hour community to {}",
        corpus.datasets.len(),
        candidates.datasets.len(),
        community.horizon_hours,
        out.display()
    ));
    Ok(())
}

pub(crate) fn cluster(ctx: &Context, args: ClusterArgs) -> Result<(), CliError> {
    let file = &ctx.file;
    let defaults = KMeansConfig::default();
    let config = KMeansConfig {
        k: args.k.or(file.k).unwrap_or(defaults.k),
        init: args.init.or(file.init).unwrap_or(defaults.init),
        tolerance: args.tolerance.or(file.tolerance).unwrap_or(defaults.tolerance),
        max_iterations: args.max_iter.or(file.max_iter).unwrap_or(defaults.max_iterations),
        restarts: args.restarts.or(file.restarts).unwrap_or(defaults.restarts),
        seed: ctx.seed,
    };
    config.validate().map_err(input)?;
    let layout = args.profile.layout.or(file.layout).unwrap_or_default();
    let normalization = args.profile.normalization.or(file.normalization).unwrap_or_default();
    let min_coverage = args.profile.min_coverage.or(file.min_coverage).unwrap_or(DEFAULT_MIN_COVERAGE);

    let datasets = read_datasets(&args.input)?;
    let profiles = profiles_for(&datasets, layout, normalization, min_coverage)?;
    let model = kmeans_fit(&profiles, &config).map_err(input)?;
    write_json(&args.out, &model)?;

    let mut sizes = vec![0usize; model.k];
    for p in &profiles {
        sizes[assign(&model, p).map_err(input)?.cluster_index] += 1;
    }
    ctx.say(format!(
        "k={} wcss={} iterations={} converged={} sizes={:?} -> {}",
        model.k,
        solarec::json::format_f64(model.wcss),
        model.iterations_run,
        model.converged,
        sizes,
        args.out.display()
    ));
    Ok(())
}

#[derive(Serialize)]
struct AssignedConsumer {
    consumer_id: String,
    #[serde(flatten)]
    assignment: Assignment,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Serialize)]
struct EvaluationReport {
    k: usize,
    consumers: usize,
    wcss: f64,
    silhouette: Option<f64>,
    cluster_sizes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    macro_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adjusted_rand_index: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    roc: Option<RocReport<String>>,
    assignments: Vec<AssignedConsumer>,
}

/// Accepts a corpus manifest or a plain `{ "id": "label" }` object.
fn read_labels(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let value: serde_json::Value = read_json(path, "labels")?;
    if value.get("consumers").is_some() {
        let manifest: Manifest = serde_json::from_value(value).map_err(|e| input(format!("labels: {e}")))?;
        return Ok(manifest.consumers.into_iter().map(|c| (c.consumer_id, c.archetype.name().to_string())).collect());
    }
    serde_json::from_value(value).map_err(|e| input(format!("labels {}: {e}", path.display())))
}

pub(crate) fn evaluate(ctx: &Context, args: EvaluateArgs) -> Result<(), CliError> {
    let model: ClusterModel = read_json(&args.model, "model")?;
    model.validate().map_err(input)?;
    let min_coverage = args.min_coverage.or(ctx.file.min_coverage).unwrap_or(DEFAULT_MIN_COVERAGE);
    let datasets = read_datasets(&args.input)?;
    let profiles = profiles_for(&datasets, model.layout, model.normalization, min_coverage)?;
    let assignments = profiles.iter().map(|p| assign(&model, p)).collect::<Result<Vec<_>, _>>().map_err(input)?;

    let labels = match &args.labels {
        Some(path) => {
            let map = read_labels(path)?;
            let labels = profiles
                .iter()
                .map(|p| {
                    map.get(&p.consumer_id)
                        .cloned()
                        .ok_or_else(|| input(format!("no label for consumer `{}`", p.consumer_id)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(labels)
        }
        None => None,
    };

    let mut cluster_sizes = vec![0usize; model.k];
    for a in &assignments {
        cluster_sizes[a.cluster_index] += 1;
    }
    let silhouette = silhouette(&profiles, &assignments).ok();
    let (roc, ari) = match &labels {
        Some(labels) => {
            let roc = roc_auc_vs_labels(&model, &profiles, labels).map_err(input)?;
            let predicted: Vec<usize> = assignments.iter().map(|a| a.cluster_index).collect();
            let ari = adjusted_rand_index(&predicted, labels).map_err(input)?;
            (Some(roc), Some(ari))
        }
        None => (None, None),
    };
    let report = EvaluationReport {
        k: model.k,
        consumers: profiles.len(),
        wcss: wcss(&model, &profiles).map_err(input)?,
        silhouette,
        cluster_sizes,
        macro_auc: roc.as_ref().map(|r| r.macro_auc),
        adjusted_rand_index: ari,
        roc,
        assignments: profiles
            .iter()
            .zip(&assignments)
            .enumerate()
            .map(|(i, (p, a))| AssignedConsumer {
                consumer_id: p.consumer_id.clone(),
                assignment: *a,
                label: labels.as_ref().map(|l| l[i].clone()),
            })
            .collect(),
    };

    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    match &args.out {
        Some(path) => write_json(path, &report)?,
        None if !ctx.quiet => print!("{}", to_canonical_string(&report).map_err(|e| CliError::Internal(e.to_string()))?),
        None => {}
    }
    if args.out.is_some() {
        ctx.say(format!(
            "wcss={} silhouette={} macro_auc={} ari={}",
            fmt(Some(report.wcss)),
            fmt(report.silhouette),
            fmt(report.macro_auc),
            fmt(report.adjusted_rand_index)
        ));
    }
    Ok(())
}

pub(crate) fn simulate(ctx: &Context, args: SimulateArgs) -> Result<(), CliError> {
    let community: CommunityState = read_json(&args.community, "community")?;
    let report = run_simulation(&community).map_err(input)?;
    write_json(&args.out, &report)?;
    if let Some(trace) = &args.trace {
        let mut out = Vec::new();
        write_trace_csv(&report, &mut out).map_err(|e| CliError::Internal(e.to_string()))?;
        write_bytes(trace, &out)?;
    }
    ctx.say(format!(
        "production={:.3} consumption={:.3} shared={:.3} kWh, self-consumption {:.1}%, self-sufficiency {:.1}%",
        report.total_production,
        report.total_consumption,
        report.shared_energy,
        100.0 * report.self_consumption_ratio,
        100.0 * report.self_sufficiency
    ));
    Ok(())
}

fn load_policy(ctx: &Context, flag: Option<&PathBuf>) -> Result<AdmissionPolicy, CliError> {
    let policy = match flag.or(ctx.file.policy.as_ref()) {
        Some(path) => read_json(path, "policy")?,
        None => AdmissionPolicy::default(),
    };
    policy.validate().map_err(input)?;
    Ok(policy)
}

pub(crate) fn recommend(ctx: &Context, args: RecommendArgs) -> Result<(), CliError> {
    let model: ClusterModel = read_json(&args.model, "model")?;
    let community: CommunityState = read_json(&args.community, "community")?;
    let policy = load_policy(ctx, args.policy.as_ref())?;
    let files = csv_files(&args.input)?;
    if files.is_empty() {
        return Err(input(format!("no candidate CSV files in {}", args.input.display())));
    }

    let mut datasets = Vec::new();
    let mut unreadable = Vec::new();
    for (id, path) in &files {
        match fs::File::open(path) {
            Ok(f) => match parse_consumption_csv(std::io::BufReader::new(f), id) {
                Ok(ds) => datasets.push(ds),
                Err(e) => unreadable.push(CandidateFailure {
                    candidate_id: id.clone(),
                    error: e.kind().to_string(),
                    message: e.to_string(),
                }),
            },
            Err(e) => unreadable.push(CandidateFailure {
                candidate_id: id.clone(),
                error: "Io".to_string(),
                message: e.to_string(),
            }),
        }
    }

    let mut ranking = if datasets.is_empty() {
        Ranking { ranked: Vec::new(), failures: Vec::new() }
    } else {
        match rank_candidates(&community, &model, &datasets, &policy) {
            Ok(r) => r,
            Err(RecommendError::AllCandidatesFailed(failures)) => Ranking { ranked: Vec::new(), failures },
            Err(e) => return Err(input(e)),
        }
    };
    ranking.failures.extend(unreadable);
    ranking.failures.sort_by(|a, b| a.candidate_id.cmp(&b.candidate_id));
    if ranking.ranked.is_empty() {
        let reasons: Vec<String> = ranking.failures.iter().map(|f| format!("{}: {}", f.candidate_id, f.message)).collect();
        return Err(input(format!("no candidate could be scored ({})", reasons.join("; "))));
    }
    write_json(&args.out, &ranking)?;

    for (i, r) in ranking.ranked.iter().enumerate() {
        ctx.say(format!(
            "{:>2}. {:<20} cluster {} marginal_shared={:.3} kWh marginal_scr={:+.4} {:?}",
            i + 1,
            r.candidate_id,
            r.cluster.cluster_index,
            r.marginal_shared,
            r.marginal_scr,
            r.decision
        ));
    }
    for f in &ranking.failures {
        ctx.say(format!("    {:<20} failed: {} ({})", f.candidate_id, f.error, f.message));
    }
    Ok(())
}

fn service_error(e: ApiError) -> CliError {
    match e {
        ApiError::Persist(_) | ApiError::Internal(_) => CliError::Internal(e.to_string()),
        other => input(other),
    }
}

pub(crate) fn serve(ctx: &Context, args: ServeArgs) -> Result<(), CliError> {
    let file = &ctx.file;
    let snapshot = args.snapshot.or(file.snapshot.clone()).unwrap_or_else(|| PathBuf::from("solarec-snapshot.json"));
    let state = match (&args.community, &args.model) {
        (Some(community), Some(model)) => {
            let community: CommunityState = read_json(community, "community")?;
            let model: ClusterModel = read_json(model, "model")?;
            let policy = load_policy(ctx, args.policy.as_ref())?;
            AppState::new(community, model, policy, &snapshot).map_err(service_error)?
        }
        _ if snapshot.exists() => AppState::from_snapshot(&snapshot).map_err(input)?,
        _ => {
            return Err(input(format!(
                "no snapshot at {}; pass --community and --model to start fresh",
                snapshot.display()
            )))
        }
    };
    let options = ServiceOptions {
        cors_origin: args.cors_origin.or(file.cors_origin.clone()),
        static_dir: args.static_dir.or(file.static_dir.clone()),
    };
    let host = args.host.or(file.host.clone()).unwrap_or_else(|| "127.0.0.1".to_string());
    let port = args.port.or(file.port).unwrap_or(DEFAULT_PORT);

    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host.as_str(), port))
            .await
            .map_err(|e| input(format!("cannot bind {host}:{port}: {e}")))?;
        ctx.say(format!(
            "serving revision {} on http://{} (snapshot {})",
            state.revision(),
            listener.local_addr().map_err(|e| CliError::Internal(e.to_string()))?,
            snapshot.display()
        ));
        solarec_service::serve(listener, state, &options, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Internal(e.to_string()))
    })
}
