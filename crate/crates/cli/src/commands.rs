use std::fmt;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use meshff::datasets::{self, DatasetError, DatasetSpec, GeneratorKind};
use meshff::features::{decode_features, encode_features, extract, ChannelStats, FeatureKind, FeatureTensor};
use meshff::mesh::{build_edge_topology, normalize_unit_box, parse_obj, validate_manifold, write_obj, Mesh, MeshError};
use meshff::nn::{decode_checkpoint, encode_checkpoint};
use meshff::ops::{OpsError, PoolPolicy, Pooler};
use meshff::pipelines::{self, make_pairs, EvalOptions, ExperimentConfig, MetricsReport, PipelineError, Task};
use meshff::Tensor;

use crate::{AblateArgs, DenoiseArgs, EvalArgs, FeaturesArgs, GenDataArgs, PoolTraceArgs, TrainArgs, ValidateArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Data(m) | Self::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config { .. } | PipelineError::InvalidConfig(_) => Self::Usage(e.to_string()),
            PipelineError::Divergence { .. } | PipelineError::Nn(_) => Self::Runtime(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidSpec(_) | DatasetError::UnreachableRange { .. } => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{}: no such file", path.display())))
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{}: no such directory", path.display())))
    }
}

/// The directory an output file will land in must already exist.
fn require_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(CliError::Usage(format!("{}: parent directory does not exist", path.display())))
        }
        _ => Ok(()),
    }
}

/// Prints the run header: a digest of the settings that determine the outputs, and the seed.
fn header(settings: &[(&str, String)], seed: Option<u64>) {
    let mut h = Sha256::new();
    for (k, v) in settings {
        h.update(format!("{k}={v}\n"));
    }
    let digest: String = h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect();
    println!("config {digest} seed {}", seed.map_or("none".into(), |s| s.to_string()));
}

fn load_mesh(path: &Path) -> Result<Mesh> {
    let mesh = parse_obj(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let report = validate_manifold(&mesh);
    if !report.is_empty() {
        return Err(CliError::Data(format!("{}: not a manifold mesh\n{report}", path.display())));
    }
    Ok(mesh)
}

fn mesh_err(e: MeshError) -> CliError {
    CliError::Data(e.to_string())
}

pub fn gen_data(a: GenDataArgs) -> Result<()> {
    let kind: GeneratorKind = a.spec.parse().map_err(|e: DatasetError| CliError::Usage(e.to_string()))?;
    let mut spec = DatasetSpec::new(kind, a.classes, a.per_class, a.seed);
    if a.edge_min.is_some() || a.edge_max.is_some() {
        let (lo, hi) = kind.default_edge_range();
        spec.edge_range = (a.edge_min.unwrap_or(lo), a.edge_max.unwrap_or(hi));
    }
    let train = a.train.unwrap_or(a.per_class * 4 / 5);
    let test = a.test.unwrap_or(a.per_class.saturating_sub(train));
    if train + test > a.per_class {
        return Err(CliError::Usage(format!("{train} + {test} exceeds {} samples per class", a.per_class)));
    }
    header(
        &[
            ("command", "gen-data".into()),
            ("spec", kind.to_string()),
            ("classes", a.classes.to_string()),
            ("per_class", a.per_class.to_string()),
            ("edge_range", format!("{}..={}", spec.edge_range.0, spec.edge_range.1)),
            ("train", train.to_string()),
            ("test", test.to_string()),
        ],
        Some(a.seed),
    );
    let samples = datasets::split(&datasets::generate(&spec)?, train, test, a.seed)?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::Runtime(format!("{}: {e}", a.out.display())))?;
    datasets::write_manifest(&a.out, &samples)?;
    println!(
        "wrote {} samples to {} (dataset {})",
        samples.len(),
        a.out.display(),
        datasets::dataset_hash(&samples)
    );
    Ok(())
}

pub fn features(a: FeaturesArgs) -> Result<()> {
    let kind: FeatureKind = a.kind.parse().map_err(|e: meshff::FeatureError| CliError::Usage(e.to_string()))?;
    require_file(&a.mesh)?;
    require_parent(&a.out)?;
    if let Some(h) = &a.heatmap {
        require_parent(h)?;
    }
    header(
        &[
            ("command", "features".into()),
            ("kind", kind.to_string()),
            ("normalize", a.normalize.to_string()),
        ],
        None,
    );
    let mut mesh = load_mesh(&a.mesh)?;
    if a.normalize {
        mesh = normalize_unit_box(&mesh).map_err(mesh_err)?;
    }
    let topology = build_edge_topology(&mesh).map_err(mesh_err)?;
    let f = extract(kind, &topology, &mesh).map_err(|e| CliError::Data(e.to_string()))?;
    write(&a.out, encode_features(&f))?;
    println!("{} edges x {} channels ({kind}) -> {}", f.rows(), f.channels(), a.out.display());
    if let Some(path) = &a.heatmap {
        let stats = ChannelStats::fit([&f]).map_err(|e| CliError::Data(e.to_string()))?;
        let norms = stats.normalize(&f).map_err(|e| CliError::Data(e.to_string()))?.row_norms();
        let export = write_obj(&mesh, Some(&norms)).map_err(mesh_err)?;
        write(path, export.obj)?;
        let sidecar = sidecar_path(path, "edges");
        write(&sidecar, export.sidecar.unwrap_or_default())?;
        println!("heat map -> {} + {}", path.display(), sidecar.display());
    }
    Ok(())
}

fn sidecar_path(path: &Path, ext: &str) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    s.into()
}

pub fn pool_trace(a: PoolTraceArgs) -> Result<()> {
    let policy: PoolPolicy = a.policy.parse().map_err(CliError::Usage)?;
    require_file(&a.mesh)?;
    if a.targets.is_empty() || a.targets.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::Usage("targets must be strictly decreasing".into()));
    }
    let from_file = a.features.parse::<FeatureKind>().is_err();
    if from_file {
        require_file(Path::new(&a.features))?;
    }
    header(
        &[
            ("command", "pool-trace".into()),
            ("features", a.features.clone()),
            ("targets", format!("{:?}", a.targets)),
            ("policy", policy.to_string()),
        ],
        None,
    );
    let mesh = load_mesh(&a.mesh)?;
    let topology = build_edge_topology(&mesh).map_err(mesh_err)?;
    let features: FeatureTensor = match a.features.parse::<FeatureKind>() {
        Ok(kind) => extract(kind, &topology, &mesh).map_err(|e| CliError::Data(e.to_string()))?,
        Err(_) => decode_features(&read(Path::new(&a.features))?).map_err(|e| CliError::Data(e.to_string()))?,
    };
    if features.rows() != topology.edge_count() {
        return Err(CliError::Data(format!(
            "{} feature rows for {} edges",
            features.rows(),
            topology.edge_count()
        )));
    }
    if a.targets[0] >= topology.edge_count() {
        return Err(CliError::Usage(format!(
            "first target {} is not below the mesh's {} edges",
            a.targets[0],
            topology.edge_count()
        )));
    }
    fs::create_dir_all(&a.out).map_err(|e| CliError::Runtime(format!("{}: {e}", a.out.display())))?;

    let original_edges = topology.edges().to_vec();
    let mut x = Tensor::from_vec(features.rows(), features.channels(), features.into_vec());
    let mut topo = topology;
    let mut positions = mesh.vertices().to_vec();
    // Original edge id of every current edge, and the global step that removed each original edge.
    let mut origin: Vec<usize> = (0..original_edges.len()).collect();
    let mut removed_at = vec![0usize; original_edges.len()];
    let mut steps_done = 0;
    for (k, &target) in a.targets.iter().enumerate() {
        let mut pooler = Pooler::new(&x, &topo, policy).map_err(|e| CliError::Runtime(e.to_string()))?;
        while pooler.edge_count() > target {
            if pooler.step().is_none() {
                let err = OpsError::Unreachable {
                    achieved: pooler.edge_count(),
                    target,
                };
                return Err(CliError::Runtime(err.to_string()));
            }
        }
        let out = pooler.finish();
        for (local, step) in out.history.removal_steps().into_iter().enumerate() {
            if step <= out.history.records.len() {
                removed_at[origin[local]] = steps_done + step;
            }
        }
        steps_done += out.history.records.len();
        origin = out.history.kept_edges.iter().map(|&e| origin[e]).collect();
        positions = out
            .history
            .apply_to_positions(&positions)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let stage = Mesh::new(positions.clone(), out.topology.faces().to_vec()).map_err(mesh_err)?;
        let obj = write_obj(&stage, None).map_err(mesh_err)?.obj;
        write(&a.out.join(format!("stage_{}.obj", k + 1)), obj)?;
        write(&a.out.join(format!("stage_{}.history.json", k + 1)), out.history.to_json())?;
        println!("stage {}: {} edges ({} collapses)", k + 1, out.topology.edge_count(), out.history.records.len());
        x = out.features;
        topo = out.topology;
    }
    let order: String = original_edges
        .iter()
        .zip(&removed_at)
        .map(|(e, &s)| format!("{} {} {}\n", e[0], e[1], if s == 0 { steps_done + 1 } else { s }))
        .collect();
    write(&a.out.join("collapse_order.edges"), order)?;
    Ok(())
}

fn load_config(path: Option<&Path>, overrides: &[String], seed: Option<u64>, epochs: Option<usize>) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => {
            let text = String::from_utf8(read(p)?).map_err(|_| CliError::Data(format!("{}: not UTF-8", p.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{o}`")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(e) = epochs {
        config.epochs = e;
    }
    config.validate()?;
    Ok(config)
}

fn load_data(dir: &Path) -> Result<Vec<datasets::LabeledMesh>> {
    Ok(datasets::read_manifest(dir)?)
}

pub fn train(a: TrainArgs) -> Result<()> {
    if let Some(c) = &a.config {
        require_file(c)?;
    }
    require_dir(&a.data)?;
    require_parent(&a.out)?;
    if let Some(m) = &a.metrics {
        require_parent(m)?;
    }
    let config = load_config(a.config.as_deref(), &a.overrides, a.seed, a.epochs)?;
    println!("config {} seed {}", config.hash_hex(), config.seed);
    let data = load_data(&a.data)?;
    let outcome = pipelines::train_with_progress(&config, &data, |r| {
        eprintln!("epoch {:>4}  loss {:.6}  lr {:e}", r.epoch, r.loss, r.lr);
    })?;
    eprintln!("wall clock {:.1}s", outcome.report.wall_clock_secs);
    write(&a.out, encode_checkpoint(&outcome.checkpoint))?;
    if let Some(m) = &a.metrics {
        write(m, outcome.report.to_jsonl())?;
    }
    print!("{}", outcome.report);
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<(meshff::nn::Checkpoint, ExperimentConfig)> {
    let ckpt = decode_checkpoint(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let config = ExperimentConfig::parse(&ckpt.config_text).map_err(|e| CliError::Data(e.to_string()))?;
    Ok((ckpt, config))
}

pub fn eval(a: EvalArgs) -> Result<()> {
    require_file(&a.checkpoint)?;
    require_dir(&a.data)?;
    if let Some(m) = &a.metrics {
        require_parent(m)?;
    }
    let (ckpt, config) = load_checkpoint(&a.checkpoint)?;
    println!("config {} seed {}", config.hash_hex(), config.seed);
    let data = load_data(&a.data)?;
    let opts = EvalOptions {
        rotation_seed: a.rotate_seed,
    };
    let mut report = MetricsReport::new(config.task, config.hash_hex(), datasets::dataset_hash(&data), config.seed);
    report.features = config.features.to_string();
    report.policy = config.policy.to_string();
    match config.task {
        Task::Classification => report.accuracy = Some(pipelines::evaluate_classification(&ckpt, &data, &opts)?),
        Task::Segmentation => {
            report.soft_edge_accuracy = Some(pipelines::evaluate_segmentation(&ckpt, &data, &opts)?)
        }
        Task::Denoising => {
            let pairs = make_pairs(&data, config.noise, config.seed)?;
            report.mse = Some(pipelines::evaluate_denoising(&ckpt, &pairs)?);
            let kind = config.target.ok_or_else(|| CliError::Data("checkpoint has no target kind".into()))?;
            report.identity_mse = Some(pipelines::identity_baseline(&pairs, kind)?);
        }
    }
    if let Some(m) = &a.metrics {
        write(m, report.to_jsonl())?;
    }
    print!("{report}");
    Ok(())
}

pub fn denoise(a: DenoiseArgs) -> Result<()> {
    require_file(&a.checkpoint)?;
    require_file(&a.mesh)?;
    require_parent(&a.out)?;
    let (ckpt, config) = load_checkpoint(&a.checkpoint)?;
    println!("config {} seed {}", config.hash_hex(), config.seed);
    let kind = match (config.task, config.target) {
        (Task::Denoising, Some(k)) => k,
        _ => return Err(CliError::Data(format!("checkpoint was trained for {}, not denoising", config.task))),
    };
    let mesh = load_mesh(&a.mesh)?;
    let out = pipelines::predict(&ckpt, &mesh)?;
    let f = FeatureTensor::new(kind, out.rows(), out.into_vec()).map_err(|e| CliError::Runtime(e.to_string()))?;
    write(&a.out, encode_features(&f))?;
    println!("{} edges x {} channels ({kind}) -> {}", f.rows(), f.channels(), a.out.display());
    Ok(())
}

pub fn ablate(a: AblateArgs) -> Result<()> {
    if let Some(c) = &a.config {
        require_file(c)?;
    }
    require_dir(&a.data)?;
    let config = load_config(a.config.as_deref(), &a.overrides, a.seed, a.epochs)?;
    println!("config {} seed {}", config.hash_hex(), config.seed);
    let data = load_data(&a.data)?;
    let table = pipelines::run_ablation(&config, &data)?;
    print!("{table}");
    Ok(())
}

pub fn validate(a: ValidateArgs) -> Result<()> {
    require_file(&a.mesh)?;
    header(&[("command", "validate".into())], None);
    let mesh = parse_obj(&read(&a.mesh)?).map_err(|e| CliError::Data(format!("{}: {e}", a.mesh.display())))?;
    let report = validate_manifold(&mesh);
    print!("{report}");
    if report.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{}: {} manifold defects",
            a.mesh.display(),
            report.findings.len()
        )))
    }
}
