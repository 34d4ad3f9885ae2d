use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fittsview_core::io::{
    load_dataset, read_label_file, write_atomic, write_labels, write_points_bin, write_points_csv, CloudFormat,
    Dataset, DatasetManifest,
};
use fittsview_core::lasso::{estimate_lasso_id, ComponentKind};
use fittsview_core::metrics::miou;
use fittsview_core::optimizer::orbit_frame;
use fittsview_core::pipeline::{cluster_dataset, prepare_instances, recommend_dataset, PipelineConfig, ThetaSource};
use fittsview_core::synth::{generate, NEGATIVE, POSITIVE};
use fittsview_core::{geometry, Difficulty, Error, Viewpoint};
use fittsview_service::{AppState, ServiceConfig};
use serde::Serialize;

use crate::config::{input_error, FileConfig};
use crate::{Cli, Command};

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let config = cli.tuning.apply(&file.pipeline)?;
    match cli.command {
        Command::Cluster { manifest, out } => cluster(&manifest, out.as_deref(), &config),
        Command::Recommend { manifest, out } => recommend(&manifest, out.as_deref(), &config),
        Command::Estimate {
            manifest,
            instance,
            alpha,
            beta,
        } => estimate(&manifest, instance, alpha, beta, &config),
        Command::Synth { scene, out, format } => {
            let format = if format == "csv" { CloudFormat::Csv } else { CloudFormat::Bin };
            synth(scene, &out, format, &file, config.seed)
        }
        Command::Eval {
            pred,
            truth,
            baseline,
            categories,
        } => eval(&pred, &truth, baseline.as_deref(), &categories),
        Command::Serve {
            manifests,
            host,
            port,
            store,
        } => {
            let manifests = if manifests.is_empty() { file.serve.manifests.clone() } else { manifests };
            serve(
                ServiceConfig {
                    manifests,
                    store_dir: store.or(file.serve.store_dir.clone()),
                    pipeline: config,
                },
                &host.unwrap_or(file.serve.host.clone()),
                port.unwrap_or(file.serve.port),
            )
        }
    }
}

fn load(manifest: &Path, config: &PipelineConfig) -> anyhow::Result<Dataset> {
    let m = DatasetManifest::load(manifest)?;
    Ok(config.reduce(load_dataset(&m)?)?)
}

/// Pretty JSON plus a trailing newline, to `out` or stdout.
fn emit(value: &impl Serialize, out: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct ClusterSummary {
    dataset: String,
    points: usize,
    theta: f64,
    theta_source: ThetaSource,
    instances: usize,
    /// Instances per category.
    per_category: BTreeMap<u32, usize>,
    noise: usize,
}

fn cluster(manifest: &Path, out: Option<&Path>, config: &PipelineConfig) -> anyhow::Result<()> {
    let dataset = load(manifest, config)?;
    let prepared = cluster_dataset(&dataset, config)?;
    let (theta, theta_source) = prepared.theta.expect("clustering always records theta");
    let set = &prepared.instances;
    let mut per_category = BTreeMap::new();
    for inst in &set.instances {
        *per_category.entry(inst.category).or_insert(0) += 1;
    }
    if let Some(path) = out {
        write_labels(path, &set.point_ids(dataset.cloud.len()))?;
    }
    emit(
        &ClusterSummary {
            dataset: dataset.manifest.name.clone(),
            points: dataset.cloud.len(),
            theta,
            theta_source,
            instances: set.instances.len(),
            per_category,
            noise: set.noise.len(),
        },
        None,
    )
}

#[derive(Serialize)]
struct RecommendationRecord {
    rank: usize,
    category: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    category_name: Option<String>,
    instance_id: u32,
    points: usize,
    alpha: f64,
    beta: f64,
    distance: f64,
    target: [f64; 3],
    /// A number, or the string "infeasible".
    difficulty: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<&'static str>,
    interior_negatives: usize,
}

fn recommend(manifest: &Path, out: Option<&Path>, config: &PipelineConfig) -> anyhow::Result<()> {
    let dataset = load(manifest, config)?;
    let prepared = prepare_instances(&dataset, config)?;
    let recs = recommend_dataset(&dataset, &prepared.instances, config)?;
    log::info!("{} recommendations", recs.len());
    let records: Vec<RecommendationRecord> = recs
        .iter()
        .map(|r| {
            let (difficulty, reason) = match r.difficulty {
                Difficulty::Finite(v) => (serde_json::json!(v), None),
                Difficulty::Infeasible(why) => (serde_json::json!("infeasible"), Some(why.as_str())),
            };
            RecommendationRecord {
                rank: r.rank,
                category: r.category,
                category_name: dataset.manifest.categories.get(&r.category).cloned(),
                instance_id: r.instance_id,
                points: r.points,
                alpha: r.viewpoint.alpha(),
                beta: r.viewpoint.beta(),
                distance: r.viewpoint.distance(),
                target: r.viewpoint.target().into(),
                difficulty,
                reason,
                interior_negatives: r.interior_negatives,
            }
        })
        .collect();
    emit(&records, out)
}

fn estimate(manifest: &Path, id: u32, alpha: f64, beta: f64, config: &PipelineConfig) -> anyhow::Result<()> {
    let dataset = load(manifest, config)?;
    let prepared = prepare_instances(&dataset, config)?;
    let inst = prepared
        .instances
        .get(id)
        .ok_or_else(|| Error::NotFound(format!("instance {id} in {}", dataset.manifest.name)))?;
    let (target, distance) = orbit_frame(&dataset.cloud, &inst.points, config.min_distance)?;
    let vp = Viewpoint::new(target, alpha, beta, distance)?;
    let scene = geometry::project(&dataset.cloud, &vp, &config.viewport, &inst.points)?;
    let est = estimate_lasso_id(&scene, config.m);

    let mut out = String::new();
    out.push_str(&format!(
        "instance {id} category {} points {}\nalpha {:.6} beta {:.6} distance {:.6}\n",
        inst.category,
        inst.points.len(),
        vp.alpha(),
        vp.beta(),
        vp.distance()
    ));
    match est.difficulty {
        Difficulty::Finite(total) => {
            for c in &est.components {
                let kind = match c.kind {
                    ComponentKind::Dot => "dot",
                    ComponentKind::Gap => "gap",
                };
                out.push_str(&format!("{kind} {}: {:.6}\n", c.index, c.id));
            }
            out.push_str(&format!("total: {total:.6}\n"));
        }
        Difficulty::Infeasible(why) => {
            out.push_str(&format!("infeasible: {}\n", why.as_str()));
            if est.interior_negatives != usize::MAX {
                out.push_str(&format!("interior negatives: {}\n", est.interior_negatives));
            }
        }
    }
    std::io::stdout().lock().write_all(out.as_bytes())?;
    Ok(())
}

fn synth(
    scene: fittsview_core::synth::SceneKind,
    dir: &Path,
    format: CloudFormat,
    file: &FileConfig,
    seed: u64,
) -> anyhow::Result<()> {
    let cloud = generate(scene, &file.synth, seed)?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = scene.name();
    let cloud_file = PathBuf::from(match format {
        CloudFormat::Bin => format!("{name}.bin"),
        CloudFormat::Csv => format!("{name}.csv"),
    });
    match format {
        CloudFormat::Bin => write_points_bin(&dir.join(&cloud_file), cloud.points(), None)?,
        CloudFormat::Csv => write_points_csv(&dir.join(&cloud_file), cloud.points())?,
    }
    let labels = cloud.semantic_labels().expect("synthetic scenes are labelled");
    let label_file = PathBuf::from(format!("{name}.label"));
    write_labels(&dir.join(&label_file), labels)?;
    // One instance per class, ids equal to the class.
    let instance_file = PathBuf::from(format!("{name}.instance.label"));
    write_labels(&dir.join(&instance_file), labels)?;

    let manifest = DatasetManifest {
        name: name.to_string(),
        cloud_path: cloud_file,
        format,
        semantic_label_path: Some(label_file.clone()),
        instance_label_path: Some(instance_file),
        ground_truth_label_path: Some(label_file),
        categories: BTreeMap::from([(POSITIVE, "positive".into()), (NEGATIVE, "negative".into())]),
        angular_resolution: None,
        background_categories: Some([NEGATIVE].into()),
        base_dir: PathBuf::new(),
    };
    let manifest_path = dir.join(format!("{name}.json"));
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&manifest_path, text.as_bytes())?;
    println!("{}", manifest_path.display());
    log::info!("{name}: {} points, seed {seed}", cloud.len());
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    miou: f64,
    per_category: BTreeMap<u32, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline_miou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_miou: Option<f64>,
}

fn eval(pred: &Path, truth: &Path, baseline: Option<&Path>, categories: &[u32]) -> anyhow::Result<()> {
    let truth_labels = read_label_file(truth)?;
    let cats = (!categories.is_empty()).then_some(categories);
    let read = |p: &Path| -> anyhow::Result<Vec<u32>> {
        let l = read_label_file(p)?;
        if l.len() != truth_labels.len() {
            return Err(Error::LabelCount {
                path: p.to_path_buf(),
                labels: l.len(),
                points: truth_labels.len(),
            }
            .into());
        }
        Ok(l)
    };
    let report = miou(&read(pred)?, &truth_labels, cats)?;
    let base = match baseline {
        Some(b) => Some(miou(&read(b)?, &truth_labels, cats)?.miou),
        None => None,
    };
    emit(
        &EvalReport {
            miou: report.miou,
            per_category: report.per_category,
            baseline_miou: base,
            delta_miou: base.map(|b| report.miou - b),
        },
        None,
    )
}

fn serve(config: ServiceConfig, host: &str, port: u16) -> anyhow::Result<()> {
    if config.manifests.is_empty() {
        return Err(input_error("serve needs at least one --manifest"));
    }
    let state = AppState::new(config)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| input_error(format!("cannot bind {host}:{port}: {e}")))?;
        log::info!("listening on http://{}", listener.local_addr()?);
        let shutdown = async {
            if tokio::signal::ctrl_c().await.is_ok() {
                log::info!("interrupt received, shutting down");
            }
        };
        fittsview_service::serve(listener, state, shutdown).await?;
        Ok(())
    })
}
