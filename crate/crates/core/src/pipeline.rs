//! Stage orchestration over a run directory.
//!
//! Stages exchange data only through files under `run.out_dir`:
//!
//! | stage | reads | writes |
//! |---|---|---|
//! | phantom | config | `scans/` |
//! | mesh | `scans/` | `meshes/`, `graphs/` |
//! | features | `scans/`, `graphs/` | `features/` |
//! | train-shape | `features/`, `graphs/` | `split.json`, `shape/`, `models/shape/` |
//! | sample | `scans/` | `samples/` |
//! | score | `scans/`, `samples/` | `split.json`, `scores/`, `models/scorer/` |
//! | evaluate | all of the above that exist | `eval/` |
//!
//! Every stage also refreshes `config.toml`, `provenance/<stage>.json` and `index.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{PipelineConfig, SplitSection};
use crate::ensemble::{
    infer, train_ensemble, train_individual, FoldSplit, LabelMode, LabeledShapeRecord, ModelKind,
    RunManifest, ShapeDataset, TrainedFold,
};
use crate::eval::{
    make_folds, roc_auc, stratify, top_k_sum, write_roc_csv, KidneyRecord, RocSummary,
};
use crate::features::{
    attenuation_histogram_in, curvature_histogram_in, read_feature_csv, shape_descriptors,
    write_feature_csv, FeatureRow, FeatureVector28,
};
use crate::mesher::{kidney_graph, KidneyGraph};
use crate::phantom::{phantom_generate, LesionKind, PhantomManifest};
use crate::sampler::{
    centralised_samples, patch_features, preprocess, read_sample_csv, read_score_csv,
    sliding_samples, write_sample_csv, write_score_csv, ReferenceScorer, SampleKind, SampleLabel,
    SampleScore, SampleSpec, Scheme, SCORER_FEATURES,
};
use crate::volio::{
    load_grid, save_labels, save_volume, split_kidneys, write_atomic, KidneyComponent, LabelGrid,
    Side, VolumeGrid,
};
use crate::{Error, Result};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Phantom,
    Mesh,
    Features,
    TrainShape,
    Sample,
    Score,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Phantom,
        Stage::Mesh,
        Stage::Features,
        Stage::TrainShape,
        Stage::Sample,
        Stage::Score,
        Stage::Evaluate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Phantom => "phantom",
            Stage::Mesh => "mesh",
            Stage::Features => "features",
            Stage::TrainShape => "train-shape",
            Stage::Sample => "sample",
            Stage::Score => "score",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

/// Paths inside a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn scan_index(&self) -> PathBuf {
        self.root.join("scans/index.json")
    }
    pub fn volume(&self, scan: &str) -> PathBuf {
        self.root.join(format!("scans/{scan}.volume"))
    }
    pub fn labels(&self, scan: &str) -> PathBuf {
        self.root.join(format!("scans/{scan}.labels"))
    }
    pub fn truth(&self, scan: &str) -> PathBuf {
        self.root.join(format!("scans/{scan}.truth.json"))
    }
    pub fn mesh(&self, kidney: &str) -> PathBuf {
        self.root.join(format!("meshes/{kidney}.obj"))
    }
    pub fn graph(&self, kidney: &str) -> PathBuf {
        self.root.join(format!("graphs/{kidney}.json"))
    }
    pub fn feature_csv(&self) -> PathBuf {
        self.root.join("features/features.csv")
    }
    pub fn kidney_index(&self) -> PathBuf {
        self.root.join("features/kidneys.json")
    }
    pub fn split(&self) -> PathBuf {
        self.root.join("split.json")
    }
    pub fn shape_model(&self, kind: &str, fold: usize) -> PathBuf {
        self.root
            .join(format!("models/shape/{kind}/fold{fold}.json"))
    }
    pub fn samples(&self, kind: SampleKind) -> PathBuf {
        self.root.join(format!("samples/{}.csv", kind.as_str()))
    }
    pub fn scores(&self, kind: SampleKind) -> PathBuf {
        self.root.join(format!("scores/{}.csv", kind.as_str()))
    }
    pub fn scorer(&self, kind: SampleKind) -> PathBuf {
        self.root
            .join(format!("models/scorer/{}.json", kind.as_str()))
    }
    pub fn summary(&self) -> PathBuf {
        self.root.join("eval/summary.json")
    }
    pub fn roc(&self, model: &str, stratum: &str) -> PathBuf {
        self.root.join(format!("eval/roc/{model}_{stratum}.csv"))
    }
}

/// `scans/index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanIndex {
    pub scans: Vec<String>,
}

/// One kidney's identity and ground truth, `features/kidneys.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KidneyInfo {
    pub kidney_id: String,
    pub patient_id: String,
    pub side: Side,
    pub lesion_kind: Option<LesionKind>,
    /// Any lesion, cysts included.
    pub lesion_volume_mm3: f64,
    pub tumour_volume_mm3: f64,
    pub tumour_diameter_mm: f64,
}

impl KidneyInfo {
    pub fn cancerous(&self) -> bool {
        self.tumour_volume_mm3 > 0.0
    }
}

/// Held-out test patients plus a fold index for every remaining patient, `split.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientSplit {
    pub k: usize,
    pub test: BTreeSet<String>,
    pub folds: BTreeMap<String, usize>,
}

/// Seeded patient shuffle; the first `round(n · test_fraction)` patients form the test set
/// and the rest are dealt into `folds` folds.
pub fn split_patients(patients: &[String], cfg: &SplitSection) -> Result<PatientSplit> {
    let mut ids: Vec<String> = patients.to_vec();
    ids.sort();
    ids.dedup();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_test = (ids.len() as f64 * cfg.test_fraction).round() as usize;
    let rest = ids.split_off(n_test);
    let folds = make_folds(&rest, cfg.folds, cfg.seed.wrapping_add(1))?;
    Ok(PatientSplit {
        k: cfg.folds,
        test: ids.into_iter().collect(),
        folds,
    })
}

/// `<scan>_<side>`.
pub fn kidney_id(scan: &str, side: Side) -> String {
    format!("{scan}_{}", side.as_str())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn require(path: &Path, producer: Stage) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{} is missing; run the {producer} stage first",
            path.display()
        )))
    }
}

fn load_scan(run: &RunDir, scan: &str) -> Result<(VolumeGrid, LabelGrid)> {
    let volume = load_grid(run.volume(scan))?.into_volume()?;
    let labels = load_grid(run.labels(scan))?.into_labels()?;
    Ok((volume, labels))
}

fn scan_ids(run: &RunDir) -> Result<Vec<String>> {
    require(&run.scan_index(), Stage::Phantom)?;
    Ok(read_json::<ScanIndex>(&run.scan_index())?.scans)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `provenance/<stage>.json`: what produced the artifacts, without timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub stage: String,
    pub package: String,
    pub version: String,
    pub config_sha256: String,
    pub seeds: BTreeMap<String, u64>,
}

impl Provenance {
    /// The hash covers everything except `run.out_dir`, so relocated runs compare equal.
    pub fn new(cfg: &PipelineConfig, stage: Stage) -> Result<Self> {
        let mut hashed = cfg.clone();
        hashed.run.out_dir = PathBuf::new();
        let seeds = [
            ("phantom", cfg.phantom.seed),
            ("split", cfg.split.seed),
            ("shape", cfg.shape.seed),
            ("sampler", cfg.sampling.params.seed),
            ("scorer", cfg.sampling.scorer.seed),
        ];
        Ok(Self {
            stage: stage.to_string(),
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: sha256_hex(hashed.to_toml()?.as_bytes()),
            seeds: seeds.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        })
    }
}

/// One entry of `index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub bytes: u64,
    pub sha256: String,
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Rewrites `index.json` with the size and hash of every artifact under the run directory.
pub fn write_index(run: &RunDir) -> Result<BTreeMap<String, IndexEntry>> {
    let mut files = Vec::new();
    collect_files(&run.root, &mut files)?;
    let mut index = BTreeMap::new();
    for f in files {
        let rel = f
            .strip_prefix(&run.root)
            .expect("under root")
            .to_string_lossy()
            .replace('\\', "/");
        if rel == "index.json" || rel.ends_with(".tmp") {
            continue;
        }
        let bytes = std::fs::read(&f).map_err(|e| Error::io(&f, e))?;
        index.insert(
            rel,
            IndexEntry {
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            },
        );
    }
    write_json(&run.root.join("index.json"), &index)?;
    Ok(index)
}

/// Runs one stage and refreshes the run bookkeeping; errors carry the stage name.
pub fn run_stage(cfg: &PipelineConfig, stage: Stage) -> Result<()> {
    let name: &'static str = stage.as_str();
    let inner = || -> Result<()> {
        cfg.validate()?;
        let run = RunDir::new(&cfg.run.out_dir);
        std::fs::create_dir_all(&run.root).map_err(|e| Error::io(&run.root, e))?;
        match stage {
            Stage::Phantom => stage_phantom(cfg, &run)?,
            Stage::Mesh => stage_mesh(cfg, &run)?,
            Stage::Features => stage_features(cfg, &run)?,
            Stage::TrainShape => stage_train_shape(cfg, &run)?,
            Stage::Sample => stage_sample(cfg, &run)?,
            Stage::Score => stage_score(cfg, &run)?,
            Stage::Evaluate => {
                stage_evaluate(cfg, &run)?;
            }
        }
        write_atomic(&run.root.join("config.toml"), cfg.to_toml()?.as_bytes())?;
        write_json(
            &run.root.join(format!("provenance/{name}.json")),
            &Provenance::new(cfg, stage)?,
        )?;
        write_index(&run)?;
        Ok(())
    };
    inner().map_err(|e| e.in_stage(name))
}

/// Every selected stage in order; returns the evaluation summaries.
pub fn run_all(cfg: &PipelineConfig) -> Result<Vec<RocSummary>> {
    let sel = cfg.run.stages;
    for stage in Stage::ALL {
        let wanted = match stage {
            Stage::Mesh | Stage::Features | Stage::TrainShape => sel.shape,
            Stage::Sample | Stage::Score => sel.sampling,
            Stage::Phantom | Stage::Evaluate => true,
        };
        if wanted {
            run_stage(cfg, stage)?;
        }
    }
    load_summaries(&RunDir::new(&cfg.run.out_dir))
}

/// `eval/summary.json` of a finished run.
pub fn load_summaries(run: &RunDir) -> Result<Vec<RocSummary>> {
    require(&run.summary(), Stage::Evaluate)?;
    read_json(&run.summary())
}

fn stage_phantom(cfg: &PipelineConfig, run: &RunDir) -> Result<()> {
    let patients = cfg.phantom.patients()?;
    for (id, spec) in &patients {
        let p = phantom_generate(spec)?;
        save_volume(run.volume(id), &p.volume)?;
        save_labels(run.labels(id), &p.labels)?;
        write_json(&run.truth(id), &p.manifest)?;
    }
    write_json(
        &run.scan_index(),
        &ScanIndex {
            scans: patients.into_iter().map(|(id, _)| id).collect(),
        },
    )
}

fn stage_mesh(cfg: &PipelineConfig, run: &RunDir) -> Result<()> {
    for scan in scan_ids(run)? {
        let labels = load_grid(run.labels(&scan))?.into_labels()?;
        for k in split_kidneys(&labels)? {
            let id = kidney_id(&scan, k.side);
            let (mesh, _, graph) = kidney_graph::<f64>(&k.mask, &cfg.features.surface)?;
            write_atomic(&run.mesh(&id), mesh.to_obj().as_bytes())?;
            write_atomic(&run.graph(&id), graph.to_json().as_bytes())?;
        }
    }
    Ok(())
}

fn read_graph(run: &RunDir, kidney: &str) -> Result<KidneyGraph<f64>> {
    let path = run.graph(kidney);
    require(&path, Stage::Mesh)?;
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    KidneyGraph::from_json(&text)
}

fn kidney_info(scan: &str, k: &KidneyComponent, truth: &PhantomManifest) -> Result<KidneyInfo> {
    let t = truth.kidney(k.side).ok_or_else(|| {
        Error::Format(format!(
            "{scan}: no ground truth for the {} kidney",
            k.side.as_str()
        ))
    })?;
    Ok(KidneyInfo {
        kidney_id: kidney_id(scan, k.side),
        patient_id: scan.to_string(),
        side: k.side,
        lesion_kind: t.lesion.map(|l| l.kind),
        lesion_volume_mm3: t.lesion_volume_mm3(),
        tumour_volume_mm3: t.tumour_volume_mm3(),
        tumour_diameter_mm: t.tumour_diameter_mm(),
    })
}

fn stage_features(cfg: &PipelineConfig, run: &RunDir) -> Result<()> {
    let p = &cfg.features;
    let mut rows = Vec::new();
    let mut infos = Vec::new();
    for scan in scan_ids(run)? {
        let (volume, labels) = load_scan(run, &scan)?;
        let truth: PhantomManifest = read_json(&run.truth(&scan))?;
        for k in split_kidneys(&labels)? {
            let info = kidney_info(&scan, &k, &truth)?;
            let graph = read_graph(run, &info.kidney_id)?;
            let shape = shape_descriptors(&k)?;
            let curv = curvature_histogram_in(&graph.curvatures(), p.curvature_range);
            let atten = attenuation_histogram_in(&volume, &k.mask, p.attenuation_range)?;
            let label = u8::from(
                info.lesion_volume_mm3 > cfg.shape.label_thresholds.get(LabelMode::Ensemble),
            );
            rows.push(FeatureRow {
                id: info.kidney_id.clone(),
                side: k.side,
                label,
                features: FeatureVector28::assemble(&shape, &curv, &atten)?,
            });
            infos.push(info);
        }
    }
    write_feature_csv(run.feature_csv(), &rows)?;
    write_json(&run.kidney_index(), &infos)
}

fn ensure_split(cfg: &PipelineConfig, run: &RunDir) -> Result<PatientSplit> {
    let split = split_patients(&scan_ids(run)?, &cfg.split)?;
    write_json(&run.split(), &split)?;
    Ok(split)
}

/// Shape records of every kidney, in kidney-index order.
fn shape_records(run: &RunDir) -> Result<(Vec<KidneyInfo>, Vec<LabeledShapeRecord>)> {
    require(&run.kidney_index(), Stage::Features)?;
    let infos: Vec<KidneyInfo> = read_json(&run.kidney_index())?;
    let rows: BTreeMap<String, FeatureRow> = read_feature_csv(run.feature_csv())?
        .into_iter()
        .map(|r| (r.id.clone(), r))
        .collect();
    let records = infos
        .iter()
        .map(|info| {
            let row = rows
                .get(&info.kidney_id)
                .ok_or_else(|| Error::Format(format!("no feature row for {}", info.kidney_id)))?;
            Ok(LabeledShapeRecord {
                kidney_id: info.kidney_id.clone(),
                patient_id: info.patient_id.clone(),
                features: row.features,
                graph: read_graph(run, &info.kidney_id)?,
                lesion_volume: info.lesion_volume_mm3,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((infos, records))
}

const SHAPE_MODELS: [&str; 3] = ["mlp", "gnn", "ensemble"];

fn stage_train_shape(cfg: &PipelineConfig, run: &RunDir) -> Result<()> {
    let split = ensure_split(cfg, run)?;
    let (_, records) = shape_records(run)?;
    let train: Vec<LabeledShapeRecord> = records
        .into_iter()
        .filter(|r| split.folds.contains_key(&r.patient_id))
        .collect();
    let folds = FoldSplit::new(
        split.k,
        train.iter().map(|r| split.folds[&r.patient_id]).collect(),
    )?;
    let data = ShapeDataset::<f64>::new(&train);
    let mlp = train_individual(ModelKind::Mlp, &data, &folds, &cfg.shape)?;
    let gnn = train_individual(ModelKind::Gnn, &data, &folds, &cfg.shape)?;
    let ens = train_ensemble(&mlp, &gnn, &data, &folds, &cfg.shape)?;
    let mut losses = BTreeMap::new();
    for (name, trained) in SHAPE_MODELS.iter().zip([&mlp, &gnn, &ens]) {
        for f in trained {
            f.save(run.shape_model(name, f.fold), cfg.shape.seed)?;
            losses.insert(format!("{name}/fold{}", f.fold), f.losses.clone());
        }
    }
    write_json(
        &run.root.join("shape/run_manifest.json"),
        &RunManifest::new(&cfg.shape, &train, &folds),
    )?;
    write_json(&run.root.join("shape/losses.json"), &losses)
}

fn stage_sample(cfg: &PipelineConfig, run: &RunDir) -> Result<()> {
    let params = &cfg.sampling.params;
    let mut out: BTreeMap<SampleKind, Vec<SampleSpec>> = BTreeMap::new();
    for scan in scan_ids(run)? {
        let (volume, labels) = load_scan(run, &scan)?;
        let pre = preprocess(&volume, &labels, params)?;
        let kidneys = split_kidneys(&pre.labels)?;
        let named: Vec<(String, &KidneyComponent)> = kidneys
            .iter()
            .map(|k| (kidney_id(&scan, k.side), k))
            .collect();
        for &kind in &cfg.sampling.kinds {
            let list = out.entry(kind).or_default();
            for (id, k) in &named {
                list.extend(centralised_samples(
                    &pre,
                    k,
                    kind,
                    (&scan, id),
                    params,
                    true,
                )?);
            }
            list.extend(sliding_samples(&pre, &named, kind, &scan, params)?);
        }
    }
    for (kind, samples) in out {
        write_sample_csv(run.samples(kind), &samples)?;
    }
    Ok(())
}

type FeatureRows = Vec<([f64; SCORER_FEATURES], SampleLabel)>;

fn stage_score(cfg: &PipelineConfig, run: &RunDir) -> Result<()> {
    let split = ensure_split(cfg, run)?;
    let mut by_kind = BTreeMap::new();
    for &kind in &cfg.sampling.kinds {
        require(&run.samples(kind), Stage::Sample)?;
        by_kind.insert(kind, read_sample_csv(run.samples(kind))?);
    }
    // features of every sample, computed scan by scan
    let mut feats: BTreeMap<SampleKind, Vec<[f64; SCORER_FEATURES]>> = BTreeMap::new();
    for scan in scan_ids(run)? {
        let wanted: Vec<(SampleKind, usize)> = by_kind
            .iter()
            .flat_map(|(k, s)| {
                s.iter()
                    .enumerate()
                    .filter(|(_, s)| s.scan_id == scan)
                    .map(|(i, _)| (*k, i))
            })
            .collect();
        if wanted.is_empty() {
            continue;
        }
        let (volume, labels) = load_scan(run, &scan)?;
        let pre = preprocess(&volume, &labels, &cfg.sampling.params)?;
        for (kind, i) in wanted {
            let list = feats
                .entry(kind)
                .or_insert_with(|| vec![[0.0; SCORER_FEATURES]; by_kind[&kind].len()]);
            list[i] = patch_features(&pre, &by_kind[&kind][i]);
        }
    }
    for (kind, samples) in &by_kind {
        let f = feats.remove(kind).unwrap_or_default();
        let is_train = |s: &SampleSpec| split.folds.contains_key(&s.scan_id);
        let pick = |keep: &dyn Fn(&SampleSpec) -> bool| -> FeatureRows {
            samples
                .iter()
                .zip(&f)
                .filter(|(s, _)| keep(s))
                .map(|(s, x)| (*x, s.label))
                .collect()
        };
        let pretrain = pick(&|s| is_train(s) && s.scheme == Scheme::Sliding);
        let finetune = pick(&|s| is_train(s));
        let scorer = ReferenceScorer::train(&pretrain, &finetune, &cfg.sampling.scorer)?;
        scorer.save(run.scorer(*kind), cfg.sampling.scorer.seed)?;
        let (mut test, mut scores) = (Vec::new(), Vec::new());
        for (s, x) in samples.iter().zip(&f) {
            if split.test.contains(&s.scan_id) && s.scheme == Scheme::Centralised {
                test.push(s.clone());
                scores.push(SampleScore {
                    probabilities: scorer.probabilities(x)?,
                });
            }
        }
        write_score_csv(run.scores(*kind), &test, &scores)?;
    }
    Ok(())
}

/// Strata reported for every model: everything, the size split and one per lesion kind.
fn strata(
    records: &[(KidneyRecord, Option<LesionKind>)],
    small_mm: f64,
) -> Vec<(String, Vec<KidneyRecord>)> {
    let all: Vec<KidneyRecord> = records.iter().map(|(r, _)| r.clone()).collect();
    let s = stratify(&all, small_mm);
    let mut out = vec![
        ("all".to_string(), all),
        ("small".to_string(), s.small),
        ("large".to_string(), s.large),
    ];
    for kind in [LesionKind::ExophyticBump, LesionKind::EndophyticSphere] {
        let name = match kind {
            LesionKind::ExophyticBump => "exophytic",
            _ => "endophytic",
        };
        let sel = records
            .iter()
            .filter(|(r, k)| !r.cancerous || *k == Some(kind))
            .map(|(r, _)| r.clone())
            .collect();
        out.push((name.to_string(), sel));
    }
    out
}

fn evaluate_model(
    run: &RunDir,
    model: &str,
    records: &[(KidneyRecord, Option<LesionKind>)],
    small_mm: f64,
    out: &mut Vec<RocSummary>,
) -> Result<()> {
    for (stratum, recs) in strata(records, small_mm) {
        let truth: Vec<bool> = recs.iter().map(|r| r.cancerous).collect();
        if !truth.iter().any(|&t| t) || truth.iter().all(|&t| t) {
            continue;
        }
        let scores: Vec<f64> = recs.iter().map(|r| r.score).collect();
        let curve = roc_auc(&scores, &truth)?;
        write_roc_csv(run.roc(model, &stratum), &curve)?;
        out.push(curve.summary(model, &stratum));
    }
    Ok(())
}

fn write_kidney_scores(
    path: &Path,
    models: &[&str],
    rows: &[(KidneyInfo, Vec<f64>)],
) -> Result<()> {
    let mut text = Vec::new();
    writeln!(
        text,
        "kidney_id,patient_id,cancerous,tumour_diameter_mm,{}",
        models.join(",")
    )
    .expect("write to vec");
    for (info, scores) in rows {
        let s: Vec<String> = scores.iter().map(|v| format!("{v}")).collect();
        writeln!(
            text,
            "{},{},{},{},{}",
            info.kidney_id,
            info.patient_id,
            u8::from(info.cancerous()),
            info.tumour_diameter_mm,
            s.join(",")
        )
        .expect("write to vec");
    }
    write_atomic(path, &text)
}

fn stage_evaluate(cfg: &PipelineConfig, run: &RunDir) -> Result<Vec<RocSummary>> {
    require(&run.split(), Stage::TrainShape)?;
    let split: PatientSplit = read_json(&run.split())?;
    let small = cfg.eval.small_tumour_mm;
    let mut summaries = Vec::new();
    let infos: Option<Vec<KidneyInfo>> = if run.kidney_index().exists() {
        Some(read_json(&run.kidney_index())?)
    } else {
        None
    };
    let record = |info: &KidneyInfo, score: f64| {
        (
            KidneyRecord {
                kidney_id: info.kidney_id.clone(),
                patient_id: info.patient_id.clone(),
                cancerous: info.cancerous(),
                tumour_max_diameter: info.tumour_diameter_mm,
                score,
            },
            info.lesion_kind.filter(|_| info.cancerous()),
        )
    };

    if cfg.run.stages.shape {
        let (infos, records) = shape_records(run)?;
        let mut per_model = Vec::new();
        for name in SHAPE_MODELS {
            let folds = (0..split.k)
                .map(|f| {
                    let path = run.shape_model(name, f);
                    require(&path, Stage::TrainShape)?;
                    TrainedFold::<f64>::load(path)
                })
                .collect::<Result<Vec<_>>>()?;
            per_model.push(folds);
        }
        let mut rows = Vec::new();
        for (info, rec) in infos.iter().zip(&records) {
            if split.test.contains(&info.patient_id) {
                let scores = per_model
                    .iter()
                    .map(|f| infer(f, split.k, rec))
                    .collect::<Result<Vec<_>>>()?;
                rows.push((info.clone(), scores));
            }
        }
        write_kidney_scores(
            &run.root.join("eval/shape_scores.csv"),
            &SHAPE_MODELS,
            &rows,
        )?;
        for (m, name) in SHAPE_MODELS.iter().enumerate() {
            let recs: Vec<_> = rows.iter().map(|(info, s)| record(info, s[m])).collect();
            evaluate_model(run, name, &recs, small, &mut summaries)?;
        }
    }

    if cfg.run.stages.sampling {
        let by_id: BTreeMap<String, KidneyInfo> = match infos {
            Some(list) => list.into_iter().map(|i| (i.kidney_id.clone(), i)).collect(),
            None => sampling_truth(run, &split)?,
        };
        for &kind in &cfg.sampling.kinds {
            require(&run.scores(kind), Stage::Score)?;
            let mut per_kidney: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for row in read_score_csv(run.scores(kind))? {
                per_kidney
                    .entry(row.kidney_id)
                    .or_default()
                    .push(row.score.cancer());
            }
            let mut rows = Vec::new();
            for (id, scores) in &per_kidney {
                let info = by_id
                    .get(id)
                    .ok_or_else(|| Error::Format(format!("no ground truth for kidney {id}")))?;
                rows.push((info.clone(), vec![top_k_sum(scores, cfg.eval.top_k(kind))?]));
            }
            write_kidney_scores(
                &run.root.join(format!("eval/{}_scores.csv", kind.as_str())),
                &[kind.as_str()],
                &rows,
            )?;
            let recs: Vec<_> = rows.iter().map(|(info, s)| record(info, s[0])).collect();
            evaluate_model(run, kind.as_str(), &recs, small, &mut summaries)?;
        }
    }
    write_json(&run.summary(), &summaries)?;
    Ok(summaries)
}

/// Ground truth straight from the scans when the shape branch did not run.
fn sampling_truth(run: &RunDir, split: &PatientSplit) -> Result<BTreeMap<String, KidneyInfo>> {
    let mut out = BTreeMap::new();
    for scan in scan_ids(run)?
        .into_iter()
        .filter(|s| split.test.contains(s))
    {
        let labels = load_grid(run.labels(&scan))?.into_labels()?;
        let truth: PhantomManifest = read_json(&run.truth(&scan))?;
        for k in split_kidneys(&labels)? {
            let info = kidney_info(&scan, &k, &truth)?;
            out.insert(info.kidney_id.clone(), info);
        }
    }
    Ok(out)
}
