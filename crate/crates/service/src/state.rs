use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use fittsview_core::io::{load_dataset, Dataset, DatasetManifest};
use fittsview_core::optimizer::ViewpointRecommendation;
use fittsview_core::pipeline::{prepare_instances, recommend_dataset, PipelineConfig};
use fittsview_core::session::{LabelSession, SessionStore};
use fittsview_core::{Error, Result};
use tokio::sync::RwLock;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub manifests: Vec<PathBuf>,
    /// Where sessions are persisted; `None` keeps them in memory only.
    pub store_dir: Option<PathBuf>,
    pub pipeline: PipelineConfig,
}

#[derive(Debug, Clone)]
pub enum RecState {
    Pending,
    Ready { recommendations: Arc<Vec<ViewpointRecommendation>> },
    Failed { message: String },
}

pub struct DatasetEntry {
    pub manifest: DatasetManifest,
    loaded: Mutex<Option<Arc<Dataset>>>,
    recs: Mutex<Option<RecState>>,
}

pub struct SessionHandle {
    pub dataset: Arc<Dataset>,
    pub entry: Arc<DatasetEntry>,
    pub session: RwLock<LabelSession>,
}

pub struct AppState {
    pub config: ServiceConfig,
    pub datasets: BTreeMap<String, Arc<DatasetEntry>>,
    pub sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
    pub store: Option<SessionStore>,
    counter: AtomicU64,
}

impl AppState {
    /// Reads every manifest up front; clouds load on first use.
    pub fn new(config: ServiceConfig) -> Result<Arc<Self>> {
        config.pipeline.validate()?;
        let mut datasets = BTreeMap::new();
        for path in &config.manifests {
            let manifest = DatasetManifest::load(path)?;
            if datasets.contains_key(&manifest.name) {
                return Err(Error::InvalidInput(format!("dataset name {:?} used twice", manifest.name)));
            }
            datasets.insert(
                manifest.name.clone(),
                Arc::new(DatasetEntry {
                    manifest,
                    loaded: Mutex::new(None),
                    recs: Mutex::new(None),
                }),
            );
        }
        let store = config.store_dir.as_ref().map(SessionStore::new).transpose()?;
        Ok(Arc::new(Self {
            config,
            datasets,
            sessions: RwLock::new(HashMap::new()),
            store,
            counter: AtomicU64::new(0),
        }))
    }

    pub fn new_session_id(&self) -> String {
        let n = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
        let ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
        format!("s{ms:x}-{n}")
    }
}

impl DatasetEntry {
    /// Loads (once) and applies the configured downsampling.
    pub fn dataset(&self, config: &PipelineConfig) -> Result<Arc<Dataset>> {
        let mut slot = self.loaded.lock().expect("dataset lock");
        if let Some(d) = slot.as_ref() {
            return Ok(d.clone());
        }
        let d = Arc::new(config.reduce(load_dataset(&self.manifest)?)?);
        *slot = Some(d.clone());
        Ok(d)
    }

    /// Category ids a session may assign.
    pub fn categories(&self, dataset: &Dataset) -> BTreeSet<u32> {
        let mut cats: BTreeSet<u32> = self.manifest.categories.keys().copied().filter(|&c| c != 0).collect();
        if cats.is_empty() {
            if let Some(l) = dataset.cloud.semantic_labels() {
                cats.extend(l.iter().copied().filter(|&c| c != 0));
            }
        }
        cats
    }

    pub fn rec_state(&self) -> Option<RecState> {
        self.recs.lock().expect("rec lock").clone()
    }

    /// Starts the background search unless it already ran or is running.
    pub fn ensure_recommendations(self: &Arc<Self>, dataset: Arc<Dataset>, config: PipelineConfig) {
        {
            let mut slot = self.recs.lock().expect("rec lock");
            if slot.is_some() {
                return;
            }
            *slot = Some(RecState::Pending);
        }
        let entry = self.clone();
        tokio::task::spawn_blocking(move || {
            let result = prepare_instances(&dataset, &config)
                .and_then(|prep| recommend_dataset(&dataset, &prep.instances, &config));
            let state = match result {
                Ok(recs) => {
                    log::info!("{}: {} recommendations ready", entry.manifest.name, recs.len());
                    RecState::Ready {
                        recommendations: Arc::new(recs),
                    }
                }
                Err(e) => {
                    log::error!("{}: recommendation failed: {e}", entry.manifest.name);
                    RecState::Failed { message: e.to_string() }
                }
            };
            *entry.recs.lock().expect("rec lock") = Some(state);
        });
    }
}
