//! HTTP front of the coordinator: launch and respond for end-user clients,
//! app-definition sync and hot update, and monitor/control endpoints.

mod api;
mod error;
mod local;

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use flow_core::clock::{Clock, FixedClock, SystemClock};
use flow_core::engine::{Coordinator, EngineError, Models};
use flow_core::model::{load_repository, parse_app, serialize, AppDefinition, ModelError};
use flow_core::services::ServiceInvoker;
use flow_core::store::{write_atomically, BackendRegistry, StoreError};
use thiserror::Error;
use tokio::sync::watch;

pub use api::{router, serve, MAX_POLL_MS};
pub use error::ApiError;
pub use local::LocalTransport;

#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub bind_address: SocketAddr,
    pub data_dir: PathBuf,
    pub repository_root: PathBuf,
    pub log_level: String,
    /// Name of the storage backend, `jsonl` or `memory`.
    pub store: String,
    /// Pin every timestamp to this instant; makes stored state reproducible.
    pub fixed_clock: Option<DateTime<Utc>>,
}

impl ApiConfig {
    pub fn new(repository_root: impl Into<PathBuf>, data_dir: impl Into<PathBuf>) -> Self {
        ApiConfig {
            bind_address: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: data_dir.into(),
            repository_root: repository_root.into(),
            log_level: "info".into(),
            store: "jsonl".into(),
            fixed_clock: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("repository root {0} does not exist")]
    MissingRepository(PathBuf),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> StartupError + '_ {
    move |source| StartupError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Shared state behind every endpoint.
pub struct Server {
    coordinator: Coordinator,
    repository_root: PathBuf,
    /// `<data>/apps/<appId>/<version>.app.json`: every version ever served,
    /// so instances pinned to an old version survive restarts.
    archive_dir: PathBuf,
    app_files: Mutex<BTreeMap<String, PathBuf>>,
    update_lock: Mutex<()>,
    versions: Mutex<BTreeMap<String, watch::Sender<u64>>>,
}

fn archive_path(archive_dir: &Path, app: &AppDefinition) -> PathBuf {
    archive_dir.join(&app.app_id).join(format!("{}.app.json", app.version))
}

fn archive(archive_dir: &Path, app: &AppDefinition) -> std::io::Result<()> {
    let path = archive_path(archive_dir, app);
    fs::create_dir_all(path.parent().expect("archive files live in a directory"))?;
    write_atomically(&path, serialize(app).as_bytes())
}

/// Adds archived versions older than the current one to `models`.
fn load_archive(archive_dir: &Path, models: &mut Models) -> Result<(), StartupError> {
    if !archive_dir.exists() {
        return Ok(());
    }
    for app_dir in fs::read_dir(archive_dir).map_err(io_at(archive_dir))? {
        let app_dir = app_dir.map_err(io_at(archive_dir))?.path();
        if !app_dir.is_dir() {
            continue;
        }
        for file in fs::read_dir(&app_dir).map_err(io_at(&app_dir))? {
            let path = file.map_err(io_at(&app_dir))?.path();
            let text = fs::read_to_string(&path).map_err(io_at(&path))?;
            let app = match parse_app(&text, &models.flows) {
                Ok(app) => app,
                Err(e) => {
                    tracing::warn!(path = %path.display(), error = %e, "skipping unusable archived app version");
                    continue;
                }
            };
            let current = models.app(&app.app_id).map_or(0, |a| a.version);
            if app.version < current && models.app_version(&app.app_id, app.version).is_none() {
                models.insert_app(app);
            }
        }
    }
    Ok(())
}

impl Server {
    pub fn open(config: &ApiConfig) -> Result<Self, StartupError> {
        if !config.repository_root.is_dir() {
            return Err(StartupError::MissingRepository(config.repository_root.clone()));
        }
        fs::create_dir_all(&config.data_dir).map_err(io_at(&config.data_dir))?;
        let repo = load_repository(&config.repository_root)?;
        let mut models = Models::from_repository(&repo);
        let archive_dir = config.data_dir.join("apps");
        load_archive(&archive_dir, &mut models)?;
        for app in repo.apps.values() {
            archive(&archive_dir, app).map_err(io_at(&archive_dir))?;
        }

        let clock: Arc<dyn Clock> = match config.fixed_clock {
            Some(at) => Arc::new(FixedClock(at)),
            None => Arc::new(SystemClock),
        };
        let backend = BackendRegistry::builtin().open(&config.store, &config.data_dir, clock.clone())?;
        let services = ServiceInvoker::new(models.domains.values());
        let versions = repo
            .apps
            .values()
            .map(|a| (a.app_id.clone(), watch::Sender::new(a.version)))
            .collect();
        let coordinator = Coordinator::new(models, backend, services, clock)?;
        tracing::info!(
            apps = repo.apps.len(),
            instances = coordinator.summaries(None).len(),
            "coordinator ready"
        );
        Ok(Server {
            coordinator,
            repository_root: config.repository_root.clone(),
            archive_dir,
            app_files: Mutex::new(repo.app_files),
            update_lock: Mutex::new(()),
            versions: Mutex::new(versions),
        })
    }

    pub fn coordinator(&self) -> &Coordinator {
        &self.coordinator
    }

    /// Validates and installs a new version of an app, rewriting its
    /// repository file. Updates are applied one at a time.
    pub fn update_app(&self, app_id: &str, document: &str) -> Result<u64, ApiError> {
        let _serial = self.update_lock.lock().expect("update lock");
        let models = self.coordinator.models();
        let app = parse_app(document, &models.flows)?;
        if app.app_id != app_id {
            return Err(ApiError::invalid_body(format!(
                "body describes app `{}`, not `{app_id}`",
                app.app_id
            )));
        }
        let current = models.app(app_id).map_or(0, |a| a.version);
        if app.version != current + 1 {
            return Err(EngineError::VersionConflict {
                current,
                submitted: app.version,
            }
            .into());
        }
        archive(&self.archive_dir, &app).map_err(|e| ApiError::internal(e.to_string()))?;
        let path = self
            .app_files
            .lock()
            .expect("app files lock")
            .get(app_id)
            .cloned()
            .unwrap_or_else(|| self.repository_root.join("apps").join(format!("{app_id}.app.json")));
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| ApiError::internal(e.to_string()))?;
        }
        write_atomically(&path, serialize(&app).as_bytes()).map_err(|e| ApiError::internal(e.to_string()))?;
        let version = self.coordinator.install_app(app)?;
        self.app_files
            .lock()
            .expect("app files lock")
            .insert(app_id.to_string(), path);
        self.versions
            .lock()
            .expect("versions lock")
            .entry(app_id.to_string())
            .or_insert_with(|| watch::Sender::new(0))
            .send_replace(version);
        tracing::info!(app = app_id, version, "app updated");
        Ok(version)
    }

    pub fn watch_version(&self, app_id: &str) -> Option<watch::Receiver<u64>> {
        self.versions
            .lock()
            .expect("versions lock")
            .get(app_id)
            .map(watch::Sender::subscribe)
    }
}
