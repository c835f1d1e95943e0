#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use flow_core::clock::FixedClock;
use flow_core::engine::{ExecContext, Models, StepRegistry};
use flow_core::model::{load_repository, Repository};
use flow_core::services::ServiceInvoker;
use flow_core::store::MemoryDatabase;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn repo(name: &str) -> Repository {
    load_repository(&fixtures().join(name)).expect("fixture repository loads")
}

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap()
}

/// Everything an `ExecContext` borrows, owned in one place.
pub struct Harness {
    pub models: Models,
    pub store: MemoryDatabase,
    pub services: ServiceInvoker,
    pub clock: FixedClock,
    pub handlers: StepRegistry,
}

impl Harness {
    pub fn new(repo: &Repository) -> Self {
        let models = Models::from_repository(repo);
        let services = ServiceInvoker::new(models.domains.values());
        Harness {
            models,
            store: MemoryDatabase::new(Arc::new(FixedClock(epoch()))),
            services,
            clock: FixedClock(epoch()),
            handlers: StepRegistry::builtin(),
        }
    }

    pub fn potluck() -> Self {
        Harness::new(&repo("potluck"))
    }

    pub fn ctx(&self) -> ExecContext<'_> {
        ExecContext {
            models: &self.models,
            store: &self.store,
            services: &self.services,
            clock: &self.clock,
            handlers: &self.handlers,
        }
    }
}
