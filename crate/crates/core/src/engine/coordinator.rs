use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::clock::Clock;
use crate::model::AppDefinition;
use crate::protocol::{IterationRequest, IterationResponse};
use crate::services::ServiceInvoker;
use crate::store::Backend;

use super::exec::{self, ExecContext};
use super::instance::{FlowInstance, InstanceState};
use super::models::Models;
use super::steps::StepRegistry;
use super::{EngineError, FinalStatus, Outcome};

/// Monitoring view of an instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InstanceSummary {
    pub instance_id: u64,
    pub app_id: String,
    pub state: InstanceState,
    pub flow_name: String,
    pub launcher_id: String,
    pub model_version: u64,
    pub started_at: DateTime<Utc>,
}

impl From<&FlowInstance> for InstanceSummary {
    fn from(i: &FlowInstance) -> Self {
        InstanceSummary {
            instance_id: i.instance_id,
            app_id: i.app_id.clone(),
            state: i.state,
            flow_name: i.flow_name.clone(),
            launcher_id: i.launcher_id.clone(),
            model_version: i.model_version,
            started_at: i.started_at,
        }
    }
}

/// Owns all live instances. Operations on one instance are serialized by a
/// per-instance lock; different instances proceed in parallel. Every state
/// change is persisted before the call returns.
pub struct Coordinator {
    models: RwLock<Arc<Models>>,
    backend: Backend,
    services: ServiceInvoker,
    handlers: StepRegistry,
    clock: Arc<dyn Clock>,
    instances: Mutex<BTreeMap<u64, Arc<Mutex<FlowInstance>>>>,
    next_id: AtomicU64,
}

impl Coordinator {
    /// Restores every saved instance; ids continue after the highest one seen.
    pub fn new(
        models: Models,
        backend: Backend,
        services: ServiceInvoker,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, EngineError> {
        let mut instances = BTreeMap::new();
        for text in backend.instances.load_instances()? {
            let instance = exec::restore(&text, &models)?;
            instances.insert(instance.instance_id, Arc::new(Mutex::new(instance)));
        }
        let next_id = instances.keys().next_back().map_or(1, |id| id + 1);
        Ok(Coordinator {
            models: RwLock::new(Arc::new(models)),
            backend,
            services,
            handlers: StepRegistry::builtin(),
            clock,
            instances: Mutex::new(instances),
            next_id: AtomicU64::new(next_id),
        })
    }

    pub fn with_handlers(mut self, handlers: StepRegistry) -> Self {
        self.handlers = handlers;
        self
    }

    pub fn models(&self) -> Arc<Models> {
        self.models.read().expect("models lock").clone()
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    fn with_ctx<T>(&self, models: &Models, f: impl FnOnce(&ExecContext<'_>) -> T) -> T {
        let ctx = ExecContext {
            models,
            store: self.backend.records.as_ref(),
            services: &self.services,
            clock: self.clock.as_ref(),
            handlers: &self.handlers,
        };
        f(&ctx)
    }

    fn persist(&self, instance: &FlowInstance) -> Result<(), EngineError> {
        self.backend
            .instances
            .save_instance(instance.instance_id, &exec::snapshot(instance))?;
        Ok(())
    }

    fn slot(&self, instance_id: u64) -> Result<Arc<Mutex<FlowInstance>>, EngineError> {
        self.instances
            .lock()
            .expect("instance table lock")
            .get(&instance_id)
            .cloned()
            .ok_or(EngineError::UnknownInstance(instance_id))
    }

    /// Launches `launcher_id` of the latest version of `app_id`.
    pub fn launch(&self, app_id: &str, launcher_id: &str) -> Result<(u64, Outcome), EngineError> {
        let models = self.models();
        let app = models
            .app(app_id)
            .ok_or_else(|| EngineError::UnknownApp(app_id.to_string()))?;
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let mut instance = self.with_ctx(&models, |ctx| exec::create_instance(ctx, app, launcher_id, id))?;
        let slot = Arc::new(Mutex::new(instance.clone()));
        let mut guard = slot.lock().expect("instance lock");
        self.instances
            .lock()
            .expect("instance table lock")
            .insert(id, slot.clone());
        let result = self.with_ctx(&models, |ctx| exec::advance(ctx, &mut instance));
        *guard = instance;
        self.persist(&guard)?;
        result.map(|outcome| (id, outcome))
    }

    pub fn respond(&self, response: &IterationResponse, instance_id: u64) -> Result<Outcome, EngineError> {
        let slot = self.slot(instance_id)?;
        let mut instance = slot.lock().expect("instance lock");
        // an instance keeps running against the definition it was launched with
        let models = self.models();
        let result = self.with_ctx(&models, |ctx| exec::apply_response(ctx, &mut instance, response));
        if !matches!(result, Err(EngineError::StaleInstance(_))) {
            self.persist(&instance)?;
        }
        result
    }

    pub fn cancel(&self, instance_id: u64) -> Result<FinalStatus, EngineError> {
        let slot = self.slot(instance_id)?;
        let mut instance = slot.lock().expect("instance lock");
        let status = exec::cancel(self.clock.as_ref(), &mut instance)?;
        self.persist(&instance)?;
        Ok(status)
    }

    pub fn instance(&self, instance_id: u64) -> Result<FlowInstance, EngineError> {
        let slot = self.slot(instance_id)?;
        let instance = slot.lock().expect("instance lock");
        Ok(instance.clone())
    }

    pub fn pending_request(&self, instance_id: u64) -> Result<Option<IterationRequest>, EngineError> {
        Ok(self.instance(instance_id)?.pending_request)
    }

    pub fn summaries(&self, app_id: Option<&str>) -> Vec<InstanceSummary> {
        let slots: Vec<_> = self
            .instances
            .lock()
            .expect("instance table lock")
            .values()
            .cloned()
            .collect();
        slots
            .iter()
            .map(|slot| InstanceSummary::from(&*slot.lock().expect("instance lock")))
            .filter(|s| app_id.is_none_or(|a| s.app_id == a))
            .collect()
    }

    /// Installs a new app version. It must be exactly one above the current one.
    pub fn install_app(&self, app: AppDefinition) -> Result<u64, EngineError> {
        let mut models = self.models.write().expect("models lock");
        let current = models.app(&app.app_id).map_or(0, |a| a.version);
        if app.version != current + 1 {
            return Err(EngineError::VersionConflict {
                current,
                submitted: app.version,
            });
        }
        let version = app.version;
        let mut next = (**models).clone();
        next.insert_app(app);
        *models = Arc::new(next);
        Ok(version)
    }
}
