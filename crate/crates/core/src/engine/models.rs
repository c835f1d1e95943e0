use std::collections::BTreeMap;

use crate::model::{AppDefinition, DataType, Domain, Flow, Repository};

/// Everything the engine executes against. Apps keep every known version so
/// running instances stay on the definition they were launched with.
#[derive(Debug, Clone, Default)]
pub struct Models {
    pub domains: BTreeMap<String, Domain>,
    pub flows: BTreeMap<String, Flow>,
    apps: BTreeMap<String, BTreeMap<u64, AppDefinition>>,
}

impl Models {
    pub fn from_repository(repo: &Repository) -> Self {
        let mut models = Models {
            domains: repo.domains.clone(),
            flows: repo.flows.clone(),
            apps: BTreeMap::new(),
        };
        for app in repo.apps.values() {
            models.insert_app(app.clone());
        }
        models
    }

    pub fn insert_app(&mut self, app: AppDefinition) {
        self.apps
            .entry(app.app_id.clone())
            .or_default()
            .insert(app.version, app);
    }

    /// Latest version of an app.
    pub fn app(&self, app_id: &str) -> Option<&AppDefinition> {
        self.apps.get(app_id)?.values().next_back()
    }

    pub fn app_version(&self, app_id: &str, version: u64) -> Option<&AppDefinition> {
        self.apps.get(app_id)?.get(&version)
    }

    pub fn app_ids(&self) -> impl Iterator<Item = &String> {
        self.apps.keys()
    }

    pub fn data_type(&self, domain: &str, name: &str) -> Option<&DataType> {
        self.domains.get(domain)?.data_type(name)
    }
}
