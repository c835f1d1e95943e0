//! Invocation of domain services.
//!
//! Internal services delegate to the app database. External services are
//! called with an HTTP POST whose body is a JSON object of the inputs; the
//! reply must be a JSON object carrying exactly the declared outputs.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde_json::Value as Json;
use thiserror::Error;

use crate::model::{DataOperation, DataType, Domain, Param, Service, ServiceOrigin};
use crate::store::{AppDatabase, StoreError};
use crate::value::Value;

pub type Values = BTreeMap<String, Value>;

/// Replacement for an external service, used in tests and offline runs.
pub type StubHandler = Arc<dyn Fn(&Values) -> Result<Values, ServiceError> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ServiceRef {
    pub domain: String,
    pub service: String,
}

impl ServiceRef {
    pub fn new(domain: impl Into<String>, service: impl Into<String>) -> Self {
        ServiceRef {
            domain: domain.into(),
            service: service.into(),
        }
    }
}

impl fmt::Display for ServiceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.domain, self.service)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ServiceError {
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("missing input `{0}`")]
    MissingInput(String),
    #[error("input `{0}` has the wrong type")]
    InputTypeMismatch(String),
    #[error("service timed out after {0:?}")]
    ServiceTimeout(Duration),
    #[error("service answered HTTP {status}")]
    ServiceHttpError { status: u16 },
    #[error("service transport error: {0}")]
    Transport(String),
    #[error("output mismatch: {0}")]
    OutputTypeMismatch(String),
    #[error("no `{0}` record to retrieve")]
    NoRecord(String),
    #[error("`{0}` is not an external service")]
    NotExternal(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

struct Entry {
    service: Service,
    data_type: Option<DataType>,
}

#[derive(Clone)]
pub struct ServiceInvoker {
    registry: Arc<BTreeMap<ServiceRef, Entry>>,
    http_timeout: Duration,
    stubs: BTreeMap<ServiceRef, StubHandler>,
    agent: ureq::Agent,
}

pub const DEFAULT_HTTP_TIMEOUT: Duration = Duration::from_secs(5);

fn agent(timeout: Duration) -> ureq::Agent {
    let config = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build();
    ureq::Agent::new_with_config(config)
}

impl ServiceInvoker {
    pub fn new<'a>(domains: impl IntoIterator<Item = &'a Domain>) -> Self {
        let mut registry = BTreeMap::new();
        for domain in domains {
            for service in &domain.services {
                let data_type = service.data_type.as_deref().and_then(|t| domain.data_type(t)).cloned();
                registry.insert(
                    ServiceRef::new(&domain.name, &service.name),
                    Entry {
                        service: service.clone(),
                        data_type,
                    },
                );
            }
        }
        ServiceInvoker {
            registry: Arc::new(registry),
            http_timeout: DEFAULT_HTTP_TIMEOUT,
            stubs: BTreeMap::new(),
            agent: agent(DEFAULT_HTTP_TIMEOUT),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.http_timeout = timeout;
        self.agent = agent(timeout);
        self
    }

    pub fn http_timeout(&self) -> Duration {
        self.http_timeout
    }

    pub fn service(&self, service: &ServiceRef) -> Option<&Service> {
        self.registry.get(service).map(|e| &e.service)
    }

    /// Routes calls of an external service to `handler`. The last stub
    /// installed for a service wins.
    pub fn with_stub<F>(mut self, service: &ServiceRef, handler: F) -> Result<Self, ServiceError>
    where
        F: Fn(&Values) -> Result<Values, ServiceError> + Send + Sync + 'static,
    {
        let entry = self
            .registry
            .get(service)
            .ok_or_else(|| ServiceError::UnknownService(service.to_string()))?;
        if entry.service.origin != ServiceOrigin::External {
            return Err(ServiceError::NotExternal(service.to_string()));
        }
        self.stubs.insert(service.clone(), Arc::new(handler));
        Ok(self)
    }

    pub fn invoke(
        &self,
        service: &ServiceRef,
        inputs: &Values,
        app_id: &str,
        store: &dyn AppDatabase,
    ) -> Result<Values, ServiceError> {
        let entry = self
            .registry
            .get(service)
            .ok_or_else(|| ServiceError::UnknownService(service.to_string()))?;
        let inputs = check_inputs(&entry.service.input, inputs)?;
        let outputs = match entry.service.origin {
            ServiceOrigin::Internal => {
                let ty = entry
                    .data_type
                    .as_ref()
                    .ok_or_else(|| ServiceError::UnknownService(service.to_string()))?;
                match entry.service.operation {
                    Some(DataOperation::Store) => {
                        let record = store.put_record(app_id, ty, inputs)?;
                        let id = i64::try_from(record.record_id)
                            .map_err(|_| ServiceError::OutputTypeMismatch("recordId out of range".into()))?;
                        BTreeMap::from([("recordId".to_string(), Value::Integer(id))])
                    }
                    _ => store
                        .newest(app_id, ty)?
                        .map(|r| r.values)
                        .ok_or_else(|| ServiceError::NoRecord(ty.name.clone()))?,
                }
            }
            ServiceOrigin::External => match self.stubs.get(service) {
                Some(stub) => stub(&inputs)?,
                None => self.call_http(entry, &inputs)?,
            },
        };
        check_outputs(&entry.service.output, outputs)
    }

    fn call_http(&self, entry: &Entry, inputs: &Values) -> Result<Values, ServiceError> {
        let endpoint = entry
            .service
            .endpoint
            .as_deref()
            .ok_or_else(|| ServiceError::Transport("no endpoint".into()))?;
        let body: serde_json::Map<String, Json> = inputs.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        let mut response = self
            .agent
            .post(endpoint)
            .send_json(Json::Object(body))
            .map_err(|e| self.transport_error(e))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(ServiceError::ServiceHttpError { status });
        }
        let reply: Json = response.body_mut().read_json().map_err(|e| self.transport_error(e))?;
        let Json::Object(map) = reply else {
            return Err(ServiceError::OutputTypeMismatch("reply is not a JSON object".into()));
        };
        let declared = &entry.service.output;
        map.into_iter()
            .map(|(name, json)| {
                let value = match declared.iter().find(|p| p.name == name) {
                    Some(p) => Value::from_json_typed(&json, p.ty, p.set),
                    None => Value::from_json(&json),
                }
                .map_err(|e| ServiceError::OutputTypeMismatch(format!("`{name}`: {e}")))?;
                Ok((name, value))
            })
            .collect()
    }

    fn transport_error(&self, e: ureq::Error) -> ServiceError {
        match e {
            ureq::Error::Timeout(_) => ServiceError::ServiceTimeout(self.http_timeout),
            ureq::Error::StatusCode(status) => ServiceError::ServiceHttpError { status },
            other => ServiceError::Transport(other.to_string()),
        }
    }
}

fn check_inputs(declared: &[Param], inputs: &Values) -> Result<Values, ServiceError> {
    declared
        .iter()
        .map(|p| {
            let v = inputs
                .get(&p.name)
                .ok_or_else(|| ServiceError::MissingInput(p.name.clone()))?;
            let converted = convert(v, p).ok_or_else(|| ServiceError::InputTypeMismatch(p.name.clone()))?;
            Ok((p.name.clone(), converted))
        })
        .collect()
}

fn check_outputs(declared: &[Param], mut outputs: Values) -> Result<Values, ServiceError> {
    let mut checked = BTreeMap::new();
    for p in declared {
        let v = outputs
            .remove(&p.name)
            .ok_or_else(|| ServiceError::OutputTypeMismatch(format!("missing output `{}`", p.name)))?;
        let converted =
            convert(&v, p).ok_or_else(|| ServiceError::OutputTypeMismatch(format!("`{}` expects {}", p.name, p.ty)))?;
        checked.insert(p.name.clone(), converted);
    }
    if let Some(extra) = outputs.into_keys().next() {
        return Err(ServiceError::OutputTypeMismatch(format!("undeclared output `{extra}`")));
    }
    Ok(checked)
}

fn convert(v: &Value, p: &Param) -> Option<Value> {
    match (v, p.set) {
        (Value::List(items), true) => items
            .iter()
            .map(|i| i.coerce(p.ty))
            .collect::<Option<Vec<_>>>()
            .map(Value::List),
        (Value::List(_), false) | (_, true) => None,
        (scalar, false) => scalar.coerce(p.ty),
    }
}
