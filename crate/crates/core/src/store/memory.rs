use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use crate::clock::Clock;
use crate::model::DataType;
use crate::value::Value;

use super::{check_filter, select, validate_record, AppDatabase, Record, StoreError};

/// Process-local app database.
pub struct MemoryDatabase {
    clock: Arc<dyn Clock>,
    streams: Mutex<HashMap<(String, String), Vec<Record>>>,
}

impl MemoryDatabase {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        MemoryDatabase {
            clock,
            streams: Mutex::new(HashMap::new()),
        }
    }
}

impl AppDatabase for MemoryDatabase {
    fn put_record(&self, app_id: &str, ty: &DataType, values: BTreeMap<String, Value>) -> Result<Record, StoreError> {
        let values = validate_record(ty, values)?;
        let mut streams = self.streams.lock().expect("memory store lock");
        let stream = streams.entry((app_id.to_string(), ty.name.clone())).or_default();
        let record = Record {
            record_id: stream.len() as u64 + 1,
            app_id: app_id.to_string(),
            type_name: ty.name.clone(),
            values,
            created_at: self.clock.now(),
        };
        stream.push(record.clone());
        Ok(record)
    }

    fn query_records(
        &self,
        app_id: &str,
        ty: &DataType,
        filter: Option<(&str, &Value)>,
    ) -> Result<Vec<Record>, StoreError> {
        check_filter(ty, filter)?;
        let streams = self.streams.lock().expect("memory store lock");
        Ok(streams
            .get(&(app_id.to_string(), ty.name.clone()))
            .map(|records| select(records, filter))
            .unwrap_or_default())
    }
}
