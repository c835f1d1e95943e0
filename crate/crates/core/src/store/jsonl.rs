use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::clock::Clock;
use crate::model::DataType;
use crate::value::Value;

use super::{check_filter, select, validate_record, AppDatabase, Record, StoreError};

struct Stream {
    path: PathBuf,
    records: Vec<Record>,
}

/// Append-only JSON-lines app database: `<root>/<appId>/<typeName>.jsonl`,
/// one record per line, fsynced before `put_record` returns. The full
/// contents are indexed in memory when the database is opened.
pub struct JsonlDatabase {
    root: PathBuf,
    clock: Arc<dyn Clock>,
    streams: Mutex<HashMap<(String, String), Arc<Mutex<Stream>>>>,
}

impl JsonlDatabase {
    pub fn open(root: &Path, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        fs::create_dir_all(root)?;
        let mut streams = HashMap::new();
        for app_dir in fs::read_dir(root)? {
            let app_dir = app_dir?.path();
            let Some(app_id) = app_dir.file_name().and_then(|n| n.to_str()).map(str::to_owned) else {
                continue;
            };
            if !app_dir.is_dir() {
                continue;
            }
            for file in fs::read_dir(&app_dir)? {
                let path = file?.path();
                let Some(type_name) = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .and_then(|n| n.strip_suffix(".jsonl"))
                    .map(str::to_owned)
                else {
                    continue;
                };
                let records = read_stream(&path)?;
                streams.insert(
                    (app_id.clone(), type_name),
                    Arc::new(Mutex::new(Stream { path, records })),
                );
            }
        }
        Ok(JsonlDatabase {
            root: root.to_path_buf(),
            clock,
            streams: Mutex::new(streams),
        })
    }

    fn stream(&self, app_id: &str, type_name: &str) -> Arc<Mutex<Stream>> {
        let mut streams = self.streams.lock().expect("stream table lock");
        streams
            .entry((app_id.to_string(), type_name.to_string()))
            .or_insert_with(|| {
                Arc::new(Mutex::new(Stream {
                    path: self.root.join(app_id).join(format!("{type_name}.jsonl")),
                    records: Vec::new(),
                }))
            })
            .clone()
    }
}

/// Reads every complete line. A torn final line (crash mid-append) is cut off
/// so later appends start on a clean line.
fn read_stream(path: &Path) -> Result<Vec<Record>, StoreError> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut good_len = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        if !line.ends_with('\n') {
            break;
        }
        match serde_json::from_str::<Record>(line.trim_end()) {
            Ok(record) => records.push(record),
            Err(e) => {
                return Err(StoreError::StorageFailure(format!(
                    "{}: corrupt record: {e}",
                    path.display()
                )))
            }
        }
        good_len += n as u64;
    }
    let actual = fs::metadata(path)?.len();
    if actual != good_len {
        tracing::warn!(path = %path.display(), "dropping torn trailing record");
        OpenOptions::new().write(true).open(path)?.set_len(good_len)?;
    }
    Ok(records)
}

impl AppDatabase for JsonlDatabase {
    fn put_record(&self, app_id: &str, ty: &DataType, values: BTreeMap<String, Value>) -> Result<Record, StoreError> {
        let values = validate_record(ty, values)?;
        let stream = self.stream(app_id, &ty.name);
        let mut stream = stream.lock().expect("stream lock");
        let record = Record {
            record_id: stream.records.len() as u64 + 1,
            app_id: app_id.to_string(),
            type_name: ty.name.clone(),
            values,
            created_at: self.clock.now(),
        };
        let mut line = serde_json::to_string(&record).map_err(|e| StoreError::StorageFailure(e.to_string()))?;
        line.push('\n');
        if let Some(parent) = stream.path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&stream.path)?;
        file.write_all(line.as_bytes())?;
        file.sync_all()?;
        stream.records.push(record.clone());
        Ok(record)
    }

    fn query_records(
        &self,
        app_id: &str,
        ty: &DataType,
        filter: Option<(&str, &Value)>,
    ) -> Result<Vec<Record>, StoreError> {
        check_filter(ty, filter)?;
        let stream = self.stream(app_id, &ty.name);
        let stream = stream.lock().expect("stream lock");
        Ok(select(&stream.records, filter))
    }
}
