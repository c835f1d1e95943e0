use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{InstanceStore, StoreError};

/// Replaces `path` with `contents` so readers see either the old or the new
/// file, never a mix, even across a crash.
pub fn write_atomically(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = dir.join(tmp_name);
    {
        let mut file = File::create(&tmp)?;
        file.write_all(contents)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    // persist the rename itself
    File::open(dir)?.sync_all()
}

/// One `<instanceId>.json` file per instance, replaced atomically on save.
pub struct FileInstanceStore {
    dir: PathBuf,
}

impl FileInstanceStore {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(dir)?;
        Ok(FileInstanceStore { dir: dir.to_path_buf() })
    }
}

impl InstanceStore for FileInstanceStore {
    fn save_instance(&self, instance_id: u64, snapshot: &str) -> Result<(), StoreError> {
        write_atomically(&self.dir.join(format!("{instance_id}.json")), snapshot.as_bytes())?;
        Ok(())
    }

    fn load_instances(&self) -> Result<Vec<String>, StoreError> {
        let mut found = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            let id = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".json"))
                .and_then(|n| n.parse::<u64>().ok());
            if let Some(id) = id {
                found.push((id, fs::read_to_string(&path)?));
            }
        }
        found.sort_by_key(|(id, _)| *id);
        Ok(found.into_iter().map(|(_, text)| text).collect())
    }
}

#[derive(Default)]
pub struct MemoryInstanceStore {
    snapshots: Mutex<BTreeMap<u64, String>>,
}

impl InstanceStore for MemoryInstanceStore {
    fn save_instance(&self, instance_id: u64, snapshot: &str) -> Result<(), StoreError> {
        self.snapshots
            .lock()
            .expect("instance store lock")
            .insert(instance_id, snapshot.to_string());
        Ok(())
    }

    fn load_instances(&self) -> Result<Vec<String>, StoreError> {
        Ok(self
            .snapshots
            .lock()
            .expect("instance store lock")
            .values()
            .cloned()
            .collect())
    }
}
