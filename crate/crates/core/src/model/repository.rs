use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{parse_app, parse_domain, parse_flow, AppDefinition, Domain, Flow, ModelError};

/// A loaded, cross-validated set of models. Immutable once built; reloading
/// produces a new value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Repository {
    pub domains: BTreeMap<String, Domain>,
    pub flows: BTreeMap<String, Flow>,
    pub apps: BTreeMap<String, AppDefinition>,
    /// File each app was read from, so updates can rewrite it in place.
    pub app_files: BTreeMap<String, PathBuf>,
}

impl Repository {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.domains.len(), self.flows.len(), self.apps.len())
    }
}

fn list(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>, ModelError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let io = |e: std::io::Error| ModelError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file()
            && path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(suffix))
        {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn read(path: &Path) -> Result<String, ModelError> {
    fs::read_to_string(path).map_err(|e| ModelError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn insert_unique<T>(
    map: &mut BTreeMap<String, T>,
    name: String,
    value: T,
    category: &str,
    path: &Path,
) -> Result<(), ModelError> {
    if map.contains_key(&name) {
        return Err(ModelError::DuplicateName {
            category: category.into(),
            name,
        }
        .in_file(path));
    }
    map.insert(name, value);
    Ok(())
}

/// Loads `<root>/domains/*.domain.json`, `<root>/flows/*.flow.json` and
/// `<root>/apps/*.app.json`, validating domains, then flows, then apps.
/// Stops at the first file with errors.
pub fn load_repository(root: &Path) -> Result<Repository, ModelError> {
    if !root.is_dir() {
        return Err(ModelError::Io {
            path: root.to_path_buf(),
            message: "repository root is not a directory".into(),
        });
    }
    let mut repo = Repository::default();
    for path in list(&root.join("domains"), ".domain.json")? {
        let domain = parse_domain(&read(&path)?).map_err(|e| e.in_file(&path))?;
        insert_unique(&mut repo.domains, domain.name.clone(), domain, "domain", &path)?;
    }
    for path in list(&root.join("flows"), ".flow.json")? {
        let flow = parse_flow(&read(&path)?, &repo.domains).map_err(|e| e.in_file(&path))?;
        insert_unique(&mut repo.flows, flow.name.clone(), flow, "flow", &path)?;
    }
    for path in list(&root.join("apps"), ".app.json")? {
        let app = parse_app(&read(&path)?, &repo.flows).map_err(|e| e.in_file(&path))?;
        let app_id = app.app_id.clone();
        insert_unique(&mut repo.apps, app_id.clone(), app, "app", &path)?;
        repo.app_files.insert(app_id, path.clone());
    }
    Ok(repo)
}
