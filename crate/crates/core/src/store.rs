//! File-backed store for saved transformations and uploaded meshes.
//!
//! Layout: `<root>/transformations/<id>.json` and `<root>/models/<id>.json`,
//! one JSON document per record. The in-memory index is rebuilt from a
//! directory scan when the store is opened. Writes go to a temp file that
//! is renamed into place.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::evolution::random_token;
use crate::expr;

pub const MAX_NAME_LEN: usize = 128;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{kind} `{id}` not found")]
    NotFound { kind: &'static str, id: String },
    #[error("storage failure: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt record {path}: {source}")]
    Corrupt { path: PathBuf, source: serde_json::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformationRecord {
    pub id: String,
    pub name: String,
    /// Canonical s-expression.
    pub expr: String,
    pub created_at: DateTime<Utc>,
    pub model_id: Option<String>,
}

/// Triangle mesh payload as uploaded; `id` is assigned by the store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<f64>,
    pub indices: Vec<u32>,
    #[serde(default)]
    pub normals: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshModel {
    pub id: String,
    pub name: String,
    pub vertices: Vec<f64>,
    pub indices: Vec<u32>,
    pub normals: Option<Vec<f64>>,
}

impl Mesh {
    /// Checks the mesh rules, naming the first one broken.
    pub fn validate(&self) -> Result<(), StoreError> {
        let fail = |rule: &str| Err(StoreError::Validation(rule.to_string()));
        if self.vertices.len() % 3 != 0 {
            return fail("vertices length must be divisible by 3");
        }
        if self.indices.len() % 3 != 0 {
            return fail("indices length must be divisible by 3");
        }
        if self.indices.is_empty() {
            return fail("mesh must contain at least one triangle");
        }
        if self.vertices.iter().any(|v| !v.is_finite()) {
            return fail("vertex coordinates must be finite");
        }
        let vertex_count = self.vertices.len() / 3;
        if let Some(bad) = self.indices.iter().find(|&&i| i as usize >= vertex_count) {
            return Err(StoreError::Validation(format!(
                "index {bad} out of range for {vertex_count} vertices"
            )));
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.vertices.len() {
                return fail("normals length must equal vertices length");
            }
            if normals.iter().any(|v| !v.is_finite()) {
                return fail("normals must be finite");
            }
        }
        Ok(())
    }
}

fn validate_name(name: &str) -> Result<(), StoreError> {
    if name.trim().is_empty() {
        return Err(StoreError::Validation("name must not be empty".into()));
    }
    if name.chars().count() > MAX_NAME_LEN {
        return Err(StoreError::Validation(format!("name longer than {MAX_NAME_LEN} characters")));
    }
    Ok(())
}

const TRANSFORMATIONS: &str = "transformations";
const MODELS: &str = "models";

pub struct Store {
    root: PathBuf,
    transformations: RwLock<HashMap<String, TransformationRecord>>,
    models: RwLock<HashMap<String, MeshModel>>,
}

impl Store {
    /// Opens (creating if needed) a store rooted at `root` and indexes it.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let root = root.into();
        let transformations = scan(&root.join(TRANSFORMATIONS), |r: &TransformationRecord| r.id.clone())?;
        let models = scan(&root.join(MODELS), |m: &MeshModel| m.id.clone())?;
        Ok(Store {
            root,
            transformations: RwLock::new(transformations),
            models: RwLock::new(models),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn save_transformation(
        &self,
        name: &str,
        expr_sexpr: &str,
        model_id: Option<String>,
    ) -> Result<TransformationRecord, StoreError> {
        validate_name(name)?;
        let parsed = expr::deserialize(expr_sexpr)
            .map_err(|e| StoreError::Validation(format!("expression does not parse: {e}")))?;
        let mut index = self.transformations.write().expect("index lock poisoned");
        let record = TransformationRecord {
            id: fresh_id(&index),
            name: name.to_string(),
            expr: expr::serialize(&parsed),
            created_at: Utc::now(),
            model_id,
        };
        write_atomic(&self.root.join(TRANSFORMATIONS), &record.id, &record)?;
        index.insert(record.id.clone(), record.clone());
        Ok(record)
    }

    /// Newest first; equal timestamps fall back to id order.
    pub fn list_transformations(&self) -> Vec<TransformationRecord> {
        let index = self.transformations.read().expect("index lock poisoned");
        let mut out: Vec<_> = index.values().cloned().collect();
        out.sort_by(|a, b| b.created_at.cmp(&a.created_at).then_with(|| a.id.cmp(&b.id)));
        out
    }

    pub fn get_transformation(&self, id: &str) -> Result<TransformationRecord, StoreError> {
        let index = self.transformations.read().expect("index lock poisoned");
        index
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound { kind: "transformation", id: id.to_string() })
    }

    pub fn save_model(&self, name: &str, mesh: Mesh) -> Result<MeshModel, StoreError> {
        validate_name(name)?;
        mesh.validate()?;
        let mut index = self.models.write().expect("index lock poisoned");
        let model = MeshModel {
            id: fresh_id(&index),
            name: name.to_string(),
            vertices: mesh.vertices,
            indices: mesh.indices,
            normals: mesh.normals,
        };
        write_atomic(&self.root.join(MODELS), &model.id, &model)?;
        index.insert(model.id.clone(), model.clone());
        Ok(model)
    }

    /// Sorted by name, then id.
    pub fn list_models(&self) -> Vec<MeshModel> {
        let index = self.models.read().expect("index lock poisoned");
        let mut out: Vec<_> = index.values().cloned().collect();
        out.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.id.cmp(&b.id)));
        out
    }

    pub fn get_model(&self, id: &str) -> Result<MeshModel, StoreError> {
        let index = self.models.read().expect("index lock poisoned");
        index
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound { kind: "model", id: id.to_string() })
    }
}

fn fresh_id<V>(index: &HashMap<String, V>) -> String {
    loop {
        let id = random_token();
        if !index.contains_key(&id) {
            return id;
        }
    }
}

fn scan<T, F>(dir: &Path, key: F) -> Result<HashMap<String, T>, StoreError>
where
    T: for<'de> Deserialize<'de>,
    F: Fn(&T) -> String,
{
    fs::create_dir_all(dir)?;
    let mut out = HashMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let bytes = fs::read(&path)?;
        let record: T =
            serde_json::from_slice(&bytes).map_err(|source| StoreError::Corrupt { path: path.clone(), source })?;
        out.insert(key(&record), record);
    }
    Ok(out)
}

fn write_atomic<T: Serialize>(dir: &Path, id: &str, value: &T) -> Result<(), StoreError> {
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{id}.json.tmp"));
    let dest = dir.join(format!("{id}.json"));
    let bytes = serde_json::to_vec_pretty(value).expect("records always serialize");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &dest)?;
    Ok(())
}
