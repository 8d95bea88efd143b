use serde_json::Value;
use thiserror::Error;

use super::{ComicDocument, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("not a JSON document: {0}")]
    Syntax(serde_json::Error),
    #[error("document does not match schema version {SCHEMA_VERSION}: {0}")]
    SchemaVersionMismatch(String),
}

/// Pretty JSON with object keys sorted, so equal documents give equal bytes.
pub fn export_json(doc: &ComicDocument) -> String {
    // Going through `Value` sorts every map by key.
    let v = serde_json::to_value(doc).expect("documents always serialize");
    let mut s = serde_json::to_string_pretty(&v).expect("values always serialize");
    s.push('\n');
    s
}

pub fn import_json(bytes: &[u8]) -> Result<ComicDocument, ImportError> {
    let v: Value = serde_json::from_slice(bytes).map_err(ImportError::Syntax)?;
    match v.get("schema").and_then(Value::as_u64) {
        Some(n) if n == u64::from(SCHEMA_VERSION) => {}
        Some(n) => return Err(ImportError::SchemaVersionMismatch(format!("schema {n}"))),
        None => return Err(ImportError::SchemaVersionMismatch("missing schema field".into())),
    }
    serde_json::from_value(v).map_err(|e| ImportError::SchemaVersionMismatch(e.to_string()))
}
