//! Persistence of uploaded ensembles and comic sessions.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use comicforge_core::ComicDocument;
use serde::{Deserialize, Serialize};

/// An editable comic and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub comic_id: String,
    pub ensemble_id: String,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub document: ComicDocument,
}

pub trait Store: Send + Sync {
    /// `doc` is the canonical ensemble JSON.
    fn put_ensemble(&self, id: &str, doc: &serde_json::Value) -> io::Result<()>;
    fn get_ensemble(&self, id: &str) -> io::Result<Option<serde_json::Value>>;
    /// Returns once the session is durable.
    fn put_session(&self, session: &Session) -> io::Result<()>;
    fn get_session(&self, id: &str) -> io::Result<Option<Session>>;
}

/// One JSON file per object under a data directory.
#[derive(Debug, Clone)]
pub struct FsStore {
    root: PathBuf,
}

impl FsStore {
    pub fn open(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root.join("ensembles"))?;
        fs::create_dir_all(root.join("comics"))?;
        Ok(FsStore { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, kind: &str, id: &str) -> io::Result<PathBuf> {
        let safe = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
        if !safe {
            return Err(io::Error::new(io::ErrorKind::NotFound, format!("bad id {id:?}")));
        }
        Ok(self.root.join(kind).join(format!("{id}.json")))
    }

    fn read(&self, kind: &str, id: &str) -> io::Result<Option<Vec<u8>>> {
        let path = match self.path(kind, id) {
            Ok(p) => p,
            Err(_) => return Ok(None),
        };
        match fs::read(path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Writes a sibling temp file, syncs it, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension(format!("tmp-{}", uuid::Uuid::new_v4().simple()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

fn invalid(e: serde_json::Error) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e)
}

impl Store for FsStore {
    fn put_ensemble(&self, id: &str, doc: &serde_json::Value) -> io::Result<()> {
        write_atomic(&self.path("ensembles", id)?, &serde_json::to_vec(doc).map_err(invalid)?)
    }

    fn get_ensemble(&self, id: &str) -> io::Result<Option<serde_json::Value>> {
        self.read("ensembles", id)?
            .map(|b| serde_json::from_slice(&b).map_err(invalid))
            .transpose()
    }

    fn put_session(&self, session: &Session) -> io::Result<()> {
        let v = serde_json::to_value(session).map_err(invalid)?;
        let mut bytes = serde_json::to_vec_pretty(&v).map_err(invalid)?;
        bytes.push(b'\n');
        write_atomic(&self.path("comics", &session.comic_id)?, &bytes)
    }

    fn get_session(&self, id: &str) -> io::Result<Option<Session>> {
        self.read("comics", id)?
            .map(|b| serde_json::from_slice(&b).map_err(invalid))
            .transpose()
    }
}
