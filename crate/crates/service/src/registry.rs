//! Append-only device registry backed by an NDJSON file.
//!
//! Every registration is one JSON line, written and fsynced before the
//! in-memory index is updated. Lines are never rewritten. A trailing line
//! without its newline is the residue of an interrupted append: loading
//! skips it with a warning, and [`Registry::open`] cuts it off so the next
//! append starts on a clean line.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, SubsecRound, Utc};
use provmark_core::DeviceFingerprint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("device {0:?} is already registered")]
    DuplicateDevice(String),
    #[error("fingerprint already registered to device {0:?}")]
    DuplicateFingerprint(String),
    #[error("device id must not be empty")]
    EmptyDeviceId,
    #[error("corrupt registry record on line {line}: {reason}")]
    CorruptRecord { line: usize, reason: String },
    #[error("registry was opened read-only")]
    ReadOnly,
    #[error("registry storage: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordSource {
    Application,
    Devfing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryRecord {
    pub device_id: String,
    pub fingerprint: DeviceFingerprint,
    pub enrolled_at: DateTime<Utc>,
    pub source: RecordSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub devfing_key: Option<String>,
}

impl RegistryRecord {
    pub fn new(device_id: impl Into<String>, fingerprint: DeviceFingerprint) -> Self {
        Self {
            device_id: device_id.into(),
            fingerprint,
            // Millisecond precision keeps the JSON form stable across reloads.
            enrolled_at: Utc::now().trunc_subsecs(3),
            source: RecordSource::Application,
            devfing_key: None,
        }
    }

    /// Attaches a hardware-derived key and marks the record as such.
    pub fn with_devfing_key(mut self, bits: impl Into<String>) -> Self {
        self.source = RecordSource::Devfing;
        self.devfing_key = Some(bits.into());
        self
    }
}

/// Result of reading a registry file.
#[derive(Debug, Default)]
pub struct Loaded {
    pub records: Vec<RegistryRecord>,
    /// Length in bytes of an unterminated final line, if one was skipped.
    pub torn_tail: Option<usize>,
    /// Byte length of the well-formed prefix.
    pub valid_len: u64,
}

/// Parses NDJSON registry content. Blank lines are ignored.
pub fn parse_records(content: &[u8]) -> Result<Loaded, RegistryError> {
    let mut loaded = Loaded::default();
    let mut offset = 0usize;
    for (i, line) in content.split_inclusive(|&b| b == b'\n').enumerate() {
        if !line.ends_with(b"\n") {
            loaded.torn_tail = Some(line.len());
            break;
        }
        offset += line.len();
        let text = std::str::from_utf8(line).map_err(|e| RegistryError::CorruptRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(text).map_err(|e| RegistryError::CorruptRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        loaded.records.push(record);
    }
    loaded.valid_len = offset as u64;
    Ok(loaded)
}

/// Reads a registry file; a missing file is an empty registry.
pub fn persist_load(path: impl AsRef<Path>) -> Result<Loaded, RegistryError> {
    let path = path.as_ref();
    let content = match std::fs::read(path) {
        Ok(c) => c,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let loaded = parse_records(&content)?;
    if let Some(n) = loaded.torn_tail {
        log::warn!("{}: ignoring {n}-byte partial record at end of file", path.display());
    }
    Ok(loaded)
}

/// Appends one record and fsyncs.
pub fn persist_append(file: &mut File, record: &RegistryRecord) -> Result<(), RegistryError> {
    let mut line = serde_json::to_vec(record).expect("record serialises");
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()?;
    Ok(())
}

#[derive(Default)]
struct Index {
    records: Vec<RegistryRecord>,
    by_id: HashMap<String, usize>,
    by_fingerprint: HashMap<String, usize>,
}

impl Index {
    fn check(&self, record: &RegistryRecord) -> Result<(), RegistryError> {
        if record.device_id.is_empty() {
            return Err(RegistryError::EmptyDeviceId);
        }
        if self.by_id.contains_key(&record.device_id) {
            return Err(RegistryError::DuplicateDevice(record.device_id.clone()));
        }
        if let Some(&i) = self.by_fingerprint.get(record.fingerprint.as_str()) {
            return Err(RegistryError::DuplicateFingerprint(self.records[i].device_id.clone()));
        }
        Ok(())
    }

    fn build(records: Vec<RegistryRecord>) -> Result<Self, RegistryError> {
        let mut index = Index::default();
        for (n, record) in records.into_iter().enumerate() {
            index.check(&record).map_err(|e| RegistryError::CorruptRecord {
                line: n + 1,
                reason: e.to_string(),
            })?;
            index.insert(record);
        }
        Ok(index)
    }

    fn insert(&mut self, record: RegistryRecord) {
        let i = self.records.len();
        self.by_id.insert(record.device_id.clone(), i);
        self.by_fingerprint.insert(record.fingerprint.as_str().to_owned(), i);
        self.records.push(record);
    }
}

/// Shared registry handle. Writers are serialised on the file lock; readers
/// only take the index lock and never observe a half-applied append.
pub struct Registry {
    path: PathBuf,
    /// `None` for read-only snapshots.
    file: Mutex<Option<File>>,
    index: RwLock<Index>,
}

impl Registry {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref().to_path_buf();
        let loaded = persist_load(&path)?;
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        if loaded.torn_tail.is_some() {
            file.set_len(loaded.valid_len)?;
            file.sync_data()?;
        }
        Ok(Self {
            index: RwLock::new(Index::build(loaded.records)?),
            path,
            file: Mutex::new(Some(file)),
        })
    }

    /// Loads the registry without creating, trimming or locking the file.
    /// Inserts on the result fail with [`RegistryError::ReadOnly`].
    pub fn open_read_only(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref().to_path_buf();
        let loaded = persist_load(&path)?;
        Ok(Self {
            index: RwLock::new(Index::build(loaded.records)?),
            path,
            file: Mutex::new(None),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn register_device(
        &self,
        device_id: &str,
        fingerprint: DeviceFingerprint,
    ) -> Result<RegistryRecord, RegistryError> {
        self.insert(RegistryRecord::new(device_id, fingerprint))
    }

    /// Validates, persists, then publishes `record`.
    pub fn insert(&self, record: RegistryRecord) -> Result<RegistryRecord, RegistryError> {
        let mut guard = self.file.lock().unwrap_or_else(|e| e.into_inner());
        let file = guard.as_mut().ok_or(RegistryError::ReadOnly)?;
        self.index.read().unwrap_or_else(|e| e.into_inner()).check(&record)?;
        persist_append(file, &record)?;
        self.index
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(record.clone());
        Ok(record)
    }

    pub fn lookup_fingerprint(&self, fingerprint: &str) -> Option<RegistryRecord> {
        let index = self.index.read().unwrap_or_else(|e| e.into_inner());
        index.by_fingerprint.get(fingerprint).map(|&i| index.records[i].clone())
    }

    pub fn lookup_device(&self, device_id: &str) -> Option<RegistryRecord> {
        let index = self.index.read().unwrap_or_else(|e| e.into_inner());
        index.by_id.get(device_id).map(|&i| index.records[i].clone())
    }

    pub fn records(&self) -> Vec<RegistryRecord> {
        self.index.read().unwrap_or_else(|e| e.into_inner()).records.clone()
    }

    pub fn len(&self) -> usize {
        self.index.read().unwrap_or_else(|e| e.into_inner()).records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
