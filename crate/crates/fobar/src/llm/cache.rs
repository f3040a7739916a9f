//! Append-only response cache on disk.
//!
//! One newline-delimited record file per model plus an index file mapping
//! digest to byte offset. Records are immutable once written; the index is
//! a derived artifact and is rebuilt by scanning whenever it is missing or
//! stale, so a crash between the two appends cannot corrupt anything.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One cached completion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    /// Digest of (model_id, prompt, temperature, sample_index).
    pub key: String,
    pub raw_text: String,
    /// Unix seconds at write time.
    pub created_at: u64,
    pub backend_id: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelStats {
    pub model: String,
    pub records: usize,
    pub bytes: u64,
}

struct ModelIndex {
    offsets: HashMap<String, u64>,
    /// Byte length of the records file the index was built against.
    len: u64,
}

/// Disk-backed store. Concurrent readers are fine; writers are serialized
/// behind one lock. Opening a directory read-only turns it into a replay
/// fixture source: lookups work, writes are rejected.
pub struct CacheStore {
    dir: PathBuf,
    read_only: bool,
    models: Mutex<HashMap<String, ModelIndex>>,
}

const RECORD_EXT: &str = "ndjson";
const INDEX_EXT: &str = "idx";

fn sanitize_model_id(model_id: &str) -> String {
    model_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

impl CacheStore {
    /// Open (creating if needed) a writable cache directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(CacheStore {
            dir,
            read_only: false,
            models: Mutex::new(HashMap::new()),
        })
    }

    /// Open an existing directory of records as a read-only fixture source.
    pub fn open_read_only(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no such cache directory: {}", dir.display()),
            )
            .into());
        }
        Ok(CacheStore {
            dir,
            read_only: true,
            models: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn records_path(&self, model_id: &str) -> PathBuf {
        self.dir
            .join(format!("{}.{RECORD_EXT}", sanitize_model_id(model_id)))
    }

    fn index_path(&self, model_id: &str) -> PathBuf {
        self.dir
            .join(format!("{}.{INDEX_EXT}", sanitize_model_id(model_id)))
    }

    /// Look up a cached completion by its digest.
    pub fn get(&self, model_id: &str, digest: &str) -> Result<Option<CacheEntry>> {
        let offset = {
            let mut models = self.models.lock().unwrap();
            let index = self.load_index(&mut models, model_id)?;
            match index.offsets.get(digest) {
                Some(off) => *off,
                None => return Ok(None),
            }
        };
        // offsets are stable in an append-only file, so read outside the lock
        let mut file = File::open(self.records_path(model_id))?;
        file.seek(SeekFrom::Start(offset))?;
        let mut line = String::new();
        BufReader::new(file).read_line(&mut line)?;
        let entry: CacheEntry = serde_json::from_str(line.trim_end())?;
        Ok(Some(entry))
    }

    pub fn contains(&self, model_id: &str, digest: &str) -> Result<bool> {
        let mut models = self.models.lock().unwrap();
        let index = self.load_index(&mut models, model_id)?;
        Ok(index.offsets.contains_key(digest))
    }

    /// Append a record. Existing digests are kept as-is: records are
    /// immutable once written.
    pub fn put(&self, model_id: &str, entry: &CacheEntry) -> Result<()> {
        if self.read_only {
            return Err(std::io::Error::new(
                std::io::ErrorKind::PermissionDenied,
                "cache opened read-only (replay fixtures)",
            )
            .into());
        }
        let mut models = self.models.lock().unwrap();
        let index = self.load_index(&mut models, model_id)?;
        if index.offsets.contains_key(&entry.key) {
            return Ok(());
        }
        let line = serde_json::to_string(entry)?;
        let mut records = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.records_path(model_id))?;
        let offset = records.seek(SeekFrom::End(0))?;
        records.write_all(line.as_bytes())?;
        records.write_all(b"\n")?;
        records.flush()?;
        let mut idx = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.index_path(model_id))?;
        writeln!(idx, "{}\t{}", entry.key, offset)?;
        idx.flush()?;
        let index = models
            .get_mut(&sanitize_model_id(model_id))
            .expect("just loaded");
        index.offsets.insert(entry.key.clone(), offset);
        index.len = offset + line.len() as u64 + 1;
        Ok(())
    }

    /// Record counts and on-disk sizes per model.
    pub fn stats(&self) -> Result<Vec<ModelStats>> {
        let mut out = Vec::new();
        if !self.dir.is_dir() {
            return Ok(out);
        }
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|x| x == RECORD_EXT).unwrap_or(false))
            .collect();
        paths.sort();
        for path in paths {
            let model = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let bytes = std::fs::metadata(&path)?.len();
            let records = BufReader::new(File::open(&path)?)
                .lines()
                .filter(|l| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(false))
                .count();
            out.push(ModelStats {
                model,
                records,
                bytes,
            });
        }
        Ok(out)
    }

    fn load_index<'a>(
        &self,
        models: &'a mut HashMap<String, ModelIndex>,
        model_id: &str,
    ) -> Result<&'a mut ModelIndex> {
        let key = sanitize_model_id(model_id);
        if !models.contains_key(&key) {
            let index = self.build_index(model_id)?;
            models.insert(key.clone(), index);
        }
        Ok(models.get_mut(&key).expect("inserted above"))
    }

    fn build_index(&self, model_id: &str) -> Result<ModelIndex> {
        let records_path = self.records_path(model_id);
        let file_len = match std::fs::metadata(&records_path) {
            Ok(m) => m.len(),
            Err(_) => {
                return Ok(ModelIndex {
                    offsets: HashMap::new(),
                    len: 0,
                })
            }
        };
        // fast path: a fresh index file that covers the whole records file
        if let Ok(idx_text) = std::fs::read_to_string(self.index_path(model_id)) {
            if let Some(index) = parse_index(&idx_text, file_len) {
                if index_covers_file(&records_path, &index, file_len)? {
                    return Ok(index);
                }
            }
        }
        // scan the records and, when writable, rewrite the index sidecar
        let mut offsets = HashMap::new();
        let mut offset = 0u64;
        let reader = BufReader::new(File::open(&records_path)?);
        for line in reader.lines() {
            let line = line?;
            let consumed = line.len() as u64 + 1;
            if !line.trim().is_empty() {
                if let Ok(entry) = serde_json::from_str::<CacheEntry>(&line) {
                    offsets.entry(entry.key).or_insert(offset);
                }
            }
            offset += consumed;
        }
        if !self.read_only {
            let mut text = String::new();
            let mut sorted: Vec<(&String, &u64)> = offsets.iter().collect();
            sorted.sort_by_key(|(_, off)| **off);
            for (digest, off) in sorted {
                text.push_str(digest);
                text.push('\t');
                text.push_str(&off.to_string());
                text.push('\n');
            }
            std::fs::write(self.index_path(model_id), text)?;
        }
        Ok(ModelIndex {
            offsets,
            len: file_len,
        })
    }
}

fn parse_index(text: &str, file_len: u64) -> Option<ModelIndex> {
    let mut offsets = HashMap::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (digest, off) = line.split_once('\t')?;
        let off: u64 = off.trim().parse().ok()?;
        if off >= file_len {
            return None;
        }
        offsets.insert(digest.to_string(), off);
    }
    if offsets.is_empty() && file_len > 0 {
        return None;
    }
    Some(ModelIndex {
        offsets,
        len: file_len,
    })
}

/// An index is complete iff its last record is the file's last record; a
/// crash between the record append and the index append leaves the index
/// one short, which this catches.
fn index_covers_file(records_path: &Path, index: &ModelIndex, file_len: u64) -> Result<bool> {
    let Some(max_offset) = index.offsets.values().copied().max() else {
        return Ok(file_len == 0);
    };
    let mut file = File::open(records_path)?;
    file.seek(SeekFrom::Start(max_offset))?;
    let mut line = String::new();
    BufReader::new(file).read_line(&mut line)?;
    Ok(max_offset + line.len() as u64 == file_len)
}
