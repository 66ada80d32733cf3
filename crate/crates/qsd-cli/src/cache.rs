//! On-disk store of computed theories, one JSON file per (space, bundle, twist, order).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qsd::cohring::GeometryTriple;
use qsd::hypergeo::{TheoryDatum, TheoryParts, TwistSpec};

use crate::codec::{decode_parts, encode_parts, PartsRepr};
use crate::error::CliError;

const FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub space: String,
    pub bundle: Vec<i64>,
    pub twist: TwistSpec,
    pub order: usize,
}

impl CacheKey {
    pub fn new(g: &GeometryTriple, twist: TwistSpec, order: usize) -> Self {
        CacheKey { space: format!("P{}", g.n()), bundle: g.bundle.line_degrees.clone(), twist, order }
    }

    fn canonical(&self) -> String {
        let bundle: Vec<String> = self.bundle.iter().map(|a| a.to_string()).collect();
        format!("space={};bundle={};twist={};order={}", self.space, bundle.join(","), self.twist.name(), self.order)
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize, Deserialize)]
struct Entry {
    format: u32,
    key: String,
    space: String,
    bundle: Vec<i64>,
    twist: String,
    order: usize,
    checksum: String,
    payload: PartsRepr,
}

fn payload_checksum(p: &PartsRepr) -> Result<String, CliError> {
    Ok(sha256_hex(serde_json::to_string(p)?.as_bytes()))
}

/// Completed entries are never modified in place, so reads take no lock;
/// writes go through one mutex and land by rename.
pub struct Cache {
    dir: PathBuf,
    writer: Mutex<()>,
    counter: AtomicU64,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into(), writer: Mutex::new(()), counter: AtomicU64::new(0) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.digest()))
    }

    /// Ok(None) on a miss; CacheCorrupt when the file exists but does not
    /// decode or its checksum disagrees.
    pub fn get(&self, key: &CacheKey) -> Result<Option<TheoryParts>, CliError> {
        let path = self.path(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let corrupt = |why: String| CliError::CacheCorrupt(path.display().to_string(), why);
        let entry: Entry = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if entry.format != FORMAT || entry.key != key.digest() {
            return Err(corrupt("entry belongs to another key or format".into()));
        }
        if payload_checksum(&entry.payload)? != entry.checksum {
            return Err(corrupt("payload checksum mismatch".into()));
        }
        decode_parts(&entry.payload).map(Some).map_err(|e| corrupt(e.to_string()))
    }

    pub fn put(&self, key: &CacheKey, parts: &TheoryParts) -> Result<(), CliError> {
        let payload = encode_parts(parts);
        let entry = Entry {
            format: FORMAT,
            key: key.digest(),
            space: key.space.clone(),
            bundle: key.bundle.clone(),
            twist: key.twist.name().to_string(),
            order: key.order,
            checksum: payload_checksum(&payload)?,
            payload,
        };
        let text = serde_json::to_string(&entry)?;
        let _guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        fs::create_dir_all(&self.dir)?;
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let tmp = self.dir.join(format!(".{}.{}.{n}.tmp", key.digest(), std::process::id()));
        fs::write(&tmp, text)?;
        fs::rename(&tmp, self.path(key))?;
        Ok(())
    }
}

/// Where a theory came from, for the stderr log.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Hit,
    Miss,
    Recomputed,
    Uncached,
}

/// Build a theory, going through the cache when one is given. A corrupt
/// entry is reported on stderr and replaced.
pub fn load_theory(
    cache: Option<&Cache>,
    g: &GeometryTriple,
    twist: TwistSpec,
    order: usize,
) -> qsd::Result<(TheoryDatum, Source)> {
    let Some(cache) = cache else {
        return Ok((TheoryDatum::build(g, twist, order)?, Source::Uncached));
    };
    let key = CacheKey::new(g, twist, order);
    let source = match cache.get(&key) {
        Ok(Some(parts)) => return Ok((TheoryDatum::from_parts(g, twist, order, parts), Source::Hit)),
        Ok(None) => Source::Miss,
        Err(e) => {
            eprintln!("warning: {e}; recomputing");
            Source::Recomputed
        }
    };
    let t = TheoryDatum::build(g, twist, order)?;
    if let Err(e) = cache.put(&key, &t.parts()) {
        eprintln!("warning: could not write cache entry: {e}");
    }
    Ok((t, source))
}
