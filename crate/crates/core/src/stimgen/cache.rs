//! Content-addressed stimulus cache: in-memory LRU in front of an optional WAV directory.

use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use lru::LruCache;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{wav, AudioBuffer, StimError};

const KEY_VERSION: &str = "voicecue-stim-v1";

/// SHA-256 (hex) of the canonical JSON encoding of a synthesis request.
pub fn content_hash<T: Serialize>(request: &T) -> String {
    let json = serde_json::to_vec(request).expect("synthesis requests serialize");
    let mut h = Sha256::new();
    h.update(KEY_VERSION.as_bytes());
    h.update([0]);
    h.update(&json);
    hex::encode(h.finalize())
}

pub struct StimulusCache {
    dir: Option<PathBuf>,
    memory: Mutex<LruCache<String, Arc<AudioBuffer>>>,
}

impl StimulusCache {
    pub fn in_memory(capacity: usize) -> Self {
        Self { dir: None, memory: Mutex::new(LruCache::new(NonZeroUsize::new(capacity.max(1)).unwrap())) }
    }

    pub fn with_dir(dir: impl Into<PathBuf>, capacity: usize) -> Result<Self, StimError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir: Some(dir), ..Self::in_memory(capacity) })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn wav_path(&self, hash: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{hash}.wav")))
    }

    /// Look up `hash`, synthesizing and storing on a miss. Returns the buffer
    /// and whether it was a hit.
    pub fn get_or_insert_with<F>(&self, hash: &str, synth: F) -> Result<(Arc<AudioBuffer>, bool), StimError>
    where
        F: FnOnce() -> Result<AudioBuffer, StimError>,
    {
        if let Some(buf) = self.memory.lock().expect("cache lock").get(hash) {
            return Ok((Arc::clone(buf), true));
        }
        let buf = Arc::new(synth()?);
        if let Some(path) = self.wav_path(hash) {
            if !path.exists() {
                wav::write_file(&buf, &path)?;
            }
        }
        self.memory.lock().expect("cache lock").put(hash.to_string(), Arc::clone(&buf));
        Ok((buf, false))
    }

    /// WAV bytes for a previously stored hash.
    pub fn wav_bytes(&self, hash: &str) -> Result<Option<Vec<u8>>, StimError> {
        if !hash.chars().all(|c| c.is_ascii_hexdigit()) || hash.len() != 64 {
            return Ok(None);
        }
        if let Some(path) = self.wav_path(hash) {
            if path.exists() {
                return Ok(Some(std::fs::read(path)?));
            }
        }
        let hit = self.memory.lock().expect("cache lock").get(hash).cloned();
        hit.map(|b| wav::to_bytes(&b)).transpose()
    }
}
