//! Disk cache for model responses, content-addressed by request key.
//!
//! Layout: `<root>/<provider_id>/<key>/{meta.json, img_0.png, ...}` plus an
//! append-only `index.jsonl` per provider mapping keys to their files.
//! Writes land in a temp directory and are renamed into place, so readers
//! never observe partial entries and re-runs survive process restarts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{decode_image, png_bytes, ContentDigest};

use super::{ModelResponse, Usage};

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt cache entry {key}: {detail}")]
    Corrupt { key: String, detail: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct CachedMeta {
    text: String,
    usage: Usage,
    latency_ms: u64,
    image_files: Vec<String>,
}

#[derive(Debug, Serialize)]
struct IndexLine<'a> {
    key: &'a str,
    files: Vec<String>,
}

/// Content-addressed response store rooted at one directory.
pub struct ResponseCache {
    root: PathBuf,
    index_lock: Mutex<()>,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResponseCache {
            root: root.into(),
            index_lock: Mutex::new(()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_dir(&self, provider_id: &str, key: &ContentDigest) -> PathBuf {
        self.root.join(provider_id).join(key.as_str())
    }

    pub fn contains(&self, provider_id: &str, key: &ContentDigest) -> bool {
        self.entry_dir(provider_id, key).join("meta.json").is_file()
    }

    /// Look up a stored response. `from_cache` on the result is left false;
    /// the caller flips it.
    pub fn get(
        &self,
        provider_id: &str,
        key: &ContentDigest,
    ) -> Result<Option<ModelResponse>, CacheError> {
        let dir = self.entry_dir(provider_id, key);
        let meta_path = dir.join("meta.json");
        if !meta_path.is_file() {
            return Ok(None);
        }
        let io_err = |path: PathBuf| move |source| CacheError::Io { path, source };
        let meta_text =
            fs::read_to_string(&meta_path).map_err(io_err(meta_path.clone()))?;
        let meta: CachedMeta = serde_json::from_str(&meta_text).map_err(|e| CacheError::Corrupt {
            key: key.as_str().to_string(),
            detail: e.to_string(),
        })?;
        let mut images = Vec::with_capacity(meta.image_files.len());
        for file in &meta.image_files {
            let path = dir.join(file);
            let bytes = fs::read(&path).map_err(io_err(path.clone()))?;
            images.push(decode_image(&bytes).map_err(|e| CacheError::Corrupt {
                key: key.as_str().to_string(),
                detail: format!("{file}: {e}"),
            })?);
        }
        Ok(Some(ModelResponse {
            images,
            text: meta.text,
            usage: meta.usage,
            latency_ms: meta.latency_ms,
            from_cache: false,
        }))
    }

    /// Store a response under its key. Concurrent writers of the same key
    /// are harmless: whichever rename lands first wins and the entries are
    /// identical by construction.
    pub fn put(
        &self,
        provider_id: &str,
        key: &ContentDigest,
        response: &ModelResponse,
    ) -> Result<(), CacheError> {
        let provider_dir = self.root.join(provider_id);
        let io_err = |path: PathBuf| move |source| CacheError::Io { path, source };
        fs::create_dir_all(&provider_dir).map_err(io_err(provider_dir.clone()))?;

        let final_dir = self.entry_dir(provider_id, key);
        if final_dir.join("meta.json").is_file() {
            return Ok(());
        }

        let staging = tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(&provider_dir)
            .map_err(io_err(provider_dir.clone()))?;

        let mut image_files = Vec::new();
        for (i, image) in response.images.iter().enumerate() {
            let name = format!("img_{i}.png");
            let path = staging.path().join(&name);
            fs::write(&path, png_bytes(image)).map_err(io_err(path))?;
            image_files.push(name);
        }
        let meta = CachedMeta {
            text: response.text.clone(),
            usage: response.usage,
            latency_ms: response.latency_ms,
            image_files: image_files.clone(),
        };
        let meta_path = staging.path().join("meta.json");
        fs::write(&meta_path, serde_json::to_vec_pretty(&meta).expect("meta serializes"))
            .map_err(io_err(meta_path))?;

        match fs::rename(staging.keep(), &final_dir) {
            Ok(()) => {}
            Err(_) if final_dir.join("meta.json").is_file() => return Ok(()),
            Err(source) => return Err(CacheError::Io { path: final_dir, source }),
        }

        let _guard = self.index_lock.lock().expect("index lock");
        let index_path = provider_dir.join("index.jsonl");
        let mut index = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&index_path)
            .map_err(io_err(index_path.clone()))?;
        let mut files = vec!["meta.json".to_string()];
        files.extend(image_files);
        let line = IndexLine { key: key.as_str(), files };
        writeln!(index, "{}", serde_json::to_string(&line).expect("index serializes"))
            .map_err(io_err(index_path))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::content_digest;
    use image::RgbImage;

    fn response_with_image() -> ModelResponse {
        ModelResponse {
            images: vec![RgbImage::from_pixel(6, 4, image::Rgb([120, 30, 60]))],
            text: "done".into(),
            usage: Usage { input_tokens: 10, output_tokens: 2, images: 1 },
            latency_ms: 7,
            from_cache: false,
        }
    }

    #[test]
    fn put_then_get_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let key = content_digest(b"req");
        let stored = response_with_image();
        cache.put("prov", &key, &stored).unwrap();

        let hit = cache.get("prov", &key).unwrap().expect("hit");
        assert_eq!(hit.text, stored.text);
        assert_eq!(hit.usage, stored.usage);
        assert_eq!(
            crate::domain::image_digest(&hit.images[0]),
            crate::domain::image_digest(&stored.images[0])
        );
        assert!(cache.contains("prov", &key));

        let index = std::fs::read_to_string(dir.path().join("prov/index.jsonl")).unwrap();
        assert!(index.contains(key.as_str()));
    }

    #[test]
    fn miss_returns_none() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        assert!(cache.get("prov", &content_digest(b"nope")).unwrap().is_none());
    }

    #[test]
    fn double_put_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let key = content_digest(b"req");
        cache.put("prov", &key, &response_with_image()).unwrap();
        cache.put("prov", &key, &response_with_image()).unwrap();
        assert!(cache.get("prov", &key).unwrap().is_some());
    }
}
