//! HTTP download of update files into a local cache.
//!
//! Cache layout: `<cache_dir>/<name>` holds the decompressed payload and
//! `<cache_dir>/<name>.md5` records the archive checksum announced by the
//! master list together with the checksum of the payload on disk.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Cursor, Read};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use md5::{Digest, Md5};
use rayon::prelude::*;
use thiserror::Error;

use super::master::UpdateFileRef;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("network failure fetching {url} after {attempts} attempt(s): {message}")]
    NetworkFailure {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("checksum mismatch for {url}: expected {expected}, got {actual}")]
    ChecksumMismatch {
        url: String,
        expected: String,
        actual: String,
    },
    #[error("{0} not found")]
    NotFound(String),
    #[error("{url} answered HTTP {status}")]
    HttpStatus { url: String, status: u16 },
    #[error("{url} is not a readable zip archive: {message}")]
    BadArchive { url: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl FetchError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, FetchError::NetworkFailure { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchOutcome {
    pub path: PathBuf,
    /// Bytes received over the network by this call.
    pub bytes_transferred: u64,
    pub from_cache: bool,
}

fn md5_hex(bytes: &[u8]) -> String {
    let digest = Md5::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FetchError + '_ {
    move |source| FetchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Sidecar {
    archive_md5: String,
    content_md5: String,
}

impl Sidecar {
    fn parse(text: &str) -> Option<Self> {
        let mut archive = None;
        let mut content = None;
        for line in text.lines() {
            match line.split_once('=') {
                Some(("archive_md5", v)) => archive = Some(v.trim().to_string()),
                Some(("content_md5", v)) => content = Some(v.trim().to_string()),
                _ => {}
            }
        }
        Some(Self {
            archive_md5: archive?,
            content_md5: content?,
        })
    }

    fn render(&self) -> String {
        format!("archive_md5={}\ncontent_md5={}\n", self.archive_md5, self.content_md5)
    }
}

/// Downloads update files with bounded retries and an at-most-once cache.
pub struct Fetcher {
    agent: ureq::Agent,
    cache_dir: PathBuf,
    max_attempts: u32,
    backoff: Duration,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Fetcher {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(20))
            .timeout(Duration::from_secs(300))
            .build();
        Self {
            agent,
            cache_dir: cache_dir.into(),
            max_attempts: 3,
            backoff: Duration::from_millis(500),
            locks: Mutex::new(HashMap::new()),
        }
    }

    /// Network attempts per download (at least 1) and the initial backoff,
    /// doubled after every failure.
    pub fn with_retries(mut self, max_attempts: u32, backoff: Duration) -> Self {
        self.max_attempts = max_attempts.max(1);
        self.backoff = backoff;
        self
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    pub fn cached_path(&self, update: &UpdateFileRef) -> PathBuf {
        self.cache_dir.join(update.cache_file_name())
    }

    fn sidecar_path(&self, update: &UpdateFileRef) -> PathBuf {
        self.cache_dir.join(format!("{}.md5", update.cache_file_name()))
    }

    fn file_lock(&self, name: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(name.to_string()).or_default().clone()
    }

    /// Returns the cached payload path, downloading only when the cache
    /// entry is absent or fails verification.
    pub fn fetch(&self, update: &UpdateFileRef) -> Result<FetchOutcome, FetchError> {
        let lock = self.file_lock(update.cache_file_name());
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());

        let path = self.cached_path(update);
        if self.cache_is_valid(update, &path) {
            return Ok(FetchOutcome {
                path,
                bytes_transferred: 0,
                from_cache: true,
            });
        }
        let _ = fs::remove_file(&path);
        let _ = fs::remove_file(self.sidecar_path(update));

        let mut transferred = 0;
        // A checksum mismatch earns exactly one fresh download.
        for attempt in 0..2 {
            let body = self.download(&update.url)?;
            transferred += body.len() as u64;
            let actual = md5_hex(&body);
            if !update.checksum.is_empty() && actual != update.checksum {
                if attempt == 0 {
                    log::warn!("checksum mismatch for {}, downloading again", update.url);
                    continue;
                }
                return Err(FetchError::ChecksumMismatch {
                    url: update.url.clone(),
                    expected: update.checksum.clone(),
                    actual,
                });
            }
            let payload = self.unpack(update, body)?;
            self.store(update, &path, &payload, &actual)?;
            return Ok(FetchOutcome {
                path,
                bytes_transferred: transferred,
                from_cache: false,
            });
        }
        unreachable!("loop returns on its second iteration")
    }

    fn cache_is_valid(&self, update: &UpdateFileRef, path: &Path) -> bool {
        let Some(sidecar) = fs::read_to_string(self.sidecar_path(update))
            .ok()
            .and_then(|t| Sidecar::parse(&t))
        else {
            return false;
        };
        if !update.checksum.is_empty() && sidecar.archive_md5 != update.checksum {
            return false;
        }
        match fs::read(path) {
            Ok(bytes) => md5_hex(&bytes) == sidecar.content_md5,
            Err(_) => false,
        }
    }

    fn unpack(&self, update: &UpdateFileRef, body: Vec<u8>) -> Result<Vec<u8>, FetchError> {
        if !update.file_name().to_ascii_lowercase().ends_with(".zip") {
            return Ok(body);
        }
        let bad = |e: &dyn std::fmt::Display| FetchError::BadArchive {
            url: update.url.clone(),
            message: e.to_string(),
        };
        let mut archive = zip::ZipArchive::new(Cursor::new(body)).map_err(|e| bad(&e))?;
        if archive.is_empty() {
            return Err(bad(&"archive is empty"));
        }
        let mut entry = archive.by_index(0).map_err(|e| bad(&e))?;
        let mut out = Vec::with_capacity(entry.size() as usize);
        entry.read_to_end(&mut out).map_err(|e| bad(&e))?;
        Ok(out)
    }

    fn store(&self, update: &UpdateFileRef, path: &Path, payload: &[u8], archive_md5: &str) -> Result<(), FetchError> {
        fs::create_dir_all(&self.cache_dir).map_err(io_err(&self.cache_dir))?;
        let partial = self.cache_dir.join(format!("{}.part", update.cache_file_name()));
        fs::write(&partial, payload).map_err(io_err(&partial))?;
        fs::rename(&partial, path).map_err(io_err(path))?;
        let sidecar = Sidecar {
            archive_md5: archive_md5.to_string(),
            content_md5: md5_hex(payload),
        };
        let sidecar_path = self.sidecar_path(update);
        fs::write(&sidecar_path, sidecar.render()).map_err(io_err(&sidecar_path))
    }

    fn download(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        let mut delay = self.backoff;
        let mut last = String::new();
        for attempt in 1..=self.max_attempts {
            match self.agent.get(url).call() {
                Ok(response) => {
                    let mut body = Vec::new();
                    match response.into_reader().read_to_end(&mut body) {
                        Ok(_) => return Ok(body),
                        Err(e) => last = e.to_string(),
                    }
                }
                Err(ureq::Error::Status(404, _)) => return Err(FetchError::NotFound(url.to_string())),
                Err(ureq::Error::Status(status, _)) if status < 500 => {
                    return Err(FetchError::HttpStatus {
                        url: url.to_string(),
                        status,
                    })
                }
                Err(e) => last = e.to_string(),
            }
            if attempt < self.max_attempts {
                std::thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
        }
        Err(FetchError::NetworkFailure {
            url: url.to_string(),
            attempts: self.max_attempts,
            message: last,
        })
    }

    /// Fetches a plain-text resource such as a master list.
    pub fn fetch_text(&self, url: &str) -> Result<String, FetchError> {
        let body = self.download(url)?;
        Ok(String::from_utf8_lossy(&body).into_owned())
    }

    /// Fetches every ref with at most `jobs` concurrent transfers. Results
    /// are returned in input order.
    pub fn fetch_all(&self, refs: &[UpdateFileRef], jobs: usize) -> Vec<Result<FetchOutcome, FetchError>> {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
            Ok(pool) => pool.install(|| refs.par_iter().map(|r| self.fetch(r)).collect()),
            Err(_) => refs.iter().map(|r| self.fetch(r)).collect(),
        }
    }
}

/// Single-shot form of [`Fetcher::fetch`] with default retry settings.
pub fn fetch_file(update: &UpdateFileRef, cache_dir: &Path) -> Result<PathBuf, FetchError> {
    Fetcher::new(cache_dir).fetch(update).map(|o| o.path)
}
