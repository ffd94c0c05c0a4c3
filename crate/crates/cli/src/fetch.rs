//! Input acquisition: download-once caching with checksum validation.
//!
//! Each fetched file lives in the cache directory under its URL's file
//! name, next to a `.sha256` sidecar recorded after a complete, validated
//! download. A file whose hash no longer matches its sidecar (truncated or
//! corrupted download) is thrown away and fetched again.

use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// A resolved input: where it is on disk and what it hashes to.
#[derive(Debug, Clone)]
pub struct ResolvedInput {
    /// The configured path or URL.
    pub source: String,
    pub path: PathBuf,
    pub sha256: String,
}

pub fn is_url(spec: &str) -> bool {
    spec.starts_with("http://") || spec.starts_with("https://")
}

/// Hash a file in streaming fashion.
pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    io::copy(&mut file, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}

/// Hash a file, or a shapefile-bundle directory (member names and contents,
/// sorted, so the digest is stable).
pub fn sha256_path(path: &Path) -> io::Result<String> {
    if path.is_file() {
        return sha256_file(path);
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    let mut hasher = Sha256::new();
    for entry in entries {
        if let Some(name) = entry.file_name().and_then(|n| n.to_str()) {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
        }
        let mut file = File::open(&entry)?;
        io::copy(&mut file, &mut hasher)?;
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Resolve a configured input to a local file, downloading URLs into the
/// cache. `pinned` is an optional required sha256.
pub fn resolve_input(
    spec: &str,
    cache_dir: &Path,
    pinned: Option<&str>,
) -> Result<ResolvedInput, CliError> {
    let path = if is_url(spec) {
        fetch(spec, cache_dir)?
    } else {
        let path = PathBuf::from(spec);
        if !path.exists() {
            return Err(CliError::ingest(format!(
                "input {spec} does not exist (give a local path or an http(s) URL)"
            )));
        }
        path
    };
    let sha256 = sha256_path(&path)?;
    if let Some(expected) = pinned {
        if !expected.eq_ignore_ascii_case(&sha256) {
            if is_url(spec) {
                let _ = fs::remove_file(&path);
                let _ = fs::remove_file(sidecar_path(&path));
            }
            return Err(CliError::io(format!(
                "checksum mismatch for {spec}: expected {expected}, got {sha256}"
            )));
        }
    }
    Ok(ResolvedInput {
        source: spec.to_string(),
        path,
        sha256,
    })
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".sha256");
    path.with_file_name(name)
}

fn file_name_for_url(url: &str) -> Result<String, CliError> {
    let trimmed = url.split(['?', '#']).next().unwrap_or(url);
    let name = trimmed.rsplit('/').next().unwrap_or_default();
    if name.is_empty() {
        return Err(CliError::validation(format!(
            "cannot derive a file name from URL {url}"
        )));
    }
    Ok(name.to_string())
}

/// Download `url` into the cache once; later calls reuse the file after
/// re-verifying it against the recorded checksum.
pub fn fetch(url: &str, cache_dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(cache_dir)?;
    let target = cache_dir.join(file_name_for_url(url)?);
    let sidecar = sidecar_path(&target);

    if target.is_file() && sidecar.is_file() {
        let recorded = fs::read_to_string(&sidecar)?;
        let actual = sha256_file(&target)?;
        if recorded.trim() == actual {
            log::info!("cache hit for {url}");
            return Ok(target);
        }
        log::warn!(
            "cached {} does not match its recorded checksum; refetching",
            target.display()
        );
        fs::remove_file(&target)?;
        fs::remove_file(&sidecar)?;
    }

    let part = target.with_extension(format!(
        "{}.part",
        target
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default()
    ));
    log::info!("fetching {url}");
    let sha256 = download(url, &part)?;

    if target
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"))
    {
        validate_gzip(&part).map_err(|e| {
            let _ = fs::remove_file(&part);
            CliError::io(format!("downloaded {url} is not a complete gzip file: {e}"))
        })?;
    }

    fs::rename(&part, &target)?;
    fs::write(&sidecar, format!("{sha256}\n"))?;
    Ok(target)
}

fn download(url: &str, to: &Path) -> Result<String, CliError> {
    let client = reqwest::blocking::Client::builder()
        .connect_timeout(std::time::Duration::from_secs(30))
        .build()
        .map_err(|e| CliError::io(format!("http client: {e}")))?;
    let mut response = client
        .get(url)
        .send()
        .and_then(reqwest::blocking::Response::error_for_status)
        .map_err(|e| CliError::io(format!("GET {url}: {e}")))?;
    let file = File::create(to)?;
    let mut writer = HashingWriter {
        inner: io::BufWriter::new(file),
        hasher: Sha256::new(),
    };
    io::copy(&mut response, &mut writer).map_err(|e| {
        let _ = fs::remove_file(to);
        CliError::io(format!("downloading {url}: {e}"))
    })?;
    writer.inner.flush()?;
    Ok(hex::encode(writer.hasher.finalize()))
}

struct HashingWriter<W: Write> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Decode the whole stream to prove the gzip member is complete.
fn validate_gzip(path: &Path) -> io::Result<()> {
    let file = io::BufReader::new(File::open(path)?);
    let mut decoder = flate2::bufread::MultiGzDecoder::new(file);
    let mut sink = [0u8; 64 * 1024];
    loop {
        match decoder.read(&mut sink) {
            Ok(0) => return Ok(()),
            Ok(_) => {}
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// One-shot HTTP server good enough for reqwest.
    fn serve(body: Vec<u8>, hits: Arc<AtomicUsize>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { break };
                hits.fetch_add(1, Ordering::SeqCst);
                let mut buf = [0u8; 2048];
                let _ = stream.read(&mut buf);
                let header = format!(
                    "HTTP/1.1 200 OK\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
                    body.len()
                );
                let _ = stream.write_all(header.as_bytes());
                let _ = stream.write_all(&body);
            }
        });
        format!("http://{addr}")
    }

    fn gzip(data: &[u8]) -> Vec<u8> {
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(data).unwrap();
        enc.finish().unwrap()
    }

    #[test]
    fn warm_cache_skips_the_network() {
        let dir = tempfile::tempdir().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let base = serve(b"payload".to_vec(), hits.clone());
        let url = format!("{base}/data.bin");

        let first = fetch(&url, dir.path()).unwrap();
        assert_eq!(fs::read(&first).unwrap(), b"payload");
        assert_eq!(hits.load(Ordering::SeqCst), 1);

        let second = fetch(&url, dir.path()).unwrap();
        assert_eq!(first, second);
        assert_eq!(hits.load(Ordering::SeqCst), 1, "no second request");
    }

    #[test]
    fn truncated_prior_download_is_refetched_and_validated() {
        let dir = tempfile::tempdir().unwrap();
        let full = gzip(b"the quick brown fox jumps over the lazy dog");
        let hits = Arc::new(AtomicUsize::new(0));
        let base = serve(full.clone(), hits.clone());
        let url = format!("{base}/data.csv.gz");

        // A truncated file with a stale sidecar, as left by a killed run.
        let target = dir.path().join("data.csv.gz");
        fs::write(&target, &full[..full.len() / 2]).unwrap();
        fs::write(dir.path().join("data.csv.gz.sha256"), "feedbeef\n").unwrap();

        let fetched = fetch(&url, dir.path()).unwrap();
        assert_eq!(fs::read(&fetched).unwrap(), full);
        assert_eq!(hits.load(Ordering::SeqCst), 1);
        validate_gzip(&fetched).unwrap();
    }

    #[test]
    fn truncated_gzip_body_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let full = gzip(&vec![7u8; 100_000]);
        let truncated = full[..full.len() / 2].to_vec();
        let base = serve(truncated, Arc::new(AtomicUsize::new(0)));
        let url = format!("{base}/data.csv.gz");
        let err = fetch(&url, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(!dir.path().join("data.csv.gz").exists());
    }

    #[test]
    fn pinned_checksum_mismatch_fails() {
        let dir = tempfile::tempdir().unwrap();
        let base = serve(b"payload".to_vec(), Arc::new(AtomicUsize::new(0)));
        let url = format!("{base}/data.bin");
        let err = resolve_input(&url, dir.path(), Some("00".repeat(32).as_str())).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        // The poisoned cache entry is dropped so the next run refetches.
        assert!(!dir.path().join("data.bin").exists());
    }

    #[test]
    fn local_paths_are_hashed_not_copied() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("input.csv");
        fs::write(&path, b"a,b\n").unwrap();
        let resolved = resolve_input(path.to_str().unwrap(), dir.path(), None).unwrap();
        assert_eq!(resolved.path, path);
        assert_eq!(resolved.sha256.len(), 64);

        let missing = resolve_input("nope/missing.csv", dir.path(), None).unwrap_err();
        assert_eq!(missing.exit_code(), 2);
    }
}
