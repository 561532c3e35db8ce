//! Download and cache behaviour against a throwaway local HTTP server.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Cursor, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use md5::{Digest, Md5};
use xenoscope::config::{ConfigLayer, RunConfig};
use xenoscope::ingest::{FetchError, Fetcher, UpdateFileRef};
use xenoscope::run::{run_fetch, run_filter, RunError, Stage};

#[derive(Default)]
struct Routes {
    bodies: HashMap<String, Vec<u8>>,
    hits: HashMap<String, usize>,
}

struct Server {
    base: String,
    routes: Arc<Mutex<Routes>>,
}

impl Server {
    fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let routes = Arc::new(Mutex::new(Routes::default()));
        let shared = routes.clone();
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let shared = shared.clone();
                thread::spawn(move || serve(stream, &shared));
            }
        });
        Server { base, routes }
    }

    fn put(&self, path: &str, body: Vec<u8>) -> String {
        self.routes.lock().unwrap().bodies.insert(path.to_string(), body);
        format!("{}{path}", self.base)
    }

    fn hits(&self, path: &str) -> usize {
        self.routes.lock().unwrap().hits.get(path).copied().unwrap_or(0)
    }
}

fn serve(stream: TcpStream, routes: &Mutex<Routes>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request = String::new();
    if reader.read_line(&mut request).is_err() {
        return;
    }
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header).unwrap_or(0) == 0 || header == "\r\n" {
            break;
        }
    }
    let path = request.split_whitespace().nth(1).unwrap_or("/").to_string();
    let body = {
        let mut r = routes.lock().unwrap();
        *r.hits.entry(path.clone()).or_default() += 1;
        r.bodies.get(&path).cloned()
    };
    let mut stream = stream;
    let _ = match body {
        Some(b) => {
            let head = format!(
                "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                b.len()
            );
            stream.write_all(head.as_bytes()).and_then(|_| stream.write_all(&b))
        }
        None => stream.write_all(b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n"),
    };
}

fn zipped(name: &str, payload: &[u8]) -> Vec<u8> {
    let mut w = zip::ZipWriter::new(Cursor::new(Vec::new()));
    w.start_file(name, zip::write::SimpleFileOptions::default()).unwrap();
    w.write_all(payload).unwrap();
    w.finish().unwrap().into_inner()
}

fn md5_hex(bytes: &[u8]) -> String {
    Md5::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

const NAME: &str = "20220615000000.export.CSV";

fn publish(server: &Server, name: &str, payload: &[u8]) -> UpdateFileRef {
    let archive = zipped(name, payload);
    let sum = md5_hex(&archive);
    let len = archive.len() as u64;
    let url = server.put(&format!("/gdeltv2/{name}.zip"), archive);
    UpdateFileRef::from_url(&url, len, &sum).unwrap()
}

fn quick(cache: &std::path::Path) -> Fetcher {
    Fetcher::new(cache).with_retries(2, Duration::from_millis(10))
}

#[test]
fn warm_cache_transfers_nothing() {
    let server = Server::start();
    let cache = tempfile::tempdir().unwrap();
    let r = publish(&server, NAME, b"payload line\n");
    let fetcher = quick(cache.path());

    let cold = fetcher.fetch(&r).unwrap();
    assert!(!cold.from_cache);
    assert!(cold.bytes_transferred > 0);
    assert_eq!(fs::read(&cold.path).unwrap(), b"payload line\n");
    assert_eq!(cold.path, cache.path().join(NAME));

    let warm = fetcher.fetch(&r).unwrap();
    assert!(warm.from_cache);
    assert_eq!(warm.bytes_transferred, 0);
    assert_eq!(server.hits(&format!("/gdeltv2/{NAME}.zip")), 1);
}

#[test]
fn corrupted_cache_is_downloaded_again() {
    let server = Server::start();
    let cache = tempfile::tempdir().unwrap();
    let r = publish(&server, NAME, b"original\n");
    let fetcher = quick(cache.path());
    let first = fetcher.fetch(&r).unwrap();
    fs::write(&first.path, b"tampered\n").unwrap();

    let again = fetcher.fetch(&r).unwrap();
    assert!(!again.from_cache);
    assert_eq!(fs::read(&again.path).unwrap(), b"original\n");
    assert_eq!(server.hits(&format!("/gdeltv2/{NAME}.zip")), 2);
}

#[test]
fn checksum_mismatch_retries_once_then_fails() {
    let server = Server::start();
    let cache = tempfile::tempdir().unwrap();
    let mut r = publish(&server, NAME, b"data\n");
    r.checksum = "0".repeat(32);
    let err = quick(cache.path()).fetch(&r).unwrap_err();
    assert!(matches!(err, FetchError::ChecksumMismatch { .. }), "{err}");
    assert_eq!(server.hits(&format!("/gdeltv2/{NAME}.zip")), 2);
    assert!(!cache.path().join(NAME).exists());
}

#[test]
fn unreachable_host_is_a_network_failure() {
    // Bind then drop to obtain a port nothing listens on.
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}/gdeltv2/{NAME}.zip");
    let r = UpdateFileRef::from_url(&url, 10, "").unwrap();
    let cache = tempfile::tempdir().unwrap();
    let err = Fetcher::new(cache.path())
        .with_retries(3, Duration::from_millis(5))
        .fetch(&r)
        .unwrap_err();
    match err {
        FetchError::NetworkFailure { attempts, .. } => assert_eq!(attempts, 3),
        other => panic!("expected NetworkFailure, got {other}"),
    }
}

#[test]
fn missing_file_is_not_found() {
    let server = Server::start();
    let url = format!("{}/gdeltv2/{NAME}.zip", server.base);
    let r = UpdateFileRef::from_url(&url, 10, "").unwrap();
    let cache = tempfile::tempdir().unwrap();
    assert!(matches!(quick(cache.path()).fetch(&r), Err(FetchError::NotFound(_))));
}

#[test]
fn parallel_fetch_of_one_file_downloads_once() {
    let server = Server::start();
    let cache = tempfile::tempdir().unwrap();
    let r = publish(&server, NAME, b"shared\n");
    let fetcher = quick(cache.path());
    let refs = vec![r; 8];
    let results = fetcher.fetch_all(&refs, 4);
    assert!(results.iter().all(|x| x.is_ok()));
    assert_eq!(server.hits(&format!("/gdeltv2/{NAME}.zip")), 1);
}

fn fixture(name: &str) -> Vec<u8> {
    fs::read(format!("{}/tests/fixtures/corpus/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

/// The fetch stage reads a master list, fills the cache, and the filter
/// stage then runs from that cache alone.
#[test]
fn fetch_stage_fills_cache_for_filter_stage() {
    let server = Server::start();
    let mut list = String::new();
    for name in [
        "20220615000000.export.CSV",
        "20220615000000.mentions.CSV",
        "20220615000000.gkg.csv",
        "20220615001500.export.CSV",
    ] {
        let body = fixture(name);
        let archive = zipped(name, &body);
        list.push_str(&format!(
            "{} {} {}/gdeltv2/{name}.zip\n",
            archive.len(),
            md5_hex(&archive),
            server.base
        ));
        server.put(&format!("/gdeltv2/{name}.zip"), archive);
    }
    // Listed but never served upstream.
    list.push_str(&format!(
        "10 {} {}/gdeltv2/20220615001500.gkg.csv.zip\n",
        "0".repeat(32),
        server.base
    ));
    list.push_str("garbage line\n");
    let master = server.put("/masterfilelist.txt", list.into_bytes());

    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let layer = ConfigLayer {
        start: Some("2022-06-15".into()),
        end: Some("2022-06-15".into()),
        feeds: Some(vec![xenoscope::ingest::Feed::English]),
        cache_dir: Some(cache.path().to_path_buf()),
        out: Some(out.path().to_path_buf()),
        master_list_english: Some(master),
        fetch_attempts: Some(1),
        jobs: Some(2),
        ..Default::default()
    };
    let config = RunConfig::resolve(layer).unwrap();
    let summary = run_fetch(&config).unwrap();
    assert_eq!(summary.listed, 5);
    assert_eq!(summary.fetched, 4);
    assert_eq!(summary.missing_upstream, 1);
    assert_eq!(summary.malformed_list_lines, 1);
    let manifest = fs::read_to_string(out.path().join("fetch_manifest.tsv")).unwrap();
    assert_eq!(manifest.lines().count(), 6);
    assert!(manifest.contains("\tmissing\t"));

    let again = run_fetch(&config).unwrap();
    assert_eq!(again.from_cache, 4);
    assert_eq!(again.bytes_transferred, 0);

    let filtered = run_filter(&config).unwrap();
    assert_eq!(filtered.files, 4);
    assert!(filtered.counters.is_monotone());
}

#[test]
fn unreachable_master_list_fails_the_fetch_stage() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let out = tempfile::tempdir().unwrap();
    let config = RunConfig::resolve(ConfigLayer {
        feeds: Some(vec![xenoscope::ingest::Feed::English]),
        cache_dir: Some(out.path().join("cache")),
        out: Some(out.path().to_path_buf()),
        master_list_english: Some(format!("http://127.0.0.1:{port}/masterfilelist.txt")),
        fetch_attempts: Some(1),
        ..Default::default()
    })
    .unwrap();
    let err = run_fetch(&config).unwrap_err();
    assert!(
        matches!(
            err,
            RunError::Stage {
                stage: Stage::Fetch,
                ..
            }
        ),
        "{err}"
    );
    assert_eq!(err.exit_code(), 3);
}
