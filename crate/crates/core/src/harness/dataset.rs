//! Dataset download with a local content-addressed cache.
//!
//! A fetched dataset lives in the cache directory as
//!
//! * `blobs/<sha256>`: the raw downloaded bytes,
//! * `<name>.sha256`: the hash of the blob the name currently points to,
//! * `<name>.edges`: the blob converted to a directed `u v` edge list.
//!
//! Sources are registry names (see [`known_url`]), `http(s)://` URLs or
//! `file://` URLs. Zip archives and MatrixMarket coordinate files are unpacked.

use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAX_DOWNLOAD: u64 = 512 * 1024 * 1024;

/// Download locations of the named datasets.
pub fn known_url(name: &str) -> Option<&'static str> {
    match name {
        "soc-dolphins" => Some("https://nrvis.com/download/data/soc/soc-dolphins.zip"),
        "ca-GrQc" => Some("https://snap.stanford.edu/data/ca-GrQc.txt.gz"),
        "email-Eu-core" => Some("https://snap.stanford.edu/data/email-Eu-core.txt.gz"),
        _ => None,
    }
}

/// Cache key for a source: the registry name, or the URL's file stem.
pub fn dataset_name(source: &str) -> String {
    if !source.contains("://") {
        return source.to_string();
    }
    let last = source.trim_end_matches('/').rsplit('/').next().unwrap_or(source);
    let mut name = last;
    for ext in [".gz", ".zip", ".mtx", ".txt", ".edges", ".tsv", ".csv"] {
        name = name.strip_suffix(ext).unwrap_or(name);
    }
    name.to_string()
}

#[derive(Clone, Debug)]
pub struct DatasetCache {
    dir: PathBuf,
    offline: bool,
}

impl DatasetCache {
    pub fn new(dir: impl Into<PathBuf>, offline: bool) -> Self {
        DatasetCache {
            dir: dir.into(),
            offline,
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn edges_path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.edges"))
    }

    fn hash_path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.sha256"))
    }

    fn blob_path(&self, hash: &str) -> PathBuf {
        self.dir.join("blobs").join(hash)
    }

    pub fn cached_hash(&self, name: &str) -> Option<String> {
        let edges = self.edges_path(name);
        let hash = std::fs::read_to_string(self.hash_path(name)).ok()?;
        edges.exists().then(|| hash.trim().to_string())
    }

    /// Returns the cached edge list, downloading it on a miss.
    pub fn fetch(&self, source: &str) -> Result<PathBuf> {
        let name = dataset_name(source);
        if self.cached_hash(&name).is_some() {
            log::debug!("cache hit for {name}");
            return Ok(self.edges_path(&name));
        }
        self.download_into(source, &name)
    }

    /// Downloads again even on a hit. A changed checksum keeps the cached copy.
    pub fn refetch(&self, source: &str) -> Result<PathBuf> {
        let name = dataset_name(source);
        match self.cached_hash(&name) {
            None => self.download_into(source, &name),
            Some(old) => {
                let url = resolve_url(source)?;
                let bytes = download(&url)?;
                let new = hex::encode(Sha256::digest(&bytes));
                if new != old {
                    log::warn!("{name}: checksum changed on re-fetch ({old} -> {new}); keeping the cached copy");
                }
                Ok(self.edges_path(&name))
            }
        }
    }

    fn download_into(&self, source: &str, name: &str) -> Result<PathBuf> {
        let edges_path = self.edges_path(name);
        if self.offline {
            return Err(Error::NotCached {
                name: name.to_string(),
                path: edges_path,
            });
        }
        let url = resolve_url(source)?;
        log::info!("downloading {name} from {url}");
        let bytes = download(&url)?;
        if bytes.is_empty() {
            return Err(Error::Network {
                url,
                msg: "empty response".into(),
            });
        }
        let hash = hex::encode(Sha256::digest(&bytes));
        let text = to_edge_list(&bytes)?;

        let blob = self.blob_path(&hash);
        let blobs = blob.parent().expect("blob has a parent");
        std::fs::create_dir_all(blobs).map_err(|e| Error::io(blobs, e))?;
        std::fs::write(&blob, &bytes).map_err(|e| Error::io(&blob, e))?;
        std::fs::write(&edges_path, text).map_err(|e| Error::io(&edges_path, e))?;
        let hash_path = self.hash_path(name);
        std::fs::write(&hash_path, format!("{hash}\n")).map_err(|e| Error::io(&hash_path, e))?;
        Ok(edges_path)
    }
}

/// Convenience wrapper over [`DatasetCache::fetch`].
pub fn fetch_dataset(source: &str, cache_dir: &Path, offline: bool) -> Result<PathBuf> {
    DatasetCache::new(cache_dir, offline).fetch(source)
}

fn resolve_url(source: &str) -> Result<String> {
    if source.contains("://") {
        return Ok(source.to_string());
    }
    known_url(source)
        .map(str::to_string)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown dataset {source:?}; pass a URL instead")))
}

/// Reads `url` fully. Supports `file://` for local mirrors.
pub fn download(url: &str) -> Result<Vec<u8>> {
    if let Some(path) = url.strip_prefix("file://") {
        return std::fs::read(path).map_err(|e| Error::io(path, e));
    }
    let net = |msg: String| Error::Network {
        url: url.to_string(),
        msg,
    };
    let mut response = ureq::get(url).call().map_err(|e| net(e.to_string()))?;
    response
        .body_mut()
        .with_config()
        .limit(MAX_DOWNLOAD)
        .read_to_vec()
        .map_err(|e| net(e.to_string()))
}

/// Unpacks gzip/zip containers and converts MatrixMarket to a directed edge list.
/// Plain edge lists pass through unchanged.
pub fn to_edge_list(bytes: &[u8]) -> Result<String> {
    let format = |msg: String| Error::Format { what: "dataset", msg };
    if bytes.starts_with(b"PK\x03\x04") {
        let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| format(e.to_string()))?;
        let mut best: Option<(usize, u64)> = None;
        for i in 0..archive.len() {
            let file = archive.by_index(i).map_err(|e| format(e.to_string()))?;
            let name = String::from_utf8_lossy(file.name_raw()).into_owned();
            if file.is_dir() || name.starts_with("__MACOSX") || name.ends_with("readme.html") {
                continue;
            }
            if best.is_none_or(|(_, size)| file.size() > size) {
                best = Some((i, file.size()));
            }
        }
        let (i, _) = best.ok_or_else(|| format("zip archive has no files".into()))?;
        let mut inner = Vec::new();
        archive
            .by_index(i)
            .map_err(|e| format(e.to_string()))?
            .read_to_end(&mut inner)
            .map_err(|e| format(e.to_string()))?;
        return to_edge_list(&inner);
    }
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut inner = Vec::new();
        flate2::read::GzDecoder::new(bytes)
            .read_to_end(&mut inner)
            .map_err(|e| format(e.to_string()))?;
        return to_edge_list(&inner);
    }
    let text = String::from_utf8_lossy(bytes);
    if text.starts_with("%%MatrixMarket") {
        matrix_market_to_edge_list(&text)
    } else {
        Ok(text.into_owned())
    }
}

/// Coordinate-format MatrixMarket to a directed edge list. Symmetric matrices
/// yield both directions; every index in `1..=max(rows, cols)` is declared so
/// that isolated nodes survive.
pub fn matrix_market_to_edge_list(text: &str) -> Result<String> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "empty MatrixMarket file".into(),
    })?;
    let header = header.to_ascii_lowercase();
    if !header.contains("coordinate") {
        return Err(Error::Parse {
            line: 1,
            msg: format!("only coordinate MatrixMarket is supported, got {header:?}"),
        });
    }
    let symmetric = ["symmetric", "skew-symmetric", "hermitian"]
        .iter()
        .any(|s| header.split_whitespace().any(|w| w == *s));

    let mut out = String::new();
    let mut size: Option<(u64, usize)> = None;
    let mut entries = 0usize;
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |t: &str| -> Result<u64> {
            t.parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("invalid integer {t:?}"),
            })
        };
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected at least two fields, got {line:?}"),
            });
        }
        match size {
            None => {
                if fields.len() < 3 {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: "size line needs rows, cols and entries".into(),
                    });
                }
                let n = parse(fields[0])?.max(parse(fields[1])?);
                size = Some((n, parse(fields[2])? as usize));
                out.push_str(&format!("# converted from MatrixMarket, {n} nodes\n"));
                for v in 1..=n {
                    out.push_str(&format!("# node {v}\n"));
                }
            }
            Some((n, _)) => {
                let (u, v) = (parse(fields[0])?, parse(fields[1])?);
                if u == 0 || v == 0 || u > n || v > n {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("index ({u}, {v}) outside 1..={n}"),
                    });
                }
                out.push_str(&format!("{u} {v}\n"));
                if symmetric && u != v {
                    out.push_str(&format!("{v} {u}\n"));
                }
                entries += 1;
            }
        }
    }
    let (_, declared) = size.ok_or_else(|| Error::Parse {
        line: 1,
        msg: "missing size line".into(),
    })?;
    if declared != entries {
        log::warn!("MatrixMarket file declares {declared} entries but has {entries}");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_edge_list, EdgeWeightScheme};

    const MTX: &str = "%%MatrixMarket matrix coordinate pattern symmetric\n% comment\n5 5 3\n2 1\n3 1\n3 2\n";

    #[test]
    fn matrix_market_symmetric() {
        let text = matrix_market_to_edge_list(MTX).unwrap();
        let g = load_edge_list(text.as_bytes(), true, EdgeWeightScheme::InDegree).unwrap();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.edge_count(), 6);
        assert_eq!(g.out_degree(g.node_by_label(4).unwrap()), 0);
    }

    #[test]
    fn matrix_market_errors() {
        assert!(matrix_market_to_edge_list("%%MatrixMarket matrix array real general\n2 2\n").is_err());
        assert!(matrix_market_to_edge_list("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n3 1\n").is_err());
        assert!(matrix_market_to_edge_list("%%MatrixMarket matrix coordinate pattern general\n").is_err());
    }

    #[test]
    fn names_from_urls() {
        assert_eq!(dataset_name("soc-dolphins"), "soc-dolphins");
        assert_eq!(dataset_name("https://x.org/data/soc-dolphins.zip"), "soc-dolphins");
        assert_eq!(dataset_name("file:///tmp/g.txt.gz"), "g");
    }

    fn zipped(name: &str, body: &str) -> Vec<u8> {
        use std::io::Write;
        let mut buf = Cursor::new(Vec::new());
        let mut w = zip::ZipWriter::new(&mut buf);
        w.start_file(name, zip::write::SimpleFileOptions::default()).unwrap();
        w.write_all(body.as_bytes()).unwrap();
        w.finish().unwrap();
        buf.into_inner()
    }

    #[test]
    fn containers_are_unpacked() {
        let text = to_edge_list(&zipped("g.mtx", MTX)).unwrap();
        assert!(text.contains("1 3\n"));
        let mut gz = Vec::new();
        {
            use std::io::Write;
            let mut enc = flate2::write::GzEncoder::new(&mut gz, flate2::Compression::default());
            enc.write_all(b"1 2\n2 3\n").unwrap();
        }
        assert_eq!(to_edge_list(&gz).unwrap(), "1 2\n2 3\n");
    }

    #[test]
    fn cache_hit_offline_and_refetch() {
        let dir = tempfile::tempdir().unwrap();
        let src_path = dir.path().join("tiny.mtx");
        std::fs::write(&src_path, MTX).unwrap();
        let url = format!("file://{}", src_path.display());
        let cache_dir = dir.path().join("cache");

        let offline = DatasetCache::new(&cache_dir, true);
        match offline.fetch(&url) {
            Err(Error::NotCached { name, path }) => {
                assert_eq!(name, "tiny");
                assert_eq!(path, cache_dir.join("tiny.edges"));
            }
            other => panic!("expected NotCached, got {other:?}"),
        }

        let cache = DatasetCache::new(&cache_dir, false);
        let path = cache.fetch(&url).unwrap();
        let hash = cache.cached_hash("tiny").unwrap();
        assert!(cache_dir.join("blobs").join(&hash).exists());

        // a hit needs neither the network nor the source
        std::fs::remove_file(&src_path).unwrap();
        assert_eq!(offline.fetch(&url).unwrap(), path);
        assert_eq!(cache.fetch(&url).unwrap(), path);

        std::fs::write(&src_path, "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 2\n").unwrap();
        assert_eq!(cache.refetch(&url).unwrap(), path);
        assert_eq!(cache.cached_hash("tiny").unwrap(), hash);
        assert!(std::fs::read_to_string(&path).unwrap().contains("3 2"));
    }

    #[test]
    fn unknown_names_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            fetch_dataset("no-such-dataset", dir.path(), false),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            fetch_dataset("file:///definitely/not/here.txt", dir.path(), false),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    #[ignore = "needs network access"]
    fn soc_dolphins() {
        let dir = tempfile::tempdir().unwrap();
        let path = fetch_dataset("soc-dolphins", dir.path(), false).unwrap();
        let g = crate::graph::load_graph_file(
            &path,
            crate::graph::EdgeListMeta {
                directed: true,
                scheme: EdgeWeightScheme::InDegree,
            },
        )
        .unwrap();
        assert_eq!(g.node_count(), 62);
        assert_eq!(g.edge_count(), 159 * 2);
    }
}
