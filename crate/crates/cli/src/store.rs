//! Content-addressed on-disk store for uploaded images and results.

use std::fs;
use std::io::{self, ErrorKind};
use std::path::{Path, PathBuf};

use crate::ops::content_id;

/// Environment variable naming the store directory.
pub const DATA_DIR_ENV: &str = "PDLAB_DATA_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bucket {
    Images,
    Results,
}

impl Bucket {
    fn dir(self) -> &'static str {
        match self {
            Bucket::Images => "images",
            Bucket::Results => "results",
        }
    }
}

/// Files are named by the SHA-256 of their bytes, so identical uploads
/// share one entry and restarts keep every id valid.
#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        for bucket in [Bucket::Images, Bucket::Results] {
            fs::create_dir_all(root.join(bucket.dir()))?;
        }
        Ok(Self { root })
    }

    /// `$PDLAB_DATA_DIR`, or `pdlab-store` under the system temp directory.
    pub fn default_root() -> PathBuf {
        std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| std::env::temp_dir().join("pdlab-store"))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, bucket: Bucket, id: &str) -> PathBuf {
        self.root.join(bucket.dir()).join(id)
    }

    /// Stores `bytes` and returns their id.
    pub fn put(&self, bucket: Bucket, bytes: &[u8]) -> io::Result<String> {
        let id = content_id(bytes);
        let path = self.path(bucket, &id);
        if !path.exists() {
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            fs::write(&tmp, bytes)?;
            fs::rename(&tmp, &path)?;
        }
        Ok(id)
    }

    /// Bytes stored under `id`, or `None` for unknown or malformed ids.
    pub fn get(&self, bucket: Bucket, id: &str) -> io::Result<Option<Vec<u8>>> {
        if !is_valid_id(id) {
            return Ok(None);
        }
        match fs::read(self.path(bucket, id)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }
}

pub fn is_valid_id(id: &str) -> bool {
    id.len() == 64 && id.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}
