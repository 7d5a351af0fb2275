//! Content-addressed quadtree cache with a single-writer lock.

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::decomposition::{Bounds, BuildParams, Quadtree, Scene, Space};
use crate::kinematics::{Sign, WorkingMode};

pub const ENV_VAR: &str = "MVKIT_CACHE";
const LOCK_NAME: &str = ".lock";
const LOCK_WAIT: Duration = Duration::from_secs(30);
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct KeyDocument<'a> {
    version: u32,
    scene: &'a Scene,
    space: Space,
    bounds: Bounds,
    mode: WorkingMode,
    det_sign: Sign,
    min_cell: f64,
    samples_per_cell: usize,
}

/// Hex sha256 of everything that determines a tree.
pub fn cache_key(
    scene: &Scene,
    space: Space,
    bounds: Bounds,
    mode: WorkingMode,
    det_sign: Sign,
    params: BuildParams,
) -> String {
    let doc = KeyDocument {
        version: FORMAT_VERSION,
        scene,
        space,
        bounds,
        mode,
        det_sign,
        min_cell: params.min_cell,
        samples_per_cell: params.samples_per_cell,
    };
    let bytes = serde_json::to_vec(&doc).expect("key serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Removes the lock file when dropped.
pub struct CacheLock {
    path: PathBuf,
}

impl Drop for CacheLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Clone, Debug)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$MVKIT_CACHE`, else `<output>/.mvkit-cache`.
    pub fn from_env(output: &Path) -> Self {
        match std::env::var_os(ENV_VAR) {
            Some(dir) if !dir.is_empty() => Self::new(dir),
            _ => Self::new(output.join(".mvkit-cache")),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Takes the directory lock, waiting for another writer to finish.
    pub fn lock(&self) -> io::Result<CacheLock> {
        fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(LOCK_NAME);
        let start = Instant::now();
        loop {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    writeln!(f, "{}", std::process::id())?;
                    return Ok(CacheLock { path });
                }
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists && start.elapsed() < LOCK_WAIT => {
                    thread::sleep(Duration::from_millis(50));
                }
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                    return Err(io::Error::new(
                        e.kind(),
                        format!("cache is locked by {}; remove it if no mvkit process is running", path.display()),
                    ));
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Cached tree, or `None` if absent or unreadable.
    pub fn get(&self, key: &str) -> Option<Quadtree> {
        let text = fs::read_to_string(self.entry(key)).ok()?;
        Quadtree::from_json(&text).ok()
    }

    /// Writes via a temporary file so readers never see a partial entry.
    pub fn put(&self, key: &str, tree: &Quadtree) -> io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!("{key}.tmp"));
        fs::write(&tmp, tree.to_json())?;
        fs::rename(&tmp, self.entry(key))
    }

    /// Cached tree or the result of `build`, stored under the lock.
    pub fn get_or_build<E>(
        &self,
        key: &str,
        build: impl FnOnce() -> Result<Quadtree, E>,
    ) -> Result<Result<Quadtree, E>, io::Error> {
        if let Some(tree) = self.get(key) {
            return Ok(Ok(tree));
        }
        let _lock = self.lock()?;
        if let Some(tree) = self.get(key) {
            return Ok(Ok(tree));
        }
        match build() {
            Ok(tree) => {
                self.put(key, &tree)?;
                Ok(Ok(tree))
            }
            Err(e) => Ok(Err(e)),
        }
    }
}
