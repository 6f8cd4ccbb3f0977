use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::ids::DatasetId;

use super::{logio, prep_cache_key, prepare, PrepError, PrepKey, PrepParams, SequenceLog};

type Slot = Arc<Mutex<Option<Arc<SequenceLog>>>>;

/// Content-addressed store of prepared sequence logs.
///
/// Readers of a finished key share one `Arc`; concurrent preparations of
/// the same key serialize on a per-key lock so the transformation runs once.
/// With a root directory, results persist as `<root>/<dataset>/<sequence>/<key>/log`.
#[derive(Debug, Default)]
pub struct PrepCache {
    root: Option<PathBuf>,
    slots: Mutex<HashMap<PrepKey, Slot>>,
    transformations: AtomicUsize,
}

impl PrepCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(root: impl Into<PathBuf>) -> Self {
        Self {
            root: Some(root.into()),
            ..Self::default()
        }
    }

    /// Number of transformations actually performed.
    pub fn transformations(&self) -> usize {
        self.transformations.load(Ordering::SeqCst)
    }

    /// Directory of a prepared variant, if the cache is disk-backed.
    pub fn variant_dir(&self, dataset: DatasetId, sequence: &str, key: &PrepKey) -> Option<PathBuf> {
        self.root
            .as_ref()
            .map(|r| r.join(dataset.to_string()).join(sequence).join(&key.0))
    }

    fn slot(&self, key: &PrepKey) -> Slot {
        let mut slots = self.slots.lock().expect("prep cache lock poisoned");
        slots.entry(key.clone()).or_default().clone()
    }

    /// Returns the prepared log for `(dataset, sequence, params)`, deriving it
    /// from `load_source()` only if no earlier call (or disk entry) has.
    pub fn prepare<F>(
        &self,
        dataset: DatasetId,
        sequence: &str,
        source_rate: f64,
        params: &PrepParams,
        load_source: F,
    ) -> Result<(PrepKey, Arc<SequenceLog>), PrepError>
    where
        F: FnOnce() -> Result<SequenceLog, PrepError>,
    {
        params.validate(source_rate)?;
        let key = prep_cache_key(dataset, sequence, params);
        let slot = self.slot(&key);
        let mut guard = slot.lock().expect("prep slot lock poisoned");
        if let Some(log) = guard.as_ref() {
            return Ok((key, log.clone()));
        }
        let dir = self.variant_dir(dataset, sequence, &key);
        if let Some(dir) = &dir {
            let log_dir = dir.join(crate::layout::LOG_DIR);
            if log_dir.join(logio::INDEX_FILE).exists() {
                let log = Arc::new(logio::read_log(&log_dir)?);
                *guard = Some(log.clone());
                return Ok((key, log));
            }
        }
        let source = load_source()?;
        let derived = Arc::new(prepare(&source, source_rate, params)?);
        self.transformations.fetch_add(1, Ordering::SeqCst);
        if let Some(dir) = &dir {
            persist(dir, &derived)?;
        }
        *guard = Some(derived.clone());
        Ok((key, derived))
    }
}

fn persist(dir: &Path, log: &SequenceLog) -> Result<(), PrepError> {
    let parent = dir
        .parent()
        .ok_or_else(|| PrepError::Io(format!("no parent for {}", dir.display())))?;
    fs::create_dir_all(parent).map_err(|e| PrepError::Io(e.to_string()))?;
    let staging = parent.join(format!(
        ".staging-{}-{}",
        dir.file_name().and_then(|s| s.to_str()).unwrap_or("log"),
        std::process::id()
    ));
    let _ = fs::remove_dir_all(&staging);
    logio::write_log(&staging.join(crate::layout::LOG_DIR), log)?;
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| PrepError::Io(e.to_string()))?;
    }
    fs::rename(&staging, dir).map_err(|e| PrepError::Io(e.to_string()))?;
    Ok(())
}
