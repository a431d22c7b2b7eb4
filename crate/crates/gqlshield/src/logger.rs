//! Batched JSON-lines event log.
//!
//! Appenders fill an in-memory batch. A full batch (N entries) is handed to
//! the single flusher thread as one write; a partial batch is written when T
//! elapses or on shutdown. Events that fail to serialize are written as an
//! object with an `error` field instead of being dropped.

use std::collections::VecDeque;
use std::fmt::Debug;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::Serialize;

pub const DEFAULT_BATCH: usize = 100;
pub const DEFAULT_INTERVAL: Duration = Duration::from_millis(500);
pub const LOG_PATH_ENV: &str = "GQLSHIELD_LOG_PATH";

#[derive(Default)]
struct State {
    current: Vec<String>,
    full: VecDeque<Vec<String>>,
    shutdown: bool,
}

struct Inner {
    state: Mutex<State>,
    wake: Condvar,
    batch: usize,
    flushes: AtomicU64,
    written: AtomicU64,
}

pub struct BatchLogger {
    inner: Arc<Inner>,
    path: PathBuf,
    flusher: Option<JoinHandle<()>>,
}

impl BatchLogger {
    pub fn open(path: &Path, batch: usize, interval: Duration) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let inner = Arc::new(Inner {
            state: Mutex::default(),
            wake: Condvar::new(),
            batch: batch.max(1),
            flushes: AtomicU64::new(0),
            written: AtomicU64::new(0),
        });
        let worker = inner.clone();
        let flusher = std::thread::Builder::new().name("gqlshield-log".into()).spawn(move || run_flusher(&worker, file, interval))?;
        Ok(Self { inner, path: path.to_path_buf(), flusher: Some(flusher) })
    }

    /// Opens the path named by `GQLSHIELD_LOG_PATH` with default batching, if set.
    pub fn from_env() -> std::io::Result<Option<Self>> {
        match std::env::var_os(LOG_PATH_ENV) {
            Some(p) if !p.is_empty() => Self::open(Path::new(&p), DEFAULT_BATCH, DEFAULT_INTERVAL).map(Some),
            _ => Ok(None),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn log<T: Serialize + Debug>(&self, event: &T) {
        let line = serde_json::to_string(event).unwrap_or_else(|e| {
            serde_json::json!({ "error": format!("event not serializable: {e}"), "event": format!("{event:?}") }).to_string()
        });
        let mut st = self.inner.state.lock().expect("log state");
        st.current.push(line);
        if st.current.len() >= self.inner.batch {
            let batch = std::mem::take(&mut st.current);
            st.full.push_back(batch);
            self.inner.wake.notify_one();
        }
    }

    /// Number of writes performed so far.
    pub fn flushes(&self) -> u64 {
        self.inner.flushes.load(Ordering::Acquire)
    }

    pub fn written(&self) -> u64 {
        self.inner.written.load(Ordering::Acquire)
    }

    /// Flushes everything buffered and stops the flusher.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(h) = self.flusher.take() {
            self.inner.state.lock().expect("log state").shutdown = true;
            self.inner.wake.notify_one();
            let _ = h.join();
        }
    }
}

impl Drop for BatchLogger {
    fn drop(&mut self) {
        self.stop();
    }
}

fn write_batch(inner: &Inner, out: &mut BufWriter<File>, lines: &[String]) {
    if lines.is_empty() {
        return;
    }
    let mut res = lines.iter().try_for_each(|l| writeln!(out, "{l}"));
    res = res.and_then(|_| out.flush());
    if let Err(e) = res {
        tracing::error!("event log write failed: {e}");
    }
    inner.written.fetch_add(lines.len() as u64, Ordering::AcqRel);
    inner.flushes.fetch_add(1, Ordering::AcqRel);
}

fn run_flusher(inner: &Inner, file: File, interval: Duration) {
    let mut out = BufWriter::new(file);
    let mut next_tick = Instant::now() + interval;
    loop {
        let mut st = inner.state.lock().expect("log state");
        while st.full.is_empty() && !st.shutdown && Instant::now() < next_tick {
            let left = next_tick.saturating_duration_since(Instant::now());
            st = inner.wake.wait_timeout(st, left).expect("log state").0;
        }
        let mut batches: Vec<Vec<String>> = st.full.drain(..).collect();
        let timer = Instant::now() >= next_tick;
        let shutdown = st.shutdown;
        if timer || shutdown {
            batches.push(std::mem::take(&mut st.current));
        }
        drop(st);
        for b in &batches {
            write_batch(inner, &mut out, b);
        }
        if timer {
            next_tick = Instant::now() + interval;
        }
        if shutdown {
            return;
        }
    }
}
