//! Process isolation backends.

use std::fs::{self, File};
use std::io;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};

use super::ExecError;

/// Everything a backend needs to start one adapter.
#[derive(Debug, Clone)]
pub struct SpawnSpec {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub env: Vec<(String, String)>,
    pub dataset_mount: PathBuf,
    pub results_mount: PathBuf,
    pub config_path: PathBuf,
    /// Receives the adapter's stdout and stderr.
    pub log_path: PathBuf,
}

/// Cumulative resource usage of everything inside a sandbox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Usage {
    /// CPU seconds consumed so far (user + system, including reaped children).
    pub cpu_seconds: f64,
    /// Resident memory in MB.
    pub rss_mb: f64,
    /// Live (non-zombie) processes.
    pub processes: usize,
}

pub trait SandboxProcess: Send {
    fn id(&self) -> String;
    /// Exit code of the entry process once it has exited; signals map to `-signo`.
    fn try_wait(&mut self) -> io::Result<Option<i32>>;
    /// `None` once nothing is left running.
    fn usage(&self) -> Option<Usage>;
    /// Kills every process of the sandbox and reaps the entry process.
    fn terminate(&mut self);
    /// Live processes still attributed to the sandbox.
    fn live_processes(&self) -> usize;
}

pub trait Sandbox: Send + Sync {
    fn kind(&self) -> &'static str;
    fn spawn(&self, spec: &SpawnSpec) -> Result<Box<dyn SandboxProcess>, ExecError>;
}

/// Local subprocess in its own process group, working directory set to the
/// results mount. Mount visibility is by convention (environment variables);
/// dataset integrity is verified by content hash around the run.
#[derive(Debug, Default, Clone)]
pub struct LocalSandbox;

impl Sandbox for LocalSandbox {
    fn kind(&self) -> &'static str {
        "local"
    }

    fn spawn(&self, spec: &SpawnSpec) -> Result<Box<dyn SandboxProcess>, ExecError> {
        let spawn_err = |e: io::Error| ExecError::SandboxSpawnFailure(format!("{}: {e}", spec.program.display()));
        let log = File::create(&spec.log_path).map_err(spawn_err)?;
        let log_err = log.try_clone().map_err(spawn_err)?;
        let child = Command::new(&spec.program)
            .args(&spec.args)
            .arg(&spec.config_path)
            .envs(spec.env.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .current_dir(&spec.results_mount)
            .stdin(Stdio::null())
            .stdout(Stdio::from(log))
            .stderr(Stdio::from(log_err))
            .process_group(0)
            .spawn()
            .map_err(spawn_err)?;
        let pgid = child.id() as i32;
        Ok(Box::new(LocalProcess {
            child,
            pgid,
            reaped: false,
        }))
    }
}

struct LocalProcess {
    child: Child,
    pgid: i32,
    reaped: bool,
}

impl SandboxProcess for LocalProcess {
    fn id(&self) -> String {
        format!("local-{}", self.pgid)
    }

    fn try_wait(&mut self) -> io::Result<Option<i32>> {
        let status = self.child.try_wait()?;
        if status.is_some() {
            self.reaped = true;
        }
        Ok(status.map(|s| s.code().or_else(|| s.signal().map(|n| -n)).unwrap_or(-1)))
    }

    fn usage(&self) -> Option<Usage> {
        let usage = group_usage(self.pgid);
        (usage.processes > 0).then_some(usage)
    }

    fn terminate(&mut self) {
        // SAFETY: killpg only sends a signal; a stale group id yields ESRCH.
        unsafe {
            libc::killpg(self.pgid, libc::SIGKILL);
        }
        if !self.reaped {
            let _ = self.child.wait();
            self.reaped = true;
        }
    }

    fn live_processes(&self) -> usize {
        group_usage(self.pgid).processes
    }
}

impl Drop for LocalProcess {
    fn drop(&mut self) {
        self.terminate();
    }
}

/// Stub for an external container runtime; the desk build has none.
#[derive(Debug, Clone)]
pub struct ContainerSandbox {
    pub runtime: String,
}

impl Sandbox for ContainerSandbox {
    fn kind(&self) -> &'static str {
        "container"
    }

    fn spawn(&self, spec: &SpawnSpec) -> Result<Box<dyn SandboxProcess>, ExecError> {
        Err(ExecError::SandboxSpawnFailure(format!(
            "container runtime {:?} is not available (image {})",
            self.runtime,
            spec.program.display()
        )))
    }
}

fn clock_ticks() -> f64 {
    // SAFETY: sysconf has no preconditions.
    let t = unsafe { libc::sysconf(libc::_SC_CLK_TCK) };
    if t > 0 {
        t as f64
    } else {
        100.0
    }
}

fn page_size() -> f64 {
    // SAFETY: sysconf has no preconditions.
    let p = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
    if p > 0 {
        p as f64
    } else {
        4096.0
    }
}

/// Fields after the command name of `/proc/<pid>/stat`, starting at `state`.
fn stat_fields(text: &str) -> Option<Vec<&str>> {
    let close = text.rfind(')')?;
    Some(text[close + 1..].split_whitespace().collect())
}

/// Sums usage over every process whose group is `pgid`.
pub fn group_usage(pgid: i32) -> Usage {
    let mut ticks = 0u64;
    let mut pages = 0u64;
    let mut processes = 0usize;
    let Ok(entries) = fs::read_dir("/proc") else {
        return Usage {
            cpu_seconds: 0.0,
            rss_mb: 0.0,
            processes: 0,
        };
    };
    for entry in entries.flatten() {
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if !name.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        let Ok(text) = fs::read_to_string(entry.path().join("stat")) else {
            continue;
        };
        let Some(f) = stat_fields(&text) else { continue };
        if f.len() < 22 || f[2].parse::<i32>().ok() != Some(pgid) {
            continue;
        }
        let num = |i: usize| f[i].parse::<u64>().unwrap_or(0);
        ticks += num(11) + num(12) + num(13) + num(14);
        if f[0] != "Z" && f[0] != "X" {
            processes += 1;
            pages += num(21);
        }
    }
    Usage {
        cpu_seconds: ticks as f64 / clock_ticks(),
        rss_mb: pages as f64 * page_size() / (1024.0 * 1024.0),
        processes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_parsing_handles_parens_in_name() {
        let f = stat_fields("42 (a (b) c) S 1 42 42 0 -1 0 0 0 0 0 7 3 0 0 20 0 1 0 100 0 55").unwrap();
        assert_eq!(f[0], "S");
        assert_eq!(f[2], "42");
        assert_eq!(f[11], "7");
        assert_eq!(f[21], "55");
    }

    #[test]
    fn own_group_is_visible() {
        // SAFETY: getpgrp has no preconditions.
        let pgid = unsafe { libc::getpgrp() };
        assert!(group_usage(pgid).processes >= 1);
    }
}
