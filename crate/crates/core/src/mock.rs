//! Mock algorithm adapter used for desk-scale campaigns.
//!
//! The adapter reads the unified configuration, plays back the mounted
//! sequence log (optionally accelerated), and echoes ground truth at every
//! camera frame with configurable perturbations. Recognized algorithm
//! parameters:
//!
//! | key            | effect                                                     |
//! |----------------|------------------------------------------------------------|
//! | `noise`        | Gaussian position noise per axis (m)                       |
//! | `offset`       | constant offset added along x (m)                          |
//! | `drift`        | uniform scale drift of the displacement from the start     |
//! | `coverage`     | fraction of frames that get a pose (leading frames)        |
//! | `seed`         | RNG seed; absent means non-deterministic                   |
//! | `busy_threads` | threads spinning during playback                           |
//! | `exit_code`    | exit with this code instead of finishing                   |
//! | `hang`         | never write the sentinel                                   |
//! | `tamper`       | write into the dataset mount                               |
//! | `nFeatures`    | noise is scaled by `1000 / nFeatures`                      |
//!
//! Noise is also scaled by `1 / sqrt(resolution_factor)`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{ParamValue, UnifiedConfig, RESOLUTION_FACTOR, SAVE_MAP};
use crate::dataprep;
use crate::executor::{ENV_CONFIG, ENV_DATASET_DIR, ENV_PLAYBACK_SPEED, ENV_RESULTS_DIR};
use crate::layout::{GROUND_TRUTH_FILE, LOG_DIR, SENTINEL_FILE, TRAJECTORY_FILE};
use crate::trajeval::{self, Pose, Trajectory};

pub const MAP_FILE: &str = "map.pcd";

#[derive(Debug, Clone, PartialEq)]
pub struct MockParams {
    pub noise: f64,
    pub offset: f64,
    pub drift: f64,
    pub coverage: f64,
    pub seed: Option<u64>,
    pub busy_threads: usize,
    pub exit_code: i32,
    pub hang: bool,
    pub tamper: bool,
    pub save_map: bool,
}

impl Default for MockParams {
    fn default() -> Self {
        Self {
            noise: 0.0,
            offset: 0.0,
            drift: 0.0,
            coverage: 1.0,
            seed: None,
            busy_threads: 0,
            exit_code: 0,
            hang: false,
            tamper: false,
            save_map: false,
        }
    }
}

impl MockParams {
    pub fn from_config(cfg: &UnifiedConfig) -> Self {
        let p = &cfg.algorithm_params;
        let real = |k: &str| p.get(k).and_then(ParamValue::as_f64);
        let int = |k: &str| p.get(k).and_then(ParamValue::as_i64);
        let flag = |k: &str| p.get(k).and_then(ParamValue::as_bool).unwrap_or(false);
        let mut noise = real("noise").unwrap_or(0.0);
        if let Some(n) = real("nFeatures").filter(|n| *n > 0.0) {
            noise *= 1000.0 / n;
        }
        if let Some(f) = cfg
            .dataset_params
            .get(RESOLUTION_FACTOR)
            .and_then(ParamValue::as_f64)
            .filter(|f| *f > 0.0)
        {
            noise /= f.sqrt();
        }
        Self {
            noise,
            offset: real("offset").unwrap_or(0.0),
            drift: real("drift").unwrap_or(0.0),
            coverage: real("coverage").unwrap_or(1.0).clamp(0.0, 1.0),
            seed: int("seed").map(|s| s as u64),
            busy_threads: int("busy_threads").unwrap_or(0).max(0) as usize,
            exit_code: int("exit_code").unwrap_or(0) as i32,
            hang: flag("hang"),
            tamper: flag("tamper"),
            save_map: cfg
                .dataset_params
                .get(SAVE_MAP)
                .and_then(ParamValue::as_bool)
                .unwrap_or(false),
        }
    }
}

/// Pose closest in time to `t`.
pub fn nearest<'a>(gt: &'a [Pose], t: f64) -> &'a Pose {
    let idx = gt.partition_point(|p| p.t < t);
    match (idx.checked_sub(1).map(|i| &gt[i]), gt.get(idx)) {
        (Some(a), Some(b)) => {
            if (t - a.t).abs() <= (b.t - t).abs() {
                a
            } else {
                b
            }
        }
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => unreachable!("trajectories are non-empty"),
    }
}

/// Perturbed ground truth at the given frame times.
pub fn estimate(gt: &Trajectory, frames: &[f64], params: &MockParams, rng: &mut impl Rng) -> Option<Trajectory> {
    let keep = (params.coverage * frames.len() as f64).round() as usize;
    let frames = &frames[..keep.min(frames.len())];
    let first = frames.first()?;
    let origin = nearest(gt.poses(), *first).position;
    let normal = Normal::new(0.0, params.noise.max(0.0)).ok()?;
    let mut poses: Vec<Pose> = Vec::with_capacity(frames.len());
    for &t in frames {
        if poses.last().is_some_and(|p| p.t >= t) {
            continue;
        }
        let truth = nearest(gt.poses(), t);
        let mut p = origin + (truth.position - origin) * (1.0 + params.drift);
        p.x += params.offset;
        if params.noise > 0.0 {
            p += Vector3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
        }
        poses.push(Pose::new(t, p, truth.orientation));
    }
    Trajectory::new(poses).ok()
}

#[derive(Debug, Clone)]
pub struct MockEnv {
    pub dataset_dir: PathBuf,
    pub results_dir: PathBuf,
    pub config_path: PathBuf,
    pub speed: f64,
}

impl MockEnv {
    /// Reads the sandbox environment; the first argument, when given,
    /// overrides the configuration path.
    pub fn from_env(args: &[String]) -> Result<Self, String> {
        let var = |k: &str| std::env::var(k).map_err(|_| format!("{k} is not set"));
        let config_path = match args.first() {
            Some(p) => PathBuf::from(p),
            None => PathBuf::from(var(ENV_CONFIG)?),
        };
        let speed = match std::env::var(ENV_PLAYBACK_SPEED) {
            Ok(s) => s.parse().map_err(|_| format!("bad {ENV_PLAYBACK_SPEED}: {s}"))?,
            Err(_) => 1.0,
        };
        Ok(Self {
            dataset_dir: var(ENV_DATASET_DIR)?.into(),
            results_dir: var(ENV_RESULTS_DIR)?.into(),
            config_path,
            speed,
        })
    }
}

fn spin(stop: Arc<AtomicBool>) {
    let mut x: u64 = 1;
    while !stop.load(Ordering::Relaxed) {
        for _ in 0..10_000 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        }
        std::hint::black_box(x);
    }
}

fn write_map(path: &Path, traj: &Trajectory) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "VERSION .7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1")?;
    writeln!(f, "WIDTH {}\nHEIGHT 1\nPOINTS {}\nDATA ascii", traj.len(), traj.len())?;
    for p in traj.poses() {
        writeln!(f, "{} {} {}", p.position.x, p.position.y, p.position.z)?;
    }
    Ok(())
}

/// Runs the adapter and returns its exit code.
pub fn run(env: &MockEnv) -> Result<i32, String> {
    let text = fs::read_to_string(&env.config_path).map_err(|e| e.to_string())?;
    let cfg = UnifiedConfig::from_yaml(&text).map_err(|e| e.to_string())?;
    let params = MockParams::from_config(&cfg);
    let log = dataprep::read_log(&env.dataset_dir.join(LOG_DIR)).map_err(|e| e.to_string())?;
    let gt_text = fs::read_to_string(env.dataset_dir.join(GROUND_TRUTH_FILE)).map_err(|e| e.to_string())?;
    let gt = trajeval::parse_trajectory(&gt_text).map_err(|e| e.to_string())?;

    if params.tamper {
        fs::write(env.dataset_dir.join("tampered"), b"x").map_err(|e| e.to_string())?;
    }

    let stop = Arc::new(AtomicBool::new(false));
    let workers: Vec<_> = (0..params.busy_threads)
        .map(|_| {
            let stop = stop.clone();
            std::thread::spawn(move || spin(stop))
        })
        .collect();
    let playback = Duration::from_secs_f64((log.duration() / env.speed.max(1e-9)).max(0.0));
    let start = Instant::now();
    while start.elapsed() < playback {
        std::thread::sleep((playback - start.elapsed()).min(Duration::from_millis(20)));
    }
    stop.store(true, Ordering::Relaxed);
    for w in workers {
        let _ = w.join();
    }

    let mut rng = match params.seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s),
        None => ChaCha8Rng::from_rng(&mut rand::rng()),
    };
    let est = estimate(&gt, &log.frame_times(), &params, &mut rng);
    if let Some(est) = &est {
        fs::write(env.results_dir.join(TRAJECTORY_FILE), trajeval::write_trajectory(est))
            .map_err(|e| e.to_string())?;
        if params.save_map {
            write_map(&env.results_dir.join(MAP_FILE), est).map_err(|e| e.to_string())?;
        }
    }
    if params.exit_code != 0 {
        return Ok(params.exit_code);
    }
    if params.hang {
        loop {
            std::thread::sleep(Duration::from_secs(3600));
        }
    }
    fs::write(env.results_dir.join(SENTINEL_FILE), b"").map_err(|e| e.to_string())?;
    Ok(0)
}
