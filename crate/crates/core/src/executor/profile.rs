use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const PROFILE_HEADER: &str = "t,cpu_cores,ram_mb";

/// One profiler reading. `cpu` is summed over cores (1.84 = 184 % of one core).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceSample {
    /// Seconds since launch.
    pub t: f64,
    pub cpu: f64,
    /// Resident MB.
    pub ram: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub cpu_mean: f64,
    pub cpu_max: f64,
    pub ram_max: f64,
}

impl ProfileSummary {
    pub fn from_samples(samples: &[ResourceSample]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let n = samples.len() as f64;
        Self {
            cpu_mean: samples.iter().map(|s| s.cpu).sum::<f64>() / n,
            cpu_max: samples.iter().map(|s| s.cpu).fold(0.0, f64::max),
            ram_max: samples.iter().map(|s| s.ram).fold(0.0, f64::max),
        }
    }
}

pub fn format_sample(s: &ResourceSample) -> String {
    format!("{},{},{}", s.t, s.cpu, s.ram)
}

pub fn write_header(f: &mut File) -> io::Result<()> {
    writeln!(f, "{PROFILE_HEADER}")?;
    f.flush()
}

pub fn read_profile(path: &Path) -> io::Result<Vec<ResourceSample>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<f64> = line
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        if parts.len() != 3 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("line {}: expected 3 columns", i + 1),
            ));
        }
        out.push(ResourceSample {
            t: parts[0],
            cpu: parts[1],
            ram: parts[2],
        });
    }
    Ok(out)
}

/// Two-column plot table (`t,<column>`).
pub fn write_plot(path: &Path, column: &str, samples: &[ResourceSample], pick: fn(&ResourceSample) -> f64) -> io::Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "t,{column}")?;
    for s in samples {
        writeln!(f, "{},{}", s.t, pick(s))?;
    }
    Ok(())
}
