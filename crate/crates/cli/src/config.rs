use lk_core::{LkError, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Everything that determines a run's output. Echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub input: String,
    pub i: Vec<usize>,
    pub eps: Vec<f64>,
    pub max_nodes: usize,
    pub format: Option<Format>,
    pub seed: u64,
    pub samples: u64,
    /// Not echoed: results do not depend on it.
    #[serde(skip)]
    pub workers: usize,
}

pub const MAX_WORKERS: usize = 256;

/// Default collapse schedule, 2^-2 down to 2^-9.
pub const DEFAULT_SCHEDULE: &str = "0.25:0.5:8";

/// Parses `a,b,c` or the geometric form `start:ratio:count`.
pub fn parse_eps(spec: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| LkError::invalid(format!("--eps {spec}: {what}"));
    let values: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:ratio:count"));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad("start is not a number"))?;
        let ratio: f64 = parts[1].trim().parse().map_err(|_| bad("ratio is not a number"))?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad("count is not an integer"))?;
        if count == 0 || count > 64 {
            return Err(bad("count must lie in 1..=64"));
        }
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(bad("ratio must be positive"));
        }
        let mut v = Vec::with_capacity(count);
        let mut x = start;
        for _ in 0..count {
            v.push(x);
            x *= ratio;
        }
        v
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(&format!("`{s}` is not a number"))))
            .collect::<Result<_>>()?
    };
    if values.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(bad("values must be finite and non-negative"));
    }
    Ok(values)
}

impl RunConfig {
    pub fn check(&self) -> Result<()> {
        if self.workers == 0 || self.workers > MAX_WORKERS {
            return Err(LkError::invalid(format!(
                "--workers {} outside 1..={MAX_WORKERS}",
                self.workers
            )));
        }
        if self.max_nodes == 0 {
            return Err(LkError::invalid("LK_MAX_NODES must be positive"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_schedule() {
        let v = parse_eps(DEFAULT_SCHEDULE).unwrap();
        assert_eq!(v.len(), 8);
        assert_eq!(v[0], 0.25);
        assert_eq!(v[7], 2f64.powi(-9));
    }

    #[test]
    fn list_schedule() {
        assert_eq!(parse_eps("0.1, 0.05").unwrap(), vec![0.1, 0.05]);
        assert!(parse_eps("0.1,x").is_err());
        assert!(parse_eps("1:0.5").is_err());
        assert!(parse_eps("-1").is_err());
        assert!(parse_eps("1:0.5:0").is_err());
    }
}
