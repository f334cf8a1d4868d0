use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Every parameter a run can take. Unused fields stay `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub set: Option<String>,
    pub mu0: Option<String>,
    pub generation: Option<i32>,
    pub grid: Option<(usize, usize)>,
    pub tau0: Option<f64>,
    pub safety: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub both_kernels: bool,
    pub p4_hypothesis: bool,
    pub kernel: Option<String>,
    pub points: Vec<Vec<f64>>,
    pub lx: Option<f64>,
    pub lt: Option<f64>,
    pub r: Option<f64>,
    pub x_range: Option<(f64, f64)>,
    pub t_range: Option<(f64, f64)>,
    pub iters: Option<usize>,
    pub theta: Option<f64>,
    pub refine: Option<u32>,
    pub suite: Option<String>,
}

pub const TOOL: &str = "calcap";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn positive(name: &str, v: Option<f64>) -> Result<(), String> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(format!("--{name} must be positive and finite, got {x}")),
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if let Some(g) = self.generation {
            if !(-4..=8).contains(&g) {
                return Err(format!("--generation must lie in -4..=8, got {g}"));
            }
        }
        if let Some((w, h)) = self.grid {
            if !(2..=4001).contains(&w) || !(2..=4001).contains(&h) {
                return Err(format!("--grid sides must lie in 2..=4001, got {w}x{h}"));
            }
        }
        positive("tau0", self.tau0)?;
        positive("lx", self.lx)?;
        positive("lt", self.lt)?;
        positive("r", self.r)?;
        positive("theta", self.theta)?;
        if let Some(s) = self.safety {
            if !(0.0..1.0).contains(&s) {
                return Err(format!("--safety must lie in [0, 1), got {s}"));
            }
        }
        if let Some(n) = self.iters {
            if !(1..=100_000).contains(&n) {
                return Err(format!("--iters must lie in 1..=100000, got {n}"));
            }
        }
        if let Some(k) = self.refine {
            if !(1..=6).contains(&k) {
                return Err(format!("--refine must lie in 1..=6, got {k}"));
            }
        }
        for (name, range) in [("x-range", self.x_range), ("t-range", self.t_range)] {
            if let Some((a, b)) = range {
                if !(a < b && a.is_finite() && b.is_finite()) {
                    return Err(format!("--{name} needs a < b, got {a},{b}"));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the JSON form of the config.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Wrapper written around every JSON result.
#[derive(Serialize)]
pub struct Artifact<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub config: &'a RunConfig,
    pub result: T,
}

impl<'a, T: Serialize> Artifact<'a, T> {
    pub fn new(config: &'a RunConfig, result: T) -> Self {
        Artifact { tool: TOOL, version: VERSION, config_hash: config.hash(), config, result }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_every_field() {
        let a = RunConfig { command: "variational".into(), seed: Some(1), ..Default::default() };
        let b = RunConfig { seed: Some(2), ..a.clone() };
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn ranges_are_checked() {
        let ok = RunConfig { generation: Some(4), tau0: Some(0.1), ..Default::default() };
        assert!(ok.validate().is_ok());
        assert!(RunConfig { generation: Some(12), ..Default::default() }.validate().is_err());
        assert!(RunConfig { tau0: Some(-1.0), ..Default::default() }.validate().is_err());
        assert!(RunConfig { safety: Some(1.0), ..Default::default() }.validate().is_err());
        assert!(RunConfig { x_range: Some((1.0, 0.0)), ..Default::default() }.validate().is_err());
    }
}
