use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::State;
use crate::sampling::{stream_rng, Region, SpaceTime, StateSampler};
use crate::systems::BalanceLaw;

#[derive(Debug, Clone, PartialEq)]
pub struct CloudPoint {
    pub u: State,
    pub x: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudPair {
    pub u: State,
    pub ub: State,
    pub x: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    pub radius: f64,
    pub points: Vec<CloudPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudConfig {
    /// Bounded region standing in for `B_M`.
    pub region: Region,
    pub window: SpaceTime,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Far-field shell radii for the growth trends.
    #[serde(default = "default_shells")]
    pub shells: Vec<f64>,
    #[serde(default = "default_shell_samples")]
    pub shell_samples: usize,
    /// Relative thickness of each far-field shell.
    #[serde(default = "default_shell_width")]
    pub shell_width: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    10_000
}
fn default_pairs() -> usize {
    2_000
}
fn default_shells() -> Vec<f64> {
    vec![5.0, 10.0, 20.0, 40.0]
}
fn default_shell_samples() -> usize {
    256
}
fn default_shell_width() -> f64 {
    0.1
}

impl CloudConfig {
    pub fn new(region: Region, window: SpaceTime) -> Self {
        CloudConfig {
            region,
            window,
            samples: default_samples(),
            pairs: default_pairs(),
            shells: default_shells(),
            shell_samples: default_shell_samples(),
            shell_width: default_shell_width(),
            seed: 0,
        }
    }
}

/// States stratified into a bounded region plus far-field shells, each paired
/// with a space-time point, and `(U, Ū)` pairs inside the bounded region.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCloud {
    pub seed: u64,
    pub points: Vec<CloudPoint>,
    pub pairs: Vec<CloudPair>,
    pub shells: Vec<Shell>,
}

// stream offsets keep the three families independent
const PAIR_STREAMS: u64 = 1 << 40;
const SHELL_STREAMS: u64 = 1 << 41;

impl SampleCloud {
    pub fn draw(spec: &dyn BalanceLaw, sampler: &StateSampler, cfg: &CloudConfig) -> Result<Self> {
        let seed = cfg.seed;
        let points = (0..cfg.samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(seed, i as u64);
                let (x, t) = cfg.window.draw(&mut rng);
                let u = sampler.draw(spec, &mut rng, &cfg.region, &[x], t)?;
                Ok(CloudPoint { u, x, t })
            })
            .collect::<Result<Vec<_>>>()?;
        let pairs = (0..cfg.pairs)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(seed, PAIR_STREAMS + i as u64);
                let (x, t) = cfg.window.draw(&mut rng);
                let ub = sampler.draw(spec, &mut rng, &cfg.region, &[x], t)?;
                // half of the pairs sit close to the diagonal
                let u = if i % 2 == 0 {
                    let s = 10f64.powf(-1.0 - 2.0 * rng.random::<f64>());
                    let dir = sampler.draw(spec, &mut rng, &cfg.region, &[x], t)?;
                    let cand = &ub + (dir - &ub) * s;
                    if spec.check(&cand, &[x], t).is_ok() {
                        cand
                    } else {
                        sampler.draw(spec, &mut rng, &cfg.region, &[x], t)?
                    }
                } else {
                    sampler.draw(spec, &mut rng, &cfg.region, &[x], t)?
                };
                Ok(CloudPair { u, ub, x, t })
            })
            .collect::<Result<Vec<_>>>()?;
        let shells = cfg
            .shells
            .iter()
            .enumerate()
            .map(|(k, &radius)| {
                let pts = (0..cfg.shell_samples)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = stream_rng(seed, SHELL_STREAMS + ((k as u64) << 24) + i as u64);
                        let (x, t) = cfg.window.draw(&mut rng);
                        let u = sampler.annulus(spec, &mut rng, radius, radius * (1.0 + cfg.shell_width), &[x], t)?;
                        Ok(CloudPoint { u, x, t })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Shell { radius, points: pts })
            })
            .collect::<Result<Vec<_>>>()?;
        let cloud = SampleCloud {
            seed,
            points,
            pairs,
            shells,
        };
        if cloud.points.is_empty() {
            return Err(Error::Coverage("bounded region has no samples".into()));
        }
        if let Some(s) = cloud.shells.iter().find(|s| s.points.is_empty()) {
            return Err(Error::Coverage(format!("shell at |U| = {} is empty", s.radius)));
        }
        Ok(cloud)
    }
}
