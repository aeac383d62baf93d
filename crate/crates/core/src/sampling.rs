//! Seeded state, space and time samplers shared by the audits.
//!
//! Every sample index owns its own ChaCha stream, so results do not depend on
//! the number of worker threads or the order in which samples are drawn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::State;
use crate::systems::BalanceLaw;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Where states are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// Axis-aligned box `lo ≤ U ≤ hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Ball of the given radius about the origin, intersected with the
    /// per-component floors.
    Ball { radius: f64 },
}

/// Uniform sampler on balls, annuli and boxes with optional per-component
/// lower floors (e.g. a density floor). Draws are rejected until they pass
/// the floors and the system's admissibility check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSampler {
    pub n: usize,
    /// `floors[i]` bounds component `i` from below; `-inf` means unconstrained.
    pub floors: Vec<f64>,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_attempts() -> usize {
    10_000
}

impl StateSampler {
    pub fn unconstrained(n: usize) -> Self {
        StateSampler {
            n,
            floors: vec![f64::NEG_INFINITY; n],
            max_attempts: default_attempts(),
        }
    }

    pub fn with_floor(mut self, component: usize, floor: f64) -> Self {
        self.floors[component] = floor;
        self
    }

    fn accept(&self, spec: &dyn BalanceLaw, u: &State, x: &[f64], t: f64) -> bool {
        u.iter().zip(&self.floors).all(|(v, f)| v >= f) && spec.check(u, x, t).is_ok()
    }

    fn direction(&self, rng: &mut ChaCha8Rng) -> State {
        loop {
            let v = State::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = v.norm();
            if norm > 1e-12 {
                return v / norm;
            }
        }
    }

    /// Uniform on `r_in ≤ |U| ≤ r_out`.
    pub fn annulus(
        &self,
        spec: &dyn BalanceLaw,
        rng: &mut ChaCha8Rng,
        r_in: f64,
        r_out: f64,
        x: &[f64],
        t: f64,
    ) -> Result<State> {
        let d = self.n as f64;
        let (lo, hi) = (r_in.powf(d), r_out.powf(d));
        for _ in 0..self.max_attempts {
            let r = (lo + rng.random::<f64>() * (hi - lo)).powf(1.0 / d);
            let u = self.direction(rng) * r;
            if self.accept(spec, &u, x, t) {
                return Ok(u);
            }
        }
        Err(Error::Coverage(format!(
            "no admissible state found in shell {r_in} ≤ |U| ≤ {r_out} after {} draws",
            self.max_attempts
        )))
    }

    pub fn draw(&self, spec: &dyn BalanceLaw, rng: &mut ChaCha8Rng, region: &Region, x: &[f64], t: f64) -> Result<State> {
        match region {
            Region::Ball { radius } => self.annulus(spec, rng, 0.0, *radius, x, t),
            Region::Box { lo, hi } => {
                for _ in 0..self.max_attempts {
                    let u = State::from_fn(self.n, |i, _| lo[i] + rng.random::<f64>() * (hi[i] - lo[i]));
                    if self.accept(spec, &u, x, t) {
                        return Ok(u);
                    }
                }
                Err(Error::Coverage("no admissible state found in sampling box".into()))
            }
        }
    }
}

/// Rectangle `[x_lo, x_hi] × [t_lo, t_hi]` of space-time points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTime {
    pub x_lo: f64,
    pub x_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl SpaceTime {
    pub fn torus(length: f64, t_end: f64) -> Self {
        SpaceTime {
            x_lo: 0.0,
            x_hi: length,
            t_lo: 0.0,
            t_hi: t_end,
        }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let x = self.x_lo + rng.random::<f64>() * (self.x_hi - self.x_lo);
        let t = self.t_lo + rng.random::<f64>() * (self.t_hi - self.t_lo);
        (x, t)
    }
}
