//! Random posets with a planted Pareto front.
//!
//! `p` Pareto arms sit above `w` disjoint chains of `h − 1` arms each. The top
//! of every chain is placed under a random nonempty subset of the Pareto
//! arms, and every strictly comparable pair gets an independent gap drawn
//! uniformly from `[gamma_low, gamma_high)`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poset::{Arm, PosetModel};

pub const DEFAULT_GAMMA_LOW: f64 = 0.05;
pub const DEFAULT_GAMMA_HIGH: f64 = 0.45;

fn default_gamma_low() -> f64 {
    DEFAULT_GAMMA_LOW
}

fn default_gamma_high() -> f64 {
    DEFAULT_GAMMA_HIGH
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Size of the Pareto front.
    pub pareto: usize,
    /// Number of chains hanging below the front.
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_gamma_low")]
    pub gamma_low: f64,
    #[serde(default = "default_gamma_high")]
    pub gamma_high: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(pareto: usize, width: usize, height: usize, seed: u64) -> Self {
        GeneratorConfig {
            pareto,
            width,
            height,
            gamma_low: DEFAULT_GAMMA_LOW,
            gamma_high: DEFAULT_GAMMA_HIGH,
            seed,
        }
    }

    /// `K = p + w(h − 1)`.
    pub fn arm_count(&self) -> usize {
        self.pareto + self.width * self.height.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pareto == 0 {
            return Err(Error::InvalidParameter("Pareto size must be at least 1".into()));
        }
        if self.width < self.pareto {
            return Err(Error::InvalidParameter(format!(
                "width {} must be at least the Pareto size {}",
                self.width, self.pareto
            )));
        }
        if self.height == 0 {
            return Err(Error::InvalidParameter("height must be at least 1".into()));
        }
        if !(self.gamma_low > 0.0 && self.gamma_low < self.gamma_high && self.gamma_high < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "gap bounds must satisfy 0 < low < high < 0.5, got [{}, {}]",
                self.gamma_low, self.gamma_high
            )));
        }
        Ok(())
    }
}

/// Draws a poset from `config`.
///
/// Arms `0..p` are the Pareto front; chain `c` occupies
/// `p + c(h−1) .. p + (c+1)(h−1)` from top to bottom.
pub fn generate_poset(config: &GeneratorConfig) -> Result<PosetModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let p = config.pareto;
    let len = config.height - 1;
    let k = config.arm_count();

    // Closed order built directly: a Pareto arm above a chain top is above
    // the whole chain, and chain members are ordered top to bottom.
    let mut above = vec![false; k * k];
    for c in 0..if len == 0 { 0 } else { config.width } {
        let first = p + c * len;
        let size = rng.gen_range(1..=p);
        for parent in sample(&mut rng, p, size) {
            for j in first..first + len {
                above[parent * k + j] = true;
            }
        }
        for i in first..first + len {
            for j in i + 1..first + len {
                above[i * k + j] = true;
            }
        }
    }

    let mut relations: Vec<(Arm, Arm)> = Vec::new();
    let mut gammas: Vec<(Arm, Arm, f64)> = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if above[i * k + j] {
                relations.push((i, j));
                gammas.push((i, j, rng.gen_range(config.gamma_low..config.gamma_high)));
            }
        }
    }
    PosetModel::new(k, relations, gammas)
}
