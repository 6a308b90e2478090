//! Subcarrier frequency plans.
//!
//! All center frequencies are odd-integer multiples of the symbol rate,
//! drawn from a superset of `K*u` candidate positions spanning the channel
//! bandwidth. A plan selects `K` of them by one of the placement methods.

use crate::config::WaveformConfig;
use crate::error::{Error, Result};
use crate::rng::rng_from;
use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Subcarrier placement methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    Contiguous,
    Uniform,
    SegmentedRandom,
    Random,
}

impl std::fmt::Display for Placement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Placement::Contiguous => "contiguous",
            Placement::Uniform => "uniform",
            Placement::SegmentedRandom => "segmented-random",
            Placement::Random => "random",
        };
        f.write_str(s)
    }
}

/// A set of `K` subcarrier center frequencies with their spreading gains.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierPlan {
    /// Number of subcarriers.
    pub subcarriers: usize,
    /// Bandwidth expansion factor the plan was drawn under.
    pub expansion: usize,
    /// Symbol rate in Hz.
    pub symbol_rate: f64,
    /// Selected superset indices, ascending. Index `k` maps to the center
    /// frequency `(2k - K*u + 1) * f_b`.
    pub superset_indices: Vec<usize>,
    /// Unit-magnitude complex spreading gains, one per subcarrier.
    pub gains: Vec<Complex64>,
    pub placement: Placement,
    /// Seed used to draw the plan (0 for deterministic placements).
    pub seed: u64,
}

impl SubcarrierPlan {
    /// Build a plan from explicit superset indices.
    pub fn from_superset_indices(
        cfg: &WaveformConfig,
        mut indices: Vec<usize>,
        placement: Placement,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        indices.sort_unstable();
        let plan = Self {
            subcarriers: cfg.subcarriers,
            expansion: cfg.expansion,
            symbol_rate: cfg.symbol_rate,
            superset_indices: indices,
            gains: vec![Complex64::new(1.0, 0.0); cfg.subcarriers],
            placement,
            seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Center frequency for superset index `k` under this plan's geometry.
    pub fn superset_frequency(&self, k: usize) -> f64 {
        (2.0 * k as f64 - (self.subcarriers * self.expansion) as f64 + 1.0) * self.symbol_rate
    }

    /// Ordered center frequencies in Hz.
    pub fn frequencies(&self) -> Vec<f64> {
        self.superset_indices.iter().map(|&k| self.superset_frequency(k)).collect()
    }

    /// Width from the leftmost to the rightmost occupied frequency.
    pub fn frequency_extent(&self) -> f64 {
        let f = self.frequencies();
        f[f.len() - 1] - f[0] + 2.0 * self.symbol_rate
    }

    /// The contiguous plan this one remaps onto: same gains, same order,
    /// center frequencies `(2k - K + 1) * f_b` at expansion 1.
    pub fn contiguous_equivalent(&self) -> SubcarrierPlan {
        SubcarrierPlan {
            subcarriers: self.subcarriers,
            expansion: 1,
            symbol_rate: self.symbol_rate,
            superset_indices: (0..self.subcarriers).collect(),
            gains: self.gains.clone(),
            placement: Placement::Contiguous,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.subcarriers;
        let total = k * self.expansion;
        if self.superset_indices.len() != k {
            return Err(Error::LengthMismatch { expected: k, got: self.superset_indices.len() });
        }
        if self.gains.len() != k {
            return Err(Error::LengthMismatch { expected: k, got: self.gains.len() });
        }
        for w in self.superset_indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidConfig("superset indices must be strictly ascending".into()));
            }
        }
        if let Some(&last) = self.superset_indices.last() {
            if last >= total {
                return Err(Error::InvalidConfig(format!(
                    "superset index {last} outside superset of size {total}"
                )));
            }
        }
        for g in &self.gains {
            if (g.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig("spreading gains must have unit magnitude".into()));
            }
        }
        Ok(())
    }

    /// Matching waveform config (alphabet and filter fields left at defaults).
    pub fn config(&self) -> WaveformConfig {
        WaveformConfig {
            subcarriers: self.subcarriers,
            expansion: self.expansion,
            symbol_rate: self.symbol_rate,
            ..WaveformConfig::default()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = PlanJson::from(self);
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PlanJson = serde_json::from_str(text)?;
        doc.into_plan()
    }

    /// A stable hash of the plan contents, used to tag waveform exports.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x100000001b3);
        };
        mix(self.subcarriers as u64);
        mix(self.expansion as u64);
        mix(self.symbol_rate.to_bits());
        for &i in &self.superset_indices {
            mix(i as u64);
        }
        for g in &self.gains {
            mix(g.re.to_bits());
            mix(g.im.to_bits());
        }
        h
    }
}

/// Contiguous plan per the closed-form frequency set, all-ones gains.
pub fn build_contiguous_plan(cfg: &WaveformConfig) -> Result<SubcarrierPlan> {
    cfg.validate()?;
    let k = cfg.subcarriers;
    let u = cfg.expansion;
    // Contiguous frequencies (2j - K + 1) f_b sit at superset indices
    // j + K(u-1)/2 whenever K(u-1) is even; otherwise the contiguous grid
    // does not align with the expanded superset and we represent the plan
    // in its own u=1 geometry.
    if (k * (u - 1)) % 2 == 0 {
        let shift = k * (u - 1) / 2;
        SubcarrierPlan::from_superset_indices(
            cfg,
            (0..k).map(|j| j + shift).collect(),
            Placement::Contiguous,
            0,
        )
    } else {
        let mut cfg1 = *cfg;
        cfg1.expansion = 1;
        SubcarrierPlan::from_superset_indices(&cfg1, (0..k).collect(), Placement::Contiguous, 0)
    }
}

/// Draw a noncontiguous plan with the given placement method.
///
/// The uniform method uses offset 0; see [`place_subcarriers_with_offset`].
pub fn place_subcarriers(
    cfg: &WaveformConfig,
    method: Placement,
    rng_seed: u64,
) -> Result<SubcarrierPlan> {
    place_subcarriers_with_offset(cfg, method, rng_seed, 0)
}

/// Draw a plan; `offset` selects the uniform-placement starting index in `[0, u)`.
pub fn place_subcarriers_with_offset(
    cfg: &WaveformConfig,
    method: Placement,
    rng_seed: u64,
    offset: usize,
) -> Result<SubcarrierPlan> {
    cfg.validate()?;
    let k = cfg.subcarriers;
    let u = cfg.expansion;
    let indices: Vec<usize> = match method {
        Placement::Contiguous => return build_contiguous_plan(cfg),
        Placement::Uniform => {
            if offset >= u {
                return Err(Error::InvalidConfig(format!(
                    "uniform offset {offset} must be below expansion {u}"
                )));
            }
            (0..k).map(|j| offset + j * u).collect()
        }
        Placement::SegmentedRandom => {
            let mut rng = rng_from(rng_seed);
            (0..k).map(|j| j * u + rng.gen_range(0..u)).collect()
        }
        Placement::Random => {
            let mut rng = rng_from(rng_seed);
            let mut picks = sample_indices(&mut rng, k * u, k).into_vec();
            picks.sort_unstable();
            picks
        }
    };
    SubcarrierPlan::from_superset_indices(cfg, indices, method, rng_seed)
}

#[derive(Serialize, Deserialize)]
struct GainJson {
    re: f64,
    im: f64,
}

/// On-disk plan document; this is the unit of exchange between the
/// transmitter and receiver configuration.
#[derive(Serialize, Deserialize)]
struct PlanJson {
    #[serde(rename = "K")]
    subcarriers: usize,
    u: usize,
    f_b: f64,
    placement: Placement,
    seed: u64,
    superset_indices: Vec<usize>,
    gains: Vec<GainJson>,
}

impl From<&SubcarrierPlan> for PlanJson {
    fn from(p: &SubcarrierPlan) -> Self {
        Self {
            subcarriers: p.subcarriers,
            u: p.expansion,
            f_b: p.symbol_rate,
            placement: p.placement,
            seed: p.seed,
            superset_indices: p.superset_indices.clone(),
            gains: p.gains.iter().map(|g| GainJson { re: g.re, im: g.im }).collect(),
        }
    }
}

impl PlanJson {
    fn into_plan(self) -> Result<SubcarrierPlan> {
        let plan = SubcarrierPlan {
            subcarriers: self.subcarriers,
            expansion: self.u,
            symbol_rate: self.f_b,
            superset_indices: self.superset_indices,
            gains: self.gains.iter().map(|g| Complex64::new(g.re, g.im)).collect(),
            placement: self.placement,
            seed: self.seed,
        };
        plan.validate()?;
        Ok(plan)
    }
}
