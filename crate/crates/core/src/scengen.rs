//! Seeded scenario generation.
//!
//! The four settings mirror the simulated networks: 3 or 6 providers with 3,
//! 6 or 20 native applications each, and a fixed split into deficit and
//! surplus providers. Draws come from a splitmix64 stream in a fixed order
//! (providers, then their applications, then resources, then utility
//! parameters) so that a seed means the same scenario in any language.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AppId, Application, Provider, ProviderId, ResourceVector, Scenario, UtilitySpec, DEFAULT_DELTA,
    DEFAULT_EPSILON_GAIN,
};

pub const SIGMOID_MU: f64 = 0.01;
const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// One splitmix64 step: returns `(value, next_state)`.
pub fn prng_next(state: u64) -> (u64, u64) {
    let next = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = next;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31), next)
}

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        let (value, next) = prng_next(self.state);
        self.state = next;
        value
    }

    /// `lo + (value / 2^64) * (hi - lo)`
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (self.next_u64() as f64 / TWO_POW_64) * (hi - lo)
    }

    /// Fisher-Yates from the back: `j = next % (i + 1)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            items.swap(i, j);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityKind {
    Linear,
    Sigmoid,
}

impl std::str::FromStr for UtilityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(UtilityKind::Linear),
            "sigmoid" => Ok(UtilityKind::Sigmoid),
            other => Err(Error::InvalidSpec(format!("unknown utility kind {other:?}"))),
        }
    }
}

/// Provider count, applications per provider, and the deficit providers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SettingLayout {
    pub providers: u32,
    pub apps_per_provider: u32,
    pub deficit: &'static [u32],
}

pub fn setting_layout(setting: u8) -> Option<SettingLayout> {
    let (providers, apps_per_provider, deficit): (u32, u32, &'static [u32]) = match setting {
        1 => (3, 3, &[1]),
        2 => (3, 20, &[1]),
        3 => (6, 6, &[1, 2, 3]),
        4 => (6, 20, &[1, 2, 5]),
        _ => return None,
    };
    Some(SettingLayout {
        providers,
        apps_per_provider,
        deficit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub setting: u8,
    pub seed: u64,
    pub utility_kind: UtilityKind,
    pub request_range: (f64, f64),
    /// Deficit capacity as a fraction of native demand, per resource.
    pub deficit_scale: f64,
    /// Surplus capacity as a multiple of native demand, per resource.
    pub surplus_scale: f64,
}

impl GenSpec {
    pub fn new(setting: u8, seed: u64) -> Self {
        Self {
            setting,
            seed,
            utility_kind: UtilityKind::Linear,
            request_range: (1.0, 10.0),
            deficit_scale: 0.5,
            surplus_scale: 1.6,
        }
    }

    pub fn with_utility(mut self, kind: UtilityKind) -> Self {
        self.utility_kind = kind;
        self
    }

    fn check(&self) -> Result<SettingLayout> {
        let layout = setting_layout(self.setting)
            .ok_or_else(|| Error::InvalidSpec(format!("setting must be 1..=4, got {}", self.setting)))?;
        let (lo, hi) = self.request_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidSpec(format!("request range [{lo}, {hi}] must satisfy 0 < lo <= hi")));
        }
        if !(self.deficit_scale > 0.0 && self.deficit_scale < 1.0 && 1.0 <= self.surplus_scale && self.surplus_scale.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "scales must satisfy 0 < deficit ({}) < 1 <= surplus ({})",
                self.deficit_scale, self.surplus_scale
            )));
        }
        Ok(layout)
    }
}

pub fn generate_scenario(spec: &GenSpec) -> Result<Scenario> {
    const K: usize = 3;
    let layout = spec.check()?;
    let mut rng = SplitMix64::new(spec.seed);
    let (lo, hi) = spec.request_range;

    let mut applications = Vec::new();
    let mut providers = Vec::new();
    for n in 1..=layout.providers {
        let first = (n - 1) * layout.apps_per_provider + 1;
        let ids: Vec<AppId> = (first..first + layout.apps_per_provider).map(AppId).collect();
        let mut demand = ResourceVector::zeros(K);
        for &id in &ids {
            let request = ResourceVector((0..K).map(|_| rng.uniform(lo, hi)).collect());
            for k in 0..K {
                demand[k] += request[k];
            }
            applications.push(Application {
                id,
                owner: ProviderId(n),
                request,
                utility: UtilitySpec::Sigmoid { mu: SIGMOID_MU },
                w1: 1.0,
            });
        }
        let scale = if layout.deficit.contains(&n) {
            spec.deficit_scale
        } else {
            spec.surplus_scale
        };
        providers.push(Provider {
            id: ProviderId(n),
            capacity: demand.scaled(scale),
            native_apps: ids,
        });
    }
    if spec.utility_kind == UtilityKind::Linear {
        for app in &mut applications {
            let a = rng.uniform(0.5, 2.0);
            let c = rng.uniform(0.0, 1.0);
            app.utility = UtilitySpec::Linear { a, c };
        }
    }

    Ok(Scenario {
        k: K,
        providers,
        applications,
        comm_costs: Vec::new(),
        delta: DEFAULT_DELTA,
        epsilon_gain: DEFAULT_EPSILON_GAIN,
    })
}
