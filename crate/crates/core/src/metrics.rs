//! Outcome metrics: request satisfaction, resource utilization and
//! fragmentation. All are pure functions of a scenario and an allocation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{AllocationTensor, AppId, ProviderId, Scenario};

const FRAGMENT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Satisfaction {
    pub per_app: BTreeMap<AppId, f64>,
    pub per_provider: BTreeMap<ProviderId, f64>,
}

/// Mean of `received / requested` over demanded resource types, per
/// application, and the mean over native applications per provider.
pub fn request_satisfaction(s: &Scenario, x: &AllocationTensor) -> Satisfaction {
    let mut per_app = BTreeMap::new();
    for app in &s.applications {
        let total = x.app_total(app.id, s.k);
        let ratios: Vec<f64> = app
            .request
            .iter()
            .enumerate()
            .filter(|(_, &r)| r > 0.0)
            .map(|(k, &r)| (total[k] / r).clamp(0.0, 1.0))
            .collect();
        let value = if ratios.is_empty() {
            1.0
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        };
        per_app.insert(app.id, value);
    }
    let per_provider = s
        .providers
        .iter()
        .map(|p| {
            let apps = s.apps_of(p.id);
            let value = if apps.is_empty() {
                1.0
            } else {
                apps.iter().map(|a| per_app[&a.id]).sum::<f64>() / apps.len() as f64
            };
            (p.id, value)
        })
        .collect();
    Satisfaction { per_app, per_provider }
}

/// Share of each provider's total capacity that was handed out.
pub fn resource_utilization(s: &Scenario, x: &AllocationTensor) -> BTreeMap<ProviderId, f64> {
    s.providers
        .iter()
        .map(|p| {
            let cap = p.capacity.sum();
            let used = x.provider_total(p.id, s.k).sum();
            let value = if cap > 0.0 { (used / cap).clamp(0.0, 1.0) } else { 0.0 };
            (p.id, value)
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Fragmentation {
    /// Distinct remote providers serving each application.
    pub per_app: BTreeMap<AppId, usize>,
    /// Mean count over applications that received anything remotely; 0 when none did.
    pub mean: f64,
}

pub fn fragmentation_index(s: &Scenario, x: &AllocationTensor) -> Fragmentation {
    let mut per_app: BTreeMap<AppId, usize> = s.applications.iter().map(|a| (a.id, 0)).collect();
    for (&(n, j), v) in &x.entries {
        let Some(app) = s.application(j) else { continue };
        if n != app.owner && v.iter().any(|&a| a > FRAGMENT_TOL) {
            *per_app.entry(j).or_default() += 1;
        }
    }
    let served: Vec<usize> = per_app.values().copied().filter(|&c| c > 0).collect();
    let mean = if served.is_empty() {
        0.0
    } else {
        served.iter().sum::<usize>() as f64 / served.len() as f64
    };
    Fragmentation { per_app, mean }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub satisfaction: Satisfaction,
    pub utilization: BTreeMap<ProviderId, f64>,
    pub fragmentation: Fragmentation,
}

impl MetricsReport {
    pub fn compute(s: &Scenario, x: &AllocationTensor) -> Self {
        MetricsReport {
            satisfaction: request_satisfaction(s, x),
            utilization: resource_utilization(s, x),
            fragmentation: fragmentation_index(s, x),
        }
    }

    /// `(entity, metric, value)` rows, providers first, then applications.
    pub fn rows(&self) -> Vec<(String, &'static str, f64)> {
        let mut rows = Vec::new();
        for (n, v) in &self.satisfaction.per_provider {
            rows.push((format!("provider:{n}"), "satisfaction", *v));
            rows.push((format!("provider:{n}"), "utilization", self.utilization[n]));
        }
        for (j, v) in &self.satisfaction.per_app {
            rows.push((format!("app:{j}"), "satisfaction", *v));
            rows.push((format!("app:{j}"), "fragmentation", self.fragmentation.per_app[j] as f64));
        }
        rows.push(("aggregate".to_string(), "mean_fragmentation", self.fragmentation.mean));
        rows
    }
}
