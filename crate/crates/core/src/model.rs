//! Domain types: providers, applications, scenarios, allocations.
//!
//! A [`Scenario`] is the static description of a game: `K` resource types,
//! the providers with their capacities and native applications, and the
//! applications with their requests and utility curves. Everything here is a
//! plain value object; algorithms take `&Scenario` and never mutate it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_EPSILON_GAIN: f64 = 1e-9;

/// Feasibility tolerance relative to the magnitude of the bound being checked.
pub fn tol(value: f64) -> f64 {
    1e-9 * value.abs().max(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProviderId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AppId(pub u32);

impl fmt::Display for ProviderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Amounts of each of the `K` resource types.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceVector(pub Vec<f64>);

impl ResourceVector {
    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// True when no entry exceeds the absolute partition tolerance `1e-9`.
    pub fn is_exhausted(&self) -> bool {
        self.0.iter().all(|&v| v <= 1e-9)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }
}

impl From<Vec<f64>> for ResourceVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Index<usize> for ResourceVector {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl IndexMut<usize> for ResourceVector {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.0[k]
    }
}

/// Per-resource utility curve of an application.
///
/// The same curve is earned by whichever provider serves the application, so
/// it is attached to the application rather than to a provider.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum UtilitySpec {
    /// `a * x + c`
    Linear { a: f64, c: f64 },
    /// Logistic curve centred on the application's original request.
    Sigmoid { mu: f64 },
}

impl UtilitySpec {
    fn violations(&self) -> Option<&'static str> {
        match *self {
            UtilitySpec::Linear { a, .. } if !(a.is_finite() && a >= 0.0) => {
                Some("linear slope a must be finite and >= 0")
            }
            UtilitySpec::Linear { c, .. } if !(c.is_finite() && c >= 0.0) => {
                Some("linear offset c must be finite and >= 0")
            }
            UtilitySpec::Sigmoid { mu } if !(mu.is_finite() && mu > 0.0) => {
                Some("sigmoid mu must be finite and > 0")
            }
            _ => None,
        }
    }
}

/// Utility of allocating `x` units of one resource type whose original request is `r`.
pub fn eval_utility(u: &UtilitySpec, x: f64, r: f64) -> f64 {
    match *u {
        UtilitySpec::Linear { a, c } => a * x + c,
        UtilitySpec::Sigmoid { mu } => 1.0 / (1.0 + (-mu * (x - r)).exp()),
    }
}

/// Linear communication cost `d * sum(x)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommCostSpec {
    pub d: f64,
}

pub fn eval_comm_cost(c: &CommCostSpec, x: &ResourceVector) -> f64 {
    if c.d == 0.0 {
        return 0.0;
    }
    c.d * x.sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Application {
    pub id: AppId,
    pub owner: ProviderId,
    pub request: ResourceVector,
    pub utility: UtilitySpec,
    pub w1: f64,
}

impl Application {
    /// Vector utility: per-resource utilities summed over demanded resource types.
    pub fn utility_of(&self, x: &ResourceVector) -> f64 {
        self.request
            .iter()
            .zip(x.iter())
            .filter(|(&r, _)| r > 0.0)
            .map(|(&r, &v)| eval_utility(&self.utility, v, r))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provider {
    pub id: ProviderId,
    pub capacity: ResourceVector,
    pub native_apps: Vec<AppId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommCost {
    pub provider: ProviderId,
    pub app: AppId,
    pub d: f64,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_epsilon_gain() -> f64 {
    DEFAULT_EPSILON_GAIN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "K")]
    pub k: usize,
    pub providers: Vec<Provider>,
    pub applications: Vec<Application>,
    #[serde(default)]
    pub comm_costs: Vec<CommCost>,
    /// Greedy solver step.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Marginal gains at or below this are not worth allocating.
    #[serde(default = "default_epsilon_gain")]
    pub epsilon_gain: f64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn provider(&self, id: ProviderId) -> Option<&Provider> {
        self.providers.iter().find(|p| p.id == id)
    }

    pub fn application(&self, id: AppId) -> Option<&Application> {
        self.applications.iter().find(|a| a.id == id)
    }

    pub fn provider_ids(&self) -> Vec<ProviderId> {
        let mut ids: Vec<_> = self.providers.iter().map(|p| p.id).collect();
        ids.sort();
        ids
    }

    /// Applications owned by `owner`, in ascending id order.
    pub fn apps_of(&self, owner: ProviderId) -> Vec<&Application> {
        let mut apps: Vec<_> = self
            .applications
            .iter()
            .filter(|a| a.owner == owner)
            .collect();
        apps.sort_by_key(|a| a.id);
        apps
    }

    pub fn comm_cost(&self, provider: ProviderId, app: AppId) -> CommCostSpec {
        self.comm_costs
            .iter()
            .find(|c| c.provider == provider && c.app == app)
            .map(|c| CommCostSpec { d: c.d })
            .unwrap_or_default()
    }

    /// The sub-game played by `members`: their providers, their native
    /// applications and the communication costs among them.
    pub fn restrict(&self, members: &BTreeSet<ProviderId>) -> Scenario {
        let owned = |a: &Application| members.contains(&a.owner);
        let kept_apps: BTreeSet<AppId> = self
            .applications
            .iter()
            .filter(|a| owned(a))
            .map(|a| a.id)
            .collect();
        Scenario {
            k: self.k,
            providers: self
                .providers
                .iter()
                .filter(|p| members.contains(&p.id))
                .cloned()
                .collect(),
            applications: self
                .applications
                .iter()
                .filter(|a| owned(a))
                .cloned()
                .collect(),
            comm_costs: self
                .comm_costs
                .iter()
                .filter(|c| members.contains(&c.provider) && kept_apps.contains(&c.app))
                .copied()
                .collect(),
            delta: self.delta,
            epsilon_gain: self.epsilon_gain,
        }
    }

    /// Copy of the scenario with `provider`'s capacity and native requests scaled.
    pub fn with_report(
        &self,
        provider: ProviderId,
        capacity_factor: f64,
        request_factor: f64,
    ) -> Result<Scenario> {
        if self.provider(provider).is_none() {
            return Err(Error::UnknownProvider(provider));
        }
        let mut s = self.clone();
        for p in s.providers.iter_mut().filter(|p| p.id == provider) {
            p.capacity = p.capacity.scaled(capacity_factor);
        }
        for a in s.applications.iter_mut().filter(|a| a.owner == provider) {
            a.request = a.request.scaled(request_factor);
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let violations = validate_scenario(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(violations))
        }
    }
}

/// A broken scenario invariant, naming the offending field and rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn check_vector(out: &mut Vec<Violation>, what: String, v: &ResourceVector, k: usize) {
    if v.len() != k {
        out.push(Violation(format!("{what}: length {} != K = {k}", v.len())));
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        out.push(Violation(format!("{what}: entries must be finite and >= 0")));
    }
}

/// Every broken invariant of `s`; empty iff the scenario is well formed.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    if s.k == 0 {
        out.push(Violation("K must be > 0".into()));
    }

    let mut provider_ids = BTreeSet::new();
    for p in &s.providers {
        if !provider_ids.insert(p.id) {
            out.push(Violation(format!("provider {}: duplicate id", p.id)));
        }
        check_vector(&mut out, format!("provider {} capacity", p.id), &p.capacity, s.k);
    }

    let mut app_ids = BTreeSet::new();
    for a in &s.applications {
        if !app_ids.insert(a.id) {
            out.push(Violation(format!("app {}: duplicate id", a.id)));
        }
        if !provider_ids.contains(&a.owner) {
            out.push(Violation(format!("app {}: owner {} does not exist", a.id, a.owner)));
        }
        check_vector(&mut out, format!("app {} request", a.id), &a.request, s.k);
        if let Some(rule) = a.utility.violations() {
            out.push(Violation(format!("app {}: {rule}", a.id)));
        }
        if !(a.w1.is_finite() && a.w1 > 0.0) {
            out.push(Violation(format!("app {}: w1 must be finite and > 0", a.id)));
        }
    }

    let mut listed_by: BTreeMap<AppId, Vec<ProviderId>> = BTreeMap::new();
    for p in &s.providers {
        for &j in &p.native_apps {
            listed_by.entry(j).or_default().push(p.id);
        }
    }
    for (j, owners) in &listed_by {
        if owners.len() > 1 {
            out.push(Violation(format!("app {j}: multiple owners")));
        }
        match s.application(*j) {
            None => out.push(Violation(format!(
                "provider {}: native app {j} does not exist",
                owners[0]
            ))),
            Some(a) if owners.len() == 1 && a.owner != owners[0] => out.push(Violation(format!(
                "app {j}: owner {} but listed by provider {}",
                a.owner, owners[0]
            ))),
            _ => {}
        }
    }
    for a in &s.applications {
        if provider_ids.contains(&a.owner) && !listed_by.contains_key(&a.id) {
            out.push(Violation(format!(
                "app {}: missing from provider {} native_apps",
                a.id, a.owner
            )));
        }
    }

    for c in &s.comm_costs {
        if !provider_ids.contains(&c.provider) {
            out.push(Violation(format!("comm cost: provider {} does not exist", c.provider)));
        }
        if !app_ids.contains(&c.app) {
            out.push(Violation(format!("comm cost: app {} does not exist", c.app)));
        }
        if !(c.d.is_finite() && c.d >= 0.0) {
            out.push(Violation(format!(
                "comm cost ({}, {}): d must be finite and >= 0",
                c.provider, c.app
            )));
        }
    }

    if !(s.delta > 0.0 && s.delta.is_finite()) {
        out.push(Violation("delta must be > 0".into()));
    } else {
        let min_request = s
            .applications
            .iter()
            .flat_map(|a| a.request.iter().copied())
            .filter(|&r| r > 0.0)
            .fold(f64::INFINITY, f64::min);
        if s.delta > min_request {
            out.push(Violation(format!(
                "delta {} exceeds the smallest positive request {min_request}",
                s.delta
            )));
        }
    }
    if !(s.epsilon_gain >= 0.0 && s.epsilon_gain.is_finite()) {
        out.push(Violation("epsilon_gain must be finite and >= 0".into()));
    }
    out
}

/// Allocation decisions `x_n^j` for every (provider, application) pair that
/// received anything.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<AllocationEntry>", into = "Vec<AllocationEntry>")]
pub struct AllocationTensor {
    pub entries: BTreeMap<(ProviderId, AppId), ResourceVector>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationEntry {
    pub provider: ProviderId,
    pub app: AppId,
    pub x: ResourceVector,
}

impl From<Vec<AllocationEntry>> for AllocationTensor {
    fn from(list: Vec<AllocationEntry>) -> Self {
        let mut t = AllocationTensor::default();
        for e in list {
            let k = e.x.len();
            for (i, v) in e.x.0.into_iter().enumerate() {
                t.add(e.provider, e.app, k, i, v);
            }
        }
        t
    }
}

impl From<AllocationTensor> for Vec<AllocationEntry> {
    fn from(t: AllocationTensor) -> Self {
        t.entries
            .into_iter()
            .map(|((provider, app), x)| AllocationEntry { provider, app, x })
            .collect()
    }
}

impl AllocationTensor {
    pub fn add(&mut self, provider: ProviderId, app: AppId, k: usize, resource: usize, amount: f64) {
        let entry = self
            .entries
            .entry((provider, app))
            .or_insert_with(|| ResourceVector::zeros(k));
        entry[resource] += amount;
    }

    pub fn get(&self, provider: ProviderId, app: AppId) -> Option<&ResourceVector> {
        self.entries.get(&(provider, app))
    }

    /// Total received by `app` from all providers.
    pub fn app_total(&self, app: AppId, k: usize) -> ResourceVector {
        let mut total = ResourceVector::zeros(k);
        for ((_, j), x) in &self.entries {
            if *j == app {
                for r in 0..k {
                    total[r] += x[r];
                }
            }
        }
        total
    }

    /// Total handed out by `provider` to all applications.
    pub fn provider_total(&self, provider: ProviderId, k: usize) -> ResourceVector {
        let mut total = ResourceVector::zeros(k);
        for ((n, _), x) in &self.entries {
            if *n == provider {
                for r in 0..k {
                    total[r] += x[r];
                }
            }
        }
        total
    }

    /// Capacity, demand and non-negativity checks; empty iff feasible.
    pub fn check_feasibility(&self, s: &Scenario) -> Vec<Violation> {
        let mut out = Vec::new();
        for ((n, j), x) in &self.entries {
            if x.len() != s.k {
                out.push(Violation(format!("x[{n}][{j}]: length {} != K", x.len())));
                continue;
            }
            if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                out.push(Violation(format!("x[{n}][{j}]: negative or non-finite entry")));
            }
            if s.provider(*n).is_none() {
                out.push(Violation(format!("x[{n}][{j}]: unknown provider")));
            }
            if s.application(*j).is_none() {
                out.push(Violation(format!("x[{n}][{j}]: unknown app")));
            }
        }
        for p in &s.providers {
            let used = self.provider_total(p.id, s.k);
            for k in 0..s.k {
                if used[k] > p.capacity[k] + tol(p.capacity[k]) {
                    out.push(Violation(format!(
                        "provider {} resource {k}: allocated {} exceeds capacity {}",
                        p.id, used[k], p.capacity[k]
                    )));
                }
            }
        }
        for a in &s.applications {
            let got = self.app_total(a.id, s.k);
            for k in 0..s.k {
                if got[k] > a.request[k] + tol(a.request[k]) {
                    out.push(Violation(format!(
                        "app {} resource {k}: allocated {} exceeds request {}",
                        a.id, got[k], a.request[k]
                    )));
                }
            }
        }
        out
    }
}

/// Running bookkeeping while an algorithm hands out resources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocState {
    /// `C'`: capacity each provider has not yet handed out.
    pub remaining_capacity: BTreeMap<ProviderId, ResourceVector>,
    /// `R'`: request each application still has unmet.
    pub remaining_request: BTreeMap<AppId, ResourceVector>,
    /// `z`: total already allocated to each application.
    pub allocated: BTreeMap<AppId, ResourceVector>,
}

impl AllocState {
    pub fn initial(s: &Scenario) -> Self {
        Self {
            remaining_capacity: s
                .providers
                .iter()
                .map(|p| (p.id, p.capacity.clone()))
                .collect(),
            remaining_request: s
                .applications
                .iter()
                .map(|a| (a.id, a.request.clone()))
                .collect(),
            allocated: s
                .applications
                .iter()
                .map(|a| (a.id, ResourceVector::zeros(s.k)))
                .collect(),
        }
    }

    pub fn apply(&mut self, provider: ProviderId, app: AppId, resource: usize, amount: f64) {
        if let Some(c) = self.remaining_capacity.get_mut(&provider) {
            c[resource] -= amount;
        }
        if let Some(r) = self.remaining_request.get_mut(&app) {
            r[resource] -= amount;
        }
        if let Some(z) = self.allocated.get_mut(&app) {
            z[resource] += amount;
        }
    }

    /// True when `app` still wants more than the absolute tolerance of some resource.
    pub fn has_unmet_request(&self, app: AppId) -> bool {
        self.remaining_request
            .get(&app)
            .is_some_and(|r| r.iter().any(|&v| v > 1e-9))
    }

    /// Bitwise equality, used to prove candidate evaluations did not touch the state.
    pub fn bitwise_eq(&self, other: &AllocState) -> bool {
        fn same(a: &BTreeMap<impl Ord, ResourceVector>, b: &BTreeMap<impl Ord, ResourceVector>) -> bool {
            a.len() == b.len()
                && a.values().zip(b.values()).all(|(x, y)| {
                    x.len() == y.len() && x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits())
                })
        }
        self.remaining_capacity.keys().eq(other.remaining_capacity.keys())
            && self.remaining_request.keys().eq(other.remaining_request.keys())
            && same(&self.remaining_capacity, &other.remaining_capacity)
            && same(&self.remaining_request, &other.remaining_request)
            && same(&self.allocated, &other.allocated)
    }
}
