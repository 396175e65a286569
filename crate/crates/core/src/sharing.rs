//! Bookkeeping shared by both sharing algorithms.
//!
//! Both algorithms start the same way: every provider solves its stand-alone
//! problem, the results are applied to an [`AllocState`], and the remaining
//! capacity is then handed out in a sequence of committed subproblems. The
//! [`Ledger`] records those commits into an allocation tensor, the payoff
//! decomposition, and an ordered [`Transfer`] log that can be re-priced
//! against a different (true) scenario with [`realized_payoffs`].

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{eval_utility, AllocState, AllocationTensor, AppId, ProviderId, ResourceVector, Scenario};
use crate::subsolver::{solve_single_provider, SubproblemResult};

/// Payoff of one provider: stand-alone value, utility earned by sharing its
/// surplus, and the satisfaction bonus from remote resources its own
/// applications received.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Payoff {
    pub solo: f64,
    pub sharing: f64,
    pub bonus: f64,
}

impl Payoff {
    pub fn total(&self) -> f64 {
        self.solo + self.sharing + self.bonus
    }
}

pub type PayoffVector = BTreeMap<ProviderId, Payoff>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Solo,
    Shared,
}

/// One granted run of a single resource, in commit order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    /// Index of the subproblem that produced this transfer.
    pub stage: usize,
    pub phase: Phase,
    pub provider: ProviderId,
    pub app: AppId,
    pub resource: usize,
    pub amount: f64,
}

/// Stand-alone solutions of every provider. Independent of the coalition, so
/// coalition sweeps compute it once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SoloPhase {
    pub results: BTreeMap<ProviderId, SubproblemResult>,
}

impl SoloPhase {
    pub fn solve(s: &Scenario) -> Result<Self> {
        let results = s
            .provider_ids()
            .into_par_iter()
            .map(|n| solve_single_provider(s, n).map(|r| (n, r)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            results: results.into_iter().collect(),
        })
    }

    pub fn restricted(&self, members: &BTreeSet<ProviderId>) -> Self {
        Self {
            results: self
                .results
                .iter()
                .filter(|(n, _)| members.contains(n))
                .map(|(n, r)| (*n, r.clone()))
                .collect(),
        }
    }
}

pub(crate) struct Ledger {
    pub allocation: AllocationTensor,
    pub state: AllocState,
    pub payoffs: PayoffVector,
    pub transfers: Vec<Transfer>,
    stage: usize,
}

impl Ledger {
    /// Applies every provider's stand-alone allocation, in ascending id order.
    pub fn from_solo(s: &Scenario, solo: &SoloPhase) -> Self {
        let mut ledger = Ledger {
            allocation: AllocationTensor::default(),
            state: AllocState::initial(s),
            payoffs: s.provider_ids().into_iter().map(|n| (n, Payoff::default())).collect(),
            transfers: Vec::new(),
            stage: 0,
        };
        for n in s.provider_ids() {
            let result = &solo.results[&n];
            ledger.payoffs.get_mut(&n).expect("provider").solo = result.objective_value;
            ledger.record(s, n, result, Phase::Solo);
        }
        ledger
    }

    fn record(&mut self, s: &Scenario, n: ProviderId, result: &SubproblemResult, phase: Phase) {
        for (&(j, k), &x) in &result.allocation {
            self.allocation.add(n, j, s.k, k, x);
            self.state.apply(n, j, k, x);
        }
        self.transfers.extend(result.grants.iter().map(|g| Transfer {
            stage: self.stage,
            phase,
            provider: n,
            app: g.app,
            resource: g.resource,
            amount: g.amount,
        }));
        self.stage += 1;
    }

    /// Commits surplus provider `n`'s shared allocation: `n` earns the
    /// subproblem objective, owners of served applications earn `x / r`.
    pub fn commit_shared(&mut self, s: &Scenario, n: ProviderId, result: &SubproblemResult) {
        self.payoffs.entry(n).or_default().sharing += result.objective_value;
        for (&(j, k), &x) in &result.allocation {
            let app = s.application(j).expect("allocated app exists");
            self.payoffs.entry(app.owner).or_default().bonus += x / app.request[k];
        }
        self.record(s, n, result, Phase::Shared);
    }
}

/// Re-prices a transfer log against `truth`.
///
/// Each transfer is clipped to what the serving provider truly has left and
/// to what the application truly still needs, in log order. Stand-alone
/// payoffs, shared-utility terms and satisfaction bonuses are then evaluated
/// with true requests. Re-pricing a truthful run's log against its own
/// scenario reproduces that run's payoffs.
pub fn realized_payoffs(truth: &Scenario, transfers: &[Transfer]) -> PayoffVector {
    let k_count = truth.k;
    let mut used: BTreeMap<ProviderId, ResourceVector> = truth
        .providers
        .iter()
        .map(|p| (p.id, ResourceVector::zeros(k_count)))
        .collect();
    let mut received: BTreeMap<AppId, ResourceVector> = truth
        .applications
        .iter()
        .map(|a| (a.id, ResourceVector::zeros(k_count)))
        .collect();
    let mut own: BTreeMap<AppId, ResourceVector> = received.clone();
    let mut payoffs: PayoffVector = truth
        .provider_ids()
        .into_iter()
        .map(|n| (n, Payoff::default()))
        .collect();

    let mut i = 0;
    while i < transfers.len() {
        let stage = transfers[i].stage;
        let end = transfers[i..]
            .iter()
            .position(|t| t.stage != stage)
            .map_or(transfers.len(), |p| i + p);
        let base = received.clone();
        let mut stage_amounts: BTreeMap<(ProviderId, AppId, usize), f64> = BTreeMap::new();
        for t in &transfers[i..end] {
            let (Some(p), Some(app)) = (truth.provider(t.provider), truth.application(t.app)) else {
                continue;
            };
            let k = t.resource;
            let cap_left = p.capacity[k] - used[&t.provider][k];
            let need_left = app.request[k] - received[&t.app][k];
            let amount = t.amount.min(cap_left).min(need_left).max(0.0);
            if amount <= 0.0 {
                continue;
            }
            used.get_mut(&t.provider).expect("provider")[k] += amount;
            received.get_mut(&t.app).expect("app")[k] += amount;
            match t.phase {
                Phase::Solo => own.get_mut(&t.app).expect("app")[k] += amount,
                Phase::Shared => {
                    *stage_amounts.entry((t.provider, t.app, k)).or_default() += amount;
                    payoffs.get_mut(&app.owner).expect("owner").bonus += amount / app.request[k];
                }
            }
        }
        for ((n, j, k), x) in stage_amounts {
            let app = truth.application(j).expect("app");
            let z = base[&j][k];
            let r = app.request[k];
            let gap = r - z;
            let du = eval_utility(&app.utility, z + x, r) - eval_utility(&app.utility, z, r);
            let d = truth.comm_cost(n, j).d;
            let share = if gap > 0.0 { x / gap } else { 0.0 };
            payoffs.get_mut(&n).expect("provider").sharing += app.w1 * (du - d * x) + share * share;
        }
        i = end;
    }

    for app in &truth.applications {
        let x = &own[&app.id];
        let solo: f64 = app
            .request
            .iter()
            .enumerate()
            .filter(|(_, &r)| r > 0.0)
            .map(|(k, &r)| app.w1 * eval_utility(&app.utility, x[k], r) + x[k] / r)
            .sum();
        payoffs.get_mut(&app.owner).expect("owner").solo += solo;
    }
    payoffs
}

/// Providers whose native applications still have unmet requests, and
/// providers that have met all their own demand and still hold capacity.
pub fn partition_players(s: &Scenario, state: &AllocState) -> (BTreeSet<ProviderId>, BTreeSet<ProviderId>) {
    let mut deficit = BTreeSet::new();
    let mut surplus = BTreeSet::new();
    for n in s.provider_ids() {
        if s.apps_of(n).iter().any(|a| state.has_unmet_request(a.id)) {
            deficit.insert(n);
        } else if state
            .remaining_capacity
            .get(&n)
            .is_some_and(|c| !c.is_exhausted())
        {
            surplus.insert(n);
        }
    }
    (deficit, surplus)
}

/// Applications of deficit providers that still want something, ascending by id.
pub(crate) fn deficit_apps(s: &Scenario, state: &AllocState, deficit: &BTreeSet<ProviderId>) -> Vec<AppId> {
    let mut apps: Vec<AppId> = s
        .applications
        .iter()
        .filter(|a| deficit.contains(&a.owner) && state.has_unmet_request(a.id))
        .map(|a| a.id)
        .collect();
    apps.sort_unstable();
    apps
}
