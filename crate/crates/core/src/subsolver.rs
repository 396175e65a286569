//! Allocation subproblems and their solvers.
//!
//! Every optimisation the algorithms need (serving native applications,
//! sharing a surplus with all deficit applications, evaluating one
//! deficit/surplus pair) has the same shape: a set of `(application,
//! resource)` items, each with an upper bound and a separable objective, and
//! one capacity per resource type. [`allocate_greedy`] hands out capacity in
//! `delta`-sized units to the item with the best marginal gain;
//! [`allocate_oracle`] enumerates a grid exhaustively and is used to bound the
//! greedy's gap.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{eval_utility, tol, AllocState, AppId, ProviderId, Scenario, UtilitySpec};

/// Upper bound on oracle grid states, summed over independent resource blocks.
pub const ORACLE_STATE_LIMIT: u128 = 10_000_000;

/// Remaining requests at or below this are treated as met.
const GAP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Solo,
    Share,
    Match,
}

/// Objective contribution of a single `(application, resource)` item.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ItemObjective {
    /// `w1 * u(x) + x / r` for a provider serving its own application.
    Solo {
        w1: f64,
        utility: UtilitySpec,
        request: f64,
    },
    /// `w1 * (u(z + x) - u(z) - d * x) + (x / gap)^2` for a provider serving a
    /// remote application that already holds `base = z` and still needs `gap`.
    Incremental {
        w1: f64,
        utility: UtilitySpec,
        request: f64,
        base: f64,
        gap: f64,
        d: f64,
    },
}

impl ItemObjective {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            ItemObjective::Solo { w1, utility, request } => {
                w1 * eval_utility(&utility, x, request) + x / request
            }
            ItemObjective::Incremental {
                w1,
                utility,
                request,
                base,
                gap,
                d,
            } => {
                if x == 0.0 {
                    return 0.0;
                }
                let du = eval_utility(&utility, base + x, request) - eval_utility(&utility, base, request);
                let share = x / gap;
                w1 * (du - d * x) + share * share
            }
        }
    }

    pub fn gain(&self, x: f64, step: f64) -> f64 {
        self.value(x + step) - self.value(x)
    }

    /// Incremental utility must cover the communication cost of serving remotely.
    pub fn covers_comm_cost(&self, x: f64) -> bool {
        match *self {
            ItemObjective::Solo { .. } => true,
            ItemObjective::Incremental {
                utility,
                request,
                base,
                d,
                ..
            } => {
                let du = eval_utility(&utility, base + x, request) - eval_utility(&utility, base, request);
                du - d * x >= 0.0
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Item {
    pub app: AppId,
    pub resource: usize,
    pub upper: f64,
    pub objective: ItemObjective,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubproblemSpec {
    pub kind: ObjectiveKind,
    pub items: Vec<Item>,
    /// Available amount of each resource type.
    pub capacity: Vec<f64>,
}

/// A run of consecutive units granted to one item.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grant {
    pub app: AppId,
    pub resource: usize,
    pub amount: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SubproblemResult {
    /// Positive allocations keyed by `(application, resource)`.
    #[serde(with = "allocation_entries")]
    pub allocation: BTreeMap<(AppId, usize), f64>,
    pub objective_value: f64,
    pub resources_used: f64,
    /// Grants in the order they were made; replaying them rebuilds `allocation`.
    #[serde(skip)]
    pub grants: Vec<Grant>,
}

/// Tuple keys are not valid JSON object keys; store the map as a list.
mod allocation_entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Grant;
    use crate::model::AppId;

    pub fn serialize<S: Serializer>(map: &BTreeMap<(AppId, usize), f64>, s: S) -> Result<S::Ok, S::Error> {
        map.iter()
            .map(|(&(app, resource), &amount)| Grant { app, resource, amount })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(AppId, usize), f64>, D::Error> {
        Ok(Vec::<Grant>::deserialize(d)?
            .into_iter()
            .map(|g| ((g.app, g.resource), g.amount))
            .collect())
    }
}

impl SubproblemResult {
    fn from_parts(spec: &SubproblemSpec, x: &[f64], grants: Vec<Grant>) -> Self {
        let objective_value = spec
            .items
            .iter()
            .zip(x)
            .map(|(item, &v)| item.objective.value(v))
            .sum();
        let allocation = spec
            .items
            .iter()
            .zip(x)
            .filter(|(_, &v)| v > 0.0)
            .map(|(item, &v)| ((item.app, item.resource), v))
            .collect();
        SubproblemResult {
            allocation,
            objective_value,
            resources_used: x.iter().sum(),
            grants,
        }
    }

    pub fn get(&self, app: AppId, resource: usize) -> f64 {
        self.allocation.get(&(app, resource)).copied().unwrap_or(0.0)
    }
}

#[derive(Debug)]
struct Candidate {
    rate: f64,
    step: f64,
    gain: f64,
    app: AppId,
    resource: usize,
    idx: usize,
    stamp: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max-heap: higher rate first, then lower app id, then lower resource index.
    fn cmp(&self, other: &Self) -> Ordering {
        self.rate
            .total_cmp(&other.rate)
            .then_with(|| other.app.cmp(&self.app))
            .then_with(|| other.resource.cmp(&self.resource))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

struct Greedy<'a> {
    spec: &'a SubproblemSpec,
    delta: f64,
    epsilon_gain: f64,
    x: Vec<f64>,
    cap: Vec<f64>,
    stamp: Vec<u64>,
    heap: BinaryHeap<Candidate>,
    grants: Vec<Grant>,
    first_grant: Vec<Option<usize>>,
}

impl<'a> Greedy<'a> {
    fn step(&self, idx: usize) -> f64 {
        let item = &self.spec.items[idx];
        let k = item.resource;
        let room = item.upper - self.x[idx];
        // A residue below tolerance is rounding drift from repeated steps; fold it in.
        let mut step = if room <= self.delta + tol(item.upper) { room } else { self.delta };
        if step >= self.cap[k] - tol(self.spec.capacity[k]) {
            step = self.cap[k];
        }
        step.min(room).max(0.0)
    }

    fn candidate(&self, idx: usize) -> Option<Candidate> {
        let step = self.step(idx);
        if step <= 0.0 {
            return None;
        }
        let item = &self.spec.items[idx];
        let gain = item.objective.gain(self.x[idx], step);
        (gain > self.epsilon_gain).then(|| Candidate {
            rate: gain / step,
            step,
            gain,
            app: item.app,
            resource: item.resource,
            idx,
            stamp: self.stamp[idx],
        })
    }

    fn refresh(&mut self, idx: usize) {
        self.stamp[idx] += 1;
        if let Some(c) = self.candidate(idx) {
            self.heap.push(c);
        }
    }

    fn grant(&mut self, c: &Candidate) {
        let item = &self.spec.items[c.idx];
        let k = item.resource;
        if c.step >= item.upper - self.x[c.idx] {
            self.x[c.idx] = item.upper;
        } else {
            self.x[c.idx] += c.step;
        }
        if c.step >= self.cap[k] {
            self.cap[k] = 0.0;
        } else {
            self.cap[k] -= c.step;
        }
        match self.grants.last_mut() {
            Some(g) if g.app == item.app && g.resource == k => g.amount += c.step,
            _ => self.grants.push(Grant {
                app: item.app,
                resource: k,
                amount: c.step,
            }),
        }
        if self.first_grant[c.idx].is_none() {
            self.first_grant[c.idx] = Some(self.grants.len() - 1);
        }
    }

    fn run(&mut self) {
        for idx in 0..self.spec.items.len() {
            if let Some(c) = self.candidate(idx) {
                self.heap.push(c);
            }
        }
        while let Some(top) = self.heap.pop() {
            if top.stamp != self.stamp[top.idx] {
                continue;
            }
            debug_assert!(top.gain > self.epsilon_gain);
            self.grant(&top);
            let k = self.spec.items[top.idx].resource;
            if self.cap[k] < self.delta + tol(self.spec.capacity[k]) {
                // Steps of every item on this resource just shrank.
                let on_k: Vec<usize> = (0..self.spec.items.len())
                    .filter(|&i| self.spec.items[i].resource == k)
                    .collect();
                for i in on_k {
                    self.refresh(i);
                }
            } else {
                self.refresh(top.idx);
            }
        }
    }

    /// Zero out remote items whose incremental utility does not cover the
    /// communication cost, latest first-grant first.
    fn enforce_comm_constraint(&mut self) {
        let mut order: Vec<(usize, usize)> = self
            .first_grant
            .iter()
            .enumerate()
            .filter_map(|(idx, g)| g.map(|g| (g, idx)))
            .collect();
        order.sort_unstable_by(|a, b| b.cmp(a));
        for (_, idx) in order {
            let item = &self.spec.items[idx];
            if self.x[idx] > 0.0 && !item.objective.covers_comm_cost(self.x[idx]) {
                self.cap[item.resource] += self.x[idx];
                self.x[idx] = 0.0;
                let (app, k) = (item.app, item.resource);
                self.grants.retain(|g| !(g.app == app && g.resource == k));
            }
        }
    }
}

/// Greedy unit-increment allocation.
///
/// Repeatedly grants `min(delta, upper - x, capacity left)` to the item with
/// the largest marginal gain per unit, ties broken by ascending `(app,
/// resource)`, until no item gains more than `epsilon_gain`.
pub fn allocate_greedy(spec: &SubproblemSpec, delta: f64, epsilon_gain: f64) -> SubproblemResult {
    assert!(delta > 0.0, "greedy step must be positive");
    let n = spec.items.len();
    let mut g = Greedy {
        spec,
        delta,
        epsilon_gain,
        x: vec![0.0; n],
        cap: spec.capacity.iter().map(|c| c.max(0.0)).collect(),
        stamp: vec![0; n],
        heap: BinaryHeap::with_capacity(n),
        grants: Vec::new(),
        first_grant: vec![None; n],
    };
    g.run();
    if spec.kind != ObjectiveKind::Solo {
        g.enforce_comm_constraint();
    }
    let Greedy { x, grants, .. } = g;
    SubproblemResult::from_parts(spec, &x, grants)
}

fn grid_points(upper: f64, step: f64) -> u128 {
    if upper <= 0.0 {
        1
    } else {
        (upper / step + 1e-9).floor() as u128 + 1
    }
}

struct BlockSearch<'a> {
    items: Vec<&'a Item>,
    counts: Vec<u128>,
    step: f64,
    capacity: f64,
    current: Vec<f64>,
    best: Option<(f64, Vec<f64>)>,
}

impl BlockSearch<'_> {
    fn search(&mut self, depth: usize, used: f64, value: f64) {
        if depth == self.items.len() {
            if self.best.as_ref().is_none_or(|(b, _)| value > *b) {
                self.best = Some((value, self.current.clone()));
            }
            return;
        }
        let item = self.items[depth];
        for t in 0..self.counts[depth] {
            let x = t as f64 * self.step;
            if used + x > self.capacity + tol(self.capacity) {
                break;
            }
            if !item.objective.covers_comm_cost(x) {
                continue;
            }
            self.current[depth] = x;
            self.search(depth + 1, used + x, value + item.objective.value(x));
        }
        self.current[depth] = 0.0;
    }
}

/// Exhaustive search over `{0, step, 2*step, ...}` for every item.
///
/// Items on different resources do not interact, so each resource is searched
/// as its own block; the state count is the sum of the block sizes.
pub fn allocate_oracle(spec: &SubproblemSpec, grid_step: f64) -> Result<SubproblemResult> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::InvalidGridStep(grid_step));
    }
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, item) in spec.items.iter().enumerate() {
        blocks.entry(item.resource).or_default().push(idx);
    }
    let mut states: u128 = 0;
    for members in blocks.values() {
        let block = members.iter().fold(1u128, |acc, &i| {
            acc.saturating_mul(grid_points(spec.items[i].upper, grid_step))
        });
        states = states.saturating_add(block);
    }
    if states > ORACLE_STATE_LIMIT {
        return Err(Error::GridTooLarge {
            states,
            limit: ORACLE_STATE_LIMIT,
        });
    }

    let mut x = vec![0.0; spec.items.len()];
    for (&k, members) in &blocks {
        let mut search = BlockSearch {
            items: members.iter().map(|&i| &spec.items[i]).collect(),
            counts: members
                .iter()
                .map(|&i| grid_points(spec.items[i].upper, grid_step))
                .collect(),
            step: grid_step,
            capacity: spec.capacity.get(k).copied().unwrap_or(0.0).max(0.0),
            current: vec![0.0; members.len()],
            best: None,
        };
        search.search(0, 0.0, 0.0);
        if let Some((_, best)) = search.best {
            for (&i, v) in members.iter().zip(best) {
                x[i] = v;
            }
        }
    }
    let grants = spec
        .items
        .iter()
        .zip(&x)
        .filter(|(_, &v)| v > 0.0)
        .map(|(item, &v)| Grant {
            app: item.app,
            resource: item.resource,
            amount: v,
        })
        .collect();
    Ok(SubproblemResult::from_parts(spec, &x, grants))
}

/// The stand-alone problem of provider `n`: serve native applications from own capacity.
pub fn single_provider_spec(s: &Scenario, n: ProviderId) -> Result<SubproblemSpec> {
    let provider = s.provider(n).ok_or(Error::UnknownProvider(n))?;
    let mut items = Vec::new();
    for app in s.apps_of(n) {
        for (k, &r) in app.request.iter().enumerate() {
            if r > 0.0 {
                items.push(Item {
                    app: app.id,
                    resource: k,
                    upper: r,
                    objective: ItemObjective::Solo {
                        w1: app.w1,
                        utility: app.utility,
                        request: r,
                    },
                });
            }
        }
    }
    Ok(SubproblemSpec {
        kind: ObjectiveKind::Solo,
        items,
        capacity: provider.capacity.0.clone(),
    })
}

pub fn solve_single_provider(s: &Scenario, n: ProviderId) -> Result<SubproblemResult> {
    let spec = single_provider_spec(s, n)?;
    Ok(allocate_greedy(&spec, s.delta, s.epsilon_gain))
}

/// Provider `n` sharing its remaining capacity with `apps`, given the
/// allocations already recorded in `state`. `z` and the gap `r - z` are frozen
/// at the values in `state`.
pub fn remote_share_spec(
    s: &Scenario,
    n: ProviderId,
    state: &AllocState,
    apps: &[AppId],
    kind: ObjectiveKind,
) -> SubproblemSpec {
    let mut apps = apps.to_vec();
    apps.sort_unstable();
    apps.dedup();
    let mut items = Vec::new();
    for j in apps {
        let (Some(app), Some(remaining), Some(z)) = (
            s.application(j),
            state.remaining_request.get(&j),
            state.allocated.get(&j),
        ) else {
            continue;
        };
        let d = s.comm_cost(n, j).d;
        for k in 0..s.k {
            let gap = remaining[k];
            if gap <= GAP_TOL || app.request[k] <= 0.0 {
                continue;
            }
            items.push(Item {
                app: j,
                resource: k,
                upper: gap,
                objective: ItemObjective::Incremental {
                    w1: app.w1,
                    utility: app.utility,
                    request: app.request[k],
                    base: z[k],
                    gap,
                    d,
                },
            });
        }
    }
    let capacity = state
        .remaining_capacity
        .get(&n)
        .map(|c| c.iter().map(|v| v.max(0.0)).collect())
        .unwrap_or_else(|| vec![0.0; s.k]);
    SubproblemSpec {
        kind,
        items,
        capacity,
    }
}

/// Surplus provider `n` sharing with every listed deficit application.
pub fn solve_surplus_share(
    s: &Scenario,
    n: ProviderId,
    state: &AllocState,
    deficit_apps: &[AppId],
) -> SubproblemResult {
    let spec = remote_share_spec(s, n, state, deficit_apps, ObjectiveKind::Share);
    allocate_greedy(&spec, s.delta, s.epsilon_gain)
}

/// Outcome of evaluating deficit provider `m` against surplus provider `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMatch {
    pub value: f64,
    pub resources: f64,
    pub result: SubproblemResult,
}

/// Surplus provider `n` serving only the native applications of `m`.
pub fn solve_pair_match(s: &Scenario, m: ProviderId, n: ProviderId, state: &AllocState) -> PairMatch {
    let apps: Vec<AppId> = s
        .apps_of(m)
        .into_iter()
        .map(|a| a.id)
        .filter(|&j| state.has_unmet_request(j))
        .collect();
    let spec = remote_share_spec(s, n, state, &apps, ObjectiveKind::Match);
    let result = allocate_greedy(&spec, s.delta, s.epsilon_gain);
    PairMatch {
        value: result.objective_value,
        resources: result.resources_used,
        result,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(a: f64) -> UtilitySpec {
        UtilitySpec::Linear { a, c: 0.0 }
    }

    fn solo_item(app: u32, upper: f64, a: f64) -> Item {
        Item {
            app: AppId(app),
            resource: 0,
            upper,
            objective: ItemObjective::Solo {
                w1: 1.0,
                utility: linear(a),
                request: upper,
            },
        }
    }

    fn share_item(app: u32, request: f64, base: f64) -> Item {
        Item {
            app: AppId(app),
            resource: 0,
            upper: request - base,
            objective: ItemObjective::Incremental {
                w1: 1.0,
                utility: linear(1.0),
                request,
                base,
                gap: request - base,
                d: 0.0,
            },
        }
    }

    fn two_app_solo() -> SubproblemSpec {
        SubproblemSpec {
            kind: ObjectiveKind::Solo,
            items: vec![solo_item(1, 4.0, 1.0), solo_item(2, 6.0, 1.0)],
            capacity: vec![5.0],
        }
    }

    #[test]
    fn greedy_fills_best_rate_first() {
        // Rates 1 + 1/4 and 1 + 1/6: app 1 saturates, app 2 takes the last unit.
        let r = allocate_greedy(&two_app_solo(), 0.01, 1e-9);
        assert_eq!(r.get(AppId(1), 0), 4.0);
        assert!((r.get(AppId(2), 0) - 1.0).abs() < 1e-9);
        assert!((r.objective_value - (5.0 + 1.0 + 1.0 / 6.0)).abs() < 1e-9);
        assert!((r.resources_used - 5.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_matches_on_coarse_grid() {
        let r = allocate_oracle(&two_app_solo(), 0.5).unwrap();
        assert_eq!(r.get(AppId(1), 0), 4.0);
        assert_eq!(r.get(AppId(2), 0), 1.0);
        let g = allocate_greedy(&two_app_solo(), 0.01, 1e-9);
        let o = allocate_oracle(&two_app_solo(), 0.01).unwrap();
        assert!((g.objective_value - o.objective_value).abs() < 1e-9);
    }

    #[test]
    fn zero_capacity_keeps_constant_terms() {
        let mut spec = two_app_solo();
        spec.capacity = vec![0.0];
        for item in &mut spec.items {
            item.objective = ItemObjective::Solo {
                w1: 2.0,
                utility: UtilitySpec::Linear { a: 1.0, c: 0.5 },
                request: item.upper,
            };
        }
        let r = allocate_greedy(&spec, 0.01, 1e-9);
        assert!(r.allocation.is_empty());
        assert_eq!(r.objective_value, 2.0);
    }

    #[test]
    fn zero_upper_bounds_allocate_nothing() {
        let mut spec = two_app_solo();
        for item in &mut spec.items {
            item.upper = 0.0;
        }
        assert!(allocate_greedy(&spec, 0.01, 1e-9).allocation.is_empty());
    }

    #[test]
    fn oracle_single_item_saturates_capacity() {
        let spec = SubproblemSpec {
            kind: ObjectiveKind::Solo,
            items: vec![solo_item(1, 2.0, 1.0)],
            capacity: vec![1.0],
        };
        assert_eq!(allocate_oracle(&spec, 0.1).unwrap().get(AppId(1), 0), 1.0);
    }

    #[test]
    fn oracle_empty_spec() {
        let spec = SubproblemSpec {
            kind: ObjectiveKind::Share,
            items: vec![],
            capacity: vec![3.0],
        };
        let r = allocate_oracle(&spec, 0.1).unwrap();
        assert!(r.allocation.is_empty());
        assert_eq!(r.objective_value, 0.0);
    }

    #[test]
    fn oracle_rejects_huge_grid() {
        let spec = SubproblemSpec {
            kind: ObjectiveKind::Solo,
            items: (1..=4).map(|j| solo_item(j, 10.0, 1.0)).collect(),
            capacity: vec![40.0],
        };
        assert!(matches!(
            allocate_oracle(&spec, 0.01),
            Err(Error::GridTooLarge { .. })
        ));
        assert!(matches!(allocate_oracle(&spec, 0.0), Err(Error::InvalidGridStep(_))));
    }

    #[test]
    fn share_saturates_smaller_gap_first() {
        // Gaps 2 and 4 with capacity 3: the squared term rewards finishing app 1.
        let spec = SubproblemSpec {
            kind: ObjectiveKind::Share,
            items: vec![share_item(1, 5.0, 3.0), share_item(2, 6.0, 2.0)],
            capacity: vec![3.0],
        };
        let g = allocate_greedy(&spec, 0.01, 1e-9);
        assert_eq!(g.get(AppId(1), 0), 2.0);
        assert!((g.get(AppId(2), 0) - 1.0).abs() < 1e-9);
        let expected = (2.0 + 1.0) + (1.0 + 0.0625);
        assert!((g.objective_value - expected).abs() < 1e-9);
        let o = allocate_oracle(&spec, 0.1).unwrap();
        assert!((o.objective_value - expected).abs() < 1e-9);
        assert_eq!(o.get(AppId(1), 0), 2.0);
    }

    #[test]
    fn comm_cost_rollback() {
        // d exceeds the utility slope: the item stays attractive through the
        // squared term but violates u(z+x) - u(z) >= D(x).
        let mut item = share_item(1, 0.5, 0.0);
        item.objective = ItemObjective::Incremental {
            w1: 1.0,
            utility: linear(0.1),
            request: 0.5,
            base: 0.0,
            gap: 0.5,
            d: 0.11,
        };
        let spec = SubproblemSpec {
            kind: ObjectiveKind::Share,
            items: vec![item, share_item(2, 1.0, 0.0)],
            capacity: vec![5.0],
        };
        let g = allocate_greedy(&spec, 0.01, 1e-9);
        assert_eq!(g.get(AppId(1), 0), 0.0);
        assert_eq!(g.get(AppId(2), 0), 1.0);
        assert!(g.grants.iter().all(|gr| gr.app == AppId(2)));
        // The oracle treats the same rule as a hard constraint.
        let o = allocate_oracle(&spec, 0.05).unwrap();
        assert_eq!(o.get(AppId(1), 0), 0.0);
        assert_eq!(g.objective_value, 2.0);
    }

    #[test]
    fn greedy_is_bitwise_deterministic() {
        let spec = SubproblemSpec {
            kind: ObjectiveKind::Share,
            items: vec![share_item(1, 5.0, 3.0), share_item(2, 6.0, 2.0), share_item(3, 7.5, 0.3)],
            capacity: vec![6.3],
        };
        let a = allocate_greedy(&spec, 0.01, 1e-9);
        let b = allocate_greedy(&spec, 0.01, 1e-9);
        assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
        assert_eq!(a.grants, b.grants);
    }

    #[test]
    fn grants_replay_to_allocation() {
        let spec = SubproblemSpec {
            kind: ObjectiveKind::Solo,
            items: vec![solo_item(1, 4.0, 1.0), solo_item(2, 6.0, 1.5), solo_item(3, 0.7, 0.2)],
            capacity: vec![8.05],
        };
        let r = allocate_greedy(&spec, 0.01, 1e-9);
        let mut replay: BTreeMap<(AppId, usize), f64> = BTreeMap::new();
        for g in &r.grants {
            *replay.entry((g.app, g.resource)).or_default() += g.amount;
        }
        for (key, v) in &r.allocation {
            assert!((replay[key] - v).abs() < 1e-9);
        }
    }
}
