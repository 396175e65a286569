//! Ordered surplus sharing.
//!
//! After the stand-alone phase, providers with unmet native demand (G1) are
//! served by providers with leftover capacity (G2), one surplus provider at a
//! time in a chosen order. Each surplus provider allocates to every deficit
//! application still short of its request.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AllocState, AllocationTensor, ProviderId, Scenario};
use crate::scengen::SplitMix64;
use crate::sharing::{deficit_apps, Ledger, PayoffVector, SoloPhase, Transfer};
use crate::subsolver::solve_surplus_share;

pub use crate::sharing::partition_players;

/// Exhaustive order sweeps are limited to this many surplus providers.
pub const MAX_EXHAUSTIVE_SURPLUS: usize = 4;

/// Order in which surplus providers share.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum OrderingScheme {
    /// Ascending remaining capacity of one resource type.
    Cao { resource: usize },
    /// Descending remaining capacity of one resource type.
    Cdo { resource: usize },
    Random { seed: u64 },
    Explicit(Vec<ProviderId>),
}

impl Default for OrderingScheme {
    fn default() -> Self {
        OrderingScheme::Cdo { resource: 0 }
    }
}

impl OrderingScheme {
    /// The scheme as seen by a coalition: explicit lists keep only members.
    pub fn restricted_to(&self, members: &BTreeSet<ProviderId>) -> OrderingScheme {
        match self {
            OrderingScheme::Explicit(ids) => {
                OrderingScheme::Explicit(ids.iter().copied().filter(|n| members.contains(n)).collect())
            }
            other => other.clone(),
        }
    }
}

impl fmt::Display for OrderingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderingScheme::Cao { resource } => write!(f, "cao:k={resource}"),
            OrderingScheme::Cdo { resource } => write!(f, "cdo:k={resource}"),
            OrderingScheme::Random { seed } => write!(f, "random:seed={seed}"),
            OrderingScheme::Explicit(ids) => {
                let ids: Vec<String> = ids.iter().map(ToString::to_string).collect();
                write!(f, "explicit:{}", ids.join(","))
            }
        }
    }
}

impl FromStr for OrderingScheme {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::InvalidOrdering(format!("cannot parse {text:?}"));
        let (kind, arg) = text.split_once(':').ok_or_else(bad)?;
        let keyed = |key: &str| arg.strip_prefix(key).and_then(|v| v.strip_prefix('='));
        match kind {
            "cao" | "cdo" => {
                let resource = keyed("k").and_then(|v| v.parse().ok()).ok_or_else(bad)?;
                Ok(if kind == "cao" {
                    OrderingScheme::Cao { resource }
                } else {
                    OrderingScheme::Cdo { resource }
                })
            }
            "random" => {
                let seed = keyed("seed").and_then(|v| v.parse().ok()).ok_or_else(bad)?;
                Ok(OrderingScheme::Random { seed })
            }
            "explicit" => {
                if arg.trim().is_empty() {
                    return Ok(OrderingScheme::Explicit(Vec::new()));
                }
                arg.split(',')
                    .map(|v| v.trim().parse().map(ProviderId).map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()
                    .map(OrderingScheme::Explicit)
            }
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for OrderingScheme {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<OrderingScheme> for String {
    fn from(value: OrderingScheme) -> Self {
        value.to_string()
    }
}

/// Orders the surplus set. Capacity sorts break ties by ascending id.
pub fn order_surplus(
    g2: &BTreeSet<ProviderId>,
    scheme: &OrderingScheme,
    state: &AllocState,
) -> Result<Vec<ProviderId>> {
    let ids: Vec<ProviderId> = g2.iter().copied().collect();
    match scheme {
        OrderingScheme::Cao { resource } | OrderingScheme::Cdo { resource } => {
            let k = *resource;
            let mut keyed = Vec::with_capacity(ids.len());
            for n in ids {
                let cap = state
                    .remaining_capacity
                    .get(&n)
                    .ok_or(Error::UnknownProvider(n))?;
                let c = *cap.as_slice().get(k).ok_or_else(|| {
                    Error::InvalidOrdering(format!("resource {k} out of range for {} types", cap.len()))
                })?;
                keyed.push((c, n));
            }
            let descending = matches!(scheme, OrderingScheme::Cdo { .. });
            keyed.sort_by(|a, b| {
                let by_cap = if descending { b.0.total_cmp(&a.0) } else { a.0.total_cmp(&b.0) };
                by_cap.then(a.1.cmp(&b.1))
            });
            Ok(keyed.into_iter().map(|(_, n)| n).collect())
        }
        OrderingScheme::Random { seed } => {
            let mut ids = ids;
            SplitMix64::new(*seed).shuffle(&mut ids);
            Ok(ids)
        }
        OrderingScheme::Explicit(list) => {
            let mut sorted = list.clone();
            sorted.sort_unstable();
            if sorted != ids {
                return Err(Error::InvalidExplicitOrder {
                    given: list.clone(),
                    expected: ids,
                });
            }
            Ok(list.clone())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpoaResult {
    pub allocation: AllocationTensor,
    pub payoffs: PayoffVector,
    pub g1: BTreeSet<ProviderId>,
    pub g2: BTreeSet<ProviderId>,
    pub order_used: Vec<ProviderId>,
    pub state_final: AllocState,
    pub transfers: Vec<Transfer>,
}

impl GpoaResult {
    pub fn total_payoff(&self) -> f64 {
        self.payoffs.values().map(|p| p.total()).sum()
    }
}

pub fn run_gpoa(s: &Scenario, scheme: &OrderingScheme) -> Result<GpoaResult> {
    s.validate()?;
    let solo = SoloPhase::solve(s)?;
    run_gpoa_with_solo(s, scheme, &solo)
}

/// Runs the sharing phase on top of precomputed stand-alone solutions, which
/// must cover every provider of `s`.
pub fn run_gpoa_with_solo(s: &Scenario, scheme: &OrderingScheme, solo: &SoloPhase) -> Result<GpoaResult> {
    let mut ledger = Ledger::from_solo(s, solo);
    let (g1, g2) = partition_players(s, &ledger.state);
    let order = order_surplus(&g2, scheme, &ledger.state)?;
    if !g1.is_empty() {
        for &n in &order {
            let apps = deficit_apps(s, &ledger.state, &g1);
            if apps.is_empty() {
                break;
            }
            let result = solve_surplus_share(s, n, &ledger.state, &apps);
            ledger.commit_shared(s, n, &result);
        }
    }
    Ok(GpoaResult {
        allocation: ledger.allocation,
        payoffs: ledger.payoffs,
        g1,
        g2,
        order_used: order,
        state_final: ledger.state,
        transfers: ledger.transfers,
    })
}

/// Every permutation of the surplus set, in lexicographic order, each paired
/// with its run.
pub fn run_gpoa_all_orders(s: &Scenario) -> Result<Vec<GpoaResult>> {
    s.validate()?;
    let solo = SoloPhase::solve(s)?;
    run_gpoa_all_orders_with_solo(s, &solo)
}

pub fn run_gpoa_all_orders_with_solo(s: &Scenario, solo: &SoloPhase) -> Result<Vec<GpoaResult>> {
    let state = Ledger::from_solo(s, solo).state;
    let (_, g2) = partition_players(s, &state);
    if g2.len() > MAX_EXHAUSTIVE_SURPLUS {
        return Err(Error::TooManySurplusProviders {
            count: g2.len(),
            max: MAX_EXHAUSTIVE_SURPLUS,
        });
    }
    permutations(&g2.into_iter().collect::<Vec<_>>())
        .into_iter()
        .map(|order| run_gpoa_with_solo(s, &OrderingScheme::Explicit(order), solo))
        .collect()
}

/// Lexicographic permutations of an ascending slice.
pub fn permutations<T: Copy>(items: &[T]) -> Vec<Vec<T>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AppId, ResourceVector};
    use crate::scengen::{generate_scenario, GenSpec};
    use std::collections::BTreeMap;

    fn column_state(caps: &[(u32, f64)]) -> AllocState {
        AllocState {
            remaining_capacity: caps
                .iter()
                .map(|&(n, c)| (ProviderId(n), ResourceVector(vec![c, 0.0, 0.0])))
                .collect(),
            remaining_request: BTreeMap::<AppId, ResourceVector>::new(),
            allocated: BTreeMap::new(),
        }
    }

    fn ids(v: &[u32]) -> Vec<ProviderId> {
        v.iter().copied().map(ProviderId).collect()
    }

    #[test]
    fn capacity_orders() {
        let state = column_state(&[(4, 2.0), (5, 7.0), (6, 5.0)]);
        let g2: BTreeSet<_> = ids(&[4, 5, 6]).into_iter().collect();
        let cao = order_surplus(&g2, &OrderingScheme::Cao { resource: 0 }, &state).unwrap();
        assert_eq!(cao, ids(&[4, 6, 5]));
        let cdo = order_surplus(&g2, &OrderingScheme::Cdo { resource: 0 }, &state).unwrap();
        assert_eq!(cdo, ids(&[5, 6, 4]));
        let random = order_surplus(&g2, &OrderingScheme::Random { seed: 7 }, &state).unwrap();
        assert_eq!(random, ids(&[5, 6, 4]));
    }

    #[test]
    fn capacity_ties_go_to_lower_id() {
        let state = column_state(&[(4, 3.0), (5, 3.0), (6, 1.0)]);
        let g2: BTreeSet<_> = ids(&[4, 5, 6]).into_iter().collect();
        let cdo = order_surplus(&g2, &OrderingScheme::Cdo { resource: 0 }, &state).unwrap();
        assert_eq!(cdo, ids(&[4, 5, 6]));
    }

    #[test]
    fn explicit_must_be_permutation() {
        let state = column_state(&[(4, 2.0), (5, 7.0)]);
        let g2: BTreeSet<_> = ids(&[4, 5]).into_iter().collect();
        let err = order_surplus(&g2, &OrderingScheme::Explicit(ids(&[4])), &state).unwrap_err();
        assert!(matches!(err, Error::InvalidExplicitOrder { .. }));
        let err = order_surplus(&g2, &OrderingScheme::Cao { resource: 3 }, &state).unwrap_err();
        assert!(matches!(err, Error::InvalidOrdering(_)));
    }

    #[test]
    fn scheme_strings_round_trip() {
        for text in ["cao:k=0", "cdo:k=2", "random:seed=99", "explicit:4,5,6"] {
            let scheme: OrderingScheme = text.parse().unwrap();
            assert_eq!(scheme.to_string(), text);
        }
        assert!("cdo".parse::<OrderingScheme>().is_err());
        assert!("explicit:a".parse::<OrderingScheme>().is_err());
        let json = serde_json::to_string(&OrderingScheme::Random { seed: 3 }).unwrap();
        assert_eq!(json, "\"random:seed=3\"");
    }

    #[test]
    fn self_sufficient_is_solo() {
        let mut s = generate_scenario(&GenSpec::new(1, 3)).unwrap();
        s.providers[0].capacity = s.providers[0].capacity.scaled(4.0);
        let r = run_gpoa(&s, &OrderingScheme::default()).unwrap();
        assert!(r.g1.is_empty());
        assert!(r.payoffs.values().all(|p| p.sharing == 0.0 && p.bonus == 0.0));
    }

    #[test]
    fn deficit_served_and_feasible() {
        let s = generate_scenario(&GenSpec::new(1, 42)).unwrap();
        let r = run_gpoa(&s, &OrderingScheme::default()).unwrap();
        assert_eq!(r.g1, [ProviderId(1)].into_iter().collect());
        assert_eq!(r.g2, [ProviderId(2), ProviderId(3)].into_iter().collect());
        assert!(r.allocation.check_feasibility(&s).is_empty());
        assert!(r.payoffs[&ProviderId(1)].bonus > 0.0);
        assert_eq!(r.payoffs[&ProviderId(1)].sharing, 0.0);
        for n in &r.g2 {
            assert_eq!(r.payoffs[n].bonus, 0.0);
        }
    }

    #[test]
    fn all_orders_lists_every_permutation() {
        let s = generate_scenario(&GenSpec::new(3, 1)).unwrap();
        let runs = run_gpoa_all_orders(&s).unwrap();
        assert_eq!(runs.len(), 6);
        for r in &runs {
            assert!(r.allocation.check_feasibility(&s).is_empty());
        }
        assert_eq!(permutations(&[1, 2, 3]).len(), 6);
        assert_eq!(permutations(&[1, 2])[1], vec![2, 1]);
    }
}
