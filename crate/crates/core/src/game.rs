//! The coalition game over providers.
//!
//! A coalition's value is what its members earn when only they share with
//! each other. Sweeping every coalition gives the data needed to check
//! superadditivity, rationality and core membership of the grand coalition,
//! all on realized payoff vectors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpoa::{permutations, run_gpoa_with_solo, OrderingScheme};
use crate::model::{tol, AllocationTensor, ProviderId, Scenario};
use crate::ppmpoa::run_ppmpoa_with_solo;
use crate::sharing::{partition_players, realized_payoffs, Ledger, PayoffVector, SoloPhase, Transfer};

pub const MAX_COALITION_PROVIDERS: usize = 12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Gpoa,
    Ppmpoa,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Gpoa => "gpoa",
            Algorithm::Ppmpoa => "ppmpoa",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gpoa" => Ok(Algorithm::Gpoa),
            "ppmpoa" => Ok(Algorithm::Ppmpoa),
            other => Err(Error::InvalidSpec(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Algorithm-independent view of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmRun {
    pub allocation: AllocationTensor,
    pub payoffs: PayoffVector,
    /// Surplus order for GPOA; surplus provider of each round for PPMPOA.
    pub order_used: Vec<ProviderId>,
    pub transfers: Vec<Transfer>,
}

impl AlgorithmRun {
    pub fn value(&self) -> f64 {
        self.payoffs.values().map(|p| p.total()).sum()
    }
}

pub fn run_algorithm_with_solo(
    s: &Scenario,
    solo: &SoloPhase,
    scheme: &OrderingScheme,
    algorithm: Algorithm,
) -> Result<AlgorithmRun> {
    Ok(match algorithm {
        Algorithm::Gpoa => {
            let r = run_gpoa_with_solo(s, scheme, solo)?;
            AlgorithmRun {
                allocation: r.allocation,
                payoffs: r.payoffs,
                order_used: r.order_used,
                transfers: r.transfers,
            }
        }
        Algorithm::Ppmpoa => {
            let r = run_ppmpoa_with_solo(s, solo);
            AlgorithmRun {
                allocation: r.allocation,
                payoffs: r.payoffs,
                order_used: r.matches.iter().map(|m| m.n).collect(),
                transfers: r.transfers,
            }
        }
    })
}

pub fn run_algorithm(s: &Scenario, scheme: &OrderingScheme, algorithm: Algorithm) -> Result<AlgorithmRun> {
    s.validate()?;
    let solo = SoloPhase::solve(s)?;
    run_algorithm_with_solo(s, &solo, scheme, algorithm)
}

/// Value of coalition `members` and each member's payoff.
pub fn coalition_value(
    s: &Scenario,
    members: &BTreeSet<ProviderId>,
    scheme: &OrderingScheme,
    algorithm: Algorithm,
) -> Result<(f64, BTreeMap<ProviderId, f64>)> {
    if members.is_empty() {
        return Err(Error::EmptyCoalition);
    }
    if let Some(&n) = members.iter().find(|n| s.provider(**n).is_none()) {
        return Err(Error::UnknownProvider(n));
    }
    s.validate()?;
    let sub = s.restrict(members);
    let solo = SoloPhase::solve(&sub)?;
    let run = run_algorithm_with_solo(&sub, &solo, &scheme.restricted_to(members), algorithm)?;
    let payoffs = member_totals(&run.payoffs);
    Ok((payoffs.values().sum(), payoffs))
}

fn member_totals(payoffs: &PayoffVector) -> BTreeMap<ProviderId, f64> {
    payoffs.iter().map(|(n, p)| (*n, p.total())).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalitionEntry {
    /// Bit `i` set when the `i`-th smallest provider id is a member.
    pub mask: u32,
    pub members: Vec<ProviderId>,
    pub value: f64,
    pub payoffs: BTreeMap<ProviderId, f64>,
    pub order_used: Vec<ProviderId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalitionReport {
    pub algorithm: Algorithm,
    pub scheme: OrderingScheme,
    pub providers: Vec<ProviderId>,
    /// One entry per nonempty coalition, ascending by mask.
    pub entries: Vec<CoalitionEntry>,
}

impl CoalitionReport {
    pub fn entry(&self, mask: u32) -> Option<&CoalitionEntry> {
        let i = (mask as usize).checked_sub(1)?;
        self.entries.get(i).filter(|e| e.mask == mask)
    }

    pub fn grand_mask(&self) -> u32 {
        ((1u64 << self.providers.len()) - 1) as u32
    }

    pub fn grand(&self) -> Option<&CoalitionEntry> {
        self.entry(self.grand_mask())
    }

    pub fn mask_of(&self, members: &[ProviderId]) -> u32 {
        self.providers
            .iter()
            .enumerate()
            .filter(|(_, n)| members.contains(n))
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    /// The report for a one-provider game entry, i.e. the provider acting alone.
    pub fn solo_value(&self, n: ProviderId) -> Option<f64> {
        self.entry(self.mask_of(&[n])).map(|e| e.value)
    }
}

fn members_of(providers: &[ProviderId], mask: u32) -> BTreeSet<ProviderId> {
    providers
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, n)| *n)
        .collect()
}

/// Evaluates every nonempty coalition. Stand-alone solutions are shared
/// across coalitions since they do not depend on who else is present.
pub fn enumerate_coalitions(s: &Scenario, scheme: &OrderingScheme, algorithm: Algorithm) -> Result<CoalitionReport> {
    let providers = s.provider_ids();
    if providers.len() > MAX_COALITION_PROVIDERS {
        return Err(Error::TooManyProviders {
            count: providers.len(),
            max: MAX_COALITION_PROVIDERS,
        });
    }
    s.validate()?;
    let solo = SoloPhase::solve(s)?;
    let masks: Vec<u32> = (1..1u32 << providers.len()).collect();
    let entries = masks
        .into_par_iter()
        .map(|mask| {
            let members = members_of(&providers, mask);
            let sub = s.restrict(&members);
            let run = run_algorithm_with_solo(&sub, &solo.restricted(&members), &scheme.restricted_to(&members), algorithm)?;
            let payoffs = member_totals(&run.payoffs);
            Ok(CoalitionEntry {
                mask,
                members: members.into_iter().collect(),
                value: payoffs.values().sum(),
                payoffs,
                order_used: run.order_used,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoalitionReport {
        algorithm,
        scheme: scheme.clone(),
        providers,
        entries,
    })
}

/// One explicit scheme per permutation of the grand coalition's surplus set.
pub fn all_order_schemes(s: &Scenario) -> Result<Vec<OrderingScheme>> {
    let solo = SoloPhase::solve(s)?;
    let state = Ledger::from_solo(s, &solo).state;
    let (_, g2) = partition_players(s, &state);
    if g2.len() > crate::gpoa::MAX_EXHAUSTIVE_SURPLUS {
        return Err(Error::TooManySurplusProviders {
            count: g2.len(),
            max: crate::gpoa::MAX_EXHAUSTIVE_SURPLUS,
        });
    }
    Ok(permutations(&g2.into_iter().collect::<Vec<_>>())
        .into_iter()
        .map(OrderingScheme::Explicit)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub coalitions: Vec<Vec<ProviderId>>,
    pub player: Option<ProviderId>,
    /// The offending quantity and the threshold it crossed.
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyVerdict {
    pub property: String,
    pub passed: bool,
    pub witnesses: Vec<Witness>,
}

impl PropertyVerdict {
    fn from_witnesses(property: &str, witnesses: Vec<Witness>) -> Self {
        PropertyVerdict {
            property: property.to_string(),
            passed: witnesses.is_empty(),
            witnesses,
        }
    }
}

fn superadditivity_tol(v: f64) -> f64 {
    1e-6 * (1.0 + v.abs())
}

/// `v(S1 ∪ S2) >= v(S1) + v(S2)` for every pair of disjoint coalitions.
pub fn check_superadditivity(report: &CoalitionReport) -> PropertyVerdict {
    let mut witnesses = Vec::new();
    for a in &report.entries {
        for b in report.entries.iter().filter(|b| b.mask > a.mask && b.mask & a.mask == 0) {
            let Some(union) = report.entry(a.mask | b.mask) else { continue };
            let bound = a.value + b.value;
            if union.value < bound - superadditivity_tol(union.value) {
                witnesses.push(Witness {
                    coalitions: vec![a.members.clone(), b.members.clone()],
                    player: None,
                    value: union.value,
                    bound,
                });
            }
        }
    }
    PropertyVerdict::from_witnesses("superadditivity", witnesses)
}

/// Individual rationality of the grand coalition (`x_n >= v({n}) - 1e-6`) and
/// group rationality (`sum x_n = v(N)` to 1e-9 relative).
pub fn check_rationality(report: &CoalitionReport) -> PropertyVerdict {
    let mut witnesses = Vec::new();
    let Some(grand) = report.grand() else {
        return PropertyVerdict::from_witnesses("rationality", witnesses);
    };
    for &n in &report.providers {
        let (Some(alone), Some(&x)) = (report.solo_value(n), grand.payoffs.get(&n)) else {
            continue;
        };
        if x < alone - 1e-6 {
            witnesses.push(Witness {
                coalitions: vec![grand.members.clone()],
                player: Some(n),
                value: x,
                bound: alone,
            });
        }
    }
    let sum: f64 = grand.payoffs.values().sum();
    if (sum - grand.value).abs() > 1e-9 * grand.value.abs().max(1.0) {
        witnesses.push(Witness {
            coalitions: vec![grand.members.clone()],
            player: None,
            value: sum,
            bound: grand.value,
        });
    }
    PropertyVerdict::from_witnesses("rationality", witnesses)
}

/// No proper coalition gives every one of its members strictly more than
/// the grand coalition does.
pub fn check_no_blocking_coalition(report: &CoalitionReport) -> PropertyVerdict {
    let mut witnesses = Vec::new();
    let Some(grand) = report.grand() else {
        return PropertyVerdict::from_witnesses("no_blocking_coalition", witnesses);
    };
    for entry in report.entries.iter().filter(|e| e.mask != grand.mask) {
        let blocks = entry.members.iter().all(|n| {
            let (y, x) = (entry.payoffs[n], grand.payoffs[n]);
            y > x + tol(x)
        });
        if blocks {
            let gain = entry
                .members
                .iter()
                .map(|n| entry.payoffs[n] - grand.payoffs[n])
                .fold(f64::INFINITY, f64::min);
            witnesses.push(Witness {
                coalitions: vec![entry.members.clone()],
                player: None,
                value: gain,
                bound: 0.0,
            });
        }
    }
    PropertyVerdict::from_witnesses("no_blocking_coalition", witnesses)
}

/// The grand coalition's value is the largest of all coalitions.
pub fn check_grand_coalition_maximal(report: &CoalitionReport) -> PropertyVerdict {
    let mut witnesses = Vec::new();
    if let Some(grand) = report.grand() {
        for entry in &report.entries {
            if entry.value > grand.value + tol(grand.value) {
                witnesses.push(Witness {
                    coalitions: vec![entry.members.clone()],
                    player: None,
                    value: grand.value,
                    bound: entry.value,
                });
            }
        }
    }
    PropertyVerdict::from_witnesses("grand_coalition_maximal", witnesses)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MisreportOutcome {
    pub provider: ProviderId,
    pub capacity_factor: f64,
    pub request_factor: f64,
    pub truthful: f64,
    pub misreport: f64,
}

impl MisreportOutcome {
    pub fn gain(&self) -> f64 {
        self.misreport - self.truthful
    }
}

/// Runs the algorithm on the truthful scenario and on one where `n` reports
/// scaled capacity and requests, and prices both transfer logs against the
/// truth.
pub fn misreport_experiment(
    s: &Scenario,
    n: ProviderId,
    capacity_factor: f64,
    request_factor: f64,
    scheme: &OrderingScheme,
    algorithm: Algorithm,
) -> Result<MisreportOutcome> {
    for f in [capacity_factor, request_factor] {
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::InvalidFactor(f));
        }
    }
    let reported = s.with_report(n, capacity_factor, request_factor)?;
    let truthful = run_algorithm(s, scheme, algorithm)?;
    let lying = run_algorithm(&reported, scheme, algorithm)?;
    let payoff = |transfers: &[Transfer]| realized_payoffs(s, transfers)[&n].total();
    Ok(MisreportOutcome {
        provider: n,
        capacity_factor,
        request_factor,
        truthful: payoff(&truthful.transfers),
        misreport: payoff(&lying.transfers),
    })
}
