//! Matching-based sharing.
//!
//! Instead of every surplus provider serving every deficit application, each
//! round pairs one deficit provider `m` with one surplus provider `n`. All
//! pairs are evaluated on the current state, the best pair is committed, and
//! the loop repeats until one side is empty or no pair gains anything.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{AllocState, AllocationTensor, ProviderId, Scenario};
use crate::sharing::{partition_players, Ledger, PayoffVector, SoloPhase, Transfer};
use crate::subsolver::{solve_pair_match, SubproblemResult};

/// Candidate values of every (deficit, surplus) pair on one state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingMatrix {
    pub rows: Vec<ProviderId>,
    pub cols: Vec<ProviderId>,
    /// `J[m][n]`: value `n` earns serving `m`.
    pub value: Vec<Vec<f64>>,
    /// `R[m][n]`: resources `n` would spend on `m`.
    pub resources: Vec<Vec<f64>>,
    #[serde(skip)]
    pub allocs: Vec<Vec<SubproblemResult>>,
}

impl MatchingMatrix {
    /// Largest value, then fewest resources, then lowest `(m, n)`.
    pub fn best_cell(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..self.rows.len() {
            for j in 0..self.cols.len() {
                let better = match best {
                    None => true,
                    Some((bi, bj)) => {
                        let (v, bv) = (self.value[i][j], self.value[bi][bj]);
                        v > bv || (v == bv && self.resources[i][j] < self.resources[bi][bj])
                    }
                };
                if better {
                    best = Some((i, j));
                }
            }
        }
        best
    }

    pub fn position(&self, m: ProviderId, n: ProviderId) -> Option<(usize, usize)> {
        let i = self.rows.iter().position(|&r| r == m)?;
        let j = self.cols.iter().position(|&c| c == n)?;
        Some((i, j))
    }
}

/// Evaluates every pair against `state` without modifying it.
pub fn build_matching_matrix(
    s: &Scenario,
    state: &AllocState,
    g1: &BTreeSet<ProviderId>,
    g2: &BTreeSet<ProviderId>,
) -> MatchingMatrix {
    let rows: Vec<ProviderId> = g1.iter().copied().collect();
    let cols: Vec<ProviderId> = g2.iter().copied().collect();
    let cells: Vec<_> = rows
        .par_iter()
        .map(|&m| {
            cols.iter()
                .map(|&n| solve_pair_match(s, m, n, state))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut value = Vec::with_capacity(rows.len());
    let mut resources = Vec::with_capacity(rows.len());
    let mut allocs = Vec::with_capacity(rows.len());
    for row in cells {
        value.push(row.iter().map(|c| c.value).collect());
        resources.push(row.iter().map(|c| c.resources).collect());
        allocs.push(row.into_iter().map(|c| c.result).collect());
    }
    MatchingMatrix {
        rows,
        cols,
        value,
        resources,
        allocs,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub round: usize,
    pub m: ProviderId,
    pub n: ProviderId,
    pub value: f64,
    pub resources: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpmpoaResult {
    pub allocation: AllocationTensor,
    pub payoffs: PayoffVector,
    pub g1: BTreeSet<ProviderId>,
    pub g2: BTreeSet<ProviderId>,
    pub matches: Vec<MatchRecord>,
    pub rounds: usize,
    pub state_final: AllocState,
    pub transfers: Vec<Transfer>,
}

impl PpmpoaResult {
    pub fn total_payoff(&self) -> f64 {
        self.payoffs.values().map(|p| p.total()).sum()
    }
}

pub fn run_ppmpoa(s: &Scenario) -> Result<PpmpoaResult> {
    s.validate()?;
    let solo = SoloPhase::solve(s)?;
    Ok(run_ppmpoa_with_solo(s, &solo))
}

/// Upper bound on rounds: every round either grants at least a unit or
/// removes a provider.
fn round_cap(s: &Scenario) -> usize {
    let demand: f64 = s.applications.iter().map(|a| a.request.sum()).sum();
    (demand / s.delta).ceil() as usize + s.providers.len() + 1
}

/// Drops `n` once it has nothing left and `m` once its applications are served.
fn prune(s: &Scenario, state: &AllocState, g1: &mut BTreeSet<ProviderId>, g2: &mut BTreeSet<ProviderId>, m: ProviderId, n: ProviderId) {
    if state.remaining_capacity.get(&n).is_none_or(|c| c.is_exhausted()) {
        g2.remove(&n);
    }
    if !s.apps_of(m).iter().any(|a| state.has_unmet_request(a.id)) {
        g1.remove(&m);
    }
}

pub fn run_ppmpoa_with_solo(s: &Scenario, solo: &SoloPhase) -> PpmpoaResult {
    let mut ledger = Ledger::from_solo(s, solo);
    let (g1_init, g2_init) = partition_players(s, &ledger.state);
    let (mut g1, mut g2) = (g1_init.clone(), g2_init.clone());
    let mut matches = Vec::new();
    let cap = round_cap(s);

    while !g1.is_empty() && !g2.is_empty() && matches.len() < cap {
        let matrix = build_matching_matrix(s, &ledger.state, &g1, &g2);
        let Some((i, j)) = matrix.best_cell() else { break };
        if matrix.value[i][j] <= s.epsilon_gain {
            break;
        }
        let (m, n) = (matrix.rows[i], matrix.cols[j]);
        ledger.commit_shared(s, n, &matrix.allocs[i][j]);
        matches.push(MatchRecord {
            round: matches.len() + 1,
            m,
            n,
            value: matrix.value[i][j],
            resources: matrix.resources[i][j],
        });
        prune(s, &ledger.state, &mut g1, &mut g2, m, n);
    }

    PpmpoaResult {
        allocation: ledger.allocation,
        payoffs: ledger.payoffs,
        g1: g1_init,
        g2: g2_init,
        rounds: matches.len(),
        matches,
        state_final: ledger.state,
        transfers: ledger.transfers,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityIssue {
    /// Another deficit provider was worth more to `n` than the committed one.
    Preferred,
    /// The recorded pair was not available in that round.
    Unavailable,
    /// The history ended while a pair still had positive value.
    Unmatched,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockingPair {
    pub round: usize,
    pub issue: StabilityIssue,
    /// The pair that blocks, or the recorded pair when it was unavailable.
    pub m: ProviderId,
    pub n: ProviderId,
    pub value: f64,
    /// Deficit provider actually committed to `n` in that round, with its value.
    pub committed: Option<(ProviderId, f64)>,
}

/// Replays the match history from scratch and reports every pair `(m', n)`
/// where `n` would have earned strictly more from `m'` than from the
/// provider it was committed to.
pub fn check_matching_stability(result: &PpmpoaResult, s: &Scenario) -> Result<Vec<BlockingPair>> {
    let solo = SoloPhase::solve(s)?;
    let mut ledger = Ledger::from_solo(s, &solo);
    let (mut g1, mut g2) = partition_players(s, &ledger.state);
    let mut found = Vec::new();

    for record in &result.matches {
        let matrix = build_matching_matrix(s, &ledger.state, &g1, &g2);
        let Some((i, j)) = matrix.position(record.m, record.n) else {
            found.push(BlockingPair {
                round: record.round,
                issue: StabilityIssue::Unavailable,
                m: record.m,
                n: record.n,
                value: record.value,
                committed: None,
            });
            return Ok(found);
        };
        let committed = matrix.value[i][j];
        for (row, &m) in matrix.rows.iter().enumerate() {
            if matrix.value[row][j] > committed {
                found.push(BlockingPair {
                    round: record.round,
                    issue: StabilityIssue::Preferred,
                    m,
                    n: record.n,
                    value: matrix.value[row][j],
                    committed: Some((record.m, committed)),
                });
            }
        }
        ledger.commit_shared(s, record.n, &matrix.allocs[i][j]);
        prune(s, &ledger.state, &mut g1, &mut g2, record.m, record.n);
    }

    if !g1.is_empty() && !g2.is_empty() {
        let matrix = build_matching_matrix(s, &ledger.state, &g1, &g2);
        let round = result.matches.len() + 1;
        for (i, &m) in matrix.rows.iter().enumerate() {
            for (j, &n) in matrix.cols.iter().enumerate() {
                if matrix.value[i][j] > s.epsilon_gain {
                    found.push(BlockingPair {
                        round,
                        issue: StabilityIssue::Unmatched,
                        m,
                        n,
                        value: matrix.value[i][j],
                        committed: None,
                    });
                }
            }
        }
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scengen::{generate_scenario, GenSpec};

    fn hand_matrix(value: Vec<Vec<f64>>, resources: Vec<Vec<f64>>) -> MatchingMatrix {
        let rows = (1..=value.len() as u32).map(ProviderId).collect();
        let cols = (1..=value[0].len() as u32).map(|n| ProviderId(n + 10)).collect();
        MatchingMatrix {
            rows,
            cols,
            value,
            resources,
            allocs: Vec::new(),
        }
    }

    #[test]
    fn best_cell_rules() {
        let m = hand_matrix(vec![vec![5.0, 3.0], vec![2.0, 4.0]], vec![vec![1.0; 2]; 2]);
        assert_eq!(m.best_cell(), Some((0, 0)));
        let m = hand_matrix(vec![vec![4.0, 4.0]], vec![vec![10.0, 7.0]]);
        assert_eq!(m.best_cell(), Some((0, 1)));
        let m = hand_matrix(vec![vec![4.0], vec![4.0]], vec![vec![7.0], vec![7.0]]);
        assert_eq!(m.best_cell(), Some((0, 0)));
    }

    #[test]
    fn self_sufficient_has_no_rounds() {
        let mut s = generate_scenario(&GenSpec::new(1, 3)).unwrap();
        s.providers[0].capacity = s.providers[0].capacity.scaled(4.0);
        let r = run_ppmpoa(&s).unwrap();
        assert_eq!(r.rounds, 0);
        assert!(check_matching_stability(&r, &s).unwrap().is_empty());
    }

    #[test]
    fn matrix_evaluation_is_pure() {
        let s = generate_scenario(&GenSpec::new(3, 2)).unwrap();
        let solo = SoloPhase::solve(&s).unwrap();
        let state = Ledger::from_solo(&s, &solo).state;
        let before = state.clone();
        let (g1, g2) = partition_players(&s, &state);
        let matrix = build_matching_matrix(&s, &state, &g1, &g2);
        assert!(state.bitwise_eq(&before));
        assert_eq!(matrix.rows.len(), 3);
        assert_eq!(matrix.cols.len(), 3);
    }

    #[test]
    fn run_is_feasible_and_stable() {
        let s = generate_scenario(&GenSpec::new(3, 4)).unwrap();
        let r = run_ppmpoa(&s).unwrap();
        assert!(r.rounds > 0);
        assert!(r.allocation.check_feasibility(&s).is_empty());
        assert!(check_matching_stability(&r, &s).unwrap().is_empty());
        for (k, rec) in r.matches.iter().enumerate() {
            assert_eq!(rec.round, k + 1);
        }
    }

    #[test]
    fn non_maximal_commit_is_reported() {
        let s = generate_scenario(&GenSpec::new(3, 4)).unwrap();
        let solo = SoloPhase::solve(&s).unwrap();
        let state = Ledger::from_solo(&s, &solo).state;
        let (g1, g2) = partition_players(&s, &state);
        let matrix = build_matching_matrix(&s, &state, &g1, &g2);
        let (bi, bj) = matrix.best_cell().unwrap();
        let worse = (0..matrix.rows.len())
            .find(|&i| matrix.value[i][bj] < matrix.value[bi][bj])
            .expect("column has a lower cell");
        let mut r = run_ppmpoa(&s).unwrap();
        r.matches = vec![MatchRecord {
            round: 1,
            m: matrix.rows[worse],
            n: matrix.cols[bj],
            value: matrix.value[worse][bj],
            resources: matrix.resources[worse][bj],
        }];
        let found = check_matching_stability(&r, &s).unwrap();
        let preferred: Vec<_> = found
            .iter()
            .filter(|b| b.issue == StabilityIssue::Preferred)
            .collect();
        assert!(preferred.iter().any(|b| b.m == matrix.rows[bi] && b.n == matrix.cols[bj]));
    }

    #[test]
    fn empty_history_of_self_sufficient_scenario_is_stable() {
        let mut s = generate_scenario(&GenSpec::new(1, 8)).unwrap();
        s.providers[0].capacity = s.providers[0].capacity.scaled(4.0);
        let r = run_ppmpoa(&s).unwrap();
        assert!(r.matches.is_empty());
        assert!(check_matching_stability(&r, &s).unwrap().is_empty());
    }
}
