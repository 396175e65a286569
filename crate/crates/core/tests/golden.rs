//! Frozen values from an independent re-implementation of the generator, the
//! greedy solver and the ordered sharing phase.

use coalition_share::gpoa::{run_gpoa, OrderingScheme};
use coalition_share::scengen::{generate_scenario, GenSpec, UtilityKind};
use coalition_share::{ProviderId, Scenario, UtilitySpec};

fn close(actual: f64, expected: f64) -> bool {
    (actual - expected).abs() <= 1e-9 * expected.abs().max(1.0)
}

fn scenario(setting: u8, seed: u64, kind: UtilityKind) -> Scenario {
    generate_scenario(&GenSpec::new(setting, seed).with_utility(kind)).unwrap()
}

fn ids(v: &[u32]) -> Vec<ProviderId> {
    v.iter().copied().map(ProviderId).collect()
}

/// `(provider, solo, sharing, bonus)`
type Row = (u32, f64, f64, f64);

fn check(s: &Scenario, scheme: OrderingScheme, g1: &[u32], g2: &[u32], order: &[u32], rows: &[Row]) {
    let r = run_gpoa(s, &scheme).unwrap();
    assert_eq!(r.g1.iter().copied().collect::<Vec<_>>(), ids(g1));
    assert_eq!(r.g2.iter().copied().collect::<Vec<_>>(), ids(g2));
    assert_eq!(r.order_used, ids(order));
    for &(n, solo, sharing, bonus) in rows {
        let p = r.payoffs[&ProviderId(n)];
        assert!(close(p.solo, solo), "provider {n} solo {} vs {solo}", p.solo);
        assert!(close(p.sharing, sharing), "provider {n} sharing {} vs {sharing}", p.sharing);
        assert!(close(p.bonus, bonus), "provider {n} bonus {} vs {bonus}", p.bonus);
    }
    assert!(r.allocation.check_feasibility(s).is_empty());
}

#[test]
fn generator_first_draws() {
    let s = scenario(1, 42, UtilityKind::Linear);
    let app = &s.applications[0];
    let expected = [7.674083908946411, 2.439193535892281, 3.507410172296249];
    for (a, e) in app.request.iter().zip(expected) {
        assert!(close(*a, e));
    }
    let cap = [7.368723550534405, 5.993575971588015, 8.190421105734114];
    for (a, e) in s.providers[0].capacity.iter().zip(cap) {
        assert!(close(*a, e));
    }
    match app.utility {
        UtilitySpec::Linear { a, c } => {
            assert!(close(a, 1.6782491892441498));
            assert!(close(c, 0.9419273254004865));
        }
        other => panic!("unexpected utility {other:?}"),
    }
}

#[test]
fn setting1_linear_cdo() {
    let s = scenario(1, 42, UtilityKind::Linear);
    check(
        &s,
        OrderingScheme::Cdo { resource: 0 },
        &[1],
        &[2, 3],
        &[2, 3],
        &[
            (1, 49.714727447983776, 0.0, 3.085903826082729),
            (2, 66.98713550166514, 38.98219514651062, 0.0),
            (3, 57.47375212058931, 0.0, 0.0),
        ],
    );
}

#[test]
fn setting1_linear_explicit_orders() {
    let s = scenario(1, 42, UtilityKind::Linear);
    check(
        &s,
        OrderingScheme::Explicit(ids(&[3, 2])),
        &[1],
        &[2, 3],
        &[3, 2],
        &[
            (1, 49.714727447983776, 0.0, 3.0859038260827294),
            (2, 66.98713550166514, 8.6035577593328, 0.0),
            (3, 57.47375212058931, 31.27650304325985, 0.0),
        ],
    );
    let a = run_gpoa(&s, &OrderingScheme::Explicit(ids(&[2, 3]))).unwrap();
    let b = run_gpoa(&s, &OrderingScheme::Explicit(ids(&[3, 2]))).unwrap();
    assert!(close(a.total_payoff(), 216.24371404283158));
    assert!(close(b.total_payoff(), 217.14157969891357));
}

#[test]
fn setting1_sigmoid_cdo() {
    let s = scenario(1, 42, UtilityKind::Sigmoid);
    check(
        &s,
        OrderingScheme::Cdo { resource: 0 },
        &[1],
        &[2, 3],
        &[2, 3],
        &[
            (1, 10.826270468364193, 0.0, 2.6198719840195523),
            (2, 13.5, 3.0538575476162553, 0.0),
            (3, 13.5, 0.0, 0.0),
        ],
    );
}

#[test]
fn setting2_linear_cdo() {
    let s = scenario(2, 7, UtilityKind::Linear);
    check(
        &s,
        OrderingScheme::Cdo { resource: 0 },
        &[1],
        &[2, 3],
        &[2, 3],
        &[
            (1, 318.5289826772907, 0.0, 27.78675626759332),
            (2, 486.45302492427584, 185.313883972192, 0.0),
            (3, 484.39274458004564, 0.0, 0.0),
        ],
    );
}

#[test]
fn setting3_linear_cdo() {
    let s = scenario(3, 5, UtilityKind::Linear);
    check(
        &s,
        OrderingScheme::Cdo { resource: 0 },
        &[1, 2, 3],
        &[4, 5, 6],
        &[4, 6, 5],
        &[
            (1, 108.83392115185663, 0.0, 8.475622699644294),
            (2, 85.29497590437482, 0.0, 7.176570648806123),
            (3, 97.83564362908612, 0.0, 8.244618826065391),
            (4, 135.91812104409064, 88.44685643273155, 0.0),
            (5, 153.7667578844567, 14.168789292342296, 0.0),
            (6, 191.0882398062758, 49.88686310652959, 0.0),
        ],
    );
}

#[test]
fn setting3_sigmoid_cao() {
    let s = scenario(3, 5, UtilityKind::Sigmoid);
    check(
        &s,
        OrderingScheme::Cao { resource: 0 },
        &[1, 2, 3],
        &[4, 5, 6],
        &[5, 6, 4],
        &[
            (1, 20.557330830816493, 0.0, 6.311505706869854),
            (2, 20.990794460713964, 0.0, 5.8797459118484445),
            (3, 20.517004414965125, 0.0, 6.37388380669875),
            (4, 27.0, 5.06929200327396, 0.0),
            (5, 27.0, 11.822072272464812, 0.0),
            (6, 27.0, 8.743224989773998, 0.0),
        ],
    );
}
