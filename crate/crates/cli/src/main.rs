mod output;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use coalition_share::game::{
    all_order_schemes, check_grand_coalition_maximal, check_no_blocking_coalition, check_rationality,
    check_superadditivity, enumerate_coalitions, misreport_experiment, run_algorithm, Algorithm, CoalitionReport,
    PropertyVerdict,
};
use coalition_share::gpoa::{run_gpoa, run_gpoa_all_orders, OrderingScheme};
use coalition_share::metrics::MetricsReport;
use coalition_share::ppmpoa::{check_matching_stability, run_ppmpoa};
use coalition_share::scengen::{generate_scenario, GenSpec, UtilityKind};
use coalition_share::sharing::SoloPhase;
use coalition_share::subsolver::{allocate_oracle, single_provider_spec, solve_single_provider};
use coalition_share::{AllocationTensor, ProviderId, Scenario};

use output::{emit_csv, emit_json, emit_json_merged, num, RunManifest};

/// Misreporting may not raise a provider's realized payoff by more than this.
const TRUTHFUL_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "coalition-share", version, about = "Resource sharing among edge cloud providers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded scenario.
    Gen {
        #[arg(long)]
        setting: u8,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "linear")]
        utility: UtilityKind,
        #[arg(long)]
        deficit_scale: Option<f64>,
        #[arg(long)]
        surplus_scale: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every provider serving only its own applications.
    Solo {
        #[arg(long)]
        scenario: PathBuf,
        /// Also solve each provider exhaustively on this grid and report the gap.
        #[arg(long)]
        oracle_grid_step: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ordered surplus sharing.
    Gpoa {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "cdo:k=0")]
        order: OrderingScheme,
        /// Run every order of the surplus providers (at most 4 of them).
        #[arg(long)]
        all_orders: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Matching-based sharing.
    Ppmpoa {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-round matches as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Coalition sweep with superadditivity, rationality and core checks.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "gpoa")]
        algorithm: Algorithm,
        #[arg(long, default_value = "cdo:k=0")]
        order: OrderingScheme,
        #[arg(long)]
        all_orders: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Payoff of one provider when it misreports capacity or requests.
    Misreport {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        provider: u32,
        #[arg(long, default_value_t = 1.0)]
        cap_factor: f64,
        #[arg(long, default_value_t = 1.0)]
        req_factor: f64,
        #[arg(long, default_value = "gpoa")]
        algorithm: Algorithm,
        #[arg(long, default_value = "cdo:k=0")]
        order: OrderingScheme,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One CSV row per coalition with member payoffs and verdicts.
    Table3 {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "gpoa")]
        algorithm: Algorithm,
        #[arg(long, default_value = "cdo:k=0")]
        order: OrderingScheme,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stand-alone, GPOA and PPMPOA side by side.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        /// GPOA orderings to include; CDO on resource 0 when none are given.
        #[arg(long = "order")]
        orders: Vec<OrderingScheme>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metrics of an allocation.
    Report {
        #[arg(long)]
        scenario: PathBuf,
        /// An allocation, or any result file containing one.
        #[arg(long)]
        allocation: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    output::start_clock();
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| run(cli.command));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("COALITION_SHARE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .with_context(|| format!("COALITION_SHARE_THREADS must be a count, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("cannot configure thread pool")
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read scenario {}", path.display()))?;
    let s = Scenario::from_json(&text).with_context(|| format!("cannot parse scenario {}", path.display()))?;
    s.validate().with_context(|| format!("scenario {}", path.display()))?;
    Ok(s)
}

/// Returns whether every requested verification passed.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Gen {
            setting,
            seed,
            utility,
            deficit_scale,
            surplus_scale,
            out,
        } => {
            let mut spec = GenSpec::new(setting, seed).with_utility(utility);
            if let Some(v) = deficit_scale {
                spec.deficit_scale = v;
            }
            if let Some(v) = surplus_scale {
                spec.surplus_scale = v;
            }
            let s = generate_scenario(&spec)?;
            let mut m = RunManifest::new("gen");
            m.seeds.push(seed);
            m.output(out.as_ref());
            emit_json_merged(out.as_ref(), &mut m, &s)?;
            Ok(true)
        }
        Command::Solo {
            scenario,
            oracle_grid_step,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let mut rows = Vec::new();
            for n in s.provider_ids() {
                let greedy = solve_single_provider(&s, n)?;
                let oracle = match oracle_grid_step {
                    Some(step) => Some(allocate_oracle(&single_provider_spec(&s, n)?, step)?),
                    None => None,
                };
                let gap = oracle.as_ref().map(|o| o.objective_value - greedy.objective_value);
                rows.push(json!({ "provider": n, "greedy": greedy, "oracle": oracle, "gap": gap }));
            }
            let mut m = RunManifest::new("solo").scenario(&scenario);
            m.output(out.as_ref());
            emit_json(out.as_ref(), &mut m, &rows)?;
            Ok(true)
        }
        Command::Gpoa {
            scenario,
            order,
            all_orders,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let mut m = RunManifest::new("gpoa").scenario(&scenario);
            m.algorithm = Some(Algorithm::Gpoa.to_string());
            m.output(out.as_ref());
            if all_orders {
                let runs = run_gpoa_all_orders(&s)?;
                m.ordering = runs
                    .iter()
                    .map(|r| OrderingScheme::Explicit(r.order_used.clone()).to_string())
                    .collect();
                emit_json(out.as_ref(), &mut m, &runs)?;
            } else {
                let r = run_gpoa(&s, &order)?;
                m.ordering.push(order.to_string());
                emit_json(out.as_ref(), &mut m, &r)?;
            }
            Ok(true)
        }
        Command::Ppmpoa { scenario, out, trace } => {
            let s = load_scenario(&scenario)?;
            let r = run_ppmpoa(&s)?;
            let blocking = check_matching_stability(&r, &s)?;
            let mut m = RunManifest::new("ppmpoa").scenario(&scenario);
            m.algorithm = Some(Algorithm::Ppmpoa.to_string());
            m.output(out.as_ref());
            m.output(trace.as_ref());
            if let Some(path) = &trace {
                let header = ["round", "m", "n", "value", "resources"].map(String::from);
                let rows: Vec<Vec<String>> = r
                    .matches
                    .iter()
                    .map(|rec| {
                        vec![
                            rec.round.to_string(),
                            rec.m.to_string(),
                            rec.n.to_string(),
                            num(rec.value),
                            num(rec.resources),
                        ]
                    })
                    .collect();
                emit_csv(Some(path), &mut m, &header, &rows)?;
            }
            let stable = blocking.is_empty();
            emit_json(out.as_ref(), &mut m, &json!({ "run": r, "blocking_pairs": blocking }))?;
            Ok(stable)
        }
        Command::Verify {
            scenario,
            algorithm,
            order,
            all_orders,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let schemes = if all_orders && algorithm == Algorithm::Gpoa {
                all_order_schemes(&s)?
            } else {
                vec![order]
            };
            let mut m = RunManifest::new("verify").scenario(&scenario);
            m.algorithm = Some(algorithm.to_string());
            m.ordering = schemes.iter().map(ToString::to_string).collect();
            m.output(out.as_ref());
            let mut sections = Vec::new();
            let mut passed = true;
            for scheme in &schemes {
                let report = enumerate_coalitions(&s, scheme, algorithm)?;
                let verdicts = verdicts(&report);
                passed &= verdicts.iter().all(|v| v.passed);
                sections.push(json!({ "scheme": scheme, "report": report, "verdicts": verdicts }));
            }
            emit_json(out.as_ref(), &mut m, &json!({ "passed": passed, "sections": sections }))?;
            Ok(passed)
        }
        Command::Misreport {
            scenario,
            provider,
            cap_factor,
            req_factor,
            algorithm,
            order,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let outcome = misreport_experiment(&s, ProviderId(provider), cap_factor, req_factor, &order, algorithm)?;
            let truthful = outcome.gain() <= TRUTHFUL_TOL;
            let mut m = RunManifest::new("misreport").scenario(&scenario);
            m.algorithm = Some(algorithm.to_string());
            m.ordering.push(order.to_string());
            m.output(out.as_ref());
            emit_json(out.as_ref(), &mut m, &json!({ "outcome": outcome, "truthful_is_best": truthful }))?;
            Ok(truthful)
        }
        Command::Table3 {
            scenario,
            algorithm,
            order,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let report = enumerate_coalitions(&s, &order, algorithm)?;
            let verdicts = verdicts(&report);
            let (header, rows) = table3_rows(&report, &verdicts);
            let mut m = RunManifest::new("table3").scenario(&scenario);
            m.algorithm = Some(algorithm.to_string());
            m.ordering.push(order.to_string());
            m.output(out.as_ref());
            emit_csv(out.as_ref(), &mut m, &header, &rows)?;
            Ok(verdicts.iter().all(|v| v.passed))
        }
        Command::Compare { scenario, orders, out } => {
            let s = load_scenario(&scenario)?;
            let orders = if orders.is_empty() {
                vec![OrderingScheme::default()]
            } else {
                orders
            };
            let (header, rows) = compare_rows(&s, &orders)?;
            let mut m = RunManifest::new("compare").scenario(&scenario);
            m.ordering = orders.iter().map(ToString::to_string).collect();
            m.output(out.as_ref());
            emit_csv(out.as_ref(), &mut m, &header, &rows)?;
            Ok(true)
        }
        Command::Report {
            scenario,
            allocation,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let x = load_allocation(&allocation)?;
            let violations = x.check_feasibility(&s);
            if !violations.is_empty() {
                let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
                bail!("allocation {} is infeasible: {}", allocation.display(), list.join("; "));
            }
            let report = MetricsReport::compute(&s, &x);
            let header = ["entity", "metric", "value"].map(String::from);
            let rows: Vec<Vec<String>> = report
                .rows()
                .into_iter()
                .map(|(entity, metric, value)| vec![entity, metric.to_string(), num(value)])
                .collect();
            let mut m = RunManifest::new("report").scenario(&scenario);
            m.output(out.as_ref());
            emit_csv(out.as_ref(), &mut m, &header, &rows)?;
            Ok(true)
        }
    }
}

fn verdicts(report: &CoalitionReport) -> Vec<PropertyVerdict> {
    vec![
        check_superadditivity(report),
        check_rationality(report),
        check_no_blocking_coalition(report),
        check_grand_coalition_maximal(report),
    ]
}

fn coalition_label(members: &[ProviderId]) -> String {
    let ids: Vec<String> = members.iter().map(ToString::to_string).collect();
    format!("{{{}}}", ids.join(","))
}

fn table3_rows(report: &CoalitionReport, verdicts: &[PropertyVerdict]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["coalition".to_string(), "value".to_string()];
    header.extend(report.providers.iter().map(|n| format!("payoff_{n}")));
    header.push("order_used".to_string());
    header.extend(verdicts.iter().map(|v| v.property.clone()));

    let rows = report
        .entries
        .iter()
        .map(|e| {
            let mut row = vec![coalition_label(&e.members), num(e.value)];
            row.extend(
                report
                    .providers
                    .iter()
                    .map(|n| e.payoffs.get(n).map(|&v| num(v)).unwrap_or_default()),
            );
            row.push(coalition_label(&e.order_used));
            for v in verdicts {
                let implicated = v.witnesses.iter().any(|w| w.coalitions.contains(&e.members));
                row.push(if implicated { "fail" } else { "pass" }.to_string());
            }
            row
        })
        .collect();
    (header, rows)
}

#[derive(Serialize)]
struct MethodRun {
    label: String,
    payoffs: BTreeMap<ProviderId, f64>,
    metrics: MetricsReport,
}

fn compare_rows(s: &Scenario, orders: &[OrderingScheme]) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let solo = SoloPhase::solve(s)?;
    let mut alone = AllocationTensor::default();
    for (n, r) in &solo.results {
        for (&(j, k), &x) in &r.allocation {
            alone.add(*n, j, s.k, k, x);
        }
    }
    let mut methods = vec![MethodRun {
        label: "alone".to_string(),
        payoffs: solo.results.iter().map(|(n, r)| (*n, r.objective_value)).collect(),
        metrics: MetricsReport::compute(s, &alone),
    }];
    let mut push_run = |label: String, run: coalition_share::game::AlgorithmRun| {
        methods.push(MethodRun {
            label,
            payoffs: run.payoffs.iter().map(|(n, p)| (*n, p.total())).collect(),
            metrics: MetricsReport::compute(s, &run.allocation),
        });
    };
    for order in orders {
        push_run(format!("gpoa:{order}"), run_algorithm(s, order, Algorithm::Gpoa)?);
    }
    push_run("ppmpoa".to_string(), run_algorithm(s, &OrderingScheme::default(), Algorithm::Ppmpoa)?);

    let header = ["method", "provider", "utility", "satisfaction", "utilization", "fragmentation"].map(String::from);
    let mut rows = Vec::new();
    for method in &methods {
        for (n, payoff) in &method.payoffs {
            let apps = s.apps_of(*n);
            let frag = if apps.is_empty() {
                0.0
            } else {
                apps.iter()
                    .map(|a| method.metrics.fragmentation.per_app[&a.id] as f64)
                    .sum::<f64>()
                    / apps.len() as f64
            };
            rows.push(vec![
                method.label.clone(),
                n.to_string(),
                num(*payoff),
                num(method.metrics.satisfaction.per_provider[n]),
                num(method.metrics.utilization[n]),
                num(frag),
            ]);
        }
        let total: f64 = method.payoffs.values().sum();
        let sat = &method.metrics.satisfaction.per_app;
        let mean_sat = sat.values().sum::<f64>() / sat.len().max(1) as f64;
        let cap: f64 = s.providers.iter().map(|p| p.capacity.sum()).sum();
        let used: f64 = s
            .providers
            .iter()
            .map(|p| method.metrics.utilization[&p.id] * p.capacity.sum())
            .sum();
        let util = if cap > 0.0 { used / cap } else { 0.0 };
        rows.push(vec![
            method.label.clone(),
            "all".to_string(),
            num(total),
            num(mean_sat),
            num(util),
            num(method.metrics.fragmentation.mean),
        ]);
    }
    Ok((header.to_vec(), rows))
}

/// Accepts a bare allocation list, or a result file holding one under
/// `result.allocation`, `result.run.allocation` or `allocation`.
fn load_allocation(path: &Path) -> Result<AllocationTensor> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read allocation {}", path.display()))?;
    let doc: Value = serde_json::from_str(&text).with_context(|| format!("cannot parse allocation {}", path.display()))?;
    let candidates = [
        doc.pointer("/result/allocation"),
        doc.pointer("/result/run/allocation"),
        doc.pointer("/allocation"),
        Some(&doc),
    ];
    for c in candidates.into_iter().flatten() {
        if c.is_array() {
            return serde_json::from_value(c.clone())
                .with_context(|| format!("malformed allocation in {}", path.display()));
        }
    }
    bail!("no allocation found in {}", path.display())
}
