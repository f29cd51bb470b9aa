//! Subcommand implementations. Logs go to stderr, data to files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vbpomdp::condense::{ClusterMetric, CondenseConfig};
use vbpomdp::diagnostics::{self, BenchSpec};
use vbpomdp::filter::FilterConfig;
use vbpomdp::pbvi::{self, CpomdpModel, PolicySet, SolverConfig};
use vbpomdp::sim::runner::{batch_csv_rows, BATCH_CSV_HEADER};
use vbpomdp::sim::{proportion_ztest, run_batch, welch_ttest, Agent, BatchSummary, EpisodeResult, PolicyKind, Scenario};
use vbpomdp::vb::VbOptions;

use crate::config::{BenchArgs, ExportArgs, NumericArgs, SimulateArgs, SolveArgs, VbCheckArgs};
use crate::CliError;

type CliResult<T> = Result<T, CliError>;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn out_dir(dir: Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = dir.unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

/// Built-in name, or a path to a scenario JSON file.
pub fn load_scenario(spec: Option<&str>) -> CliResult<Scenario> {
    let spec = spec.ok_or_else(|| CliError::Config("--scenario is required".into()))?;
    if vbpomdp::sim::BUILTIN_SCENARIOS.contains(&spec) {
        return Scenario::builtin(spec).map_err(runtime);
    }
    let path = Path::new(spec);
    if path.exists() || spec.ends_with(".json") {
        let s: Scenario = parse_json(path)?;
        if s.episode_steps == 0 {
            return Err(CliError::Config(format!("{spec}: episode_steps must be at least 1")));
        }
        return Ok(s);
    }
    Err(CliError::Config(format!(
        "unknown scenario `{spec}` (built-ins: {})",
        vbpomdp::sim::BUILTIN_SCENARIOS.join(", ")
    )))
}

fn condense_config(n: &NumericArgs, target: usize) -> CliResult<CondenseConfig> {
    let mut c = CondenseConfig::with_target(target);
    if let Some(k) = n.clusters {
        c.cluster_count = k;
    }
    if let Some(m) = &n.metric {
        c.metric = m.parse::<ClusterMetric>().map_err(|e| CliError::Config(e.to_string()))?;
    }
    c.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(c)
}

fn vb_options(tol: Option<f64>, max_iter: Option<usize>) -> CliResult<VbOptions> {
    let mut o = VbOptions::default();
    if let Some(t) = tol {
        if !(t > 0.0) {
            return Err(CliError::Config("--vb-tol must be positive".into()));
        }
        o.tol = t;
    }
    if let Some(m) = max_iter {
        if m == 0 {
            return Err(CliError::Config("--vb-max-iter must be at least 1".into()));
        }
        o.max_iter = m;
    }
    Ok(o)
}

fn filter_config(n: &NumericArgs) -> CliResult<FilterConfig> {
    Ok(FilterConfig {
        condense: condense_config(n, n.filter_budget.unwrap_or(FilterConfig::default().condense.target_size))?,
        vb: vb_options(n.vb_tol, n.vb_max_iter)?,
    })
}

fn solver_config(n: &NumericArgs) -> CliResult<SolverConfig> {
    let defaults = SolverConfig::default();
    Ok(SolverConfig {
        alpha_condense: condense_config(n, n.alpha_budget.unwrap_or(defaults.alpha_condense.target_size))?,
        vb: vb_options(n.vb_tol, n.vb_max_iter)?,
        ..defaults
    })
}

pub fn solve(a: SolveArgs) -> CliResult<()> {
    let mut scenario = load_scenario(a.scenario.as_deref())?;
    if let Some(path) = &a.model {
        let model: CpomdpModel = parse_json(path)?;
        scenario = scenario.with_planner(model).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    }
    let model = if a.gm.unwrap_or(false) {
        scenario
            .gm_planner
            .clone()
            .ok_or_else(|| CliError::Config(format!("scenario `{}` has no likelihood-mixture planner", scenario.name)))?
    } else {
        scenario.planner.clone()
    };
    let rounds = a.rounds.unwrap_or(30);
    let count = a.beliefs.unwrap_or(20);
    if rounds == 0 || count == 0 {
        return Err(CliError::Config("--rounds and --beliefs must be at least 1".into()));
    }
    let seed = a.seed.unwrap_or(0);
    let solver = solver_config(&a.numeric)?;
    let filter = filter_config(&a.numeric)?;
    let dir = out_dir(a.out)?;

    eprintln!("scenario {}: generating {count} training beliefs", scenario.name);
    let beliefs = scenario.training_beliefs(&model, count, a.depth.unwrap_or(10), seed, &filter).map_err(runtime)?;
    let out = pbvi::solve_with(&model, &beliefs, rounds, &solver, |r| {
        eprintln!("round {:>3}: {:>3} alphas, mean value {:.4} ({} ms)", r.round, r.alpha_count, r.mean_value, r.millis);
    })
    .map_err(runtime)?;

    let policy_name = a.policy_name.unwrap_or_else(|| "policy.json".into());
    write(&dir.join(&policy_name), &out.policy.to_json().map_err(runtime)?)?;
    // Wall-clock time lives in its own file so the log stays byte-reproducible.
    let rows = out.log.iter().map(|r| format!("{},{},{}", r.round, r.alpha_count, r.mean_value));
    write(&dir.join("solve_log.csv"), &csv("round,alphaCount,meanValue", rows))?;
    let timing = out.log.iter().map(|r| format!("{},{}", r.round, r.millis));
    write(&dir.join("solve_timing.csv"), &csv("round,millis", timing))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PolicySummary {
    policy: String,
    episodes: usize,
    mean: f64,
    std: f64,
    capture_percent: f64,
    mean_steps_to_catch: Option<f64>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Comparison {
    a: String,
    b: String,
    t: Option<f64>,
    p: Option<f64>,
    capture_z: Option<f64>,
    capture_p: Option<f64>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SimulationSummary {
    scenario: String,
    seed: u64,
    episodes: usize,
    policies: Vec<PolicySummary>,
    comparisons: Vec<Comparison>,
}

fn compare(a: (PolicyKind, &[EpisodeResult]), b: (PolicyKind, &[EpisodeResult])) -> Comparison {
    let ra: Vec<f64> = a.1.iter().map(|r| r.total_reward).collect();
    let rb: Vec<f64> = b.1.iter().map(|r| r.total_reward).collect();
    let welch = welch_ttest(&ra, &rb).ok();
    let caught = |r: &[EpisodeResult]| r.iter().filter(|e| e.caught).count();
    let z = proportion_ztest(caught(a.1), a.1.len(), caught(b.1), b.1.len()).ok();
    Comparison {
        a: a.0.to_string(),
        b: b.0.to_string(),
        t: welch.map(|w| w.statistic),
        p: welch.map(|w| w.p),
        capture_z: z.map(|w| w.statistic),
        capture_p: z.map(|w| w.p),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let mut scenario = load_scenario(a.scenario.as_deref())?;
    if let Some(steps) = a.steps {
        if steps == 0 {
            return Err(CliError::Config("--steps must be at least 1".into()));
        }
        scenario.episode_steps = steps;
    }
    let mut runs: Vec<(PolicyKind, Option<PolicySet>)> = Vec::new();
    if let Some(p) = &a.policy {
        runs.push((PolicyKind::Vb, Some(parse_json::<PolicySet>(p)?)));
    }
    if let Some(p) = &a.gm_policy {
        runs.push((PolicyKind::Gm, Some(parse_json::<PolicySet>(p)?)));
    }
    for name in a.baselines.iter().flatten() {
        let kind: PolicyKind = name.parse().map_err(|e: vbpomdp::Error| CliError::Config(e.to_string()))?;
        if kind.needs_policy() {
            return Err(CliError::Config(format!("`{name}` is not a baseline; pass its policy file instead")));
        }
        runs.push((kind, None));
    }
    if runs.is_empty() {
        return Err(CliError::Config("nothing to simulate: pass --policy, --gm-policy or --baselines".into()));
    }
    let episodes = a.episodes.unwrap_or(100);
    let seed = a.seed.unwrap_or(0);
    let filter = filter_config(&a.numeric)?;
    let dir = out_dir(a.out)?;

    let mut results = Vec::new();
    for (kind, policy) in &runs {
        let agent = Agent::for_kind(*kind, &scenario, policy.as_ref()).map_err(|e| CliError::Config(e.to_string()))?;
        let r = run_batch(&scenario, agent, episodes, &filter, seed).map_err(runtime)?;
        let s = BatchSummary::from_results(&r);
        eprintln!(
            "{}: mean {:.2} ± {:.2} (sem), capture {:.1}%",
            kind,
            s.mean,
            s.sem(),
            100.0 * s.capture_rate
        );
        results.push((*kind, r, s));
    }

    let rows = results.iter().flat_map(|(k, r, _)| batch_csv_rows(&scenario.name, *k, seed, r));
    write(&dir.join("batch.csv"), &csv(BATCH_CSV_HEADER, rows))?;

    let mut comparisons = Vec::new();
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            comparisons.push(compare((results[i].0, &results[i].1), (results[j].0, &results[j].1)));
        }
    }
    let prow = comparisons
        .iter()
        .map(|c| format!("{},{},{},{},{},{}", c.a, c.b, opt(c.t), opt(c.p), opt(c.capture_z), opt(c.capture_p)));
    write(&dir.join("pvalues.csv"), &csv("policyA,policyB,t,p,captureZ,captureP", prow))?;

    let summary = SimulationSummary {
        scenario: scenario.name.clone(),
        seed,
        episodes,
        policies: results
            .iter()
            .map(|(k, _, s)| PolicySummary {
                policy: k.to_string(),
                episodes: s.episodes,
                mean: s.mean,
                std: s.std,
                capture_percent: 100.0 * s.capture_rate,
                mean_steps_to_catch: s.mean_steps_to_catch,
            })
            .collect(),
        comparisons,
    };
    write(&dir.join("summary.json"), &serde_json::to_string_pretty(&summary).map_err(runtime)?)?;

    if a.trajectories.unwrap_or(false) {
        let mut s = String::from("policy,episode,step,cop,robber,velocity,beliefMean,action,label,reward\n");
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        for (k, r, _) in &results {
            for e in r {
                for (t, st) in e.trajectory.iter().enumerate() {
                    let _ = writeln!(
                        s,
                        "{k},{},{},{},{},{},{},{},{},{}",
                        e.episode,
                        t + 1,
                        join(&st.truth.cop),
                        join(&st.truth.robber),
                        join(&st.truth.velocity),
                        join(&st.belief_mean),
                        st.action,
                        st.label,
                        st.reward
                    );
                }
            }
        }
        write(&dir.join("trajectories.csv"), &s)?;
    }
    Ok(())
}

pub fn condense_bench(a: BenchArgs) -> CliResult<()> {
    let defaults = BenchSpec::default();
    let metrics = match &a.metrics {
        Some(names) => names
            .iter()
            .map(|m| m.parse::<ClusterMetric>().map_err(|e| CliError::Config(e.to_string())))
            .collect::<CliResult<Vec<_>>>()?,
        None => defaults.metrics.clone(),
    };
    let spec = BenchSpec {
        metrics,
        dimensions: a.dims.clone().unwrap_or(defaults.dimensions),
        runs: a.runs.unwrap_or(defaults.runs),
        input_size: a.input_size.unwrap_or(defaults.input_size),
        target_size: a.target.unwrap_or(defaults.target_size),
        cluster_count: a.clusters.unwrap_or(defaults.cluster_count),
        seed: a.seed.unwrap_or(defaults.seed),
    };
    if spec.dimensions.iter().any(|&d| d == 0) || spec.runs == 0 {
        return Err(CliError::Config("dimensions and --runs must be positive".into()));
    }
    if spec.target_size == 0 || spec.target_size > spec.input_size || spec.cluster_count == 0 {
        return Err(CliError::Config("need 0 < --target ≤ --input-size and --clusters ≥ 1".into()));
    }
    let dir = out_dir(a.out)?;
    let rows = diagnostics::condense_bench(&spec).map_err(runtime)?;
    for m in &spec.metrics {
        let mine: Vec<_> = rows.iter().filter(|(r, _)| r.metric == *m).collect();
        let n = mine.len() as f64;
        let ratio = (mine.iter().map(|(r, _)| (r.nisd / r.runnalls_nisd).ln()).sum::<f64>() / n).exp();
        let time: f64 = mine.iter().map(|(_, t)| t.hybrid_secs).sum::<f64>() / mine.iter().map(|(_, t)| t.runnalls_secs).sum::<f64>();
        eprintln!("{:>13}: NISD ratio (geometric mean) {ratio:.3}, time ratio {time:.3}", m.name());
    }
    write(
        &dir.join("condense_bench.csv"),
        &csv(diagnostics::BENCH_CSV_HEADER, rows.iter().map(|(r, _)| diagnostics::bench_csv_row(r))),
    )?;
    write(
        &dir.join("condense_timing.csv"),
        &csv(diagnostics::BENCH_TIMING_CSV_HEADER, rows.iter().map(|(r, t)| diagnostics::bench_timing_csv_row(r, t))),
    )
}

pub fn vb_check(a: VbCheckArgs) -> CliResult<()> {
    let opts = vb_options(a.vb_tol, a.vb_max_iter)?;
    let cases = a.cases.unwrap_or(200);
    let dir = out_dir(a.out)?;
    let rows = diagnostics::vb_check(cases, a.seed.unwrap_or(0), opts).map_err(runtime)?;
    write(
        &dir.join("vb_check.csv"),
        &csv(diagnostics::VB_CHECK_CSV_HEADER, rows.iter().map(diagnostics::vb_check_csv_row)),
    )?;
    let violations = rows.iter().filter(|r| r.gap < -1e-9 || !r.monotone).count();
    let worst = rows.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    eprintln!("{cases} cases, smallest gap {worst:.3e}, {violations} violations");
    if violations > 0 {
        return Err(CliError::Runtime(format!("{violations} cases violate the bound or its monotone ascent")));
    }
    Ok(())
}

pub fn export_scenario(a: ExportArgs) -> CliResult<()> {
    let s = load_scenario(Some(&a.name))?;
    write(&a.out, &serde_json::to_string_pretty(&s).map_err(runtime)?)
}
