//! Monte-Carlo episode runner.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterConfig;
use crate::gm::GaussianMixture;
use crate::pbvi::{best_alpha, CpomdpModel, PolicySet};
use crate::rng;
use crate::sim::env::{baseline_action, Baseline, TruthState};
use crate::sim::scenario::Scenario;

/// Policy families compared in batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Vb,
    Gm,
    Greedy,
    Perfect,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Vb => "vb",
            PolicyKind::Gm => "gm",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Perfect => "perfect",
        }
    }

    pub fn needs_policy(self) -> bool {
        matches!(self, PolicyKind::Vb | PolicyKind::Gm)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vb" => Ok(PolicyKind::Vb),
            "gm" | "gm_likelihood" | "gmlikelihood" => Ok(PolicyKind::Gm),
            "greedy" => Ok(PolicyKind::Greedy),
            "perfect" => Ok(PolicyKind::Perfect),
            other => Err(Error::InvalidArgument(format!("unknown policy kind `{other}`"))),
        }
    }
}

/// Decision maker for an episode. The filter always runs on `model`.
#[derive(Debug, Clone, Copy)]
pub enum Agent<'a> {
    Planner { policy: &'a PolicySet, model: &'a CpomdpModel },
    Baseline { kind: Baseline, model: &'a CpomdpModel },
}

impl<'a> Agent<'a> {
    /// Agent for `kind`; planners need a policy, and `gm` uses the
    /// scenario's likelihood-mixture model for filtering.
    pub fn for_kind(kind: PolicyKind, scenario: &'a Scenario, policy: Option<&'a PolicySet>) -> Result<Self> {
        match kind {
            PolicyKind::Vb | PolicyKind::Gm => {
                let policy = policy.ok_or_else(|| Error::InvalidArgument(format!("policy `{kind}` needs a policy set")))?;
                let model = match kind {
                    PolicyKind::Gm => scenario
                        .gm_planner
                        .as_ref()
                        .ok_or_else(|| Error::InvalidArgument(format!("scenario `{}` has no likelihood-mixture model", scenario.name)))?,
                    _ => &scenario.planner,
                };
                Ok(Agent::Planner { policy, model })
            }
            PolicyKind::Greedy => Ok(Agent::Baseline { kind: Baseline::Greedy, model: &scenario.planner }),
            PolicyKind::Perfect => Ok(Agent::Baseline { kind: Baseline::Perfect, model: &scenario.planner }),
        }
    }

    fn model(&self) -> &'a CpomdpModel {
        match *self {
            Agent::Planner { model, .. } | Agent::Baseline { model, .. } => model,
        }
    }

    fn act(&self, scenario: &Scenario, belief: &GaussianMixture, truth: &TruthState) -> Result<usize> {
        match *self {
            Agent::Planner { policy, model } => {
                let (i, _) = best_alpha(policy, belief)?;
                let name = &policy.alphas[i].action;
                model.action_index(name)
            }
            Agent::Baseline { kind, model } => baseline_action(kind, &scenario.world, model, belief, truth),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub truth: TruthState,
    pub belief_mean: Vec<f64>,
    pub action: String,
    pub label: String,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode: usize,
    pub total_reward: f64,
    pub steps: usize,
    pub caught: bool,
    pub steps_to_catch: Option<usize>,
    pub trajectory: Vec<StepRecord>,
}

/// Runs one episode on its own random stream `(seed, episode)`.
pub fn run_episode(
    scenario: &Scenario,
    agent: Agent<'_>,
    filter: &FilterConfig,
    seed: u64,
    episode: usize,
) -> Result<EpisodeResult> {
    let model = agent.model();
    let mut rng = rng::stream(seed, episode as u64);
    let mut truth = scenario.world.sample_initial(&mut rng)?;
    let mut belief = scenario.initial_belief(&truth)?;
    let mut result = EpisodeResult {
        episode,
        total_reward: 0.0,
        steps: 0,
        caught: false,
        steps_to_catch: None,
        trajectory: Vec::with_capacity(scenario.episode_steps),
    };
    for t in 0..scenario.episode_steps {
        let action = agent.act(scenario, &belief, &truth)?;
        let (next, label, reward) = scenario.world.step(&truth, action, &mut rng)?;
        belief = scenario.filter_step(model, &belief, action, &label, &next, filter)?;
        truth = next;
        result.total_reward += reward;
        result.steps = t + 1;
        result.trajectory.push(StepRecord {
            truth: truth.clone(),
            belief_mean: belief.mean()?.as_slice().to_vec(),
            action: model.actions()[action].name.clone(),
            label,
            reward,
        });
        if !result.caught && scenario.world.captured(&truth) {
            result.caught = true;
            result.steps_to_catch = Some(t + 1);
            if scenario.stop_on_capture {
                break;
            }
        }
    }
    Ok(result)
}

/// Runs `episodes` independent episodes. Results are ordered by episode
/// index and do not depend on the thread count.
pub fn run_batch(
    scenario: &Scenario,
    agent: Agent<'_>,
    episodes: usize,
    filter: &FilterConfig,
    seed: u64,
) -> Result<Vec<EpisodeResult>> {
    (0..episodes).into_par_iter().map(|e| run_episode(scenario, agent, filter, seed, e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub episodes: usize,
    pub mean: f64,
    /// Sample standard deviation (zero for fewer than two episodes).
    pub std: f64,
    pub capture_rate: f64,
    pub mean_steps_to_catch: Option<f64>,
}

impl BatchSummary {
    pub fn from_results(results: &[EpisodeResult]) -> Self {
        let n = results.len();
        if n == 0 {
            return Self { episodes: 0, mean: 0.0, std: 0.0, capture_rate: 0.0, mean_steps_to_catch: None };
        }
        let mean = results.iter().map(|r| r.total_reward).sum::<f64>() / n as f64;
        let std = if n > 1 {
            (results.iter().map(|r| (r.total_reward - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let catches: Vec<usize> = results.iter().filter_map(|r| r.steps_to_catch).collect();
        let mean_steps_to_catch =
            (!catches.is_empty()).then(|| catches.iter().sum::<usize>() as f64 / catches.len() as f64);
        Self { episodes: n, mean, std, capture_rate: catches.len() as f64 / n as f64, mean_steps_to_catch }
    }

    /// Standard error of the mean.
    pub fn sem(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.std / (self.episodes as f64).sqrt()
        }
    }
}

pub const BATCH_CSV_HEADER: &str = "scenario,policy,episode,seed,totalReward,caught,stepsToCatch";

/// One CSV row per episode, matching [`BATCH_CSV_HEADER`].
pub fn batch_csv_rows(scenario: &str, policy: PolicyKind, seed: u64, results: &[EpisodeResult]) -> Vec<String> {
    results
        .iter()
        .map(|r| {
            format!(
                "{scenario},{policy},{},{seed},{},{},{}",
                r.episode,
                r.total_reward,
                r.caught,
                r.steps_to_catch.map(|s| s.to_string()).unwrap_or_default()
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_batch_summary() {
        let s = Scenario::builtin("search2d").unwrap();
        let agent = Agent::for_kind(PolicyKind::Greedy, &s, None).unwrap();
        let r = run_batch(&s, agent, 0, &FilterConfig::default(), 3).unwrap();
        assert!(r.is_empty());
        let sum = BatchSummary::from_results(&r);
        assert_eq!(sum.episodes, 0);
        assert_eq!(sum.mean_steps_to_catch, None);
    }

    #[test]
    fn planners_need_policies() {
        let s = Scenario::builtin("colinear").unwrap();
        assert!(Agent::for_kind(PolicyKind::Vb, &s, None).is_err());
        let s = Scenario::builtin("search2d").unwrap();
        let p = PolicySet::from_rewards(&s.planner);
        assert!(Agent::for_kind(PolicyKind::Gm, &s, Some(&p)).is_err());
    }

    #[test]
    fn reward_accounting_and_repeatability() {
        let mut s = Scenario::builtin("colinear").unwrap();
        s.episode_steps = 15;
        let agent = Agent::for_kind(PolicyKind::Greedy, &s, None).unwrap();
        let a = run_batch(&s, agent, 3, &FilterConfig::default(), 11).unwrap();
        let b = run_batch(&s, agent, 3, &FilterConfig::default(), 11).unwrap();
        assert_eq!(a, b);
        for r in &a {
            assert_eq!(r.steps, 15);
            let sum: f64 = r.trajectory.iter().map(|t| t.reward).sum();
            assert_eq!(sum, r.total_reward);
            if let Some(k) = r.steps_to_catch {
                assert!(r.caught && k <= r.steps);
            }
        }
    }

    #[test]
    fn mms_stops_at_capture() {
        let mut s = Scenario::builtin("search2d-mms").unwrap();
        s.episode_steps = 60;
        let agent = Agent::for_kind(PolicyKind::Perfect, &s, None).unwrap();
        for r in run_batch(&s, agent, 4, &FilterConfig::default(), 5).unwrap() {
            if r.caught {
                assert_eq!(r.steps_to_catch, Some(r.steps));
            } else {
                assert_eq!(r.steps, 60);
            }
        }
    }

    #[test]
    fn csv_rows() {
        let r = EpisodeResult { episode: 2, total_reward: 1.5, steps: 3, caught: true, steps_to_catch: Some(3), trajectory: vec![] };
        let rows = batch_csv_rows("search2d", PolicyKind::Vb, 9, &[r]);
        assert_eq!(rows, vec!["search2d,vb,2,9,1.5,true,3"]);
        assert_eq!(BATCH_CSV_HEADER.split(',').count(), rows[0].split(',').count());
    }
}
