//! Point-based value iteration over Gaussian-mixture alpha functions.
//!
//! Dynamics are linear-Gaussian, `s' = F s + Δ(a) + w` with
//! `w ~ N(0, Σᵃ)`, rewards are per-action mixtures and observations come
//! either from a softmax model (handled through the variational bound) or
//! from one likelihood mixture per label (handled exactly). Alpha functions
//! stay mixtures through every backup and are condensed to a fixed budget.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condense::{cluster_condense, CondenseConfig};
use crate::error::{check_dim, Error, Result};
use crate::filter::{self, FilterConfig};
use crate::gm::{gaussian_product, inner_product, GaussianComponent, GaussianMixture, MixtureKind};
use crate::linalg;
use crate::rng;
use crate::softmax::SoftmaxModel;
use crate::vb::{vb_mixture_product, VbOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActionRecord", into = "ActionRecord")]
pub struct Action {
    pub name: String,
    /// Expected displacement `Δ(a)`.
    pub delta: DVector<f64>,
    /// Process noise `Σᵃ`.
    pub noise: DMatrix<f64>,
}

impl Action {
    pub fn new(name: impl Into<String>, delta: &[f64], noise: DMatrix<f64>) -> Result<Self> {
        check_dim(delta.len(), noise.nrows())?;
        check_dim(noise.nrows(), noise.ncols())?;
        linalg::check_symmetric(&noise)?;
        linalg::check_positive_definite(&noise)?;
        Ok(Self { name: name.into(), delta: DVector::from_column_slice(delta), noise })
    }

    /// Action with isotropic noise `var · I`.
    pub fn isotropic(name: impl Into<String>, delta: &[f64], var: f64) -> Result<Self> {
        let n = delta.len();
        Self::new(name, delta, DMatrix::identity(n, n) * var)
    }
}

#[derive(Serialize, Deserialize)]
struct ActionRecord {
    name: String,
    delta: Vec<f64>,
    noise: Vec<Vec<f64>>,
}

impl TryFrom<ActionRecord> for Action {
    type Error = Error;

    fn try_from(r: ActionRecord) -> Result<Self> {
        let n = r.delta.len();
        let noise = linalg::matrix_from_rows(&r.noise, n)?;
        Action::new(r.name, &r.delta, noise)
    }
}

impl From<Action> for ActionRecord {
    fn from(a: Action) -> Self {
        ActionRecord { name: a.name, delta: a.delta.iter().copied().collect(), noise: linalg::matrix_to_rows(&a.noise) }
    }
}

/// Observation likelihood: a (multimodal) softmax model, or one likelihood
/// mixture per label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationModel {
    Softmax(SoftmaxModel),
    GmLikelihood(BTreeMap<String, GaussianMixture>),
}

impl ObservationModel {
    pub fn dimension(&self) -> Option<usize> {
        match self {
            ObservationModel::Softmax(m) => Some(m.dimension()),
            ObservationModel::GmLikelihood(map) => map.values().next().map(GaussianMixture::dimension),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            ObservationModel::Softmax(m) => m.label_names().map(str::to_owned).collect(),
            ObservationModel::GmLikelihood(map) => map.keys().cloned().collect(),
        }
    }

    /// Label probabilities at `state`, in [`labels`](Self::labels) order.
    /// Likelihood mixtures are normalized across labels pointwise.
    pub fn label_probs(&self, state: &[f64]) -> Result<Vec<f64>> {
        match self {
            ObservationModel::Softmax(m) => Ok(m.label_probs(state)?.into_iter().map(|(_, p)| p).collect()),
            ObservationModel::GmLikelihood(map) => {
                let vals = map.values().map(|g| g.evaluate(state).map(|v| v.max(0.0))).collect::<Result<Vec<_>>>()?;
                let total: f64 = vals.iter().sum();
                if total > 0.0 {
                    Ok(vals.into_iter().map(|v| v / total).collect())
                } else {
                    Ok(vec![1.0 / vals.len() as f64; vals.len()])
                }
            }
        }
    }

    /// Draws a label at `state`.
    pub fn sample_label<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<String> {
        let probs = self.label_probs(state)?;
        let labels = self.labels();
        let mut u = rng.random::<f64>();
        for (label, p) in labels.iter().zip(&probs) {
            if u < *p {
                return Ok(label.clone());
            }
            u -= p;
        }
        Ok(labels.last().cloned().expect("observation model has labels"))
    }
}

/// Continuous-state POMDP with linear-Gaussian dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct CpomdpModel {
    dimension: usize,
    actions: Vec<Action>,
    rewards: Vec<GaussianMixture>,
    transition: DMatrix<f64>,
    transition_inv: DMatrix<f64>,
    transition_abs_det: f64,
    observation: ObservationModel,
    discount: f64,
}

impl CpomdpModel {
    /// `rewards[k]` is the reward mixture of `actions[k]`.
    pub fn new(
        dimension: usize,
        actions: Vec<Action>,
        rewards: Vec<GaussianMixture>,
        transition: DMatrix<f64>,
        observation: ObservationModel,
        discount: f64,
    ) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::InvalidModel("no actions".into()));
        }
        if actions.len() != rewards.len() {
            return Err(Error::InvalidModel(format!(
                "{} actions but {} reward mixtures",
                actions.len(),
                rewards.len()
            )));
        }
        for a in &actions {
            check_dim(dimension, a.delta.len())?;
        }
        for r in &rewards {
            check_dim(dimension, r.dimension())?;
        }
        check_dim(dimension, transition.nrows())?;
        check_dim(dimension, transition.ncols())?;
        let det = transition.determinant();
        if !(det.abs() > 1e-12) {
            return Err(Error::InvalidModel("transition matrix is singular".into()));
        }
        let transition_inv = transition.clone().try_inverse().ok_or(Error::Singular)?;
        if observation.labels().is_empty() {
            return Err(Error::InvalidModel("observation model has no labels".into()));
        }
        if let ObservationModel::GmLikelihood(map) = &observation {
            for g in map.values() {
                if g.kind() != MixtureKind::Likelihood {
                    return Err(Error::InvalidModel("observation mixtures must be likelihoods".into()));
                }
            }
        }
        if let Some(d) = observation.dimension() {
            check_dim(dimension, d)?;
        }
        if !(discount > 0.0 && discount < 1.0) && discount != 0.0 {
            return Err(Error::InvalidModel(format!("discount {discount} outside [0, 1)")));
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &actions {
            if !seen.insert(a.name.as_str()) {
                return Err(Error::InvalidModel(format!("duplicate action `{}`", a.name)));
            }
        }
        let rewards = rewards.into_iter().map(|r| r.with_kind(MixtureKind::RewardOrAlpha)).collect::<Result<_>>()?;
        Ok(Self {
            dimension,
            actions,
            rewards,
            transition_abs_det: det.abs(),
            transition,
            transition_inv,
            observation,
            discount,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn action_index(&self, name: &str) -> Result<usize> {
        self.actions.iter().position(|a| a.name == name).ok_or_else(|| Error::UnknownAction(name.into()))
    }

    pub fn rewards(&self) -> &[GaussianMixture] {
        &self.rewards
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn observation(&self) -> &ObservationModel {
        &self.observation
    }

    pub fn labels(&self) -> Vec<String> {
        self.observation.labels()
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        Self::new(
            self.dimension,
            self.actions.clone(),
            self.rewards.clone(),
            self.transition.clone(),
            self.observation.clone(),
            discount,
        )
    }

    pub fn with_transition(&self, transition: DMatrix<f64>) -> Result<Self> {
        Self::new(
            self.dimension,
            self.actions.clone(),
            self.rewards.clone(),
            transition,
            self.observation.clone(),
            self.discount,
        )
    }

    pub fn with_observation(&self, observation: ObservationModel) -> Result<Self> {
        Self::new(
            self.dimension,
            self.actions.clone(),
            self.rewards.clone(),
            self.transition.clone(),
            observation,
            self.discount,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    dimension: usize,
    discount: f64,
    transition: Vec<Vec<f64>>,
    actions: Vec<ActionWithReward>,
    observation: ObservationModel,
}

#[derive(Serialize, Deserialize)]
struct ActionWithReward {
    #[serde(flatten)]
    action: Action,
    reward: GaussianMixture,
}

impl TryFrom<ModelRecord> for CpomdpModel {
    type Error = Error;

    fn try_from(r: ModelRecord) -> Result<Self> {
        let transition = linalg::matrix_from_rows(&r.transition, r.dimension)?;
        let (actions, rewards) = r.actions.into_iter().map(|a| (a.action, a.reward)).unzip();
        CpomdpModel::new(r.dimension, actions, rewards, transition, r.observation, r.discount)
    }
}

impl From<CpomdpModel> for ModelRecord {
    fn from(m: CpomdpModel) -> Self {
        ModelRecord {
            dimension: m.dimension,
            discount: m.discount,
            transition: linalg::matrix_to_rows(&m.transition),
            actions: m
                .actions
                .into_iter()
                .zip(m.rewards)
                .map(|(action, reward)| ActionWithReward { action, reward })
                .collect(),
            observation: m.observation,
        }
    }
}

/// An alpha function and the action it prescribes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaFunction {
    pub action: String,
    pub gm: GaussianMixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySet {
    pub horizon: usize,
    pub alphas: Vec<AlphaFunction>,
}

impl PolicySet {
    /// Horizon-0 policy: one alpha per action holding its reward mixture.
    pub fn from_rewards(model: &CpomdpModel) -> Self {
        let alphas = model
            .actions
            .iter()
            .zip(&model.rewards)
            .map(|(a, r)| AlphaFunction { action: a.name.clone(), gm: r.clone() })
            .collect();
        Self { horizon: 0, alphas }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Budget for every intermediate and backed-up alpha.
    pub alpha_condense: CondenseConfig,
    pub vb: VbOptions,
    /// Skips the `F` change of variables; only valid when `F = I`.
    pub skip_lti_transform: bool,
    /// Keeps the previous best alpha for a belief when its backup does not
    /// improve on it, which makes training-belief values monotone.
    pub keep_improving_only: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha_condense: CondenseConfig::with_target(60),
            vb: VbOptions::default(),
            skip_lti_transform: false,
            keep_improving_only: true,
        }
    }
}

/// Rewrites `φ(F s | μ, Σ)` as a weighted Gaussian in `s`:
/// `|det F|⁻¹ φ(s | F⁻¹μ, F⁻¹ΣF⁻ᵀ)`.
pub fn lti_transform(component: &GaussianComponent, f: &DMatrix<f64>) -> Result<GaussianComponent> {
    check_dim(component.dim(), f.nrows())?;
    check_dim(f.nrows(), f.ncols())?;
    let det = f.determinant();
    if !(det.abs() > 1e-12) {
        return Err(Error::Singular);
    }
    let inv = f.clone().try_inverse().ok_or(Error::Singular)?;
    lti_apply(component.weight(), component.mean(), component.cov(), &inv, det.abs())
}

fn lti_apply(
    weight: f64,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    inv: &DMatrix<f64>,
    abs_det: f64,
) -> Result<GaussianComponent> {
    GaussianComponent::from_parts(weight / abs_det, inv * mean, inv * cov * inv.transpose())
}

/// `∫ α(s') p(o | s') φ(s' | F s + Δ(a), Σᵃ) ds'` as a mixture in `s`, before
/// condensation. Softmax observations contribute one component per alpha
/// component and label class; likelihood mixtures contribute one per alpha
/// component and likelihood component.
pub fn intermediate_raw(
    alpha: &GaussianMixture,
    model: &CpomdpModel,
    action: usize,
    label: &str,
    config: &SolverConfig,
) -> Result<GaussianMixture> {
    check_dim(model.dimension, alpha.dimension())?;
    let act = model.actions.get(action).ok_or_else(|| Error::UnknownAction(action.to_string()))?;
    let product = match &model.observation {
        ObservationModel::Softmax(sm) => vb_mixture_product(alpha, sm, label, config.vb)?.into_components(),
        ObservationModel::GmLikelihood(map) => {
            let lik = map.get(label).ok_or_else(|| Error::UnknownLabel(label.into()))?;
            let mut out = Vec::with_capacity(alpha.len() * lik.len());
            for a in alpha.components() {
                for q in lik.components() {
                    out.push(gaussian_product(a, q)?);
                }
            }
            out
        }
    };
    let components = product
        .into_iter()
        .map(|c| {
            let (w, mean, cov) = c.into_parts();
            let mean = mean - &act.delta;
            let cov = cov + &act.noise;
            if config.skip_lti_transform {
                GaussianComponent::from_parts(w, mean, cov)
            } else {
                lti_apply(w, &mean, &cov, &model.transition_inv, model.transition_abs_det)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GaussianMixture::from_parts_unchecked(model.dimension, MixtureKind::RewardOrAlpha, components))
}

fn condense_alpha(gm: GaussianMixture, config: &SolverConfig) -> Result<GaussianMixture> {
    if gm.len() <= config.alpha_condense.target_size {
        Ok(gm)
    } else {
        cluster_condense(&gm, &config.alpha_condense)
    }
}

/// Condensed intermediate alphas for every (alpha, action, label).
#[derive(Debug, Clone)]
pub struct IntermediateTable {
    alphas: usize,
    actions: usize,
    labels: Vec<String>,
    entries: Vec<GaussianMixture>,
}

impl IntermediateTable {
    pub fn get(&self, alpha: usize, action: usize, label: usize) -> &GaussianMixture {
        &self.entries[(alpha * self.actions + action) * self.labels.len() + label]
    }

    pub fn alpha_count(&self) -> usize {
        self.alphas
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

pub fn intermediate_alphas(
    policy: &PolicySet,
    model: &CpomdpModel,
    config: &SolverConfig,
) -> Result<IntermediateTable> {
    if policy.is_empty() {
        return Err(Error::Empty("policy"));
    }
    let labels = model.labels();
    let (n_a, n_l) = (model.num_actions(), labels.len());
    let entries = (0..policy.len() * n_a * n_l)
        .into_par_iter()
        .map(|idx| {
            let (i, a, l) = (idx / (n_a * n_l), (idx / n_l) % n_a, idx % n_l);
            let raw = intermediate_raw(&policy.alphas[i].gm, model, a, &labels[l], config)?;
            condense_alpha(raw, config)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IntermediateTable { alphas: policy.len(), actions: n_a, labels, entries })
}

/// Bellman backup at one belief: per action, the best intermediate per
/// label is chosen by its value at `belief`; the action with the largest
/// total wins and its candidate `r_a + γ Σ_l α_{a,l}` is condensed.
pub fn backup(
    belief: &GaussianMixture,
    table: &IntermediateTable,
    model: &CpomdpModel,
    config: &SolverConfig,
) -> Result<AlphaFunction> {
    if table.alphas == 0 || table.entries.is_empty() {
        return Err(Error::Empty("intermediate table"));
    }
    let gamma = model.discount;
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for a in 0..model.num_actions() {
        let mut value = inner_product(&model.rewards[a], belief)?;
        let mut picks = Vec::with_capacity(table.labels.len());
        for l in 0..table.labels.len() {
            let mut top = (f64::NEG_INFINITY, 0);
            for i in 0..table.alphas {
                let v = inner_product(table.get(i, a, l), belief)?;
                if v > top.0 {
                    top = (v, i);
                }
            }
            value += gamma * top.0;
            picks.push(top.1);
        }
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, a, picks));
        }
    }
    let (_, a, picks) = best.expect("at least one action");
    let mut components: Vec<GaussianComponent> = model.rewards[a].components().to_vec();
    if gamma != 0.0 {
        for (l, &i) in picks.iter().enumerate() {
            components.extend(
                table.get(i, a, l).components().iter().map(|c| c.with_weight(gamma * c.weight())).filter(|c| c.weight() != 0.0),
            );
        }
    }
    let gm = GaussianMixture::from_parts_unchecked(model.dimension, MixtureKind::RewardOrAlpha, components);
    Ok(AlphaFunction { action: model.actions[a].name.clone(), gm: condense_alpha(gm, config)? })
}

/// Index and value of the alpha maximizing `⟨α, belief⟩`; ties keep the
/// lowest index.
pub fn best_alpha(policy: &PolicySet, belief: &GaussianMixture) -> Result<(usize, f64)> {
    if policy.is_empty() {
        return Err(Error::Empty("policy"));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, alpha) in policy.alphas.iter().enumerate() {
        let v = inner_product(&alpha.gm, belief)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok(best)
}

/// Action and value of the best alpha at `belief`.
pub fn policy_query(policy: &PolicySet, belief: &GaussianMixture) -> Result<(String, f64)> {
    let (i, v) = best_alpha(policy, belief)?;
    Ok((policy.alphas[i].action.clone(), v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub alpha_count: usize,
    /// Mean over training beliefs of the best alpha value.
    pub mean_value: f64,
    pub millis: u128,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub policy: PolicySet,
    pub log: Vec<RoundStats>,
}

/// One backup round over all training beliefs.
pub fn backup_round(
    policy: &PolicySet,
    model: &CpomdpModel,
    beliefs: &[GaussianMixture],
    config: &SolverConfig,
) -> Result<PolicySet> {
    let table = intermediate_alphas(policy, model, config)?;
    let fresh = beliefs
        .par_iter()
        .map(|b| {
            let alpha = backup(b, &table, model, config)?;
            if config.keep_improving_only {
                let (i, old) = best_alpha(policy, b)?;
                if inner_product(&alpha.gm, b)? < old {
                    return Ok(policy.alphas[i].clone());
                }
            }
            Ok(alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PolicySet { horizon: policy.horizon + 1, alphas: dedup(fresh) })
}

/// Runs `rounds` backup rounds from the reward-seeded policy.
pub fn solve(
    model: &CpomdpModel,
    beliefs: &[GaussianMixture],
    rounds: usize,
    config: &SolverConfig,
) -> Result<SolveOutput> {
    solve_with(model, beliefs, rounds, config, |_| {})
}

/// [`solve`] with a callback after every round.
pub fn solve_with(
    model: &CpomdpModel,
    beliefs: &[GaussianMixture],
    rounds: usize,
    config: &SolverConfig,
    mut on_round: impl FnMut(&RoundStats),
) -> Result<SolveOutput> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("rounds must be at least 1".into()));
    }
    if beliefs.is_empty() {
        return Err(Error::Empty("beliefs"));
    }
    config.alpha_condense.validate()?;
    let mut policy = PolicySet::from_rewards(model);
    let mut log = Vec::with_capacity(rounds);
    for round in 1..=rounds {
        let start = Instant::now();
        policy = backup_round(&policy, model, beliefs, config)?;
        let values = beliefs.par_iter().map(|b| best_alpha(&policy, b).map(|x| x.1)).collect::<Result<Vec<_>>>()?;
        let stats = RoundStats {
            round,
            alpha_count: policy.len(),
            mean_value: values.iter().sum::<f64>() / values.len() as f64,
            millis: start.elapsed().as_millis(),
        };
        on_round(&stats);
        log.push(stats);
    }
    Ok(SolveOutput { policy, log })
}

fn same_alpha(a: &AlphaFunction, b: &AlphaFunction) -> bool {
    const TOL: f64 = 1e-9;
    let close = |x: f64, y: f64| (x - y).abs() <= TOL;
    a.action == b.action
        && a.gm.len() == b.gm.len()
        && a.gm.components().iter().zip(b.gm.components()).all(|(p, q)| {
            close(p.weight(), q.weight())
                && p.mean().iter().zip(q.mean().iter()).all(|(x, y)| close(*x, *y))
                && p.cov().iter().zip(q.cov().iter()).all(|(x, y)| close(*x, *y))
        })
}

/// Drops alphas equal (same action, parameters within 1e-9) to an earlier one.
pub fn dedup(alphas: Vec<AlphaFunction>) -> Vec<AlphaFunction> {
    let mut out: Vec<AlphaFunction> = Vec::with_capacity(alphas.len());
    for a in alphas {
        if !out.iter().any(|b| same_alpha(&a, b)) {
            out.push(a);
        }
    }
    out
}

/// Training beliefs from random rollouts: belief `k` runs a uniform random
/// number of steps in `[0, max_depth]` from `initial`, each with a random
/// action, a truth sample propagated through the model dynamics, and an
/// observation drawn at that truth. Observations with zero posterior mass
/// leave the predicted belief in place.
pub fn generate_beliefs(
    model: &CpomdpModel,
    initial: &GaussianMixture,
    count: usize,
    max_depth: usize,
    seed: u64,
    filter_config: &FilterConfig,
) -> Result<Vec<GaussianMixture>> {
    if count == 0 {
        return Err(Error::InvalidArgument("belief count must be at least 1".into()));
    }
    check_dim(model.dimension, initial.dimension())?;
    let initial = crate::gm::normalize(initial)?;
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::stream(seed, k as u64);
            let depth = rng.random_range(0..=max_depth);
            let mut belief = initial.clone();
            let mut truth = belief.sample(&mut rng)?;
            for _ in 0..depth {
                let a = rng.random_range(0..model.num_actions());
                let act = &model.actions[a];
                let drift = &model.transition * &truth + &act.delta;
                truth = crate::gm::sample_normal(&mut rng, &drift, &act.noise)?;
                let label = model.observation.sample_label(truth.as_slice(), &mut rng)?;
                let predicted = filter::predict(&belief, model, a)?;
                belief = match filter::update(&predicted, model, &label, filter_config) {
                    Ok(b) => b,
                    Err(Error::ZeroPosteriorMass(_)) => predicted,
                    Err(e) => return Err(e),
                };
            }
            Ok(belief)
        })
        .collect()
}
