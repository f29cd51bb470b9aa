//! Built-in pursuit scenarios: each pairs a ground-truth [`World`] with the
//! planner model used for solving and filtering.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::filter::{predict, update, FilterConfig};
use crate::gm::{normalize, GaussianComponent, GaussianMixture, MixtureKind};
use crate::pbvi::{Action, CpomdpModel, ObservationModel};
use crate::rng;
use crate::sim::env::{ncv_axis_noise, CopMove, InitialTruth, RewardRule, RobberDynamics, TruthState, World};
use crate::softmax::{build_relative_model, RelativeLayout, SoftmaxModel, DETECT, NO_DETECT};

pub const BUILTIN_SCENARIOS: [&str; 7] = [
    "colinear",
    "search2d",
    "search2d-slow",
    "search2d-mms",
    "ncv4d",
    "ncp-policy-ncv-truth",
    "ncv-policy-ncp-truth",
];

pub const DEFAULT_DISCOUNT: f64 = 0.95;
pub const DEFAULT_EPISODE_STEPS: usize = 100;
/// Variance standing in for an exact ("stay") transition in planner models.
pub const STAY_VAR: f64 = 1e-4;

const COLINEAR_BOUND: f64 = 5.0;
const COLINEAR_ROBBER_VAR: f64 = 0.5;
const COLINEAR_STEP: f64 = 0.5;
const COLINEAR_STEP_VAR: f64 = 0.01;
const COLINEAR_SENSOR_SCALE: f64 = 0.5;
/// Known-own-position variance kept on the cop axis of colinear beliefs.
const COP_VAR: f64 = 0.01;

const SEARCH_STEP_VAR: f64 = 0.01;
const SEARCH_REWARD_WEIGHT: f64 = 10.0;
/// Quadrant prior `(spread, variance)`. The MMS variant starts farther out
/// so that capture within the step cap is not automatic.
const SEARCH_PRIOR: (f64, f64) = (2.0, 4.0);
const MMS_PRIOR: (f64, f64) = (5.0, 9.0);
const NCV_DT: f64 = 1.0;
const NCV_Q: f64 = 0.01;
const NCV_VELOCITY_VAR: f64 = 0.1;
const NCV_REWARD_VELOCITY_VAR: f64 = 4.0;

/// How a planner state relates to the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerFrame {
    /// `[cop, robber]` with the cop position known exactly at run time.
    Absolute,
    /// Robber offset from the cop, optionally followed by its velocity.
    Relative { velocity: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub world: World,
    /// The world as the planner models it; training rollouts run here.
    pub planner_world: World,
    pub planner: CpomdpModel,
    /// Planner variant with likelihood-mixture observations, when available.
    pub gm_planner: Option<CpomdpModel>,
    pub frame: PlannerFrame,
    /// Prior over the robber coordinate (absolute frame) or the offset
    /// (relative frame) used for initial beliefs.
    pub prior: GaussianMixture,
    pub episode_steps: usize,
    /// End episodes at the first capture instead of running all steps.
    pub stop_on_capture: bool,
}

impl Scenario {
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "colinear" => colinear(),
            "search2d" => search2d("search2d", 1.0, false),
            "search2d-slow" => search2d("search2d-slow", 0.7, false),
            "search2d-mms" => search2d("search2d-mms", 1.0, true),
            "ncv4d" => {
                let mut s = search2d("ncv4d", 1.0, false)?;
                make_ncv(&mut s.world, &s.prior);
                s.planner_world = s.world.clone();
                s.planner = ncv_planner(&s.world.sensor)?;
                s.frame = PlannerFrame::Relative { velocity: true };
                Ok(s)
            }
            "ncp-policy-ncv-truth" => {
                let mut s = search2d(name, 1.0, false)?;
                make_ncv(&mut s.world, &s.prior);
                Ok(s)
            }
            "ncv-policy-ncp-truth" => {
                let mut s = search2d(name, 1.0, false)?;
                make_ncv(&mut s.planner_world, &s.prior);
                s.planner = ncv_planner(&s.world.sensor)?;
                s.frame = PlannerFrame::Relative { velocity: true };
                Ok(s)
            }
            other => Err(Error::InvalidArgument(format!(
                "unknown scenario `{other}` (expected one of: {})",
                BUILTIN_SCENARIOS.join(", ")
            ))),
        }
    }

    /// Replaces the planner model, keeping the world. The action names must
    /// match the world's cop moves.
    pub fn with_planner(mut self, planner: CpomdpModel) -> Result<Self> {
        let names: Vec<&str> = planner.actions().iter().map(|a| a.name.as_str()).collect();
        let moves: Vec<&str> = self.world.moves.iter().map(|m| m.name.as_str()).collect();
        if names != moves {
            return Err(Error::InvalidModel(format!("planner actions {names:?} do not match world moves {moves:?}")));
        }
        let expected = match self.frame {
            PlannerFrame::Absolute => 2 * self.world.dimension,
            PlannerFrame::Relative { velocity: false } => self.world.dimension,
            PlannerFrame::Relative { velocity: true } => 2 * self.world.dimension,
        };
        if planner.dimension() != expected {
            return Err(Error::DimensionMismatch { expected, found: planner.dimension() });
        }
        self.planner = planner;
        self.gm_planner = None;
        Ok(self)
    }

    /// Planner belief at the start of an episode with initial truth `truth`.
    pub fn initial_belief(&self, truth: &TruthState) -> Result<GaussianMixture> {
        let comps = match self.frame {
            PlannerFrame::Absolute => self
                .prior
                .components()
                .iter()
                .map(|c| {
                    let mean = [truth.cop[0], c.mean()[0]];
                    GaussianComponent::from_slices(c.weight(), &mean, &[COP_VAR, 0.0, 0.0, c.cov()[(0, 0)]])
                })
                .collect::<Result<Vec<_>>>()?,
            PlannerFrame::Relative { velocity: false } => self.prior.components().to_vec(),
            PlannerFrame::Relative { velocity: true } => {
                let n = self.world.dimension;
                self.prior
                    .components()
                    .iter()
                    .map(|c| {
                        let mut mean = DVector::zeros(2 * n);
                        mean.rows_mut(0, n).copy_from(c.mean());
                        let mut cov = DMatrix::identity(2 * n, 2 * n) * NCV_VELOCITY_VAR;
                        cov.view_mut((0, 0), (n, n)).copy_from(c.cov());
                        GaussianComponent::new(c.weight(), mean, cov)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        GaussianMixture::belief_from(self.planner.dimension(), comps)
    }

    /// Conditions an absolute-frame belief on the known cop position and,
    /// in a bounded arena, moment-matches each robber marginal to its
    /// truncation onto the bounds. Other frames are returned unchanged.
    pub fn anchor(&self, belief: GaussianMixture, truth: &TruthState) -> Result<GaussianMixture> {
        if self.frame != PlannerFrame::Absolute {
            return Ok(belief);
        }
        let c = truth.cop[0];
        let mut parts = Vec::with_capacity(belief.len());
        for comp in belief.components() {
            let (m, s) = (comp.mean(), comp.cov());
            let (a, b, d) = (s[(0, 0)], s[(0, 1)], s[(1, 1)]);
            let r = c - m[0];
            let log_w = comp.weight().ln() - 0.5 * (r * r / a + (2.0 * std::f64::consts::PI * a).ln());
            let var = (d - b * b / a).max(1e-12);
            let mean = m[1] + b / a * r;
            match self.world.bounds.map(|(lo, hi)| truncate(mean, var, lo, hi)) {
                Some(Some((log_z, tm, tv))) => parts.push((log_w + log_z, tm, tv)),
                Some(None) => {}
                None => parts.push((log_w, mean, var)),
            }
        }
        let top = parts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Ok(belief);
        }
        let total: f64 = parts.iter().map(|p| (p.0 - top).exp()).sum();
        let comps = parts
            .into_iter()
            .map(|(lw, mean, var)| {
                GaussianComponent::from_slices((lw - top).exp() / total, &[c, mean], &[COP_VAR, 0.0, 0.0, var])
            })
            .collect::<Result<Vec<_>>>()?;
        GaussianMixture::belief_from(2, comps)
    }

    /// Training beliefs for `model` (the scenario planner or a variant).
    /// Belief `k` comes from a rollout in the planner's world with uniformly
    /// random actions and a uniform random length in `[0, max_depth]`,
    /// filtered exactly as during an episode.
    pub fn training_beliefs(
        &self,
        model: &CpomdpModel,
        count: usize,
        max_depth: usize,
        seed: u64,
        filter: &FilterConfig,
    ) -> Result<Vec<GaussianMixture>> {
        if count == 0 {
            return Err(Error::InvalidArgument("belief count must be at least 1".into()));
        }
        let world = &self.planner_world;
        (0..count)
            .into_par_iter()
            .map(|k| {
                let mut rng = rng::stream(seed, k as u64);
                let mut truth = world.sample_initial(&mut rng)?;
                let mut belief = self.initial_belief(&truth)?;
                let depth = rng.random_range(0..=max_depth);
                for _ in 0..depth {
                    let action = rng.random_range(0..model.num_actions());
                    let (next, label, _) = world.step(&truth, action, &mut rng)?;
                    belief = self.filter_step(model, &belief, action, &label, &next, filter)?;
                    truth = next;
                }
                Ok(belief)
            })
            .collect()
    }

    /// One predict/update/anchor cycle. An impossible observation leaves
    /// the prediction in place.
    pub fn filter_step(
        &self,
        model: &CpomdpModel,
        belief: &GaussianMixture,
        action: usize,
        label: &str,
        truth: &TruthState,
        filter: &FilterConfig,
    ) -> Result<GaussianMixture> {
        let predicted = predict(belief, model, action)?;
        let posterior = match update(&predicted, model, label, filter) {
            Ok(b) => b,
            Err(Error::ZeroPosteriorMass(_)) => normalize(&predicted)?,
            Err(e) => return Err(e),
        };
        self.anchor(posterior, truth)
    }
}

/// `(ln Z, mean, var)` of `N(mean, var)` truncated to `[lo, hi]`, or `None`
/// when the interval carries no mass.
fn truncate(mean: f64, var: f64, lo: f64, hi: f64) -> Option<(f64, f64, f64)> {
    let sd = var.sqrt();
    let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
    let n = Normal::standard();
    let z = n.cdf(b) - n.cdf(a);
    if !(z > 1e-300) {
        return None;
    }
    let (pa, pb) = (n.pdf(a), n.pdf(b));
    let shift = (pa - pb) / z;
    let tail = |x: f64, p: f64| if x.is_finite() { x * p } else { 0.0 };
    let scale = 1.0 + (tail(a, pa) - tail(b, pb)) / z - shift * shift;
    Some((z.ln(), mean + sd * shift, (var * scale).max(1e-12)))
}

fn make_ncv(world: &mut World, prior: &GaussianMixture) {
    world.robber = RobberDynamics::Ncv { dt: NCV_DT, q: NCV_Q };
    world.initial = relative_initial(prior, NCV_VELOCITY_VAR);
}

fn relative_initial(prior: &GaussianMixture, velocity_var: f64) -> InitialTruth {
    InitialTruth::Relative { offset: prior.clone(), velocity_var }
}

fn mixture(dim: usize, kind: MixtureKind, comps: Vec<GaussianComponent>) -> Result<GaussianMixture> {
    GaussianMixture::new(dim, kind, comps)
}

/// Component in `(cop, robber)` coordinates from one in the rotated frame
/// `u = (robber − cop)/√2`, `v = (robber + cop)/√2`.
fn from_rotated(weight: f64, mean_uv: [f64; 2], var_uv: [f64; 2]) -> Result<GaussianComponent> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let r = DMatrix::from_row_slice(2, 2, &[-h, h, h, h]);
    let mean = &r * DVector::from_column_slice(&mean_uv);
    let cov = &r * DMatrix::from_diagonal(&DVector::from_column_slice(&var_uv)) * r.transpose();
    GaussianComponent::new(weight, mean, cov)
}

/// Variance along `v` for functions of `robber − cop` only; wide enough to be
/// nearly flat across the bounded arena.
const FLAT_VAR: f64 = 1000.0;

/// Mixture in `(cop, robber)` approximating `g(robber − cop)` for a 1D
/// profile `g(d) ≈ Σ c_k φ(d | m_k, s_k)`.
fn lift_offset_profile(profile: &[(f64, f64, f64)]) -> Result<Vec<GaussianComponent>> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let v0 = COLINEAR_BOUND * h;
    let flat = (2.0 * std::f64::consts::PI * FLAT_VAR).sqrt();
    profile
        .iter()
        .map(|&(c, m, s)| from_rotated(c * h * flat, [m * h, v0], [s / 2.0, FLAT_VAR]))
        .collect()
}

fn colinear_sensor() -> Result<SoftmaxModel> {
    build_relative_model(RelativeLayout::DetectNoDetect3, COLINEAR_SENSOR_SCALE)
}

/// Likelihood mixtures approximating the colinear sensor: each label's
/// probability profile in `d = robber − cop` is fitted by a nonnegative
/// combination of Gaussians on a regular grid, then lifted to
/// `(cop, robber)`.
pub fn colinear_gm_likelihood() -> Result<BTreeMap<String, GaussianMixture>> {
    const SPACING: f64 = 0.2;
    const HALF_WIDTH: f64 = 6.4;
    let sensor = colinear_sensor()?;
    let var = SPACING * SPACING;
    let n = (HALF_WIDTH / SPACING).round() as i64;
    let centers: Vec<f64> = (-n..=n).map(|k| k as f64 * SPACING).collect();
    let samples: Vec<f64> = (-600..=600).map(|k| k as f64 * 0.01).collect();
    let mut out = BTreeMap::new();
    for label in [DETECT, NO_DETECT] {
        let target = samples.iter().map(|&x| sensor.label_prob(&[x], label)).collect::<Result<Vec<_>>>()?;
        let weights = nnls_gaussian_fit(&centers, var, &samples, &target);
        let top = weights.iter().copied().fold(0.0, f64::max);
        let profile: Vec<(f64, f64, f64)> = weights
            .iter()
            .zip(&centers)
            .filter(|(w, _)| **w > 1e-4 * top)
            .map(|(&w, &m)| (w, m, var))
            .collect();
        out.insert(label.to_owned(), mixture(2, MixtureKind::Likelihood, lift_offset_profile(&profile)?)?);
    }
    Ok(out)
}

/// Nonnegative least-squares weights `c` so that `Σ c_k φ(x | m_k, var)`
/// matches `target` at `samples`, by cyclic coordinate descent.
fn nnls_gaussian_fit(centers: &[f64], var: f64, samples: &[f64], target: &[f64]) -> Vec<f64> {
    let norm = (2.0 * std::f64::consts::PI * var).sqrt();
    let basis: Vec<Vec<f64>> = centers
        .iter()
        .map(|&m| samples.iter().map(|&x| (-(x - m) * (x - m) / (2.0 * var)).exp() / norm).collect())
        .collect();
    let k = centers.len();
    let gram = DMatrix::from_fn(k, k, |i, j| basis[i].iter().zip(&basis[j]).map(|(a, b)| a * b).sum::<f64>());
    let rhs: Vec<f64> = basis.iter().map(|b| b.iter().zip(target).map(|(a, t)| a * t).sum()).collect();
    let mut w = vec![0.0; k];
    for _ in 0..2000 {
        for i in 0..k {
            let g: f64 = (0..k).map(|j| gram[(i, j)] * w[j]).sum::<f64>() - rhs[i];
            w[i] = (w[i] - g / gram[(i, i)]).max(0.0);
        }
    }
    w
}

fn colinear() -> Result<Scenario> {
    let sensor = colinear_sensor()?;
    let moves = vec![
        CopMove { name: "left".into(), displacement: vec![-COLINEAR_STEP], var: COLINEAR_STEP_VAR },
        CopMove { name: "right".into(), displacement: vec![COLINEAR_STEP], var: COLINEAR_STEP_VAR },
        CopMove { name: "stay".into(), displacement: vec![0.0], var: 0.0 },
    ];
    let actions = moves
        .iter()
        .map(|m| {
            let cop_var = if m.var > 0.0 { m.var } else { STAY_VAR };
            Action::new(&m.name, &[m.displacement[0], 0.0], DMatrix::from_diagonal(&DVector::from_column_slice(&[cop_var, COLINEAR_ROBBER_VAR])))
        })
        .collect::<Result<Vec<_>>>()?;

    // r = 3 inside |d| ≤ 0.5, −1 outside: a band of height 4 over a broad
    // −1 floor. Only the band moves with the action.
    let band_var = 0.16;
    let band_weight = 4.0 * (2.0 * std::f64::consts::PI * band_var).sqrt();
    let floor_var = 25.0;
    let floor = GaussianComponent::isotropic(
        -2.0 * std::f64::consts::PI * floor_var,
        &[COLINEAR_BOUND / 2.0, COLINEAR_BOUND / 2.0],
        floor_var,
    )?;
    let rewards = actions
        .iter()
        .map(|a| {
            let band = lift_offset_profile(&[(band_weight, 0.0, band_var)])?.remove(0);
            let (w, mean, cov) = band.into_parts();
            let shifted = GaussianComponent::new(w, mean - &a.delta, cov)?;
            mixture(2, MixtureKind::RewardOrAlpha, vec![shifted, floor.clone()])
        })
        .collect::<Result<Vec<_>>>()?;

    let observation = sensor.compose_affine(2, &[-1.0, 1.0], &[0.0])?;
    let planner = CpomdpModel::new(
        2,
        actions,
        rewards,
        DMatrix::identity(2, 2),
        ObservationModel::Softmax(observation),
        DEFAULT_DISCOUNT,
    )?;
    let gm_planner = planner.with_observation(ObservationModel::GmLikelihood(colinear_gm_likelihood()?))?;
    let prior = mixture(
        1,
        MixtureKind::Belief,
        (0..5).map(|k| GaussianComponent::scalar(0.2, k as f64 + 0.5, 0.3)).collect::<Result<_>>()?,
    )?;
    let world = World {
        dimension: 1,
        moves,
        robber: RobberDynamics::Ncp { cov: vec![vec![COLINEAR_ROBBER_VAR]] },
        sensor,
        reward: RewardRule { radius: 0.5, hit: 3.0, miss: -1.0 },
        capture_radius: Some(0.5),
        bounds: Some((0.0, COLINEAR_BOUND)),
        initial: InitialTruth::UniformBox { low: 0.0, high: COLINEAR_BOUND },
    };
    world.validate()?;
    Ok(Scenario {
        name: "colinear".into(),
        planner_world: world.clone(),
        world,
        planner,
        gm_planner: Some(gm_planner),
        frame: PlannerFrame::Absolute,
        prior,
        episode_steps: DEFAULT_EPISODE_STEPS,
        stop_on_capture: false,
    })
}

fn search_moves() -> Vec<CopMove> {
    let mv = |name: &str, d: [f64; 2], var: f64| CopMove { name: name.into(), displacement: d.to_vec(), var };
    vec![
        mv("East", [1.0, 0.0], SEARCH_STEP_VAR),
        mv("West", [-1.0, 0.0], SEARCH_STEP_VAR),
        mv("North", [0.0, 1.0], SEARCH_STEP_VAR),
        mv("South", [0.0, -1.0], SEARCH_STEP_VAR),
        mv("Stay", [0.0, 0.0], 0.0),
    ]
}

fn search_rewards(dim: usize, moves: &[CopMove]) -> Result<Vec<GaussianMixture>> {
    moves
        .iter()
        .map(|m| {
            let mut mean = vec![0.0; dim];
            mean[..2].copy_from_slice(&m.displacement);
            let mut diag = vec![NCV_REWARD_VELOCITY_VAR; dim];
            diag[0] = 1.0;
            diag[1] = 1.0;
            let c = GaussianComponent::new(
                SEARCH_REWARD_WEIGHT,
                DVector::from_vec(mean),
                DMatrix::from_diagonal(&DVector::from_vec(diag)),
            )?;
            mixture(dim, MixtureKind::RewardOrAlpha, vec![c])
        })
        .collect()
}

fn search_prior((s, var): (f64, f64)) -> Result<GaussianMixture> {
    let comps = [[s, s], [-s, s], [-s, -s], [s, -s]]
        .iter()
        .map(|m| GaussianComponent::isotropic(0.25, m, var))
        .collect::<Result<_>>()?;
    mixture(2, MixtureKind::Belief, comps)
}

fn mms_labels() -> BTreeMap<String, Vec<usize>> {
    BTreeMap::from([(DETECT.to_owned(), vec![0]), (NO_DETECT.to_owned(), vec![1, 2, 3, 4])])
}

fn search2d(name: &str, robber_var: f64, mms: bool) -> Result<Scenario> {
    let mut sensor = build_relative_model(RelativeLayout::Proximity5, 1.0)?;
    if mms {
        sensor = sensor.with_labels(mms_labels())?;
    }
    let moves = search_moves();
    let actions = moves
        .iter()
        .map(|m| {
            let cop_var = if m.var > 0.0 { m.var } else { STAY_VAR };
            Action::isotropic(&m.name, &[-m.displacement[0], -m.displacement[1]], robber_var + cop_var)
        })
        .collect::<Result<Vec<_>>>()?;
    let planner = CpomdpModel::new(
        2,
        actions,
        search_rewards(2, &moves)?,
        DMatrix::identity(2, 2),
        ObservationModel::Softmax(sensor.clone()),
        DEFAULT_DISCOUNT,
    )?;
    let prior = search_prior(if mms { MMS_PRIOR } else { SEARCH_PRIOR })?;
    let world = World {
        dimension: 2,
        moves,
        robber: RobberDynamics::Ncp { cov: vec![vec![robber_var, 0.0], vec![0.0, robber_var]] },
        sensor,
        reward: RewardRule { radius: 1.0, hit: 5.0, miss: 0.0 },
        capture_radius: Some(1.0),
        bounds: None,
        initial: relative_initial(&prior, 0.0),
    };
    world.validate()?;
    Ok(Scenario {
        name: name.into(),
        planner_world: world.clone(),
        world,
        planner,
        gm_planner: None,
        frame: PlannerFrame::Relative { velocity: false },
        prior,
        episode_steps: DEFAULT_EPISODE_STEPS,
        stop_on_capture: mms,
    })
}

/// `[[1,0,dt,0],[0,1,0,dt],[0,0,1,0],[0,0,0,1]]`.
pub fn ncv_transition(dt: f64) -> DMatrix<f64> {
    let mut f = DMatrix::identity(4, 4);
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

/// Planner over `[Δx, Δy, v_x, v_y]` with NCV robber dynamics.
fn ncv_planner(sensor_2d: &SoftmaxModel) -> Result<CpomdpModel> {
    let moves = search_moves();
    let q = ncv_axis_noise(NCV_DT, NCV_Q);
    let actions = moves
        .iter()
        .map(|m| {
            let cop_var = if m.var > 0.0 { m.var } else { STAY_VAR };
            let mut noise = DMatrix::zeros(4, 4);
            for axis in 0..2 {
                let idx = [axis, axis + 2];
                for (r, &i) in idx.iter().enumerate() {
                    for (c, &j) in idx.iter().enumerate() {
                        noise[(i, j)] = q[(r, c)];
                    }
                }
                noise[(axis, axis)] += cop_var;
            }
            Action::new(&m.name, &[-m.displacement[0], -m.displacement[1], 0.0, 0.0], noise)
        })
        .collect::<Result<Vec<_>>>()?;
    CpomdpModel::new(
        4,
        actions,
        search_rewards(4, &moves)?,
        ncv_transition(NCV_DT),
        ObservationModel::Softmax(sensor_2d.pad_dimensions(4, &[0, 1])?),
        DEFAULT_DISCOUNT,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::composite_1d;

    #[test]
    fn builtins_construct() {
        for name in BUILTIN_SCENARIOS {
            let s = Scenario::builtin(name).unwrap();
            assert_eq!(s.planner.num_actions(), s.world.moves.len(), "{name}");
            assert_eq!(s.planner.discount(), 0.95);
        }
        assert!(Scenario::builtin("mars").is_err());
    }

    #[test]
    fn colinear_shape() {
        let s = Scenario::builtin("colinear").unwrap();
        assert_eq!(s.planner.dimension(), 2);
        assert_eq!(s.planner.num_actions(), 3);
        match s.planner.observation() {
            ObservationModel::Softmax(m) => {
                assert_eq!(m.num_classes(), 3);
                assert_eq!(m.label_classes(NO_DETECT).unwrap().len(), 2);
            }
            _ => panic!("colinear uses a softmax sensor"),
        }
    }

    #[test]
    fn ncv_transition_block() {
        let s = Scenario::builtin("ncv4d").unwrap();
        assert_eq!(s.planner.transition(), &ncv_transition(1.0));
        assert_eq!(s.planner.transition()[(0, 2)], 1.0);
    }

    #[test]
    fn colinear_reward_profile() {
        let s = Scenario::builtin("colinear").unwrap();
        let stay = &s.planner.rewards()[2];
        let at = |cop: f64, rob: f64| stay.evaluate(&[cop, rob]).unwrap();
        assert!((at(2.5, 2.5) - 3.0).abs() < 0.1);
        assert!((at(1.0, 3.5) + 1.0).abs() < 0.25);
        // moving left pays off when the robber is just to the left
        let left = &s.planner.rewards()[0];
        assert!(left.evaluate(&[2.5, 2.0]).unwrap() > stay.evaluate(&[2.5, 2.0]).unwrap());
    }

    #[test]
    fn gm_likelihood_tracks_sensor() {
        let lik = colinear_gm_likelihood().unwrap();
        let sensor = colinear_sensor().unwrap();
        for d in [-3.0, -1.0, -0.4, 0.0, 0.3, 0.8, 2.0] {
            let (cop, rob) = (2.5 - d / 2.0, 2.5 + d / 2.0);
            for label in [DETECT, NO_DETECT] {
                let approx = lik[label].evaluate(&[cop, rob]).unwrap();
                let exact = sensor.label_prob(&[d], label).unwrap();
                assert!((approx - exact).abs() < 0.03, "{label} at {d}: {approx} vs {exact}");
            }
        }
        let detect_mass = composite_1d(-6.0, 6.0, 48, 8, |d| sensor.label_prob(&[d], DETECT).unwrap());
        let approx_mass = composite_1d(-6.0, 6.0, 48, 8, |d| lik[DETECT].evaluate(&[2.5 - d / 2.0, 2.5 + d / 2.0]).unwrap());
        assert!((detect_mass - approx_mass).abs() / detect_mass < 0.01);
    }

    #[test]
    fn truncated_moments_match_quadrature() {
        for (m, v, lo, hi) in [(0.0, 1.0, -1.0, 2.0), (4.8, 0.5, 0.0, 5.0), (6.0, 1.0, 0.0, 5.0)] {
            let (log_z, tm, tv) = truncate(m, v, lo, hi).unwrap();
            let pdf = |x: f64| (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
            let z = composite_1d(lo, hi, 64, 8, pdf);
            let mean = composite_1d(lo, hi, 64, 8, |x| x * pdf(x)) / z;
            let var = composite_1d(lo, hi, 64, 8, |x| (x - mean).powi(2) * pdf(x)) / z;
            assert!((log_z - z.ln()).abs() < 1e-9);
            assert!((tm - mean).abs() < 1e-9 && (tv - var).abs() < 1e-9, "{tm} {mean} {tv} {var}");
        }
        assert!(truncate(100.0, 1.0, 0.0, 5.0).is_none());
    }

    #[test]
    fn anchoring_keeps_robber_in_bounds() {
        let s = Scenario::builtin("colinear").unwrap();
        let truth = TruthState { cop: vec![4.0], robber: vec![4.5], velocity: vec![] };
        let b = GaussianMixture::belief_from(
            2,
            vec![GaussianComponent::from_slices(1.0, &[3.9, 5.5], &[0.02, 0.01, 0.01, 1.0]).unwrap()],
        )
        .unwrap();
        let a = s.anchor(b, &truth).unwrap();
        let c = &a.components()[0];
        assert_eq!(c.mean()[0], 4.0);
        assert!(c.mean()[1] < 5.0 && c.cov()[(1, 1)] < 1.0);
    }

    #[test]
    fn initial_beliefs_match_frames() {
        let s = Scenario::builtin("colinear").unwrap();
        let truth = TruthState { cop: vec![1.2], robber: vec![3.0], velocity: vec![] };
        let b = s.initial_belief(&truth).unwrap();
        assert_eq!(b.dimension(), 2);
        assert!(b.components().iter().all(|c| c.mean()[0] == 1.2));
        let s = Scenario::builtin("ncv4d").unwrap();
        let t = s.world.sample_initial(&mut rng::stream(1, 0)).unwrap();
        assert_eq!(t.velocity.len(), 2);
        assert_eq!(s.initial_belief(&t).unwrap().dimension(), 4);
    }
}
