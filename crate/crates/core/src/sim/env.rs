//! Ground-truth pursuit worlds: a cop that moves by noisy discrete steps and
//! a robber that follows its own (possibly different from the planner's)
//! dynamics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::filter::predict;
use crate::gm::{inner_product, GaussianMixture};
use crate::pbvi::CpomdpModel;
use crate::softmax::SoftmaxModel;

/// One cop action in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopMove {
    pub name: String,
    pub displacement: Vec<f64>,
    /// Per-axis variance of the executed displacement; zero is an exact move.
    pub var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobberDynamics {
    /// Random walk with the given step covariance (positive semidefinite).
    Ncp { cov: Vec<Vec<f64>> },
    /// Nearly constant velocity with white acceleration intensity `q`.
    Ncv { dt: f64, q: f64 },
}

impl RobberDynamics {
    pub fn is_ncv(&self) -> bool {
        matches!(self, RobberDynamics::Ncv { .. })
    }
}

/// `hit` when the cop is within `radius` of the robber after a step,
/// `miss` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardRule {
    pub radius: f64,
    pub hit: f64,
    pub miss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialTruth {
    /// Cop and robber independently uniform on `[low, high]` per axis.
    UniformBox { low: f64, high: f64 },
    /// Cop at the origin, robber offset drawn from `offset`, velocity from
    /// `N(0, velocity_var · I)`.
    Relative { offset: GaussianMixture, velocity_var: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    /// Number of position axes (1 or 2).
    pub dimension: usize,
    pub moves: Vec<CopMove>,
    pub robber: RobberDynamics,
    /// Sensor over the offset `robber − cop`.
    pub sensor: SoftmaxModel,
    pub reward: RewardRule,
    pub capture_radius: Option<f64>,
    /// Positions are clamped into this interval after every step.
    pub bounds: Option<(f64, f64)>,
    pub initial: InitialTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthState {
    pub cop: Vec<f64>,
    pub robber: Vec<f64>,
    /// Robber velocity; empty under random-walk dynamics.
    pub velocity: Vec<f64>,
}

impl TruthState {
    /// `robber − cop`.
    pub fn offset(&self) -> Vec<f64> {
        self.robber.iter().zip(&self.cop).map(|(r, c)| r - c).collect()
    }

    pub fn distance(&self) -> f64 {
        self.offset().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `cop ‖ robber ‖ velocity`.
    pub fn flatten(&self) -> Vec<f64> {
        self.cop.iter().chain(&self.robber).chain(&self.velocity).copied().collect()
    }
}

fn normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| Distribution::<f64>::sample(&StandardNormal, rng)))
}

/// Symmetric square root of a positive semidefinite matrix.
fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Per-axis NCV process noise `q [[dt³/3, dt²/2], [dt²/2, dt]]`.
pub fn ncv_axis_noise(dt: f64, q: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[dt.powi(3) / 3.0, dt.powi(2) / 2.0, dt.powi(2) / 2.0, dt]) * q
}

impl World {
    pub fn validate(&self) -> Result<()> {
        if self.moves.is_empty() {
            return Err(Error::InvalidModel("world has no cop moves".into()));
        }
        for m in &self.moves {
            check_dim(self.dimension, m.displacement.len())?;
            if !(m.var >= 0.0) {
                return Err(Error::InvalidModel(format!("move `{}` has negative variance", m.name)));
            }
        }
        check_dim(self.dimension, self.sensor.dimension())?;
        if let RobberDynamics::Ncp { cov } = &self.robber {
            let m = crate::linalg::matrix_from_rows(cov, self.dimension)?;
            crate::linalg::check_symmetric(&m)?;
        }
        if let InitialTruth::Relative { offset, .. } = &self.initial {
            check_dim(self.dimension, offset.dimension())?;
        }
        Ok(())
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TruthState> {
        let n = self.dimension;
        let vel_dim = if self.robber.is_ncv() { n } else { 0 };
        match &self.initial {
            InitialTruth::UniformBox { low, high } => {
                let cop = (0..n).map(|_| rng.random_range(*low..*high)).collect();
                let robber = (0..n).map(|_| rng.random_range(*low..*high)).collect();
                Ok(TruthState { cop, robber, velocity: vec![0.0; vel_dim] })
            }
            InitialTruth::Relative { offset, velocity_var } => {
                let robber = offset.sample(rng)?.iter().copied().collect();
                let sd = velocity_var.max(0.0).sqrt();
                let velocity = normals(rng, vel_dim).iter().map(|z| sd * z).collect();
                Ok(TruthState { cop: vec![0.0; n], robber, velocity })
            }
        }
    }

    fn clamp(&self, v: &mut [f64]) {
        if let Some((lo, hi)) = self.bounds {
            for x in v {
                *x = x.clamp(lo, hi);
            }
        }
    }

    fn hit(&self, truth: &TruthState) -> bool {
        truth.distance() <= self.reward.radius
    }

    pub fn reward(&self, truth: &TruthState) -> f64 {
        if self.hit(truth) {
            self.reward.hit
        } else {
            self.reward.miss
        }
    }

    pub fn captured(&self, truth: &TruthState) -> bool {
        self.capture_radius.is_some_and(|r| truth.distance() <= r)
    }

    /// Advances the truth by one step and returns it with the sensor label
    /// and reward observed at the new state. Every call consumes the same
    /// number of random draws regardless of the action.
    pub fn step<R: Rng + ?Sized>(
        &self,
        truth: &TruthState,
        action: usize,
        rng: &mut R,
    ) -> Result<(TruthState, String, f64)> {
        let n = self.dimension;
        check_dim(n, truth.cop.len())?;
        let mv = self.moves.get(action).ok_or_else(|| Error::UnknownAction(action.to_string()))?;
        let cop_noise = normals(rng, n);
        let sd = mv.var.sqrt();
        let mut cop: Vec<f64> = (0..n).map(|i| truth.cop[i] + mv.displacement[i] + sd * cop_noise[i]).collect();

        let (mut robber, velocity) = match &self.robber {
            RobberDynamics::Ncp { cov } => {
                let factor = psd_factor(&crate::linalg::matrix_from_rows(cov, n)?);
                let w = factor * normals(rng, n);
                ((0..n).map(|i| truth.robber[i] + w[i]).collect::<Vec<_>>(), Vec::new())
            }
            RobberDynamics::Ncv { dt, q } => {
                let factor = psd_factor(&ncv_axis_noise(*dt, *q));
                let mut pos = Vec::with_capacity(n);
                let mut vel = Vec::with_capacity(n);
                for i in 0..n {
                    let w = &factor * normals(rng, 2);
                    let v0 = truth.velocity.get(i).copied().unwrap_or(0.0);
                    pos.push(truth.robber[i] + dt * v0 + w[0]);
                    vel.push(v0 + w[1]);
                }
                (pos, vel)
            }
        };
        self.clamp(&mut cop);
        self.clamp(&mut robber);
        let next = TruthState { cop, robber, velocity };
        let label = sample_label(&self.sensor, &next.offset(), rng)?;
        let reward = self.reward(&next);
        Ok((next, label, reward))
    }
}

/// Draws a sensor label at `offset` from the softmax label probabilities.
pub fn sample_label<R: Rng + ?Sized>(sensor: &SoftmaxModel, offset: &[f64], rng: &mut R) -> Result<String> {
    let probs = sensor.label_probs(offset)?;
    let mut u = rng.random::<f64>();
    for (label, p) in &probs {
        if u < *p {
            return Ok((*label).to_owned());
        }
        u -= p;
    }
    Ok(probs.last().map(|(l, _)| (*l).to_owned()).expect("sensor has labels"))
}

/// Non-planning reference policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Maximizes `⟨r_a, predict(b, a)⟩`.
    Greedy,
    /// Steps toward the robber's true expected next position.
    Perfect,
}

/// Action chosen by a baseline. Ties go to the lowest action index.
pub fn baseline_action(
    kind: Baseline,
    world: &World,
    model: &CpomdpModel,
    belief: &GaussianMixture,
    truth: &TruthState,
) -> Result<usize> {
    match kind {
        Baseline::Greedy => {
            let mut best = (f64::NEG_INFINITY, 0);
            for (a, r) in model.rewards().iter().enumerate() {
                let v = inner_product(r, &predict(belief, model, a)?)?;
                if v > best.0 {
                    best = (v, a);
                }
            }
            Ok(best.1)
        }
        Baseline::Perfect => {
            let dt = match world.robber {
                RobberDynamics::Ncv { dt, .. } => dt,
                RobberDynamics::Ncp { .. } => 0.0,
            };
            let offset = truth.offset();
            let mut best = (f64::INFINITY, 0);
            for (a, mv) in world.moves.iter().enumerate() {
                let d: f64 = (0..world.dimension)
                    .map(|i| {
                        let v = truth.velocity.get(i).copied().unwrap_or(0.0);
                        (offset[i] + dt * v - mv.displacement[i]).powi(2)
                    })
                    .sum();
                if d < best.0 {
                    best = (d, a);
                }
            }
            Ok(best.1)
        }
    }
}
