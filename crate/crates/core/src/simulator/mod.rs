//! Seeded Monte Carlo of the networked closed loop.
//!
//! Each trajectory owns a generator derived from `(seed, index)`, so running
//! trajectories in any order or in parallel gives the same report. Per step
//! the stream is consumed in a fixed order: `w1` (n normals), `w2` (n
//! normals), then one uniform for `θ` and one for `Φ`. A trajectory starts
//! with `n` uniforms for `x(0)` (when drawn from `X0`) followed by the
//! measurement noise of `y(0)`.

pub mod stats;

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use nalgebra::DVector;
use rand_core::RngCore;

use crate::certificate::{BoxRegion, SafetySpec};
use crate::error::{Error, Result};
use crate::linalg::quad_form;
use crate::model::{offsets, AugmentedSystem, DtSls, FeedbackGain, NetworkParams};
use crate::random::{stream_rng, GaussianSampler, NormalStream};

pub use stats::{clopper_pearson_lower, clopper_pearson_upper};

/// Plant state, predictor state, applied input and predicted input.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopState {
    pub x: DVector<f64>,
    pub x_hat: DVector<f64>,
    pub u: DVector<f64>,
    pub u_hat: DVector<f64>,
}

impl LoopState {
    /// `z = [x; x̂; u; û]`
    pub fn to_augmented(&self) -> DVector<f64> {
        let (n, m) = (self.x.len(), self.u.len());
        let mut z = DVector::zeros(2 * (n + m));
        let [ox, oxh, ou, ouh] = offsets(n, m);
        z.rows_mut(ox, n).copy_from(&self.x);
        z.rows_mut(oxh, n).copy_from(&self.x_hat);
        z.rows_mut(ou, m).copy_from(&self.u);
        z.rows_mut(ouh, m).copy_from(&self.u_hat);
        z
    }

    pub fn from_augmented(z: &DVector<f64>, n: usize, m: usize) -> Self {
        let [ox, oxh, ou, ouh] = offsets(n, m);
        Self {
            x: z.rows(ox, n).into_owned(),
            x_hat: z.rows(oxh, n).into_owned(),
            u: z.rows(ou, m).into_owned(),
            u_hat: z.rows(ouh, m).into_owned(),
        }
    }
}

/// Random inputs of one transition `k → k+1`.
///
/// `phi` gates the input update `u(k+1) = Φ û(k+1) + (1−Φ) u(k)`; it is the
/// one-step-delayed actuator outcome of the hold equation written at time k+1.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDraws {
    pub w1: DVector<f64>,
    pub w2: DVector<f64>,
    pub theta: bool,
    pub phi: bool,
}

impl StepDraws {
    pub fn noise(&self) -> DVector<f64> {
        let n = self.w1.len();
        let mut w = DVector::zeros(2 * n);
        w.rows_mut(0, n).copy_from(&self.w1);
        w.rows_mut(n, n).copy_from(&self.w2);
        w
    }
}

/// One transition of the loop written component by component.
pub fn step_componentwise(state: &LoopState, sys: &DtSls, gain: &FeedbackGain, draws: &StepDraws) -> LoopState {
    let a = sys.a();
    let b = sys.b();
    let f = gain.matrix();
    let x = a * &state.x + b * &state.u + &draws.w1;
    let x_hat = if draws.theta {
        // y = x + w2 reaches the predictor
        a * (&state.x + &draws.w2) + b * &state.u_hat
    } else {
        a * &state.x_hat + b * &state.u_hat
    };
    let u_hat = f * (a * &state.x_hat + b * &state.u_hat);
    let u = if draws.phi { u_hat.clone() } else { state.u.clone() };
    LoopState { x, x_hat, u, u_hat }
}

/// `z(k+1) = Ã(k) z(k) + Ẽ(k) w(k)` with the realized packet outcomes.
pub fn step_augmented(z: &DVector<f64>, aug: &AugmentedSystem, draws: &StepDraws) -> DVector<f64> {
    let (ak, ek) = aug.realize_transition(draws.theta, draws.phi);
    ak * z + ek * draws.noise()
}

/// Draw source shared by the simulator and the drift check.
pub struct DrawSource<R> {
    normals: NormalStream<R>,
    w1: GaussianSampler,
    w2: GaussianSampler,
    mu_theta: f64,
    mu_phi: f64,
}

impl<R: RngCore> DrawSource<R> {
    pub fn new(rng: R, sys: &DtSls, net: &NetworkParams) -> Result<Self> {
        Ok(Self {
            normals: NormalStream::new(rng),
            w1: GaussianSampler::new(sys.sigma_w1())?,
            w2: GaussianSampler::new(sys.sigma_w2())?,
            mu_theta: net.mu_theta(),
            mu_phi: net.mu_phi(),
        })
    }

    pub fn uniform(&mut self) -> f64 {
        self.normals.uniform()
    }

    pub fn measurement_noise(&mut self) -> DVector<f64> {
        self.w2.sample(&mut self.normals)
    }

    pub fn uniform_in(&mut self, region: &BoxRegion) -> DVector<f64> {
        DVector::from_fn(region.dim(), |i, _| {
            let (l, u) = (region.lower()[i], region.upper()[i]);
            l + (u - l) * self.normals.uniform()
        })
    }

    pub fn step(&mut self) -> StepDraws {
        let w1 = self.w1.sample(&mut self.normals);
        let w2 = self.w2.sample(&mut self.normals);
        let theta = self.normals.uniform() < self.mu_theta;
        let phi = self.normals.uniform() < self.mu_phi;
        StepDraws { w1, w2, theta, phi }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// `x(0)` uniform over the initial box.
    UniformOverX0,
    /// `x(0)` cycles through the given points by trajectory index.
    FixedPoints(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub trajectories: usize,
    pub horizon: usize,
    pub seed: u64,
    pub init_mode: InitMode,
    /// Keep every step of every trajectory in the report.
    pub record_full: bool,
}

impl SimConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.trajectories < 1 {
            return Err(Error::Domain {
                what: "trajectories",
                value: self.trajectories as f64,
                domain: "[1, inf)",
            });
        }
        if self.horizon < 1 {
            return Err(Error::Domain {
                what: "horizon",
                value: self.horizon as f64,
                domain: "[1, inf)",
            });
        }
        if let InitMode::FixedPoints(points) = &self.init_mode {
            if points.is_empty() || points.iter().any(|p| p.len() != n) {
                return Err(Error::InvalidSpec(alloc::format!(
                    "fixed initial points must be non-empty and of dimension {n}"
                )));
            }
        }
        Ok(())
    }
}

/// One recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub k: usize,
    pub state: LoopState,
    /// Packet outcomes of the transition leaving step `k` (`None` on the last row).
    pub theta: Option<bool>,
    pub phi: Option<bool>,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    pub index: usize,
    pub first_violation: Option<usize>,
    /// Whether `x(k)` left the state set `X` at some step.
    pub exited_state_set: bool,
    /// Plant state per step, `horizon + 1` entries.
    pub states: Vec<DVector<f64>>,
    pub rows: Option<Vec<TrajectoryRow>>,
}

fn initial_state<R: RngCore>(
    draws: &mut DrawSource<R>,
    spec: &SafetySpec,
    gain: &FeedbackGain,
    cfg: &SimConfig,
    index: usize,
) -> LoopState {
    let x = match &cfg.init_mode {
        InitMode::UniformOverX0 => draws.uniform_in(spec.initial()),
        InitMode::FixedPoints(points) => DVector::from_column_slice(&points[index % points.len()]),
    };
    let y = &x + draws.measurement_noise();
    let mut u_hat: Vec<f64> = (gain.matrix() * &y).iter().copied().collect();
    spec.input().clamp(&mut u_hat);
    let u_hat = DVector::from_vec(u_hat);
    LoopState {
        x,
        x_hat: y,
        u: u_hat.clone(),
        u_hat,
    }
}

/// Simulates trajectory `index` of a Monte Carlo run.
pub fn simulate_trajectory(
    sys: &DtSls,
    gain: &FeedbackGain,
    net: &NetworkParams,
    spec: &SafetySpec,
    cfg: &SimConfig,
    index: usize,
) -> Result<TrajectoryOutcome> {
    let mut draws = DrawSource::new(stream_rng(cfg.seed, index as u64), sys, net)?;
    let mut state = initial_state(&mut draws, spec, gain, cfg, index);
    let mut first_violation = None;
    let mut exited = false;
    let mut states = Vec::with_capacity(cfg.horizon + 1);
    let mut rows = cfg.record_full.then(|| Vec::with_capacity(cfg.horizon + 1));
    for k in 0..=cfg.horizon {
        let x = state.x.as_slice();
        let violated = spec.is_unsafe(x);
        if violated && first_violation.is_none() {
            first_violation = Some(k);
        }
        exited |= !spec.state().contains(x);
        states.push(state.x.clone());
        if k == cfg.horizon {
            if let Some(rows) = rows.as_mut() {
                rows.push(TrajectoryRow {
                    k,
                    state: state.clone(),
                    theta: None,
                    phi: None,
                    violated,
                });
            }
            break;
        }
        let step = draws.step();
        let next = step_componentwise(&state, sys, gain, &step);
        if let Some(rows) = rows.as_mut() {
            rows.push(TrajectoryRow {
                k,
                state,
                theta: Some(step.theta),
                phi: Some(step.phi),
                violated,
            });
        }
        state = next;
    }
    Ok(TrajectoryOutcome {
        index,
        first_violation,
        exited_state_set: exited,
        states,
        rows,
    })
}

/// Per-step coordinate-wise range of the plant state over all trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEnvelope {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// One-sided confidence level of the reported interval.
pub const CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub trajectories: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Trajectories with `x(k) ∈ X1` for some `k ∈ [0, T]`.
    pub violations: usize,
    /// Trajectories that left `X` (whether or not they hit `X1`).
    pub exits: usize,
    pub empirical_p: f64,
    /// One-sided 99% Clopper–Pearson lower bound.
    pub ci_lower: f64,
    /// One-sided 99% Clopper–Pearson upper bound.
    pub ci_upper: f64,
    pub bound_epsilon: Option<f64>,
    pub per_step_envelope: Vec<StepEnvelope>,
    pub first_violation_steps: Vec<usize>,
    pub records: Option<Vec<Vec<TrajectoryRow>>>,
}

impl SimulationReport {
    /// Statistically significant breach of the certified bound.
    pub fn bound_breached(&self) -> bool {
        self.bound_epsilon.is_some_and(|eps| self.ci_lower > eps)
    }

    /// Point estimate above the bound (not necessarily significant).
    pub fn bound_flagged(&self) -> bool {
        self.bound_epsilon.is_some_and(|eps| self.empirical_p > eps)
    }
}

/// Folds trajectory outcomes (in index order) into a report.
pub fn aggregate(
    outcomes: Vec<TrajectoryOutcome>,
    cfg: &SimConfig,
    n: usize,
    bound_epsilon: Option<f64>,
) -> SimulationReport {
    let mut outcomes = outcomes;
    outcomes.sort_by_key(|o| o.index);
    let steps = cfg.horizon + 1;
    let mut envelope = vec![
        StepEnvelope {
            min: vec![f64::INFINITY; n],
            max: vec![f64::NEG_INFINITY; n],
        };
        steps
    ];
    let mut violations = 0;
    let mut exits = 0;
    let mut first_violation_steps = Vec::new();
    for o in &outcomes {
        if let Some(k) = o.first_violation {
            violations += 1;
            first_violation_steps.push(k);
        }
        if o.exited_state_set {
            exits += 1;
        }
        for (env, x) in envelope.iter_mut().zip(&o.states) {
            for i in 0..n {
                env.min[i] = env.min[i].min(x[i]);
                env.max[i] = env.max[i].max(x[i]);
            }
        }
    }
    let total = outcomes.len();
    let alpha = 1.0 - CONFIDENCE;
    let records = if cfg.record_full {
        Some(outcomes.into_iter().filter_map(|o| o.rows).collect())
    } else {
        None
    };
    SimulationReport {
        trajectories: total,
        horizon: cfg.horizon,
        seed: cfg.seed,
        violations,
        exits,
        empirical_p: violations as f64 / total as f64,
        ci_lower: clopper_pearson_lower(violations as u64, total as u64, alpha),
        ci_upper: clopper_pearson_upper(violations as u64, total as u64, alpha),
        bound_epsilon,
        per_step_envelope: envelope,
        first_violation_steps,
        records,
    }
}

/// Runs `cfg.trajectories` independent trajectories serially.
pub fn run_monte_carlo(
    sys: &DtSls,
    gain: &FeedbackGain,
    net: &NetworkParams,
    spec: &SafetySpec,
    cfg: &SimConfig,
    bound_epsilon: Option<f64>,
) -> Result<SimulationReport> {
    cfg.validate(sys.n())?;
    gain.check_against(sys)?;
    let outcomes = (0..cfg.trajectories)
        .map(|i| simulate_trajectory(sys, gain, net, spec, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(outcomes, cfg, sys.n(), bound_epsilon))
}

/// Sample mean and standard error of `B(z⁺) − B(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Estimates the one-step drift of `B(z) = zᵀPz` with `z` uniform over
/// `X × X × U × U` and one random transition per sample.
pub fn estimate_drift(
    aug: &AugmentedSystem,
    p: &nalgebra::DMatrix<f64>,
    spec: &SafetySpec,
    samples: usize,
    seed: u64,
) -> Result<DriftEstimate> {
    let Some((sys, _)) = aug.plant() else {
        return Err(Error::InvalidSpec("drift estimation needs a plant-backed system".into()));
    };
    let domain = spec.full_domain();
    let mut draws = DrawSource::new(stream_rng(seed, u64::MAX), sys, aug.network())?;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let z = draws.uniform_in(&domain);
        let step = draws.step();
        let next = step_augmented(&z, aug, &step);
        let d = quad_form(p, &next) - quad_form(p, &z);
        s1 += d;
        s2 += d * d;
    }
    let count = samples.max(1) as f64;
    let mean = s1 / count;
    let var = (s2 / count - mean * mean).max(0.0) * count / (count - 1.0).max(1.0);
    Ok(DriftEstimate {
        mean,
        std_error: (var / count).sqrt(),
        samples,
    })
}
