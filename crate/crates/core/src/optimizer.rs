//! Particle swarm search over viewpoint positions.
//!
//! The swarm maximizes an [`Objective`] inside an axis-aligned box. Scores for
//! one step are computed in parallel; all random draws and state updates are
//! sequential, so a fixed seed reproduces the same trajectories regardless of
//! thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metric::{ViewContext, ViewScore};
use crate::raycast::Pose;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmConfig {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    /// Velocity magnitude cap in meters per iteration. `None` means 10% of
    /// the search box diagonal.
    pub velocity_cap: Option<f64>,
    pub init_tries: usize,
    /// Iteration budget for warm-started re-optimization.
    pub reopt_iterations: usize,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            particles: 20,
            iterations: 60,
            inertia: 0.7,
            c1: 1.5,
            c2: 1.5,
            velocity_cap: None,
            init_tries: 100,
            reopt_iterations: 20,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::invalid("swarm needs at least one particle"));
        }
        if !(0.0..1.0).contains(&self.inertia) {
            return Err(Error::invalid(format!(
                "inertia must lie in [0, 1), got {}",
                self.inertia
            )));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return Err(Error::invalid(
                "acceleration coefficients must be non-negative",
            ));
        }
        if let Some(cap) = self.velocity_cap {
            if !(cap > 0.0) {
                return Err(Error::invalid("velocity cap must be positive"));
            }
        }
        if self.init_tries == 0 {
            return Err(Error::invalid("init_tries must be positive"));
        }
        Ok(())
    }
}

/// A function to maximize. Infeasible points score `f64::NEG_INFINITY`.
pub trait Objective: Sync {
    fn score(&self, p: &Vec3) -> Result<f64>;

    fn is_feasible(&self, p: &Vec3) -> bool {
        self.score(p)
            .map(|s| s > f64::NEG_INFINITY)
            .unwrap_or(false)
    }
}

impl<F> Objective for F
where
    F: Fn(&Vec3) -> f64 + Sync,
{
    fn score(&self, p: &Vec3) -> Result<f64> {
        Ok(self(p))
    }
}

impl Objective for ViewContext<'_> {
    fn score(&self, p: &Vec3) -> Result<f64> {
        Ok(self.evaluate(p)?.score)
    }

    fn is_feasible(&self, p: &Vec3) -> bool {
        ViewContext::is_feasible(self, p)
    }
}

/// Axis-aligned search region. Axes with equal bounds are held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub lower: Vec3,
    pub upper: Vec3,
}

impl SearchBox {
    pub fn new(lower: Vec3, upper: Vec3) -> Result<Self> {
        if (0..3).any(|i| !(lower[i] <= upper[i])) {
            return Err(Error::invalid("search box lower bound exceeds upper bound"));
        }
        Ok(Self { lower, upper })
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        p.zip_zip_map(&self.lower, &self.upper, |v, lo, hi| v.clamp(lo, hi))
    }

    pub fn diagonal(&self) -> f64 {
        (self.upper - self.lower).norm()
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        let mut p = self.lower;
        for i in 0..3 {
            if self.upper[i] > self.lower[i] {
                p[i] = rng.gen_range(self.lower[i]..=self.upper[i]);
            }
        }
        p
    }

    fn free_axes(&self) -> Vec3 {
        Vec3::from_fn(|i, _| {
            if self.upper[i] > self.lower[i] {
                1.0
            } else {
                0.0
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub index: usize,
    pub position: Vec3,
    pub velocity: Vec3,
    pub score: f64,
    pub best: Vec3,
    pub best_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub global_best: Vec3,
    pub global_score: f64,
    /// Best score after each completed step, starting with initialization.
    pub history: Vec<f64>,
}

impl Swarm {
    fn refresh_global(&mut self) {
        for p in &self.particles {
            if p.best_score > self.global_score {
                self.global_score = p.best_score;
                self.global_best = p.best;
            }
        }
    }
}

fn score_all(objective: &dyn Objective, positions: &[Vec3]) -> Result<Vec<f64>> {
    positions.par_iter().map(|p| objective.score(p)).collect()
}

fn velocity_cap(config: &SwarmConfig, bounds: &SearchBox) -> f64 {
    config.velocity_cap.unwrap_or(0.1 * bounds.diagonal())
}

fn cap_norm(v: Vec3, cap: f64) -> Vec3 {
    let n = v.norm();
    if n > cap {
        v * (cap / n)
    } else {
        v
    }
}

/// Random feasible initialization. Each particle is resampled up to
/// `init_tries` times; fails only when no particle finds a feasible spot.
pub fn init_swarm(
    objective: &dyn Objective,
    bounds: &SearchBox,
    config: &SwarmConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Swarm> {
    config.validate()?;
    let cap = velocity_cap(config, bounds);
    let free = bounds.free_axes();
    let mut positions = Vec::with_capacity(config.particles);
    let mut velocities = Vec::with_capacity(config.particles);
    let mut any_feasible = false;
    for _ in 0..config.particles {
        let mut p = bounds.sample(rng);
        for _ in 1..config.init_tries {
            if objective.is_feasible(&p) {
                break;
            }
            p = bounds.sample(rng);
        }
        any_feasible |= objective.is_feasible(&p);
        positions.push(p);
        let v = Vec3::from_fn(|i, _| rng.gen_range(-1.0..=1.0) * cap * free[i]);
        velocities.push(cap_norm(v, cap));
    }
    if !any_feasible {
        return Err(Error::Infeasible {
            tries: config.init_tries * config.particles,
        });
    }
    let scores = score_all(objective, &positions)?;
    let particles = positions
        .into_iter()
        .zip(velocities)
        .zip(scores)
        .enumerate()
        .map(|(index, ((position, velocity), score))| Particle {
            index,
            position,
            velocity,
            score,
            best: position,
            best_score: score,
        })
        .collect();
    let mut swarm = Swarm {
        particles,
        global_best: bounds.lower,
        global_score: f64::NEG_INFINITY,
        history: Vec::new(),
    };
    swarm.refresh_global();
    swarm.history.push(swarm.global_score);
    Ok(swarm)
}

/// One swarm iteration: velocity and position update with fresh `r1, r2`
/// per particle, then scoring and strict-improvement best updates.
pub fn pso_step(
    swarm: &mut Swarm,
    objective: &dyn Objective,
    bounds: &SearchBox,
    config: &SwarmConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let cap = velocity_cap(config, bounds);
    let g = swarm.global_best;
    let has_global = swarm.global_score > f64::NEG_INFINITY;
    for p in &mut swarm.particles {
        let r1: f64 = rng.gen();
        let r2: f64 = rng.gen();
        let mut v = config.inertia * p.velocity;
        if p.best_score > f64::NEG_INFINITY {
            v += r1 * config.c1 * (p.best - p.position);
        }
        if has_global {
            v += r2 * config.c2 * (g - p.position);
        }
        p.velocity = cap_norm(v, cap);
        p.position = bounds.clamp(&(p.position + p.velocity));
    }
    let positions: Vec<Vec3> = swarm.particles.iter().map(|p| p.position).collect();
    let scores = score_all(objective, &positions)?;
    for (p, s) in swarm.particles.iter_mut().zip(scores) {
        p.score = s;
        if s > p.best_score {
            p.best_score = s;
            p.best = p.position;
        }
    }
    swarm.refresh_global();
    swarm.history.push(swarm.global_score);
    Ok(())
}

/// Re-scores a previous swarm under a new objective, keeping positions and
/// momentum. Personal bests are re-scored too and kept when still better.
pub fn rescore_swarm(
    mut swarm: Swarm,
    objective: &dyn Objective,
    bounds: &SearchBox,
) -> Result<Swarm> {
    let positions: Vec<Vec3> = swarm
        .particles
        .iter()
        .map(|p| bounds.clamp(&p.position))
        .collect();
    let bests: Vec<Vec3> = swarm
        .particles
        .iter()
        .map(|p| bounds.clamp(&p.best))
        .collect();
    let all: Vec<Vec3> = positions.iter().chain(&bests).copied().collect();
    let scores = score_all(objective, &all)?;
    let (now, then) = scores.split_at(positions.len());
    for (i, p) in swarm.particles.iter_mut().enumerate() {
        p.position = positions[i];
        p.score = now[i];
        if then[i] > now[i] {
            p.best = bests[i];
            p.best_score = then[i];
        } else {
            p.best = positions[i];
            p.best_score = now[i];
        }
    }
    swarm.global_score = f64::NEG_INFINITY;
    swarm.global_best = bounds.lower;
    swarm.history.clear();
    swarm.refresh_global();
    swarm.history.push(swarm.global_score);
    Ok(swarm)
}

/// Result of a derivative-free search.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub position: Vec3,
    pub score: f64,
}

/// Derivative-free maximizer over a box.
pub trait Maximizer {
    fn maximize(
        &mut self,
        objective: &dyn Objective,
        bounds: &SearchBox,
        rng: &mut ChaCha8Rng,
    ) -> Result<Optimum>;
}

/// Particle swarm maximizer that keeps its population between calls, so
/// repeated calls warm-start from the previous swarm.
#[derive(Debug, Clone)]
pub struct ParticleSwarm {
    pub config: SwarmConfig,
    pub swarm: Option<Swarm>,
}

impl ParticleSwarm {
    pub fn new(config: SwarmConfig) -> Self {
        Self {
            config,
            swarm: None,
        }
    }
}

impl Maximizer for ParticleSwarm {
    fn maximize(
        &mut self,
        objective: &dyn Objective,
        bounds: &SearchBox,
        rng: &mut ChaCha8Rng,
    ) -> Result<Optimum> {
        let (mut swarm, iterations) = match self.swarm.take() {
            Some(prev) => {
                let s = rescore_swarm(prev, objective, bounds)?;
                if s.global_score > f64::NEG_INFINITY {
                    (s, self.config.reopt_iterations)
                } else {
                    (
                        init_swarm(objective, bounds, &self.config, rng)?,
                        self.config.iterations,
                    )
                }
            }
            None => (
                init_swarm(objective, bounds, &self.config, rng)?,
                self.config.iterations,
            ),
        };
        for _ in 0..iterations {
            pso_step(&mut swarm, objective, bounds, &self.config, rng)?;
        }
        let out = Optimum {
            position: swarm.global_best,
            score: swarm.global_score,
        };
        self.swarm = Some(swarm);
        Ok(out)
    }
}

/// Best viewpoint found for a frozen map and coverage snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Viewpoint {
    pub position: Vec3,
    pub pose: Pose,
    pub score: ViewScore,
}

/// Swarm search for the best camera position over `ctx`. Pass the same
/// `swarm` across calls to warm-start re-optimization.
pub fn optimize_viewpoint(
    ctx: &ViewContext<'_>,
    bounds: &SearchBox,
    swarm: &mut ParticleSwarm,
    rng: &mut ChaCha8Rng,
) -> Result<Viewpoint> {
    let best = swarm.maximize(ctx, bounds, rng)?;
    let score = ctx.evaluate(&best.position)?;
    let pose = ctx
        .camera_pose(&best.position)
        .ok_or_else(|| Error::invalid("best viewpoint coincides with the look-at point"))?;
    Ok(Viewpoint {
        position: best.position,
        pose,
        score,
    })
}
