//! Closed-loop photography mission.
//!
//! Each tick senses, updates the believed map, keeps a best viewpoint under
//! review, moves one step along the planned path and takes a photo on
//! arrival. [`run_mission`] repeats ticks until a stop condition holds and
//! returns a [`MissionLog`].

use std::fmt;
use std::fs;
use std::path::Path as FsPath;
use std::sync::Mutex;
use std::time::Instant;

use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::{commit_capture, tune_hyperparameters, CoverageField, GpModel};
use crate::geometry::to_array;
use crate::metric::{ViewContext, ViewScore};
use crate::optimizer::{Maximizer, Objective, ParticleSwarm, SearchBox};
use crate::planner::{plan_grid_astar, plan_rrt_star, reachable_cells, Path, RrtConfig};
use crate::raycast::{generate_ray_bundle, Pose};
use crate::scenario::Scenario;
use crate::world::{simulate_depth_sensor, true_scene_boxes, CollisionChecker, OccupancyGrid};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    /// Grid A* in 2D, RRT* in 3D.
    Auto,
    Astar,
    Rrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    pub coverage_threshold: f64,
    pub max_photos: usize,
    pub gain_floor: f64,
    /// Re-optimize at least every this many ticks.
    pub reoptimize_every: usize,
    /// Re-optimize early when the current viewpoint's score falls below this
    /// fraction of its score at selection.
    pub degrade_ratio: f64,
    /// Travel per tick in meters; defaults to one resolution unit.
    pub step: Option<f64>,
    /// Capture distance in meters; defaults to one resolution unit.
    pub capture_tolerance: Option<f64>,
    /// Robot inflation radius; defaults to 1.5 resolution units.
    pub inflation: Option<f64>,
    pub max_ticks: usize,
    pub planner: PlannerKind,
    pub rrt: RrtConfig,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            coverage_threshold: 0.95,
            max_photos: 10,
            gain_floor: 1e-3,
            reoptimize_every: 3,
            degrade_ratio: 0.5,
            step: None,
            capture_tolerance: None,
            inflation: None,
            max_ticks: 1000,
            planner: PlannerKind::Auto,
            rrt: RrtConfig {
                iterations: 1500,
                ..RrtConfig::default()
            },
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.coverage_threshold) {
            return Err(Error::invalid("coverage_threshold must lie in [0, 1]"));
        }
        if !(self.gain_floor >= 0.0) {
            return Err(Error::invalid("gain_floor must be non-negative"));
        }
        if self.reoptimize_every == 0 {
            return Err(Error::invalid("reoptimize_every must be positive"));
        }
        if !(0.0..=1.0).contains(&self.degrade_ratio) {
            return Err(Error::invalid("degrade_ratio must lie in [0, 1]"));
        }
        for (name, v) in [
            ("step", self.step),
            ("capture_tolerance", self.capture_tolerance),
            ("inflation", self.inflation),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 || (name == "inflation" && v == 0.0)) {
                    return Err(Error::invalid(format!("{name} must be positive")));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.rrt.goal_bias) {
            return Err(Error::invalid("rrt.goal_bias must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Termination {
    CoverageReached,
    PhotoLimit,
    GainFloor,
    /// A photo did not raise the coverage mean.
    Stalled,
    TickLimit,
    Aborted(String),
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::CoverageReached => write!(f, "coverage threshold reached"),
            Termination::PhotoLimit => write!(f, "photo limit reached"),
            Termination::GainFloor => write!(f, "best expected gain below floor"),
            Termination::Stalled => write!(f, "photo did not increase coverage"),
            Termination::TickLimit => write!(f, "tick limit reached"),
            Termination::Aborted(why) => write!(f, "aborted: {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotoRecord {
    pub index: usize,
    pub tick: usize,
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub score: ViewScore,
    pub target_hits: usize,
    pub coverage_before: f64,
    pub coverage_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub position: [f64; 3],
    pub coverage: f64,
    pub photos: usize,
    pub viewpoint: Option<[f64; 3]>,
    pub viewpoint_score: f64,
    pub reoptimized: bool,
    pub captured: bool,
}

/// Currently chosen viewpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub position: Vec3,
    pub score_at_selection: f64,
    pub score: f64,
    pub selected_tick: usize,
}

#[derive(Debug, Clone)]
pub struct MissionState {
    pub tick: usize,
    pub position: Vec3,
    pub heading: Vec3,
    pub grid: OccupancyGrid,
    pub field: CoverageField,
    pub gp: GpModel,
    pub viewpoint: Option<Target>,
    pub path: Option<Path>,
    pub photos: Vec<PhotoRecord>,
    pub ticks: Vec<TickRecord>,
    /// Mean coverage per photo, starting with the initial value.
    pub coverage_curve: Vec<f64>,
    /// Belief snapshot after each photo.
    pub snapshots: Vec<Vec<f64>>,
    pub swarm: ParticleSwarm,
    pub terminated: Option<Termination>,
    pub last_optimized: Option<usize>,
    /// Candidate evaluation latencies in seconds.
    pub latencies: Vec<f64>,
}

impl MissionState {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.mission.validate()?;
        let start = scenario.start;
        if !scenario.workspace.contains(&start) {
            return Err(Error::OutsideWorkspace(to_array(&start)));
        }
        if scenario.collides_truly(&start) {
            return Err(Error::Collision(to_array(&start)));
        }
        let toward = scenario.target.body().center() - start;
        let heading = if toward.norm() > 0.0 {
            toward.normalize()
        } else {
            Vec3::x()
        };
        let field = CoverageField::new(scenario.target.len());
        Ok(Self {
            tick: 0,
            position: start,
            heading,
            grid: scenario.initial_grid(),
            coverage_curve: vec![field.mean()],
            field,
            gp: scenario.gp,
            viewpoint: None,
            path: None,
            photos: Vec::new(),
            ticks: Vec::new(),
            snapshots: Vec::new(),
            swarm: ParticleSwarm::new(scenario.swarm),
            terminated: None,
            last_optimized: None,
            latencies: Vec::new(),
        })
    }
}

/// Scores candidates, refusing those the robot cannot reach on the current
/// believed map, and records evaluation latencies.
struct Reachable<'a> {
    ctx: &'a ViewContext<'a>,
    reach: Vec<bool>,
    times: Mutex<Vec<f64>>,
}

impl Reachable<'_> {
    fn allows(&self, p: &Vec3) -> bool {
        let ws = self.ctx.grid.workspace();
        ws.cell_of(p)
            .map(|c| self.reach[(c[2] * ws.shape()[1] + c[1]) * ws.shape()[0] + c[0]])
            .unwrap_or(false)
    }
}

impl Objective for Reachable<'_> {
    fn score(&self, p: &Vec3) -> Result<f64> {
        if !self.allows(p) {
            return Ok(f64::NEG_INFINITY);
        }
        let (s, dt) = self.ctx.evaluate_timed(p)?;
        self.times.lock().unwrap().push(dt);
        Ok(s.score)
    }

    fn is_feasible(&self, p: &Vec3) -> bool {
        self.allows(p) && self.ctx.is_feasible(p)
    }
}

fn inflation(scenario: &Scenario) -> f64 {
    scenario.inflation()
}

fn context<'a>(scenario: &'a Scenario, state: &'a MissionState) -> ViewContext<'a> {
    ViewContext::new(
        &state.grid,
        &scenario.target,
        &state.field,
        &state.gp,
        &scenario.camera,
        &scenario.utility,
        scenario.sensor.range,
        inflation(scenario),
    )
}

fn search_box(scenario: &Scenario) -> Result<SearchBox> {
    let (lo, hi) = scenario.workspace.position_bounds();
    SearchBox::new(lo, hi)
}

fn plan(
    scenario: &Scenario,
    state: &MissionState,
    goal: &Vec3,
    rng: &mut ChaCha8Rng,
) -> Result<Path> {
    let checker = CollisionChecker::new(&state.grid, inflation(scenario));
    let use_rrt = match scenario.mission.planner {
        PlannerKind::Auto => scenario.dims() == 3,
        PlannerKind::Astar => false,
        PlannerKind::Rrt => true,
    };
    if use_rrt && checker.is_free(&state.position) {
        match plan_rrt_star(&checker, &state.position, goal, &scenario.mission.rrt, rng) {
            Ok(p) => return Ok(p),
            Err(e) => debug!("rrt* failed ({e}), falling back to grid search"),
        }
    }
    plan_grid_astar(&checker, &state.position, goal)
}

/// Runs the viewpoint search against the current snapshots and adopts the
/// result when it beats the current viewpoint. Returns the best score found.
fn reoptimize(scenario: &Scenario, state: &mut MissionState, rng: &mut ChaCha8Rng) -> Result<f64> {
    let bounds = search_box(scenario)?;
    let mut swarm = std::mem::replace(&mut state.swarm, ParticleSwarm::new(scenario.swarm));
    let (found, times) = {
        let ctx = context(scenario, state);
        let checker = CollisionChecker::new(&state.grid, inflation(scenario));
        let objective = Reachable {
            ctx: &ctx,
            reach: reachable_cells(&checker, &state.position),
            times: Mutex::new(Vec::new()),
        };
        let warm = swarm.swarm.is_some();
        let mut best = swarm.maximize(&objective, &bounds, rng)?;
        // A warm swarm stuck in a region that just lost its view gets one
        // cold restart before the gain floor is declared.
        if warm && !(best.score >= scenario.mission.gain_floor) {
            swarm = ParticleSwarm::new(scenario.swarm);
            let fresh = swarm.maximize(&objective, &bounds, rng)?;
            if fresh.score > best.score {
                best = fresh;
            }
        }
        let found = if best.score > f64::NEG_INFINITY {
            Some((best.position, ctx.evaluate(&best.position)?))
        } else {
            None
        };
        (found, objective.times.into_inner().unwrap())
    };
    state.swarm = swarm;
    state.latencies.extend(times);
    state.last_optimized = Some(state.tick);
    let Some((position, score)) = found else {
        return Err(Error::Infeasible {
            tries: scenario.swarm.particles * scenario.swarm.init_tries,
        });
    };
    let keep = state
        .viewpoint
        .as_ref()
        .is_some_and(|v| v.score.is_finite() && v.score >= score.score);
    if !keep {
        state.viewpoint = Some(Target {
            position,
            score_at_selection: score.score,
            score: score.score,
            selected_tick: state.tick,
        });
        state.path = None;
    }
    Ok(score
        .score
        .max(state.viewpoint.as_ref().map_or(0.0, |v| v.score)))
}

fn sense(scenario: &Scenario, state: &mut MissionState) -> Result<()> {
    let dims = scenario.dims();
    let mut directions = vec![state.heading];
    let toward = scenario.target.body().center() - state.position;
    if toward.norm() > 1e-9 {
        let t = toward.normalize();
        if (t - state.heading).norm() > 1e-9 {
            directions.push(t);
        }
    }
    for dir in directions {
        let Ok(pose) = Pose::look_at(state.position, state.position + dir, dims) else {
            continue;
        };
        let hits = simulate_depth_sensor(scenario, &pose)?;
        state.grid.integrate_depth_scan(&pose, &hits)?;
    }
    Ok(())
}

fn capture(scenario: &Scenario, state: &mut MissionState) -> Result<()> {
    let before = state.field.mean();
    let (pose, look_at, score) = {
        let ctx = context(scenario, state);
        let score = ctx.evaluate(&state.position)?;
        let pose = ctx
            .camera_pose(&state.position)
            .ok_or_else(|| Error::invalid("capture position coincides with the look-at point"))?;
        let look_at = scenario
            .target
            .interest_centroid(state.field.mu())
            .unwrap_or_else(|| scenario.target.body().center());
        (pose, look_at, score)
    };
    let bundle = generate_ray_bundle(&pose, &scenario.camera.fov, &scenario.camera.capture_rays)?;
    let boxes = true_scene_boxes(scenario);
    let hits = scenario
        .true_scene(&boxes)
        .cast_bundle(&pose, &bundle, scenario.sensor.range)?;
    commit_capture(&mut state.field, &hits, &state.gp, &scenario.target)?;
    if let Some(grid) = &scenario.gp_tuning {
        let (xs, ys) = state.field.samples();
        let step = (xs.len() / 300).max(1);
        let xs: Vec<Vec3> = xs.iter().step_by(step).copied().collect();
        let ys: Vec<f64> = ys.iter().step_by(step).copied().collect();
        match tune_hyperparameters(&xs, &ys, grid, &state.gp) {
            Ok(gp) => state.gp = gp,
            Err(e) => warn!("hyperparameter tuning skipped: {e}"),
        }
    }
    let after = state.field.mean();
    let record = PhotoRecord {
        index: state.photos.len(),
        tick: state.tick,
        position: to_array(&state.position),
        look_at: to_array(&look_at),
        score,
        target_hits: hits.iter().filter(|h| h.is_target()).count(),
        coverage_before: before,
        coverage_after: after,
    };
    info!(
        "photo {} at tick {}: coverage {:.4} -> {:.4}",
        record.index, record.tick, before, after
    );
    state.photos.push(record);
    state.coverage_curve.push(after);
    state.snapshots.push(state.field.mu().to_vec());
    state.viewpoint = None;
    state.path = None;
    state.swarm = ParticleSwarm::new(scenario.swarm);
    if after <= before {
        state.terminated = Some(Termination::Stalled);
    }
    Ok(())
}

fn stop_condition(scenario: &Scenario, state: &MissionState) -> Option<Termination> {
    let cfg = &scenario.mission;
    if state.field.mean() >= cfg.coverage_threshold {
        Some(Termination::CoverageReached)
    } else if state.photos.len() >= cfg.max_photos {
        Some(Termination::PhotoLimit)
    } else if state.tick >= cfg.max_ticks {
        Some(Termination::TickLimit)
    } else {
        None
    }
}

fn abortable(e: &Error) -> bool {
    matches!(
        e,
        Error::NoPath { .. }
            | Error::Infeasible { .. }
            | Error::Numerical { .. }
            | Error::Collision(_)
    )
}

/// One control cycle: sense, review the viewpoint, step, capture on arrival.
pub fn mission_tick(
    state: &mut MissionState,
    scenario: &Scenario,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if state.terminated.is_some() {
        return Ok(());
    }
    if let Some(t) = stop_condition(scenario, state) {
        state.terminated = Some(t);
        return Ok(());
    }
    match tick_inner(state, scenario, rng) {
        Ok(()) => Ok(()),
        Err(e) if abortable(&e) => {
            warn!("mission aborted at tick {}: {e}", state.tick);
            state.terminated = Some(Termination::Aborted(e.to_string()));
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn tick_inner(state: &mut MissionState, scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<()> {
    let cfg = &scenario.mission;
    let res = scenario.workspace.resolution();
    let step = cfg.step.unwrap_or(res);
    let tolerance = cfg.capture_tolerance.unwrap_or(res);
    let mut reoptimized = false;
    let mut captured = false;

    sense(scenario, state)?;

    // Review the current viewpoint on the updated map and coverage.
    if let Some(at) = state.viewpoint.as_ref().map(|v| v.position) {
        let s = context(scenario, state).evaluate(&at)?.score;
        if let Some(v) = state.viewpoint.as_mut() {
            v.score = s;
        }
    }
    let degraded = state.viewpoint.as_ref().is_none_or(|v| {
        !(v.score >= cfg.degrade_ratio * v.score_at_selection) || !v.score.is_finite()
    });
    let due = state
        .last_optimized
        .is_none_or(|t| state.tick >= t + cfg.reoptimize_every);
    if degraded || due {
        let best = reoptimize(scenario, state, rng)?;
        reoptimized = true;
        if best < cfg.gain_floor {
            state.terminated = Some(Termination::GainFloor);
        }
    }

    if state.terminated.is_none() {
        let goal = state
            .viewpoint
            .as_ref()
            .map(|v| v.position)
            .expect("viewpoint selected");
        let checker = CollisionChecker::new(&state.grid, inflation(scenario));
        let valid = state.path.as_ref().is_some_and(|p| {
            p.goal() == goal
                && p.waypoints()
                    .windows(2)
                    .all(|w| checker.segment_free(&w[0], &w[1]))
        });
        if !valid {
            state.path = Some(plan(scenario, state, &goal, rng)?);
        }
        let path = state.path.as_ref().unwrap();
        // Finish the approach instead of stopping just short of the viewpoint.
        let travel = if path.length() <= step + tolerance {
            path.length()
        } else {
            step
        };
        let (next, ahead) = path.point_at(travel);
        let move_dir = next - state.position;
        if move_dir.norm() > 1e-12 {
            let probes = (travel / (res / 4.0)).ceil().max(1.0) as usize;
            for k in 1..=probes {
                let (p, _) = path.point_at(travel * k as f64 / probes as f64);
                if scenario.collides_truly(&p) {
                    return Err(Error::Collision(to_array(&p)));
                }
            }
            state.heading = move_dir.normalize();
            state.position = next;
        }
        let mut rest = vec![state.position];
        rest.extend_from_slice(&path.waypoints()[ahead..]);
        rest.dedup();
        state.path = Some(Path::new(rest)?);

        if (state.position - goal).norm() <= tolerance {
            capture(scenario, state)?;
            captured = true;
            if state.terminated.is_none() && stop_condition(scenario, state).is_none() {
                let best = reoptimize(scenario, state, rng)?;
                reoptimized = true;
                if best < cfg.gain_floor {
                    state.terminated = Some(Termination::GainFloor);
                }
            }
        }
    }

    state.ticks.push(TickRecord {
        tick: state.tick,
        position: to_array(&state.position),
        coverage: state.field.mean(),
        photos: state.photos.len(),
        viewpoint: state.viewpoint.as_ref().map(|v| to_array(&v.position)),
        viewpoint_score: state.viewpoint.as_ref().map_or(0.0, |v| v.score),
        reoptimized,
        captured,
    });
    state.tick += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl TimingStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self {
                count: 0,
                mean: 0.0,
                median: 0.0,
                p95: 0.0,
                max: 0.0,
            };
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v[((v.len() - 1) as f64 * q).round() as usize];
        Self {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: at(0.5),
            p95: at(0.95),
            max: v[v.len() - 1],
        }
    }
}

/// Everything a mission produced. All fields except `timing` and
/// `latencies` are deterministic for a fixed scenario and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionLog {
    pub scenario: String,
    pub seed: u64,
    pub termination: Termination,
    pub ticks: Vec<TickRecord>,
    pub photos: Vec<PhotoRecord>,
    pub coverage_curve: Vec<f64>,
    pub final_coverage: Vec<f64>,
    #[serde(skip)]
    pub snapshots: Vec<Vec<f64>>,
    #[serde(skip)]
    pub timing: Option<TimingStats>,
    #[serde(skip)]
    pub latencies: Vec<f64>,
}

impl MissionLog {
    pub fn final_mean(&self) -> f64 {
        *self.coverage_curve.last().unwrap_or(&0.0)
    }
}

/// Ticks a fresh mission until it terminates or `stop` holds.
pub fn run_until(
    scenario: &Scenario,
    stop: impl Fn(&MissionState) -> bool,
) -> Result<MissionState> {
    let mut state = MissionState::new(scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    while state.terminated.is_none() && !stop(&state) {
        mission_tick(&mut state, scenario, &mut rng)?;
    }
    Ok(state)
}

pub fn run_mission(scenario: &Scenario) -> Result<MissionLog> {
    let mut state = MissionState::new(scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let t0 = Instant::now();
    while state.terminated.is_none() {
        mission_tick(&mut state, scenario, &mut rng)?;
    }
    let termination = state.terminated.clone().unwrap();
    info!(
        "mission {} finished after {} ticks, {} photos, coverage {:.4}: {termination} ({:.1}s)",
        scenario.name,
        state.tick,
        state.photos.len(),
        state.field.mean(),
        t0.elapsed().as_secs_f64()
    );
    Ok(MissionLog {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        termination,
        ticks: state.ticks,
        photos: state.photos,
        coverage_curve: state.coverage_curve,
        final_coverage: state.field.mu().to_vec(),
        snapshots: state.snapshots,
        timing: Some(TimingStats::from_samples(&state.latencies)),
        latencies: state.latencies,
    })
}

fn opt3(v: Option<[f64; 3]>) -> String {
    v.map_or(",,".to_string(), |p| format!("{},{},{}", p[0], p[1], p[2]))
}

pub fn ticks_csv(log: &MissionLog) -> String {
    let mut out =
        String::from("tick,x,y,z,coverage,photos,vx,vy,vz,viewpoint_score,reoptimized,captured\n");
    for t in &log.ticks {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            t.tick,
            opt3(Some(t.position)),
            t.coverage,
            t.photos,
            opt3(t.viewpoint),
            t.viewpoint_score,
            t.reoptimized,
            t.captured
        ));
    }
    out
}

pub fn photos_csv(log: &MissionLog) -> String {
    let mut out = String::from(
        "photo,tick,x,y,z,look_x,look_y,look_z,gamma_d,gamma_s,coverage_sum,score,target_hits,coverage_before,coverage_after\n",
    );
    for p in &log.photos {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            p.index,
            p.tick,
            opt3(Some(p.position)),
            opt3(Some(p.look_at)),
            p.score.gamma_d,
            p.score.gamma_s,
            p.score.coverage_sum,
            p.score.score,
            p.target_hits,
            p.coverage_before,
            p.coverage_after
        ));
    }
    out
}

pub fn coverage_curve_csv(log: &MissionLog) -> String {
    let mut out = String::from("photos,coverage\n");
    for (i, c) in log.coverage_curve.iter().enumerate() {
        out.push_str(&format!("{i},{c}\n"));
    }
    out
}

pub fn timing_csv(log: &MissionLog) -> String {
    let mut out = String::from("evaluation,seconds\n");
    for (i, t) in log.latencies.iter().enumerate() {
        out.push_str(&format!("{i},{t}\n"));
    }
    out
}

/// Writes the mission outputs into `dir`: `mission.json`, `ticks.csv`,
/// `photos.csv`, `coverage_curve.csv`, `coverage.csv`, one
/// `coverage_photo_<k>.csv` per photo, and the non-deterministic
/// `timing.csv`.
pub fn write_outputs(dir: &FsPath, log: &MissionLog, scenario: &Scenario) -> Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(log).map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(dir.join("mission.json"), json + "\n")?;
    fs::write(dir.join("ticks.csv"), ticks_csv(log))?;
    fs::write(dir.join("photos.csv"), photos_csv(log))?;
    fs::write(dir.join("coverage_curve.csv"), coverage_curve_csv(log))?;
    fs::write(
        dir.join("coverage.csv"),
        CoverageField::with_prior(log.final_coverage.clone()).to_csv(&scenario.target),
    )?;
    for (k, mu) in log.snapshots.iter().enumerate() {
        fs::write(
            dir.join(format!("coverage_photo_{k}.csv")),
            CoverageField::with_prior(mu.clone()).to_csv(&scenario.target),
        )?;
    }
    fs::write(dir.join("timing.csv"), timing_csv(log))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_space() -> Scenario {
        Scenario::bundled("free_space_2d").unwrap()
    }

    #[test]
    fn zero_threshold_stops_immediately() {
        let mut s = free_space();
        s.mission.coverage_threshold = 0.0;
        let log = run_mission(&s).unwrap();
        assert_eq!(log.termination, Termination::CoverageReached);
        assert!(log.photos.is_empty());
        assert!(log.ticks.is_empty());
    }

    #[test]
    fn terminated_state_is_inert() {
        let s = free_space();
        let mut state = MissionState::new(&s).unwrap();
        state.terminated = Some(Termination::PhotoLimit);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        mission_tick(&mut state, &s, &mut rng).unwrap();
        assert_eq!(state.tick, 0);
    }

    #[test]
    fn start_inside_obstacle_is_rejected() {
        let mut s = free_space();
        s.start = s.target.body().center();
        assert!(MissionState::new(&s).is_err());
    }

    #[test]
    fn timing_stats() {
        let t = TimingStats::from_samples(&[3.0, 1.0, 2.0]);
        assert_eq!(t.median, 2.0);
        assert_eq!(t.max, 3.0);
        assert_eq!(t.count, 3);
    }

    #[test]
    fn config_validation() {
        assert!(MissionConfig {
            coverage_threshold: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(MissionConfig {
            reoptimize_every: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
