//! Self-check suites runnable from the command line.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coverage::{posterior_mean, CoverageField, Face, GpModel, TargetModel};
use crate::metric::{logistic_utility, UtilityParams, ViewContext};
use crate::optimizer::{optimize_viewpoint, ParticleSwarm, SearchBox};
use crate::oracle::{heatmap_oracle, march_ray, visible_coordinates};
use crate::raycast::{cast_ray, generate_ray_bundle, Pose};
use crate::scenario::Scenario;
use crate::world::{true_scene_boxes, BoxObstacle};
use crate::{Error, Result, Vec3};

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

pub const SUITES: [&str; 4] = ["raycast", "gp", "pso-error", "utility"];

pub fn run_suite(name: &str, seed: u64) -> Result<Vec<Check>> {
    match name {
        "raycast" => Ok(vec![raycast_equivalence(1000, seed)]),
        "gp" => gp_fidelity(),
        "pso-error" => Ok(vec![pso_error(
            &Scenario::bundled("one_obstacle_2d")?,
            20,
            seed,
        )?
        .check()]),
        "utility" => Ok(utility_spot_values()),
        other => Err(Error::invalid(format!(
            "unknown suite {other:?}; available: {}",
            SUITES.join(", ")
        ))),
    }
}

/// A ray against a set of spheres, for oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RayConfig {
    pub origin: Vec3,
    pub direction: Vec3,
    pub spheres: Vec<Vec3>,
    pub c_r: f64,
    pub d_max: f64,
}

fn unit(rng: &mut ChaCha8Rng, dims: usize) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            if dims == 3 {
                rng.gen_range(-1.0..1.0)
            } else {
                0.0
            },
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Random ray/sphere configurations. Spheres that contain the origin or
/// pass within 1% of `c_r` of tangency are redrawn, since a fixed-step march
/// cannot resolve those cases. Half the cases are planar.
pub fn random_ray_configs(n: usize, seed: u64) -> Vec<RayConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let dims = if i % 2 == 0 { 2 } else { 3 };
            let lift = |v: Vec3| {
                if dims == 2 {
                    Vec3::new(v.x, v.y, 0.0)
                } else {
                    v
                }
            };
            let origin = lift(Vec3::new(
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
            ));
            let direction = unit(&mut rng, dims);
            let c_r = rng.gen_range(0.3..2.0);
            let count = rng.gen_range(1..=8);
            let mut spheres = Vec::with_capacity(count);
            while spheres.len() < count {
                // Bias half the spheres towards the ray so hits are common.
                let z = if rng.gen_bool(0.5) {
                    let t = rng.gen_range(1.0..30.0);
                    origin
                        + direction * t
                        + lift(Vec3::new(
                            rng.gen_range(-1.5..1.5),
                            rng.gen_range(-1.5..1.5),
                            rng.gen_range(-1.5..1.5),
                        )) * c_r
                } else {
                    lift(Vec3::new(
                        rng.gen_range(-30.0..30.0),
                        rng.gen_range(-30.0..30.0),
                        rng.gen_range(-30.0..30.0),
                    ))
                };
                let rel = z - origin;
                let along = rel.dot(&direction);
                let off = (rel - direction * along).norm();
                if rel.norm() < 1.01 * c_r || (along > 0.0 && (off - c_r).abs() < 0.01 * c_r) {
                    continue;
                }
                spheres.push(z);
            }
            RayConfig {
                origin,
                direction,
                spheres,
                c_r,
                d_max: 60.0,
            }
        })
        .collect()
}

/// Compares the analytic caster with the marching oracle (step `c_r / 10`).
pub fn raycast_equivalence(n: usize, seed: u64) -> Check {
    let t = Instant::now();
    let configs = random_ray_configs(n, seed);
    let mut disagreements = 0;
    let mut worst = 0.0f64;
    let mut hits = 0;
    for c in &configs {
        let fast = cast_ray(&c.origin, &c.direction, c.d_max, &c.spheres, c.c_r, |_| {
            true
        })
        .expect("valid ray configuration");
        let slow = march_ray(
            &c.origin,
            &c.direction,
            c.d_max,
            &c.spheres,
            c.c_r,
            c.c_r / 10.0,
        );
        let fast_hit = fast.is_target();
        match (fast_hit, slow) {
            (true, Some(d)) => {
                hits += 1;
                worst = worst.max((fast.distance - d).abs() / c.c_r);
            }
            (false, None) => {}
            _ => disagreements += 1,
        }
    }
    Check::new(
        "ray-cast oracle equivalence",
        disagreements == 0 && worst <= 0.2,
        format!(
            "{n} rays ({hits} hits), {disagreements} hit/miss disagreements, worst distance error {worst:.4} c_r (limit 0.2), {:.2}s",
            t.elapsed().as_secs_f64()
        ),
    )
}

/// Reference values computed from the closed form independently of
/// [`logistic_utility`], via `1 / (1 + e^a) = (1 - tanh(a / 2)) / 2`.
pub fn utility_reference(x: f64, q: &[f64; 4]) -> f64 {
    q[0] + q[1] * 0.5 * (1.0 - (0.5 * q[2] * (x + q[3])).tanh())
}

pub fn utility_cases() -> Vec<(&'static str, f64, [f64; 4])> {
    let p = UtilityParams::default();
    vec![
        ("distortion midpoint x=0.75", 0.75, p.q_d),
        ("distortion balanced x=0", 0.0, p.q_d),
        ("distortion one-sided x=1", 1.0, p.q_d),
        ("scale at beta x=0.8", 0.8, p.q_s_low),
        ("scale filled x=1", 1.0, p.q_s_high),
        ("scale empty x=0", 0.0, p.q_s_low),
    ]
}

pub fn utility_spot_values() -> Vec<Check> {
    utility_cases()
        .into_iter()
        .map(|(name, x, q)| {
            let got = logistic_utility(x, &q);
            let want = utility_reference(x, &q);
            Check::new(
                format!("utility {name}"),
                (got - want).abs() <= 1e-6,
                format!("{got:.9} vs reference {want:.9}"),
            )
        })
        .collect()
}

/// RMSE between the GP posterior from a sparse bundle and exact dense
/// visibility, for `rays` evaluation rays from `position`, together with the
/// number of coordinates the dense bundle sees.
pub fn gp_fidelity_rmse(scenario: &Scenario, position: &Vec3, rays: usize) -> Result<(f64, usize)> {
    let target = &scenario.target;
    let pose = Pose::look_at(*position, target.body().center(), scenario.dims())?;
    let boxes = true_scene_boxes(scenario);
    let scene = scenario.true_scene(&boxes);
    let counts: Vec<usize> = if scenario.dims() == 2 {
        vec![rays]
    } else {
        vec![rays, rays]
    };
    let sparse = scene.cast_bundle(
        &pose,
        &generate_ray_bundle(&pose, &scenario.camera.fov, &counts)?,
        scenario.sensor.range,
    )?;
    let dense = scene.cast_bundle(
        &pose,
        &generate_ray_bundle(&pose, &scenario.camera.fov, &scenario.camera.capture_rays)?,
        scenario.sensor.range,
    )?;
    let truth = visible_coordinates(&dense, target);
    let mut field = CoverageField::new(target.len());
    crate::coverage::commit_capture(&mut field, &sparse, &scenario.gp, target)?;
    let se: f64 = field
        .mu()
        .iter()
        .zip(&truth)
        .map(|(m, t)| (m - if *t { 1.0 } else { 0.0 }).powi(2))
        .sum();
    let visible = truth.iter().filter(|t| **t).count();
    Ok(((se / target.len() as f64).sqrt(), visible))
}

/// Viewpoints used for the GP fidelity check on the bundled one-obstacle
/// scenario: the best view and an oblique one.
pub fn gp_fidelity_positions() -> Vec<Vec3> {
    vec![Vec3::new(50.0, 33.0, 0.0), Vec3::new(64.0, 36.0, 0.0)]
}

/// A view with part of the face hidden behind the obstacle. The GP bridges
/// the hidden span, so its error is reported but not checked.
pub fn gp_occluded_position() -> Vec3 {
    Vec3::new(36.0, 34.0, 0.0)
}

pub fn gp_fidelity() -> Result<Vec<Check>> {
    let scenario = Scenario::bundled("one_obstacle_2d")?;
    let mut worst = 0.0f64;
    let mut blind = false;
    let mut parts = Vec::new();
    for p in gp_fidelity_positions() {
        let (r, visible) = gp_fidelity_rmse(&scenario, &p, 64)?;
        worst = worst.max(r);
        blind |= visible == 0;
        parts.push(format!(
            "({:.0},{:.0}) {r:.4} [{visible} visible]",
            p.x, p.y
        ));
    }
    let o = gp_occluded_position();
    let (occluded, _) = gp_fidelity_rmse(&scenario, &o, 64)?;
    let fidelity = Check::new(
        "GP fidelity RMSE with 64 rays",
        worst <= 0.15 && !blind,
        format!(
            "{} (limit 0.15); partly occluded ({:.0},{:.0}) {occluded:.4} unchecked",
            parts.join(", "),
            o.x,
            o.y
        ),
    );
    Ok(vec![fidelity, posterior_identity()?])
}

/// With no noise and samples at the query points, the posterior mean
/// reproduces the labels.
pub fn posterior_identity() -> Result<Check> {
    let scenario = Scenario::bundled("one_obstacle_2d")?;
    let xs = scenario.target.coords();
    let ys: Vec<f64> = (0..xs.len())
        .map(|j| if j % 3 == 0 { 1.0 } else { 0.0 })
        .collect();
    let gp = GpModel::new(1.0, scenario.target.spacing(), 0.0);
    let mu = posterior_mean(xs, xs, &ys, &gp)?;
    let err = mu
        .iter()
        .zip(&ys)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(Check::new(
        "GP posterior identity",
        err <= 1e-8,
        format!("max |mu* - y| = {err:.2e} (limit 1e-8)"),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoErrorReport {
    pub oracle: Vec3,
    pub oracle_score: f64,
    pub found: Vec<(Vec3, f64)>,
    pub errors: Vec<f64>,
    pub seconds: f64,
}

impl PsoErrorReport {
    pub fn mean(&self) -> f64 {
        self.errors.iter().sum::<f64>() / self.errors.len().max(1) as f64
    }

    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.errors.iter().map(|e| (e - m).powi(2)).sum::<f64>() / self.errors.len().max(1) as f64)
            .sqrt()
    }

    pub fn check(&self) -> Check {
        let mean = self.mean();
        Check::new(
            "PSO vs oracle error",
            mean <= 2.0 && self.seconds < 120.0,
            format!(
                "{:.4} +/- {:.4} m over {} seeds (limit 2.0 m), oracle argmax ({:.1}, {:.1}) G={:.4}, {:.1}s (limit 120s)",
                mean,
                self.std(),
                self.errors.len(),
                self.oracle.x,
                self.oracle.y,
                self.oracle_score,
                self.seconds
            ),
        )
    }
}

/// Distance between the swarm's viewpoint and the dense-grid argmax, over
/// `seeds` seeds, on the fully revealed map with a fresh coverage field.
pub fn pso_error(scenario: &Scenario, seeds: u64, first_seed: u64) -> Result<PsoErrorReport> {
    let t = Instant::now();
    let grid = scenario.revealed_grid();
    let field = CoverageField::new(scenario.target.len());
    let heat = heatmap_oracle(scenario, &grid, &field, 1.0)?;
    let best = heat.argmax().ok_or(Error::Infeasible {
        tries: heat.candidates,
    })?;
    let oracle = Vec3::from(best.position);
    let ctx = ViewContext::new(
        &grid,
        &scenario.target,
        &field,
        &scenario.gp,
        &scenario.camera,
        &scenario.utility,
        scenario.sensor.range,
        scenario.inflation(),
    );
    let (lo, hi) = scenario.workspace.position_bounds();
    let bounds = SearchBox::new(lo, hi)?;
    let mut found = Vec::new();
    let mut errors = Vec::new();
    for seed in first_seed..first_seed + seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut swarm = ParticleSwarm::new(scenario.swarm);
        let v = optimize_viewpoint(&ctx, &bounds, &mut swarm, &mut rng)?;
        errors.push((v.position - oracle).norm());
        found.push((v.position, v.score.score));
    }
    Ok(PsoErrorReport {
        oracle,
        oracle_score: best.score,
        found,
        errors,
        seconds: t.elapsed().as_secs_f64(),
    })
}

/// A planar scenario with 1 to 5 unknown box obstacles at random, a random
/// non-empty set of target faces and a random seed. Obstacles keep a 3 m
/// margin from the target body and the start.
pub fn random_scenario(seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Scenario::bundled("free_space_2d")?;
    s.name = format!("random_{seed}");
    s.seed = rng.gen();
    let faces: Vec<Face> = loop {
        let pick: Vec<Face> = Face::PLANAR
            .into_iter()
            .filter(|_| rng.gen_bool(0.4))
            .collect();
        if !pick.is_empty() {
            break pick;
        }
    };
    let body = s.target.body();
    s.target = TargetModel::from_box(
        2,
        body.center(),
        body.max - body.min,
        &faces,
        s.target.spacing(),
    )?;
    let (lo, hi) = s.workspace.position_bounds();
    s.start = Vec3::new(
        rng.gen_range(lo.x + 2.0..hi.x - 2.0),
        rng.gen_range(lo.y + 2.0..body.min.y - 10.0),
        0.0,
    );
    let margin = Vec3::new(3.0, 3.0, 0.0);
    let count = rng.gen_range(1..=5);
    s.obstacles.clear();
    s.known.clear();
    while s.obstacles.len() < count {
        let c = [rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y)];
        let h = [rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0)];
        let o = BoxObstacle::planar(c, h)?;
        let grown = crate::geometry::Aabb::new(o.aabb().min - margin, o.aabb().max + margin);
        if grown.overlaps(&body) || grown.contains(&s.start) {
            continue;
        }
        s.obstacles.push(o);
        s.known.push(false);
    }
    Ok(s)
}
