//! Photo-quality metric for a candidate viewpoint.
//!
//! `G = gamma_d * gamma_s * coverage_sum`, where `gamma_d` penalises
//! laterally unbalanced captures, `gamma_s` rewards the target filling a
//! fraction `beta` of the field of view, and `coverage_sum` is the expected
//! number of newly captured target coordinates.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coverage::{expected_gain, CoverageField, GpModel, TargetModel};
use crate::raycast::{generate_ray_bundle, Pose, RayBundle, RaycastHit, Scene, SceneBox, Struck};
use crate::scenario::CameraConfig;
use crate::world::{CollisionChecker, OccupancyGrid};
use crate::{Result, Vec3};

/// `q1 + q2 / (1 + exp(q3 (x + q4)))`.
pub fn logistic_utility(x: f64, q: &[f64; 4]) -> f64 {
    q[0] + q[1] / (1.0 + (q[2] * (x + q[3])).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtilityParams {
    pub q_d: [f64; 4],
    /// Scale utility on `[0, beta]`.
    pub q_s_low: [f64; 4],
    /// Scale utility on `(beta, 1]`.
    pub q_s_high: [f64; 4],
    pub beta: f64,
}

impl Default for UtilityParams {
    fn default() -> Self {
        Self {
            q_d: [0.3, 0.7, 20.0, -0.75],
            q_s_low: [0.0, 1.0, -20.0, -0.5],
            q_s_high: [0.0, 1.0, 30.0, -1.0],
            beta: 0.8,
        }
    }
}

impl UtilityParams {
    pub fn distortion(&self, ratio: f64) -> f64 {
        logistic_utility(ratio, &self.q_d)
    }

    pub fn scale(&self, fraction: f64) -> f64 {
        if fraction <= self.beta {
            logistic_utility(fraction, &self.q_s_low)
        } else {
            logistic_utility(fraction, &self.q_s_high)
        }
    }
}

/// Perspective-distortion factor from the target hits of one bundle. Lateral
/// offsets of the hit terminals are measured along each image axis; the
/// imbalance `|l2 - l1| / (l1 + l2)` is scored by the distortion utility. No
/// target hits gives 0; a zero-width capture counts as fully unbalanced.
pub fn distortion_factor(hits: &[RaycastHit], pose: &Pose, params: &UtilityParams) -> f64 {
    let image_axes: Vec<Vec3> = if pose.dims() == 2 {
        vec![pose.lateral()]
    } else {
        vec![pose.lateral(), pose.up()]
    };
    let mut gamma = 1.0;
    let mut any = false;
    for e in image_axes {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for h in hits.iter().filter(|h| h.is_target()) {
            let off = (h.terminal - pose.position).dot(&e);
            lo = lo.min(off);
            hi = hi.max(off);
            any = true;
        }
        if !any {
            return 0.0;
        }
        let l1 = (-lo).max(0.0);
        let l2 = hi.max(0.0);
        let total = l1 + l2;
        let ratio = if total > 0.0 {
            (l2 - l1).abs() / total
        } else {
            1.0
        };
        gamma *= params.distortion(ratio);
    }
    gamma
}

/// Scale factor from the angular extent of target-hitting rays along each
/// image axis, as a fraction of the field of view.
pub fn scale_factor(hits: &[RaycastHit], bundle: &RayBundle, params: &UtilityParams) -> f64 {
    let axes = bundle.dims - 1;
    let mut gamma = 1.0;
    for i in 0..axes {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for h in hits.iter().filter(|h| h.is_target()) {
            let a = bundle.angles[h.ray][i];
            lo = lo.min(a);
            hi = hi.max(a);
        }
        if lo > hi {
            return 0.0;
        }
        let fraction = ((hi - lo) / bundle.fov[i]).clamp(0.0, 1.0);
        gamma *= params.scale(fraction);
    }
    gamma
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewScore {
    pub gamma_d: f64,
    pub gamma_s: f64,
    pub coverage_sum: f64,
    /// `G`; `-inf` marks an infeasible candidate.
    pub score: f64,
}

impl ViewScore {
    pub const INFEASIBLE: ViewScore = ViewScore {
        gamma_d: 0.0,
        gamma_s: 0.0,
        coverage_sum: 0.0,
        score: f64::NEG_INFINITY,
    };

    pub const ZERO: ViewScore = ViewScore {
        gamma_d: 0.0,
        gamma_s: 0.0,
        coverage_sum: 0.0,
        score: 0.0,
    };

    pub fn is_feasible(&self) -> bool {
        self.score > f64::NEG_INFINITY
    }
}

/// Frozen snapshot of everything a candidate evaluation reads. Shared freely
/// across threads.
pub struct ViewContext<'a> {
    pub grid: &'a OccupancyGrid,
    pub target: &'a TargetModel,
    pub field: &'a CoverageField,
    pub gp: &'a GpModel,
    pub camera: &'a CameraConfig,
    pub utility: &'a UtilityParams,
    pub d_max: f64,
    checker: CollisionChecker<'a>,
    obstacle_centers: Vec<Vec3>,
    boxes: [SceneBox; 1],
    look_at: Vec3,
}

impl<'a> ViewContext<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: &'a OccupancyGrid,
        target: &'a TargetModel,
        field: &'a CoverageField,
        gp: &'a GpModel,
        camera: &'a CameraConfig,
        utility: &'a UtilityParams,
        d_max: f64,
        inflation: f64,
    ) -> Self {
        let look_at = target
            .interest_centroid(field.mu())
            .unwrap_or_else(|| target.body().center());
        Self {
            grid,
            target,
            field,
            gp,
            camera,
            utility,
            d_max,
            checker: CollisionChecker::new(grid, inflation),
            obstacle_centers: grid.occupied_centers(),
            boxes: [SceneBox {
                aabb: target.body(),
                kind: Struck::TargetBody,
            }],
            look_at,
        }
    }

    pub fn checker(&self) -> &CollisionChecker<'a> {
        &self.checker
    }

    pub fn is_feasible(&self, position: &Vec3) -> bool {
        self.checker.is_free(position)
    }

    /// Camera pose at `position`, aimed at the interest-weighted centroid.
    pub fn camera_pose(&self, position: &Vec3) -> Option<Pose> {
        Pose::look_at(*position, self.look_at, self.target.dims()).ok()
    }

    /// Scene built from believed knowledge: occupied cells, the known target
    /// body and the target coordinates.
    pub fn believed_scene(&self) -> Scene<'_> {
        Scene {
            targets: self.target.coords(),
            target_radius: self.target.sphere_radius(),
            obstacles: &self.obstacle_centers,
            obstacle_radius: 0.75 * self.grid.workspace().resolution(),
            boxes: &self.boxes,
        }
    }

    /// Casts `counts` rays of the camera's field of view from `pose`.
    pub fn cast(&self, pose: &Pose, counts: &[usize]) -> Result<(RayBundle, Vec<RaycastHit>)> {
        let bundle = generate_ray_bundle(pose, &self.camera.fov, counts)?;
        let hits = self
            .believed_scene()
            .cast_bundle(pose, &bundle, self.d_max)?;
        Ok((bundle, hits))
    }

    /// Scores a candidate position. Infeasible positions score `-inf`.
    pub fn evaluate(&self, position: &Vec3) -> Result<ViewScore> {
        if !self.is_feasible(position) {
            return Ok(ViewScore::INFEASIBLE);
        }
        let Some(pose) = self.camera_pose(position) else {
            return Ok(ViewScore::INFEASIBLE);
        };
        let (bundle, hits) = self.cast(&pose, &self.camera.eval_rays)?;
        let gamma_d = distortion_factor(&hits, &pose, self.utility);
        if gamma_d == 0.0 {
            return Ok(ViewScore::ZERO);
        }
        let gamma_s = scale_factor(&hits, &bundle, self.utility);
        let coverage_sum = expected_gain(self.field, &hits, self.gp, self.target)?;
        Ok(ViewScore {
            gamma_d,
            gamma_s,
            coverage_sum,
            score: gamma_d * gamma_s * coverage_sum,
        })
    }

    /// [`Self::evaluate`] plus its wall-clock latency in seconds.
    pub fn evaluate_timed(&self, position: &Vec3) -> Result<(ViewScore, f64)> {
        let t = Instant::now();
        let s = self.evaluate(position)?;
        Ok((s, t.elapsed().as_secs_f64()))
    }
}

/// Convenience wrapper over [`ViewContext::evaluate`] for one-off scoring.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_viewpoint(
    position: &Vec3,
    grid: &OccupancyGrid,
    target: &TargetModel,
    field: &CoverageField,
    gp: &GpModel,
    camera: &CameraConfig,
    utility: &UtilityParams,
    d_max: f64,
    inflation: f64,
) -> Result<ViewScore> {
    ViewContext::new(grid, target, field, gp, camera, utility, d_max, inflation).evaluate(position)
}
