//! Brute-force references.
//!
//! [`heatmap_oracle`] scores every position of a regular grid with the dense
//! capture bundle and exact binary visibility (no GP). [`march_ray`] walks a
//! ray in fixed steps and is the reference for the analytic ray caster.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coverage::{CoverageField, TargetModel};
use crate::metric::{distortion_factor, scale_factor, ViewContext};
use crate::raycast::RaycastHit;
use crate::scenario::Scenario;
use crate::world::OccupancyGrid;
use crate::{Error, Result, Vec3};

/// First distance along the ray at which the marched point lies strictly
/// within `c_r` of a sphere centre, or `None`. Expects `step <= c_r / 4`.
pub fn march_ray(
    origin: &Vec3,
    u: &Vec3,
    d_max: f64,
    spheres: &[Vec3],
    c_r: f64,
    step: f64,
) -> Option<f64> {
    let r2 = c_r * c_r;
    let n = (d_max / step).floor() as usize;
    (0..=n).map(|k| k as f64 * step).find(|&t| {
        let p = origin + u * t;
        spheres.iter().any(|z| (p - z).norm_squared() < r2)
    })
}

/// Target coordinates seen by a dense bundle: those within `c_r` of some
/// target-hit terminal.
pub fn visible_coordinates(hits: &[RaycastHit], target: &TargetModel) -> Vec<bool> {
    let reach = target.sphere_radius() + 1e-9;
    let mut seen = vec![false; target.len()];
    for h in hits.iter().filter(|h| h.is_target()) {
        for (j, x) in target.coords().iter().enumerate() {
            if !seen[j] && (x - h.terminal).norm() <= reach {
                seen[j] = true;
            }
        }
    }
    seen
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub position: [f64; 3],
    pub gamma_d: f64,
    pub gamma_s: f64,
    pub visible_gain: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub dims: usize,
    pub step: f64,
    /// Grid positions considered, feasible or not.
    pub candidates: usize,
    /// Scores at feasible positions, in row-major grid order.
    pub cells: Vec<HeatCell>,
}

impl Heatmap {
    /// Highest-scoring feasible cell; the first one in grid order on ties.
    pub fn argmax(&self) -> Option<&HeatCell> {
        self.cells
            .iter()
            .fold(None, |best: Option<&HeatCell>, c| match best {
                Some(b) if b.score >= c.score => Some(b),
                _ => Some(c),
            })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.dims == 2 {
            "x,y,G\n"
        } else {
            "x,y,z,G\n"
        });
        for c in &self.cells {
            if self.dims == 2 {
                out.push_str(&format!(
                    "{},{},{}\n",
                    c.position[0], c.position[1], c.score
                ));
            } else {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    c.position[0], c.position[1], c.position[2], c.score
                ));
            }
        }
        out
    }
}

/// Regular grid `lower + k * step` over the position bounds, upper bound
/// included when it falls on the grid.
pub fn grid_positions(scenario: &Scenario, step: f64) -> Result<Vec<Vec3>> {
    if !(step > 0.0) {
        return Err(Error::invalid(format!(
            "grid step must be positive, got {step}"
        )));
    }
    let (lo, hi) = scenario.workspace.position_bounds();
    let count = |i: usize| ((hi[i] - lo[i]) / step + 1e-9).floor() as usize + 1;
    let nz = if scenario.dims() == 3 { count(2) } else { 1 };
    let (nx, ny) = (count(0), count(1));
    let mut out = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let mut p = lo + Vec3::new(i as f64, j as f64, k as f64) * step;
                if scenario.dims() == 2 {
                    p.z = 0.0;
                }
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// Exact-visibility score at one position, `None` when infeasible.
pub fn oracle_score(ctx: &ViewContext<'_>, position: &Vec3) -> Result<Option<HeatCell>> {
    if !ctx.is_feasible(position) {
        return Ok(None);
    }
    let Some(pose) = ctx.camera_pose(position) else {
        return Ok(None);
    };
    let (bundle, hits) = ctx.cast(&pose, &ctx.camera.capture_rays)?;
    let gamma_d = distortion_factor(&hits, &pose, ctx.utility);
    let (gamma_s, visible_gain) = if gamma_d == 0.0 {
        (0.0, 0.0)
    } else {
        let seen = visible_coordinates(&hits, ctx.target);
        let gain = seen
            .iter()
            .zip(ctx.field.mu())
            .filter(|(s, _)| **s)
            .map(|(_, m)| 1.0 - m)
            .sum();
        (scale_factor(&hits, &bundle, ctx.utility), gain)
    };
    Ok(Some(HeatCell {
        position: crate::geometry::to_array(position),
        gamma_d,
        gamma_s,
        visible_gain,
        score: gamma_d * gamma_s * visible_gain,
    }))
}

/// Dense score field over the believed `grid` with coverage `field`.
pub fn heatmap_oracle(
    scenario: &Scenario,
    grid: &OccupancyGrid,
    field: &CoverageField,
    step: f64,
) -> Result<Heatmap> {
    let positions = grid_positions(scenario, step)?;
    let ctx = ViewContext::new(
        grid,
        &scenario.target,
        field,
        &scenario.gp,
        &scenario.camera,
        &scenario.utility,
        scenario.sensor.range,
        scenario.inflation(),
    );
    let scored: Vec<Option<HeatCell>> = positions
        .par_iter()
        .map(|p| oracle_score(&ctx, p))
        .collect::<Result<_>>()?;
    Ok(Heatmap {
        dims: scenario.dims(),
        step,
        candidates: positions.len(),
        cells: scored.into_iter().flatten().collect(),
    })
}
