//! Workspace, believed occupancy map and the simulated depth sensor.
//!
//! The map stores per-cell log-odds. Depth scans add `l_hit` to cells where a
//! ray stopped on an obstacle and `l_miss` to cells a ray passed through, each
//! cell at most once per scan, with every value clamped to `[l_min, l_max]`.
//! Cells overlapping the (known) target body are reserved: scans never update
//! them, but collision checks treat them as blocked.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::{to_array, Aabb, PLANAR_HALF_THICKNESS};
use crate::raycast::{generate_ray_bundle, Pose, RaycastHit, SceneBox, Struck};
use crate::scenario::Scenario;
use crate::{Error, Result, Vec3};

pub type CellIndex = [usize; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    dims: usize,
    lower: Vec3,
    upper: Vec3,
    resolution: f64,
    shape: [usize; 3],
}

impl Workspace {
    /// `lower`/`upper` carry one entry per dimension. Planar workspaces are a
    /// single layer of cells centred on `z = 0`.
    pub fn new(dims: usize, lower: &[f64], upper: &[f64], resolution: f64) -> Result<Self> {
        if dims != 2 && dims != 3 {
            return Err(Error::invalid(format!(
                "dimension count {dims} is not 2 or 3"
            )));
        }
        if lower.len() != dims || upper.len() != dims {
            return Err(Error::invalid(format!(
                "workspace bounds need {dims} components"
            )));
        }
        if !(resolution > 0.0) {
            return Err(Error::invalid("resolution must be positive"));
        }
        let mut lo = Vec3::zeros();
        let mut hi = Vec3::zeros();
        for i in 0..dims {
            if !(lower[i] < upper[i]) {
                return Err(Error::invalid(format!(
                    "workspace axis {i}: lower must be below upper"
                )));
            }
            lo[i] = lower[i];
            hi[i] = upper[i];
        }
        if dims == 2 {
            lo.z = -resolution / 2.0;
            hi.z = resolution / 2.0;
        }
        let mut shape = [1; 3];
        for (i, s) in shape.iter_mut().enumerate() {
            *s = (((hi[i] - lo[i]) / resolution) - 1e-9).ceil().max(1.0) as usize;
        }
        Ok(Self {
            dims,
            lower: lo,
            upper: hi,
            resolution,
            shape,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn lower(&self) -> Vec3 {
        self.lower
    }

    pub fn upper(&self) -> Vec3 {
        self.upper
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn cell_count(&self) -> usize {
        self.shape.iter().product()
    }

    /// Bounds used for sampling positions: `z` is pinned to 0 in the plane.
    pub fn position_bounds(&self) -> (Vec3, Vec3) {
        let (mut lo, mut hi) = (self.lower, self.upper);
        if self.dims == 2 {
            lo.z = 0.0;
            hi.z = 0.0;
        }
        (lo, hi)
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::new(self.lower, self.upper)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..self.dims).all(|i| p[i] >= self.lower[i] && p[i] <= self.upper[i])
            && (self.dims == 3 || p.z == 0.0)
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        let (lo, hi) = self.position_bounds();
        Vec3::new(
            p.x.clamp(lo.x, hi.x),
            p.y.clamp(lo.y, hi.y),
            p.z.clamp(lo.z, hi.z),
        )
    }

    pub fn diagonal(&self) -> f64 {
        let (lo, hi) = self.position_bounds();
        (hi - lo).norm()
    }

    pub fn cell_of(&self, p: &Vec3) -> Option<CellIndex> {
        let mut c = [0usize; 3];
        for i in 0..3 {
            let t = (p[i] - self.lower[i]) / self.resolution;
            if !(t >= -1e-9) || p[i] > self.upper[i] + 1e-9 {
                return None;
            }
            c[i] = (t.max(0.0).floor() as usize).min(self.shape[i] - 1);
        }
        Some(c)
    }

    pub fn cell_center(&self, c: CellIndex) -> Vec3 {
        let mut p = Vec3::zeros();
        for i in 0..3 {
            p[i] = self.lower[i] + (c[i] as f64 + 0.5) * self.resolution;
        }
        if self.dims == 2 {
            p.z = 0.0;
        }
        p
    }

    pub fn cell_box(&self, c: CellIndex) -> Aabb {
        let mut min = Vec3::zeros();
        for i in 0..3 {
            min[i] = self.lower[i] + c[i] as f64 * self.resolution;
        }
        Aabb::new(min, min + Vec3::repeat(self.resolution))
    }

    fn linear(&self, c: CellIndex) -> Option<usize> {
        if (0..3).any(|i| c[i] >= self.shape[i]) {
            return None;
        }
        Some((c[2] * self.shape[1] + c[1]) * self.shape[0] + c[0])
    }

    fn unlinear(&self, k: usize) -> CellIndex {
        let x = k % self.shape[0];
        let y = (k / self.shape[0]) % self.shape[1];
        let z = k / (self.shape[0] * self.shape[1]);
        [x, y, z]
    }

    /// Cells crossed by the segment `a -> b` (clipped to the workspace), in
    /// traversal order.
    pub fn traverse(&self, a: &Vec3, b: &Vec3) -> Vec<CellIndex> {
        let mut out = Vec::new();
        let Some((t0, t1)) = self.bounds().clip_segment(a, b) else {
            return out;
        };
        let d = b - a;
        let start = a + d * t0;
        let end = a + d * t1;
        let (Some(mut cell), Some(last)) = (self.cell_of(&start), self.cell_of(&end)) else {
            return out;
        };
        let dir = end - start;
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for i in 0..3 {
            if dir[i] > 0.0 {
                step[i] = 1;
                let boundary = self.lower[i] + (cell[i] as f64 + 1.0) * self.resolution;
                t_max[i] = (boundary - start[i]) / dir[i];
                t_delta[i] = self.resolution / dir[i];
            } else if dir[i] < 0.0 {
                step[i] = -1;
                let boundary = self.lower[i] + cell[i] as f64 * self.resolution;
                t_max[i] = (boundary - start[i]) / dir[i];
                t_delta[i] = -self.resolution / dir[i];
            }
        }
        let budget: usize = (0..3).map(|i| cell[i].abs_diff(last[i])).sum::<usize>() + 1;
        out.push(cell);
        for _ in 0..budget {
            if cell == last {
                break;
            }
            let axis = (0..3)
                .min_by(|&i, &j| t_max[i].total_cmp(&t_max[j]))
                .unwrap_or(0);
            if t_max[axis] > 1.0 + 1e-9 {
                break;
            }
            let next = cell[axis] as i64 + step[axis];
            if next < 0 || next as usize >= self.shape[axis] {
                break;
            }
            cell[axis] = next as usize;
            t_max[axis] += t_delta[axis];
            out.push(cell);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogOddsParams {
    pub l_hit: f64,
    pub l_miss: f64,
    pub l_min: f64,
    pub l_max: f64,
}

impl Default for LogOddsParams {
    fn default() -> Self {
        Self {
            l_hit: 0.85,
            l_miss: -0.4,
            l_min: -2.0,
            l_max: 3.5,
        }
    }
}

impl LogOddsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_min < 0.0 && self.l_max > 0.0 && self.l_hit > 0.0 && self.l_miss < 0.0) {
            return Err(Error::invalid(
                "log-odds parameters need l_min < 0 < l_max, l_hit > 0 and l_miss < 0",
            ));
        }
        Ok(())
    }
}

/// Axis-aligned box obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxObstacle {
    pub center: Vec3,
    pub half_extents: Vec3,
}

impl BoxObstacle {
    pub fn new(center: Vec3, half_extents: Vec3) -> Result<Self> {
        if half_extents.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::invalid("obstacle half-extents must be positive"));
        }
        Ok(Self {
            center,
            half_extents,
        })
    }

    /// Planar boxes are given a nominal thickness around `z = 0`.
    pub fn planar(center: [f64; 2], half: [f64; 2]) -> Result<Self> {
        Self::new(
            Vec3::new(center[0], center[1], 0.0),
            Vec3::new(half[0], half[1], PLANAR_HALF_THICKNESS),
        )
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_center_half(self.center, self.half_extents)
    }
}

/// Believed occupancy map.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    workspace: Workspace,
    cells: Vec<f64>,
    reserved: Vec<bool>,
    params: LogOddsParams,
}

impl OccupancyGrid {
    pub fn new(workspace: Workspace, params: LogOddsParams) -> Self {
        let n = workspace.cell_count();
        Self {
            workspace,
            cells: vec![0.0; n],
            reserved: vec![false; n],
            params,
        }
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn params(&self) -> &LogOddsParams {
        &self.params
    }

    fn index(&self, c: CellIndex) -> Result<usize> {
        self.workspace.linear(c).ok_or(Error::OutOfBounds {
            cell: c,
            shape: self.workspace.shape,
        })
    }

    pub fn log_odds(&self, c: CellIndex) -> Result<f64> {
        Ok(self.cells[self.index(c)?])
    }

    pub fn set_log_odds(&mut self, c: CellIndex, value: f64) -> Result<()> {
        let k = self.index(c)?;
        self.cells[k] = value.clamp(self.params.l_min, self.params.l_max);
        Ok(())
    }

    pub fn occupancy_probability(&self, c: CellIndex) -> Result<f64> {
        let l = self.log_odds(c)?;
        Ok(1.0 / (1.0 + (-l).exp()))
    }

    /// Marks every cell overlapping `body` as reserved (known, never mapped,
    /// always blocked for motion).
    pub fn reserve(&mut self, body: &Aabb) {
        for k in 0..self.cells.len() {
            let c = self.workspace.unlinear(k);
            if self.workspace.cell_box(c).overlaps(body) {
                self.reserved[k] = true;
            }
        }
    }

    pub fn is_reserved(&self, c: CellIndex) -> bool {
        self.workspace.linear(c).is_some_and(|k| self.reserved[k])
    }

    /// Log-odds above zero, i.e. occupancy probability above one half.
    pub fn is_occupied(&self, c: CellIndex) -> bool {
        self.workspace
            .linear(c)
            .is_some_and(|k| self.cells[k] > 0.0)
    }

    fn blocked_linear(&self, k: usize) -> bool {
        self.reserved[k] || self.cells[k] > 0.0
    }

    /// Centres of believed-occupied cells (reserved target cells excluded).
    pub fn occupied_centers(&self) -> Vec<Vec3> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(k, &l)| l > 0.0 && !self.reserved[*k])
            .map(|(k, _)| self.workspace.cell_center(self.workspace.unlinear(k)))
            .collect()
    }

    pub fn min_log_odds(&self) -> f64 {
        self.cells.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_log_odds(&self) -> f64 {
        self.cells.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn raw_cells(&self) -> &[f64] {
        &self.cells
    }

    /// Sets every cell overlapping `aabb` to `l_max`.
    pub fn rasterize_box(&mut self, aabb: &Aabb) {
        for k in 0..self.cells.len() {
            if self.reserved[k] {
                continue;
            }
            let c = self.workspace.unlinear(k);
            if self.workspace.cell_box(c).overlaps(aabb) {
                self.cells[k] = self.params.l_max;
            }
        }
    }

    /// Recursive Bayesian update from one depth scan taken at `pose`.
    pub fn integrate_depth_scan(&mut self, pose: &Pose, hits: &[RaycastHit]) -> Result<()> {
        if !self.workspace.contains(&pose.position) {
            return Err(Error::OutsideWorkspace(to_array(&pose.position)));
        }
        let nudge = self.workspace.resolution * 1e-6;
        let mut hit_cells = BTreeSet::new();
        let mut miss_cells = BTreeSet::new();
        for hit in hits {
            let path = self.workspace.traverse(&pose.position, &hit.terminal);
            let hit_cell = match hit.struck {
                Struck::Obstacle(_) => {
                    let dir = (hit.terminal - pose.position).try_normalize(1e-12);
                    let inside = hit.terminal + dir.unwrap_or_else(Vec3::zeros) * nudge;
                    self.workspace
                        .cell_of(&inside)
                        .and_then(|c| self.workspace.linear(c))
                }
                _ => None,
            };
            for c in path {
                let Some(k) = self.workspace.linear(c) else {
                    continue;
                };
                if Some(k) == hit_cell {
                    break;
                }
                miss_cells.insert(k);
            }
            if let Some(k) = hit_cell {
                hit_cells.insert(k);
            }
        }
        let p = self.params;
        for &k in &hit_cells {
            if !self.reserved[k] {
                self.cells[k] = (self.cells[k] + p.l_hit).clamp(p.l_min, p.l_max);
            }
        }
        for &k in miss_cells.difference(&hit_cells) {
            if !self.reserved[k] {
                self.cells[k] = (self.cells[k] + p.l_miss).clamp(p.l_min, p.l_max);
            }
        }
        Ok(())
    }
}

/// True iff the cell containing `position` is blocked or any blocked cell
/// centre lies within `inflation` of it. Blocked means occupancy probability
/// above 0.5 or reserved for the target body.
pub fn is_colliding(grid: &OccupancyGrid, position: &Vec3, inflation: f64) -> bool {
    let ws = &grid.workspace;
    let Some(cell) = ws.cell_of(position) else {
        return true;
    };
    if grid.blocked_linear(ws.linear(cell).unwrap_or(0)) {
        return true;
    }
    if inflation <= 0.0 {
        return false;
    }
    let reach = (inflation / ws.resolution).ceil() as i64 + 1;
    let r_sq = inflation * inflation;
    let lo = |i: usize| (cell[i] as i64 - reach).max(0) as usize;
    let hi = |i: usize| ((cell[i] as i64 + reach) as usize).min(ws.shape[i] - 1);
    for z in lo(2)..=hi(2) {
        for y in lo(1)..=hi(1) {
            for x in lo(0)..=hi(0) {
                let c = [x, y, z];
                let k = ws.linear(c).unwrap_or(0);
                if grid.blocked_linear(k) && (ws.cell_center(c) - position).norm_squared() <= r_sq {
                    return true;
                }
            }
        }
    }
    false
}

/// Collision queries against a frozen grid at a fixed inflation radius. Cells
/// far from every blocked cell are precomputed as free so most queries avoid
/// the neighbourhood scan.
#[derive(Debug, Clone)]
pub struct CollisionChecker<'a> {
    grid: &'a OccupancyGrid,
    inflation: f64,
    near_blocked: Vec<bool>,
}

impl<'a> CollisionChecker<'a> {
    pub fn new(grid: &'a OccupancyGrid, inflation: f64) -> Self {
        let ws = &grid.workspace;
        let mut near_blocked = vec![false; ws.cell_count()];
        let reach = (inflation.max(0.0) / ws.resolution).ceil() as i64 + 1;
        for k in 0..near_blocked.len() {
            if !grid.blocked_linear(k) {
                continue;
            }
            let c = ws.unlinear(k);
            let lo = |i: usize| (c[i] as i64 - reach).max(0) as usize;
            let hi = |i: usize| ((c[i] as i64 + reach) as usize).min(ws.shape[i] - 1);
            for z in lo(2)..=hi(2) {
                for y in lo(1)..=hi(1) {
                    for x in lo(0)..=hi(0) {
                        if let Some(j) = ws.linear([x, y, z]) {
                            near_blocked[j] = true;
                        }
                    }
                }
            }
        }
        Self {
            grid,
            inflation,
            near_blocked,
        }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        self.grid
    }

    pub fn inflation(&self) -> f64 {
        self.inflation
    }

    pub fn is_free(&self, p: &Vec3) -> bool {
        let ws = &self.grid.workspace;
        if !ws.contains(p) {
            return false;
        }
        match ws.cell_of(p).and_then(|c| ws.linear(c)) {
            Some(k) if !self.near_blocked[k] => true,
            Some(_) => !is_colliding(self.grid, p, self.inflation),
            None => false,
        }
    }

    /// Segment check sampled every quarter cell, endpoints included.
    pub fn segment_free(&self, a: &Vec3, b: &Vec3) -> bool {
        let len = (b - a).norm();
        let step = self.grid.workspace.resolution / 4.0;
        let n = (len / step).ceil().max(1.0) as usize;
        (0..=n).all(|i| self.is_free(&(a + (b - a) * (i as f64 / n as f64))))
    }
}

/// The true scene as seen by the depth sensor and the camera: target
/// coordinates as spheres, obstacles and the target body as exact boxes.
pub fn true_scene_boxes(scenario: &Scenario) -> Vec<SceneBox> {
    let mut boxes: Vec<SceneBox> = scenario
        .obstacles
        .iter()
        .enumerate()
        .map(|(i, o)| SceneBox {
            aabb: o.aabb(),
            kind: Struck::Obstacle(i),
        })
        .collect();
    boxes.push(SceneBox {
        aabb: scenario.target.body(),
        kind: Struck::TargetBody,
    });
    boxes
}

/// Casts the depth sensor's bundle from `pose` against the true scene.
pub fn simulate_depth_sensor(scenario: &Scenario, pose: &Pose) -> Result<Vec<RaycastHit>> {
    let p = pose.position;
    if !scenario.workspace.contains(&p) {
        return Err(Error::OutsideWorkspace(to_array(&p)));
    }
    if scenario.obstacles.iter().any(|o| o.aabb().contains(&p))
        || scenario.target.body().contains(&p)
    {
        return Err(Error::Collision(to_array(&p)));
    }
    let sensor = &scenario.sensor;
    let bundle = generate_ray_bundle(pose, &sensor.fov, &sensor.rays)?;
    let boxes = true_scene_boxes(scenario);
    scenario
        .true_scene(&boxes)
        .cast_bundle(pose, &bundle, sensor.range)
}
