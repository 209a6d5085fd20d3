//! Collision-free routing on the believed map.
//!
//! [`plan_grid_astar`] searches the cell graph (8-connected in 2D,
//! 26-connected in 3D) and then shortcuts the result. [`plan_rrt_star`] is a
//! sampling planner for 3D workspaces. Both treat the robot as a point with
//! an inflation radius and accept only segments that [`CollisionChecker`]
//! reports free.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::to_array;
use crate::world::{is_colliding, CellIndex, CollisionChecker};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    waypoints: Vec<Vec3>,
    length: f64,
}

impl Path {
    pub fn new(waypoints: Vec<Vec3>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::invalid("a path needs at least one waypoint"));
        }
        let length = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        Ok(Self { waypoints, length })
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn start(&self) -> Vec3 {
        self.waypoints[0]
    }

    pub fn goal(&self) -> Vec3 {
        *self.waypoints.last().unwrap()
    }

    /// Whether every segment is free under `checker`.
    pub fn is_free(&self, checker: &CollisionChecker<'_>) -> bool {
        self.waypoints.iter().all(|p| checker.is_free(p))
            && self
                .waypoints
                .windows(2)
                .all(|w| checker.segment_free(&w[0], &w[1]))
    }

    /// Point reached after travelling `distance` along the path from its
    /// start, together with the index of the next waypoint ahead of it.
    pub fn point_at(&self, distance: f64) -> (Vec3, usize) {
        let mut left = distance.max(0.0);
        for (i, w) in self.waypoints.windows(2).enumerate() {
            let seg = (w[1] - w[0]).norm();
            if left < seg {
                return (w[0] + (w[1] - w[0]) * (left / seg), i + 1);
            }
            left -= seg;
        }
        (self.goal(), self.waypoints.len() - 1)
    }
}

/// Greedy line-of-sight shortcutting: from each kept waypoint, jump to the
/// farthest later waypoint visible from it.
pub fn shortcut(waypoints: &[Vec3], checker: &CollisionChecker<'_>) -> Vec<Vec3> {
    if waypoints.len() <= 2 {
        return waypoints.to_vec();
    }
    let mut out = vec![waypoints[0]];
    let mut i = 0;
    while i + 1 < waypoints.len() {
        let mut j = waypoints.len() - 1;
        while j > i + 1 && !checker.segment_free(&waypoints[i], &waypoints[j]) {
            j -= 1;
        }
        out.push(waypoints[j]);
        i = j;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn linear(shape: [usize; 3], c: CellIndex) -> usize {
    (c[2] * shape[1] + c[1]) * shape[0] + c[0]
}

fn unlinear(shape: [usize; 3], i: usize) -> CellIndex {
    [
        i % shape[0],
        (i / shape[0]) % shape[1],
        i / (shape[0] * shape[1]),
    ]
}

/// Neighbouring cells of `c` (8 in the plane, 26 in space).
pub fn cell_neighbors(shape: [usize; 3], c: CellIndex) -> Vec<CellIndex> {
    let mut out = Vec::with_capacity(26);
    let dz: &[i64] = if shape[2] > 1 { &[-1, 0, 1] } else { &[0] };
    for &z in dz {
        for y in -1i64..=1 {
            for x in -1i64..=1 {
                if x == 0 && y == 0 && z == 0 {
                    continue;
                }
                let n = [c[0] as i64 + x, c[1] as i64 + y, c[2] as i64 + z];
                if (0..3).all(|k| n[k] >= 0 && (n[k] as usize) < shape[k]) {
                    out.push([n[0] as usize, n[1] as usize, n[2] as usize]);
                }
            }
        }
    }
    out
}

/// Position of a graph node: the cell centre, except the start and goal
/// cells, which sit at the requested start and goal positions.
pub(crate) fn node_position(
    checker: &CollisionChecker<'_>,
    c: CellIndex,
    start: (CellIndex, Vec3),
    goal: (CellIndex, Vec3),
) -> Vec3 {
    if c == goal.0 {
        goal.1
    } else if c == start.0 {
        start.1
    } else {
        checker.grid().workspace().cell_center(c)
    }
}

fn endpoints(
    checker: &CollisionChecker<'_>,
    start: &Vec3,
    goal: &Vec3,
) -> Result<(CellIndex, CellIndex)> {
    let ws = checker.grid().workspace();
    let s = ws
        .cell_of(start)
        .ok_or(Error::OutsideWorkspace(to_array(start)))?;
    let g = ws
        .cell_of(goal)
        .ok_or(Error::OutsideWorkspace(to_array(goal)))?;
    if is_colliding(checker.grid(), start, 0.0) {
        return Err(Error::Collision(to_array(start)));
    }
    if !checker.is_free(goal) {
        return Err(Error::Collision(to_array(goal)));
    }
    Ok((s, g))
}

/// Shortest path on the cell graph, before shortcutting. A start inside the
/// inflated margin of a blocked cell (but not inside the cell) may still
/// leave it: its first hop only requires the neighbouring node to be free.
pub fn astar_raw(checker: &CollisionChecker<'_>, start: &Vec3, goal: &Vec3) -> Result<Path> {
    let (sc, gc) = endpoints(checker, start, goal)?;
    if start == goal {
        return Path::new(vec![*start]);
    }
    if sc == gc {
        if checker.segment_free(start, goal) {
            return Path::new(vec![*start, *goal]);
        }
        return Err(Error::NoPath {
            start: to_array(start),
            goal: to_array(goal),
        });
    }
    let ws = checker.grid().workspace();
    let shape = ws.shape();
    let n = ws.cell_count();
    let pos = |c: CellIndex| node_position(checker, c, (sc, *start), (gc, *goal));
    let mut g_cost = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut usable: Vec<Option<bool>> = vec![None; n];
    let s = linear(shape, sc);
    let t = linear(shape, gc);
    let stuck = !checker.is_free(start);
    g_cost[s] = 0.0;
    let mut open = BinaryHeap::new();
    open.push(Open {
        f: (start - goal).norm(),
        node: s,
    });
    while let Some(Open { node, .. }) = open.pop() {
        if closed[node] {
            continue;
        }
        closed[node] = true;
        if node == t {
            break;
        }
        let c = unlinear(shape, node);
        let pc = pos(c);
        for nc in cell_neighbors(shape, c) {
            let ni = linear(shape, nc);
            if closed[ni] {
                continue;
            }
            let pn = pos(nc);
            let ok = *usable[ni].get_or_insert_with(|| checker.is_free(&pn));
            if !ok || !(stuck && node == s || checker.segment_free(&pc, &pn)) {
                continue;
            }
            let cand = g_cost[node] + (pn - pc).norm();
            if cand < g_cost[ni] {
                g_cost[ni] = cand;
                parent[ni] = node;
                open.push(Open {
                    f: cand + (pn - goal).norm(),
                    node: ni,
                });
            }
        }
    }
    if !closed[t] {
        return Err(Error::NoPath {
            start: to_array(start),
            goal: to_array(goal),
        });
    }
    let mut chain = vec![t];
    while *chain.last().unwrap() != s {
        chain.push(parent[*chain.last().unwrap()]);
    }
    chain.reverse();
    Path::new(chain.into_iter().map(|i| pos(unlinear(shape, i))).collect())
}

/// Cells reachable from `start` over the same graph [`astar_raw`] searches.
/// As in [`astar_raw`], a start inside an inflated region may leave it.
pub fn reachable_cells(checker: &CollisionChecker<'_>, start: &Vec3) -> Vec<bool> {
    let ws = checker.grid().workspace();
    let shape = ws.shape();
    let mut seen = vec![false; ws.cell_count()];
    let Some(sc) = ws.cell_of(start) else {
        return seen;
    };
    let s = linear(shape, sc);
    let stuck = !checker.is_free(start);
    seen[s] = true;
    let mut queue = std::collections::VecDeque::from([s]);
    while let Some(i) = queue.pop_front() {
        let c = unlinear(shape, i);
        let pc = if i == s { *start } else { ws.cell_center(c) };
        for nc in cell_neighbors(shape, c) {
            let ni = linear(shape, nc);
            if seen[ni] {
                continue;
            }
            let pn = ws.cell_center(nc);
            if !checker.is_free(&pn) {
                continue;
            }
            if !(stuck && i == s) && !checker.segment_free(&pc, &pn) {
                continue;
            }
            seen[ni] = true;
            queue.push_back(ni);
        }
    }
    seen
}

/// Grid A* with Euclidean edge costs and heuristic, followed by greedy
/// line-of-sight shortcutting.
pub fn plan_grid_astar(checker: &CollisionChecker<'_>, start: &Vec3, goal: &Vec3) -> Result<Path> {
    let raw = astar_raw(checker, start, goal)?;
    Path::new(shortcut(raw.waypoints(), checker))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrtConfig {
    pub iterations: usize,
    pub goal_bias: f64,
    /// Steering step in meters; `None` picks `max(2 * resolution, 5% of the
    /// workspace diagonal)`.
    pub step: Option<f64>,
}

impl Default for RrtConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            goal_bias: 0.05,
            step: None,
        }
    }
}

struct Tree {
    points: Vec<Vec3>,
    parent: Vec<usize>,
    cost: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl Tree {
    fn nearest(&self, p: &Vec3) -> usize {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (i, q) in self.points.iter().enumerate() {
            let d = (q - p).norm_squared();
            if d < bd {
                bd = d;
                best = i;
            }
        }
        best
    }

    fn near(&self, p: &Vec3, r: f64) -> Vec<usize> {
        let r2 = r * r;
        (0..self.points.len())
            .filter(|&i| (self.points[i] - p).norm_squared() <= r2)
            .collect()
    }

    fn reparent(&mut self, node: usize, new_parent: usize, new_cost: f64) {
        let old = self.parent[node];
        self.children[old].retain(|&c| c != node);
        self.parent[node] = new_parent;
        self.children[new_parent].push(node);
        let delta = new_cost - self.cost[node];
        let mut stack = vec![node];
        while let Some(i) = stack.pop() {
            self.cost[i] += delta;
            stack.extend(self.children[i].iter().copied());
        }
    }
}

fn unit_ball_volume(d: usize) -> f64 {
    if d == 2 {
        std::f64::consts::PI
    } else {
        4.0 / 3.0 * std::f64::consts::PI
    }
}

/// RRT* with straight-line steering, goal bias and a rewiring radius that
/// shrinks as `gamma (ln n / n)^(1/d)`. The best goal connection found within
/// the iteration budget is shortcut and returned.
pub fn plan_rrt_star(
    checker: &CollisionChecker<'_>,
    start: &Vec3,
    goal: &Vec3,
    config: &RrtConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Path> {
    let ws = checker.grid().workspace();
    if !ws.contains(start) {
        return Err(Error::OutsideWorkspace(to_array(start)));
    }
    if !ws.contains(goal) {
        return Err(Error::OutsideWorkspace(to_array(goal)));
    }
    if !checker.is_free(start) {
        return Err(Error::Collision(to_array(start)));
    }
    if !checker.is_free(goal) {
        return Err(Error::Collision(to_array(goal)));
    }
    if start == goal {
        return Path::new(vec![*start]);
    }
    let d = ws.dims();
    let res = ws.resolution();
    let (lo, hi) = ws.position_bounds();
    let eta = config.step.unwrap_or((2.0 * res).max(0.05 * ws.diagonal()));
    let volume: f64 = (0..d).map(|i| hi[i] - lo[i]).product();
    let df = d as f64;
    let gamma =
        2.0 * (1.0 + 1.0 / df).powf(1.0 / df) * (volume / unit_ball_volume(d)).powf(1.0 / df) * 1.1;

    let mut tree = Tree {
        points: vec![*start],
        parent: vec![0],
        cost: vec![0.0],
        children: vec![Vec::new()],
    };
    let mut goal_links: Vec<usize> = Vec::new();
    let sample = |rng: &mut ChaCha8Rng| -> Vec3 {
        if rng.gen::<f64>() < config.goal_bias {
            return *goal;
        }
        let mut p = lo;
        for i in 0..d {
            p[i] = rng.gen_range(lo[i]..=hi[i]);
        }
        p
    };

    for _ in 0..config.iterations {
        let x = sample(rng);
        let ni = tree.nearest(&x);
        let from = tree.points[ni];
        let delta = x - from;
        let dist = delta.norm();
        if dist < 1e-12 {
            continue;
        }
        let new = if dist > eta {
            from + delta * (eta / dist)
        } else {
            x
        };
        if !checker.is_free(&new) || !checker.segment_free(&from, &new) {
            continue;
        }
        let n = tree.points.len() as f64 + 1.0;
        let radius = (gamma * (n.ln() / n).powf(1.0 / df)).min(eta);
        let near = tree.near(&new, radius);
        let mut best_parent = ni;
        let mut best_cost = tree.cost[ni] + (new - from).norm();
        for &j in &near {
            let c = tree.cost[j] + (new - tree.points[j]).norm();
            if c < best_cost && checker.segment_free(&tree.points[j], &new) {
                best_cost = c;
                best_parent = j;
            }
        }
        let id = tree.points.len();
        tree.points.push(new);
        tree.parent.push(best_parent);
        tree.cost.push(best_cost);
        tree.children.push(Vec::new());
        tree.children[best_parent].push(id);
        for &j in &near {
            if j == best_parent || j == 0 {
                continue;
            }
            let c = best_cost + (tree.points[j] - new).norm();
            if c + 1e-12 < tree.cost[j] && checker.segment_free(&new, &tree.points[j]) {
                tree.reparent(j, id, c);
            }
        }
        if (new - goal).norm() <= res && checker.segment_free(&new, goal) {
            goal_links.push(id);
        }
    }

    let best = goal_links
        .iter()
        .copied()
        .min_by(|&a, &b| {
            let ca = tree.cost[a] + (tree.points[a] - goal).norm();
            let cb = tree.cost[b] + (tree.points[b] - goal).norm();
            ca.total_cmp(&cb).then(a.cmp(&b))
        })
        .ok_or(Error::NoPath {
            start: to_array(start),
            goal: to_array(goal),
        })?;
    let mut chain = vec![*goal];
    let mut i = best;
    loop {
        if tree.points[i] != *goal {
            chain.push(tree.points[i]);
        }
        if i == 0 {
            break;
        }
        i = tree.parent[i];
    }
    chain.reverse();
    Path::new(shortcut(&chain, checker))
}
