//! FOV-constrained ray bundles and ray/sphere casting.
//!
//! Every discretized coordinate (a target sample or a believed-occupied cell
//! centre) is treated as a sphere of radius `c_r`. A ray keeps the nearest
//! sphere entry in front of the viewpoint; its terminal is the entry point, or
//! `origin + d_max * u` when nothing is struck. Exact boxes can be added to a
//! [`Scene`] for the true world, where obstacles are known precisely.

use serde::{Deserialize, Serialize};

use crate::geometry::Aabb;
use crate::{Error, Result, Vec3};

const UNIT_TOLERANCE: f64 = 1e-9;

/// Camera or sensor placement. Planar poses live in the `z = 0` plane and use
/// `+z` as their up reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    axis: Vec3,
    up: Vec3,
    dims: usize,
}

impl Pose {
    pub fn new(position: Vec3, axis: Vec3, up: Vec3, dims: usize) -> Result<Self> {
        if dims != 2 && dims != 3 {
            return Err(Error::invalid(format!(
                "dimension count {dims} is not 2 or 3"
            )));
        }
        if ((axis.norm() - 1.0).abs()) >= UNIT_TOLERANCE {
            return Err(Error::invalid("optical axis must have unit norm"));
        }
        if dims == 2 {
            if axis.z != 0.0 || position.z != 0.0 {
                return Err(Error::invalid("planar pose must lie in the z = 0 plane"));
            }
            return Ok(Self {
                position,
                axis,
                up: Vec3::z(),
                dims,
            });
        }
        if (up.norm() - 1.0).abs() >= UNIT_TOLERANCE || axis.dot(&up).abs() >= UNIT_TOLERANCE {
            return Err(Error::invalid(
                "up reference must be a unit vector orthogonal to the axis",
            ));
        }
        Ok(Self {
            position,
            axis,
            up,
            dims,
        })
    }

    /// Pose at `position` whose optical axis points at `look_at`. In 3D the up
    /// reference is world `+z` projected orthogonal to the axis (world `+y`
    /// when looking straight up or down).
    pub fn look_at(position: Vec3, look_at: Vec3, dims: usize) -> Result<Self> {
        let mut dir = look_at - position;
        if dims == 2 {
            dir.z = 0.0;
        }
        let n = dir.norm();
        if n < 1e-12 {
            return Err(Error::invalid("look-at point coincides with the position"));
        }
        let axis = dir / n;
        if dims == 2 {
            return Self::new(position, axis, Vec3::z(), 2);
        }
        let mut reference = Vec3::z();
        if axis.dot(&reference).abs() > 0.999 {
            reference = Vec3::y();
        }
        let up = (reference - axis * axis.dot(&reference)).normalize();
        Self::new(position, axis, up, 3)
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn up(&self) -> Vec3 {
        self.up
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Horizontal image axis; positive azimuth rotates towards it.
    pub fn lateral(&self) -> Vec3 {
        self.up.cross(&self.axis)
    }

    /// World direction for angular coordinates relative to the optical axis.
    pub fn direction(&self, azimuth: f64, elevation: f64) -> Vec3 {
        let planar = self.axis * azimuth.cos() + self.lateral() * azimuth.sin();
        if self.dims == 2 {
            return planar;
        }
        planar * elevation.cos() + self.up * elevation.sin()
    }
}

/// Unit directions spread uniformly over a field of view.
#[derive(Debug, Clone, PartialEq)]
pub struct RayBundle {
    pub directions: Vec<Vec3>,
    /// `[azimuth, elevation]` of each ray relative to the optical axis; the
    /// elevation is 0 for planar bundles.
    pub angles: Vec<[f64; 2]>,
    pub fov: [f64; 2],
    pub dims: usize,
}

impl RayBundle {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Cosine of the largest angle between any ray and the optical axis.
    fn min_axis_cosine(&self, axis: &Vec3) -> f64 {
        self.directions
            .iter()
            .map(|d| d.dot(axis))
            .fold(1.0, f64::min)
    }
}

fn spread(count: usize, fov: f64) -> Vec<f64> {
    if count == 1 {
        return vec![0.0];
    }
    let step = fov / (count - 1) as f64;
    (0..count).map(|k| -fov / 2.0 + k as f64 * step).collect()
}

/// Rays at uniformly spaced angles spanning `[-fov/2, fov/2]` (inclusive) on
/// each angular axis. Planar poses use `fov[0]` and `counts[0]` only.
pub fn generate_ray_bundle(pose: &Pose, fov: &[f64], counts: &[usize]) -> Result<RayBundle> {
    let axes = pose.dims() - 1;
    if fov.len() < axes || counts.len() < axes {
        return Err(Error::invalid(format!(
            "need {axes} field-of-view angle(s) and ray count(s)"
        )));
    }
    for &f in &fov[..axes] {
        if !(f > 0.0 && f <= std::f64::consts::PI) {
            return Err(Error::invalid(format!("field of view {f} outside (0, pi]")));
        }
    }
    if counts[..axes].contains(&0) {
        return Err(Error::invalid("ray counts must be at least 1"));
    }

    let azimuths = spread(counts[0], fov[0]);
    let elevations = if axes == 2 {
        spread(counts[1], fov[1])
    } else {
        vec![0.0]
    };
    let mut directions = Vec::with_capacity(azimuths.len() * elevations.len());
    let mut angles = Vec::with_capacity(directions.capacity());
    for &el in &elevations {
        for &az in &azimuths {
            directions.push(pose.direction(az, el).normalize());
            angles.push([az, el]);
        }
    }
    Ok(RayBundle {
        directions,
        angles,
        fov: [fov[0], if axes == 2 { fov[1] } else { 0.0 }],
        dims: pose.dims(),
    })
}

/// What terminated a ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Struck {
    /// Nothing within range; terminal at `d_max`.
    Nothing,
    /// Obstacle sphere or obstacle box, by index in its list.
    Obstacle(usize),
    /// The solid body of the target (not a coordinate of interest).
    TargetBody,
    /// Target coordinate by index.
    Target(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaycastHit {
    pub ray: usize,
    pub terminal: Vec3,
    pub distance: f64,
    pub struck: Struck,
}

impl RaycastHit {
    /// Target flag `y_s`.
    pub fn is_target(&self) -> bool {
        matches!(self.struck, Struck::Target(_))
    }

    pub fn label(&self) -> f64 {
        if self.is_target() {
            1.0
        } else {
            0.0
        }
    }
}

/// Distance along `u` at which the ray first enters the sphere around
/// `center`, following the closest-approach / half-chord construction.
/// Centres at or behind the origin (`d_z <= 0`) are ignored; an origin inside
/// a sphere ahead of it intersects at distance 0.
#[inline]
pub fn sphere_entry(origin: &Vec3, u: &Vec3, center: &Vec3, c_r: f64) -> Option<f64> {
    let d_z = (center - origin).dot(u);
    if d_z <= 0.0 {
        return None;
    }
    let closest = origin + u * d_z;
    let d_center_sq = (closest - center).norm_squared();
    let r_sq = c_r * c_r;
    if d_center_sq >= r_sq {
        return None;
    }
    let chord = (r_sq - d_center_sq).sqrt();
    Some((d_z - chord).max(0.0))
}

fn check_unit(u: &Vec3) -> Result<()> {
    if (u.norm() - 1.0).abs() >= UNIT_TOLERANCE {
        return Err(Error::invalid(format!(
            "ray direction has norm {}, expected 1",
            u.norm()
        )));
    }
    Ok(())
}

/// Casts one ray against a set of spheres of radius `c_r`, keeping the
/// nearest intersection (ties go to the lowest index). `is_target` decides
/// whether a winning sphere is a target coordinate.
pub fn cast_ray(
    origin: &Vec3,
    u: &Vec3,
    d_max: f64,
    spheres: &[Vec3],
    c_r: f64,
    is_target: impl Fn(usize) -> bool,
) -> Result<RaycastHit> {
    check_unit(u)?;
    if !(c_r > 0.0) {
        return Err(Error::invalid("sphere radius must be positive"));
    }
    let mut d_terminal = d_max;
    let mut struck = Struck::Nothing;
    for (i, z) in spheres.iter().enumerate() {
        if let Some(d) = sphere_entry(origin, u, z, c_r) {
            if d < d_terminal {
                d_terminal = d;
                struck = if is_target(i) {
                    Struck::Target(i)
                } else {
                    Struck::Obstacle(i)
                };
            }
        }
    }
    Ok(RaycastHit {
        ray: 0,
        terminal: origin + u * d_terminal,
        distance: d_terminal,
        struck,
    })
}

/// Casts a bundle against obstacle coordinates and target coordinates sharing
/// one sphere radius. Obstacles are tested first, so they win exact ties.
pub fn cast_bundle(
    pose: &Pose,
    bundle: &RayBundle,
    obstacles: &[Vec3],
    targets: &[Vec3],
    d_max: f64,
    c_r: f64,
) -> Result<Vec<RaycastHit>> {
    Scene {
        targets,
        target_radius: c_r,
        obstacles,
        obstacle_radius: c_r,
        boxes: &[],
    }
    .cast_bundle(pose, bundle, d_max)
}

/// An exact box in a [`Scene`], with what it reports when struck.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneBox {
    pub aabb: Aabb,
    pub kind: Struck,
}

/// Geometry a bundle is cast against.
#[derive(Debug, Clone, Copy)]
pub struct Scene<'a> {
    pub targets: &'a [Vec3],
    pub target_radius: f64,
    pub obstacles: &'a [Vec3],
    pub obstacle_radius: f64,
    pub boxes: &'a [SceneBox],
}

impl Scene<'_> {
    pub fn cast_bundle(
        &self,
        pose: &Pose,
        bundle: &RayBundle,
        d_max: f64,
    ) -> Result<Vec<RaycastHit>> {
        if !(self.target_radius > 0.0) || !(self.obstacle_radius > 0.0) {
            return Err(Error::invalid("sphere radius must be positive"));
        }
        let origin = pose.position;
        let axis = pose.axis();
        let cone = bundle.min_axis_cosine(&axis).clamp(-1.0, 1.0).acos();
        let obstacles = cull(
            &origin,
            &axis,
            cone,
            d_max,
            self.obstacles,
            self.obstacle_radius,
        );
        let targets = cull(
            &origin,
            &axis,
            cone,
            d_max,
            self.targets,
            self.target_radius,
        );

        let mut hits = Vec::with_capacity(bundle.len());
        for (ray, u) in bundle.directions.iter().enumerate() {
            check_unit(u)?;
            let mut d_terminal = d_max;
            let mut struck = Struck::Nothing;
            let mut nearest =
                |spheres: &[(f64, usize)], centers: &[Vec3], r: f64, kind: fn(usize) -> Struck| {
                    let mut best: Option<usize> = None;
                    for &(bound, i) in spheres {
                        if bound > d_terminal {
                            break;
                        }
                        if let Some(d) = sphere_entry(&origin, u, &centers[i], r) {
                            if d < d_terminal || (d == d_terminal && best.is_some_and(|b| i < b)) {
                                d_terminal = d;
                                best = Some(i);
                            }
                        }
                    }
                    if let Some(i) = best {
                        struck = kind(i);
                    }
                };
            nearest(
                &obstacles,
                self.obstacles,
                self.obstacle_radius,
                Struck::Obstacle,
            );
            nearest(&targets, self.targets, self.target_radius, Struck::Target);
            for b in self.boxes {
                if let Some(d) = b.aabb.ray_entry(&origin, u, d_terminal) {
                    if d < d_terminal {
                        d_terminal = d;
                        struck = b.kind;
                    }
                }
            }
            hits.push(RaycastHit {
                ray,
                terminal: origin + u * d_terminal,
                distance: d_terminal,
                struck,
            });
        }
        Ok(hits)
    }
}

/// Spheres that some ray of the bundle could reach (within range and inside
/// the bundle's cone widened by the sphere's angular radius), as pairs of a
/// lower bound on the entry distance and the index, nearest first.
fn cull(
    origin: &Vec3,
    axis: &Vec3,
    cone: f64,
    d_max: f64,
    centers: &[Vec3],
    r: f64,
) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = centers
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let to = c - origin;
            let dist = to.norm();
            if dist > d_max + r {
                return None;
            }
            if dist > r {
                let angle = (to.dot(axis) / dist).clamp(-1.0, 1.0).acos();
                if angle > cone + (r / dist).asin() + 1e-9 {
                    return None;
                }
            }
            Some(((dist - r).max(0.0), i))
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn planar_pose(x: f64, y: f64, axis: Vec3) -> Pose {
        Pose::new(Vec3::new(x, y, 0.0), axis, Vec3::z(), 2).unwrap()
    }

    #[test]
    fn planar_bundle_angles_span_fov() {
        let pose = planar_pose(0.0, 0.0, Vec3::x());
        let b = generate_ray_bundle(&pose, &[FRAC_PI_2], &[3]).unwrap();
        let az: Vec<f64> = b.angles.iter().map(|a| a[0]).collect();
        assert!((az[0] + FRAC_PI_4).abs() < 1e-15);
        assert_eq!(az[1], 0.0);
        assert!((az[2] - FRAC_PI_4).abs() < 1e-15);
        assert!(
            (b.directions[2] - Vec3::new(FRAC_PI_4.cos(), FRAC_PI_4.sin(), 0.0)).norm() < 1e-12
        );
    }

    #[test]
    fn spatial_bundle_is_a_grid_of_unit_vectors() {
        let pose = Pose::look_at(Vec3::zeros(), Vec3::new(1.0, 2.0, 0.5), 3).unwrap();
        let b = generate_ray_bundle(&pose, &[FRAC_PI_2, FRAC_PI_2], &[3, 3]).unwrap();
        assert_eq!(b.len(), 9);
        for (d, a) in b.directions.iter().zip(&b.angles) {
            assert!((d.norm() - 1.0).abs() < 1e-9);
            assert!(a[0].abs() <= FRAC_PI_4 + 1e-12 && a[1].abs() <= FRAC_PI_4 + 1e-12);
        }
        // centre ray is the optical axis
        assert!((b.directions[4] - pose.axis()).norm() < 1e-12);
    }

    #[test]
    fn bundle_rejects_bad_arguments() {
        let pose = planar_pose(0.0, 0.0, Vec3::x());
        assert!(generate_ray_bundle(&pose, &[FRAC_PI_2], &[0]).is_err());
        assert!(generate_ray_bundle(&pose, &[0.0], &[3]).is_err());
        assert!(generate_ray_bundle(&pose, &[4.0], &[3]).is_err());
    }

    #[test]
    fn single_offset_sphere_matches_hand_geometry() {
        let z = [Vec3::new(10.0, 0.5, 0.0)];
        let hit = cast_ray(&Vec3::zeros(), &Vec3::x(), 25.0, &z, 1.0, |_| true).unwrap();
        let expected = 10.0 - (1.0f64 - 0.25).sqrt();
        assert!((hit.distance - expected).abs() < 1e-12);
        assert!((hit.terminal - Vec3::new(expected, 0.0, 0.0)).norm() < 1e-12);
        assert!(hit.is_target());
        assert!((hit.terminal.x - 9.1340).abs() < 1e-4);
    }

    #[test]
    fn sphere_behind_or_beside_is_missed() {
        let behind = [Vec3::new(-5.0, 0.0, 0.0)];
        let hit = cast_ray(&Vec3::zeros(), &Vec3::x(), 25.0, &behind, 1.0, |_| true).unwrap();
        assert_eq!(hit.struck, Struck::Nothing);
        assert_eq!(hit.terminal, Vec3::new(25.0, 0.0, 0.0));

        let beside = [Vec3::new(10.0, 2.0, 0.0)];
        let hit = cast_ray(&Vec3::zeros(), &Vec3::x(), 25.0, &beside, 1.0, |_| true).unwrap();
        assert_eq!(hit.struck, Struck::Nothing);
        assert_eq!(hit.distance, 25.0);
    }

    #[test]
    fn non_unit_direction_is_rejected() {
        let r = cast_ray(
            &Vec3::zeros(),
            &Vec3::new(2.0, 0.0, 0.0),
            25.0,
            &[],
            1.0,
            |_| false,
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn obstacle_in_front_of_target_wins() {
        let pose = planar_pose(0.0, 0.0, Vec3::x());
        let bundle = generate_ray_bundle(&pose, &[FRAC_PI_2], &[3]).unwrap();
        let obstacles = [Vec3::new(5.0, 0.0, 0.0)];
        let targets = [Vec3::new(10.0, 0.0, 0.0)];
        let hits = cast_bundle(&pose, &bundle, &obstacles, &targets, 25.0, 1.0).unwrap();
        assert_eq!(hits[1].struck, Struck::Obstacle(0));
        assert!((hits[1].distance - 4.0).abs() < 1e-12);
        assert!(hits.iter().all(|h| !h.is_target()));
    }

    #[test]
    fn on_axis_target_terminates_one_radius_short() {
        let pose = planar_pose(0.0, 0.0, Vec3::x());
        let bundle = generate_ray_bundle(&pose, &[FRAC_PI_2], &[3]).unwrap();
        let hits =
            cast_bundle(&pose, &bundle, &[], &[Vec3::new(10.0, 0.0, 0.0)], 25.0, 1.0).unwrap();
        assert!(hits[1].is_target());
        assert!((hits[1].distance - 9.0).abs() < 1e-12);
        assert_eq!(hits[0].struck, Struck::Nothing);
    }

    #[test]
    fn bundle_matches_single_ray_casts() {
        let pose = Pose::look_at(Vec3::new(-8.0, 1.0, 2.0), Vec3::new(1.0, 0.1, -0.05), 3).unwrap();
        let bundle = generate_ray_bundle(&pose, &[1.2, 1.0], &[15, 13]).unwrap();
        let mut targets: Vec<Vec3> = (0..12)
            .flat_map(|i| {
                (0..10)
                    .map(move |j| Vec3::new(i as f64 * 0.9, j as f64 - 4.0, 0.3 * i as f64 - 1.0))
            })
            .collect();
        targets.push(targets[40]);
        targets.push(targets[7]);
        let hits = cast_bundle(&pose, &bundle, &[], &targets, 25.0, 0.7).unwrap();
        for (h, u) in hits.iter().zip(&bundle.directions) {
            let one = cast_ray(&pose.position, u, 25.0, &targets, 0.7, |_| true).unwrap();
            assert_eq!(h.struck, one.struck);
            assert_eq!(h.distance, one.distance);
        }
        assert!(hits.iter().any(|h| h.is_target()));
        assert!(hits
            .iter()
            .all(|h| !matches!(h.struck, Struck::Target(i) if i >= 120)));
    }

    #[test]
    fn empty_scene_reaches_max_range() {
        let pose = planar_pose(1.0, 2.0, Vec3::y());
        let bundle = generate_ray_bundle(&pose, &[FRAC_PI_2], &[61]).unwrap();
        let hits = cast_bundle(&pose, &bundle, &[], &[], 25.0, 0.75).unwrap();
        assert!(hits
            .iter()
            .all(|h| h.struck == Struck::Nothing && h.distance == 25.0));
    }

    #[test]
    fn boxes_occlude_spheres() {
        let pose = planar_pose(0.0, 0.0, Vec3::x());
        let bundle = generate_ray_bundle(&pose, &[FRAC_PI_2], &[1]).unwrap();
        let boxes = [SceneBox {
            aabb: Aabb::from_center_half(Vec3::new(5.0, 0.0, 0.0), Vec3::new(0.5, 0.5, 0.5)),
            kind: Struck::Obstacle(0),
        }];
        let targets = [Vec3::new(10.0, 0.0, 0.0)];
        let scene = Scene {
            targets: &targets,
            target_radius: 0.75,
            obstacles: &[],
            obstacle_radius: 0.75,
            boxes: &boxes,
        };
        let hits = scene.cast_bundle(&pose, &bundle, 25.0).unwrap();
        assert_eq!(hits[0].struck, Struck::Obstacle(0));
        assert!((hits[0].distance - 4.5).abs() < 1e-12);
    }
}
