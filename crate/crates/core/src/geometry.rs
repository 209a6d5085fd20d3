//! Axis-aligned boxes and small vector helpers shared by the grid and the
//! ray caster.

use serde::{Deserialize, Serialize};

use crate::Vec3;

/// Half-thickness given to planar boxes along `z` so that in-plane rays
/// (which all have `z = 0`) intersect them.
pub const PLANAR_HALF_THICKNESS: f64 = 0.5;

/// Builds a point from 2 or 3 components, padding `z` with zero.
pub fn point(components: &[f64]) -> Vec3 {
    Vec3::new(
        components.first().copied().unwrap_or(0.0),
        components.get(1).copied().unwrap_or(0.0),
        components.get(2).copied().unwrap_or(0.0),
    )
}

pub fn to_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn from_center_half(center: Vec3, half: Vec3) -> Self {
        Self {
            min: center - half,
            max: center + half,
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Closed containment.
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Strict interior containment.
    pub fn contains_strict(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] > self.min[i] && p[i] < self.max[i])
    }

    pub fn distance_to(&self, p: &Vec3) -> f64 {
        let mut sq = 0.0;
        for i in 0..3 {
            let d = (self.min[i] - p[i]).max(0.0).max(p[i] - self.max[i]);
            sq += d * d;
        }
        sq.sqrt()
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] < other.max[i] && other.min[i] < self.max[i])
    }

    /// Parametric interval `[t0, t1]` where `origin + t * dir` is inside the
    /// box, or `None` when the line misses it.
    pub fn slab_interval(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i].abs() < 1e-300 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let (mut a, mut b) = (
                (self.min[i] - origin[i]) * inv,
                (self.max[i] - origin[i]) * inv,
            );
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }

    /// Distance along a unit ray to the first point inside the box, if it is
    /// reached before `max_distance`. An origin inside the box yields 0.
    pub fn ray_entry(&self, origin: &Vec3, dir: &Vec3, max_distance: f64) -> Option<f64> {
        let (t0, t1) = self.slab_interval(origin, dir)?;
        if t1 < 0.0 {
            return None;
        }
        let t = t0.max(0.0);
        (t < max_distance).then_some(t)
    }

    /// Portion of the segment `a -> b` inside the box, as parameters in [0, 1].
    pub fn clip_segment(&self, a: &Vec3, b: &Vec3) -> Option<(f64, f64)> {
        let (t0, t1) = self.slab_interval(a, &(b - a))?;
        let (t0, t1) = (t0.max(0.0), t1.min(1.0));
        (t0 <= t1).then_some((t0, t1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_entry_hits_front_face() {
        let b = Aabb::from_center_half(Vec3::new(5.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0));
        let d = b.ray_entry(&Vec3::zeros(), &Vec3::x(), 25.0).unwrap();
        assert!((d - 4.0).abs() < 1e-12);
        assert!(b.ray_entry(&Vec3::zeros(), &-Vec3::x(), 25.0).is_none());
        assert!(b.ray_entry(&Vec3::zeros(), &Vec3::x(), 3.0).is_none());
        assert_eq!(
            b.ray_entry(&Vec3::new(5.0, 0.0, 0.0), &Vec3::y(), 25.0),
            Some(0.0)
        );
    }

    #[test]
    fn distance_and_clip() {
        let b = Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(b.distance_to(&Vec3::new(0.5, 0.5, 0.5)), 0.0);
        assert!((b.distance_to(&Vec3::new(2.0, 0.5, 0.5)) - 1.0).abs() < 1e-12);
        let (t0, t1) = b
            .clip_segment(&Vec3::new(-1.0, 0.5, 0.5), &Vec3::new(3.0, 0.5, 0.5))
            .unwrap();
        assert!((t0 - 0.25).abs() < 1e-12 && (t1 - 0.5).abs() < 1e-12);
    }
}
