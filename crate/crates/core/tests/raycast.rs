use std::f64::consts::FRAC_PI_2;

use photoplan::oracle::march_ray;
use photoplan::raycast::{cast_bundle, cast_ray, generate_ray_bundle, sphere_entry, Pose, Struck};
use photoplan::validate::{random_ray_configs, raycast_equivalence};
use photoplan::Vec3;
use proptest::prelude::*;

fn planar(v: (f64, f64)) -> Vec3 {
    Vec3::new(v.0, v.1, 0.0)
}

fn direction() -> impl Strategy<Value = Vec3> {
    (-std::f64::consts::PI..std::f64::consts::PI).prop_map(|a| Vec3::new(a.cos(), a.sin(), 0.0))
}

fn spheres(max: usize) -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0).prop_map(planar), 0..max)
}

#[test]
fn marching_oracle_agrees_on_1000_rays() {
    let check = raycast_equivalence(1000, 7);
    assert!(check.passed, "{}", check.line());
}

#[test]
fn oracle_agreement_on_the_validation_generator() {
    for c in random_ray_configs(300, 11) {
        let fast = cast_ray(&c.origin, &c.direction, c.d_max, &c.spheres, c.c_r, |_| {
            true
        })
        .unwrap();
        let slow = march_ray(
            &c.origin,
            &c.direction,
            c.d_max,
            &c.spheres,
            c.c_r,
            c.c_r / 10.0,
        );
        match slow {
            Some(d) => {
                assert!(fast.is_target());
                assert!((fast.distance - d).abs() <= c.c_r / 5.0);
            }
            None => assert_eq!(fast.struck, Struck::Nothing),
        }
    }
}

#[test]
fn obstacle_on_axis_at_five_meters() {
    let c_r = 0.75;
    let origin = Vec3::zeros();
    let obstacle = [Vec3::new(5.0, 0.0, 0.0)];
    let hit = cast_ray(&origin, &Vec3::x(), 25.0, &obstacle, c_r, |_| false).unwrap();
    assert_eq!(hit.struck, Struck::Obstacle(0));
    assert!(hit.distance < 5.0 + c_r);
    let marched = march_ray(&origin, &Vec3::x(), 25.0, &obstacle, c_r, c_r / 10.0).unwrap();
    assert!((hit.distance - marched).abs() <= c_r / 5.0);
}

#[test]
fn facing_away_reaches_max_range() {
    let pose = Pose::new(Vec3::zeros(), -Vec3::x(), Vec3::z(), 2).unwrap();
    let bundle = generate_ray_bundle(&pose, &[FRAC_PI_2], &[61]).unwrap();
    let targets: Vec<Vec3> = (0..10)
        .map(|i| Vec3::new(8.0, i as f64 - 5.0, 0.0))
        .collect();
    let hits = cast_bundle(&pose, &bundle, &[], &targets, 25.0, 0.75).unwrap();
    assert!(hits
        .iter()
        .all(|h| h.struck == Struck::Nothing && h.distance == 25.0));
}

#[test]
fn dense_bundle_hits_every_unoccluded_coordinate() {
    let pose = Pose::new(Vec3::zeros(), Vec3::y(), Vec3::z(), 2).unwrap();
    let bundle = generate_ray_bundle(&pose, &[FRAC_PI_2], &[721]).unwrap();
    let spacing = 1.0;
    let targets: Vec<Vec3> = (0..21)
        .map(|i| Vec3::new(i as f64 * spacing - 10.0, 15.0, 0.0))
        .collect();
    let hits = cast_bundle(&pose, &bundle, &[], &targets, 25.0, spacing).unwrap();
    for (j, z) in targets.iter().enumerate() {
        if (z.x / z.y).atan().abs() < FRAC_PI_2 / 2.0 {
            assert!(
                hits.iter().any(|h| h.struck == Struck::Target(j)),
                "coordinate {j} missed"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn nearest_intersection_wins(
        origin in (-5.0f64..5.0, -5.0f64..5.0).prop_map(planar),
        u in direction(),
        set in spheres(12),
        c_r in 0.3f64..2.0,
    ) {
        let hit = cast_ray(&origin, &u, 30.0, &set, c_r, |_| true).unwrap();
        let brute = set
            .iter()
            .filter_map(|z| sphere_entry(&origin, &u, z, c_r))
            .fold(30.0f64, f64::min);
        prop_assert_eq!(hit.distance, brute);
        if let Struck::Target(i) = hit.struck {
            prop_assert_eq!(sphere_entry(&origin, &u, &set[i], c_r), Some(brute));
            for z in &set[..i] {
                prop_assert_ne!(sphere_entry(&origin, &u, z, c_r), Some(brute));
            }
        }
    }

    #[test]
    fn adding_a_sphere_never_lengthens_a_ray(
        origin in (-5.0f64..5.0, -5.0f64..5.0).prop_map(planar),
        u in direction(),
        set in spheres(10),
        extra in (-20.0f64..20.0, -20.0f64..20.0).prop_map(planar),
        at in 0usize..11,
        c_r in 0.3f64..2.0,
    ) {
        let before = cast_ray(&origin, &u, 30.0, &set, c_r, |_| true).unwrap();
        let mut more = set.clone();
        more.insert(at.min(set.len()), extra);
        let after = cast_ray(&origin, &u, 30.0, &more, c_r, |_| true).unwrap();
        prop_assert!(after.distance <= before.distance);
    }

    #[test]
    fn bundle_terminals_respect_range_and_labels(
        x in -5.0f64..5.0,
        y in -5.0f64..5.0,
        heading in -3.0f64..3.0,
        targets in spheres(20),
        obstacles in spheres(6),
    ) {
        let c_r = 0.75;
        let pose = Pose::new(Vec3::new(x, y, 0.0), Vec3::new(heading.cos(), heading.sin(), 0.0), Vec3::z(), 2).unwrap();
        let bundle = generate_ray_bundle(&pose, &[FRAC_PI_2], &[31]).unwrap();
        let hits = cast_bundle(&pose, &bundle, &obstacles, &targets, 25.0, c_r).unwrap();
        for h in &hits {
            prop_assert!(h.distance <= 25.0 + c_r);
            if let Struck::Target(j) = h.struck {
                prop_assert!((h.terminal - targets[j]).norm() <= c_r + 1e-9);
            }
        }
    }
}
