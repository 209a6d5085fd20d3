use photoplan::raycast::{Pose, RaycastHit, Struck};
use photoplan::scenario::Scenario;
use photoplan::world::{simulate_depth_sensor, LogOddsParams, OccupancyGrid, Workspace};
use photoplan::Vec3;
use proptest::prelude::*;

fn grid(params: LogOddsParams) -> OccupancyGrid {
    OccupancyGrid::new(
        Workspace::new(2, &[0.0, 0.0], &[12.0, 12.0], 1.0).unwrap(),
        params,
    )
}

fn scan_from(origin: Vec3, ends: &[(f64, f64, bool)]) -> (Pose, Vec<RaycastHit>) {
    let pose = Pose::new(origin, Vec3::x(), Vec3::z(), 2).unwrap();
    let hits = ends
        .iter()
        .enumerate()
        .map(|(ray, &(x, y, hit))| {
            let terminal = Vec3::new(x, y, 0.0);
            RaycastHit {
                ray,
                terminal,
                distance: (terminal - origin).norm(),
                struck: if hit {
                    Struck::Obstacle(0)
                } else {
                    Struck::Nothing
                },
            }
        })
        .collect();
    (pose, hits)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_odds_stay_clamped(
        scans in prop::collection::vec(
            (0.5f64..11.5, 0.5f64..11.5, prop::collection::vec((0.01f64..11.99, 0.01f64..11.99, any::<bool>()), 1..12)),
            1..15,
        ),
        l_hit in 0.1f64..3.0,
        l_miss in -3.0f64..-0.1,
    ) {
        let params = LogOddsParams { l_hit, l_miss, l_min: -2.0, l_max: 3.5 };
        let mut g = grid(params);
        for (x, y, ends) in &scans {
            let (pose, hits) = scan_from(Vec3::new(*x, *y, 0.0), ends);
            g.integrate_depth_scan(&pose, &hits).unwrap();
            prop_assert!(g.min_log_odds() >= params.l_min);
            prop_assert!(g.max_log_odds() <= params.l_max);
        }
    }

    #[test]
    fn grid_evolution_is_deterministic(
        scans in prop::collection::vec(
            (0.5f64..11.5, 0.5f64..11.5, prop::collection::vec((0.01f64..11.99, 0.01f64..11.99, any::<bool>()), 1..8)),
            1..6,
        ),
    ) {
        let mut a = grid(LogOddsParams::default());
        let mut b = grid(LogOddsParams::default());
        for (x, y, ends) in &scans {
            let (pose, hits) = scan_from(Vec3::new(*x, *y, 0.0), ends);
            a.integrate_depth_scan(&pose, &hits).unwrap();
            b.integrate_depth_scan(&pose, &hits).unwrap();
        }
        prop_assert_eq!(a.raw_cells(), b.raw_cells());
    }
}

#[test]
fn saturated_hits_commute() {
    let (pose, hits) = scan_from(Vec3::new(1.5, 5.5, 0.0), &[(8.5, 5.5, true)]);
    let mut once = grid(LogOddsParams::default());
    once.set_log_odds([8, 5, 0], 3.5).unwrap();
    let mut twice = once.clone();
    once.integrate_depth_scan(&pose, &hits).unwrap();
    twice.integrate_depth_scan(&pose, &hits).unwrap();
    twice.integrate_depth_scan(&pose, &hits).unwrap();
    assert_eq!(once.log_odds([8, 5, 0]).unwrap(), 3.5);
    assert_eq!(twice.log_odds([8, 5, 0]).unwrap(), 3.5);
}

/// Marches from the sensor to each target-hit terminal and checks that no
/// true obstacle lies on the way.
fn assert_sensor_sound(scenario: &Scenario, poses: &[Pose]) -> usize {
    let mut checked = 0;
    for pose in poses {
        let hits = simulate_depth_sensor(scenario, pose).unwrap();
        for h in hits.iter().filter(|h| h.is_target()) {
            let steps = (h.distance / 0.02).ceil() as usize;
            for k in 0..steps {
                let p = pose.position + (h.terminal - pose.position) * (k as f64 / steps as f64);
                for o in &scenario.obstacles {
                    assert!(
                        !o.aabb().contains_strict(&p),
                        "target hit at {:?} seen through an obstacle from {:?}",
                        h.terminal,
                        pose.position
                    );
                }
            }
            checked += 1;
        }
    }
    checked
}

#[test]
fn sensor_never_sees_through_obstacles() {
    let s = Scenario::bundled("one_obstacle_2d").unwrap();
    let center = s.target.body().center();
    let poses: Vec<Pose> = (0..40)
        .map(|i| Vec3::new(25.0 + i as f64 * 1.25, 30.0 + (i % 5) as f64, 0.0))
        .filter(|p| !s.collides_truly(p))
        .map(|p| Pose::look_at(p, center, 2).unwrap())
        .collect();
    assert!(assert_sensor_sound(&s, &poses) > 100);

    let s = Scenario::bundled("slab_3d").unwrap();
    let center = s.target.body().center();
    let poses: Vec<Pose> = (0..12)
        .map(|i| Vec3::new(8.0 + i as f64, 4.0, 2.0 + (i % 4) as f64 * 2.0))
        .filter(|p| !s.collides_truly(p))
        .map(|p| Pose::look_at(p, center, 3).unwrap())
        .collect();
    assert!(assert_sensor_sound(&s, &poses) > 10);
}
