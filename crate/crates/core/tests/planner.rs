use petgraph::algo::dijkstra;
use petgraph::graph::UnGraph;
use photoplan::geometry::Aabb;
use photoplan::planner::{astar_raw, cell_neighbors, plan_grid_astar, plan_rrt_star, RrtConfig};
use photoplan::world::{CollisionChecker, LogOddsParams, OccupancyGrid, Workspace};
use photoplan::Vec3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_grid(seed: u64, density: f64) -> OccupancyGrid {
    let ws = Workspace::new(2, &[0.0, 0.0], &[20.0, 20.0], 1.0).unwrap();
    let mut grid = OccupancyGrid::new(ws, LogOddsParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for y in 0..20 {
        for x in 0..20 {
            if (x, y) != (0, 0) && (x, y) != (19, 19) && rng.gen::<f64>() < density {
                grid.set_log_odds([x, y, 0], 2.0).unwrap();
            }
        }
    }
    grid
}

/// Shortest path length over the same cell graph, by Dijkstra.
fn dijkstra_length(
    checker: &CollisionChecker<'_>,
    start: [usize; 3],
    goal: [usize; 3],
) -> Option<f64> {
    let ws = checker.grid().workspace();
    let shape = ws.shape();
    let index = |c: [usize; 3]| c[1] * shape[0] + c[0];
    let mut g = UnGraph::<(), f64>::new_undirected();
    let nodes: Vec<_> = (0..shape[0] * shape[1]).map(|_| g.add_node(())).collect();
    for y in 0..shape[1] {
        for x in 0..shape[0] {
            let c = [x, y, 0];
            let p = ws.cell_center(c);
            if !checker.is_free(&p) {
                continue;
            }
            for n in cell_neighbors(shape, c) {
                let q = ws.cell_center(n);
                if index(n) > index(c) && checker.is_free(&q) && checker.segment_free(&p, &q) {
                    g.add_edge(nodes[index(c)], nodes[index(n)], (q - p).norm());
                }
            }
        }
    }
    let dist = dijkstra(&g, nodes[index(start)], Some(nodes[index(goal)]), |e| {
        *e.weight()
    });
    dist.get(&nodes[index(goal)]).copied()
}

#[test]
fn astar_matches_dijkstra_on_random_grids() {
    let mut solved = 0;
    for seed in 0..40 {
        let grid = random_grid(seed, 0.25);
        let checker = CollisionChecker::new(&grid, 0.3);
        let ws = grid.workspace();
        let (s, t) = (ws.cell_center([0, 0, 0]), ws.cell_center([19, 19, 0]));
        let reference = dijkstra_length(&checker, [0, 0, 0], [19, 19, 0]);
        match (astar_raw(&checker, &s, &t), reference) {
            (Ok(path), Some(d)) => {
                assert!(
                    (path.length() - d).abs() <= 1e-9,
                    "seed {seed}: {} vs {d}",
                    path.length()
                );
                assert!(path.is_free(&checker));
                solved += 1;
            }
            (Err(_), None) => {}
            (a, b) => panic!(
                "seed {seed}: A* {:?}, Dijkstra {b:?}",
                a.map(|p| p.length())
            ),
        }
    }
    assert!(solved >= 10);
}

#[test]
fn rrt_star_approaches_the_straight_line() {
    let ws = Workspace::new(3, &[0.0, 0.0, 0.0], &[20.0, 20.0, 20.0], 1.0).unwrap();
    let grid = OccupancyGrid::new(ws, LogOddsParams::default());
    let checker = CollisionChecker::new(&grid, 0.5);
    let (s, t) = (Vec3::new(2.0, 2.0, 2.0), Vec3::new(18.0, 17.0, 16.0));
    let straight = (t - s).norm();
    let good = (0..100u64)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            plan_rrt_star(&checker, &s, &t, &RrtConfig::default(), &mut rng)
                .is_ok_and(|p| p.length() <= 1.1 * straight)
        })
        .count();
    assert!(good >= 90, "{good}/100 within 10%");
}

#[test]
fn slab_with_a_hole_is_crossed_safely() {
    let ws = Workspace::new(3, &[0.0, 0.0, 0.0], &[20.0, 20.0, 12.0], 1.0).unwrap();
    let mut grid = OccupancyGrid::new(ws, LogOddsParams::default());
    grid.rasterize_box(&Aabb::new(
        Vec3::new(0.0, 9.0, 0.0),
        Vec3::new(20.0, 10.0, 12.0),
    ));
    for x in 8..11 {
        for z in 4..7 {
            grid.set_log_odds([x, 9, z], -1.0).unwrap();
        }
    }
    let checker = CollisionChecker::new(&grid, 0.4);
    let (s, t) = (Vec3::new(3.5, 2.5, 2.5), Vec3::new(15.5, 17.5, 8.5));
    let path = plan_grid_astar(&checker, &s, &t).unwrap();
    assert!(path.is_free(&checker));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rrt = plan_rrt_star(&checker, &s, &t, &RrtConfig::default(), &mut rng).unwrap();
    assert!(rrt.is_free(&checker));
    for w in rrt
        .waypoints()
        .windows(2)
        .chain(path.waypoints().windows(2))
    {
        let n = ((w[1] - w[0]).norm() / 0.05).ceil() as usize;
        for k in 0..=n {
            let p = w[0] + (w[1] - w[0]) * (k as f64 / n.max(1) as f64);
            if (9.0..10.0).contains(&p.y) {
                assert!(
                    p.x > 8.0 && p.x < 11.0 && p.z > 4.0 && p.z < 7.0,
                    "{p:?} not in the hole"
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn replanning_from_a_waypoint_keeps_the_remainder(seed in 0u64..1000) {
        let grid = random_grid(seed, 0.2);
        let checker = CollisionChecker::new(&grid, 0.3);
        let ws = grid.workspace();
        let (s, t) = (ws.cell_center([0, 0, 0]), ws.cell_center([19, 19, 0]));
        if let Ok(path) = astar_raw(&checker, &s, &t) {
            let mut travelled = 0.0;
            for w in path.waypoints().windows(2) {
                travelled += (w[1] - w[0]).norm();
                let rest = astar_raw(&checker, &w[1], &t).unwrap();
                prop_assert!((rest.length() - (path.length() - travelled)).abs() <= 1e-9);
            }
            let smooth = plan_grid_astar(&checker, &s, &t).unwrap();
            prop_assert!(smooth.is_free(&checker));
            prop_assert!(smooth.length() <= path.length() + 1e-9);
        }
    }

    #[test]
    fn grid_paths_stay_clear(seed in 0u64..1000, gx in 10usize..20, gy in 10usize..20) {
        let grid = random_grid(seed, 0.15);
        let checker = CollisionChecker::new(&grid, 0.3);
        let ws = grid.workspace();
        let t = ws.cell_center([gx, gy, 0]);
        if let Ok(path) = plan_grid_astar(&checker, &ws.cell_center([0, 0, 0]), &t) {
            prop_assert!(path.is_free(&checker));
            prop_assert_eq!(path.goal(), t);
        }
    }
}
