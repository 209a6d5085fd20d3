use nalgebra::{DMatrix, DVector};
use photoplan::coverage::{
    commit_capture, expected_gain, posterior_mean, posterior_mean_with_prior, rbf_kernel,
    CoverageField, GpModel,
};
use photoplan::raycast::{generate_ray_bundle, Pose, RaycastHit, Struck};
use photoplan::scenario::Scenario;
use photoplan::world::true_scene_boxes;
use photoplan::Vec3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn direct_mean(x: &[Vec3], xs: &[Vec3], ys: &[f64], gp: &GpModel) -> DVector<f64> {
    let n = xs.len();
    let k = rbf_kernel(xs, xs, gp) + DMatrix::identity(n, n) * gp.sigma_n.powi(2);
    let inv = k.try_inverse().unwrap();
    let mut mu = rbf_kernel(x, xs, gp) * inv * DVector::from_column_slice(ys);
    mu.apply(|v| *v = v.clamp(0.0, 1.0));
    mu
}

fn head_on(s: &Scenario) -> Vec3 {
    let body = s.target.body();
    Vec3::new(body.center().x, body.min.y - 20.65, 0.0)
}

fn photo(s: &Scenario, at: Vec3) -> Vec<RaycastHit> {
    let pose = Pose::look_at(at, s.target.body().center(), s.dims()).unwrap();
    let bundle = generate_ray_bundle(&pose, &s.camera.fov, &s.camera.capture_rays).unwrap();
    let boxes = true_scene_boxes(s);
    s.true_scene(&boxes)
        .cast_bundle(&pose, &bundle, s.sensor.range)
        .unwrap()
}

#[test]
fn posterior_matches_direct_inverse() {
    let gp = GpModel::for_spacing(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [1, 7, 40, 200] {
        let xs: Vec<Vec3> = (0..n)
            .map(|_| Vec3::new(rng.gen_range(0.0..30.0), rng.gen_range(0.0..10.0), 0.0))
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
        let x: Vec<Vec3> = (0..60)
            .map(|i| Vec3::new(i as f64 * 0.5, 5.0, 0.0))
            .collect();
        let fast = posterior_mean(&x, &xs, &ys, &gp).unwrap();
        let slow = direct_mean(&x, &xs, &ys, &gp);
        assert!((fast - slow).amax() <= 1e-8, "n = {n}");
    }
}

#[test]
fn all_zero_labels_give_no_gain() {
    let s = Scenario::bundled("free_space_2d").unwrap();
    let field = CoverageField::new(s.target.len());
    let hits: Vec<RaycastHit> = photo(&s, head_on(&s))
        .into_iter()
        .map(|mut h| {
            h.struck = Struck::Nothing;
            h
        })
        .collect();
    assert_eq!(expected_gain(&field, &hits, &s.gp, &s.target).unwrap(), 0.0);
}

#[test]
fn fully_captured_field_has_no_gain() {
    let s = Scenario::bundled("free_space_2d").unwrap();
    let field = CoverageField::with_prior(vec![1.0; s.target.len()]);
    let hits = photo(&s, head_on(&s));
    assert_eq!(expected_gain(&field, &hits, &s.gp, &s.target).unwrap(), 0.0);
}

#[test]
fn head_on_view_of_an_isolated_face_gains_nearly_everything() {
    let s = Scenario::bundled("free_space_2d").unwrap();
    let m = s.target.len() as f64;
    let field = CoverageField::new(s.target.len());
    let gain = expected_gain(&field, &photo(&s, head_on(&s)), &s.gp, &s.target).unwrap();
    assert!(gain >= 0.9 * m && gain <= m, "gain {gain} of {m}");
}

#[test]
fn one_free_space_photo_covers_the_face() {
    let s = Scenario::bundled("free_space_2d").unwrap();
    let mut field = CoverageField::new(s.target.len());
    commit_capture(&mut field, &photo(&s, head_on(&s)), &s.gp, &s.target).unwrap();
    assert!(field.mean() >= 0.9, "mean {}", field.mean());
}

#[test]
fn the_shadowed_half_stays_uncaptured() {
    let mut s = Scenario::bundled("free_space_2d").unwrap();
    let body = s.target.body();
    let face_y = body.min.y;
    let left = body.min.x;
    let mid = body.center().x;
    s.obstacles.push(
        photoplan::world::BoxObstacle::planar(
            [(left + mid) / 2.0, face_y - 3.0],
            [(mid - left) / 2.0 + 1.0, 0.5],
        )
        .unwrap(),
    );
    s.known.push(true);
    let mut field = CoverageField::new(s.target.len());
    let at = Vec3::new(mid, face_y - 20.0, 0.0);
    commit_capture(&mut field, &photo(&s, at), &s.gp, &s.target).unwrap();
    let shadowed: Vec<f64> = s
        .target
        .coords()
        .iter()
        .zip(field.mu())
        .filter(|(z, _)| z.x < mid - 3.0)
        .map(|(_, m)| *m)
        .collect();
    assert!(!shadowed.is_empty());
    let mean = shadowed.iter().sum::<f64>() / shadowed.len() as f64;
    assert!(mean < 0.5, "shadowed mean {mean}");
}

#[test]
fn filtered_gain_matches_the_full_solve() {
    let s = Scenario::bundled("one_obstacle_2d").unwrap();
    let mu: Vec<f64> = (0..s.target.len())
        .map(|j| if j % 4 == 0 { 0.6 } else { 0.0 })
        .collect();
    let field = CoverageField::with_prior(mu.clone());
    for at in [
        Vec3::new(50.0, 33.0, 0.0),
        Vec3::new(64.0, 36.0, 0.0),
        Vec3::new(40.0, 25.0, 0.0),
    ] {
        let pose = Pose::look_at(at, s.target.body().center(), 2).unwrap();
        let bundle = generate_ray_bundle(&pose, &s.camera.fov, &[181]).unwrap();
        let boxes = true_scene_boxes(&s);
        let hits = s
            .true_scene(&boxes)
            .cast_bundle(&pose, &bundle, s.sensor.range)
            .unwrap();
        let fast = expected_gain(&field, &hits, &s.gp, &s.target).unwrap();
        let xs: Vec<Vec3> = hits.iter().map(|h| h.terminal).collect();
        let ys: Vec<f64> = hits.iter().map(|h| h.label()).collect();
        let ps: Vec<f64> = hits
            .iter()
            .map(|h| match h.struck {
                Struck::Target(j) => mu[j],
                _ => 0.0,
            })
            .collect();
        let post = posterior_mean_with_prior(s.target.coords(), &mu, &xs, &ys, &ps, &s.gp).unwrap();
        let full: f64 = post.iter().zip(&mu).map(|(p, m)| (p - m).max(0.0)).sum();
        assert!(
            (fast - full).abs() <= 1e-3 * full.max(1.0),
            "{at:?}: {fast} vs {full}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn captures_never_lower_the_belief(
        shots in prop::collection::vec((30.0f64..70.0, 15.0f64..32.0), 1..4),
    ) {
        let s = Scenario::bundled("one_obstacle_2d").unwrap();
        let mut field = CoverageField::new(s.target.len());
        for (x, y) in shots {
            let at = Vec3::new(x, y, 0.0);
            if s.collides_truly(&at) {
                continue;
            }
            let before = field.mu().to_vec();
            commit_capture(&mut field, &photo(&s, at), &s.gp, &s.target).unwrap();
            for (b, a) in before.iter().zip(field.mu()) {
                prop_assert!(a >= b);
                prop_assert!((0.0..=1.0).contains(a));
            }
        }
    }

    #[test]
    fn posterior_stays_in_unit_range(
        samples in prop::collection::vec((0.0f64..20.0, 0.0f64..20.0, any::<bool>()), 1..60),
        sigma_l in 0.5f64..5.0,
    ) {
        let gp = GpModel::new(1.0, sigma_l, 0.1);
        let xs: Vec<Vec3> = samples.iter().map(|(x, y, _)| Vec3::new(*x, *y, 0.0)).collect();
        let ys: Vec<f64> = samples.iter().map(|(_, _, b)| f64::from(u8::from(*b))).collect();
        let x: Vec<Vec3> = (0..100).map(|i| Vec3::new((i % 10) as f64 * 2.0, (i / 10) as f64 * 2.0, 0.0)).collect();
        let mu = posterior_mean(&x, &xs, &ys, &gp).unwrap();
        prop_assert!(mu.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
