//! Scenario documents.
//!
//! A scenario is a TOML file describing one photography task: workspace,
//! target, true obstacles, sensors and planner settings. Everything except
//! `[workspace]` and `[target]` has defaults; unknown keys are rejected.
//! See the repository README for the full schema.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coverage::{Face, GpModel, TargetModel};
use crate::geometry::{point, PLANAR_HALF_THICKNESS};
use crate::metric::UtilityParams;
use crate::mission::MissionConfig;
use crate::optimizer::SwarmConfig;
use crate::raycast::{Scene, SceneBox};
use crate::world::{BoxObstacle, LogOddsParams, OccupancyGrid, Workspace};
use crate::{Error, Result, Vec3};

/// Depth sensor used for mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub fov: Vec<f64>,
    pub range: f64,
    pub rays: Vec<usize>,
}

/// Photo camera. `eval_rays` is the sparse bundle used to score candidates,
/// `capture_rays` the dense bundle used when a photo is taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub fov: Vec<f64>,
    pub eval_rays: Vec<usize>,
    pub capture_rays: Vec<usize>,
}

impl CameraConfig {
    pub fn defaults(dims: usize) -> Self {
        if dims == 2 {
            Self {
                fov: vec![FRAC_PI_2],
                eval_rays: vec![61],
                capture_rays: vec![721],
            }
        } else {
            Self {
                fov: vec![FRAC_PI_2, FRAC_PI_2],
                eval_rays: vec![24, 24],
                capture_rays: vec![96, 96],
            }
        }
    }
}

impl SensorConfig {
    pub fn defaults(dims: usize) -> Self {
        if dims == 2 {
            Self {
                fov: vec![FRAC_PI_2],
                range: 25.0,
                rays: vec![61],
            }
        } else {
            Self {
                fov: vec![FRAC_PI_2, FRAC_PI_2],
                range: 25.0,
                rays: vec![24, 24],
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub workspace: Workspace,
    pub target: TargetModel,
    pub obstacles: Vec<BoxObstacle>,
    /// Obstacles already present in the initial believed map.
    pub known: Vec<bool>,
    pub start: Vec3,
    pub sensor: SensorConfig,
    pub camera: CameraConfig,
    pub utility: UtilityParams,
    pub gp: GpModel,
    /// `(sigma_f, sigma_l)` candidates; tuning runs after each photo when set.
    pub gp_tuning: Option<Vec<(f64, f64)>>,
    pub swarm: SwarmConfig,
    pub mission: MissionConfig,
    pub map: LogOddsParams,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    seed: Option<u64>,
    start: Option<Vec<f64>>,
    workspace: WorkspaceSpec,
    target: TargetSpec,
    #[serde(default)]
    obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    sensor: SensorSpec,
    #[serde(default)]
    camera: CameraSpec,
    #[serde(default)]
    utility: UtilitySpec,
    #[serde(default)]
    gp: GpSpec,
    #[serde(default)]
    pso: SwarmConfig,
    #[serde(default)]
    mission: MissionConfig,
    #[serde(default)]
    map: LogOddsParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkspaceSpec {
    dims: Option<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    resolution: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetSpec {
    center: Vec<f64>,
    size: Vec<f64>,
    faces: Option<Vec<Face>>,
    spacing: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleSpec {
    center: Vec<f64>,
    half_extents: Vec<f64>,
    #[serde(default)]
    known: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SensorSpec {
    fov: Option<Vec<f64>>,
    range: Option<f64>,
    rays: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraSpec {
    fov: Option<Vec<f64>>,
    beta: Option<f64>,
    eval_rays: Option<Vec<usize>>,
    capture_rays: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtilitySpec {
    q_d: Option<[f64; 4]>,
    q_s_low: Option<[f64; 4]>,
    q_s_high: Option<[f64; 4]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GpSpec {
    sigma_f: Option<f64>,
    sigma_l: Option<f64>,
    sigma_n: Option<f64>,
    sample_cap: Option<usize>,
    #[serde(default)]
    tune: bool,
    tune_grid: Option<Vec<[f64; 2]>>,
}

fn check_len(what: &str, v: &[f64], dims: usize) -> Result<()> {
    if v.len() != dims {
        return Err(Error::Parse(format!(
            "{what} needs {dims} components, got {}",
            v.len()
        )));
    }
    Ok(())
}

fn check_angles(what: &str, v: &[f64], dims: usize) -> Result<()> {
    if v.len() != dims - 1 {
        return Err(Error::Parse(format!("{what} needs {} angle(s)", dims - 1)));
    }
    if v.iter().any(|a| !(*a > 0.0 && *a <= std::f64::consts::PI)) {
        return Err(Error::Parse(format!("{what} angles must lie in (0, pi]")));
    }
    Ok(())
}

fn check_counts(what: &str, v: &[usize], dims: usize) -> Result<()> {
    if v.len() != dims - 1 || v.contains(&0) {
        return Err(Error::Parse(format!(
            "{what} needs {} positive ray count(s)",
            dims - 1
        )));
    }
    Ok(())
}

/// Default `(sigma_f, sigma_l)` candidates for hyperparameter tuning.
pub fn default_tuning_grid(spacing: f64) -> Vec<(f64, f64)> {
    let mut grid = Vec::new();
    for sf in [0.5, 0.75, 1.0] {
        for sl in [1.0, 2.0, 3.0, 4.0] {
            grid.push((sf, sl * spacing));
        }
    }
    grid
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::resolve(file)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.as_ref().display())),
            other => other,
        })
    }

    /// A scenario shipped with the crate, by name.
    pub fn bundled(name: &str) -> Result<Self> {
        let text = bundled_source(name).ok_or_else(|| {
            Error::invalid(format!(
                "unknown bundled scenario {name:?}; available: {}",
                BUNDLED
                    .iter()
                    .map(|(n, _)| *n)
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })?;
        Self::from_toml_str(text)
    }

    fn resolve(f: ScenarioFile) -> Result<Self> {
        let dims = f.workspace.dims.unwrap_or(f.workspace.lower.len());
        if dims != 2 && dims != 3 {
            return Err(Error::Parse(format!(
                "workspace dims must be 2 or 3, got {dims}"
            )));
        }
        check_len("workspace.lower", &f.workspace.lower, dims)?;
        check_len("workspace.upper", &f.workspace.upper, dims)?;
        let resolution = f.workspace.resolution.unwrap_or(1.0);
        let workspace = Workspace::new(dims, &f.workspace.lower, &f.workspace.upper, resolution)
            .map_err(|e| Error::Parse(format!("workspace: {e}")))?;

        check_len("target.center", &f.target.center, dims)?;
        check_len("target.size", &f.target.size, dims)?;
        let faces = f.target.faces.unwrap_or_else(|| {
            if dims == 2 {
                Face::PLANAR.to_vec()
            } else {
                Face::SPATIAL
                    .iter()
                    .copied()
                    .filter(|f| *f != Face::ZNeg)
                    .collect()
            }
        });
        let spacing = f.target.spacing.unwrap_or(resolution);
        let target = TargetModel::from_box(
            dims,
            point(&f.target.center),
            point(&f.target.size),
            &faces,
            spacing,
        )
        .map_err(|e| Error::Parse(format!("target: {e}")))?;

        let mut obstacles = Vec::new();
        let mut known = Vec::new();
        for (i, o) in f.obstacles.iter().enumerate() {
            check_len(&format!("obstacles[{i}].center"), &o.center, dims)?;
            check_len(
                &format!("obstacles[{i}].half_extents"),
                &o.half_extents,
                dims,
            )?;
            let mut half = point(&o.half_extents);
            if dims == 2 {
                half.z = PLANAR_HALF_THICKNESS;
            }
            let b = BoxObstacle::new(point(&o.center), half)
                .map_err(|e| Error::Parse(format!("obstacles[{i}]: {e}")))?;
            obstacles.push(b);
            known.push(o.known);
        }

        let start = match &f.start {
            Some(s) => {
                check_len("start", s, dims)?;
                point(s)
            }
            None => {
                let (lo, _) = workspace.position_bounds();
                let mut s = lo + Vec3::repeat(2.0 * resolution);
                if dims == 2 {
                    s.z = 0.0;
                }
                s
            }
        };

        let mut sensor = SensorConfig::defaults(dims);
        if let Some(fov) = f.sensor.fov {
            sensor.fov = fov;
        }
        if let Some(r) = f.sensor.range {
            sensor.range = r;
        }
        if let Some(rays) = f.sensor.rays {
            sensor.rays = rays;
        }
        check_angles("sensor.fov", &sensor.fov, dims)?;
        check_counts("sensor.rays", &sensor.rays, dims)?;
        if !(sensor.range > 0.0) {
            return Err(Error::Parse("sensor.range must be positive".into()));
        }

        let mut camera = CameraConfig::defaults(dims);
        if let Some(fov) = f.camera.fov {
            camera.fov = fov;
        }
        if let Some(r) = f.camera.eval_rays {
            camera.eval_rays = r;
        }
        if let Some(r) = f.camera.capture_rays {
            camera.capture_rays = r;
        }
        check_angles("camera.fov", &camera.fov, dims)?;
        check_counts("camera.eval_rays", &camera.eval_rays, dims)?;
        check_counts("camera.capture_rays", &camera.capture_rays, dims)?;

        let mut utility = UtilityParams::default();
        if let Some(b) = f.camera.beta {
            utility.beta = b;
        }
        if !(utility.beta > 0.0 && utility.beta <= 1.0) {
            return Err(Error::Parse("camera.beta must lie in (0, 1]".into()));
        }
        if let Some(q) = f.utility.q_d {
            utility.q_d = q;
        }
        if let Some(q) = f.utility.q_s_low {
            utility.q_s_low = q;
        }
        if let Some(q) = f.utility.q_s_high {
            utility.q_s_high = q;
        }

        let mut gp = GpModel::for_spacing(spacing);
        if let Some(v) = f.gp.sigma_f {
            gp.sigma_f = v;
        }
        if let Some(v) = f.gp.sigma_l {
            gp.sigma_l = v;
        }
        if let Some(v) = f.gp.sigma_n {
            gp.sigma_n = v;
        }
        if let Some(v) = f.gp.sample_cap {
            gp.sample_cap = v;
        }
        gp.validate()
            .map_err(|e| Error::Parse(format!("gp: {e}")))?;
        let gp_tuning = if f.gp.tune {
            Some(match f.gp.tune_grid {
                Some(g) => g.into_iter().map(|[a, b]| (a, b)).collect(),
                None => default_tuning_grid(spacing),
            })
        } else {
            None
        };

        f.pso
            .validate()
            .map_err(|e| Error::Parse(format!("pso: {e}")))?;
        f.mission
            .validate()
            .map_err(|e| Error::Parse(format!("mission: {e}")))?;
        f.map
            .validate()
            .map_err(|e| Error::Parse(format!("map: {e}")))?;

        Ok(Self {
            name: f.name.unwrap_or_else(|| "scenario".into()),
            workspace,
            target,
            obstacles,
            known,
            start,
            sensor,
            camera,
            utility,
            gp,
            gp_tuning,
            swarm: f.pso,
            mission: f.mission,
            map: f.map,
            seed: f.seed.unwrap_or(0),
        })
    }

    pub fn dims(&self) -> usize {
        self.workspace.dims()
    }

    pub fn inflation(&self) -> f64 {
        self.mission
            .inflation
            .unwrap_or(1.5 * self.workspace.resolution())
    }

    /// Grid with the target body reserved and no obstacle knowledge.
    pub fn empty_grid(&self) -> OccupancyGrid {
        let mut g = OccupancyGrid::new(self.workspace.clone(), self.map);
        g.reserve(&self.target.body());
        g
    }

    /// Believed map at mission start: known obstacles rasterized.
    pub fn initial_grid(&self) -> OccupancyGrid {
        let mut g = self.empty_grid();
        for (o, _) in self.obstacles.iter().zip(&self.known).filter(|(_, k)| **k) {
            g.rasterize_box(&o.aabb());
        }
        g
    }

    /// Map with every true obstacle rasterized, as a fully informed observer
    /// would hold it.
    pub fn revealed_grid(&self) -> OccupancyGrid {
        let mut g = self.empty_grid();
        for o in &self.obstacles {
            g.rasterize_box(&o.aabb());
        }
        g
    }

    /// True-world scene over `boxes` (see [`crate::world::true_scene_boxes`]).
    pub fn true_scene<'a>(&'a self, boxes: &'a [SceneBox]) -> Scene<'a> {
        Scene {
            targets: self.target.coords(),
            target_radius: self.target.sphere_radius(),
            obstacles: &[],
            obstacle_radius: self.target.sphere_radius(),
            boxes,
        }
    }

    /// Whether `p` lies inside a true obstacle or the target body.
    pub fn collides_truly(&self, p: &Vec3) -> bool {
        self.obstacles.iter().any(|o| o.aabb().contains(p)) || self.target.body().contains(p)
    }
}

const BUNDLED: &[(&str, &str)] = &[
    (
        "free_space_2d",
        include_str!("../scenarios/free_space_2d.toml"),
    ),
    ("building_3d", include_str!("../scenarios/building_3d.toml")),
    (
        "one_obstacle_2d",
        include_str!("../scenarios/one_obstacle_2d.toml"),
    ),
    ("two_face_2d", include_str!("../scenarios/two_face_2d.toml")),
    (
        "t_obstacle_2d",
        include_str!("../scenarios/t_obstacle_2d.toml"),
    ),
    (
        "slash_obstacle_2d",
        include_str!("../scenarios/slash_obstacle_2d.toml"),
    ),
    ("slab_3d", include_str!("../scenarios/slab_3d.toml")),
];

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled_source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[workspace]
lower = [0.0, 0.0]
upper = [100.0, 100.0]

[target]
center = [50.0, 50.0]
size = [30.0, 15.0]

[[obstacles]]
center = [50.0, 30.0]
half_extents = [4.0, 1.0]
"#;

    #[test]
    fn minimal_file_fills_defaults() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.dims(), 2);
        assert_eq!(s.workspace.resolution(), 1.0);
        assert_eq!(s.target.len(), 90);
        assert_eq!(s.sensor.range, 25.0);
        assert_eq!(s.camera.eval_rays, vec![61]);
        assert_eq!(s.camera.capture_rays, vec![721]);
        assert_eq!(s.utility.beta, 0.8);
        assert_eq!(s.swarm.particles, 20);
        assert_eq!(s.obstacles.len(), 1);
        assert_eq!(s.inflation(), 1.5);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = format!("{MINIMAL}\n[camera]\nzoom = 2.0\n");
        let err = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("zoom"), "{err}");
        let text = MINIMAL.replace("size =", "colour = 1\nsize =");
        let err = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad_beta = format!("{MINIMAL}\n[camera]\nbeta = 1.5\n");
        assert!(Scenario::from_toml_str(&bad_beta).is_err());
        let bad_fov = format!("{MINIMAL}\n[camera]\nfov = [4.0]\n");
        assert!(Scenario::from_toml_str(&bad_fov).is_err());
        let bad_len = MINIMAL.replace("center = [50.0, 30.0]", "center = [50.0]");
        assert!(Scenario::from_toml_str(&bad_len).is_err());
        let bad_w = format!("{MINIMAL}\n[pso]\ninertia = 1.0\n");
        assert!(Scenario::from_toml_str(&bad_w).is_err());
    }

    #[test]
    fn bundled_scenarios_parse() {
        for name in bundled_names() {
            let s = Scenario::bundled(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(s.workspace.contains(&s.start), "{name}");
            assert!(!s.collides_truly(&s.start), "{name}");
        }
        assert!(Scenario::bundled("nope").is_err());
    }
}
