//! Scene files.
//!
//! A scene is a TOML document. Top-level keys, with their defaults:
//!
//! | key | unit | default |
//! |---|---|---|
//! | `dt` | s | `0.01` |
//! | `gravity` | m/s² | `[0, -9.81, 0]` |
//! | `threshold` | m | `0.002` (proximity detection distance) |
//! | `mu` | – | `0.5` (Coulomb coefficient) |
//! | `pgs.iterations` | – | `30` |
//! | `pgs.tolerance` | – | `1e-6` (relative change of λ between sweeps) |
//! | `newton.iterations` | – | `5` |
//! | `newton.scheme` | – | `"single"`; also `"standard"`, `"fast"` |
//! | `newton.penetration_tol` | m | `1e-5` |
//! | `newton.relinearize` | – | `true` |
//! | `newton.early_exit` | – | `true` |
//! | `newton.rotation_tol` | rad | `1e-4` |
//! | `output.snapshots` | – | `true` |
//! | `output.every` | steps | `1` |
//! | `output.metrics` | – | `true` |
//!
//! Objects are an array of tables `[[objects]]` with a `kind`:
//!
//! * `soft`: `mesh = "file.mesh"` (relative to the scene file) or
//!   `box = { min = [..], size = [..], cells = [nx, ny, nz] }`; optional
//!   `offset`, `velocity` (m/s), `fixed_below` (m, world y), `fixed_nodes`,
//!   and a `material` table (`young_modulus` Pa, `poisson_ratio`,
//!   `density` kg/m³, `rayleigh_mass` 1/s, `rayleigh_stiffness` s).
//! * `particle`: `position`, `mass` (kg), `velocity`.
//! * `rigid`: `shape = "sphere"` with `radius`, or `shape = "cuboid"` with
//!   `half_extents`; `mass` (kg), `position`, `rotation` (rotation vector,
//!   rad), `velocity`, `angular_velocity` (rad/s).
//! * `plane`: `point`, `normal`; optional `half_extents = [a, b]` (m) and
//!   `thickness` (m) for finite plates.
//! * `mesh_collider`: `mesh` with a `triangles` section, optional `offset`.
//!
//! Both collider kinds accept `velocity`, `angular_velocity` and `pivot`
//! for a prescribed rigid motion.

use std::path::{Path, PathBuf};

use nalgebra::{UnitQuaternion, Vector3};
use serde::Deserialize;

use super::mesh_io::read_mesh;
use super::SceneError;
use crate::collision::{Collider, ColliderMotion, ColliderShape};
use crate::dynamics::{Material, RigidBody, RigidShape, TetMesh};
use crate::solver::{NewtonConfig, PgsConfig, Scheme};

#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    /// s
    pub dt: f64,
    /// m/s²
    pub gravity: Vector3<f64>,
    /// m
    pub threshold: f64,
    /// Includes the friction coefficient.
    pub pgs: PgsConfig,
    pub newton: NewtonConfig,
    pub output: OutputConfig,
    pub objects: Vec<ObjectConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutputConfig {
    pub snapshots: bool,
    /// Write a snapshot every this many steps.
    pub every: usize,
    pub metrics: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxSpec {
    pub min: Vector3<f64>,
    pub size: Vector3<f64>,
    pub cells: [usize; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub enum SoftSource {
    Box(BoxSpec),
    Mesh(TetMesh),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObjectConfig {
    Soft {
        source: SoftSource,
        offset: Vector3<f64>,
        material: Material,
        fixed_nodes: Vec<usize>,
        /// Nodes with world `y` at or below this are fixed.
        fixed_below: Option<f64>,
        velocity: Vector3<f64>,
    },
    Particle {
        position: Vector3<f64>,
        mass: f64,
        velocity: Vector3<f64>,
    },
    Rigid {
        body: RigidBody,
        position: Vector3<f64>,
        orientation: UnitQuaternion<f64>,
        velocity: Vector3<f64>,
        angular_velocity: Vector3<f64>,
    },
    Collider(Collider),
}

impl SceneConfig {
    /// Number of simulated (non-collider) objects.
    pub fn body_count(&self) -> usize {
        self.objects.iter().filter(|o| !matches!(o, ObjectConfig::Collider(_))).count()
    }

    pub fn collider_count(&self) -> usize {
        self.objects.len() - self.body_count()
    }

    /// Replaces the cell counts of the first box-generated soft object.
    pub fn with_box_cells(mut self, cells: [usize; 3]) -> Option<Self> {
        let spec = self.objects.iter_mut().find_map(|o| match o {
            ObjectConfig::Soft { source: SoftSource::Box(b), .. } => Some(b),
            _ => None,
        })?;
        spec.cells = cells;
        Some(self)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt > 0.0) {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.threshold > 0.0) {
            return Err(format!("threshold must be positive, got {}", self.threshold));
        }
        if self.body_count() == 0 {
            return Err("scene needs at least one simulated object".into());
        }
        self.pgs.validate().map_err(|e| e.to_string())?;
        self.newton.validate().map_err(|e| e.to_string())?;
        if self.output.every == 0 {
            return Err("output.every must be at least 1".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            if let ObjectConfig::Soft { source: SoftSource::Box(b), material, .. } = o {
                if b.cells.contains(&0) || b.size.iter().any(|s| !(*s > 0.0)) {
                    return Err(format!("objects[{i}].box needs positive size and cell counts"));
                }
                material.validate().map_err(|e| format!("objects[{i}].material: {e}"))?;
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_gravity")]
    gravity: [f64; 3],
    #[serde(default = "default_threshold")]
    threshold: f64,
    #[serde(default = "default_mu")]
    mu: f64,
    #[serde(default)]
    pgs: RawPgs,
    #[serde(default)]
    newton: RawNewton,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    objects: Vec<RawObject>,
}

fn default_dt() -> f64 {
    0.01
}
fn default_gravity() -> [f64; 3] {
    [0.0, -9.81, 0.0]
}
fn default_threshold() -> f64 {
    0.002
}
fn default_mu() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPgs {
    #[serde(default = "default_pgs_iterations")]
    iterations: usize,
    #[serde(default = "default_pgs_tolerance")]
    tolerance: f64,
}

fn default_pgs_iterations() -> usize {
    30
}
fn default_pgs_tolerance() -> f64 {
    1e-6
}

impl Default for RawPgs {
    fn default() -> Self {
        Self { iterations: default_pgs_iterations(), tolerance: default_pgs_tolerance() }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNewton {
    #[serde(default = "default_newton_iterations")]
    iterations: usize,
    #[serde(default = "default_scheme")]
    scheme: RawScheme,
    #[serde(default = "default_penetration_tol")]
    penetration_tol: f64,
    #[serde(default = "yes")]
    relinearize: bool,
    #[serde(default = "yes")]
    early_exit: bool,
    #[serde(default = "default_rotation_tol")]
    rotation_tol: f64,
}

fn default_newton_iterations() -> usize {
    5
}
fn default_scheme() -> RawScheme {
    RawScheme::Single
}
fn default_penetration_tol() -> f64 {
    1e-5
}
fn default_rotation_tol() -> f64 {
    1e-4
}

impl Default for RawNewton {
    fn default() -> Self {
        Self {
            iterations: default_newton_iterations(),
            scheme: default_scheme(),
            penetration_tol: default_penetration_tol(),
            relinearize: true,
            early_exit: true,
            rotation_tol: default_rotation_tol(),
        }
    }
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum RawScheme {
    Single,
    #[serde(alias = "standard_recursive")]
    Standard,
    #[serde(alias = "fast_recursive")]
    Fast,
}

impl From<RawScheme> for Scheme {
    fn from(s: RawScheme) -> Self {
        match s {
            RawScheme::Single => Scheme::Single,
            RawScheme::Standard => Scheme::Standard,
            RawScheme::Fast => Scheme::Fast,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default = "yes")]
    snapshots: bool,
    #[serde(default = "default_every")]
    every: usize,
    #[serde(default = "yes")]
    metrics: bool,
}

fn default_every() -> usize {
    1
}

impl Default for RawOutput {
    fn default() -> Self {
        Self { snapshots: true, every: 1, metrics: true }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    #[serde(default)]
    min: [f64; 3],
    size: [f64; 3],
    cells: [usize; 3],
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawMaterial {
    young_modulus: Option<f64>,
    poisson_ratio: Option<f64>,
    density: Option<f64>,
    rayleigh_mass: Option<f64>,
    rayleigh_stiffness: Option<f64>,
}

impl RawMaterial {
    fn resolve(&self) -> Material {
        let d = Material::default();
        Material {
            young_modulus: self.young_modulus.unwrap_or(d.young_modulus),
            poisson_ratio: self.poisson_ratio.unwrap_or(d.poisson_ratio),
            density: self.density.unwrap_or(d.density),
            rayleigh_mass: self.rayleigh_mass.unwrap_or(d.rayleigh_mass),
            rayleigh_stiffness: self.rayleigh_stiffness.unwrap_or(d.rayleigh_stiffness),
        }
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawShape {
    Sphere,
    Cuboid,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawObject {
    Soft {
        mesh: Option<PathBuf>,
        #[serde(rename = "box")]
        grid: Option<RawBox>,
        #[serde(default)]
        offset: [f64; 3],
        #[serde(default)]
        material: RawMaterial,
        #[serde(default)]
        fixed_nodes: Vec<usize>,
        fixed_below: Option<f64>,
        #[serde(default)]
        velocity: [f64; 3],
    },
    Particle {
        position: [f64; 3],
        mass: f64,
        #[serde(default)]
        velocity: [f64; 3],
    },
    Rigid {
        shape: RawShape,
        radius: Option<f64>,
        half_extents: Option<[f64; 3]>,
        mass: f64,
        #[serde(default)]
        position: [f64; 3],
        #[serde(default)]
        rotation: [f64; 3],
        #[serde(default)]
        velocity: [f64; 3],
        #[serde(default)]
        angular_velocity: [f64; 3],
    },
    Plane {
        #[serde(default)]
        point: [f64; 3],
        normal: [f64; 3],
        half_extents: Option<[f64; 2]>,
        thickness: Option<f64>,
        #[serde(default)]
        velocity: [f64; 3],
        #[serde(default)]
        angular_velocity: [f64; 3],
        pivot: Option<[f64; 3]>,
    },
    MeshCollider {
        mesh: PathBuf,
        #[serde(default)]
        offset: [f64; 3],
        #[serde(default)]
        velocity: [f64; 3],
        #[serde(default)]
        angular_velocity: [f64; 3],
        pivot: Option<[f64; 3]>,
    },
}

fn motion(position: Vector3<f64>, velocity: [f64; 3], angular_velocity: [f64; 3], pivot: Option<[f64; 3]>) -> ColliderMotion {
    ColliderMotion {
        position,
        orientation: UnitQuaternion::identity(),
        linear_velocity: velocity.into(),
        angular_velocity: angular_velocity.into(),
        pivot: pivot.map(Vector3::from).unwrap_or(position),
    }
}

/// Reads, parses and validates a scene file. Mesh paths are resolved
/// relative to the scene file's directory and loaded eagerly.
pub fn load_scene(path: &Path) -> Result<SceneConfig, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scene(&text, base).map_err(|e| e.with_path(path))
}

/// Parses scene text; relative mesh paths are resolved against `base`.
pub fn parse_scene(text: &str, base: &Path) -> Result<SceneConfig, SceneError> {
    let raw: RawScene = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    let invalid = |message: String| SceneError::Validation { path: PathBuf::new(), message };
    let mut objects = Vec::with_capacity(raw.objects.len());
    for (i, o) in raw.objects.into_iter().enumerate() {
        objects.push(resolve_object(i, o, base).map_err(|e| match e {
            SceneError::Validation { message, .. } => invalid(message),
            other => other,
        })?);
    }
    let config = SceneConfig {
        dt: raw.dt,
        gravity: raw.gravity.into(),
        threshold: raw.threshold,
        pgs: PgsConfig { max_iterations: raw.pgs.iterations, tolerance: raw.pgs.tolerance, friction: raw.mu },
        newton: NewtonConfig {
            max_iterations: raw.newton.iterations,
            penetration_tolerance: raw.newton.penetration_tol,
            scheme: raw.newton.scheme.into(),
            relinearize: raw.newton.relinearize,
            early_exit: raw.newton.early_exit,
            rotation_tolerance: raw.newton.rotation_tol,
        },
        output: OutputConfig { snapshots: raw.output.snapshots, every: raw.output.every, metrics: raw.output.metrics },
        objects,
    };
    config.validate().map_err(invalid)?;
    Ok(config)
}

fn resolve_object(i: usize, o: RawObject, base: &Path) -> Result<ObjectConfig, SceneError> {
    let invalid = |message: String| SceneError::Validation { path: PathBuf::new(), message: format!("objects[{i}]: {message}") };
    let mesh_path = |p: &Path| -> Result<PathBuf, SceneError> {
        let full = base.join(p);
        if !full.is_file() {
            return Err(invalid(format!("mesh file {} does not exist", full.display())));
        }
        Ok(full)
    };
    Ok(match o {
        RawObject::Soft { mesh, grid, offset, material, fixed_nodes, fixed_below, velocity } => {
            let source = match (mesh, grid) {
                (Some(m), None) => {
                    let file = read_mesh(&mesh_path(&m)?)?;
                    if file.tets.is_empty() {
                        return Err(invalid(format!("mesh {} has no tets section", m.display())));
                    }
                    SoftSource::Mesh(TetMesh { nodes: file.nodes, tets: file.tets })
                }
                (None, Some(b)) => SoftSource::Box(BoxSpec { min: b.min.into(), size: b.size.into(), cells: b.cells }),
                _ => return Err(invalid("soft object needs exactly one of `mesh` or `box`".into())),
            };
            ObjectConfig::Soft {
                source,
                offset: offset.into(),
                material: material.resolve(),
                fixed_nodes,
                fixed_below,
                velocity: velocity.into(),
            }
        }
        RawObject::Particle { position, mass, velocity } => {
            if !(mass > 0.0) {
                return Err(invalid(format!("particle mass must be positive, got {mass}")));
            }
            ObjectConfig::Particle { position: position.into(), mass, velocity: velocity.into() }
        }
        RawObject::Rigid { shape, radius, half_extents, mass, position, rotation, velocity, angular_velocity } => {
            let shape = match (shape, radius, half_extents) {
                (RawShape::Sphere, Some(r), None) if r > 0.0 => RigidShape::Sphere { radius: r },
                (RawShape::Cuboid, None, Some(e)) if e.iter().all(|x| *x > 0.0) => RigidShape::Cuboid { half_extents: e.into() },
                (RawShape::Sphere, ..) => return Err(invalid("sphere needs a positive `radius` only".into())),
                (RawShape::Cuboid, ..) => return Err(invalid("cuboid needs positive `half_extents` only".into())),
            };
            let body = RigidBody::new(mass, shape).map_err(|e| invalid(e.to_string()))?;
            ObjectConfig::Rigid {
                body,
                position: position.into(),
                orientation: UnitQuaternion::from_scaled_axis(Vector3::from(rotation)),
                velocity: velocity.into(),
                angular_velocity: angular_velocity.into(),
            }
        }
        RawObject::Plane { point, normal, half_extents, thickness, velocity, angular_velocity, pivot } => {
            let n = Vector3::from(normal);
            if !(n.norm() > 0.0) {
                return Err(invalid("plane normal must be non-zero".into()));
            }
            if half_extents.is_some_and(|h| h.iter().any(|x| !(*x > 0.0))) || thickness.is_some_and(|t| !(t > 0.0)) {
                return Err(invalid("plane half_extents and thickness must be positive".into()));
            }
            Collider {
                shape: ColliderShape::Plane { normal: n.normalize(), half_extents, thickness: thickness.unwrap_or(f64::INFINITY) },
                motion: motion(point.into(), velocity, angular_velocity, pivot),
            }
            .into()
        }
        RawObject::MeshCollider { mesh, offset, velocity, angular_velocity, pivot } => {
            let file = read_mesh(&mesh_path(&mesh)?)?;
            if file.triangles.is_empty() {
                return Err(invalid(format!("mesh {} has no triangles section", mesh.display())));
            }
            Collider { shape: ColliderShape::Mesh { vertices: file.nodes, triangles: file.triangles }, motion: motion(offset.into(), velocity, angular_velocity, pivot) }
                .into()
        }
    })
}

impl From<Collider> for ObjectConfig {
    fn from(c: Collider) -> Self {
        ObjectConfig::Collider(c)
    }
}

fn parse_error(text: &str, e: &toml::de::Error) -> SceneError {
    let message = e.message().to_string();
    let (line, line_text) = match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            (line, text.lines().nth(line - 1).unwrap_or(""))
        }
        None => (0, ""),
    };
    let field = message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .or_else(|| line_text.split_once('=').map(|(k, _)| k.trim().to_string()).filter(|k| !k.is_empty()));
    SceneError::Parse { path: PathBuf::new(), line, field, message }
}
