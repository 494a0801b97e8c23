use nalgebra::{Matrix3, Vector3};

use super::mesh::{signed_volume, TetMesh};
use super::DynamicsError;
use crate::linalg::SparseSym;

/// Isotropic linear-elastic material with Rayleigh damping `B = αM + βK`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    /// Pa
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    /// kg/m³
    pub density: f64,
    /// α, 1/s
    pub rayleigh_mass: f64,
    /// β, s
    pub rayleigh_stiffness: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self { young_modulus: 1.0e4, poisson_ratio: 0.3, density: 1000.0, rayleigh_mass: 0.1, rayleigh_stiffness: 0.1 }
    }
}

impl Material {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let ok = self.young_modulus > 0.0
            && (0.0..0.5).contains(&self.poisson_ratio)
            && self.density > 0.0
            && self.rayleigh_mass >= 0.0
            && self.rayleigh_stiffness >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(DynamicsError::InvalidMaterial(format!("{self:?}")))
        }
    }

    /// Lamé parameters (λ, μ).
    pub fn lame(&self) -> (f64, f64) {
        let e = self.young_modulus;
        let nu = self.poisson_ratio;
        (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }
}

/// Constant-strain tetrahedron stiffness as 4×4 blocks of 3×3 (`K[a][b]`).
pub fn element_stiffness(x: &[Vector3<f64>; 4], material: &Material) -> Result<[[Matrix3<f64>; 4]; 4], DynamicsError> {
    let volume = signed_volume(&x[0], &x[1], &x[2], &x[3]);
    if !(volume > 0.0) {
        return Err(DynamicsError::DegenerateTet { tet: usize::MAX, volume });
    }
    let dm = Matrix3::from_columns(&[x[1] - x[0], x[2] - x[0], x[3] - x[0]]);
    let inv = dm.try_inverse().ok_or(DynamicsError::DegenerateTet { tet: usize::MAX, volume })?;
    let mut grads = [Vector3::zeros(); 4];
    for a in 1..4 {
        grads[a] = inv.row(a - 1).transpose();
    }
    grads[0] = -(grads[1] + grads[2] + grads[3]);

    let (lambda, mu) = material.lame();
    let mut k = [[Matrix3::zeros(); 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let ga = grads[a];
            let gb = grads[b];
            k[a][b] = volume * (lambda * ga * gb.transpose() + mu * gb * ga.transpose() + mu * ga.dot(&gb) * Matrix3::identity());
        }
    }
    Ok(k)
}

/// Deformable body discretized with linear tetrahedra and a lumped mass.
#[derive(Clone, Debug)]
pub struct SoftBody {
    pub rest: Vec<Vector3<f64>>,
    pub tets: Vec<[usize; 4]>,
    pub material: Material,
    /// Per-node flag; fixed nodes never move.
    pub fixed: Vec<bool>,
    /// Lumped nodal masses (kg).
    pub node_mass: Vec<f64>,
    /// Outward-oriented boundary triangles.
    pub surface: Vec<[usize; 3]>,
    /// Boundary vertices (sorted), the candidates for vertex contacts.
    pub surface_vertices: Vec<usize>,
    stiffness: SparseSym,
}

impl SoftBody {
    pub fn new(mesh: TetMesh, material: Material, fixed_nodes: &[usize]) -> Result<Self, DynamicsError> {
        material.validate()?;
        let n = mesh.nodes.len();
        let mut fixed = vec![false; n];
        for &i in fixed_nodes {
            if i >= n {
                return Err(DynamicsError::InvalidIndex { index: i, len: n });
            }
            fixed[i] = true;
        }
        let mut node_mass = vec![0.0; n];
        let mut triplets = Vec::with_capacity(mesh.tets.len() * 144);
        for (t, tet) in mesh.tets.iter().enumerate() {
            for &v in tet {
                if v >= n {
                    return Err(DynamicsError::InvalidIndex { index: v, len: n });
                }
            }
            let x = [mesh.nodes[tet[0]], mesh.nodes[tet[1]], mesh.nodes[tet[2]], mesh.nodes[tet[3]]];
            let volume = signed_volume(&x[0], &x[1], &x[2], &x[3]);
            let ke = element_stiffness(&x, &material).map_err(|_| DynamicsError::DegenerateTet { tet: t, volume })?;
            for (a, &va) in tet.iter().enumerate() {
                node_mass[va] += material.density * volume / 4.0;
                for (b, &vb) in tet.iter().enumerate() {
                    for r in 0..3 {
                        for c in 0..3 {
                            triplets.push((3 * va + r, 3 * vb + c, ke[a][b][(r, c)]));
                        }
                    }
                }
            }
        }
        if let Some(i) = node_mass.iter().position(|m| !(*m > 0.0)) {
            return Err(DynamicsError::InvalidMaterial(format!("node {i} is not attached to any tetrahedron")));
        }
        let stiffness = SparseSym::from_triplets(3 * n, &triplets).expect("indices checked above");
        let surface = mesh.boundary_triangles();
        let mut surface_vertices: Vec<usize> = surface.iter().flatten().copied().collect();
        surface_vertices.sort_unstable();
        surface_vertices.dedup();
        Ok(Self { rest: mesh.nodes, tets: mesh.tets, material, fixed, node_mass, surface, surface_vertices, stiffness })
    }

    /// A single free node with mass `mass` and no elasticity.
    pub fn point_mass(position: Vector3<f64>, mass: f64) -> Result<Self, DynamicsError> {
        if !(mass > 0.0) {
            return Err(DynamicsError::InvalidMaterial(format!("point mass must be positive, got {mass}")));
        }
        Ok(Self {
            rest: vec![position],
            tets: Vec::new(),
            material: Material { rayleigh_mass: 0.0, rayleigh_stiffness: 0.0, ..Material::default() },
            fixed: vec![false],
            node_mass: vec![mass],
            surface: Vec::new(),
            surface_vertices: vec![0],
            stiffness: SparseSym::from_triplets(3, &[]).expect("empty"),
        })
    }

    pub fn node_count(&self) -> usize {
        self.rest.len()
    }

    pub fn dofs(&self) -> usize {
        3 * self.rest.len()
    }

    /// Assembled stiffness `K` without boundary conditions.
    pub fn stiffness(&self) -> &SparseSym {
        &self.stiffness
    }

    pub fn mass_diagonal(&self) -> Vec<f64> {
        self.node_mass.iter().flat_map(|m| [*m; 3]).collect()
    }

    pub fn fixed_dofs(&self) -> Vec<bool> {
        self.fixed.iter().flat_map(|f| [*f; 3]).collect()
    }

    pub fn rest_positions(&self) -> Vec<f64> {
        self.rest.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    /// Internal force `f(q, v) = K (q - X) + B v`.
    pub fn internal_force(&self, q: &[f64], v: &[f64]) -> Vec<f64> {
        let rest = self.rest_positions();
        let u: Vec<f64> = q.iter().zip(&rest).map(|(a, b)| a - b).collect();
        let ku = self.stiffness.matvec(&u).expect("state sized to body");
        let kv = self.stiffness.matvec(v).expect("state sized to body");
        let m = self.mass_diagonal();
        let alpha = self.material.rayleigh_mass;
        let beta = self.material.rayleigh_stiffness;
        (0..q.len()).map(|i| ku[i] + alpha * m[i] * v[i] + beta * kv[i]).collect()
    }

    pub fn volume(&self) -> f64 {
        self.tets
            .iter()
            .map(|t| signed_volume(&self.rest[t[0]], &self.rest[t[1]], &self.rest[t[2]], &self.rest[t[3]]))
            .sum()
    }
}
