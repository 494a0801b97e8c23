use std::collections::HashMap;

use nalgebra::Vector3;

/// Tetrahedral volume mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct TetMesh {
    pub nodes: Vec<Vector3<f64>>,
    pub tets: Vec<[usize; 4]>,
}

pub fn signed_volume(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>, d: &Vector3<f64>) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a)) / 6.0
}

impl TetMesh {
    /// Structured box of `cells` hexahedra, each split into six tetrahedra
    /// along its main diagonal (conforming Kuhn triangulation).
    ///
    /// Nodes are numbered with x fastest, then z, then y, so horizontal
    /// layers are contiguous.
    pub fn box_grid(min_corner: Vector3<f64>, size: Vector3<f64>, cells: [usize; 3]) -> TetMesh {
        let [nx, ny, nz] = cells;
        assert!(nx > 0 && ny > 0 && nz > 0, "box needs at least one cell per axis");
        let id = |i: usize, j: usize, k: usize| i + (nx + 1) * (k + (nz + 1) * j);
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        for j in 0..=ny {
            for k in 0..=nz {
                for i in 0..=nx {
                    nodes.push(Vector3::new(
                        min_corner.x + size.x * i as f64 / nx as f64,
                        min_corner.y + size.y * j as f64 / ny as f64,
                        min_corner.z + size.z * k as f64 / nz as f64,
                    ));
                }
            }
        }
        const PATHS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut tets = Vec::with_capacity(6 * nx * ny * nz);
        for j in 0..ny {
            for k in 0..nz {
                for i in 0..nx {
                    for path in PATHS {
                        let mut corner = [i, j, k];
                        let mut tet = [id(i, j, k); 4];
                        for (step, axis) in path.iter().enumerate() {
                            corner[*axis] += 1;
                            tet[step + 1] = id(corner[0], corner[1], corner[2]);
                        }
                        if signed_volume(&nodes[tet[0]], &nodes[tet[1]], &nodes[tet[2]], &nodes[tet[3]]) < 0.0 {
                            tet.swap(2, 3);
                        }
                        tets.push(tet);
                    }
                }
            }
        }
        TetMesh { nodes, tets }
    }

    /// Boundary triangles, oriented with outward normals.
    pub fn boundary_triangles(&self) -> Vec<[usize; 3]> {
        let mut faces: HashMap<[usize; 3], ([usize; 3], usize, usize)> = HashMap::new();
        for tet in &self.tets {
            for (skip, &opposite) in tet.iter().enumerate() {
                let mut face = [0usize; 3];
                let mut n = 0;
                for (m, v) in tet.iter().enumerate() {
                    if m != skip {
                        face[n] = *v;
                        n += 1;
                    }
                }
                let mut key = face;
                key.sort_unstable();
                faces.entry(key).and_modify(|e| e.2 += 1).or_insert((face, opposite, 1));
            }
        }
        let mut out: Vec<[usize; 3]> = faces
            .into_values()
            .filter(|(_, _, count)| *count == 1)
            .map(|([a, b, c], opposite, _)| {
                let normal = (self.nodes[b] - self.nodes[a]).cross(&(self.nodes[c] - self.nodes[a]));
                if normal.dot(&(self.nodes[opposite] - self.nodes[a])) > 0.0 {
                    [a, c, b]
                } else {
                    [a, b, c]
                }
            })
            .collect();
        // canonical order independent of hash iteration
        out.sort_unstable_by_key(|t| {
            let mut k = *t;
            k.sort_unstable();
            k
        });
        out
    }

    pub fn translate(&mut self, offset: &Vector3<f64>) {
        for n in &mut self.nodes {
            *n += offset;
        }
    }
}
