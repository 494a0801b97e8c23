//! Helpers shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use contact_newton::linalg::DenseMat;
use contact_newton::scene::{load_scene, parse_scene, Scene, SceneConfig};

pub const FIXTURES: [&str; 4] = ["point_mass.scn", "block_plane.scn", "two_soft_press.scn", "grasp_rotate.scn"];

/// Vertical cell count giving the ≈3000-node benchmark block.
pub const LARGE_LAYERS: usize = 37;

pub fn scenes_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes")
}

pub fn config(name: &str) -> SceneConfig {
    load_scene(&scenes_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn scene(name: &str) -> Scene {
    Scene::new(config(name)).unwrap()
}

pub fn scene_from(text: &str) -> Scene {
    Scene::new(parse_scene(text, &scenes_dir()).unwrap()).unwrap()
}

/// The benchmark block with `layers` vertical cells.
pub fn bench_block(layers: usize) -> SceneConfig {
    config("bench_block.scn").with_box_cells([8, layers, 8]).unwrap()
}

/// All shipped fixtures plus the large benchmark block, as `(label, config)`.
pub fn all_fixtures() -> Vec<(String, SceneConfig)> {
    let mut out: Vec<_> = FIXTURES.iter().map(|n| (n.to_string(), config(n))).collect();
    out.push((format!("bench_block 8x{LARGE_LAYERS}x8"), bench_block(LARGE_LAYERS)));
    out
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute difference when both vanish.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        norm(&d)
    } else {
        norm(&d) / scale
    }
}

/// Dense solve by Gaussian elimination with partial pivoting; `None` if singular.
pub fn dense_solve(a: &DenseMat, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut x = b.to_vec();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        x.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
            x[r] -= f * x[c];
        }
    }
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| m[c][k] * x[k]).sum();
        x[c] = (x[c] - s) / m[c][c];
    }
    Some(x)
}

/// Frictionless contact LCP by active-set enumeration: find `λ ≥ 0` with
/// `w = δ + h² W λ ≥ 0` and `λᵢ wᵢ = 0`, trying all `2^n` active sets.
/// `w_nn` is the normal-normal block of the Delassus operator.
pub fn lcp_oracle(w_nn: &DenseMat, delta: &[f64], h: f64) -> Option<Vec<f64>> {
    let n = delta.len();
    assert!(n <= 16, "enumeration is exponential");
    let h2 = h * h;
    let scale = delta.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1e-300);
    for mask in 0..(1u32 << n) {
        let active: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let mut lambda = vec![0.0; n];
        if !active.is_empty() {
            let sub = DenseMat::from_fn(active.len(), active.len(), |i, j| h2 * w_nn[(active[i], active[j])]);
            let rhs: Vec<f64> = active.iter().map(|&i| -delta[i]).collect();
            let Some(x) = dense_solve(&sub, &rhs) else { continue };
            for (k, &i) in active.iter().enumerate() {
                lambda[i] = x[k];
            }
        }
        if lambda.iter().any(|l| *l < 0.0) {
            continue;
        }
        let w = w_nn.matvec(&lambda).unwrap();
        let feasible = (0..n).all(|i| active.contains(&i) || delta[i] + h2 * w[i] >= -1e-12 * scale);
        if feasible {
            return Some(lambda);
        }
    }
    None
}
