use std::sync::Arc;

use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::collision::{build_frames, build_mapping_jacobian, detect, Collider, SceneView};
use crate::dynamics::{assemble_matrix, Body, Material, MechanicalState, SoftBody, TetMesh};
use crate::linalg::{factorize, gemm};

struct Fixture {
    bodies: Vec<Body>,
    states: Vec<MechanicalState>,
    colliders: Vec<Collider>,
    pairs: Vec<ProximityPair>,
    frames: Vec<ContactFrame>,
    g: Vec<SparseRows>,
    factors: Vec<Arc<Factorization>>,
    dense_a: Vec<DenseMat>,
}

impl Fixture {
    fn new(bodies: Vec<Body>, colliders: Vec<Collider>, threshold: f64) -> Self {
        let states: Vec<_> = bodies.iter().map(|b| b.initial_state(Vector3::zeros(), UnitQuaternion::identity())).collect();
        let view = SceneView::new(&bodies, &states, &colliders, 0.0);
        let pairs = detect(&view, threshold).unwrap();
        let frames = build_frames(&pairs, &view).unwrap();
        let g = (0..bodies.len()).map(|b| build_mapping_jacobian(&pairs, b, &view).unwrap()).collect();
        let mats: Vec<_> = bodies.iter().zip(&states).map(|(b, s)| assemble_matrix(b, s, 0.01).unwrap()).collect();
        let factors = mats.iter().map(|a| Arc::new(factorize(a).unwrap())).collect();
        let dense_a = mats.iter().map(|a| a.to_dense()).collect();
        Self { bodies, states, colliders, pairs, frames, g, factors, dense_a }
    }

    fn factors(&self) -> Vec<&Factorization> {
        self.factors.iter().map(|f| f.as_ref()).collect()
    }

    fn h(&self, d: &DirectionMatrix) -> Vec<SparseRows> {
        self.g.iter().map(|g| assemble_h(d, g).unwrap()).collect()
    }

    fn c(&self) -> usize {
        3 * self.pairs.len()
    }
}

fn block(min: Vector3<f64>, size: f64, cells: usize, fixed_bottom: bool) -> Body {
    let mesh = TetMesh::box_grid(min, Vector3::repeat(size), [cells; 3]);
    let fixed: Vec<usize> = if fixed_bottom { (0..mesh.nodes.len()).filter(|&i| mesh.nodes[i].y <= min.y + 1e-12).collect() } else { vec![] };
    Body::Soft(SoftBody::new(mesh, Material::default(), &fixed).unwrap())
}

fn block_on_plane() -> Fixture {
    Fixture::new(vec![block(Vector3::new(0.0, 0.0005, 0.0), 0.1, 2, false)], vec![Collider::fixed_plane(Vector3::zeros(), Vector3::y())], 2e-3)
}

fn two_blocks() -> Fixture {
    let top = block(Vector3::new(0.02, 0.1008, 0.01), 0.06, 2, false);
    let bottom = block(Vector3::zeros(), 0.1, 2, true);
    Fixture::new(vec![top, bottom], vec![], 2e-3)
}

fn gauss_jordan_inverse(a: &DenseMat) -> DenseMat {
    let n = a.rows();
    let mut m = a.clone();
    let mut inv = DenseMat::identity(n);
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[(i, c)].abs().partial_cmp(&m[(j, c)].abs()).unwrap()).unwrap();
        for k in 0..n {
            let t = m[(c, k)];
            m.row_mut(c)[k] = m[(p, k)];
            m.row_mut(p)[k] = t;
            let t = inv[(c, k)];
            inv.row_mut(c)[k] = inv[(p, k)];
            inv.row_mut(p)[k] = t;
        }
        let piv = m[(c, c)];
        for k in 0..n {
            m.row_mut(c)[k] /= piv;
            inv.row_mut(c)[k] /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[(r, c)];
                for k in 0..n {
                    let (mv, iv) = (m[(c, k)], inv[(c, k)]);
                    m.row_mut(r)[k] -= f * mv;
                    inv.row_mut(r)[k] -= f * iv;
                }
            }
        }
    }
    inv
}

fn dense_schur(fx: &Fixture, js: &[SparseRows]) -> DenseMat {
    let mut w = DenseMat::zeros(fx.c(), fx.c());
    for (j, a) in js.iter().zip(&fx.dense_a) {
        let jd = j.to_dense();
        let t = gemm(&gemm(&jd, &gauss_jordan_inverse(a), false, false).unwrap(), &jd, false, true).unwrap();
        w.add_assign(&t).unwrap();
    }
    w
}

fn max_diff(a: &DenseMat, b: &DenseMat) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn axis_frame() -> ContactFrame {
    ContactFrame { normal: Vector3::y(), tangent1: Vector3::x(), tangent2: Vector3::z() }
}

fn random_frames(n: usize, seed: u64) -> Vec<ContactFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| ContactFrame::from_normal(Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0), rng.gen_range(-1.0..1.0))))
        .collect()
}

#[test]
fn direction_blocks() {
    let d = assemble_direction(&[axis_frame()]).to_dense();
    assert_eq!(d.as_slice(), &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let d = assemble_direction(&[axis_frame(), ContactFrame::from_normal(Vector3::new(1.0, 2.0, 3.0))]).to_dense();
    for r in 0..3 {
        for c in 3..6 {
            assert_eq!(d[(r, c)], 0.0);
            assert_eq!(d[(c, r)], 0.0);
        }
    }
    let d = assemble_direction(&random_frames(7, 3)).to_dense();
    let ddt = gemm(&d, &d, false, true).unwrap();
    assert!(max_diff(&ddt, &DenseMat::identity(21)) <= 1e-12);
}

#[test]
fn h_is_d_times_g() {
    let fx = block_on_plane();
    let identity = DirectionMatrix { blocks: vec![Matrix3::identity(); fx.pairs.len()] };
    assert_eq!(assemble_h(&identity, &fx.g[0]).unwrap().to_dense(), fx.g[0].to_dense());

    let d = assemble_direction(&random_frames(fx.pairs.len(), 5));
    let h = assemble_h(&d, &fx.g[0]).unwrap();
    let dg = gemm(&d.to_dense(), &fx.g[0].to_dense(), false, false).unwrap();
    assert!(max_diff(&h.to_dense(), &dg) <= 1e-15);

    // Kinematic oracle: frame-projected relative velocity of the attachments.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let v: Vec<f64> = (0..fx.bodies[0].dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let hv = h.matvec(&v).unwrap();
    for (i, p) in fx.pairs.iter().enumerate() {
        let crate::collision::Attachment::Vertex { node } = p.attach_a else { panic!() };
        let vel = Vector3::new(v[3 * node], v[3 * node + 1], v[3 * node + 2]);
        let expect = d.block(i) * vel;
        for r in 0..3 {
            assert!((hv[3 * i + r] - expect[r]).abs() <= 1e-12);
        }
    }
}

#[test]
fn barycentric_h_matches_kinematics() {
    let fx = two_blocks();
    assert!(!fx.pairs.is_empty());
    let d = assemble_direction(&random_frames(fx.pairs.len(), 13));
    let h = fx.h(&d);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v: Vec<Vec<f64>> = fx.bodies.iter().map(|b| (0..b.dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let fixed = fx.bodies[1].fixed_dofs();
    let node_vel = |b: usize, n: usize| {
        Vector3::from_fn(|r, _| if b == 1 && fixed[3 * n + r] { 0.0 } else { v[b][3 * n + r] })
    };
    let hv0 = h[0].matvec(&v[0]).unwrap();
    let hv1 = h[1].matvec(&v[1]).unwrap();
    for (i, p) in fx.pairs.iter().enumerate() {
        let crate::collision::Attachment::Vertex { node } = p.attach_a else { panic!() };
        let crate::collision::Attachment::Triangle { nodes, weights, .. } = p.attach_b else { panic!() };
        let vb: Vector3<f64> = nodes.iter().zip(&weights).map(|(n, w)| node_vel(1, *n) * *w).sum();
        let rel = d.block(i) * (node_vel(0, node) - vb);
        for r in 0..3 {
            assert!((hv0[3 * i + r] + hv1[3 * i + r] - rel[r]).abs() <= 1e-12);
        }
    }
}

#[test]
fn point_mass_delassus_is_inverse_mass() {
    let m = 2.0;
    let fx = Fixture::new(
        vec![Body::Soft(SoftBody::point_mass(Vector3::new(0.0, 0.001, 0.0), m).unwrap())],
        vec![Collider::fixed_plane(Vector3::zeros(), Vector3::y())],
        0.01,
    );
    let d = assemble_direction(&[axis_frame()]);
    let w = assemble_w_standard(&fx.h(&d), &fx.factors(), 3).unwrap();
    assert!(max_diff(&w, &{
        let mut e = DenseMat::identity(3);
        e.scale(1.0 / m);
        e
    }) <= 1e-15);
    let wg = assemble_wg(&fx.pairs, &fx.g, &fx.factors()).unwrap();
    assert!(max_diff(&wg.combined, &w) <= 1e-15);
    assert_eq!(wg.side_b.max_abs(), 0.0, "a fixed plane contributes nothing");
    for frame in random_frames(5, 1) {
        let w = rebuild_w_fast(&assemble_direction(&[frame]), &wg.combined).unwrap();
        let mut e = DenseMat::identity(3);
        e.scale(1.0 / m);
        assert!(max_diff(&w, &e) <= 1e-15);
    }
}

#[test]
fn two_identical_objects_double_w() {
    let pm = |x: f64| Body::Soft(SoftBody::point_mass(Vector3::new(x, 0.0, 0.0), 1.0).unwrap());
    let bodies = vec![pm(0.0), pm(0.0)];
    let states: Vec<_> = bodies.iter().map(|b| b.initial_state(Vector3::zeros(), UnitQuaternion::identity())).collect();
    let factors: Vec<_> = bodies.iter().zip(&states).map(|(b, s)| factorize(&assemble_matrix(b, s, 0.01).unwrap()).unwrap()).collect();
    let single = SparseRows::new(3, 3);
    let mut g = single.clone();
    for r in 0..3 {
        g.add(r, r, 1.0);
    }
    let mut neg = single;
    for r in 0..3 {
        neg.add(r, r, -1.0);
    }
    let d = assemble_direction(&[axis_frame()]);
    let one = assemble_w_standard(&[assemble_h(&d, &g).unwrap()], &[&factors[0]], 3).unwrap();
    let both = assemble_w_standard(&[assemble_h(&d, &g).unwrap(), assemble_h(&d, &neg).unwrap()], &[&factors[0], &factors[1]], 3).unwrap();
    let mut twice = one.clone();
    twice.scale(2.0);
    assert!(max_diff(&both, &twice) <= 1e-15);
}

#[test]
fn standard_w_matches_dense_oracle() {
    for fx in [block_on_plane(), two_blocks()] {
        let d = assemble_direction(&fx.frames);
        let h = fx.h(&d);
        let w = assemble_w_standard(&h, &fx.factors(), fx.c()).unwrap();
        let oracle = dense_schur(&fx, &h);
        assert!(max_diff(&w, &oracle) <= 1e-9 * oracle.max_abs());
        assert!(w.asymmetry() <= 1e-10 * w.max_abs());
    }
}

#[test]
fn mapping_identity_holds() {
    for fx in [block_on_plane(), two_blocks()] {
        let wg = assemble_wg(&fx.pairs, &fx.g, &fx.factors()).unwrap();
        let oracle = dense_schur(&fx, &fx.g);
        assert!(max_diff(&wg.combined, &oracle) <= 1e-9 * oracle.max_abs());
        for frames in [fx.frames.clone(), random_frames(fx.pairs.len(), 77)] {
            let d = assemble_direction(&frames);
            let standard = assemble_w_standard(&fx.h(&d), &fx.factors(), fx.c()).unwrap();
            let fast = rebuild_w_fast(&d, &wg.combined).unwrap();
            assert!(max_diff(&standard, &fast) <= 1e-10 * standard.norm_inf());
            let dense = gemm(&gemm(&d.to_dense(), &wg.combined, false, false).unwrap(), &d.to_dense(), false, true).unwrap();
            assert!(max_diff(&dense, &fast) <= 1e-14 * standard.max_abs());
        }
    }
}

#[test]
fn fast_rebuild_is_block_congruence() {
    let fx = block_on_plane();
    let wg = assemble_wg(&fx.pairs, &fx.g, &fx.factors()).unwrap();
    let d0 = assemble_direction(&fx.frames);
    let w0 = rebuild_w_fast(&d0, &wg.combined).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rotations: Vec<Matrix3<f64>> = (0..fx.pairs.len())
        .map(|_| {
            let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            *UnitQuaternion::from_scaled_axis(axis).to_rotation_matrix().matrix()
        })
        .collect();
    let d1 = DirectionMatrix { blocks: (0..fx.pairs.len()).map(|i| rotations[i] * d0.block(i)).collect() };
    let w1 = rebuild_w_fast(&d1, &wg.combined).unwrap();
    let standard = assemble_w_standard(&fx.h(&d1), &fx.factors(), fx.c()).unwrap();
    assert!(max_diff(&w1, &standard) <= 1e-10 * standard.norm_inf());
    for i in 0..fx.pairs.len() {
        for j in 0..fx.pairs.len() {
            let get = |w: &DenseMat| Matrix3::from_fn(|r, c| w[(3 * i + r, 3 * j + c)]);
            let expect = rotations[i] * get(&w0) * rotations[j].transpose();
            assert!((expect - get(&w1)).abs().max() <= 1e-12 * w0.max_abs());
        }
    }
}

#[test]
fn violation_examples() {
    let d = assemble_direction(&[axis_frame()]);
    let p = PointPair { a: Vector3::new(0.0, -0.01, 0.0), b: Vector3::zeros() };
    assert_eq!(compute_violation(&d, &[p]).unwrap()[0], -0.01);
    let p = PointPair { a: Vector3::new(0.3, 0.2, 0.1), b: Vector3::new(0.3, 0.2, 0.1) };
    assert_eq!(compute_violation(&d, &[p]).unwrap(), vec![0.0; 3]);

    let frames = random_frames(4, 6);
    let d = assemble_direction(&frames);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pts: Vec<PointPair> = (0..4)
        .map(|_| PointPair { a: Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)), b: Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)) })
        .collect();
    let delta = compute_violation(&d, &pts).unwrap();
    for (i, (f, p)) in frames.iter().zip(&pts).enumerate() {
        let r = p.a - p.b;
        assert!((delta[3 * i] - f.normal.dot(&r)).abs() <= 1e-14);
        assert!((delta[3 * i + 1] - f.tangent1.dot(&r)).abs() <= 1e-14);
        assert!((delta[3 * i + 2] - f.tangent2.dot(&r)).abs() <= 1e-14);
    }
}

#[test]
fn fast_update_point_mass_scalar() {
    let m = 1.0;
    let h = 0.01;
    let fx = Fixture::new(
        vec![Body::Soft(SoftBody::point_mass(Vector3::new(0.0, -0.001, 0.0), m).unwrap())],
        vec![Collider::fixed_plane(Vector3::zeros(), Vector3::y())],
        0.01,
    );
    let wg = assemble_wg(&fx.pairs, &fx.g, &fx.factors()).unwrap();
    let d = assemble_direction(&fx.frames);
    let pts = vec![PointPair { a: fx.pairs[0].pa, b: fx.pairs[0].pb }];
    assert_eq!(fast_update_proximity(&pts, &wg, &d, &[0.0; 3], h).unwrap(), pts);
    let lambda_n = 12.5;
    let next = fast_update_proximity(&pts, &wg, &d, &[lambda_n, 0.0, 0.0], h).unwrap();
    let before = compute_violation(&d, &pts).unwrap()[0];
    let after = compute_violation(&d, &next).unwrap()[0];
    assert!((after - before - h * h * lambda_n / m).abs() <= 1e-15);
    assert_eq!(next[0].b, pts[0].b);
}

/// Applying the mechanical correction `h A⁻¹ Hᵀ λ` and re-evaluating the
/// mapping must land on the proximity update.
#[test]
fn fast_update_matches_mechanical_correction() {
    let h = 0.01;
    for fx in [block_on_plane(), two_blocks()] {
        let d = assemble_direction(&random_frames(fx.pairs.len(), 21));
        let wg = assemble_wg(&fx.pairs, &fx.g, &fx.factors()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lambda: Vec<f64> = (0..fx.c()).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let view = SceneView::new(&fx.bodies, &fx.states, &fx.colliders, 0.0);
        let pts = view.points(&fx.pairs);
        let fast = fast_update_proximity(&pts, &wg, &d, &lambda, h).unwrap();

        let hs = fx.h(&d);
        let moved: Vec<Vec<f64>> = fx
            .states
            .iter()
            .zip(&hs)
            .zip(&fx.factors)
            .map(|((s, hb), f)| {
                let dv: Vec<f64> = linalg::solve(f, &hb.matvec_transpose(&lambda).unwrap()).unwrap().iter().map(|x| h * x).collect();
                s.q.iter().zip(&dv).map(|(q, v)| q + h * v).collect()
            })
            .collect();
        let view = SceneView::with_positions(&fx.bodies, &fx.states, &moved, &fx.colliders, 0.0);
        let mech = view.points(&fx.pairs);
        for (x, y) in fast.iter().zip(&mech) {
            assert!((x.a - y.a).norm() <= 1e-9 && (x.b - y.b).norm() <= 1e-9);
        }
    }
}

#[test]
fn dimension_mismatches_are_reported() {
    let d = assemble_direction(&[axis_frame()]);
    assert!(matches!(assemble_h(&d, &SparseRows::new(6, 3)), Err(ConstraintError::DimensionMismatch { .. })));
    assert!(matches!(rebuild_w_fast(&d, &DenseMat::zeros(6, 6)), Err(ConstraintError::DimensionMismatch { .. })));
    assert!(matches!(d.apply_transpose(&[1.0]), Err(ConstraintError::DimensionMismatch { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fast_update_is_linear_in_lambda(seed in 0u64..1000, split in 0.0..1.0f64) {
        let fx = block_on_plane();
        let d = assemble_direction(&random_frames(fx.pairs.len(), seed));
        let wg = assemble_wg(&fx.pairs, &fx.g, &fx.factors()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let l1: Vec<f64> = (0..fx.c()).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let l2: Vec<f64> = l1.iter().map(|x| x * split).collect();
        let l3: Vec<f64> = l1.iter().zip(&l2).map(|(a, b)| a - b).collect();
        let p0: Vec<PointPair> = fx.pairs.iter().map(|p| PointPair { a: p.pa, b: p.pb }).collect();
        let once = fast_update_proximity(&p0, &wg, &d, &l1, 0.01).unwrap();
        let twice = fast_update_proximity(&fast_update_proximity(&p0, &wg, &d, &l2, 0.01).unwrap(), &wg, &d, &l3, 0.01).unwrap();
        for (x, y) in once.iter().zip(&twice) {
            prop_assert!((x.a - y.a).norm() <= 1e-12 && (x.b - y.b).norm() <= 1e-12);
        }
    }

    #[test]
    fn delassus_is_symmetric_psd(seed in 0u64..1000) {
        let fx = block_on_plane();
        let d = assemble_direction(&random_frames(fx.pairs.len(), seed));
        let wg = assemble_wg(&fx.pairs, &fx.g, &fx.factors()).unwrap();
        let w = rebuild_w_fast(&d, &wg.combined).unwrap();
        prop_assert!(w.asymmetry() <= 1e-10 * w.max_abs());
        let eig = nalgebra::DMatrix::from_row_slice(w.rows(), w.cols(), w.as_slice()).symmetric_eigenvalues();
        let spectral = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        prop_assert!(eig.iter().all(|e| *e >= -1e-8 * spectral));
    }
}
