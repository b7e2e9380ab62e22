//! Conjugate waves, pairings, Gram blocks, norm identities, the decay of
//! `N_n`, Helmholtz splittings and completeness residuals.

mod common;

use std::f64::consts::PI;

use common::{rng, z};
use rand::Rng;
use wavepencil::c64;
use wavepencil::geometry::CrossSectionMesh;
use wavepencil::modal::{
    basis_decay, biorthogonalize, completeness_residual, conjugate, conjugate_wave, gram_block, norm_identities, norm_sq, pairing,
    smooth_target, transversal, verify_pairing_recursion, Field4, Pairing, SplitOperators,
};
use wavepencil::pipeline::{evanescent_family, trend_window, windowed_increases};
use wavepencil::spectra::random_field;
use wavepencil::waves::{build_transversal, TransversalField};

const TOL: f64 = 1e-8;

fn random_field4(n: usize, r: &mut impl Rng) -> Field4 {
    (0..n).map(|_| std::array::from_fn(|_| z(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))).collect()
}

fn waves(s: &common::Solved, count: usize) -> Vec<Vec<TransversalField>> {
    s.chains.iter().take(count).map(|c| build_transversal(c, &s.forms, &s.mesh, TOL).unwrap()).collect()
}

fn combine(a: &[[c64; 4]], ca: c64, b: &[[c64; 4]], cb: c64) -> Field4 {
    a.iter().zip(b).map(|(x, y)| std::array::from_fn(|k| ca * x[k] + cb * y[k])).collect()
}

#[test]
fn conjugate_wave_is_a_rotation_and_an_isometry() {
    let (mesh, _) = common::partially_filled(4, 2.0);
    let mut r = rng(1);
    let v = random_field4(mesh.n_triangles(), &mut r);
    let w = conjugate(&v);
    for (a, b) in v.iter().zip(&w) {
        assert_eq!(*b, [a[3], -a[2], -a[1], a[0]]);
    }
    // H_t × e₃ and e₃ × E_t turn in opposite senses, so twice is the identity
    assert_eq!(conjugate(&w), v);
    assert!((norm_sq(&v, &mesh) - norm_sq(&w, &mesh)).abs() < 1e-14 * norm_sq(&v, &mesh));
}

#[test]
fn pairing_conventions_and_mesh_mismatch() {
    let (mesh, _) = common::partially_filled(4, 2.0);
    let n = mesh.n_triangles();
    let mut r = rng(2);
    let real: Field4 = (0..n).map(|_| std::array::from_fn(|_| z(r.random_range(-1.0..1.0), 0.0))).collect();
    let real2: Field4 = (0..n).map(|_| std::array::from_fn(|_| z(r.random_range(-1.0..1.0), 0.0))).collect();
    for kind in [Pairing::Bilinear, Pairing::Sesquilinear] {
        assert_eq!(pairing(&real, &real2, &mesh, kind).unwrap().im, 0.0);
    }
    let v = random_field4(n, &mut r);
    let w = random_field4(n, &mut r);
    let c = z(0.3, -1.2);
    let scale = |f: &Field4| -> Field4 { f.iter().map(|a| a.map(|x| x * c)).collect() };
    let b = pairing(&v, &w, &mesh, Pairing::Bilinear).unwrap();
    let s = pairing(&v, &w, &mesh, Pairing::Sesquilinear).unwrap();
    let tol = 1e-13 * (b.norm() + s.norm() + 1.0);
    assert!((pairing(&scale(&v), &w, &mesh, Pairing::Bilinear).unwrap() - c * b).norm() < tol);
    assert!((pairing(&v, &scale(&w), &mesh, Pairing::Bilinear).unwrap() - c * b).norm() < tol);
    assert!((pairing(&scale(&v), &w, &mesh, Pairing::Sesquilinear).unwrap() - c * s).norm() < tol);
    assert!((pairing(&v, &scale(&w), &mesh, Pairing::Sesquilinear).unwrap() - c.conj() * s).norm() < tol);
    // ⟨V, V⟩ under the sesquilinear pairing is the squared norm
    let vv = pairing(&v, &v, &mesh, Pairing::Sesquilinear).unwrap();
    assert!((vv - z(norm_sq(&v, &mesh), 0.0)).norm() < 1e-13 * vv.norm());
    let err = pairing(&v[1..], &w, &mesh, Pairing::Bilinear).unwrap_err().to_string();
    assert!(err.contains("do not match the mesh"), "{err}");
    let other = CrossSectionMesh::build_rect(wavepencil::geometry::Rect::new(0.0, 0.0, 1.0, 1.0), 0.5).unwrap();
    assert!(pairing(&v, &w, &other, Pairing::Bilinear).is_err());
}

/// For TM₁₁ with γ = i and ε = 1, `k̃² = 2`, `Π = sin x sin y`, and the
/// closed-form integrals give `‖E_t‖² = ‖H_t‖² = π²/8`, summing to
/// `‖Π‖² = π²/4`. Both identities hold exactly for the discrete eigenpair.
#[test]
fn tm11_norm_identities() {
    let (mesh, mat) = common::homogeneous(PI, PI, PI / 8.0, 1.0);
    let s = common::solve(mesh, mat);
    let psi_norm = |c: &wavepencil::pencil::ModeChain| s.forms.to_nodal(&c.chain[0]).1.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let chain = s
        .chains
        .iter()
        .filter(|c| (c.gamma - z(0.0, 1.0)).norm() < 0.05)
        .min_by(|a, b| psi_norm(a).total_cmp(&psi_norm(b)))
        .unwrap();
    let w = build_transversal(chain, &s.forms, &s.mesh, TOL).unwrap().remove(0);
    let rep = norm_identities(&w, &s.mesh, &mat).unwrap();
    assert!(rep.value_identity.unwrap() < 1e-10, "{rep:?}");
    assert!(rep.energy_identity.unwrap() < 1e-10, "{rep:?}");
    // the closed-form split: the transversal energy is half electric, half
    // magnetic, up to the discretization error of the eigenvalue
    let e: f64 = (0..s.mesh.n_triangles()).map(|t| s.mesh.area(t) * (w.e[t][0].norm_sqr() + w.e[t][1].norm_sqr())).sum();
    let h: f64 = (0..s.mesh.n_triangles()).map(|t| s.mesh.area(t) * (w.h[t][0].norm_sqr() + w.h[t][1].norm_sqr())).sum();
    assert!((e / h - 1.0).abs() < 0.1, "{e} {h}");
}

#[test]
fn real_gamma_skips_the_energy_identity() {
    // ε = 4 on [0,π]²: TM₁₁ propagates with γ² = 4 − 2
    let (mesh, mat) = common::homogeneous(PI, PI, PI / 8.0, 4.0);
    let s = common::solve(mesh, mat);
    let chain = s.chains.iter().find(|c| c.gamma.im.abs() < 1e-9 && c.gamma.re > 0.0).unwrap();
    let w = build_transversal(chain, &s.forms, &s.mesh, TOL).unwrap().remove(0);
    let rep = norm_identities(&w, &s.mesh, &mat).unwrap();
    assert!(rep.energy_identity.is_none());
    assert!(rep.value_identity.unwrap() < 1e-10, "{rep:?}");
}

#[test]
fn distinct_modes_are_orthogonal_and_the_recursion_holds() {
    let (mesh, mat) = common::partially_filled(8, 2.0);
    let s = common::solve(mesh, mat);
    let ws = waves(&s, 10);
    let mut worst: f64 = 0.0;
    for i in 0..ws.len() {
        for j in 0..ws.len() {
            let e = verify_pairing_recursion(&ws[i], &ws[j], &s.mesh, Pairing::Bilinear).unwrap();
            if i == j {
                // n = m, p = q = 0: both sides vanish identically
                assert_eq!(e[0].relative, 0.0);
                assert!(e[0].normalized_pairing > 0.0);
            } else if s.chains[i].cluster_id != s.chains[j].cluster_id {
                worst = worst.max(e.iter().map(|x| x.normalized_pairing.max(x.relative)).fold(0.0, f64::max));
            }
        }
    }
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn simple_gram_blocks_invert_the_self_pairing() {
    let (mesh, mat) = common::partially_filled(8, 2.0);
    let s = common::solve(mesh, mat);
    let ws = waves(&s, 6);
    let g = biorthogonalize(&s.chains[..6], &ws, &s.mesh, Pairing::Bilinear, 1e8).unwrap();
    assert_eq!(g.blocks.len(), 6);
    for b in &g.blocks {
        assert!(b.conditioned && b.residual < 1e-12);
        let v = transversal(&ws[b.members[0].0][0]);
        let p = pairing(&v, &conjugate(&v), &s.mesh, Pairing::Bilinear).unwrap();
        assert!((b.inverse[0][0] * p - z(1.0, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn diagonal_gram_gives_diagonal_inverse() {
    let g = vec![vec![z(2.0, 1.0), z(0.0, 0.0)], vec![z(0.0, 0.0), z(-0.5, 0.0)]];
    let b = gram_block(0, z(0.0, 1.0), vec![(0, 0), (1, 0)], g, 1e8);
    assert!(b.conditioned);
    assert_eq!(b.inverse[0][1], z(0.0, 0.0));
    assert_eq!(b.inverse[1][0], z(0.0, 0.0));
    assert!((b.inverse[0][0] - z(1.0, 0.0) / z(2.0, 1.0)).norm() < 1e-15);
    assert!((b.inverse[1][1] + z(2.0, 0.0)).norm() < 1e-15);
}

/// The pair TE₁₀/TE₀₁ of the square, grouped as one eigenvalue and mixed so
/// that the Gram matrix is full; the inverse yields a biorthogonal family.
#[test]
fn mixed_pair_needs_the_full_two_by_two_solve() {
    let (mesh, mat) = common::homogeneous(PI, PI, PI / 8.0, 1.0);
    let s = common::solve(mesh, mat);
    let idx: Vec<usize> = (0..s.chains.len()).filter(|&i| s.chains[i].gamma.im > 0.0 && (s.chains[i].gamma.im - 0.11).abs() < 0.05).collect();
    assert_eq!(idx.len(), 2);
    let pair: Vec<_> = idx.iter().map(|&i| build_transversal(&s.chains[i], &s.forms, &s.mesh, TOL).unwrap()).collect();
    let v0 = transversal(&pair[0][0]);
    let v1 = transversal(&pair[1][0]);
    let vs = [combine(&v0, z(1.0, 0.0), &v1, z(0.7, 0.2)), combine(&v0, z(-0.4, 0.0), &v1, z(1.0, -0.3))];
    let wsum: Vec<Field4> = vs.iter().map(|v| conjugate(v)).collect();
    let g: Vec<Vec<c64>> = (0..2).map(|p| (0..2).map(|q| pairing(&vs[p], &wsum[q], &s.mesh, Pairing::Bilinear).unwrap()).collect()).collect();
    assert!(g[0][1].norm() > 0.1 * g[0][0].norm());
    let b = gram_block(0, s.chains[idx[0]].gamma, vec![(0, 0), (1, 0)], g, 1e8);
    assert!(b.conditioned && b.residual <= 1e-10, "{b:?}");
    // u_q = Σ_k a_kq w_k is biorthogonal to v_p
    for q in 0..2 {
        let u = combine(&wsum[0], b.inverse[0][q], &wsum[1], b.inverse[1][q]);
        for (p, v) in vs.iter().enumerate() {
            let d = pairing(v, &u, &s.mesh, Pairing::Bilinear).unwrap();
            let e = if p == q { z(1.0, 0.0) } else { z(0.0, 0.0) };
            assert!((d - e).norm() < 1e-10, "{p} {q} {d}");
        }
    }
    // grouping the computed pair under one cluster goes through the same path
    let mut chains = vec![s.chains[idx[0]].clone(), s.chains[idx[1]].clone()];
    chains[1].cluster_id = chains[0].cluster_id;
    let sys = biorthogonalize(&chains, &pair, &s.mesh, Pairing::Bilinear, 1e8).unwrap();
    assert_eq!(sys.blocks.len(), 1);
    assert_eq!(sys.blocks[0].members, vec![(0, 0), (1, 0)]);
    assert!(sys.blocks[0].residual <= 1e-10);
}

#[test]
fn decay_bound_holds_and_partners_grow() {
    let (mesh, mat) = common::partially_filled(8, 2.0);
    let s = common::solve(mesh, mat);
    let fam = evanescent_family(&s.chains);
    assert!(fam.len() > 40);
    let ev: Vec<TransversalField> = fam.iter().map(|&i| build_transversal(&s.chains[i], &s.forms, &s.mesh, TOL).unwrap().remove(0)).collect();
    let rows = basis_decay(&ev, &s.mesh, &mat).unwrap();
    for r in &rows {
        assert!(r.n_abs <= 1.05 * r.bound, "{r:?}");
        assert!((r.partner_norm * r.n_abs - 1.0).abs() < 1e-12);
        assert!((r.bound - 2.0 * 2.0 / r.gamma.norm()).abs() < 1e-14);
    }
    assert!(rows.windows(2).all(|p| p[1].bound <= p[0].bound));
    let n: Vec<f64> = rows.iter().map(|r| r.n_abs).collect();
    let w = trend_window(n.len());
    let (bad, steps) = windowed_increases(&n, w);
    assert!(steps >= 2 && bad == 0, "{bad}/{steps}");
    let partners: Vec<f64> = rows.iter().map(|r| r.partner_norm).collect();
    let head = partners[..w].iter().copied().fold(0.0, f64::max);
    let tail = partners[partners.len() - w..].iter().copied().fold(f64::INFINITY, f64::min);
    assert!(tail > head, "{head} {tail}");
}

#[test]
fn trend_helpers() {
    assert_eq!(trend_window(10), 8);
    assert_eq!(trend_window(400), 20);
    assert_eq!(windowed_increases(&[4.0, 3.0, 2.0, 1.0], 2), (0, 1));
    assert_eq!(windowed_increases(&[1.0, 1.0, 2.0, 2.0], 2), (1, 1));
}

fn zero_boundary(mesh: &CrossSectionMesh, f: &mut [c64]) {
    for b in mesh.boundary_nodes() {
        f[b] = z(0.0, 0.0);
    }
}

fn l2(mesh: &CrossSectionMesh, u: &[[c64; 2]]) -> f64 {
    (0..u.len()).map(|t| mesh.area(t) * (u[t][0].norm_sqr() + u[t][1].norm_sqr())).sum::<f64>().sqrt()
}

fn diff(a: &[[c64; 2]], b: &[[c64; 2]]) -> Vec<[c64; 2]> {
    a.iter().zip(b).map(|(x, y)| [x[0] - y[0], x[1] - y[1]]).collect()
}

#[test]
fn splits_separate_pure_parts() {
    let (mesh, mat) = common::partially_filled(8, 3.0);
    let forms = wavepencil::forms::assemble_forms(&mesh, &mat).unwrap();
    let ops = SplitOperators::new(&mesh, &forms);
    let nn = mesh.n_nodes();
    let mut r = rng(4);
    let mut f0 = random_field(nn, &mut r);
    zero_boundary(&mesh, &mut f0);
    let g0 = random_field(nn, &mut r);
    let zero = vec![z(0.0, 0.0); nn];
    let fmax = |v: &[c64]| v.iter().map(|x| x.norm()).fold(0.0, f64::max);

    // u = ∇′g₀ has no gradient part, u = ε∇f₀ no rotated part
    let u = ops.compose_1(&zero, &g0);
    let sp = ops.split_1(&u).unwrap();
    assert!(fmax(&sp.f) < 1e-10 * fmax(&g0));
    assert!(l2(&mesh, &diff(&ops.compose_1(&zero, &sp.g), &u)) < 1e-10 * l2(&mesh, &u));
    let u = ops.compose_1(&f0, &zero);
    let sp = ops.split_1(&u).unwrap();
    assert!(fmax(&sp.g) < 1e-10 * fmax(&f0));
    assert!(sp.f.iter().zip(&f0).all(|(a, b)| (a - b).norm() < 1e-10));

    // second splitting: u = ∇g₀ and u = ∇′f₀
    let u = ops.compose_2(&zero, &g0);
    let sp = ops.split_2(&u).unwrap();
    assert!(fmax(&sp.f) < 1e-10 * fmax(&g0));
    let u = ops.compose_2(&f0, &zero);
    let sp = ops.split_2(&u).unwrap();
    assert!(fmax(&sp.g) < 1e-10 * fmax(&f0));
    assert!(sp.f.iter().zip(&f0).all(|(a, b)| (a - b).norm() < 1e-10));
}

#[test]
fn manufactured_splits_are_recovered() {
    let (mesh, mat) = common::partially_filled(8, 4.0);
    let forms = wavepencil::forms::assemble_forms(&mesh, &mat).unwrap();
    let ops = SplitOperators::new(&mesh, &forms);
    let mut r = rng(9);
    for _ in 0..20 {
        let mut f0 = random_field(mesh.n_nodes(), &mut r);
        zero_boundary(&mesh, &mut f0);
        let g0 = random_field(mesh.n_nodes(), &mut r);
        for (u, sp) in [
            (ops.compose_1(&f0, &g0), ops.split_1(&ops.compose_1(&f0, &g0)).unwrap()),
            (ops.compose_2(&f0, &g0), ops.split_2(&ops.compose_2(&f0, &g0)).unwrap()),
        ] {
            assert!(sp.residual < 1e-10, "{}", sp.residual);
            // f is unique; g up to its mean
            assert!(sp.f.iter().zip(&f0).all(|(a, b)| (a - b).norm() < 1e-9));
            let rebuilt = if u == ops.compose_1(&f0, &g0) { ops.compose_1(&sp.f, &sp.g) } else { ops.compose_2(&sp.f, &sp.g) };
            assert!(l2(&mesh, &diff(&rebuilt, &u)) < 1e-10 * l2(&mesh, &u));
        }
    }
}

#[test]
fn completeness_projection_algebra() {
    let (mesh, mat) = common::partially_filled(8, 2.0);
    let s = common::solve(mesh, mat);
    let ws = waves(&s, 12);
    let modes: Vec<Field4> = ws.iter().flat_map(|c| c.iter().map(transversal)).collect();

    // an included mode is reproduced from its index on
    let curve = completeness_residual(&modes[4], &modes, &s.mesh).unwrap();
    assert!(curve.residuals[3].1 > 1e-3);
    assert!(curve.residuals[4..].iter().all(|&(_, r)| r < 1e-10));

    // a field orthogonal to the whole span keeps residual one
    let mut r = rng(6);
    let t = random_field4(s.mesh.n_triangles(), &mut r);
    let perp = orthogonal_component(&t, &modes, &s.mesh);
    let o = completeness_residual(&perp, &modes, &s.mesh).unwrap();
    assert!(o.residuals.iter().all(|&(_, r)| (r - 1.0).abs() < 1e-10));
    // the final residual of a general field is its orthogonal component
    let full = completeness_residual(&t, &modes, &s.mesh).unwrap();
    let expected = (norm_sq(&perp, &s.mesh) / norm_sq(&t, &s.mesh)).sqrt();
    assert!((full.residuals.last().unwrap().1 - expected).abs() < 1e-10);
    // appending the target itself closes the gap
    let mut with_t = modes.clone();
    with_t.push(t.clone());
    let c = completeness_residual(&t, &with_t, &s.mesh).unwrap();
    assert!(c.residuals.last().unwrap().1 < 1e-10 && c.dependent.is_empty());

    // a repeated mode is flagged as dependent and does not change the curve
    let mut rep = modes.clone();
    rep.insert(3, modes[1].clone());
    let cr = completeness_residual(&modes[7], &rep, &s.mesh).unwrap();
    assert_eq!(cr.dependent, vec![3]);
}

/// `t − P t` by an independent least-squares solve through the normal
/// equations of the weighted inner product.
fn orthogonal_component(t: &[[c64; 4]], modes: &[Field4], mesh: &CrossSectionMesh) -> Field4 {
    let m = modes.len();
    let ip = |a: &[[c64; 4]], b: &[[c64; 4]]| pairing(b, a, mesh, Pairing::Sesquilinear).unwrap();
    let g = faer::Mat::from_fn(m, m, |i, j| ip(&modes[i], &modes[j]));
    let rhs = faer::Mat::from_fn(m, 1, |i, _| ip(&modes[i], t));
    use faer::linalg::solvers::Solve;
    let x = g.full_piv_lu().solve(&rhs);
    let mut out = t.to_vec();
    for (k, f) in modes.iter().enumerate() {
        out = combine(&out, z(1.0, 0.0), f, -x[(k, 0)]);
    }
    out
}

/// Normalizing the modes leaves every projection residual unchanged.
#[test]
fn normalization_does_not_change_the_residual_curve() {
    let (mesh, mat) = common::partially_filled(8, 2.0);
    let s = common::solve(mesh, mat);
    let ws = waves(&s, 20);
    let modes: Vec<Field4> = ws.iter().flat_map(|c| c.iter().map(transversal)).collect();
    let mut r = rng(12);
    let scaled: Vec<Field4> = modes
        .iter()
        .map(|f| {
            let c = z(r.random_range(0.1..10.0), r.random_range(-5.0..5.0));
            f.iter().map(|a| a.map(|x| x * c)).collect()
        })
        .collect();
    let unit: Vec<Field4> = modes.iter().map(|f| {
        let n = norm_sq(f, &s.mesh).sqrt();
        f.iter().map(|a| a.map(|x| x / n)).collect()
    }).collect();
    let target = smooth_target(&s.mesh, &mat);
    let a = completeness_residual(&target, &modes, &s.mesh).unwrap();
    for other in [&scaled, &unit] {
        let b = completeness_residual(&target, other, &s.mesh).unwrap();
        for (x, y) in a.residuals.iter().zip(&b.residuals) {
            assert!((x.1 - y.1).abs() < 1e-10);
        }
    }
    assert!(a.residuals.windows(2).all(|p| p[1].1 <= p[0].1 + 1e-12));
    assert!(a.residuals.last().unwrap().1 < a.residuals[0].1);
}

#[test]
fn conjugate_wave_of_a_built_wave() {
    let (mesh, mat) = common::partially_filled(4, 2.0);
    let s = common::solve(mesh, mat);
    let w = build_transversal(&s.chains[0], &s.forms, &s.mesh, TOL).unwrap().remove(0);
    let a = conjugate_wave(&w);
    for t in 0..s.mesh.n_triangles() {
        assert_eq!(a[t], [w.h[t][1], -w.h[t][0], -w.e[t][1], w.e[t][0]]);
    }
}
