//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles here never call into the assembly code they check: rectangle
//! eigenvalues come from separation of variables, polynomial roots from a
//! Durand–Kerner iteration, and form values from elementwise integration
//! written out from node coordinates.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wavepencil::c64;
use wavepencil::forms::{assemble_forms, FormMatrices};
use wavepencil::geometry::{CrossSectionMesh, MaterialConfig, Rect};
use wavepencil::pencil::{
    default_exclusion_tol, filter_degenerate, jordan_chains, linearize, solve_spectrum, ChainOptions, ModeChain, QuarticPencil,
    SolveOptions,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn z(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

/// `[0,π]²` with the inclusion `[π/4,π/2]²`, mesh size `π/div`.
pub fn partially_filled(div: usize, eps2: f64) -> (CrossSectionMesh, MaterialConfig) {
    let mesh = CrossSectionMesh::build_rect_with_inclusion(
        Rect::new(0.0, 0.0, PI, PI),
        Rect::new(PI / 4.0, PI / 4.0, PI / 2.0, PI / 2.0),
        PI / div as f64,
    )
    .unwrap();
    (mesh, MaterialConfig::new(1.0, eps2).unwrap())
}

/// `[0,s]²` with the inclusion `[s/4,s/2]²`, mesh size `s/div`.
pub fn scaled_square(side: f64, div: usize, eps: (f64, f64)) -> (CrossSectionMesh, MaterialConfig) {
    let mesh = CrossSectionMesh::build_rect_with_inclusion(
        Rect::new(0.0, 0.0, side, side),
        Rect::new(side / 4.0, side / 4.0, side / 2.0, side / 2.0),
        side / div as f64,
    )
    .unwrap();
    (mesh, MaterialConfig::new(eps.0, eps.1).unwrap())
}

/// Unloaded `[0,w]×[0,h]`, mesh size `size`.
pub fn homogeneous(w: f64, h: f64, size: f64, eps: f64) -> (CrossSectionMesh, MaterialConfig) {
    (CrossSectionMesh::build_rect(Rect::new(0.0, 0.0, w, h), size).unwrap(), MaterialConfig::new(eps, eps).unwrap())
}

/// Assembled and solved problem with chains sorted by `|γ|`.
pub struct Solved {
    pub mesh: CrossSectionMesh,
    pub mat: MaterialConfig,
    pub forms: FormMatrices,
    pub pencil: QuarticPencil,
    pub chains: Vec<ModeChain>,
    pub excluded: usize,
}

pub fn solve(mesh: CrossSectionMesh, mat: MaterialConfig) -> Solved {
    let forms = assemble_forms(&mesh, &mat).unwrap();
    let pencil = QuarticPencil::from_forms(&forms);
    let lin = linearize(&pencil).unwrap();
    let pairs = solve_spectrum(&lin, &SolveOptions::default()).unwrap();
    let (kept, excluded) = filter_degenerate(pairs, &mat, default_exclusion_tol(&mat));
    let mut chains = jordan_chains(&pencil, &kept, &ChainOptions::default()).unwrap();
    chains.sort_by(|a, b| a.gamma.norm().total_cmp(&b.gamma.norm()).then(a.gamma.im.total_cmp(&b.gamma.im)).then(a.gamma.re.total_cmp(&b.gamma.re)));
    Solved { mesh, mat, forms, pencil, chains, excluded: excluded.len() }
}

/// Laplacian eigenvalues `(mπ/w)² + (nπ/h)²` of a rectangle, ascending, with
/// multiplicity: Dirichlet (`m, n ≥ 1`) or Neumann without the constant
/// (`m, n ≥ 0`, not both zero).
pub fn rectangle_eigenvalues(w: f64, h: f64, dirichlet: bool, count: usize) -> Vec<f64> {
    let start = if dirichlet { 1 } else { 0 };
    let mut v = Vec::new();
    for m in start..40 {
        for n in start..40 {
            if m == 0 && n == 0 {
                continue;
            }
            v.push((m as f64 * PI / w).powi(2) + (n as f64 * PI / h).powi(2));
        }
    }
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

/// Roots of `Σ c_k x^k` (ascending, `c_deg ≠ 0`) by Durand–Kerner.
pub fn polynomial_roots(c: &[f64]) -> Vec<c64> {
    let deg = c.len() - 1;
    let lead = c[deg];
    let monic: Vec<c64> = c.iter().map(|&x| z(x / lead, 0.0)).collect();
    let eval = |x: c64| monic.iter().rev().fold(z(0.0, 0.0), |acc, &a| acc * x + a);
    let radius = 1.0 + monic[..deg].iter().map(|a| a.norm()).fold(0.0, f64::max);
    let seed = z(0.4, 0.9);
    let mut r: Vec<c64> = (0..deg).map(|k| seed.powu(k as u32) * radius).collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..deg {
            let mut den = z(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    den *= r[i] - r[j];
                }
            }
            let step = eval(r[i]) / den;
            r[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * radius {
            break;
        }
    }
    r
}

/// Match two root lists up to ordering; returns the largest distance.
pub fn match_roots(a: &[c64], b: &[c64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Form values integrated directly over elements and interface edges:
/// `(k, a⁽¹⁾, a⁽²⁾, s, a₂)`.
pub fn direct_scalar_forms(pi: &[c64], psi: &[c64], mesh: &CrossSectionMesh, mat: &MaterialConfig) -> [f64; 5] {
    let nodes = mesh.nodes();
    let mut k = 0.0;
    let mut ar = [0.0, 0.0];
    let mut a2 = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let eps = mat.eps(mesh.tags()[t]);
        let [p0, p1, p2] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let area = 0.5 * det.abs();
        // gradient of the linear interpolant from the 2×2 system
        let grad = |u: &[c64]| -> [c64; 2] {
            let (du1, du2) = (u[tri[1]] - u[tri[0]], u[tri[2]] - u[tri[0]]);
            [
                (du1 * (p2[1] - p0[1]) - du2 * (p1[1] - p0[1])) / det,
                (du2 * (p1[0] - p0[0]) - du1 * (p2[0] - p0[0])) / det,
            ]
        };
        // ∫|u|² for a linear u: (area/6)(Σ|u_i|² + Re Σ_{i<j} u_i ū_j)
        let mass = |u: &[c64]| -> f64 {
            let v = [u[tri[0]], u[tri[1]], u[tri[2]]];
            let diag: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            let off = (v[0] * v[1].conj() + v[1] * v[2].conj() + v[2] * v[0].conj()).re;
            area / 6.0 * (diag + off)
        };
        let gp = grad(pi);
        let gs = grad(psi);
        let gp2 = gp[0].norm_sqr() + gp[1].norm_sqr();
        let gs2 = gs[0].norm_sqr() + gs[1].norm_sqr();
        k += eps * mass(pi) + mass(psi);
        ar[(mesh.tags()[t] - 1) as usize] += area * (eps * gp2 + gs2);
        a2 += area * (gp2 + gs2 / eps);
    }
    let mut s = c64::new(0.0, 0.0);
    for &[a, b] in mesh.interface_edges() {
        // stored a→b runs counterclockwise around Ω₂; as part of ∂Ω₁ the
        // edge is traversed b→a, and the arc-length factors cancel.
        let dpi = pi[a] - pi[b];
        let dpsi = psi[a] - psi[b];
        s += dpi * (psi[a] + psi[b]).conj() * 0.5 - dpsi * (pi[a] + pi[b]).conj() * 0.5;
    }
    [k, ar[0], ar[1], s.re, a2]
}

/// Relative difference `|a − b| / max(|a|, |b|, floor)`.
pub fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
