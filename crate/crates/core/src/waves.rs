//! Eigenwaves and associated waves built from longitudinal chains, and the
//! residual checks that tie them to Maxwell's equations.
//!
//! With `k̃² = ε − γ²` per region and `E′, H′` the previous chain member,
//!
//! ```text
//! E₁ = (iγ/k̃²)(∂₁Π − iE₁′) − (i/k̃²)(∂₂Ψ − iH₂′)
//! E₂ = (iγ/k̃²)(∂₂Π − iE₂′) + (i/k̃²)(∂₁Ψ − iH₁′)
//! H₁ = (iε/k̃²)(∂₂Π − iE₂′) + (iγ/k̃²)(∂₁Ψ − iH₁′)
//! H₂ = −(iε/k̃²)(∂₁Π − iE₁′) + (iγ/k̃²)(∂₂Ψ − iH₂′)
//! ```
//!
//! P1 longitudinal data make the transversal fields piecewise constant. The
//! componentwise Maxwell system is checked in the form
//!
//! ```text
//! (a) ∂₂Ψ − iγH₂ − iεE₁ = iH₂′        (d) ∂₂Π − iγE₂ + iH₁ = iE₂′
//! (b) iγH₁ − ∂₁Ψ − iεE₂ = −iH₁′       (e) iγE₁ − ∂₁Π + iH₂ = −iE₁′
//! (c) ∂₁H₂ − ∂₂H₁ − iεΠ = 0           (f) ∂₁E₂ − ∂₂E₁ + iΨ = 0
//! ```
//!
//! where (a, b, d, e) hold per triangle and (c, f) are tested weakly.
//!
//! Trace conventions on Γ: τ follows the stored interface direction
//! (counterclockwise around Ω₂), n is its left normal (into Ω₂) and
//! `[u] = u|_{Ω₂} − u|_{Ω₁}`.

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::FormMatrices;
use crate::geometry::{CrossSectionMesh, MaterialConfig};
use crate::pencil::ModeChain;

const I: c64 = c64 { re: 0.0, im: 1.0 };
const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

/// Transversal and longitudinal components of one wave of a chain.
#[derive(Clone, Debug, PartialEq)]
pub struct TransversalField {
    pub gamma: c64,
    /// Chain index (0 for the eigenwave).
    pub p: usize,
    /// `(E₁, E₂)` per triangle.
    pub e: Vec<[c64; 2]>,
    /// `(H₁, H₂)` per triangle.
    pub h: Vec<[c64; 2]>,
    /// Nodal `Π = E₃`.
    pub pi: Vec<c64>,
    /// Nodal `Ψ = H₃`.
    pub psi: Vec<c64>,
    /// `k̃² = ε_j − γ²` in regions 1 and 2.
    pub kt2: [c64; 2],
}

impl TransversalField {
    /// Transversal 4-vector `(E₁, E₂, H₁, H₂)` on triangle `t`.
    pub fn v4(&self, t: usize) -> [c64; 4] {
        [self.e[t][0], self.e[t][1], self.h[t][0], self.h[t][1]]
    }
}

/// Gradients of nodal field `u` per triangle.
pub fn triangle_gradients(mesh: &CrossSectionMesh, u: &[c64]) -> Vec<[c64; 2]> {
    (0..mesh.n_triangles())
        .map(|t| {
            let g = mesh.gradients(t);
            let tri = mesh.triangles()[t];
            let mut d = [ZERO; 2];
            for k in 0..3 {
                d[0] += u[tri[k]] * g[k][0];
                d[1] += u[tri[k]] * g[k][1];
            }
            d
        })
        .collect()
}

fn region_kt2(gamma: c64, materials: &MaterialConfig, exclusion_tol: f64) -> Result<[c64; 2]> {
    let kt2 = [
        c64::new(materials.eps1, 0.0) - gamma * gamma,
        c64::new(materials.eps2, 0.0) - gamma * gamma,
    ];
    for (j, k) in kt2.iter().enumerate() {
        if k.norm() < exclusion_tol {
            return Err(Error::Waves(format!(
                "k̃² = {k} in region {} is below the exclusion threshold: γ = {gamma} is a degeneration point",
                j + 1
            )));
        }
    }
    Ok(kt2)
}

/// One step of the recursion for a single triangle.
#[allow(clippy::too_many_arguments)]
fn recursion_step(gamma: c64, eps: f64, kt2: c64, dpi: [c64; 2], dpsi: [c64; 2], e_prev: [c64; 2], h_prev: [c64; 2]) -> ([c64; 2], [c64; 2]) {
    let a1 = dpi[0] - I * e_prev[0];
    let a2 = dpi[1] - I * e_prev[1];
    let b1 = dpsi[0] - I * h_prev[0];
    let b2 = dpsi[1] - I * h_prev[1];
    let ig = I * gamma / kt2;
    let ik = I / kt2;
    let ie = I * eps / kt2;
    (
        [ig * a1 - ik * b2, ig * a2 + ik * b1],
        [ie * a2 + ig * b1, -ie * a1 + ig * b2],
    )
}

/// Build the waves of a chain given nodal longitudinal members
/// `(Π_p, Ψ_p)`, bypassing the solver (also used for analytic data).
pub fn build_from_nodal(
    gamma: c64,
    members: &[(Vec<c64>, Vec<c64>)],
    mesh: &CrossSectionMesh,
    materials: &MaterialConfig,
    exclusion_tol: f64,
) -> Result<Vec<TransversalField>> {
    let kt2 = region_kt2(gamma, materials, exclusion_tol)?;
    let nt = mesh.n_triangles();
    let mut out: Vec<TransversalField> = Vec::with_capacity(members.len());
    for (p, (pi, psi)) in members.iter().enumerate() {
        let dpi = triangle_gradients(mesh, pi);
        let dpsi = triangle_gradients(mesh, psi);
        let mut e = vec![[ZERO; 2]; nt];
        let mut h = vec![[ZERO; 2]; nt];
        for t in 0..nt {
            let r = (mesh.tags()[t] - 1) as usize;
            let (ep, hp) = match out.last() {
                Some(prev) => (prev.e[t], prev.h[t]),
                None => ([ZERO; 2], [ZERO; 2]),
            };
            let (et, ht) = recursion_step(gamma, materials.eps(mesh.tags()[t]), kt2[r], dpi[t], dpsi[t], ep, hp);
            e[t] = et;
            h[t] = ht;
        }
        out.push(TransversalField { gamma, p, e, h, pi: pi.clone(), psi: psi.clone(), kt2 });
    }
    Ok(out)
}

/// Waves `p = 0..m` of a Jordan chain.
pub fn build_transversal(
    chain: &ModeChain,
    forms: &FormMatrices,
    mesh: &CrossSectionMesh,
    exclusion_tol: f64,
) -> Result<Vec<TransversalField>> {
    let members: Vec<(Vec<c64>, Vec<c64>)> = chain.chain.iter().map(|f| forms.to_nodal(f)).collect();
    build_from_nodal(chain.gamma, &members, mesh, &forms.materials, exclusion_tol)
}

/// Independent route: solve the four algebraic rows (a, b, d, e) of the
/// Maxwell system per triangle for `(E₁, E₂, H₁, H₂)`.
pub fn solve_dotted_system(
    gamma: c64,
    members: &[(Vec<c64>, Vec<c64>)],
    mesh: &CrossSectionMesh,
    materials: &MaterialConfig,
) -> Vec<Vec<[c64; 4]>> {
    let nt = mesh.n_triangles();
    let mut out: Vec<Vec<[c64; 4]>> = Vec::new();
    for (pi, psi) in members {
        let dpi = triangle_gradients(mesh, pi);
        let dpsi = triangle_gradients(mesh, psi);
        let mut cur = Vec::with_capacity(nt);
        for t in 0..nt {
            let eps = materials.eps(mesh.tags()[t]);
            let prev = out.last().map_or([ZERO; 4], |v| v[t]);
            let [e1p, e2p, h1p, h2p] = prev;
            // Unknown order (E₁, E₂, H₁, H₂).
            let a = [
                [-I * eps, ZERO, ZERO, -I * gamma],
                [ZERO, -I * eps, I * gamma, ZERO],
                [ZERO, -I * gamma, I, ZERO],
                [I * gamma, ZERO, ZERO, I],
            ];
            let b = [
                I * h2p - dpsi[t][1],
                -I * h1p + dpsi[t][0],
                I * e2p - dpi[t][1],
                -I * e1p + dpi[t][0],
            ];
            cur.push(solve4(a, b));
        }
        out.push(cur);
    }
    out
}

/// Gaussian elimination with partial pivoting on a 4×4 complex system.
fn solve4(mut a: [[c64; 4]; 4], mut b: [c64; 4]) -> [c64; 4] {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for c in col..4 {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut x = [ZERO; 4];
    for r in (0..4).rev() {
        let mut s = b[r];
        for c in r + 1..4 {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    x
}

/// Relative residual of one identity: `‖lhs − rhs‖ / (‖lhs‖ + ‖rhs‖)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub name: String,
    pub p: usize,
    pub absolute: f64,
    pub scale: f64,
    pub relative: f64,
}

impl ResidualEntry {
    fn new(name: &str, p: usize, diff: f64, scale: f64) -> Self {
        let relative = if scale > 0.0 { diff / scale } else { diff };
        Self { name: name.to_string(), p, absolute: diff, scale, relative }
    }
}

fn l2(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn diff_entry(name: &str, p: usize, lhs: &[c64], rhs: &[c64]) -> ResidualEntry {
    let d: Vec<c64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
    ResidualEntry::new(name, p, l2(&d), l2(lhs) + l2(rhs))
}

/// Element-level weak operators against P1 test functions.
struct Weak<'a> {
    mesh: &'a CrossSectionMesh,
    materials: &'a MaterialConfig,
}

impl Weak<'_> {
    /// `∫ w u φ_i` with `w = ε` (if `weighted`) or 1, consistent mass.
    fn mass(&self, u: &[c64], weighted: bool) -> Vec<c64> {
        let mut out = vec![ZERO; self.mesh.n_nodes()];
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let w = if weighted { self.materials.eps(self.mesh.tags()[t]) } else { 1.0 };
            let a = self.mesh.area(t) * w / 12.0;
            let sum = u[tri[0]] + u[tri[1]] + u[tri[2]];
            for k in 0..3 {
                out[tri[k]] += (sum + u[tri[k]]) * a;
            }
        }
        out
    }

    /// `∫ w F·∇φ_i` (or `∫ w F·∇′φ_i` if `rotated`) for piecewise-constant F.
    fn grad(&self, f: &[[c64; 2]], rotated: bool, weighted: bool) -> Vec<c64> {
        let mut out = vec![ZERO; self.mesh.n_nodes()];
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let w = if weighted { self.materials.eps(self.mesh.tags()[t]) } else { 1.0 };
            let a = self.mesh.area(t) * w;
            let g = self.mesh.gradients(t);
            for k in 0..3 {
                let d = if rotated { [g[k][1], -g[k][0]] } else { g[k] };
                out[tri[k]] += (f[t][0] * d[0] + f[t][1] * d[1]) * a;
            }
        }
        out
    }

    /// `∫ w ∇u·∇φ_i`.
    fn stiffness(&self, u: &[c64], weighted: bool) -> Vec<c64> {
        let gu = triangle_gradients(self.mesh, u);
        self.grad(&gu, false, weighted)
    }
}

fn interior_mask(mesh: &CrossSectionMesh) -> Vec<bool> {
    let mut m = vec![true; mesh.n_nodes()];
    for v in mesh.boundary_nodes() {
        m[v] = false;
    }
    m
}

fn masked(v: &[c64], mask: &[bool]) -> Vec<c64> {
    v.iter().zip(mask).filter(|(_, &k)| k).map(|(x, _)| *x).collect()
}

/// Weak identities relating transversal and longitudinal parts:
///
/// ```text
/// (a′) −i∫(E_t·(−∇′ḡ) + H_t·∇′f̄) = ∫(εΠ_p f̄ + Ψ_p ḡ)
/// (b′) −i∫(εE_t·∇f̄ + H_t·∇ḡ) = γ∫(εΠ_p f̄ + Ψ_p ḡ) + ∫(εΠ_{p−1} f̄ + Ψ_{p−1} ḡ)
/// ```
///
/// for all P1 `f ∈ H₀¹` and all P1 `g`.
pub fn weak_identities(fields: &[TransversalField], mesh: &CrossSectionMesh, materials: &MaterialConfig) -> Vec<ResidualEntry> {
    let w = Weak { mesh, materials };
    let interior = interior_mask(mesh);
    let mut out = Vec::new();
    for (p, fld) in fields.iter().enumerate() {
        let mpi = w.mass(&fld.pi, true);
        let mpsi = w.mass(&fld.psi, false);
        // (a′): f-part uses H, g-part uses E.
        let lhs_f: Vec<c64> = w.grad(&fld.h, true, false).iter().map(|v| -I * v).collect();
        let lhs_g: Vec<c64> = w.grad(&fld.e, true, false).iter().map(|v| I * v).collect();
        let mut lhs = masked(&lhs_f, &interior);
        lhs.extend(lhs_g);
        let mut rhs = masked(&mpi, &interior);
        rhs.extend(mpsi.iter().copied());
        out.push(diff_entry("weak_transversal", p, &lhs, &rhs));

        // (b′)
        let lhs_f: Vec<c64> = w.grad(&fld.e, false, true).iter().map(|v| -I * v).collect();
        let lhs_g: Vec<c64> = w.grad(&fld.h, false, false).iter().map(|v| -I * v).collect();
        let mut lhs = masked(&lhs_f, &interior);
        lhs.extend(lhs_g);
        let (ppi, ppsi) = if p > 0 {
            (w.mass(&fields[p - 1].pi, true), w.mass(&fields[p - 1].psi, false))
        } else {
            (vec![ZERO; mesh.n_nodes()], vec![ZERO; mesh.n_nodes()])
        };
        let rf: Vec<c64> = mpi.iter().zip(&ppi).map(|(a, b)| fld.gamma * a + b).collect();
        let rg: Vec<c64> = mpsi.iter().zip(&ppsi).map(|(a, b)| fld.gamma * a + b).collect();
        let mut rhs = masked(&rf, &interior);
        rhs.extend(rg);
        out.push(diff_entry("weak_longitudinal", p, &lhs, &rhs));
    }
    out
}

/// Residuals of the six componentwise Maxwell equations for each chain
/// member: (a, b, d, e) per triangle in the area-weighted L₂ norm, (c) and
/// (f) weakly against P1 test functions (`f ∈ H₀¹` for (c), all `g` for (f)).
pub fn maxwell_residuals(fields: &[TransversalField], mesh: &CrossSectionMesh, materials: &MaterialConfig) -> Vec<ResidualEntry> {
    let w = Weak { mesh, materials };
    let interior = interior_mask(mesh);
    let nt = mesh.n_triangles();
    let mut out = Vec::new();
    for (p, fld) in fields.iter().enumerate() {
        let g = fld.gamma;
        let dpi = triangle_gradients(mesh, &fld.pi);
        let dpsi = triangle_gradients(mesh, &fld.psi);
        // Per triangle: residual and the sum of the moduli of its terms.
        let mut res = [Vec::with_capacity(nt), Vec::with_capacity(nt), Vec::with_capacity(nt), Vec::with_capacity(nt)];
        let mut mag = [Vec::with_capacity(nt), Vec::with_capacity(nt), Vec::with_capacity(nt), Vec::with_capacity(nt)];
        for t in 0..nt {
            let eps = materials.eps(mesh.tags()[t]);
            let sa = mesh.area(t).sqrt();
            let [e1, e2] = fld.e[t];
            let [h1, h2] = fld.h[t];
            let (ep, hp) = if p > 0 { (fields[p - 1].e[t], fields[p - 1].h[t]) } else { ([ZERO; 2], [ZERO; 2]) };
            let rows: [[c64; 4]; 4] = [
                [dpsi[t][1], -I * g * h2, -I * eps * e1, -I * hp[1]],
                [I * g * h1, -dpsi[t][0], -I * eps * e2, I * hp[0]],
                [dpi[t][1], -I * g * e2, I * h1, -I * ep[1]],
                [I * g * e1, -dpi[t][0], I * h2, I * ep[0]],
            ];
            for (k, terms) in rows.iter().enumerate() {
                let r: c64 = terms.iter().sum();
                let m: f64 = terms.iter().map(|z| z.norm()).sum();
                res[k].push(r * sa);
                mag[k].push(c64::new(m * sa, 0.0));
            }
        }
        for (k, name) in ["maxwell_a", "maxwell_b", "maxwell_d", "maxwell_e"].iter().enumerate() {
            out.push(ResidualEntry::new(name, p, l2(&res[k]), l2(&mag[k])));
        }
        // (c) weakly: ∫(∂₁H₂ − ∂₂H₁) f = ∫H·∇′f for f ∈ H₀¹; equals i∫εΠf.
        let lc = masked(&w.grad(&fld.h, true, false), &interior);
        let rc: Vec<c64> = masked(&w.mass(&fld.pi, true), &interior).iter().map(|v| I * v).collect();
        // (f) weakly with E_τ = 0 on Γ₀ as natural condition: ∫E·∇′g = −i∫Ψg.
        let lf = w.grad(&fld.e, true, false);
        let rf: Vec<c64> = w.mass(&fld.psi, false).iter().map(|v| -I * v).collect();
        // Both curl relations share one scale so that a vanishing component
        // (TE- or TM-like waves) does not turn roundoff into O(1).
        let scale = l2(&lc) + l2(&rc) + l2(&lf) + l2(&rf);
        let dc: Vec<c64> = lc.iter().zip(&rc).map(|(a, b)| a - b).collect();
        let df: Vec<c64> = lf.iter().zip(&rf).map(|(a, b)| a - b).collect();
        out.push(ResidualEntry::new("maxwell_c", p, l2(&dc), scale));
        out.push(ResidualEntry::new("maxwell_f", p, l2(&df), scale));
    }
    out
}

/// Weak curl relations `∂₁E₂ − ∂₂E₁ = −iΨ_p` and `∂₁H₂ − ∂₂H₁ = iεΠ_p`.
pub fn curl_relations(fields: &[TransversalField], mesh: &CrossSectionMesh, materials: &MaterialConfig) -> Vec<ResidualEntry> {
    maxwell_residuals(fields, mesh, materials)
        .into_iter()
        .filter_map(|mut r| {
            let name = match r.name.as_str() {
                "maxwell_f" => "curl_e",
                "maxwell_c" => "curl_h",
                _ => return None,
            };
            r.name = name.to_string();
            Some(r)
        })
        .collect()
}

/// Boundary and interface trace residuals of one chain member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub p: usize,
    /// `‖E_τ‖_{L₂(Γ₀)}` relative to the field norm.
    pub e_tangential_outer: f64,
    /// `‖H_n‖_{L₂(Γ₀)}` relative to the field norm.
    pub h_normal_outer: f64,
    /// `‖[E_τ]‖_{L₂(Γ)}` relative to the field norm.
    pub e_tangential_jump: f64,
    /// `‖[H_τ]‖_{L₂(Γ)}` relative to the field norm.
    pub h_tangential_jump: f64,
    /// `‖[ε]⟨E_τ⟩ + i[∂Ψ/∂n]‖_{L₂(Γ)}`, relative; `None` when ε₁ = ε₂.
    pub jump_identity_e: Option<f64>,
    /// `‖[ε]⟨H_τ⟩ − i[ε∂Π/∂n]‖_{L₂(Γ)}`, relative; `None` when ε₁ = ε₂.
    pub jump_identity_h: Option<f64>,
    /// Set when ε₁ = ε₂ (jump identities degenerate).
    pub scalar_case: bool,
}

fn edge_owner(mesh: &CrossSectionMesh) -> std::collections::HashMap<(usize, usize), usize> {
    let mut m = std::collections::HashMap::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for k in 0..3 {
            m.insert((tri[k], tri[(k + 1) % 3]), t);
        }
    }
    m
}

/// Trace residuals on Γ₀ and Γ from one-sided triangle constants.
pub fn trace_residuals(fields: &[TransversalField], mesh: &CrossSectionMesh, materials: &MaterialConfig) -> Vec<TraceReport> {
    let owner = edge_owner(mesh);
    let scalar_case = materials.is_homogeneous();
    let jump_eps = materials.eps2 - materials.eps1;
    fields
        .iter()
        .map(|fld| {
            let energy: f64 = (0..mesh.n_triangles())
                .map(|t| mesh.area(t) * fld.v4(t).iter().map(|z| z.norm_sqr()).sum::<f64>())
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            let dpi = triangle_gradients(mesh, &fld.pi);
            let dpsi = triangle_gradients(mesh, &fld.psi);
            let geom = |a: usize, b: usize| {
                let (pa, pb) = (mesh.nodes()[a], mesh.nodes()[b]);
                let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
                let tau = [(pb[0] - pa[0]) / len, (pb[1] - pa[1]) / len];
                (len, tau, [-tau[1], tau[0]])
            };
            let dot = |v: [c64; 2], d: [f64; 2]| v[0] * d[0] + v[1] * d[1];
            let (mut et, mut hn) = (0.0, 0.0);
            for &[a, b] in mesh.outer_edges() {
                let t = owner[&(a, b)];
                let (len, tau, n) = geom(a, b);
                et += len * dot(fld.e[t], tau).norm_sqr();
                hn += len * dot(fld.h[t], n).norm_sqr();
            }
            let (mut ej, mut hj, mut ie, mut ih) = (0.0, 0.0, 0.0, 0.0);
            for &[a, b] in mesh.interface_edges() {
                let (t_in, t_out) = (owner[&(a, b)], owner[&(b, a)]);
                let (len, tau, n) = geom(a, b);
                let e_in = dot(fld.e[t_in], tau);
                let e_out = dot(fld.e[t_out], tau);
                let h_in = dot(fld.h[t_in], tau);
                let h_out = dot(fld.h[t_out], tau);
                ej += len * (e_in - e_out).norm_sqr();
                hj += len * (h_in - h_out).norm_sqr();
                if !scalar_case {
                    let dn_psi = dot(dpsi[t_in], n) - dot(dpsi[t_out], n);
                    let eps_in = materials.eps(mesh.tags()[t_in]);
                    let eps_out = materials.eps(mesh.tags()[t_out]);
                    let dn_pi = dot(dpi[t_in], n) * eps_in - dot(dpi[t_out], n) * eps_out;
                    let e_avg = (e_in + e_out) * 0.5;
                    let h_avg = (h_in + h_out) * 0.5;
                    ie += len * (e_avg * jump_eps + I * dn_psi).norm_sqr();
                    ih += len * (h_avg * jump_eps - I * dn_pi).norm_sqr();
                }
            }
            let rel = |v: f64| v.sqrt() / energy;
            TraceReport {
                p: fld.p,
                e_tangential_outer: rel(et),
                h_normal_outer: rel(hn),
                e_tangential_jump: rel(ej),
                h_tangential_jump: rel(hj),
                jump_identity_e: (!scalar_case).then(|| rel(ie)),
                jump_identity_h: (!scalar_case).then(|| rel(ih)),
                scalar_case,
            }
        })
        .collect()
}

/// Weak residuals of `ΔΠ_p + k̃²Π_p − 2γΠ_{p−1} − Π_{p−2} = 0` and the Ψ
/// counterpart, tested with P1 functions supported inside one region
/// (names `helmholtz_pi_r1`, `helmholtz_psi_r2`, …). All four are scaled by
/// the combined size of the terms of both components.
pub fn longitudinal_residual(fields: &[TransversalField], mesh: &CrossSectionMesh, materials: &MaterialConfig) -> Vec<ResidualEntry> {
    let w = Weak { mesh, materials };
    let n = mesh.n_nodes();
    // Region of the support of φ_i, or None if it touches both regions.
    let mut region: Vec<Option<u8>> = vec![None; n];
    let mut mixed = vec![false; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            match region[v] {
                None if !mixed[v] => region[v] = Some(mesh.tags()[t]),
                Some(r) if r != mesh.tags()[t] => {
                    region[v] = None;
                    mixed[v] = true;
                }
                _ => {}
            }
        }
    }
    let interior = interior_mask(mesh);
    let mut out = Vec::new();
    for (p, fld) in fields.iter().enumerate() {
        let zero = vec![ZERO; n];
        let prev1 = if p >= 1 { Some(&fields[p - 1]) } else { None };
        let prev2 = if p >= 2 { Some(&fields[p - 2]) } else { None };
        let mut entries = Vec::new();
        let mut scale = 0.0f64;
        for (label, u, u1, u2, dirichlet) in [
            ("pi", &fld.pi, prev1.map_or(&zero, |f| &f.pi), prev2.map_or(&zero, |f| &f.pi), true),
            ("psi", &fld.psi, prev1.map_or(&zero, |f| &f.psi), prev2.map_or(&zero, |f| &f.psi), false),
        ] {
            let stiff = w.stiffness(u, false);
            let m0 = w.mass(u, false);
            let m1 = w.mass(u1, false);
            let m2 = w.mass(u2, false);
            for tag in [1u8, 2u8] {
                let kt2 = fld.kt2[(tag - 1) as usize];
                let (mut res, mut mag) = (Vec::new(), Vec::new());
                for i in 0..n {
                    if region[i] != Some(tag) || (dirichlet && !interior[i]) {
                        continue;
                    }
                    // −∫∇u·∇φ + k̃²∫uφ − 2γ∫u₁φ − ∫u₂φ = 0
                    let terms = [-stiff[i], kt2 * m0[i], -fld.gamma * 2.0 * m1[i], -m2[i]];
                    res.push(terms.iter().sum::<c64>());
                    mag.push(c64::new(terms.iter().map(|z| z.norm()).sum(), 0.0));
                }
                if !res.is_empty() {
                    scale = scale.hypot(l2(&mag));
                    entries.push((format!("helmholtz_{label}_r{tag}"), l2(&res)));
                }
            }
        }
        for (name, r) in entries {
            out.push(ResidualEntry::new(&name, p, r, scale));
        }
    }
    out
}
