//! Biorthogonality, Gram systems, norm identities, basis-property
//! diagnostics, Helmholtz splittings and completeness residuals for the
//! transversal parts `V = (E₁, E₂, H₁, H₂)` of computed waves.
//!
//! The conjugate wave is `W = (H_t × e₃, e₃ × E_t) = (H₂, −H₁, −E₂, E₁)`.
//! Orthogonality, the Gram matrices and `N_n` use the bilinear pairing
//! `∫ V·W dx`, under which the discrete relations hold exactly; the
//! sesquilinear pairing `∫ V·W̄ dx` is available alongside.

use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{Block, FormMatrices};
use crate::geometry::{CrossSectionMesh, MaterialConfig};
use crate::pencil::ModeChain;
use crate::waves::{triangle_gradients, TransversalField};

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

/// Piecewise-constant 4-vector field, one entry per triangle.
pub type Field4 = Vec<[c64; 4]>;

/// Transversal part `V = (E₁, E₂, H₁, H₂)` of a wave.
pub fn transversal(v: &TransversalField) -> Field4 {
    (0..v.e.len()).map(|t| v.v4(t)).collect()
}

/// `W = (H₂, −H₁, −E₂, E₁)` pointwise.
pub fn conjugate(v: &[[c64; 4]]) -> Field4 {
    v.iter().map(|&[e1, e2, h1, h2]| [h2, -h1, -e2, e1]).collect()
}

/// Conjugate wave of a built wave.
pub fn conjugate_wave(v: &TransversalField) -> Field4 {
    conjugate(&transversal(v))
}

/// Pairing convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pairing {
    /// `∫ V·W dx`.
    Bilinear,
    /// `∫ V·W̄ dx`.
    Sesquilinear,
}

/// `⟨V, W⟩` over the mesh.
pub fn pairing(v: &[[c64; 4]], w: &[[c64; 4]], mesh: &CrossSectionMesh, kind: Pairing) -> Result<c64> {
    if v.len() != mesh.n_triangles() || w.len() != mesh.n_triangles() {
        return Err(Error::Modal(format!(
            "field sizes {} and {} do not match the mesh ({} triangles)",
            v.len(),
            w.len(),
            mesh.n_triangles()
        )));
    }
    let mut acc = ZERO;
    for (t, (a, b)) in v.iter().zip(w).enumerate() {
        let mut s = ZERO;
        for k in 0..4 {
            s += match kind {
                Pairing::Bilinear => a[k] * b[k],
                Pairing::Sesquilinear => a[k] * b[k].conj(),
            };
        }
        acc += s * mesh.area(t);
    }
    Ok(acc)
}

/// `‖V‖² = ∫|V|² dx`.
pub fn norm_sq(v: &[[c64; 4]], mesh: &CrossSectionMesh) -> f64 {
    v.iter()
        .enumerate()
        .map(|(t, a)| mesh.area(t) * a.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum()
}

/// Residual of `(γ_n−γ_m)⟨V_n^p, W_m^q⟩ = ⟨V_n^p, W_m^{q−1}⟩ − ⟨V_n^{p−1}, W_m^q⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingRecursionEntry {
    pub p: usize,
    pub q: usize,
    /// Absolute residual divided by the sum of the term bounds.
    pub relative: f64,
    /// `|⟨V_n^p, W_m^q⟩| / (‖V_n^p‖‖W_m^q‖)`.
    pub normalized_pairing: f64,
}

/// Evaluate the pairing recursion for all `(p, q)` of two chains.
pub fn verify_pairing_recursion(
    chain_n: &[TransversalField],
    chain_m: &[TransversalField],
    mesh: &CrossSectionMesh,
    kind: Pairing,
) -> Result<Vec<PairingRecursionEntry>> {
    let vs: Vec<Field4> = chain_n.iter().map(transversal).collect();
    let ws: Vec<Field4> = chain_m.iter().map(conjugate_wave).collect();
    let vn: Vec<f64> = vs.iter().map(|v| norm_sq(v, mesh).sqrt()).collect();
    let wn: Vec<f64> = ws.iter().map(|w| norm_sq(w, mesh).sqrt()).collect();
    let (Some(first_n), Some(first_m)) = (chain_n.first(), chain_m.first()) else {
        return Ok(Vec::new());
    };
    let dg = first_n.gamma - first_m.gamma;
    let mut pair = vec![vec![ZERO; ws.len()]; vs.len()];
    for (p, v) in vs.iter().enumerate() {
        for (q, w) in ws.iter().enumerate() {
            pair[p][q] = pairing(v, w, mesh, kind)?;
        }
    }
    let mut out = Vec::new();
    for p in 0..vs.len() {
        for q in 0..ws.len() {
            let lhs = dg * pair[p][q];
            let t1 = if q > 0 { pair[p][q - 1] } else { ZERO };
            let t2 = if p > 0 { pair[p - 1][q] } else { ZERO };
            let scale = dg.norm() * vn[p] * wn[q]
                + if q > 0 { vn[p] * wn[q - 1] } else { 0.0 }
                + if p > 0 { vn[p - 1] * wn[q] } else { 0.0 };
            let res = (lhs - t1 + t2).norm();
            let denom = vn[p] * wn[q];
            out.push(PairingRecursionEntry {
                p,
                q,
                relative: if scale > 0.0 { res / scale } else { res },
                normalized_pairing: if denom > 0.0 { pair[p][q].norm() / denom } else { 0.0 },
            });
        }
    }
    Ok(out)
}

/// One block of the Gram system: all waves sharing one eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramBlock {
    /// Index of the block in the renumbered (distinct eigenvalue) list.
    pub group: usize,
    #[serde(with = "crate::io::complex")]
    pub gamma: c64,
    /// `(chain index, p)` of each member, in the original numbering.
    pub members: Vec<(usize, usize)>,
    /// `G[p][q] = ⟨v_p, w_q⟩`, row-major.
    #[serde(with = "crate::io::complex_vecs")]
    pub gram: Vec<Vec<c64>>,
    /// `A = G⁻¹` (empty when the block fails the conditioning gate).
    #[serde(with = "crate::io::complex_vecs")]
    pub inverse: Vec<Vec<c64>>,
    pub condition: f64,
    /// `max |GA − I|`; NaN when not inverted.
    pub residual: f64,
    /// Condition number within the gate.
    pub conditioned: bool,
}

/// Group-then-invert biorthogonalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramSystem {
    pub blocks: Vec<GramBlock>,
    pub condition_gate: f64,
    pub kind: Pairing,
}

/// Build Gram blocks of the waves grouped by the chains' cluster ids.
pub fn biorthogonalize(
    chains: &[ModeChain],
    waves: &[Vec<TransversalField>],
    mesh: &CrossSectionMesh,
    kind: Pairing,
    condition_gate: f64,
) -> Result<GramSystem> {
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, ch) in chains.iter().enumerate() {
        match groups.iter_mut().find(|(c, _)| *c == ch.cluster_id) {
            Some((_, v)) => v.push(i),
            None => groups.push((ch.cluster_id, vec![i])),
        }
    }
    let mut blocks = Vec::with_capacity(groups.len());
    for (g, (_, idx)) in groups.iter().enumerate() {
        let mut members = Vec::new();
        let mut vs = Vec::new();
        let mut ws = Vec::new();
        for &i in idx {
            for (p, w) in waves[i].iter().enumerate() {
                members.push((i, p));
                vs.push(transversal(w));
                ws.push(conjugate_wave(w));
            }
        }
        let r = vs.len();
        let mut gram = vec![vec![ZERO; r]; r];
        for p in 0..r {
            for q in 0..r {
                gram[p][q] = pairing(&vs[p], &ws[q], mesh, kind)?;
            }
        }
        let gamma = idx.iter().map(|&i| chains[i].gamma).fold(ZERO, |a, b| a + b) / idx.len() as f64;
        blocks.push(gram_block(g, gamma, members, gram, condition_gate));
    }
    Ok(GramSystem { blocks, condition_gate, kind })
}

/// Invert one Gram matrix if it passes the conditioning gate.
pub fn gram_block(group: usize, gamma: c64, members: Vec<(usize, usize)>, gram: Vec<Vec<c64>>, condition_gate: f64) -> GramBlock {
    let r = gram.len();
    let g = Mat::from_fn(r, r, |i, j| gram[i][j]);
    let condition = match g.singular_values() {
        Ok(s) if !s.is_empty() => {
            let smax = s.iter().copied().fold(0.0, f64::max);
            let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        }
        _ => f64::INFINITY,
    };
    let conditioned = condition.is_finite() && condition <= condition_gate;
    let (inverse, residual) = if conditioned {
        use faer::linalg::solvers::DenseSolveCore;
        let a = g.partial_piv_lu().inverse();
        let ga = &g * &a;
        let mut res = 0.0f64;
        for i in 0..r {
            for j in 0..r {
                let d = if i == j { c64::new(1.0, 0.0) } else { ZERO };
                res = res.max((ga[(i, j)] - d).norm());
            }
        }
        ((0..r).map(|i| (0..r).map(|j| a[(i, j)]).collect()).collect(), res)
    } else {
        (Vec::new(), f64::NAN)
    };
    GramBlock { group, gamma, members, gram, inverse, condition, residual, conditioned }
}

/// Both sides of the value identity `⟨V,W⟩ = −(1/γ)[∫(εE_t²+H_t²) + ∫(εΠ²+Ψ²)]`
/// (unconjugated squares) and of the energy identity
/// `∫(ε|E_t|²+|H_t|²) = ∫(ε|Π|²+|Ψ|²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormIdentityReport {
    #[serde(with = "crate::io::complex")]
    pub gamma: c64,
    /// Relative residual of the value identity; `None` when γ = 0.
    pub value_identity: Option<f64>,
    /// Relative residual of the energy identity; `None` when γ is real.
    pub energy_identity: Option<f64>,
    /// Transversal energy `∫(ε|E_t|²+|H_t|²)`.
    pub transversal_energy: f64,
    /// Longitudinal energy `∫(ε|Π|²+|Ψ|²)`.
    pub longitudinal_energy: f64,
}

/// `∫ w u v` for nodal P1 `u, v` (no conjugation), consistent mass.
fn mass_bilinear(mesh: &CrossSectionMesh, materials: &MaterialConfig, u: &[c64], v: &[c64], weighted: bool) -> c64 {
    let mut acc = ZERO;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let w = if weighted { materials.eps(mesh.tags()[t]) } else { 1.0 };
        let a = mesh.area(t) * w / 12.0;
        for i in 0..3 {
            for j in 0..3 {
                let m = if i == j { 2.0 } else { 1.0 };
                acc += u[tri[i]] * v[tri[j]] * (a * m);
            }
        }
    }
    acc
}

fn conj_vec(u: &[c64]) -> Vec<c64> {
    u.iter().map(|z| z.conj()).collect()
}

/// Evaluate the two norm identities for a simple eigenwave.
pub fn norm_identities(v: &TransversalField, mesh: &CrossSectionMesh, materials: &MaterialConfig) -> Result<NormIdentityReport> {
    let g = v.gamma;
    let vv = transversal(v);
    let w = conjugate(&vv);
    let pair = pairing(&vv, &w, mesh, Pairing::Bilinear)?;
    let mut sq_t = ZERO;
    let mut abs_t = 0.0;
    for (t, a) in vv.iter().enumerate() {
        let eps = materials.eps(mesh.tags()[t]);
        let ar = mesh.area(t);
        sq_t += (eps * (a[0] * a[0] + a[1] * a[1]) + a[2] * a[2] + a[3] * a[3]) * ar;
        abs_t += (eps * (a[0].norm_sqr() + a[1].norm_sqr()) + a[2].norm_sqr() + a[3].norm_sqr()) * ar;
    }
    let sq_l = mass_bilinear(mesh, materials, &v.pi, &v.pi, true) + mass_bilinear(mesh, materials, &v.psi, &v.psi, false);
    let abs_l = (mass_bilinear(mesh, materials, &v.pi, &conj_vec(&v.pi), true)
        + mass_bilinear(mesh, materials, &v.psi, &conj_vec(&v.psi), false))
    .re;
    let value_identity = (g.norm() > 0.0).then(|| {
        let rhs = -(sq_t + sq_l) / g;
        (pair - rhs).norm() / (pair.norm() + rhs.norm()).max(f64::MIN_POSITIVE)
    });
    let energy_identity = (g.im.abs() > 1e-12 * (1.0 + g.norm()))
        .then(|| (abs_t - abs_l).abs() / (abs_t + abs_l).max(f64::MIN_POSITIVE) * 2.0);
    Ok(NormIdentityReport { gamma: g, value_identity, energy_identity, transversal_energy: abs_t, longitudinal_energy: abs_l })
}

/// One row of the `N_n` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    #[serde(with = "crate::io::complex")]
    pub gamma: c64,
    /// `|N_n| = |⟨V,W⟩|/‖V‖²`.
    pub n_abs: f64,
    /// `2ε_max/|γ_n|`.
    pub bound: f64,
    /// Norm of the biorthogonal partner of the normalized wave, `1/|N_n|`.
    pub partner_norm: f64,
}

/// `N_n` and its bound for simple non-real modes, sorted by `|γ_n|`.
pub fn basis_decay(modes: &[TransversalField], mesh: &CrossSectionMesh, materials: &MaterialConfig) -> Result<Vec<DecayRow>> {
    let mut rows = Vec::with_capacity(modes.len());
    for v in modes {
        let vv = transversal(v);
        let pair = pairing(&vv, &conjugate(&vv), mesh, Pairing::Bilinear)?;
        let n_abs = pair.norm() / norm_sq(&vv, mesh);
        rows.push(DecayRow { gamma: v.gamma, n_abs, bound: 2.0 * materials.eps_max() / v.gamma.norm(), partner_norm: 1.0 / n_abs });
    }
    rows.sort_by(|a, b| a.gamma.norm().total_cmp(&b.gamma.norm()).then(a.gamma.im.total_cmp(&b.gamma.im)));
    Ok(rows)
}

/// Result of a Helmholtz splitting: nodal `f` (Dirichlet) and `g` (zero
/// mean) with the relative L₂ reconstruction residual.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub f: Vec<c64>,
    pub g: Vec<c64>,
    pub residual: f64,
}

fn rotate(v: [c64; 2]) -> [c64; 2] {
    // ∇′u = (∂₂u, −∂₁u)
    [v[1], -v[0]]
}

/// `∫ u·∇φ_i` (or `∫ u·∇′φ_i`) over all nodes.
fn load(mesh: &CrossSectionMesh, u: &[[c64; 2]], rotated: bool) -> Vec<c64> {
    let mut out = vec![ZERO; mesh.n_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.gradients(t);
        let a = mesh.area(t);
        for k in 0..3 {
            let d = if rotated { [g[k][1], -g[k][0]] } else { g[k] };
            out[tri[k]] += (u[t][0] * d[0] + u[t][1] * d[1]) * a;
        }
    }
    out
}

fn solve_spd(a: &Mat<f64>, b: &[c64]) -> Result<Vec<c64>> {
    use faer::linalg::solvers::Solve;
    let llt = a
        .llt(Side::Lower)
        .map_err(|_| Error::Modal("split system is not positive definite".into()))?;
    let rhs = Mat::from_fn(b.len(), 2, |i, j| if j == 0 { b[i].re } else { b[i].im });
    let x = llt.solve(&rhs);
    Ok((0..b.len()).map(|i| c64::new(x[(i, 0)], x[(i, 1)])).collect())
}

fn l2_2(mesh: &CrossSectionMesh, u: &[[c64; 2]]) -> f64 {
    u.iter()
        .enumerate()
        .map(|(t, a)| mesh.area(t) * (a[0].norm_sqr() + a[1].norm_sqr()))
        .sum::<f64>()
        .sqrt()
}

/// Operators shared by both splittings.
pub struct SplitOperators<'a> {
    mesh: &'a CrossSectionMesh,
    forms: &'a FormMatrices,
    dirichlet_weighted: Mat<f64>,
    dirichlet: Mat<f64>,
    neumann: Mat<f64>,
}

impl<'a> SplitOperators<'a> {
    pub fn new(mesh: &'a CrossSectionMesh, forms: &'a FormMatrices) -> Self {
        Self {
            mesh,
            forms,
            dirichlet_weighted: forms.block(&forms.a1, Block::Pi),
            dirichlet: forms.block(&forms.a2, Block::Pi),
            neumann: forms.block(&forms.a1, Block::Psi),
        }
    }

    fn restrict_pi(&self, v: &[c64]) -> Vec<c64> {
        self.forms.dofs.pi_nodes.iter().map(|&i| v[i]).collect()
    }

    fn expand_pi(&self, x: &[c64]) -> Vec<c64> {
        let mut out = vec![ZERO; self.mesh.n_nodes()];
        for (k, &i) in self.forms.dofs.pi_nodes.iter().enumerate() {
            out[i] = x[k];
        }
        out
    }

    fn solve_dirichlet(&self, weighted: bool, rhs_nodal: &[c64]) -> Result<Vec<c64>> {
        let a = if weighted { &self.dirichlet_weighted } else { &self.dirichlet };
        if a.nrows() == 0 {
            return Ok(vec![ZERO; self.mesh.n_nodes()]);
        }
        Ok(self.expand_pi(&solve_spd(a, &self.restrict_pi(rhs_nodal))?))
    }

    fn solve_neumann(&self, rhs_nodal: &[c64]) -> Result<Vec<c64>> {
        let zm = &self.forms.zero_mean;
        let y = solve_spd(&self.neumann, &zm.restrict_raw(rhs_nodal))?;
        Ok(zm.expand(&y))
    }

    fn eps(&self, t: usize) -> f64 {
        self.forms.materials.eps(self.mesh.tags()[t])
    }

    /// `u = ε∇f + ∇′g` with `f ∈ H₀¹`, `g` zero-mean.
    pub fn split_1(&self, u: &[[c64; 2]]) -> Result<Split> {
        let f = self.solve_dirichlet(true, &load(self.mesh, u, false))?;
        let df = triangle_gradients(self.mesh, &f);
        let v: Vec<[c64; 2]> = u
            .iter()
            .enumerate()
            .map(|(t, a)| [a[0] - df[t][0] * self.eps(t), a[1] - df[t][1] * self.eps(t)])
            .collect();
        let g = self.solve_neumann(&load(self.mesh, &v, true))?;
        let dg = triangle_gradients(self.mesh, &g);
        let rec: Vec<[c64; 2]> = (0..u.len())
            .map(|t| {
                let r = rotate(dg[t]);
                [u[t][0] - df[t][0] * self.eps(t) - r[0], u[t][1] - df[t][1] * self.eps(t) - r[1]]
            })
            .collect();
        Ok(Split { f, g, residual: l2_2(self.mesh, &rec) / l2_2(self.mesh, u).max(f64::MIN_POSITIVE) })
    }

    /// `u = ∇′f + ∇g` with `f ∈ H₀¹`, `g` zero-mean.
    pub fn split_2(&self, u: &[[c64; 2]]) -> Result<Split> {
        let f = self.solve_dirichlet(false, &load(self.mesh, u, true))?;
        let df = triangle_gradients(self.mesh, &f);
        let v: Vec<[c64; 2]> = u
            .iter()
            .enumerate()
            .map(|(t, a)| {
                let r = rotate(df[t]);
                [a[0] - r[0], a[1] - r[1]]
            })
            .collect();
        let g = self.solve_neumann(&load(self.mesh, &v, false))?;
        let dg = triangle_gradients(self.mesh, &g);
        let rec: Vec<[c64; 2]> = (0..u.len())
            .map(|t| {
                let r = rotate(df[t]);
                [u[t][0] - r[0] - dg[t][0], u[t][1] - r[1] - dg[t][1]]
            })
            .collect();
        Ok(Split { f, g, residual: l2_2(self.mesh, &rec) / l2_2(self.mesh, u).max(f64::MIN_POSITIVE) })
    }

    /// `ε∇f + ∇′g` per triangle.
    pub fn compose_1(&self, f: &[c64], g: &[c64]) -> Vec<[c64; 2]> {
        let df = triangle_gradients(self.mesh, f);
        let dg = triangle_gradients(self.mesh, g);
        (0..df.len())
            .map(|t| {
                let r = rotate(dg[t]);
                [df[t][0] * self.eps(t) + r[0], df[t][1] * self.eps(t) + r[1]]
            })
            .collect()
    }

    /// `∇′f + ∇g` per triangle.
    pub fn compose_2(&self, f: &[c64], g: &[c64]) -> Vec<[c64; 2]> {
        let df = triangle_gradients(self.mesh, f);
        let dg = triangle_gradients(self.mesh, g);
        (0..df.len())
            .map(|t| {
                let r = rotate(df[t]);
                [r[0] + dg[t][0], r[1] + dg[t][1]]
            })
            .collect()
    }
}

/// Projection residual curve of a target onto growing mode spans.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletenessCurve {
    /// `(M, ‖target − P_M target‖/‖target‖)` for `M = 1..`.
    pub residuals: Vec<(usize, f64)>,
    /// Modes whose new direction was below the rank tolerance.
    pub dependent: Vec<usize>,
}

/// Least-squares projection of `target` onto `span{modes[0..M]}` for every
/// `M`, in the L₂⁴ inner product (modified Gram–Schmidt, reorthogonalized).
pub fn completeness_residual(target: &[[c64; 4]], modes: &[Field4], mesh: &CrossSectionMesh) -> Result<CompletenessCurve> {
    let w: Vec<f64> = (0..mesh.n_triangles()).map(|t| mesh.area(t).sqrt()).collect();
    let flat = |f: &[[c64; 4]]| -> Result<Vec<c64>> {
        if f.len() != w.len() {
            return Err(Error::Modal("field does not match the mesh".into()));
        }
        Ok(f.iter().zip(&w).flat_map(|(a, &s)| a.iter().map(move |z| z * s)).collect())
    };
    let dot = |a: &[c64], b: &[c64]| a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y);
    let nrm = |a: &[c64]| a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut r = flat(target)?;
    let t0 = nrm(&r);
    if t0 == 0.0 {
        return Err(Error::Modal("target field is zero".into()));
    }
    let mut basis: Vec<Vec<c64>> = Vec::new();
    let mut residuals = Vec::with_capacity(modes.len());
    let mut dependent = Vec::new();
    for (m, mode) in modes.iter().enumerate() {
        let mut q = flat(mode)?;
        let n0 = nrm(&q);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &q);
                for (x, y) in q.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let n1 = nrm(&q);
        if n0 == 0.0 || n1 <= 1e-10 * n0 {
            dependent.push(m);
        } else {
            for x in q.iter_mut() {
                *x /= n1;
            }
            let c = dot(&q, &r);
            for (x, y) in r.iter_mut().zip(&q) {
                *x -= c * y;
            }
            basis.push(q);
        }
        residuals.push((m + 1, nrm(&r) / t0));
    }
    Ok(CompletenessCurve { residuals, dependent })
}

/// Smooth separable test target `(ε∇f₂ − ∇′g₁, ∇′f₁ + ∇g₂)` built from
/// `f = sin(πx/W) sin(πy/H)` and `g = cos(πx/W) + cos(πy/H)` interpolants.
pub fn smooth_target(mesh: &CrossSectionMesh, materials: &MaterialConfig) -> Field4 {
    let o = mesh.outer();
    let (w, h) = (o.width(), o.height());
    let pi = std::f64::consts::PI;
    let f: Vec<c64> = mesh
        .nodes()
        .iter()
        .map(|p| c64::new((pi * (p[0] - o.x0) / w).sin() * (pi * (p[1] - o.y0) / h).sin(), 0.0))
        .collect();
    let g: Vec<c64> = mesh
        .nodes()
        .iter()
        .map(|p| c64::new((pi * (p[0] - o.x0) / w).cos() + (pi * (p[1] - o.y0) / h).cos(), 0.0))
        .collect();
    let df = triangle_gradients(mesh, &f);
    let dg = triangle_gradients(mesh, &g);
    (0..mesh.n_triangles())
        .map(|t| {
            let eps = materials.eps(mesh.tags()[t]);
            let rg = rotate(dg[t]);
            let rf = rotate(df[t]);
            [df[t][0] * eps - rg[0], df[t][1] * eps - rg[1], rf[0] + dg[t][0], rf[1] + dg[t][1]]
        })
        .collect()
}
