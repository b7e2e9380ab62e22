//! P1 assembly of the sesquilinear forms k, a₁, a₂, s and of the pencil
//! coefficient matrices on the constrained space H₀¹ × Ĥ¹.
//!
//! A constrained vector is laid out as `f = [Π; y]`: the Π values at the
//! interior nodes followed by `N − 1` coordinates `y` of the zero-mean Ψ
//! space (see [`ZeroMeanBasis`]).
//!
//! Sign of S: with the interface stored counterclockwise around Ω₂, the
//! boundary form `s = ∫_Γ(∂Π/∂τ Ψ̄ − ∂Ψ/∂τ Π̄)dτ` is taken with τ running
//! along Γ as part of ∂Ω₁ (i.e. against the stored direction). This is the
//! orientation in which `a⁽¹⁾ + γs` and `a⁽²⁾ − γs` are the region-wise
//! quadratic forms of the pencil. Reversing the stored loop flips S.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{classify_dofs, CrossSectionMesh, DofMap, MaterialConfig};
use crate::linalg::{dotc, lincomb, lincomb_c, matvec, qform};

/// Orthonormal basis of the zero-mean subspace `{ψ : mᵀψ = 0}` with
/// `m_i = ∫_Ω φ_i`, i.e. the orthogonal complement of the constants in the
/// Ψ mass inner product (since `M·1 = m`).
///
/// The basis is the first `N − 1` columns of the Householder reflector
/// `H = I − 2wwᵀ` that swaps `m/‖m‖` with the last unit vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroMeanBasis {
    mean_vector: Vec<f64>,
    w: Vec<f64>,
}

impl ZeroMeanBasis {
    pub fn new(mean_vector: Vec<f64>) -> Result<Self> {
        let n = mean_vector.len();
        let nrm = mean_vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n < 2 || nrm == 0.0 || mean_vector.iter().any(|v| *v < 0.0) {
            return Err(Error::Forms("mean functional must be nonzero and nonnegative".into()));
        }
        let mut w: Vec<f64> = mean_vector.iter().map(|v| v / nrm).collect();
        w[n - 1] -= 1.0;
        let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        // u − e_last has norm ≥ 1 − u_last > 0 since m has at least two
        // positive entries on any mesh.
        for v in &mut w {
            *v /= wn;
        }
        Ok(Self { mean_vector, w })
    }

    /// `m_i = ∫_Ω φ_i dx`.
    pub fn mean_vector(&self) -> &[f64] {
        &self.mean_vector
    }

    pub fn n_nodes(&self) -> usize {
        self.w.len()
    }

    pub fn dim(&self) -> usize {
        self.w.len() - 1
    }

    /// Nodal values `Z y`.
    pub fn expand(&self, y: &[c64]) -> Vec<c64> {
        let n = self.dim();
        assert_eq!(y.len(), n);
        let wy: c64 = self.w[..n].iter().zip(y).map(|(w, v)| *w * v).sum();
        let mut out: Vec<c64> = (0..=n)
            .map(|i| -2.0 * self.w[i] * wy)
            .collect();
        for i in 0..n {
            out[i] += y[i];
        }
        out
    }

    /// `Zᵀ x` for a nodal vector (no mean removal).
    pub fn restrict_raw(&self, x: &[c64]) -> Vec<c64> {
        let n = self.dim();
        assert_eq!(x.len(), n + 1);
        let wx: c64 = self.w.iter().zip(x).map(|(w, v)| *w * v).sum();
        (0..n).map(|i| x[i] - 2.0 * self.w[i] * wx).collect()
    }

    /// Coordinates of `ψ − c` where the constant `c` makes the field
    /// zero-mean; exact inverse of [`expand`](Self::expand) on zero-mean fields.
    pub fn restrict(&self, psi: &[c64]) -> Vec<c64> {
        let total: f64 = self.mean_vector.iter().sum();
        let mean: c64 = self.mean_vector.iter().zip(psi).map(|(m, v)| *m * v).sum::<c64>() / total;
        let shifted: Vec<c64> = psi.iter().map(|v| v - mean).collect();
        self.restrict_raw(&shifted)
    }

    /// `Zᵀ B Z` for a symmetric nodal matrix `B`.
    pub fn reduce_sym(&self, b: &Mat<f64>) -> Mat<f64> {
        let n = self.dim();
        let w = &self.w;
        let v: Vec<f64> = (0..=n).map(|i| (0..=n).map(|j| b[(i, j)] * w[j]).sum()).collect();
        let c: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        Mat::from_fn(n, n, |i, j| {
            b[(i, j)] - 2.0 * w[i] * v[j] - 2.0 * v[i] * w[j] + 4.0 * c * w[i] * w[j]
        })
    }

    /// `Zᵀ X` for a nodal-row matrix.
    pub fn reduce_rows(&self, x: &Mat<f64>) -> Mat<f64> {
        let n = self.dim();
        let w = &self.w;
        let wx: Vec<f64> = (0..x.ncols()).map(|j| (0..=n).map(|i| w[i] * x[(i, j)]).sum()).collect();
        Mat::from_fn(n, x.ncols(), |i, j| x[(i, j)] - 2.0 * w[i] * wx[j])
    }

    /// `X Z` for a nodal-column matrix.
    pub fn reduce_cols(&self, x: &Mat<f64>) -> Mat<f64> {
        self.reduce_rows(&x.transpose().to_owned()).transpose().to_owned()
    }
}

/// Nodal (unconstrained) P1 matrices, split by region.
#[derive(Clone, Debug)]
pub struct NodalMatrices {
    /// `∫_{Ω_j} φ_i φ_k`, j = 1, 2.
    pub mass: [Mat<f64>; 2],
    /// `∫_{Ω_j} ∇φ_i · ∇φ_k`, j = 1, 2.
    pub stiffness: [Mat<f64>; 2],
    /// `T[i][k] = ∫_Γ ∂φ_k/∂τ φ_i dτ`, τ along Γ as part of ∂Ω₁.
    pub interface: Mat<f64>,
    /// `∫_Ω φ_i`.
    pub mean_vector: Vec<f64>,
}

/// Element mass matrix by the three-point edge-midpoint rule (exact for
/// quadratics, hence for products of P1 functions).
fn element_mass(area: f64) -> [[f64; 3]; 3] {
    // Hat function values at the midpoints of edges (0,1), (1,2), (2,0).
    const MID: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
    let mut m = [[0.0; 3]; 3];
    for q in MID {
        for i in 0..3 {
            for k in 0..3 {
                m[i][k] += area / 3.0 * q[i] * q[k];
            }
        }
    }
    m
}

/// Element stiffness and mass matrices of triangle `t` (local vertex order).
pub fn element_matrices(mesh: &CrossSectionMesh, t: usize) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let area = mesh.area(t);
    let g = mesh.gradients(t);
    let mut ke = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            ke[i][k] = area * (g[i][0] * g[k][0] + g[i][1] * g[k][1]);
        }
    }
    (ke, element_mass(area))
}

pub fn assemble_nodal(mesh: &CrossSectionMesh) -> NodalMatrices {
    let n = mesh.n_nodes();
    let mut mass = [Mat::<f64>::zeros(n, n), Mat::<f64>::zeros(n, n)];
    let mut stiffness = [Mat::<f64>::zeros(n, n), Mat::<f64>::zeros(n, n)];
    let mut mean_vector = vec![0.0; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let r = (mesh.tags()[t] - 1) as usize;
        let area = mesh.area(t);
        let (ke, me) = element_matrices(mesh, t);
        for i in 0..3 {
            mean_vector[tri[i]] += area / 3.0;
            for k in 0..3 {
                mass[r][(tri[i], tri[k])] += me[i][k];
                stiffness[r][(tri[i], tri[k])] += ke[i][k];
            }
        }
    }
    let mut interface = Mat::<f64>::zeros(n, n);
    let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    for &[a, b] in mesh.interface_edges() {
        // The stored edge a→b keeps Ω₂ on the left; as part of ∂Ω₁ it is b→a.
        let (p, q) = (b, a);
        let (pp, pq) = (mesh.nodes()[p], mesh.nodes()[q]);
        let len = ((pq[0] - pp[0]).powi(2) + (pq[1] - pp[1]).powi(2)).sqrt();
        let slope = [(p, -1.0 / len), (q, 1.0 / len)];
        for (j, dj) in slope {
            for &tg in &gauss {
                let vals = [(p, 1.0 - tg), (q, tg)];
                for (i, phi) in vals {
                    interface[(i, j)] += 0.5 * len * dj * phi;
                }
            }
        }
    }
    NodalMatrices { mass, stiffness, interface, mean_vector }
}

/// Constrained form matrices. All matrices are `n × n` with
/// `n = n_Π + N − 1`, block-structured as `[[ΠΠ, ΠΨ], [ΨΠ, ΨΨ]]`.
#[derive(Clone, Debug)]
pub struct FormMatrices {
    /// `∫_Ω(εΠΠ̄' + ΨΨ̄')`.
    pub k: Mat<f64>,
    /// `∫_Ω(ε∇Π·∇Π̄' + ∇Ψ·∇Ψ̄')` = `a_region[0] + a_region[1]`.
    pub a1: Mat<f64>,
    /// `∫_Ω(∇Π·∇Π̄' + ε⁻¹∇Ψ·∇Ψ̄')`.
    pub a2: Mat<f64>,
    /// Polarized interface form.
    pub s: Mat<f64>,
    /// Region parts `a⁽ʲ⁾ = ∫_{Ω_j}(ε_j∇Π·∇Π̄' + ∇Ψ·∇Ψ̄')`.
    pub a_region: [Mat<f64>; 2],
    /// `A₁'` from `((ε₁+ε₂)/2)A₁ − ε₁ε₂A₂ = ((ε₁−ε₂)/2)A₁'`; `None` when ε₁ = ε₂.
    pub a1_prime: Option<Mat<f64>>,
    pub dofs: DofMap,
    pub zero_mean: ZeroMeanBasis,
    pub materials: MaterialConfig,
}

/// Which diagonal block of a constrained matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Pi,
    Psi,
}

pub fn assemble_forms(mesh: &CrossSectionMesh, materials: &MaterialConfig) -> Result<FormMatrices> {
    materials.validate()?;
    mesh.validate_topology().map_err(|e| Error::Forms(format!("mesh rejected: {e}")))?;
    let dofs = classify_dofs(mesh);
    let nodal = assemble_nodal(mesh);
    let zero_mean = ZeroMeanBasis::new(nodal.mean_vector.clone())?;
    let (e1, e2) = (materials.eps1, materials.eps2);
    let pi = &dofs.pi_nodes;
    let np = pi.len();
    let nz = zero_mean.dim();
    let n = np + nz;

    let pi_block = |b: &Mat<f64>| Mat::from_fn(np, np, |i, j| b[(pi[i], pi[j])]);
    let build = |bpi: Mat<f64>, bpsi: Mat<f64>| {
        let mut out = Mat::<f64>::zeros(n, n);
        for j in 0..np {
            for i in 0..np {
                out[(i, j)] = bpi[(i, j)];
            }
        }
        for j in 0..nz {
            for i in 0..nz {
                out[(np + i, np + j)] = bpsi[(i, j)];
            }
        }
        out
    };

    let [m1, m2] = &nodal.mass;
    let [g1, g2] = &nodal.stiffness;
    let k = build(
        pi_block(&lincomb(&[m1, m2], &[e1, e2])),
        zero_mean.reduce_sym(&lincomb(&[m1, m2], &[1.0, 1.0])),
    );
    let a_region = [
        build(pi_block(&lincomb(&[g1], &[e1])), zero_mean.reduce_sym(g1)),
        build(pi_block(&lincomb(&[g2], &[e2])), zero_mean.reduce_sym(g2)),
    ];
    let a1 = lincomb(&[&a_region[0], &a_region[1]], &[1.0, 1.0]);
    let a2 = build(
        pi_block(&lincomb(&[g1, g2], &[1.0, 1.0])),
        zero_mean.reduce_sym(&lincomb(&[g1, g2], &[1.0 / e1, 1.0 / e2])),
    );

    // S[Ψ-test i, Π-trial j] = T[i][j];  S[Π-test i, Ψ-trial j] = −T[i][j].
    let t = &nodal.interface;
    let t_cols_pi = Mat::from_fn(t.nrows(), np, |i, j| t[(i, pi[j])]);
    let s_psi_pi = zero_mean.reduce_rows(&t_cols_pi);
    let t_rows_pi = Mat::from_fn(np, t.ncols(), |i, j| -t[(pi[i], j)]);
    let s_pi_psi = zero_mean.reduce_cols(&t_rows_pi);
    let mut s = Mat::<f64>::zeros(n, n);
    for i in 0..np {
        for j in 0..nz {
            s[(i, np + j)] = s_pi_psi[(i, j)];
            s[(np + j, i)] = s_psi_pi[(j, i)];
        }
    }

    let a1_prime = if e1 == e2 {
        None
    } else {
        let scale = 2.0 / (e1 - e2);
        Some(lincomb(&[&a1, &a2], &[scale * (e1 + e2) / 2.0, -scale * e1 * e2]))
    };

    Ok(FormMatrices {
        k,
        a1,
        a2,
        s,
        a_region,
        a1_prime,
        dofs,
        zero_mean,
        materials: *materials,
    })
}

impl FormMatrices {
    /// Dimension of the constrained space.
    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn n_pi(&self) -> usize {
        self.dofs.n_pi()
    }

    /// Diagonal block of a constrained matrix.
    pub fn block(&self, m: &Mat<f64>, which: Block) -> Mat<f64> {
        let np = self.n_pi();
        let (off, len) = match which {
            Block::Pi => (0, np),
            Block::Psi => (np, self.n() - np),
        };
        Mat::from_fn(len, len, |i, j| m[(off + i, off + j)])
    }

    /// Constrained vector from nodal Π (values on Γ₀ ignored) and nodal Ψ
    /// (its mean is removed).
    pub fn from_nodal(&self, pi: &[c64], psi: &[c64]) -> Vec<c64> {
        let mut f: Vec<c64> = self.dofs.pi_nodes.iter().map(|&v| pi[v]).collect();
        f.extend(self.zero_mean.restrict(psi));
        f
    }

    /// Nodal (Π, Ψ) of a constrained vector; Π vanishes on Γ₀ and Ψ has zero mean.
    pub fn to_nodal(&self, f: &[c64]) -> (Vec<c64>, Vec<c64>) {
        let np = self.n_pi();
        let mut pi = vec![c64::new(0.0, 0.0); self.dofs.n_nodes];
        for (d, &v) in self.dofs.pi_nodes.iter().enumerate() {
            pi[v] = f[d];
        }
        (pi, self.zero_mean.expand(&f[np..]))
    }

    /// Coefficients `[P₀, P₁, P₂, P₃, P₄]` of `L(γ) = Σ γᵏ P_k`.
    pub fn pencil_coefficients(&self) -> [Mat<f64>; 5] {
        let (e1, e2) = (self.materials.eps1, self.materials.eps2);
        let n = self.n();
        [
            lincomb(&[&self.k, &self.a2], &[e1 * e2, -e1 * e2]),
            lincomb(&[&self.s], &[e1 - e2]),
            lincomb(&[&self.a1, &self.k], &[1.0, -(e1 + e2)]),
            Mat::zeros(n, n),
            self.k.clone(),
        ]
    }
}

/// `L(γ) = γ⁴K + γ²(A₁ − (ε₁+ε₂)K) + (ε₁−ε₂)γS + ε₁ε₂(K − A₂)`.
pub fn pencil_value(gamma: c64, m: &FormMatrices) -> Mat<c64> {
    let (e1, e2) = (m.materials.eps1, m.materials.eps2);
    let g2 = gamma * gamma;
    let g4 = g2 * g2;
    let one = c64::new(1.0, 0.0);
    lincomb_c(
        &[&m.k, &m.a1, &m.s, &m.a2],
        &[
            g4 - g2 * (e1 + e2) + one * (e1 * e2),
            g2,
            gamma * (e1 - e2),
            one * (-e1 * e2),
        ],
    )
}

/// Scalar form values of one field, as used in the root-localization argument.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarFormValues {
    /// `∫_Ω(ε|Π|² + |Ψ|²)`.
    pub k: f64,
    /// `a⁽¹⁾ = ∫_{Ω₁}(ε₁|∇Π|² + |∇Ψ|²)`.
    pub a1_region: f64,
    /// `a⁽²⁾ = ∫_{Ω₂}(ε₂|∇Π|² + |∇Ψ|²)`.
    pub a2_region: f64,
    /// `∫_Γ(∂Π/∂τ Ψ̄ − ∂Ψ/∂τ Π̄)dτ`.
    pub s: f64,
    /// `a₂ = ∫_Ω(|∇Π|² + ε⁻¹|∇Ψ|²)`.
    pub a2_weighted: f64,
    /// `θ = a₂/k − 1`.
    pub theta: f64,
}

impl ScalarFormValues {
    /// Values from raw numbers; `k` must be positive.
    pub fn new(k: f64, a1_region: f64, a2_region: f64, s: f64, a2_weighted: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Forms(format!("k = {k} must be positive (zero field?)")));
        }
        Ok(Self { k, a1_region, a2_region, s, a2_weighted, theta: a2_weighted / k - 1.0 })
    }

    /// `f(γ) = (a⁽¹⁾ + γs)/(ε₁ − γ²) + (a⁽²⁾ − γs)/(ε₂ − γ²)`.
    pub fn f_of_gamma(&self, gamma: c64, materials: &MaterialConfig) -> c64 {
        let g2 = gamma * gamma;
        (gamma * self.s + self.a1_region) / (c64::new(materials.eps1, 0.0) - g2)
            + (c64::new(self.a2_region, 0.0) - gamma * self.s) / (c64::new(materials.eps2, 0.0) - g2)
    }

    /// Coefficients `[c₀, …, c₄]` (ascending powers) of the cleared quartic
    /// `fᴴL(γ)f = (ε₁−γ²)(ε₂−γ²)k − (a⁽¹⁾+γs)(ε₂−γ²) − (a⁽²⁾−γs)(ε₁−γ²)`.
    pub fn quartic_coefficients(&self, materials: &MaterialConfig) -> [f64; 5] {
        let (e1, e2) = (materials.eps1, materials.eps2);
        [
            e1 * e2 * self.k - e2 * self.a1_region - e1 * self.a2_region,
            self.s * (e1 - e2),
            self.a1_region + self.a2_region - (e1 + e2) * self.k,
            0.0,
            self.k,
        ]
    }

    /// Right side of the Rayleigh identity, `(ε₁−γ²)(ε₂−γ²)(k − f(γ))`, in
    /// cleared form (valid also at γ² = ε_j).
    pub fn rayleigh_value(&self, gamma: c64, materials: &MaterialConfig) -> c64 {
        let g2 = gamma * gamma;
        let d1 = c64::new(materials.eps1, 0.0) - g2;
        let d2 = c64::new(materials.eps2, 0.0) - g2;
        d1 * d2 * self.k - (gamma * self.s + self.a1_region) * d2
            - (c64::new(self.a2_region, 0.0) - gamma * self.s) * d1
    }
}

/// Scalar forms of a constrained vector `f` via the assembled matrices.
pub fn scalar_forms(f: &[c64], m: &FormMatrices) -> Result<ScalarFormValues> {
    let k = qform(&m.k, f).re;
    if !(k > 0.0) {
        return Err(Error::Forms("θ is undefined for the zero field".into()));
    }
    ScalarFormValues::new(
        k,
        qform(&m.a_region[0], f).re,
        qform(&m.a_region[1], f).re,
        qform(&m.s, f).re,
        qform(&m.a2, f).re,
    )
}

/// Scalar forms of nodal fields `(Π, Ψ)`; Π is restricted to the interior
/// nodes and Ψ is shifted to zero mean first.
pub fn scalar_forms_nodal(pi: &[c64], psi: &[c64], m: &FormMatrices) -> Result<ScalarFormValues> {
    scalar_forms(&m.from_nodal(pi, psi), m)
}

/// `fᴴ L(γ) f` evaluated through the coefficient matrices.
pub fn pencil_qform(gamma: c64, f: &[c64], m: &FormMatrices) -> c64 {
    let (e1, e2) = (m.materials.eps1, m.materials.eps2);
    let k = qform(&m.k, f);
    let a1 = qform(&m.a1, f);
    let a2 = qform(&m.a2, f);
    let s = dotc(f, &matvec(&m.s, f));
    let g2 = gamma * gamma;
    g2 * g2 * k + g2 * (a1 - k * (e1 + e2)) + gamma * s * (e1 - e2) + (k - a2) * (e1 * e2)
}
