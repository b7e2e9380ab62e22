//! The quartic pencil `L(γ) = Σ_k γᵏ P_k`, its companion linearizations,
//! the dense spectral solve and Jordan-chain extraction.
//!
//! The generalized pair `(A, B)` of a companion form has `B = diag(I, I, I, K)`
//! with `K` symmetric positive definite, so the pair is reduced to the
//! standard problem `B⁻¹A` by a Cholesky solve with `K` on the last block
//! row. When the odd coefficients vanish (ε₁ = ε₂) the solve works on the
//! quadratic in `μ = γ²` instead (half the size) and returns `γ = ±√μ`.
//! If moreover the quadratic vanishes identically at `μ₀ = ε` (a homogeneous
//! guide), it factors as `(μ − μ₀)[(μ + μ₀)K + P₂]` and the second factor is
//! a symmetric-definite problem solved with a symmetric eigensolver.

use faer::{c64, linalg::solvers::Solve, Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::FormMatrices;
use crate::geometry::MaterialConfig;
use crate::linalg::{cmatvec, frobenius, lincomb, lincomb_c, matvec, norm, qform};

/// Matrix coefficients `[P₀, …, P₄]` of a quartic pencil with `P₄ = K > 0`.
#[derive(Clone, Debug)]
pub struct QuarticPencil {
    coeffs: [Mat<f64>; 5],
    norms: [f64; 5],
    materials: MaterialConfig,
}

impl QuarticPencil {
    pub fn from_forms(m: &FormMatrices) -> Self {
        Self::from_coefficients(m.pencil_coefficients(), m.materials)
    }

    /// Pencil of the form `γ⁴K + γ²(A₁−(ε₁+ε₂)K) + (ε₁−ε₂)γS + ε₁ε₂(K−A₂)`
    /// from raw matrices (any size), e.g. for scalar toy problems.
    pub fn from_matrices(k: &Mat<f64>, a1: &Mat<f64>, a2: &Mat<f64>, s: &Mat<f64>, materials: MaterialConfig) -> Self {
        let (e1, e2) = (materials.eps1, materials.eps2);
        let n = k.nrows();
        Self::from_coefficients(
            [
                lincomb(&[k, a2], &[e1 * e2, -e1 * e2]),
                lincomb(&[s], &[e1 - e2]),
                lincomb(&[a1, k], &[1.0, -(e1 + e2)]),
                Mat::zeros(n, n),
                k.clone(),
            ],
            materials,
        )
    }

    pub fn from_coefficients(coeffs: [Mat<f64>; 5], materials: MaterialConfig) -> Self {
        let norms = [0, 1, 2, 3, 4].map(|k| frobenius(&coeffs[k]));
        Self { coeffs, norms, materials }
    }

    pub fn n(&self) -> usize {
        self.coeffs[4].nrows()
    }

    pub fn coefficients(&self) -> &[Mat<f64>; 5] {
        &self.coeffs
    }

    pub fn materials(&self) -> &MaterialConfig {
        &self.materials
    }

    pub fn k(&self) -> &Mat<f64> {
        &self.coeffs[4]
    }

    /// True when `P₁ = P₃ = 0`, so the spectrum is symmetric under γ → −γ
    /// with identical eigenvectors and `L` is a quadratic in γ².
    pub fn is_even(&self) -> bool {
        self.norms[1] == 0.0 && self.norms[3] == 0.0
    }

    /// Weights `C(k, q) γ^{k−q}` of `L^{(q)}(γ)/q! = Σ_k C(k,q) γ^{k−q} P_k`.
    fn derivative_weights(gamma: c64, q: usize) -> [c64; 5] {
        let mut w = [c64::new(0.0, 0.0); 5];
        for (k, wk) in w.iter_mut().enumerate() {
            if k >= q {
                *wk = binomial(k, q) * gamma.powu((k - q) as u32);
            }
        }
        w
    }

    /// `L(γ)`.
    pub fn eval(&self, gamma: c64) -> Mat<c64> {
        self.eval_derivative(gamma, 0)
    }

    /// `L^{(q)}(γ) / q!`.
    pub fn eval_derivative(&self, gamma: c64, q: usize) -> Mat<c64> {
        let w = Self::derivative_weights(gamma, q);
        let refs: Vec<&Mat<f64>> = self.coeffs.iter().collect();
        lincomb_c(&refs, &w)
    }

    /// `(L^{(q)}(γ)/q!) x`.
    pub fn apply_derivative(&self, gamma: c64, q: usize, x: &[c64]) -> Vec<c64> {
        let w = Self::derivative_weights(gamma, q);
        let mut y = vec![c64::new(0.0, 0.0); x.len()];
        for k in q..5 {
            if self.norms[k] == 0.0 {
                continue;
            }
            for (yi, pi) in y.iter_mut().zip(matvec(&self.coeffs[k], x)) {
                *yi += w[k] * pi;
            }
        }
        y
    }

    /// Frobenius-norm bound of `‖L^{(q)}(γ)/q!‖`.
    pub fn derivative_norm(&self, gamma: c64, q: usize) -> f64 {
        let w = Self::derivative_weights(gamma, q);
        (q..5).map(|k| w[k].norm() * self.norms[k]).sum()
    }

    /// Normwise backward error `‖L(γ)x‖ / ((Σ|γ|ᵏ‖P_k‖)‖x‖)`.
    pub fn backward_error(&self, gamma: c64, x: &[c64]) -> f64 {
        let r = self.apply_derivative(gamma, 0, x);
        norm(&r) / (self.derivative_norm(gamma, 0) * norm(x))
    }

    /// `xᴴ L(γ) x`.
    pub fn qform(&self, gamma: c64, x: &[c64]) -> c64 {
        (0..5)
            .filter(|&k| self.norms[k] != 0.0)
            .map(|k| gamma.powu(k as u32) * qform(&self.coeffs[k], x))
            .sum()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Which block carries the identity in the companion form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Companion {
    /// `A = [[0,I,0,0],[0,0,I,0],[0,0,0,I],[−P₀,−P₁,−P₂,−P₃]]`, eigenvector
    /// `(y, γy, γ²y, γ³y)`.
    First,
    /// `A = [[0,0,0,−P₀],[I,0,0,−P₁],[0,I,0,−P₂],[0,0,I,−P₃]]`.
    Second,
}

/// Companion linearization `A − γB` of a quartic pencil with
/// `B = diag(I, I, I, K)`; `det(A − γB) = det L(γ)` up to sign.
#[derive(Clone, Debug)]
pub struct Linearization {
    pencil: QuarticPencil,
    kind: Companion,
    /// Cholesky-based solves with K are reused by every reduction.
    k_llt: faer::linalg::solvers::Llt<f64>,
}

pub fn linearize(pencil: &QuarticPencil) -> Result<Linearization> {
    linearize_with(pencil, Companion::First)
}

pub fn linearize_with(pencil: &QuarticPencil, kind: Companion) -> Result<Linearization> {
    let k = pencil.k();
    let k_llt = k.llt(Side::Lower).map_err(|_| {
        let dmin = (0..k.nrows()).map(|i| k[(i, i)]).fold(f64::INFINITY, f64::min);
        Error::Pencil(format!(
            "leading coefficient K is not numerically positive definite (n = {}, smallest diagonal entry {dmin:e}); the companion pair has eigenvalues at infinity",
            k.nrows()
        ))
    })?;
    Ok(Linearization { pencil: pencil.clone(), kind, k_llt })
}

impl Linearization {
    pub fn pencil(&self) -> &QuarticPencil {
        &self.pencil
    }

    pub fn kind(&self) -> Companion {
        self.kind
    }

    /// Size of the linearized problem (4n).
    pub fn dim(&self) -> usize {
        4 * self.pencil.n()
    }

    /// Explicit generalized pair `(A, B)`; intended for small problems.
    pub fn pair(&self) -> (Mat<f64>, Mat<f64>) {
        let n = self.pencil.n();
        let p = self.pencil.coefficients();
        let mut a = Mat::<f64>::zeros(4 * n, 4 * n);
        let mut b = Mat::<f64>::identity(4 * n, 4 * n);
        for i in 0..n {
            for j in 0..n {
                b[(3 * n + i, 3 * n + j)] = p[4][(i, j)];
            }
        }
        match self.kind {
            Companion::First => {
                for blk in 0..3 {
                    for i in 0..n {
                        a[(blk * n + i, (blk + 1) * n + i)] = 1.0;
                    }
                }
                for blk in 0..4 {
                    for i in 0..n {
                        for j in 0..n {
                            a[(3 * n + i, blk * n + j)] = -p[blk][(i, j)];
                        }
                    }
                }
            }
            Companion::Second => {
                for blk in 0..3 {
                    for i in 0..n {
                        a[((blk + 1) * n + i, blk * n + i)] = 1.0;
                    }
                }
                for blk in 0..4 {
                    for i in 0..n {
                        for j in 0..n {
                            a[(blk * n + i, 3 * n + j)] = -p[blk][(i, j)];
                        }
                    }
                }
            }
        }
        (a, b)
    }

    fn k_solve(&self, rhs: &Mat<f64>) -> Mat<f64> {
        self.k_llt.solve(rhs)
    }

    /// Standard matrix `B⁻¹A` of the linearization.
    pub fn reduced_matrix(&self) -> Mat<f64> {
        let n = self.pencil.n();
        let p = self.pencil.coefficients();
        let mut c = Mat::<f64>::zeros(4 * n, 4 * n);
        match self.kind {
            Companion::First => {
                for blk in 0..3 {
                    for i in 0..n {
                        c[(blk * n + i, (blk + 1) * n + i)] = 1.0;
                    }
                }
                for blk in 0..4 {
                    let kp = self.k_solve(&p[blk]);
                    for j in 0..n {
                        for i in 0..n {
                            c[(3 * n + i, blk * n + j)] = -kp[(i, j)];
                        }
                    }
                }
            }
            Companion::Second => {
                for blk in 0..3 {
                    for i in 0..n {
                        c[((blk + 1) * n + i, blk * n + i)] = 1.0;
                    }
                }
                for blk in 0..3 {
                    for j in 0..n {
                        for i in 0..n {
                            c[(blk * n + i, 3 * n + j)] = -p[blk][(i, j)];
                        }
                    }
                }
                let kinv = self.k_solve(&Mat::identity(n, n));
                let kp3 = self.k_solve(&p[3]);
                for j in 0..n {
                    for i in 0..n {
                        c[(3 * n + i, 2 * n + j)] = kinv[(i, j)];
                        c[(3 * n + i, 3 * n + j)] = -kp3[(i, j)];
                    }
                }
            }
        }
        c
    }

    /// Companion matrix of the quadratic `μ²K + μP₂ + P₀` (even pencils only):
    /// `[[0, I], [−K⁻¹P₀, −K⁻¹P₂]]`.
    fn even_matrix(&self) -> Mat<f64> {
        let n = self.pencil.n();
        let p = self.pencil.coefficients();
        let mut c = Mat::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            c[(i, n + i)] = 1.0;
        }
        for (blk, pk) in [(0, &p[0]), (1, &p[2])] {
            let kp = self.k_solve(pk);
            for j in 0..n {
                for i in 0..n {
                    c[(n + i, blk * n + j)] = -kp[(i, j)];
                }
            }
        }
        c
    }
}

/// Options of [`solve_spectrum`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Compute eigenvectors and residuals.
    pub vectors: bool,
    /// Keep only eigenvalues with `|γ| ≤ max_abs_gamma`.
    pub max_abs_gamma: Option<f64>,
    /// Backward-error threshold for the `converged` flag.
    pub residual_tol: f64,
    /// Use the half-size quadratic in γ² when the odd coefficients vanish.
    pub even_reduction: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { vectors: true, max_abs_gamma: None, residual_tol: 1e-8, even_reduction: true }
    }
}

/// One computed eigenpair of the pencil.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    #[serde(with = "crate::io::complex")]
    pub gamma: c64,
    /// Constrained longitudinal vector, normalized to `‖f‖_K = 1` with its
    /// largest-modulus entry real and positive. `None` when vectors were
    /// not requested.
    #[serde(with = "crate::io::complex_opt_vec")]
    pub vector: Option<Vec<c64>>,
    /// Backward error `‖L(γ)f‖ / ((Σ|γ|ᵏ‖P_k‖)‖f‖)`; NaN without vectors.
    pub residual: f64,
    pub converged: bool,
}

/// Total order used to list spectra: |Im γ|, then |Re γ|, then Re γ, then Im γ
/// (keys quantized so that roundoff-level differences do not reorder
/// conjugate or ± partners unpredictably).
pub fn spectrum_order_key(g: c64) -> (i64, i64, i64, i64) {
    let q = |x: f64| (x * 1e9).round() as i64;
    (q(g.im.abs()), q(g.re.abs()), q(g.re), q(g.im))
}

fn sort_pairs(pairs: &mut [Eigenpair]) {
    pairs.sort_by_key(|p| spectrum_order_key(p.gamma));
}

/// Solve `L(γ)f = 0` densely. Eigenvectors are taken from the companion
/// block of largest norm divided by the matching power of γ (the first
/// block up to scaling) and normalized in the K inner product.
pub fn solve_spectrum(lin: &Linearization, opts: &SolveOptions) -> Result<Vec<Eigenpair>> {
    let pencil = lin.pencil();
    let n = pencil.n();
    let even = opts.even_reduction && pencil.is_even() && lin.kind() == Companion::First;
    let within = |g: c64| opts.max_abs_gamma.is_none_or(|r| g.norm() <= r);
    let fail = |_| Error::Pencil("dense eigensolver did not converge".into());

    let mut out = Vec::new();
    if !opts.vectors {
        if let Some(mu0) = factor_point(pencil).filter(|_| even) {
            return solve_factored(lin, opts, mu0);
        }
        let gammas: Vec<c64> = if even {
            let mus = lin.even_matrix().eigenvalues().map_err(fail)?;
            mus.iter().flat_map(|&mu| {
                let r = mu.sqrt();
                [r, -r]
            }).collect()
        } else {
            lin.reduced_matrix().eigenvalues().map_err(fail)?
        };
        for g in gammas.into_iter().filter(|g| within(*g)) {
            out.push(Eigenpair { gamma: g, vector: None, residual: f64::NAN, converged: true });
        }
        sort_pairs(&mut out);
        return Ok(out);
    }

    if even {
        if let Some(mu0) = factor_point(pencil) {
            return solve_factored(lin, opts, mu0);
        }
    }

    let blocks = if even { 2 } else { 4 };
    let mat = if even { lin.even_matrix() } else { lin.reduced_matrix() };
    let evd = mat.eigen().map_err(fail)?;
    let u = evd.U();
    let s = evd.S();
    let m = blocks * n;
    for col in 0..m {
        let lam = s[col];
        let roots: Vec<c64> = if even {
            let r = lam.sqrt();
            vec![r, -r]
        } else {
            vec![lam]
        };
        if !roots.iter().any(|g| within(*g)) {
            continue;
        }
        // Pick the block of largest norm and undo its power of λ.
        let mut best = (0usize, -1.0f64);
        for b in 0..blocks {
            let nb: f64 = (0..n).map(|i| u[(b * n + i, col)].norm_sqr()).sum();
            if nb > best.1 * (1.0 + 1e-12) {
                best = (b, nb);
            }
        }
        let scale = if lam.norm() == 0.0 { c64::new(1.0, 0.0) } else { lam.powu(best.0 as u32).inv() };
        let y: Vec<c64> = (0..n).map(|i| u[(best.0 * n + i, col)] * scale).collect();
        let y = normalize_k(pencil.k(), y);
        for g in roots.into_iter().filter(|g| within(*g)) {
            let residual = pencil.backward_error(g, &y);
            out.push(Eigenpair {
                gamma: g,
                vector: Some(y.clone()),
                residual,
                converged: residual <= opts.residual_tol,
            });
        }
    }
    sort_pairs(&mut out);
    Ok(out)
}

/// `μ₀ = ε` when `ε₁ = ε₂ = ε` and `P₀ + μ₀P₂ + μ₀²K = 0` to roundoff.
fn factor_point(pencil: &QuarticPencil) -> Option<f64> {
    let m = pencil.materials();
    if m.eps1 != m.eps2 {
        return None;
    }
    let mu0 = m.eps1;
    let p = pencil.coefficients();
    let r = lincomb(&[&p[0], &p[2], &p[4]], &[1.0, mu0, mu0 * mu0]);
    let scale = pencil.norms[0] + mu0 * pencil.norms[2] + mu0 * mu0 * pencil.norms[4];
    (frobenius(&r) <= 1e-12 * scale).then_some(mu0)
}

/// Even pencil with `P(μ₀) = 0`: the roots are `μ₀` (n-fold, every vector is
/// an eigenvector; unit vectors are returned) and the eigenvalues of
/// `−(P₂ + μ₀K)x = μKx`, with K-orthonormal real eigenvectors.
fn solve_factored(lin: &Linearization, opts: &SolveOptions, mu0: f64) -> Result<Vec<Eigenpair>> {
    use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
    let pencil = lin.pencil();
    let n = pencil.n();
    let p = pencil.coefficients();
    let within = |g: c64| opts.max_abs_gamma.is_none_or(|r| g.norm() <= r);
    let l = lin.k_llt.L().to_owned();
    // C = L⁻¹ (−P₂ − μ₀K) L⁻ᵀ
    let mut x = lincomb(&[&p[2], &p[4]], &[-1.0, -mu0]);
    solve_lower_triangular_in_place(l.as_ref(), x.as_mut(), faer::Par::Seq);
    let mut c = x.transpose().to_owned();
    solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), faer::Par::Seq);
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let fail = |_| Error::Pencil("symmetric eigensolver did not converge".into());

    let mut out = Vec::new();
    let mut push = |mu: f64, y: Option<Vec<c64>>, residual: f64| {
        let r = c64::new(mu, 0.0).sqrt();
        for g in [r, -r].into_iter().filter(|g| within(*g)) {
            let converged = !opts.vectors || residual <= opts.residual_tol;
            out.push(Eigenpair { gamma: g, vector: y.clone(), residual, converged });
        }
    };
    if !opts.vectors {
        for &mu in c.self_adjoint_eigenvalues(Side::Lower).map_err(fail)?.iter() {
            push(mu, None, f64::NAN);
        }
        for _ in 0..n {
            push(mu0, None, f64::NAN);
        }
        sort_pairs(&mut out);
        return Ok(out);
    }

    let eig = c.self_adjoint_eigen(Side::Lower).map_err(fail)?;
    let s = eig.S();
    let mut v = eig.U().to_owned();
    solve_upper_triangular_in_place(l.transpose(), v.as_mut(), faer::Par::Seq);
    // Residual blocks P_k V by matrix products rather than per-pair products.
    let (p0v, p2v, kv) = (&p[0] * &v, &p[2] * &v, &p[4] * &v);
    for j in 0..n {
        let mu = s[j];
        let y: Vec<c64> = (0..n).map(|i| c64::new(v[(i, j)], 0.0)).collect();
        let r: f64 = (0..n)
            .map(|i| (p0v[(i, j)] + mu * p2v[(i, j)] + mu * mu * kv[(i, j)]).powi(2))
            .sum::<f64>()
            .sqrt();
        let g = c64::new(mu, 0.0).sqrt();
        let residual = r / (pencil.derivative_norm(g, 0) * norm(&y));
        push(mu, Some(orient(y)), residual);
    }
    // Unit vectors scaled to ‖e_i‖_K = 1; their residuals are columns of P(μ₀).
    let pm = lincomb(&[&p[0], &p[2], &p[4]], &[1.0, mu0, mu0 * mu0]);
    let g0 = c64::new(mu0, 0.0).sqrt();
    for i in 0..n {
        let mut y = vec![c64::new(0.0, 0.0); n];
        y[i] = c64::new(1.0 / p[4][(i, i)].sqrt(), 0.0);
        let r = (0..n).map(|k| pm[(k, i)].powi(2)).sum::<f64>().sqrt();
        push(mu0, Some(y), r / pencil.derivative_norm(g0, 0));
    }
    sort_pairs(&mut out);
    Ok(out)
}

/// Rotate the largest-modulus entry (first one on ties) onto the positive
/// real axis.
fn orient(mut y: Vec<c64>) -> Vec<c64> {
    let mut imax = 0;
    for (i, v) in y.iter().enumerate() {
        if v.norm() > y[imax].norm() * (1.0 + 1e-12) {
            imax = i;
        }
    }
    if y[imax].norm() > 0.0 {
        let phase = y[imax].conj() / y[imax].norm();
        for v in &mut y {
            *v *= phase;
        }
    }
    y
}

/// Scale `y` to `yᴴKy = 1` and rotate its largest-modulus entry (first one
/// on ties) onto the positive real axis.
pub fn normalize_k(k: &Mat<f64>, mut y: Vec<c64>) -> Vec<c64> {
    let kn = qform(k, &y).re.max(0.0).sqrt();
    let mut imax = 0;
    for (i, v) in y.iter().enumerate() {
        if v.norm() > y[imax].norm() * (1.0 + 1e-12) {
            imax = i;
        }
    }
    let phase = if y[imax].norm() > 0.0 { y[imax].conj() / y[imax].norm() } else { c64::new(1.0, 0.0) };
    let f = if kn > 0.0 { phase / kn } else { phase };
    for v in &mut y {
        *v *= f;
    }
    y
}

/// Split eigenpairs into retained ones and those with `|γ² − ε_i| <
/// exclusion_tol` for some region (degeneration points, where the pencil
/// no longer describes Maxwell solutions).
pub fn filter_degenerate(
    pairs: Vec<Eigenpair>,
    materials: &MaterialConfig,
    exclusion_tol: f64,
) -> (Vec<Eigenpair>, Vec<Eigenpair>) {
    pairs.into_iter().partition(|p| !is_degenerate(p.gamma, materials, exclusion_tol))
}

pub fn is_degenerate(gamma: c64, materials: &MaterialConfig, exclusion_tol: f64) -> bool {
    let g2 = gamma * gamma;
    [materials.eps1, materials.eps2]
        .iter()
        .any(|&e| (g2 - e).norm() < exclusion_tol)
}

/// Default absolute exclusion tolerance `1e−8·(1 + ε_max)`.
pub fn default_exclusion_tol(materials: &MaterialConfig) -> f64 {
    1e-8 * (1.0 + materials.eps_max())
}

/// Eigenvalue with its Jordan chain `φ₀, φ₁, …` (eigenvector first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeChain {
    #[serde(with = "crate::io::complex")]
    pub gamma: c64,
    #[serde(with = "crate::io::complex_vecs")]
    pub chain: Vec<Vec<c64>>,
    /// `residuals[p]` is the relative residual of
    /// `Σ_{q=0..p} (1/q!) L^{(q)}(γ) φ_{p−q}`.
    pub residuals: Vec<f64>,
    pub cluster_id: usize,
    /// Cluster size (algebraic multiplicity estimate).
    pub algebraic_multiplicity: usize,
    /// Dimension of the numerical kernel of `L(γ)` (capped by the cluster size).
    pub geometric_multiplicity: usize,
    /// Set when the chain could not be extended to its expected length.
    pub truncated: bool,
}

impl ModeChain {
    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }
}

/// Tolerances of [`jordan_chains`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    /// Eigenvalues with `|γ_i − γ_j| < cluster_tol·(1 + |γ_i|)` are linked.
    pub cluster_tol: f64,
    /// Singular values below `null_tol·σ_max` count as kernel.
    pub null_tol: f64,
    /// Relative residual limit for chain members.
    pub chain_tol: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self { cluster_tol: 1e-6, null_tol: 1e-9, chain_tol: 1e-6 }
    }
}

/// Group eigenpairs into clusters by single linkage (input order is kept
/// inside a cluster; clusters are numbered by their first member).
pub fn cluster_eigenvalues(gammas: &[c64], cluster_tol: f64) -> Vec<usize> {
    let n = gammas.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut i = i;
        while p[i] != r {
            let next = p[i];
            p[i] = r;
            i = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (gammas[i] - gammas[j]).norm() < cluster_tol * (1.0 + gammas[i].norm().max(gammas[j].norm())) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut id_of_root = std::collections::HashMap::new();
    let mut ids = vec![0; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        let next = id_of_root.len();
        ids[i] = *id_of_root.entry(r).or_insert(next);
    }
    ids
}

/// Build Jordan chains for retained eigenpairs (which must carry vectors).
///
/// Clusters whose computed eigenvectors are numerically independent are
/// semisimple: each member becomes a chain of length one. Otherwise the
/// kernel of `L(γ̄)` at the cluster mean is taken from an SVD and each kernel
/// vector is extended by minimum-norm solves of
/// `L(γ)φ_p = −Σ_{q≥1} (1/q!) L^{(q)}(γ) φ_{p−q}` restricted to the
/// complement of the kernel.
pub fn jordan_chains(pencil: &QuarticPencil, pairs: &[Eigenpair], opts: &ChainOptions) -> Result<Vec<ModeChain>> {
    let gammas: Vec<c64> = pairs.iter().map(|p| p.gamma).collect();
    let ids = cluster_eigenvalues(&gammas, opts.cluster_tol);
    let n_clusters = ids.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = Vec::new();
    for cid in 0..n_clusters {
        let members: Vec<usize> = (0..pairs.len()).filter(|&i| ids[i] == cid).collect();
        let vecs: Vec<&Vec<c64>> = members
            .iter()
            .map(|&i| {
                pairs[i].vector.as_ref().ok_or_else(|| Error::Pencil("jordan_chains needs eigenvectors".into()))
            })
            .collect::<Result<_>>()?;
        let a = members.len();
        if a == 1 || numerically_independent(&vecs) {
            for (&i, v) in members.iter().zip(&vecs) {
                out.push(ModeChain {
                    gamma: pairs[i].gamma,
                    chain: vec![(*v).clone()],
                    residuals: vec![pairs[i].residual],
                    cluster_id: cid,
                    algebraic_multiplicity: a,
                    geometric_multiplicity: a,
                    truncated: false,
                });
            }
            continue;
        }
        let gamma = members.iter().map(|&i| pairs[i].gamma).sum::<c64>() / a as f64;
        out.extend(defective_cluster(pencil, gamma, a, cid, opts)?);
    }
    Ok(out)
}

fn numerically_independent(vecs: &[&Vec<c64>]) -> bool {
    let n = vecs[0].len();
    let m = Mat::from_fn(n, vecs.len(), |i, j| vecs[j][i] / norm(vecs[j]));
    match m.singular_values() {
        Ok(s) => s.last().copied().unwrap_or(0.0) > 1e-6 * s[0],
        Err(_) => false,
    }
}

fn defective_cluster(pencil: &QuarticPencil, gamma: c64, a: usize, cid: usize, opts: &ChainOptions) -> Result<Vec<ModeChain>> {
    let n = pencil.n();
    let l0 = pencil.eval(gamma);
    let svd = l0.svd().map_err(|_| Error::Pencil("SVD of L(γ) did not converge".into()))?;
    let (u, v, s) = (svd.U(), svd.V(), svd.S());
    let smax = s[0].re;
    let g = (0..n).filter(|&i| s[i].re <= opts.null_tol * smax).count().clamp(1, a);
    let rank = n - g;
    let pinv = |rhs: &[c64]| -> Vec<c64> {
        let mut x = vec![c64::new(0.0, 0.0); n];
        for i in 0..rank {
            let coef: c64 = (0..n).map(|r| u[(r, i)].conj() * rhs[r]).sum::<c64>() / s[i].re;
            for (r, xr) in x.iter_mut().enumerate() {
                *xr += v[(r, i)] * coef;
            }
        }
        x
    };
    let lnorm = pencil.derivative_norm(gamma, 0);
    let mut chains = Vec::new();
    let mut budget = a - g;
    for kcol in 0..g {
        let phi0 = normalize_k(pencil.k(), (0..n).map(|r| v[(r, rank + kcol)]).collect());
        let r0 = norm(&cmatvec(&l0, &phi0)) / (lnorm * norm(&phi0));
        let mut chain = vec![phi0];
        let mut residuals = vec![r0];
        let mut truncated = false;
        while budget > 0 {
            let p = chain.len();
            let mut rhs = vec![c64::new(0.0, 0.0); n];
            let mut scale = 0.0;
            for q in 1..=p.min(4) {
                let t = pencil.apply_derivative(gamma, q, &chain[p - q]);
                scale += pencil.derivative_norm(gamma, q) * norm(&chain[p - q]);
                for (r, tv) in rhs.iter_mut().zip(t) {
                    *r -= tv;
                }
            }
            // Solvability: the right side must be orthogonal to the left kernel.
            let incompat: f64 = (rank..n)
                .map(|i| (0..n).map(|r| u[(r, i)].conj() * rhs[r]).sum::<c64>().norm_sqr())
                .sum::<f64>()
                .sqrt();
            if incompat > opts.chain_tol * scale.max(f64::MIN_POSITIVE) {
                break;
            }
            let phi = pinv(&rhs);
            let lphi = cmatvec(&l0, &phi);
            let res: Vec<c64> = lphi.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            let rel = norm(&res) / (lnorm * norm(&phi) + scale);
            if !(rel <= opts.chain_tol) {
                truncated = true;
                break;
            }
            chain.push(phi);
            residuals.push(rel);
            budget -= 1;
        }
        if kcol == g - 1 && budget > 0 {
            truncated = true;
        }
        chains.push(ModeChain {
            gamma,
            chain,
            residuals,
            cluster_id: cid,
            algebraic_multiplicity: a,
            geometric_multiplicity: g,
            truncated,
        });
    }
    Ok(chains)
}
