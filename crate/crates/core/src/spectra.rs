//! Scalar quartic machinery and spectrum localization certificates.
//!
//! For a fixed field `f = (Π, Ψ)` the equation `(L(γ)f, f) = 0` becomes the
//! scalar quartic
//!
//! ```text
//! (ε₁−γ²)(ε₂−γ²)k − (a⁽¹⁾+γs)(ε₂−γ²) − (a⁽²⁾−γs)(ε₁−γ²) = 0,
//! ```
//!
//! whose roots split into one root in each interval `I± = ±[√ε₁, √ε₂]` and
//! a pair `γ₃,₄` away from the disks `|γ ∓ p| < r̃`, `p = (√ε₁+√ε₂)/2`,
//! provided `ε_max < 9ε_min` and `∫(ε|Π|²+|Ψ|²) ≤ ½∫(|∇Π|²+ε⁻¹|∇Ψ|²)`.

use faer::{c64, Mat, Side};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{scalar_forms, Block, FormMatrices, ScalarFormValues};
use crate::geometry::MaterialConfig;
use crate::linalg::{matvec, qform};

/// Verdict of the contrast condition `ε_max < 9ε_min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastCondition {
    pub holds: bool,
    /// `9ε_min − ε_max`.
    pub margin: f64,
}

pub fn check_contrast(materials: &MaterialConfig) -> ContrastCondition {
    let margin = 9.0 * materials.eps_min() - materials.eps_max();
    ContrastCondition { holds: margin > 0.0, margin }
}

/// Verdict of the Poincaré-type condition `k ≤ a₂/2` for all fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareCondition {
    pub holds: bool,
    /// `μ* = max_f k(f)/a₂(f)`.
    pub mu_star: f64,
    /// `1/2 − μ*`.
    pub margin: f64,
    /// Maximizing constrained field (`‖f‖_K = 1`).
    #[serde(skip)]
    pub extremal: Vec<c64>,
}

/// Generalized eigenpairs of `K f = μ A₂ f`, largest μ first, with
/// eigenvectors normalized to `‖f‖_K = 1`.
pub fn poincare_spectrum(forms: &FormMatrices) -> Result<(Vec<f64>, Mat<f64>)> {
    let llt = forms
        .a2
        .llt(Side::Lower)
        .map_err(|_| Error::Spectra("A₂ is not positive definite on the constrained space".into()))?;
    let l = llt.L().to_owned();
    let n = forms.n();
    // C = L⁻¹ K L⁻ᵀ
    let mut x = forms.k.clone();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), x.as_mut(), faer::Par::Seq);
    let mut c = x.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), faer::Par::Seq);
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let eig = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Spectra("symmetric eigensolver failed for the Poincaré-type condition".into()))?;
    let s = eig.S();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mus: Vec<f64> = order.iter().map(|&i| s[i]).collect();
    // f = L⁻ᵀ v
    let mut v = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), v.as_mut(), faer::Par::Seq);
    for j in 0..n {
        let col: Vec<c64> = (0..n).map(|i| c64::new(v[(i, j)], 0.0)).collect();
        let kn = qform(&forms.k, &col).re.sqrt();
        for i in 0..n {
            v[(i, j)] /= kn;
        }
    }
    Ok((mus, v))
}

pub fn check_poincare(forms: &FormMatrices) -> Result<PoincareCondition> {
    let (mus, v) = poincare_spectrum(forms)?;
    let mu_star = mus[0];
    let extremal = (0..forms.n()).map(|i| c64::new(v[(i, 0)], 0.0)).collect();
    Ok(PoincareCondition { holds: mu_star <= 0.5, mu_star, margin: 0.5 - mu_star, extremal })
}

/// Roots of the scalar quartic of one field, classified against `I±`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuarticRoots {
    #[serde(with = "crate::io::complex_vec")]
    pub roots: Vec<c64>,
    /// Root in `[−√ε₂, −√ε₁]`, if any.
    #[serde(with = "crate::io::complex_opt")]
    pub in_minus: Option<c64>,
    /// Root in `[√ε₁, √ε₂]`, if any.
    #[serde(with = "crate::io::complex_opt")]
    pub in_plus: Option<c64>,
    /// The remaining roots (`γ₃,₄` in the generic pattern).
    #[serde(with = "crate::io::complex_vec")]
    pub others: Vec<c64>,
}

impl QuarticRoots {
    /// One root in each interval and two others.
    pub fn has_generic_pattern(&self) -> bool {
        self.in_minus.is_some() && self.in_plus.is_some() && self.others.len() == 2
    }
}

fn horner(c: &[f64; 5], z: c64) -> (c64, c64) {
    let mut p = c64::new(c[4], 0.0);
    let mut dp = c64::new(0.0, 0.0);
    for k in (0..4).rev() {
        dp = dp * z + p;
        p = p * z + c[k];
    }
    (p, dp)
}

/// Roots of `c₀ + c₁z + … + c₄z⁴` (`c₄ ≠ 0`) via the companion matrix,
/// polished by Newton steps.
pub fn quartic_roots(c: &[f64; 5]) -> Result<Vec<c64>> {
    if c[4] == 0.0 {
        return Err(Error::Spectra("leading quartic coefficient vanishes".into()));
    }
    let comp = Mat::from_fn(4, 4, |i, j| {
        if j == 3 {
            -c[i] / c[4]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let ev = comp
        .eigenvalues()
        .map_err(|_| Error::Spectra("companion eigensolver did not converge".into()))?;
    let mut roots: Vec<c64> = ev
        .into_iter()
        .map(|mut z| {
            for _ in 0..3 {
                let (p, dp) = horner(c, z);
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                let cand = z - step;
                if horner(c, cand).0.norm() < p.norm() {
                    z = cand;
                } else {
                    break;
                }
            }
            z
        })
        .collect();
    roots.sort_by_key(|z| crate::pencil::spectrum_order_key(*z));
    Ok(roots)
}

fn is_real(z: c64) -> bool {
    z.im.abs() <= 1e-9 * (1.0 + z.norm())
}

/// Roots of the cleared quartic for the given form values.
pub fn scalar_quartic_roots(values: &ScalarFormValues, materials: &MaterialConfig) -> Result<QuarticRoots> {
    if !(values.k > 0.0) {
        return Err(Error::Spectra(format!("k = {} must be positive", values.k)));
    }
    let roots = quartic_roots(&values.quartic_coefficients(materials))?;
    let (lo, hi) = (materials.eps_min().sqrt(), materials.eps_max().sqrt());
    let slack = 1e-9 * (1.0 + hi);
    let mut in_minus = None;
    let mut in_plus = None;
    let mut others = Vec::new();
    for &z in &roots {
        let x = z.re;
        if is_real(z) && in_minus.is_none() && x >= -hi - slack && x <= -lo + slack {
            in_minus = Some(c64::new(x, 0.0));
        } else if is_real(z) && in_plus.is_none() && x >= lo - slack && x <= hi + slack {
            in_plus = Some(c64::new(x, 0.0));
        } else {
            others.push(z);
        }
    }
    Ok(QuarticRoots { roots, in_minus, in_plus, others })
}

/// The two roots completed from two real roots via Viète's relations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VieteCompletion {
    #[serde(with = "crate::io::complex")]
    pub gamma3: c64,
    #[serde(with = "crate::io::complex")]
    pub gamma4: c64,
    /// Radicand `4ε₁ε₂θ/|γ₁γ₂| − (γ₁+γ₂)²` was negative (pair is real).
    pub real_pair: bool,
    /// `θ < 1`, outside the regime where the localization argument applies.
    pub theta_below_one: bool,
}

/// `γ₃,₄ = −(γ₁+γ₂)/2 ± (i/2)√(4ε₁ε₂θ/|γ₁γ₂| − (γ₁+γ₂)²)`.
pub fn viete_completion(gamma1: f64, gamma2: f64, theta: f64, materials: &MaterialConfig) -> Result<VieteCompletion> {
    let prod = gamma1 * gamma2;
    if prod == 0.0 {
        return Err(Error::Spectra("Viète completion needs γ₁γ₂ ≠ 0".into()));
    }
    let sum = gamma1 + gamma2;
    let rad = 4.0 * materials.eps1 * materials.eps2 * theta / prod.abs() - sum * sum;
    let (g3, g4) = if rad >= 0.0 {
        let r = 0.5 * rad.sqrt();
        (c64::new(-sum / 2.0, r), c64::new(-sum / 2.0, -r))
    } else {
        let r = 0.5 * (-rad).sqrt();
        (c64::new(-sum / 2.0 + r, 0.0), c64::new(-sum / 2.0 - r, 0.0))
    };
    Ok(VieteCompletion { gamma3: g3, gamma4: g4, real_pair: rad < 0.0, theta_below_one: theta < 1.0 })
}

/// Per-field check of the estimates behind the localization argument.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    /// `(4P_jQ_j − s²)/(4P_jQ_j + s²)` for `j = 1, 2` (≥ 0 required).
    pub cauchy_schwarz_margin: [f64; 2],
    /// `min(a⁽ʲ⁾ ± √ε_j s)/a⁽ʲ⁾` for `j = 1, 2` (≥ 0 required).
    pub region_margin: [f64; 2],
    /// `min_γ (f(γ) − a₂/2)/(a₂/2)` over `γ ∈ (−√ε₁, √ε₁)` (> 0 required).
    pub lower_bound_margin: f64,
}

impl InequalityReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.cauchy_schwarz_margin.iter().all(|&m| m >= -tol)
            && self.region_margin.iter().all(|&m| m >= -tol)
            && self.lower_bound_margin > -tol
    }
}

/// Evaluate `|s|² ≤ 4P_jQ_j`, `a⁽ʲ⁾ ± √ε_j s ≥ 0` and `f(γ) > a₂/2` on
/// `samples` points of `(−√ε₁, √ε₁)` for one constrained field.
pub fn check_inequalities(f: &[c64], forms: &FormMatrices, samples: usize) -> Result<InequalityReport> {
    let m = &forms.materials;
    let values = scalar_forms(f, forms)?;
    let np = forms.n_pi();
    let pi_only: Vec<c64> = f.iter().enumerate().map(|(i, z)| if i < np { *z } else { c64::new(0.0, 0.0) }).collect();
    let psi_only: Vec<c64> = f.iter().enumerate().map(|(i, z)| if i < np { c64::new(0.0, 0.0) } else { *z }).collect();
    let eps = [m.eps1, m.eps2];
    let mut cs = [0.0; 2];
    let mut reg = [0.0; 2];
    let region = [values.a1_region, values.a2_region];
    for j in 0..2 {
        let p = qform(&forms.a_region[j], &pi_only).re / eps[j];
        let q = qform(&forms.a_region[j], &psi_only).re;
        let (lhs, rhs) = (values.s * values.s, 4.0 * p * q);
        cs[j] = if lhs + rhs > 0.0 { (rhs - lhs) / (rhs + lhs) } else { 0.0 };
        let a = region[j];
        let d = eps[j].sqrt() * values.s.abs();
        reg[j] = if a > 0.0 { (a - d) / a } else if d == 0.0 { 0.0 } else { -1.0 };
    }
    let half = values.a2_weighted / 2.0;
    let r = m.eps1.sqrt().min(m.eps2.sqrt());
    let mut lb = f64::INFINITY;
    for i in 1..=samples {
        let g = -r + 2.0 * r * i as f64 / (samples + 1) as f64;
        let fg = values.f_of_gamma(c64::new(g, 0.0), m).re;
        lb = lb.min((fg - half) / half);
    }
    Ok(InequalityReport { cauchy_schwarz_margin: cs, region_margin: reg, lower_bound_margin: lb })
}

/// Localization geometry: intervals `I±`, disks `σ±` of radius `r` about
/// `±p`, and the outer domain `σ₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRegions {
    pub eps_min: f64,
    pub eps_max: f64,
    pub i_minus: [f64; 2],
    pub i_plus: [f64; 2],
    /// Disk centre `p = (√ε₁+√ε₂)/2`.
    pub p: f64,
    /// Empirical separation radius of `γ₃,₄` from `±p`.
    pub r_tilde: f64,
    /// `δ̃ = r̃ − (√ε₂−√ε₁)/2`.
    pub delta_tilde: f64,
    /// `δ₀ = δ̃/2`.
    pub delta0: f64,
    /// Disk radius `r = (√ε₂−√ε₁)/2 + δ₀`.
    pub r: f64,
}

impl LocalizationRegions {
    pub fn new(materials: &MaterialConfig, r_tilde: f64) -> Result<Self> {
        let (lo, hi) = (materials.eps_min().sqrt(), materials.eps_max().sqrt());
        let half = (hi - lo) / 2.0;
        let delta_tilde = r_tilde - half;
        if !(delta_tilde > 0.0) {
            return Err(Error::Spectra(format!(
                "r̃ = {r_tilde} does not exceed the half interval length {half}: no separating disks"
            )));
        }
        let delta0 = delta_tilde / 2.0;
        let p = (lo + hi) / 2.0;
        if p - half - delta0 <= 0.0 {
            return Err(Error::Spectra("disks σ± overlap at the origin".into()));
        }
        Ok(Self {
            eps_min: materials.eps_min(),
            eps_max: materials.eps_max(),
            i_minus: [-hi, -lo],
            i_plus: [lo, hi],
            p,
            r_tilde,
            delta_tilde,
            delta0,
            r: half + delta0,
        })
    }

    pub fn in_sigma_plus(&self, g: c64) -> bool {
        (g - self.p).norm() < self.r
    }

    pub fn in_sigma_minus(&self, g: c64) -> bool {
        (g + self.p).norm() < self.r
    }
}

/// Distance of the non-interval roots from `±p`, minimized over fields and
/// scaled by the safety factor 0.9. Fields without the generic root
/// pattern are skipped and counted.
pub fn estimate_r_tilde(fields: &[Vec<c64>], forms: &FormMatrices) -> Result<(f64, usize)> {
    let m = &forms.materials;
    let p = m.p_mid();
    let mut best = f64::INFINITY;
    let mut skipped = 0;
    for f in fields {
        let roots = scalar_quartic_roots(&scalar_forms(f, forms)?, m)?;
        if !roots.has_generic_pattern() {
            skipped += 1;
            continue;
        }
        for &z in &roots.others {
            best = best.min((z - p).norm()).min((z + p).norm());
        }
    }
    if !best.is_finite() {
        return Err(Error::Spectra("no sampled field produced the generic root pattern".into()));
    }
    Ok((0.9 * best, skipped))
}

/// Smooth and random sample fields for [`estimate_r_tilde`]: the leading
/// generalized eigenvectors of `K f = μA₂ f`, their pairwise combinations,
/// and `n_random` random fields.
pub fn sample_fields<R: Rng>(forms: &FormMatrices, n_smooth: usize, n_random: usize, rng: &mut R) -> Result<Vec<Vec<c64>>> {
    let (_, v) = poincare_spectrum(forms)?;
    let n = forms.n();
    let m = n_smooth.min(n);
    let col = |j: usize| -> Vec<c64> { (0..n).map(|i| c64::new(v[(i, j)], 0.0)).collect() };
    let mut out = Vec::new();
    for a in 0..m {
        out.push(col(a));
        for b in a + 1..m {
            for w in [c64::new(1.0, 0.0), c64::new(0.0, 1.0), c64::new(-1.0, 0.0)] {
                let (x, y) = (col(a), col(b));
                out.push(x.iter().zip(&y).map(|(p, q)| p + q * w).collect());
            }
        }
    }
    for _ in 0..n_random {
        out.push(random_field(n, rng));
    }
    Ok(out)
}

/// Random complex vector with independent uniform(−1, 1) parts.
pub fn random_field<R: Rng>(n: usize, rng: &mut R) -> Vec<c64> {
    (0..n).map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// One eigenvalue outside its admissible region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationViolation {
    #[serde(with = "crate::io::complex")]
    pub gamma: c64,
    pub reason: String,
    /// Distance to the admissible set.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    /// Both conditions hold, so the localization is asserted.
    pub certified: bool,
    pub checked: usize,
    pub violations: Vec<LocalizationViolation>,
}

/// Check `σ(L) ∩ σ± ⊂ I±` and the absence of real eigenvalues in
/// `(−√ε₁, √ε₁)`.
pub fn verify_localization(spectrum: &[c64], regions: &LocalizationRegions, contrast: &ContrastCondition, poincare: &PoincareCondition) -> LocalizationReport {
    let certified = contrast.holds && poincare.holds;
    let mut violations = Vec::new();
    if certified {
        let lo = regions.i_plus[0];
        let slack = 1e-9 * (1.0 + regions.i_plus[1]);
        for &g in spectrum {
            let real = is_real(g);
            let x = g.re;
            if real && x.abs() < lo - slack {
                violations.push(LocalizationViolation {
                    gamma: g,
                    reason: "real eigenvalue in (−√ε_min, √ε_min)".into(),
                    margin: lo - x.abs(),
                });
                continue;
            }
            for (inside, iv, name) in [
                (regions.in_sigma_plus(g), regions.i_plus, "σ+"),
                (regions.in_sigma_minus(g), regions.i_minus, "σ−"),
            ] {
                if !inside {
                    continue;
                }
                let dist = if real { (iv[0] - x).max(x - iv[1]).max(0.0) } else { g.im.abs() };
                if !real || dist > slack {
                    violations.push(LocalizationViolation {
                        gamma: g,
                        reason: format!("eigenvalue in {name} but outside its interval"),
                        margin: dist,
                    });
                }
            }
        }
    }
    LocalizationReport { certified, checked: spectrum.len(), violations }
}

/// Certificate bundle as exported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub contrast: ContrastCondition,
    pub poincare: PoincareCondition,
    pub regions: Option<LocalizationRegions>,
    pub localization: LocalizationReport,
}

/// Largest K-Rayleigh quotient of the Π or Ψ block alone against A₂.
pub fn block_mu_star(forms: &FormMatrices, which: Block) -> Result<f64> {
    let k = forms.block(&forms.k, which);
    let a2 = forms.block(&forms.a2, which);
    if k.nrows() == 0 {
        return Ok(0.0);
    }
    let llt = k
        .llt(Side::Lower)
        .map_err(|_| Error::Spectra("K block is not positive definite".into()))?;
    let mut x = a2.clone();
    let l = llt.L().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), x.as_mut(), faer::Par::Seq);
    let mut c = x.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), faer::Par::Seq);
    let n = c.nrows();
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let ev = c
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::Spectra("symmetric eigensolver failed".into()))?;
    let lmin = ev.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(1.0 / lmin)
}

/// `K f` for a constrained vector (convenience for callers building
/// residuals of the Rayleigh identity).
pub fn apply_k(forms: &FormMatrices, f: &[c64]) -> Vec<c64> {
    matvec(&forms.k, f)
}
