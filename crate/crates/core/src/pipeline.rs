//! Staged pipeline behind the CLI: mesh → assemble → solve → verify →
//! report. Stages hand off through files in the output directory, so each
//! can be rerun on its own; every stage appends to `manifest.json`.
//!
//! Output layout:
//!
//! ```text
//! mesh.json                      mesh document
//! matrices/{k,a1,a2,s}.coo       constrained pencil coefficients
//! matrices/meta.json             sizes and materials of the matrices
//! spectrum.csv                   all eigenvalues, fixed order
//! chains.json                    retained eigenvalues with Jordan chains
//! modes/mode_NNN_pP.csv          transversal fields of the verified waves
//! residuals.json                 residual tables and named assertions
//! certificates.json              localization certificate
//! gram.csv, decay.csv, completeness.csv
//! summary.txt                    human-readable report
//! manifest.json                  stages run, files written, failure if any
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{assemble_forms, FormMatrices};
use crate::geometry::{CrossSectionMesh, MaterialConfig, MeshDocument, Rect};
use crate::io::{coo_text, fmt_f64, parse_coo, read_json, read_text, write_json, write_text};
use crate::modal::{
    basis_decay, biorthogonalize, completeness_residual, norm_identities, smooth_target, transversal, verify_pairing_recursion,
    CompletenessCurve, DecayRow, GramSystem, NormIdentityReport, Pairing, SplitOperators,
};
use crate::pencil::{
    filter_degenerate, jordan_chains, linearize, solve_spectrum, spectrum_order_key, ChainOptions, Eigenpair, ModeChain,
    QuarticPencil, SolveOptions,
};
use crate::spectra::{
    check_contrast, check_poincare, check_inequalities, estimate_r_tilde, random_field, sample_fields, verify_localization,
    Certificate, InequalityReport, LocalizationRegions,
};
use crate::waves::{
    build_transversal, curl_relations, longitudinal_residual, maxwell_residuals, trace_residuals, weak_identities, ResidualEntry,
    TraceReport, TransversalField,
};

/// Outer rectangle `[0, w] × [0, h]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterConfig {
    pub w: f64,
    pub h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionConfig {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub outer: OuterConfig,
    /// Dielectric inclusion Ω₂; `null` for an unloaded guide.
    #[serde(default)]
    pub inclusion: Option<InclusionConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Backward-error limit for accepted eigenpairs and chain members.
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    /// Relative distance below which eigenvalues form one cluster.
    #[serde(default = "default_cluster_tol")]
    pub cluster_tol: f64,
    /// Absolute `|γ² − ε_i|` below which eigenvalues are discarded as
    /// degeneration points.
    #[serde(default = "default_exclusion_tol")]
    pub exclusion_tol: f64,
}

fn default_residual_tol() -> f64 {
    1e-8
}
fn default_cluster_tol() -> f64 {
    1e-6
}
fn default_exclusion_tol() -> f64 {
    1e-8
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { residual_tol: default_residual_tol(), cluster_tol: default_cluster_tol(), exclusion_tol: default_exclusion_tol() }
    }
}

/// Which verification suites run, and their tolerances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    /// Number of lowest-|γ| chains whose waves are built and checked.
    pub modes: usize,
    /// Chains used for the completeness curve.
    pub completeness_modes: usize,
    /// Random fields for r̃ sampling and the inequality suite.
    pub samples: usize,
    /// Random manufactured pairs per Helmholtz split.
    pub split_samples: usize,
    pub seed: u64,
    /// Identity residuals must stay below `identity_c · h`.
    pub identity_c: f64,
    /// Pairings of distinct eigenvalues must stay below `pairing_c · h`.
    pub pairing_c: f64,
    /// Condition-number gate of the Gram blocks.
    pub condition_gate: f64,
    /// Slack factor on the `N_n` bound.
    pub decay_slack: f64,
    pub weak: bool,
    pub curl: bool,
    pub maxwell: bool,
    pub longitudinal: bool,
    pub trace: bool,
    pub certificates: bool,
    pub inequalities: bool,
    pub orthogonality: bool,
    pub gram: bool,
    pub norms: bool,
    pub decay: bool,
    pub splits: bool,
    pub completeness: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            modes: 10,
            completeness_modes: 40,
            samples: 200,
            split_samples: 4,
            seed: 7,
            identity_c: 1e-6,
            pairing_c: 1e-6,
            condition_gate: 1e8,
            decay_slack: 1.05,
            weak: true,
            curl: true,
            maxwell: true,
            longitudinal: true,
            trace: true,
            certificates: true,
            inequalities: true,
            orthogonality: true,
            gram: true,
            norms: true,
            decay: true,
            splits: true,
            completeness: true,
        }
    }
}

/// Names accepted by `--only`.
pub const CHECKS: [&str; 13] = [
    "weak",
    "curl",
    "maxwell",
    "longitudinal",
    "trace",
    "certificates",
    "inequalities",
    "orthogonality",
    "gram",
    "norms",
    "decay",
    "splits",
    "completeness",
];

impl DiagnosticsConfig {
    fn flag(&mut self, name: &str) -> Option<&mut bool> {
        Some(match name {
            "weak" => &mut self.weak,
            "curl" => &mut self.curl,
            "maxwell" => &mut self.maxwell,
            "longitudinal" => &mut self.longitudinal,
            "trace" => &mut self.trace,
            "certificates" => &mut self.certificates,
            "inequalities" => &mut self.inequalities,
            "orthogonality" => &mut self.orthogonality,
            "gram" => &mut self.gram,
            "norms" => &mut self.norms,
            "decay" => &mut self.decay,
            "splits" => &mut self.splits,
            "completeness" => &mut self.completeness,
            _ => return None,
        })
    }

    /// Disable every suite except `name`.
    pub fn only(&mut self, name: &str) -> Result<()> {
        if !CHECKS.contains(&name) {
            return Err(Error::Config(format!("unknown check '{name}' (expected one of: {})", CHECKS.join(", "))));
        }
        for c in CHECKS {
            *self.flag(c).expect("listed check") = c == name;
        }
        Ok(())
    }
}

/// Complete run description, read from a single JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub materials: MaterialConfig,
    pub mesh_h: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    /// Output directory (overridable from the command line).
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check tolerances and materials, and build the mesh once so that
    /// geometry preconditions surface before any stage runs.
    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        let d = &self.diagnostics;
        for (name, v) in [
            ("solver.residual_tol", s.residual_tol),
            ("solver.cluster_tol", s.cluster_tol),
            ("solver.exclusion_tol", s.exclusion_tol),
            ("diagnostics.identity_c", d.identity_c),
            ("diagnostics.pairing_c", d.pairing_c),
            ("diagnostics.condition_gate", d.condition_gate),
            ("diagnostics.decay_slack", d.decay_slack),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        self.materials.validate()?;
        self.build_mesh().map(|_| ())
    }

    pub fn build_mesh(&self) -> Result<CrossSectionMesh> {
        let o = self.geometry.outer;
        let outer = Rect::new(0.0, 0.0, o.w, o.h);
        match self.geometry.inclusion {
            Some(i) => CrossSectionMesh::build_rect_with_inclusion(outer, Rect::new(i.x0, i.y0, i.x1, i.y1), self.mesh_h),
            None => CrossSectionMesh::build_rect(outer, self.mesh_h),
        }
    }
}

/// Pipeline stages in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Mesh,
    Assemble,
    Solve,
    Verify,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Mesh, Stage::Assemble, Stage::Solve, Stage::Verify, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Mesh => "mesh",
            Stage::Assemble => "assemble",
            Stage::Solve => "solve",
            Stage::Verify => "verify",
            Stage::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage '{s}' (expected mesh, assemble, solve, verify or report)")))
    }
}

/// File record of the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestFailure {
    pub stage: String,
    pub module: String,
    pub message: String,
}

/// Index of an output directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: Vec<String>,
    pub files: Vec<ManifestFile>,
    pub failure: Option<ManifestFailure>,
}

fn list_files(root: &Path) -> Result<Vec<ManifestFile>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<ManifestFile>) -> Result<()> {
        let rd = std::fs::read_dir(dir).map_err(|e| Error::Io { path: dir.display().to_string(), source: e })?;
        for entry in rd {
            let entry = entry.map_err(|e| Error::Io { path: dir.display().to_string(), source: e })?;
            let path = entry.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).unwrap_or(&path).to_string_lossy().replace('\\', "/");
                if rel == "manifest.json" {
                    continue;
                }
                let bytes = entry.metadata().map(|m| m.len()).unwrap_or(0);
                out.push(ManifestFile { path: rel, bytes });
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    if root.exists() {
        walk(root, root, &mut out)?;
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

fn update_manifest(out: &Path, stage: Option<Stage>, failure: Option<(Stage, &Error)>) -> Result<()> {
    let path = out.join("manifest.json");
    let mut m: Manifest = if path.exists() { read_json(&path).unwrap_or_default() } else { Manifest::default() };
    if let Some(s) = stage {
        m.stages.retain(|x| x != s.name());
        m.stages.push(s.name().to_string());
        m.stages.sort_by_key(|x| Stage::parse(x).map(|s| s as usize).unwrap_or(usize::MAX));
    }
    m.failure = failure.map(|(s, e)| ManifestFailure { stage: s.name().into(), module: e.stage().into(), message: e.to_string() });
    m.files = list_files(out)?;
    write_json(&path, &m)
}

/// Sizes and materials recorded next to the matrix files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub n: usize,
    pub n_pi: usize,
    pub materials: MaterialConfig,
}

const MATRIX_FILES: [&str; 4] = ["k", "a1", "a2", "s"];

fn load_mesh(out: &Path) -> Result<CrossSectionMesh> {
    let doc: MeshDocument = read_json(&out.join("mesh.json"))?;
    CrossSectionMesh::from_document(&doc)
}

fn check_materials(found: &MaterialConfig, cfg: &RunConfig, what: &str) -> Result<()> {
    if found != &cfg.materials {
        return Err(Error::Config(format!("{what} were produced with materials {found:?}, config has {:?}", cfg.materials)));
    }
    Ok(())
}

/// Stage `mesh`: build and store the cross-section mesh.
pub fn stage_mesh(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mesh = cfg.build_mesh()?;
    write_json(&out.join("mesh.json"), &mesh.to_document())
}

/// Stage `assemble`: constrained pencil coefficients as COO files.
pub fn stage_assemble(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mesh = load_mesh(out)?;
    let forms = assemble_forms(&mesh, &cfg.materials)?;
    let dir = out.join("matrices");
    for (name, m) in MATRIX_FILES.iter().zip([&forms.k, &forms.a1, &forms.a2, &forms.s]) {
        write_text(&dir.join(format!("{name}.coo")), &coo_text(m))?;
    }
    write_json(&dir.join("meta.json"), &MatrixMeta { n: forms.n(), n_pi: forms.n_pi(), materials: cfg.materials })
}

fn load_matrices(out: &Path) -> Result<(MatrixMeta, [Mat<f64>; 4])> {
    let dir = out.join("matrices");
    let missing: Vec<String> = MATRIX_FILES
        .iter()
        .map(|n| format!("{n}.coo"))
        .chain(["meta.json".to_string()])
        .filter(|f| !dir.join(f).exists())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifact(format!(
            "matrix files {} not found in {} (run the assemble stage first)",
            missing.join(", "),
            dir.display()
        )));
    }
    let meta: MatrixMeta = read_json(&dir.join("meta.json"))?;
    let read = |n: &str| -> Result<Mat<f64>> { parse_coo(&read_text(&dir.join(format!("{n}.coo")))?) };
    let mats = [read("k")?, read("a1")?, read("a2")?, read("s")?];
    for m in &mats {
        if m.nrows() != meta.n || m.ncols() != meta.n {
            return Err(Error::Config(format!("matrix size {}×{} does not match meta n = {}", m.nrows(), m.ncols(), meta.n)));
        }
    }
    Ok((meta, mats))
}

/// Solved spectrum with retained chains, as stored in `chains.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainsDocument {
    pub materials: MaterialConfig,
    pub n: usize,
    /// Chains sorted by `|γ|` (ties by the spectrum order).
    pub chains: Vec<ModeChain>,
}

fn by_modulus(a: c64, b: c64) -> std::cmp::Ordering {
    let q = |x: f64| (x * 1e9).round() as i64;
    q(a.norm()).cmp(&q(b.norm())).then(spectrum_order_key(a).cmp(&spectrum_order_key(b)))
}

fn spectrum_csv(kept: &[Eigenpair], excluded: &[Eigenpair], chains: &[ModeChain]) -> String {
    let mut rows: Vec<(&Eigenpair, bool)> = kept.iter().map(|p| (p, false)).chain(excluded.iter().map(|p| (p, true))).collect();
    rows.sort_by(|a, b| spectrum_order_key(a.0.gamma).cmp(&spectrum_order_key(b.0.gamma)));
    let mut used = vec![false; chains.len()];
    let mut s = String::from("index,gamma_re,gamma_im,abs_gamma,residual,converged,cluster_id,chain_index,filtered\n");
    for (i, (p, filtered)) in rows.iter().enumerate() {
        let chain = if *filtered {
            None
        } else {
            let found = chains.iter().enumerate().position(|(j, c)| !used[j] && c.gamma == p.gamma);
            if let Some(j) = found {
                used[j] = true;
            }
            found
        };
        let (cluster, index) = match chain {
            Some(j) => (chains[j].cluster_id.to_string(), j.to_string()),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{cluster},{index},{filtered}",
            fmt_f64(p.gamma.re),
            fmt_f64(p.gamma.im),
            fmt_f64(p.gamma.norm()),
            fmt_f64(p.residual),
            p.converged
        );
    }
    s
}

/// Stage `solve`: eigenvalues, degeneration filter and Jordan chains.
pub fn stage_solve(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (meta, [k, a1, a2, s]) = load_matrices(out)?;
    check_materials(&meta.materials, cfg, "matrices")?;
    let pencil = QuarticPencil::from_matrices(&k, &a1, &a2, &s, meta.materials);
    let lin = linearize(&pencil)?;
    let opts = SolveOptions { residual_tol: cfg.solver.residual_tol, ..SolveOptions::default() };
    let pairs = solve_spectrum(&lin, &opts)?;
    let (kept, excluded) = filter_degenerate(pairs, &meta.materials, cfg.solver.exclusion_tol);
    let copts = ChainOptions { cluster_tol: cfg.solver.cluster_tol, chain_tol: cfg.solver.residual_tol.max(1e-6), ..ChainOptions::default() };
    let mut chains = jordan_chains(&pencil, &kept, &copts)?;
    chains.sort_by(|a, b| by_modulus(a.gamma, b.gamma));
    write_text(&out.join("spectrum.csv"), &spectrum_csv(&kept, &excluded, &chains))?;
    write_json(&out.join("chains.json"), &ChainsDocument { materials: meta.materials, n: meta.n, chains })
}

/// Outcome of one named invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    /// Worst measured value.
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl Assertion {
    fn at_most(name: &str, value: f64, limit: f64, detail: String) -> Self {
        Self { name: name.into(), passed: value <= limit, value, limit, detail }
    }
}

/// Residual tables of one verified chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeResiduals {
    pub index: usize,
    #[serde(with = "crate::io::complex")]
    pub gamma: c64,
    pub chain_length: usize,
    pub backward_errors: Vec<f64>,
    pub weak: Vec<ResidualEntry>,
    pub curl: Vec<ResidualEntry>,
    pub maxwell: Vec<ResidualEntry>,
    pub longitudinal: Vec<ResidualEntry>,
    pub traces: Vec<TraceReport>,
    pub norms: Option<NormIdentityReport>,
}

/// Worst normalized pairing over the checked pairs of distinct eigenvalues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub pairs: usize,
    pub bilinear_max: f64,
    pub sesquilinear_max: f64,
    pub recursion_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub samples: usize,
    pub split_1_max: f64,
    pub split_2_max: f64,
}

/// Everything `verify` measured, as stored in `residuals.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub h: f64,
    pub modes: Vec<ModeResiduals>,
    pub orthogonality: Option<OrthogonalityReport>,
    pub inequalities: Option<InequalityReport>,
    pub splits: Option<SplitReport>,
    pub completeness_dependent: Vec<usize>,
    pub assertions: Vec<Assertion>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

/// Certificate with the sampling information behind r̃.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateBundle {
    #[serde(flatten)]
    pub certificate: Certificate,
    pub r_tilde_samples: usize,
    pub r_tilde_skipped: usize,
    /// Why no localization regions were formed, if so.
    pub regions_note: Option<String>,
}

fn load_chains(cfg: &RunConfig, out: &Path, forms: &FormMatrices) -> Result<ChainsDocument> {
    let path = out.join("chains.json");
    if !path.exists() {
        return Err(Error::MissingArtifact(format!("{} not found (run the solve stage first)", path.display())));
    }
    let doc: ChainsDocument = read_json(&path)?;
    check_materials(&doc.materials, cfg, "chains")?;
    if doc.n != forms.n() {
        return Err(Error::Config(format!("chains have size {}, the mesh gives {}", doc.n, forms.n())));
    }
    Ok(doc)
}

fn mode_csv(w: &TransversalField, mesh: &CrossSectionMesh) -> String {
    let mut s = String::from("triangle,x,y,E1_re,E1_im,E2_re,E2_im,H1_re,H1_im,H2_re,H2_im,E3_re,E3_im,H3_re,H3_im\n");
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let c = mesh.centroid(t);
        let avg = |u: &[c64]| (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
        let mut vals: Vec<c64> = w.v4(t).to_vec();
        vals.push(avg(&w.pi));
        vals.push(avg(&w.psi));
        let _ = write!(s, "{t},{},{}", fmt_f64(c[0]), fmt_f64(c[1]));
        for z in vals {
            let _ = write!(s, ",{},{}", fmt_f64(z.re), fmt_f64(z.im));
        }
        s.push('\n');
    }
    s
}

fn gram_csv(g: &GramSystem) -> String {
    let mut s = String::from("group,gamma_re,gamma_im,row,col,chain,p,g_re,g_im,a_re,a_im,condition,residual,conditioned\n");
    for b in &g.blocks {
        for (i, row) in b.gram.iter().enumerate() {
            for (j, z) in row.iter().enumerate() {
                let a = b.inverse.get(i).and_then(|r| r.get(j)).copied().unwrap_or(c64::new(f64::NAN, f64::NAN));
                let _ = writeln!(
                    s,
                    "{},{},{},{i},{j},{},{},{},{},{},{},{},{},{}",
                    b.group,
                    fmt_f64(b.gamma.re),
                    fmt_f64(b.gamma.im),
                    b.members[i].0,
                    b.members[i].1,
                    fmt_f64(z.re),
                    fmt_f64(z.im),
                    fmt_f64(a.re),
                    fmt_f64(a.im),
                    fmt_f64(b.condition),
                    fmt_f64(b.residual),
                    b.conditioned
                );
            }
        }
    }
    s
}

fn decay_csv(rows: &[DecayRow]) -> String {
    let mut s = String::from("index,gamma_re,gamma_im,abs_gamma,n_abs,bound,partner_norm\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{}",
            fmt_f64(r.gamma.re),
            fmt_f64(r.gamma.im),
            fmt_f64(r.gamma.norm()),
            fmt_f64(r.n_abs),
            fmt_f64(r.bound),
            fmt_f64(r.partner_norm)
        );
    }
    s
}

fn completeness_csv(c: &CompletenessCurve) -> String {
    let mut s = String::from("M,residual\n");
    for (m, r) in &c.residuals {
        let _ = writeln!(s, "{m},{}", fmt_f64(*r));
    }
    s
}

fn max_rel(entries: &[ResidualEntry]) -> f64 {
    entries.iter().map(|e| e.relative).fold(0.0, f64::max)
}

/// Simple eigenwaves with `Re γ = 0 < Im γ` (one per ± pair), in chain order.
pub fn evanescent_family(chains: &[ModeChain]) -> Vec<usize> {
    chains
        .iter()
        .enumerate()
        .filter(|(_, c)| c.len() == 1 && c.algebraic_multiplicity == 1 && c.gamma.im > 0.0 && c.gamma.re.abs() <= 1e-9 * (1.0 + c.gamma.norm()))
        .map(|(i, _)| i)
        .collect()
}

/// Window length of the `N_n` trend test: about twenty windows over the
/// family, never fewer than eight modes per window.
pub fn trend_window(len: usize) -> usize {
    (len / 20).max(8)
}

/// Trend test on consecutive windows of `w` values: returns the number of
/// window steps whose median does not decrease, and the number of steps.
/// Medians keep isolated localized modes from masking the trend.
pub fn windowed_increases(values: &[f64], w: usize) -> (usize, usize) {
    let medians: Vec<f64> = values
        .chunks_exact(w)
        .map(|c| {
            let mut s = c.to_vec();
            s.sort_by(f64::total_cmp);
            if w % 2 == 1 { s[w / 2] } else { 0.5 * (s[w / 2 - 1] + s[w / 2]) }
        })
        .collect();
    let bad = medians.windows(2).filter(|p| p[1] >= p[0]).count();
    (bad, medians.len().saturating_sub(1))
}

/// Stage `verify`: build waves and run the enabled suites.
pub fn stage_verify(cfg: &RunConfig, out: &Path) -> Result<VerifyReport> {
    let d = &cfg.diagnostics;
    let mesh = load_mesh(out)?;
    let forms = assemble_forms(&mesh, &cfg.materials)?;
    let doc = load_chains(cfg, out, &forms)?;
    let chains = &doc.chains;
    let mat = &cfg.materials;
    let h = mesh.h();
    let identity_limit = d.identity_c * h;
    let pencil = QuarticPencil::from_forms(&forms);
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    let mut assertions = Vec::new();

    let n_modes = d.modes.min(chains.len());
    let mut waves: Vec<Vec<TransversalField>> = Vec::with_capacity(n_modes);
    for ch in &chains[..n_modes] {
        waves.push(build_transversal(ch, &forms, &mesh, cfg.solver.exclusion_tol)?);
    }
    let modes_dir = out.join("modes");
    if modes_dir.exists() {
        std::fs::remove_dir_all(&modes_dir).map_err(|e| Error::Io { path: modes_dir.display().to_string(), source: e })?;
    }
    for (i, ws) in waves.iter().enumerate() {
        for w in ws {
            write_text(&modes_dir.join(format!("mode_{i:03}_p{}.csv", w.p)), &mode_csv(w, &mesh))?;
        }
    }

    let backward = |ch: &ModeChain| -> Vec<f64> { ch.chain.iter().take(1).map(|f| pencil.backward_error(ch.gamma, f)).collect() };
    let mut modes = Vec::with_capacity(n_modes);
    for (i, (ch, ws)) in chains.iter().zip(&waves).enumerate() {
        modes.push(ModeResiduals {
            index: i,
            gamma: ch.gamma,
            chain_length: ch.len(),
            backward_errors: backward(ch),
            weak: if d.weak { weak_identities(ws, &mesh, mat) } else { Vec::new() },
            curl: if d.curl { curl_relations(ws, &mesh, mat) } else { Vec::new() },
            maxwell: if d.maxwell { maxwell_residuals(ws, &mesh, mat) } else { Vec::new() },
            longitudinal: if d.longitudinal { longitudinal_residual(ws, &mesh, mat) } else { Vec::new() },
            traces: if d.trace { trace_residuals(ws, &mesh, mat) } else { Vec::new() },
            norms: if d.norms && ch.len() == 1 && ch.algebraic_multiplicity == 1 { Some(norm_identities(&ws[0], &mesh, mat)?) } else { None },
        });
    }
    let worst = |f: &dyn Fn(&ModeResiduals) -> f64| modes.iter().map(f).fold(0.0, f64::max);
    let eig = worst(&|m| m.backward_errors.iter().copied().fold(0.0, f64::max));
    assertions.push(Assertion::at_most("pencil.backward_error", eig, cfg.solver.residual_tol, format!("{n_modes} verified modes")));
    let chain_res = chains.iter().flat_map(|c| c.residuals.iter().copied()).fold(0.0, f64::max);
    let truncated = chains.iter().filter(|c| c.truncated).count();
    assertions.push(Assertion::at_most(
        "pencil.jordan_chains",
        chain_res,
        cfg.solver.residual_tol.max(1e-6),
        format!("{} chains, {truncated} truncated", chains.len()),
    ));
    for (flag, name, f) in [
        (d.weak, "waves.weak_identities", (|m: &ModeResiduals| max_rel(&m.weak)) as fn(&ModeResiduals) -> f64),
        (d.curl, "waves.curl_relations", |m| max_rel(&m.curl)),
        (d.maxwell, "waves.maxwell_rows", |m| max_rel(&m.maxwell)),
        (d.longitudinal, "waves.longitudinal_equations", |m| max_rel(&m.longitudinal)),
    ] {
        if flag {
            assertions.push(Assertion::at_most(name, worst(&f), identity_limit, format!("limit {:.1e}·h", d.identity_c)));
        }
    }
    if d.norms {
        let v = worst(&|m| m.norms.as_ref().map(|n| n.energy_identity.unwrap_or(0.0).max(n.value_identity.unwrap_or(0.0))).unwrap_or(0.0));
        assertions.push(Assertion::at_most("modal.norm_identities", v, 2.0 * identity_limit, "simple modes only".into()));
    }

    let mut orthogonality = None;
    if d.orthogonality {
        let limit = d.pairing_c * h;
        let (mut bil, mut ses, mut rec, mut pairs) = (0.0f64, 0.0f64, 0.0f64, 0);
        for i in 0..n_modes {
            for j in 0..n_modes {
                if i == j || chains[i].cluster_id == chains[j].cluster_id {
                    continue;
                }
                pairs += 1;
                for kind in [Pairing::Bilinear, Pairing::Sesquilinear] {
                    let e = verify_pairing_recursion(&waves[i], &waves[j], &mesh, kind)?;
                    let np = e.iter().map(|x| x.normalized_pairing).fold(0.0, f64::max);
                    if kind == Pairing::Bilinear {
                        bil = bil.max(np);
                        rec = rec.max(e.iter().map(|x| x.relative).fold(0.0, f64::max));
                    } else {
                        ses = ses.max(np);
                    }
                }
            }
        }
        assertions.push(Assertion::at_most("modal.orthogonality", bil, limit, format!("{pairs} ordered pairs, bilinear pairing")));
        orthogonality = Some(OrthogonalityReport { pairs, bilinear_max: bil, sesquilinear_max: ses, recursion_max: rec });
    }

    if d.gram {
        let g = biorthogonalize(&chains[..n_modes], &waves, &mesh, Pairing::Bilinear, d.condition_gate)?;
        let res = g.blocks.iter().filter(|b| b.conditioned).map(|b| b.residual).fold(0.0, f64::max);
        let flagged = g.blocks.iter().filter(|b| !b.conditioned).count();
        assertions.push(Assertion::at_most("modal.gram_inverse", res, 1e-10, format!("{} blocks, {flagged} over the gate", g.blocks.len())));
        write_text(&out.join("gram.csv"), &gram_csv(&g))?;
    }

    if d.decay && !mat.is_homogeneous() {
        let fam = evanescent_family(chains);
        let mut ev = Vec::with_capacity(fam.len());
        for &i in &fam {
            ev.push(build_transversal(&chains[i], &forms, &mesh, cfg.solver.exclusion_tol)?.remove(0));
        }
        let rows = basis_decay(&ev, &mesh, mat)?;
        let ratio = rows.iter().map(|r| r.n_abs / r.bound).fold(0.0, f64::max);
        assertions.push(Assertion::at_most("modal.decay_bound", ratio, d.decay_slack, format!("{} evanescent modes, max |N|/bound", rows.len())));
        let n: Vec<f64> = rows.iter().map(|r| r.n_abs).collect();
        let w = trend_window(n.len());
        let (bad, windows) = windowed_increases(&n, w);
        let pointwise = n.windows(2).filter(|p| p[1] > p[0]).count();
        assertions.push(Assertion::at_most(
            "modal.decay_trend",
            bad as f64,
            0.0,
            format!("{windows} window steps of {w}, {pointwise} pointwise increases"),
        ));
        write_text(&out.join("decay.csv"), &decay_csv(&rows))?;
    }

    let mut inequalities = None;
    if d.inequalities {
        let mut worst_rep: Option<InequalityReport> = None;
        let mut viol = 0;
        for _ in 0..d.samples {
            let f = random_field(forms.n(), &mut rng);
            let r = check_inequalities(&f, &forms, 16)?;
            if !r.holds(1e-12) {
                viol += 1;
            }
            worst_rep = Some(match worst_rep {
                None => r,
                Some(w) => InequalityReport {
                    cauchy_schwarz_margin: [w.cauchy_schwarz_margin[0].min(r.cauchy_schwarz_margin[0]), w.cauchy_schwarz_margin[1].min(r.cauchy_schwarz_margin[1])],
                    region_margin: [w.region_margin[0].min(r.region_margin[0]), w.region_margin[1].min(r.region_margin[1])],
                    lower_bound_margin: w.lower_bound_margin.min(r.lower_bound_margin),
                },
            });
        }
        assertions.push(Assertion::at_most("spectra.inequalities", viol as f64, 0.0, format!("{} random fields", d.samples)));
        inequalities = worst_rep;
    }

    if d.certificates {
        let contrast = check_contrast(mat);
        let poincare = check_poincare(&forms)?;
        let fields = sample_fields(&forms, 8, d.samples, &mut rng)?;
        let (regions, note, skipped) = match estimate_r_tilde(&fields, &forms) {
            Ok((rt, skipped)) => match LocalizationRegions::new(mat, rt) {
                Ok(r) => (Some(r), None, skipped),
                Err(e) => (None, Some(e.to_string()), skipped),
            },
            Err(e) => (None, Some(e.to_string()), fields.len()),
        };
        let spectrum: Vec<c64> = chains.iter().map(|c| c.gamma).collect();
        let localization = match &regions {
            Some(r) => verify_localization(&spectrum, r, &contrast, &poincare),
            None => crate::spectra::LocalizationReport { certified: false, checked: 0, violations: Vec::new() },
        };
        if localization.certified {
            assertions.push(Assertion::at_most(
                "spectra.localization",
                localization.violations.len() as f64,
                0.0,
                format!("{} eigenvalues checked", localization.checked),
            ));
        }
        let bundle = CertificateBundle {
            certificate: Certificate { contrast, poincare, regions, localization },
            r_tilde_samples: fields.len(),
            r_tilde_skipped: skipped,
            regions_note: note,
        };
        write_json(&out.join("certificates.json"), &bundle)?;
    }

    let mut splits = None;
    if d.splits {
        let ops = SplitOperators::new(&mesh, &forms);
        let (mut s1, mut s2) = (0.0f64, 0.0f64);
        let nn = mesh.n_nodes();
        let boundary = mesh.boundary_nodes();
        for _ in 0..d.split_samples {
            let mut f0 = random_field(nn, &mut rng);
            for &b in &boundary {
                f0[b] = c64::new(0.0, 0.0);
            }
            let g0 = random_field(nn, &mut rng);
            s1 = s1.max(ops.split_1(&ops.compose_1(&f0, &g0))?.residual);
            s2 = s2.max(ops.split_2(&ops.compose_2(&f0, &g0))?.residual);
        }
        assertions.push(Assertion::at_most("modal.helmholtz_splits", s1.max(s2), 1e-10, format!("{} manufactured pairs per split", d.split_samples)));
        splits = Some(SplitReport { samples: d.split_samples, split_1_max: s1, split_2_max: s2 });
    }

    let mut completeness_dependent = Vec::new();
    if d.completeness {
        let m = d.completeness_modes.min(chains.len());
        let mut fields = Vec::new();
        for ch in &chains[..m] {
            for w in build_transversal(ch, &forms, &mesh, cfg.solver.exclusion_tol)? {
                fields.push(transversal(&w));
            }
        }
        let curve = completeness_residual(&smooth_target(&mesh, mat), &fields, &mesh)?;
        let rises = curve.residuals.windows(2).map(|p| p[1].1 - p[0].1).fold(0.0, f64::max);
        assertions.push(Assertion::at_most("modal.completeness_monotone", rises, 1e-12, format!("{} fields", fields.len())));
        completeness_dependent = curve.dependent.clone();
        write_text(&out.join("completeness.csv"), &completeness_csv(&curve))?;
    }

    let report = VerifyReport { h, modes, orthogonality, inequalities, splits, completeness_dependent, assertions };
    write_json(&out.join("residuals.json"), &report)?;
    Ok(report)
}

/// Stage `report`: aggregate the JSON outputs into `summary.txt`.
pub fn stage_report(cfg: &RunConfig, out: &Path) -> Result<String> {
    let path = out.join("residuals.json");
    if !path.exists() {
        return Err(Error::MissingArtifact(format!("{} not found (run the verify stage first)", path.display())));
    }
    let rep: VerifyReport = read_json(&path)?;
    let mut s = String::new();
    let m = &cfg.materials;
    let _ = writeln!(s, "waveguide cross-section {} x {}, eps = ({}, {}), h = {}", cfg.geometry.outer.w, cfg.geometry.outer.h, m.eps1, m.eps2, rep.h);
    let _ = writeln!(s, "lowest modes:");
    for md in &rep.modes {
        let _ = writeln!(
            s,
            "  {:3}  gamma = {:+.6e} {:+.6e}i  chain {}  backward {:.1e}",
            md.index,
            md.gamma.re,
            md.gamma.im,
            md.chain_length,
            md.backward_errors.iter().copied().fold(0.0, f64::max)
        );
    }
    if let Some(o) = &rep.orthogonality {
        let _ = writeln!(s, "pairings of distinct modes: bilinear {:.2e}, sesquilinear {:.2e}", o.bilinear_max, o.sesquilinear_max);
    }
    let cert = out.join("certificates.json");
    if cert.exists() {
        let b: CertificateBundle = read_json(&cert)?;
        let c = &b.certificate;
        let _ = writeln!(
            s,
            "contrast condition: {} (margin {:.3}); Poincare condition: {} (mu* = {:.4})",
            c.contrast.holds, c.contrast.margin, c.poincare.holds, c.poincare.mu_star
        );
        match (&c.regions, &b.regions_note) {
            (Some(r), _) => {
                let _ = writeln!(s, "disks: p = {:.4}, r = {:.4}, r~ = {:.4}; violations {}", r.p, r.r, r.r_tilde, c.localization.violations.len());
            }
            (None, Some(n)) => {
                let _ = writeln!(s, "no localization disks: {n}");
            }
            _ => {}
        }
    }
    let trace_max = rep.modes.iter().flat_map(|m| m.traces.iter()).map(|t| t.e_tangential_outer.max(t.h_normal_outer)).fold(0.0, f64::max);
    if rep.modes.iter().any(|m| !m.traces.is_empty()) {
        let _ = writeln!(s, "boundary traces (discretization error, not asserted): max {trace_max:.3e}");
    }
    let _ = writeln!(s, "assertions:");
    for a in &rep.assertions {
        let _ = writeln!(s, "  [{}] {}: {:.3e} <= {:.3e} ({})", if a.passed { "pass" } else { "FAIL" }, a.name, a.value, a.limit, a.detail);
    }
    let _ = writeln!(s, "overall: {}", if rep.passed() { "pass" } else { "FAIL" });
    write_text(&out.join("summary.txt"), &s)?;
    Ok(s)
}

/// Result of a full or partial run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub passed: bool,
    pub summary: Option<String>,
    pub failed: Vec<String>,
}

/// Run one stage and record it in the manifest (also on failure).
pub fn run_stage(cfg: &RunConfig, out: &Path, stage: Stage) -> Result<RunOutcome> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.display().to_string(), source: e })?;
    let result = match stage {
        Stage::Mesh => stage_mesh(cfg, out).map(|_| RunOutcome { passed: true, summary: None, failed: Vec::new() }),
        Stage::Assemble => stage_assemble(cfg, out).map(|_| RunOutcome { passed: true, summary: None, failed: Vec::new() }),
        Stage::Solve => stage_solve(cfg, out).map(|_| RunOutcome { passed: true, summary: None, failed: Vec::new() }),
        Stage::Verify => stage_verify(cfg, out).map(|r| RunOutcome {
            passed: r.passed(),
            summary: None,
            failed: r.assertions.iter().filter(|a| !a.passed).map(|a| a.name.clone()).collect(),
        }),
        Stage::Report => stage_report(cfg, out).map(|s| {
            let rep: Option<VerifyReport> = read_json(&out.join("residuals.json")).ok();
            let failed: Vec<String> =
                rep.map(|r| r.assertions.iter().filter(|a| !a.passed).map(|a| a.name.clone()).collect()).unwrap_or_default();
            RunOutcome { passed: failed.is_empty(), summary: Some(s), failed }
        }),
    };
    match &result {
        Ok(_) => update_manifest(out, Some(stage), None)?,
        Err(e) => update_manifest(out, None, Some((stage, e)))?,
    }
    result
}

/// Run every stage up to and including `until`.
pub fn run(cfg: &RunConfig, out: &Path, until: Stage) -> Result<RunOutcome> {
    let mut last = RunOutcome { passed: true, summary: None, failed: Vec::new() };
    for stage in Stage::ALL.into_iter().filter(|s| *s <= until) {
        let r = run_stage(cfg, out, stage)?;
        last = RunOutcome { passed: last.passed && r.passed, summary: r.summary.or(last.summary), failed: [last.failed, r.failed].concat() };
    }
    last.failed.sort();
    last.failed.dedup();
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_check_is_rejected() {
        let mut d = DiagnosticsConfig::default();
        assert!(d.only("nonsense").is_err());
        d.only("trace").unwrap();
        assert!(d.trace && !d.weak && !d.completeness);
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(Stage::parse(s.name()).unwrap(), s);
        }
    }

    #[test]
    fn windowed_trend() {
        let v = [5.0, 6.0, 4.0, 4.5, 3.0, 3.2, 2.0, 2.5];
        assert_eq!(windowed_increases(&v, 2), (0, 3));
        assert_eq!(windowed_increases(&[1.0, 2.0, 3.0, 4.0], 2), (1, 1));
        // one outlier per window does not move the median
        let v = [9.0, 5.0, 5.0, 0.1, 4.0, 4.0];
        assert_eq!(windowed_increases(&v, 3), (0, 1));
    }
}
