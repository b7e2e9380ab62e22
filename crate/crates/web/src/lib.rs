//! Browser front end of the waveguide mode solver.
//!
//! [`Demo`] holds one solved configuration and answers three queries as
//! JSON: the spectrum with its localization disks, the field of one mode,
//! and the scalar quartic of a random field. [`WasmDemo`] exposes it to
//! JavaScript.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;
use wavepencil::forms::{assemble_forms, scalar_forms, FormMatrices};
use wavepencil::geometry::CrossSectionMesh;
use wavepencil::pencil::{filter_degenerate, jordan_chains, linearize, solve_spectrum, ChainOptions, ModeChain, SolveOptions};
use wavepencil::pipeline::RunConfig;
use wavepencil::spectra::{estimate_r_tilde, random_field, sample_fields, scalar_quartic_roots, LocalizationRegions};
use wavepencil::waves::build_transversal;
use wavepencil::c64;

/// Largest mesh (in nodes) accepted in the browser; the dense solve has
/// roughly twice as many unknowns.
pub const MAX_NODES: usize = 800;

#[derive(Clone, Debug, Serialize)]
pub struct Disks {
    /// Centres `±p` on the real axis.
    pub p: f64,
    pub r: f64,
    pub i_minus: [f64; 2],
    pub i_plus: [f64; 2],
}

impl From<&LocalizationRegions> for Disks {
    fn from(l: &LocalizationRegions) -> Self {
        Self { p: l.p, r: l.r, i_minus: l.i_minus, i_plus: l.i_plus }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumPoint {
    pub re: f64,
    pub im: f64,
    /// Jordan-chain length (1 for a simple eigenwave).
    pub chain: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumView {
    pub unknowns: usize,
    pub triangles: usize,
    pub eps: [f64; 2],
    /// Retained eigenvalues, ordered by modulus.
    pub points: Vec<SpectrumPoint>,
    pub excluded: usize,
    pub disks: Option<Disks>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeView {
    pub index: usize,
    pub re: f64,
    pub im: f64,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Region tag per triangle (1 outside the inclusion, 2 inside).
    pub tags: Vec<u8>,
    /// `|E₃|` and `|H₃|` per node.
    pub e3: Vec<f64>,
    pub h3: Vec<f64>,
    /// `|(E₁, E₂)|` and `|(H₁, H₂)|` per triangle.
    pub et: Vec<f64>,
    pub ht: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuarticView {
    pub seed: u64,
    pub theta: f64,
    pub roots: Vec<[f64; 2]>,
    /// Whether each root is one of the interval roots on `I₋ ∪ I₊`.
    pub on_interval: Vec<bool>,
    /// Whether each root is separated as the disks promise: interval roots
    /// inside `σ₋ ∪ σ₊`, the other two outside both.
    pub separated: Vec<bool>,
    pub disks: Option<Disks>,
}

/// One solved configuration.
pub struct Demo {
    cfg: RunConfig,
    mesh: CrossSectionMesh,
    forms: FormMatrices,
    chains: Vec<ModeChain>,
    excluded: usize,
    regions: Option<LocalizationRegions>,
    note: Option<String>,
}

impl Demo {
    /// Parse a run configuration (the CLI schema), assemble and solve.
    pub fn from_config(json: &str) -> Result<Self, String> {
        let cfg: RunConfig = serde_json::from_str(json).map_err(|e| format!("config: {e}"))?;
        cfg.validate().map_err(|e| e.to_string())?;
        let mesh = cfg.build_mesh().map_err(|e| e.to_string())?;
        if mesh.nodes().len() > MAX_NODES {
            return Err(format!("{} mesh nodes exceed the browser limit of {MAX_NODES}; increase mesh_h", mesh.nodes().len()));
        }
        let forms = assemble_forms(&mesh, &cfg.materials).map_err(|e| e.to_string())?;
        let s = &cfg.solver;
        let pencil = wavepencil::pencil::QuarticPencil::from_forms(&forms);
        let lin = linearize(&pencil).map_err(|e| e.to_string())?;
        let pairs = solve_spectrum(&lin, &SolveOptions { residual_tol: s.residual_tol, ..SolveOptions::default() })
            .map_err(|e| e.to_string())?;
        let (kept, gone) = filter_degenerate(pairs, &cfg.materials, s.exclusion_tol);
        let copts = ChainOptions { cluster_tol: s.cluster_tol, chain_tol: s.residual_tol.max(1e-6), ..ChainOptions::default() };
        let mut chains = jordan_chains(&pencil, &kept, &copts).map_err(|e| e.to_string())?;
        chains.sort_by(|a, b| {
            let (x, y) = (a.gamma, b.gamma);
            x.norm().total_cmp(&y.norm()).then(x.re.total_cmp(&y.re)).then(x.im.total_cmp(&y.im))
        });

        let (regions, note) = if cfg.materials.is_homogeneous() {
            (None, Some("equal permittivities: the intervals I± collapse to points and no disks are drawn".to_string()))
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.diagnostics.seed);
            let fields = sample_fields(&forms, 8, cfg.diagnostics.samples, &mut rng).map_err(|e| e.to_string())?;
            match estimate_r_tilde(&fields, &forms).and_then(|(rt, _)| LocalizationRegions::new(&cfg.materials, rt)) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            }
        };
        Ok(Self { cfg, mesh, forms, chains, excluded: gone.len(), regions, note })
    }

    pub fn spectrum(&self) -> SpectrumView {
        let m = &self.cfg.materials;
        SpectrumView {
            unknowns: self.forms.n(),
            triangles: self.mesh.triangles().len(),
            eps: [m.eps1, m.eps2],
            points: self
                .chains
                .iter()
                .map(|c| SpectrumPoint {
                    re: c.gamma.re,
                    im: c.gamma.im,
                    chain: c.len(),
                    residual: c.residuals.first().copied().unwrap_or(f64::NAN),
                })
                .collect(),
            excluded: self.excluded,
            disks: self.regions.as_ref().map(Disks::from),
            note: self.note.clone(),
        }
    }

    /// Field of the eigenwave of chain `index` (in spectrum order).
    pub fn mode(&self, index: usize) -> Result<ModeView, String> {
        let chain = self.chains.get(index).ok_or_else(|| format!("mode {index} out of range (0..{})", self.chains.len()))?;
        let waves = build_transversal(chain, &self.forms, &self.mesh, self.cfg.solver.exclusion_tol).map_err(|e| e.to_string())?;
        let w = &waves[0];
        let mag2 = |v: &[c64; 2]| (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        Ok(ModeView {
            index,
            re: chain.gamma.re,
            im: chain.gamma.im,
            nodes: self.mesh.nodes().to_vec(),
            triangles: self.mesh.triangles().to_vec(),
            tags: self.mesh.tags().to_vec(),
            e3: w.pi.iter().map(|z| z.norm()).collect(),
            h3: w.psi.iter().map(|z| z.norm()).collect(),
            et: w.e.iter().map(mag2).collect(),
            ht: w.h.iter().map(mag2).collect(),
        })
    }

    /// Roots of the scalar quartic of a random field drawn from `seed`.
    pub fn quartic(&self, seed: u64) -> Result<QuarticView, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(self.forms.n(), &mut rng);
        let v = scalar_forms(&f, &self.forms).map_err(|e| e.to_string())?;
        let q = scalar_quartic_roots(&v, &self.cfg.materials).map_err(|e| e.to_string())?;
        let on_interval: Vec<bool> = q
            .roots
            .iter()
            .map(|&z| [q.in_minus, q.in_plus].iter().flatten().any(|w| (z - w).norm() <= 1e-9 * (1.0 + z.norm())))
            .collect();
        let separated = q
            .roots
            .iter()
            .zip(&on_interval)
            .map(|(&z, &on)| match &self.regions {
                Some(r) => on == (r.in_sigma_plus(z) || r.in_sigma_minus(z)),
                None => true,
            })
            .collect();
        Ok(QuarticView {
            seed,
            theta: v.theta,
            roots: q.roots.iter().map(|z| [z.re, z.im]).collect(),
            on_interval,
            separated,
            disks: self.regions.as_ref().map(Disks::from),
        })
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("views serialize")
}

/// JavaScript handle of a [`Demo`]; every query returns a JSON string.
#[wasm_bindgen]
pub struct WasmDemo(Demo);

#[wasm_bindgen]
impl WasmDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(config_json: &str) -> Result<WasmDemo, JsError> {
        Demo::from_config(config_json).map(WasmDemo).map_err(|e| JsError::new(&e))
    }

    pub fn spectrum(&self) -> String {
        to_json(&self.0.spectrum())
    }

    pub fn mode(&self, index: usize) -> Result<String, JsError> {
        self.0.mode(index).map(|m| to_json(&m)).map_err(|e| JsError::new(&e))
    }

    pub fn quartic(&self, seed: u64) -> Result<String, JsError> {
        self.0.quartic(seed).map(|q| to_json(&q)).map_err(|e| JsError::new(&e))
    }
}
