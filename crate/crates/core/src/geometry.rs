//! Structured triangulations of a rectangular cross-section with one
//! rectangular dielectric inclusion, permittivity data and nodal dof maps.
//!
//! Conventions:
//! * region tag 1 is the outer medium Ω₁, tag 2 the inclusion Ω₂;
//! * triangles are counterclockwise;
//! * `interface_edges` is the closed polygon Γ = ∂Ω₂ traversed
//!   counterclockwise around Ω₂ (Ω₂ on the left of every edge);
//! * `outer_edges` is Γ₀ traversed counterclockwise around Ω.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    fn is_finite(&self) -> bool {
        [self.x0, self.y0, self.x1, self.y1].iter().all(|v| v.is_finite())
    }

    /// Smallest distance between the sides of `inner` and `self`; positive
    /// iff `inner` lies strictly inside.
    fn margin_of(&self, inner: &Rect) -> f64 {
        (inner.x0 - self.x0)
            .min(self.x1 - inner.x1)
            .min(inner.y0 - self.y0)
            .min(self.y1 - inner.y1)
    }
}

/// Relative permittivities of the outer medium (`eps1`) and the inclusion (`eps2`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialConfig {
    pub eps1: f64,
    pub eps2: f64,
}

impl MaterialConfig {
    pub fn new(eps1: f64, eps2: f64) -> Result<Self> {
        let m = Self { eps1, eps2 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2)] {
            if !v.is_finite() || v < 1.0 {
                return Err(Error::Materials(format!(
                    "{name} = {v} must be a finite permittivity >= 1"
                )));
            }
        }
        Ok(())
    }

    /// Permittivity of region `tag` (1 or 2).
    pub fn eps(&self, tag: u8) -> f64 {
        if tag == 2 {
            self.eps2
        } else {
            self.eps1
        }
    }

    pub fn delta(&self) -> f64 {
        (self.eps2 - self.eps1) / 2.0
    }

    pub fn p_rms(&self) -> f64 {
        ((self.eps1 + self.eps2) / 2.0).sqrt()
    }

    pub fn p_mid(&self) -> f64 {
        (self.eps1.sqrt() + self.eps2.sqrt()) / 2.0
    }

    pub fn eps_min(&self) -> f64 {
        self.eps1.min(self.eps2)
    }

    pub fn eps_max(&self) -> f64 {
        self.eps1.max(self.eps2)
    }

    /// True when both regions carry the same permittivity, so that the
    /// pencil has no odd powers of γ.
    pub fn is_homogeneous(&self) -> bool {
        self.eps1 == self.eps2
    }
}

/// Triangulated cross-section. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSectionMesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    tags: Vec<u8>,
    interface_edges: Vec<[usize; 2]>,
    outer_edges: Vec<[usize; 2]>,
    h: f64,
    outer: Rect,
}

/// JSON exchange format of a mesh (field names are part of the file format).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeshDocument {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 4]>,
    pub interface_edges: Vec<[usize; 2]>,
    pub outer_edges: Vec<[usize; 2]>,
    pub h: f64,
}

/// Cell counts per segment: each segment of length `len` gets
/// `ceil(len / h)` equal cells (with a small slack so exact multiples of h
/// are not rounded up).
fn segment_cells(len: f64, h: f64) -> usize {
    ((len / h) - 1e-9).ceil().max(1.0) as usize
}

fn breakpoints(cuts: &[f64], h: f64) -> (Vec<f64>, Vec<usize>) {
    let mut coords = vec![cuts[0]];
    let mut cut_index = vec![0];
    for w in cuts.windows(2) {
        let n = segment_cells(w[1] - w[0], h);
        for k in 1..=n {
            coords.push(if k == n {
                w[1]
            } else {
                w[0] + (w[1] - w[0]) * k as f64 / n as f64
            });
        }
        cut_index.push(coords.len() - 1);
    }
    (coords, cut_index)
}

impl CrossSectionMesh {
    /// Structured mesh of `outer` whose grid lines pass through the sides of
    /// `inclusion`; triangles inside the inclusion get tag 2.
    pub fn build_rect_with_inclusion(outer: Rect, inclusion: Rect, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Geometry(format!("target edge length h = {h} must be positive")));
        }
        if !outer.is_finite() || outer.width() <= 0.0 || outer.height() <= 0.0 {
            return Err(Error::Geometry("outer rectangle must have positive extent".into()));
        }
        if !inclusion.is_finite() || inclusion.width() <= 0.0 || inclusion.height() <= 0.0 {
            return Err(Error::Geometry("inclusion must have positive extent".into()));
        }
        let margin = outer.margin_of(&inclusion);
        if margin <= 0.0 {
            return Err(Error::Geometry(
                "interface must be closed and interior: the inclusion must lie strictly inside the outer rectangle".into(),
            ));
        }
        if h > margin {
            return Err(Error::Geometry(format!(
                "h = {h} exceeds the inclusion margin {margin}; the gap between inclusion and outer boundary must hold at least one cell"
            )));
        }
        let (xs, xi) = breakpoints(&[outer.x0, inclusion.x0, inclusion.x1, outer.x1], h);
        let (ys, yi) = breakpoints(&[outer.y0, inclusion.y0, inclusion.y1, outer.y1], h);
        let inside = |x: f64, y: f64| {
            x > inclusion.x0 && x < inclusion.x1 && y > inclusion.y0 && y < inclusion.y1
        };
        let mut mesh = Self::grid(outer, &xs, &ys, h, inside);
        let nx1 = xs.len();
        let id = |i: usize, j: usize| j * nx1 + i;
        let (i0, i1, j0, j1) = (xi[1], xi[2], yi[1], yi[2]);
        let mut loop_nodes = Vec::new();
        for i in i0..i1 {
            loop_nodes.push(id(i, j0));
        }
        for j in j0..j1 {
            loop_nodes.push(id(i1, j));
        }
        for i in (i0 + 1..=i1).rev() {
            loop_nodes.push(id(i, j1));
        }
        for j in (j0 + 1..=j1).rev() {
            loop_nodes.push(id(i0, j));
        }
        mesh.interface_edges = closed_loop(&loop_nodes);
        Ok(mesh)
    }

    /// Structured mesh of `outer` without an inclusion (all tags 1, empty
    /// interface). Useful for scalar reference problems.
    pub fn build_rect(outer: Rect, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Geometry(format!("target edge length h = {h} must be positive")));
        }
        if !outer.is_finite() || outer.width() <= 0.0 || outer.height() <= 0.0 {
            return Err(Error::Geometry("outer rectangle must have positive extent".into()));
        }
        let (xs, _) = breakpoints(&[outer.x0, outer.x1], h);
        let (ys, _) = breakpoints(&[outer.y0, outer.y1], h);
        Ok(Self::grid(outer, &xs, &ys, h, |_, _| false))
    }

    fn grid(outer: Rect, xs: &[f64], ys: &[f64], h: f64, inside: impl Fn(f64, f64) -> bool) -> Self {
        let nx1 = xs.len();
        let ny1 = ys.len();
        let mut nodes = Vec::with_capacity(nx1 * ny1);
        for &y in ys {
            for &x in xs {
                nodes.push([x, y]);
            }
        }
        let id = |i: usize, j: usize| j * nx1 + i;
        let mut triangles = Vec::with_capacity(2 * (nx1 - 1) * (ny1 - 1));
        let mut tags = Vec::with_capacity(triangles.capacity());
        for j in 0..ny1 - 1 {
            for i in 0..nx1 - 1 {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                let tag = if inside(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])) {
                    2
                } else {
                    1
                };
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
                tags.push(tag);
                tags.push(tag);
            }
        }
        let mut boundary = Vec::new();
        for i in 0..nx1 - 1 {
            boundary.push(id(i, 0));
        }
        for j in 0..ny1 - 1 {
            boundary.push(id(nx1 - 1, j));
        }
        for i in (1..nx1).rev() {
            boundary.push(id(i, ny1 - 1));
        }
        for j in (1..ny1).rev() {
            boundary.push(id(0, j));
        }
        Self {
            nodes,
            triangles,
            tags,
            interface_edges: Vec::new(),
            outer_edges: closed_loop(&boundary),
            h,
            outer,
        }
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Region tag (1 or 2) per triangle.
    pub fn tags(&self) -> &[u8] {
        &self.tags
    }

    pub fn interface_edges(&self) -> &[[usize; 2]] {
        &self.interface_edges
    }

    pub fn outer_edges(&self) -> &[[usize; 2]] {
        &self.outer_edges
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn outer(&self) -> Rect {
        self.outer
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area of triangle `t` (positive for counterclockwise order).
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Constant gradients of the three P1 hat functions on triangle `t`, in
    /// the local vertex order of `triangles()[t]`.
    pub fn gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        let p = [self.nodes[a], self.nodes[b], self.nodes[c]];
        let two_area = 2.0 * self.area(t);
        let mut g = [[0.0; 2]; 3];
        for i in 0..3 {
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            g[i] = [(p[j][1] - p[k][1]) / two_area, (p[k][0] - p[j][0]) / two_area];
        }
        g
    }

    /// Total area of the triangles carrying `tag`.
    pub fn region_area(&self, tag: u8) -> f64 {
        (0..self.n_triangles())
            .filter(|&t| self.tags[t] == tag)
            .map(|t| self.area(t))
            .sum()
    }

    /// Copy of the mesh with the interface traversed in the opposite
    /// direction (used to check the orientation dependence of the S form).
    pub fn with_reversed_interface(&self) -> Self {
        let mut m = self.clone();
        m.interface_edges = self.interface_edges.iter().rev().map(|&[a, b]| [b, a]).collect();
        m
    }

    pub fn to_document(&self) -> MeshDocument {
        MeshDocument {
            nodes: self.nodes.clone(),
            triangles: self
                .triangles
                .iter()
                .zip(&self.tags)
                .map(|(t, &tag)| [t[0], t[1], t[2], tag as usize])
                .collect(),
            interface_edges: self.interface_edges.clone(),
            outer_edges: self.outer_edges.clone(),
            h: self.h,
        }
    }

    /// Rebuild a mesh from its JSON document; all invariants are re-checked.
    pub fn from_document(doc: &MeshDocument) -> Result<Self> {
        if doc.nodes.is_empty() {
            return Err(Error::Geometry("mesh has no nodes".into()));
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &doc.nodes {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
        let mut triangles = Vec::with_capacity(doc.triangles.len());
        let mut tags = Vec::with_capacity(doc.triangles.len());
        for t in &doc.triangles {
            if t[3] != 1 && t[3] != 2 {
                return Err(Error::Geometry(format!("invalid region tag {}", t[3])));
            }
            triangles.push([t[0], t[1], t[2]]);
            tags.push(t[3] as u8);
        }
        let mesh = Self {
            nodes: doc.nodes.clone(),
            triangles,
            tags,
            interface_edges: doc.interface_edges.clone(),
            outer_edges: doc.outer_edges.clone(),
            h: doc.h,
            outer: Rect::new(x0, y0, x1, y1),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Check every mesh invariant: positive areas, conformity, boundary
    /// edges on the rectangle, and a single closed interface loop that
    /// keeps Ω₂ on its left.
    pub fn validate(&self) -> Result<()> {
        self.check(true)
    }

    /// Same as [`validate`](Self::validate) but accepts either traversal
    /// direction of the interface loop (assembly is defined for both; the
    /// sign of S follows the direction).
    pub fn validate_topology(&self) -> Result<()> {
        self.check(false)
    }

    /// +1 if the interface keeps Ω₂ on the left, −1 if on the right, 0 if
    /// there is no interface.
    pub fn interface_orientation(&self) -> i8 {
        let Some(&[a, b]) = self.interface_edges.first() else {
            return 0;
        };
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                if tri[k] == a && tri[(k + 1) % 3] == b {
                    return if self.tags[t] == 2 { 1 } else { -1 };
                }
            }
        }
        0
    }

    fn check(&self, require_ccw: bool) -> Result<()> {
        let n = self.nodes.len();
        let scale = self.outer.width().max(self.outer.height());
        let tol = 1e-12 * scale.max(1.0);
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::Geometry(format!("triangle {t} references a missing node")));
            }
            if self.area(t) <= 0.0 {
                return Err(Error::Geometry(format!("triangle {t} has non-positive signed area")));
            }
        }
        // Directed edge -> owning triangle; a conforming mesh uses each
        // directed edge at most once and every undirected edge at most twice.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if directed.insert(e, t).is_some() {
                    return Err(Error::Geometry(format!("edge {e:?} is used twice with the same orientation")));
                }
            }
        }
        let mut boundary: Vec<(usize, usize)> = directed
            .keys()
            .filter(|&&(a, b)| !directed.contains_key(&(b, a)))
            .copied()
            .collect();
        boundary.sort_unstable();
        let on_rect = |p: [f64; 2]| {
            (p[0] - self.outer.x0).abs() <= tol
                || (p[0] - self.outer.x1).abs() <= tol
                || (p[1] - self.outer.y0).abs() <= tol
                || (p[1] - self.outer.y1).abs() <= tol
        };
        for &(a, b) in &boundary {
            let (pa, pb) = (self.nodes[a], self.nodes[b]);
            let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            if !(on_rect(pa) && on_rect(pb) && on_rect(mid)) {
                return Err(Error::Geometry(format!(
                    "boundary edge ({a},{b}) is not on the outer rectangle: hanging node or hole"
                )));
            }
        }
        let area: f64 = (0..self.n_triangles()).map(|t| self.area(t)).sum();
        if (area - self.outer.area()).abs() > 1e-10 * self.outer.area() {
            return Err(Error::Geometry("triangles do not cover the outer rectangle".into()));
        }
        let mut outer: Vec<(usize, usize)> = self.outer_edges.iter().map(|e| (e[0], e[1])).collect();
        outer.sort_unstable();
        if outer != boundary {
            return Err(Error::Geometry("outer_edges do not match the mesh boundary".into()));
        }
        // Interface: every edge separates tag 2 (left) from tag 1 (right), and
        // the edges chain into one closed loop.
        let has_inclusion = self.tags.iter().any(|&t| t == 2);
        if self.interface_edges.is_empty() {
            if has_inclusion {
                return Err(Error::Geometry("region 2 present but interface is empty".into()));
            }
            return Ok(());
        }
        let (inner, outer_tag) = if require_ccw || self.interface_orientation() >= 0 { (2, 1) } else { (1, 2) };
        for &[a, b] in &self.interface_edges {
            let left = directed.get(&(a, b)).map(|&t| self.tags[t]);
            let right = directed.get(&(b, a)).map(|&t| self.tags[t]);
            if left != Some(inner) || right != Some(outer_tag) {
                return Err(Error::Geometry(format!(
                    "interface edge ({a},{b}) must have region 2 on its left and region 1 on its right"
                )));
            }
        }
        let m = self.interface_edges.len();
        for k in 0..m {
            if self.interface_edges[k][1] != self.interface_edges[(k + 1) % m][0] {
                return Err(Error::Geometry("interface edges do not form a single closed loop".into()));
            }
        }
        let mut starts: Vec<usize> = self.interface_edges.iter().map(|e| e[0]).collect();
        starts.sort_unstable();
        starts.dedup();
        if starts.len() != m {
            return Err(Error::Geometry("interface loop is not simple".into()));
        }
        let separating = directed
            .iter()
            .filter(|(&(a, b), &t)| {
                self.tags[t] == 2 && directed.get(&(b, a)).is_some_and(|&u| self.tags[u] == 1)
            })
            .count();
        if separating != m {
            return Err(Error::Geometry("interface_edges miss part of the region boundary".into()));
        }
        Ok(())
    }

    /// Nodes on Γ₀, sorted.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.outer_edges.iter().flat_map(|e| [e[0], e[1]]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn closed_loop(nodes: &[usize]) -> Vec<[usize; 2]> {
    (0..nodes.len()).map(|k| [nodes[k], nodes[(k + 1) % nodes.len()]]).collect()
}

/// Nodal degree-of-freedom layout.
///
/// Π lives in H₀¹: nodes on Γ₀ are eliminated. Ψ keeps every node but
/// carries one zero-mean constraint, which the forms module imposes by
/// basis restriction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DofMap {
    pub n_nodes: usize,
    /// Node index of each Π dof.
    pub pi_nodes: Vec<usize>,
    /// Π dof of each node (`None` on Γ₀).
    pub pi_index: Vec<Option<usize>>,
    /// Ψ dofs before the constraint (one per node).
    pub n_psi: usize,
    /// Rank of the linear constraint on the Ψ space (∫Ψ = 0).
    pub psi_constraint_rank: usize,
    pub warnings: Vec<String>,
}

impl DofMap {
    pub fn n_pi(&self) -> usize {
        self.pi_nodes.len()
    }

    /// Dimension of the constrained Ψ space.
    pub fn n_psi_constrained(&self) -> usize {
        self.n_psi - self.psi_constraint_rank
    }

    /// Dimension of the constrained (Π, Ψ) space.
    pub fn n_constrained(&self) -> usize {
        self.n_pi() + self.n_psi_constrained()
    }
}

pub fn classify_dofs(mesh: &CrossSectionMesh) -> DofMap {
    let n = mesh.n_nodes();
    let mut on_boundary = vec![false; n];
    for v in mesh.boundary_nodes() {
        on_boundary[v] = true;
    }
    let mut pi_nodes = Vec::new();
    let mut pi_index = vec![None; n];
    for v in 0..n {
        if !on_boundary[v] {
            pi_index[v] = Some(pi_nodes.len());
            pi_nodes.push(v);
        }
    }
    let mut warnings = Vec::new();
    if pi_nodes.is_empty() {
        warnings.push("Π space is empty: every node lies on the outer boundary".to_string());
    }
    DofMap {
        n_nodes: n,
        pi_nodes,
        pi_index,
        n_psi: n,
        psi_constraint_rank: 1,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn fixture(h: f64) -> CrossSectionMesh {
        CrossSectionMesh::build_rect_with_inclusion(
            Rect::new(0.0, 0.0, PI, PI),
            Rect::new(PI / 4.0, PI / 4.0, PI / 2.0, PI / 2.0),
            h,
        )
        .unwrap()
    }

    #[test]
    fn fixture_mesh_is_valid() {
        let m = fixture(PI / 16.0);
        m.validate().unwrap();
        assert_eq!(m.interface_edges().len(), 16);
        assert!((m.region_area(2) - (PI / 4.0).powi(2)).abs() < 1e-13);
    }

    #[test]
    fn inclusion_equal_to_outer_is_rejected() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        let err = CrossSectionMesh::build_rect_with_inclusion(r, r, 0.1).unwrap_err();
        assert!(err.to_string().contains("interface must be closed and interior"));
    }

    #[test]
    fn h_larger_than_margin_is_rejected() {
        let err = CrossSectionMesh::build_rect_with_inclusion(
            Rect::new(0.0, 0.0, 1.0, 1.0),
            Rect::new(0.1, 0.1, 0.9, 0.9),
            0.2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn materials_reject_eps_below_one() {
        assert!(MaterialConfig::new(0.5, 2.0).is_err());
        let m = MaterialConfig::new(1.0, 4.0).unwrap();
        assert_eq!(m.delta(), 1.5);
        assert_eq!(m.p_mid(), 1.5);
    }

    #[test]
    fn dof_counts_on_unit_square() {
        let m = CrossSectionMesh::build_rect(Rect::new(0.0, 0.0, 1.0, 1.0), 0.25).unwrap();
        let d = classify_dofs(&m);
        assert_eq!(m.n_nodes(), 25);
        assert_eq!(d.n_pi(), 9);
        assert_eq!(d.n_psi, 25);
        assert_eq!(d.psi_constraint_rank, 1);
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn single_strip_warns_about_empty_pi_space() {
        let m = CrossSectionMesh::build_rect(Rect::new(0.0, 0.0, 4.0, 1.0), 1.0).unwrap();
        let d = classify_dofs(&m);
        assert_eq!(d.n_pi(), 0);
        assert_eq!(d.warnings.len(), 1);
    }

    #[test]
    fn reversed_interface_fails_orientation_check_only() {
        let m = fixture(PI / 8.0).with_reversed_interface();
        assert!(m.validate().is_err());
        m.validate_topology().unwrap();
        assert_eq!(m.interface_orientation(), -1);
    }

    #[test]
    fn document_round_trip() {
        let m = fixture(PI / 8.0);
        let back = CrossSectionMesh::from_document(&m.to_document()).unwrap();
        assert_eq!(back.to_document(), m.to_document());
    }
}
