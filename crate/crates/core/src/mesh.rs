//! Conforming triangulations with boundary classification.
//!
//! A boundary facet is *elliptic* when its normal has n₁ ≠ 0, *inflow* when
//! n₁ = 0 and x·n₂ < 0 along it, and *outflow* otherwise (characteristic
//! pieces included).

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

const NORMAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryClass {
    Elliptic,
    Inflow,
    Outflow,
}

/// An edge of the triangulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    /// Endpoints, smaller global index first.
    pub vertices: [usize; 2],
    /// Owning elements with local edge index; the second entry is
    /// `(usize::MAX, usize::MAX)` on ∂Ω.
    pub elements: [(usize, usize); 2],
    pub interior: bool,
    pub class: Option<BoundaryClass>,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    facets: Vec<Facet>,
    element_facets: Vec<[usize; 3]>,
    h: Vec<f64>,
    rho: Vec<f64>,
}

impl Mesh {
    /// Builds a mesh, reorienting clockwise triangles.
    pub fn new(vertices: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            let area = signed_area(&vertices, tri);
            let scale = edge_lengths(&vertices, tri).iter().fold(0.0f64, |m, l| m.max(*l));
            if area.abs() <= 1e-14 * scale * scale {
                return Err(Error::DegenerateElement(t));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut facets: Vec<Facet> = Vec::new();
        let mut element_facets = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut ef = [0usize; 3];
            for (e, slot) in ef.iter_mut().enumerate() {
                let a = tri[(e + 1) % 3];
                let b = tri[(e + 2) % 3];
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    Some(&f) => {
                        let facet = &mut facets[f];
                        if facet.interior {
                            return Err(Error::InvalidMesh(format!(
                                "edge ({}, {}) is shared by more than two triangles",
                                key.0, key.1
                            )));
                        }
                        facet.elements[1] = (t, e);
                        facet.interior = true;
                        *slot = f;
                    }
                    None => {
                        lookup.insert(key, facets.len());
                        *slot = facets.len();
                        facets.push(Facet {
                            vertices: [key.0, key.1],
                            elements: [(t, e), (usize::MAX, usize::MAX)],
                            interior: false,
                            class: None,
                        });
                    }
                }
            }
            element_facets.push(ef);
        }

        let h = triangles.iter().map(|t| edge_lengths(&vertices, t).into_iter().fold(0.0, f64::max)).collect();
        let rho = triangles
            .iter()
            .map(|t| 2.0 * signed_area(&vertices, t) / edge_lengths(&vertices, t).iter().sum::<f64>())
            .collect();
        let mut mesh = Self { vertices, triangles, facets, element_facets, h, rho };
        mesh.classify();
        if !mesh.facets.iter().any(|f| f.class == Some(BoundaryClass::Inflow)) {
            log::warn!("mesh has no inflow boundary; the problem may be ill-posed");
        }
        Ok(mesh)
    }

    /// Uniform triangulation of (0,1)² with n×n squares, each split along the
    /// bottom-left to top-right diagonal.
    pub fn structured_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one cell per side".into()));
        }
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self::new(vertices, triangles)
    }

    /// Splits every triangle into four congruent children at edge midpoints.
    pub fn refine_uniform(&self) -> Self {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        for f in &self.facets {
            let a = self.vertices[f.vertices[0]];
            let b = self.vertices[f.vertices[1]];
            vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (t, &[v0, v1, v2]) in self.triangles.iter().enumerate() {
            let [f0, f1, f2] = self.element_facets[t];
            let (m0, m1, m2) = (nv + f0, nv + f1, nv + f2);
            triangles.push([v0, m2, m1]);
            triangles.push([m2, v1, m0]);
            triangles.push([m1, m0, v2]);
            triangles.push([m0, m1, m2]);
        }
        Self::new(vertices, triangles).expect("refinement of a valid mesh is valid")
    }

    fn classify(&mut self) {
        for f in 0..self.facets.len() {
            if self.facets[f].interior {
                continue;
            }
            let (t, e) = self.facets[f].elements[0];
            let n = self.element_normal(t, e);
            let class = if n[0].abs() > NORMAL_TOL {
                BoundaryClass::Elliptic
            } else {
                let [a, b] = self.facets[f].vertices;
                let ga = self.vertices[a][0] * n[1];
                let gb = self.vertices[b][0] * n[1];
                let mid = 0.5 * (ga + gb);
                if (ga < 0.0 && gb < 0.0) || ((ga == 0.0 || gb == 0.0) && mid < 0.0) {
                    BoundaryClass::Inflow
                } else {
                    if ga * gb < 0.0 {
                        log::warn!("facet {f} changes flow direction; classified as outflow");
                    }
                    BoundaryClass::Outflow
                }
            };
            self.facets[f].class = Some(class);
        }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Facet index of local edge `e` (opposite local vertex `e`) of element `t`.
    pub fn element_facets(&self, t: usize) -> [usize; 3] {
        self.element_facets[t]
    }

    pub fn coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Diameter h_T (longest edge).
    pub fn h(&self, t: usize) -> f64 {
        self.h[t]
    }

    /// Inradius ρ_T.
    pub fn rho(&self, t: usize) -> f64 {
        self.rho[t]
    }

    pub fn h_min(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn h_max(&self) -> f64 {
        self.h.iter().copied().fold(0.0, f64::max)
    }

    /// max_T h_T/ρ_T.
    pub fn shape_regularity(&self) -> f64 {
        self.h.iter().zip(&self.rho).map(|(h, r)| h / r).fold(0.0, f64::max)
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    /// Endpoints of local edge `e` of element `t` in counterclockwise order.
    pub fn edge_endpoints(&self, t: usize, e: usize) -> [[f64; 2]; 2] {
        let c = self.coords(t);
        [c[(e + 1) % 3], c[(e + 2) % 3]]
    }

    pub fn edge_length(&self, t: usize, e: usize) -> f64 {
        let [a, b] = self.edge_endpoints(t, e);
        (b[0] - a[0]).hypot(b[1] - a[1])
    }

    /// Unit normal of local edge `e` pointing out of element `t`.
    pub fn element_normal(&self, t: usize, e: usize) -> [f64; 2] {
        let [a, b] = self.edge_endpoints(t, e);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        [dy / len, -dx / len]
    }

    /// Outward unit normal of a facet relative to its first owning element
    /// (the unique one on ∂Ω).
    pub fn facet_normal(&self, facet: usize) -> Result<[f64; 2]> {
        let f = self.facets.get(facet).ok_or(Error::InvalidFacet(facet))?;
        let (t, e) = f.elements[0];
        Ok(self.element_normal(t, e))
    }

    /// Boundary class of local edge `e` of element `t`, `None` when interior.
    pub fn edge_class(&self, t: usize, e: usize) -> Option<BoundaryClass> {
        self.facets[self.element_facets[t][e]].class
    }

    /// Affine map x = x₀ + J ξ of element `t`; returns (x₀, J, det J).
    pub fn affine(&self, t: usize) -> ([f64; 2], [[f64; 2]; 2], f64) {
        let [a, b, c] = self.coords(t);
        let j = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        (a, j, j[0][0] * j[1][1] - j[0][1] * j[1][0])
    }

    pub fn map_point(&self, t: usize, xi: [f64; 2]) -> [f64; 2] {
        let (x0, j, _) = self.affine(t);
        [x0[0] + j[0][0] * xi[0] + j[0][1] * xi[1], x0[1] + j[1][0] * xi[0] + j[1][1] * xi[1]]
    }

    /// Reference coordinates of a physical point relative to element `t`.
    pub fn inverse_map(&self, t: usize, x: [f64; 2]) -> [f64; 2] {
        let (x0, j, det) = self.affine(t);
        let (dx, dy) = (x[0] - x0[0], x[1] - x0[1]);
        [(j[1][1] * dx - j[0][1] * dy) / det, (-j[1][0] * dx + j[0][0] * dy) / det]
    }

    pub fn read_ascii<R: BufRead>(r: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in r.lines() {
            let line = line?;
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        let mut it = tokens.into_iter();
        let mut next = |what: &str| it.next().ok_or_else(|| Error::Parse(format!("missing {what}")));
        let parse_usize = |s: String| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad integer `{s}`")));
        let parse_f64 = |s: String| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")));
        let nv = parse_usize(next("vertex count")?)?;
        let nt = parse_usize(next("triangle count")?)?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            vertices.push([parse_f64(next("x")?)?, parse_f64(next("y")?)?]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            triangles.push([parse_usize(next("i")?)?, parse_usize(next("j")?)?, parse_usize(next("k")?)?]);
        }
        if next("end of file").is_ok() {
            return Err(Error::Parse("trailing data after triangle list".into()));
        }
        Self::new(vertices, triangles)
    }

    pub fn write_ascii<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.vertices.len(), self.triangles.len())?;
        for v in &self.vertices {
            writeln!(w, "{} {}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

fn signed_area(v: &[[f64; 2]], t: &[usize; 3]) -> f64 {
    let [a, b, c] = [v[t[0]], v[t[1]], v[t[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_lengths(v: &[[f64; 2]], t: &[usize; 3]) -> [f64; 3] {
    let d = |i: usize, j: usize| (v[t[j]][0] - v[t[i]][0]).hypot(v[t[j]][1] - v[t[i]][1]);
    [d(1, 2), d(2, 0), d(0, 1)]
}
