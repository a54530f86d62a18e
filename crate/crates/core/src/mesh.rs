//! Structured background meshes, element classification and the active mesh.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{LevelSet, QuadratureConfig, ReferenceRules};
use crate::Vec2;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("degenerate bounding box [{x_min}, {x_max}] x [{y_min}, {y_max}]")]
    DegenerateBox {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    #[error("cell counts must be positive, got {nx} x {ny}")]
    NoCells { nx: usize, ny: usize },
    #[error("geometry does not meet mesh")]
    EmptyActiveSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    Quadrilateral,
    /// Each cell split along its lower-left to upper-right diagonal.
    TriangleSplit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        BoundingBox {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn square(half_width: f64) -> Self {
        BoundingBox::new(-half_width, half_width, -half_width, half_width)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementClass {
    Inside,
    Cut,
    Outside,
}

impl ElementClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementClass::Inside => "inside",
            ElementClass::Cut => "cut",
            ElementClass::Outside => "outside",
        }
    }
}

/// Vertices of a single element in counterclockwise order.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    vertices: [Vec2; 4],
    n_vertices: usize,
}

impl ElementGeometry {
    pub fn triangle(a: Vec2, b: Vec2, c: Vec2) -> Self {
        ElementGeometry {
            vertices: [a, b, c, Vec2::zeros()],
            n_vertices: 3,
        }
    }

    pub fn quadrilateral(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> Self {
        ElementGeometry {
            vertices: [a, b, c, d],
            n_vertices: 4,
        }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices[..self.n_vertices]
    }

    pub fn is_triangle(&self) -> bool {
        self.n_vertices == 3
    }

    pub fn area(&self) -> f64 {
        let v = self.vertices();
        let n = v.len();
        0.5 * (0..n)
            .map(|i| {
                let a = v[i];
                let b = v[(i + 1) % n];
                a.x * b.y - a.y * b.x
            })
            .sum::<f64>()
    }

    pub fn centroid(&self) -> Vec2 {
        let v = self.vertices();
        if self.is_triangle() {
            (v[0] + v[1] + v[2]) / 3.0
        } else {
            (v[0] + v[1] + v[2] + v[3]) / 4.0
        }
    }

    /// Maps reference coordinates to the element. Triangles use the unit
    /// triangle, quadrilaterals (parallelograms) the unit square.
    pub fn map(&self, s: f64, t: f64) -> Vec2 {
        let v = &self.vertices;
        if self.is_triangle() {
            v[0] + (v[1] - v[0]) * s + (v[2] - v[0]) * t
        } else {
            v[0] + (v[1] - v[0]) * s + (v[3] - v[0]) * t
        }
    }

    /// Jacobian determinant of [`Self::map`].
    pub fn jacobian(&self) -> f64 {
        let v = &self.vertices;
        let (e1, e2) = if self.is_triangle() {
            (v[1] - v[0], v[2] - v[0])
        } else {
            (v[1] - v[0], v[3] - v[0])
        };
        e1.x * e2.y - e1.y * e2.x
    }

    /// Regular sample lattice with `m` intervals per reference direction.
    pub fn lattice(&self, m: usize) -> Vec<Vec2> {
        let mf = m as f64;
        let mut out = Vec::new();
        for j in 0..=m {
            let imax = if self.is_triangle() { m - j } else { m };
            for i in 0..=imax {
                out.push(self.map(i as f64 / mf, j as f64 / mf));
            }
        }
        out
    }

    /// Diameter (longest vertex distance).
    pub fn diameter(&self) -> f64 {
        let v = self.vertices();
        let mut d: f64 = 0.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                d = d.max((v[i] - v[j]).norm());
            }
        }
        d
    }
}

#[derive(Clone, Debug)]
pub struct BackgroundMesh {
    pub bbox: BoundingBox,
    pub nx: usize,
    pub ny: usize,
    pub kind: ElementKind,
}

impl BackgroundMesh {
    pub fn new(
        bbox: BoundingBox,
        nx: usize,
        ny: usize,
        kind: ElementKind,
    ) -> Result<Self, MeshError> {
        if !(bbox.x_max > bbox.x_min && bbox.y_max > bbox.y_min) {
            return Err(MeshError::DegenerateBox {
                x_min: bbox.x_min,
                x_max: bbox.x_max,
                y_min: bbox.y_min,
                y_max: bbox.y_max,
            });
        }
        if nx == 0 || ny == 0 {
            return Err(MeshError::NoCells { nx, ny });
        }
        Ok(BackgroundMesh { bbox, nx, ny, kind })
    }

    pub fn hx(&self) -> f64 {
        (self.bbox.x_max - self.bbox.x_min) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.bbox.y_max - self.bbox.y_min) / self.ny as f64
    }

    /// Cell width along x.
    pub fn h_s(&self) -> f64 {
        self.hx()
    }

    /// Element diameter.
    pub fn h(&self) -> f64 {
        self.hx().hypot(self.hy())
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_elements(&self) -> usize {
        match self.kind {
            ElementKind::Quadrilateral => self.n_cells(),
            ElementKind::TriangleSplit => 2 * self.n_cells(),
        }
    }

    pub fn cell_of(&self, e: usize) -> (usize, usize) {
        let c = match self.kind {
            ElementKind::Quadrilateral => e,
            ElementKind::TriangleSplit => e / 2,
        };
        (c % self.nx, c / self.nx)
    }

    fn vertex_id(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    fn vertex(&self, id: usize) -> Vec2 {
        let i = id % (self.nx + 1);
        let j = id / (self.nx + 1);
        Vec2::new(
            self.bbox.x_min + i as f64 * self.hx(),
            self.bbox.y_min + j as f64 * self.hy(),
        )
    }

    /// Lattice vertex ids in counterclockwise order.
    fn vertex_ids(&self, e: usize) -> ([usize; 4], usize) {
        let (i, j) = self.cell_of(e);
        let a = self.vertex_id(i, j);
        let b = self.vertex_id(i + 1, j);
        let c = self.vertex_id(i + 1, j + 1);
        let d = self.vertex_id(i, j + 1);
        match self.kind {
            ElementKind::Quadrilateral => ([a, b, c, d], 4),
            ElementKind::TriangleSplit if e % 2 == 0 => ([a, b, c, 0], 3),
            ElementKind::TriangleSplit => ([a, c, d, 0], 3),
        }
    }

    pub fn element(&self, e: usize) -> ElementGeometry {
        let (ids, n) = self.vertex_ids(e);
        if n == 3 {
            ElementGeometry::triangle(self.vertex(ids[0]), self.vertex(ids[1]), self.vertex(ids[2]))
        } else {
            ElementGeometry::quadrilateral(
                self.vertex(ids[0]),
                self.vertex(ids[1]),
                self.vertex(ids[2]),
                self.vertex(ids[3]),
            )
        }
    }

    /// Elements that are translates of each other share a shape class.
    pub fn shape_class(&self, e: usize) -> usize {
        match self.kind {
            ElementKind::Quadrilateral => 0,
            ElementKind::TriangleSplit => e % 2,
        }
    }

    pub fn n_shape_classes(&self) -> usize {
        match self.kind {
            ElementKind::Quadrilateral => 1,
            ElementKind::TriangleSplit => 2,
        }
    }

    /// All edges as `(element, local edge start id, end id)` grouped by the
    /// undirected edge. Returns interior pairs and boundary singles.
    fn edge_incidence(&self) -> (Vec<[(usize, usize, usize); 2]>, Vec<(usize, usize, usize)>) {
        let mut all = Vec::with_capacity(self.n_elements() * 4);
        for e in 0..self.n_elements() {
            let (ids, n) = self.vertex_ids(e);
            for k in 0..n {
                let a = ids[k];
                let b = ids[(k + 1) % n];
                all.push(((a.min(b), a.max(b)), (e, a, b)));
            }
        }
        all.sort_by_key(|x| (x.0, x.1 .0));
        let mut pairs = Vec::new();
        let mut singles = Vec::new();
        let mut k = 0;
        while k < all.len() {
            if k + 1 < all.len() && all[k + 1].0 == all[k].0 {
                pairs.push([all[k].1, all[k + 1].1]);
                k += 2;
            } else {
                singles.push(all[k].1);
                k += 1;
            }
        }
        (pairs, singles)
    }

    /// Interior edges as `(lower element, higher element)` pairs.
    pub fn interior_edges(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self
            .edge_incidence()
            .0
            .into_iter()
            .map(|[a, b]| (a.0.min(b.0), a.0.max(b.0)))
            .collect();
        v.sort();
        v
    }
}

/// Interior face between two active elements. `plus` has the lower index and
/// `normal` points out of `plus`.
#[derive(Clone, Debug)]
pub struct Face {
    pub plus: usize,
    pub minus: usize,
    pub p0: Vec2,
    pub p1: Vec2,
    pub normal: Vec2,
    pub length: f64,
    pub ghost: bool,
}

impl Face {
    pub fn midpoint(&self) -> Vec2 {
        (self.p0 + self.p1) * 0.5
    }
}

/// Edge of an active element lying on the bounding box.
#[derive(Clone, Debug)]
pub struct BoundaryEdge {
    pub element: usize,
    pub p0: Vec2,
    pub p1: Vec2,
    pub normal: Vec2,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub n_active: usize,
    pub n_inside: usize,
    pub n_cut: usize,
    pub n_faces: usize,
    pub n_ghost_faces: usize,
}

#[derive(Clone, Debug)]
pub struct ActiveMesh {
    pub background: BackgroundMesh,
    /// Background element index of each active element, increasing.
    pub elements: Vec<usize>,
    pub classes: Vec<ElementClass>,
    pub background_to_active: Vec<Option<usize>>,
    pub faces: Vec<Face>,
    /// Indices into `faces` of the ghost faces.
    pub ghost_faces: Vec<usize>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

impl ActiveMesh {
    pub fn n_active(&self) -> usize {
        self.elements.len()
    }

    pub fn geometry(&self, a: usize) -> ElementGeometry {
        self.background.element(self.elements[a])
    }

    pub fn shape_class(&self, a: usize) -> usize {
        self.background.shape_class(self.elements[a])
    }

    pub fn h(&self) -> f64 {
        self.background.h()
    }

    pub fn h_s(&self) -> f64 {
        self.background.h_s()
    }

    pub fn summary(&self) -> MeshSummary {
        let n_cut = self
            .classes
            .iter()
            .filter(|&&c| c == ElementClass::Cut)
            .count();
        MeshSummary {
            n_active: self.n_active(),
            n_inside: self.n_active() - n_cut,
            n_cut,
            n_faces: self.faces.len(),
            n_ghost_faces: self.ghost_faces.len(),
        }
    }

    /// Active neighbors sharing an edge, per element.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.n_active()];
        for f in &self.faces {
            nb[f.plus].push(f.minus);
            nb[f.minus].push(f.plus);
        }
        for n in &mut nb {
            n.sort_unstable();
        }
        nb
    }
}

/// Classifies each background element by sampling the level set at the
/// vertices and on a lattice of depth `depth`.
pub fn classify_elements(mesh: &BackgroundMesh, ls: &LevelSet, depth: u32) -> Vec<ElementClass> {
    let tol = 1e-12 * mesh.h();
    let m = 1usize << depth;
    (0..mesh.n_elements())
        .map(|e| {
            let geom = mesh.element(e);
            let mut any_in = false;
            let mut any_out = false;
            let mut any_zero = false;
            for p in geom.lattice(m) {
                let v = ls.value(p);
                if v < -tol {
                    any_in = true;
                } else if v > tol {
                    any_out = true;
                } else {
                    any_zero = true;
                }
            }
            match (any_in, any_out, any_zero) {
                (true, false, false) => ElementClass::Inside,
                (false, true, false) => ElementClass::Outside,
                _ => ElementClass::Cut,
            }
        })
        .collect()
}

/// Builds the active mesh (inside and cut elements) with its face sets.
pub fn extract_active(mesh: &BackgroundMesh, classes: &[ElementClass]) -> Result<ActiveMesh, MeshError> {
    assert_eq!(classes.len(), mesh.n_elements());
    let mut elements = Vec::new();
    let mut active_classes = Vec::new();
    let mut background_to_active = vec![None; mesh.n_elements()];
    for (e, &c) in classes.iter().enumerate() {
        if c != ElementClass::Outside {
            background_to_active[e] = Some(elements.len());
            elements.push(e);
            active_classes.push(c);
        }
    }
    if elements.is_empty() {
        return Err(MeshError::EmptyActiveSet);
    }
    let (pairs, singles) = mesh.edge_incidence();
    let mut faces = Vec::new();
    for [x, y] in pairs {
        let (lo, hi) = if x.0 < y.0 { (x, y) } else { (y, x) };
        let (Some(plus), Some(minus)) = (background_to_active[lo.0], background_to_active[hi.0]) else {
            continue;
        };
        let p0 = mesh.vertex(lo.1);
        let p1 = mesh.vertex(lo.2);
        let d = p1 - p0;
        let length = d.norm();
        let normal = Vec2::new(d.y, -d.x) / length;
        let ghost =
            active_classes[plus] == ElementClass::Cut || active_classes[minus] == ElementClass::Cut;
        faces.push(Face {
            plus,
            minus,
            p0,
            p1,
            normal,
            length,
            ghost,
        });
    }
    faces.sort_by_key(|f| (f.plus, f.minus));
    let ghost_faces = faces
        .iter()
        .enumerate()
        .filter(|(_, f)| f.ghost)
        .map(|(i, _)| i)
        .collect();
    let mut boundary_edges = Vec::new();
    for (e, a, b) in singles {
        if let Some(act) = background_to_active[e] {
            let p0 = mesh.vertex(a);
            let p1 = mesh.vertex(b);
            let d = p1 - p0;
            boundary_edges.push(BoundaryEdge {
                element: act,
                p0,
                p1,
                normal: Vec2::new(d.y, -d.x) / d.norm(),
            });
        }
    }
    boundary_edges.sort_by(|a, b| {
        a.element
            .cmp(&b.element)
            .then(a.p0.x.total_cmp(&b.p0.x))
            .then(a.p0.y.total_cmp(&b.p0.y))
    });
    Ok(ActiveMesh {
        background: mesh.clone(),
        elements,
        classes: active_classes,
        background_to_active,
        faces,
        ghost_faces,
        boundary_edges,
    })
}

/// Convenience: classify with the given depth and extract.
pub fn build_active(mesh: &BackgroundMesh, ls: &LevelSet, classify_depth: u32) -> Result<ActiveMesh, MeshError> {
    let classes = classify_elements(mesh, ls, classify_depth);
    extract_active(mesh, &classes)
}

#[derive(Clone, Debug, Serialize)]
pub struct FatIntersectionRow {
    pub element: usize,
    pub class: ElementClass,
    /// `|T ∩ Ω| / |T|`.
    pub ratio: f64,
    /// Largest ratio over the element and its edge neighbors.
    pub neighbor_max: f64,
    pub flagged: bool,
}

/// Per-element volume fractions and a flag for elements whose whole edge
/// neighborhood (the element included) has fraction below `c_s`.
pub fn fat_intersection_report(
    active: &ActiveMesh,
    ls: &LevelSet,
    cfg: &QuadratureConfig,
    c_s: f64,
) -> Vec<FatIntersectionRow> {
    let rules = ReferenceRules::new(cfg.order);
    let ratios: Vec<f64> = (0..active.n_active())
        .map(|a| {
            if active.classes[a] == ElementClass::Inside {
                return 1.0;
            }
            let geom = active.geometry(a);
            let cut = crate::geometry::cut_element(&geom, ls, &rules, cfg.depth);
            cut.volume.iter().map(|q| q.w).sum::<f64>() / geom.area()
        })
        .collect();
    let nb = active.neighbors();
    (0..active.n_active())
        .map(|a| {
            let neighbor_max = nb[a]
                .iter()
                .map(|&b| ratios[b])
                .fold(ratios[a], f64::max);
            FatIntersectionRow {
                element: a,
                class: active.classes[a],
                ratio: ratios[a],
                neighbor_max,
                flagged: neighbor_max < c_s,
            }
        })
        .collect()
}
