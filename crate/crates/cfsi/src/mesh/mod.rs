//! Moving triangulation: benchmark geometry generation, region and boundary
//! labeling, vertex motion, quality checks, point location and native file I/O.
//!
//! A [`Mesh`] is immutable after construction; [`Mesh::moved`] returns a new
//! mesh. Read-only queries are safe to call concurrently.

mod generate;
mod geometry;
mod io;
mod locate;

pub use generate::{generate_benchmark_mesh, generate_rect_mesh};
pub use geometry::GeometryParams;
pub use locate::Location;

use crate::linalg::Vec2;
use crate::real::Real;
use std::collections::HashMap;
use std::fmt;

/// Per-triangle material region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Fluid,
    Solid,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Fluid => write!(f, "Fluid"),
            Region::Solid => write!(f, "Solid"),
        }
    }
}

/// Boundary edge classification. `Interface` marks interior edges shared by
/// one Fluid and one Solid triangle; the others lie on the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryLabel {
    Inlet,
    Outlet,
    Wall,
    Cylinder,
    Interface,
}

impl fmt::Display for BoundaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundaryLabel::Inlet => "Inlet",
            BoundaryLabel::Outlet => "Outlet",
            BoundaryLabel::Wall => "Wall",
            BoundaryLabel::Cylinder => "Cylinder",
            BoundaryLabel::Interface => "Interface",
        };
        write!(f, "{s}")
    }
}

impl BoundaryLabel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Inlet" => Some(Self::Inlet),
            "Outlet" => Some(Self::Outlet),
            "Wall" => Some(Self::Wall),
            "Cylinder" => Some(Self::Cylinder),
            "Interface" => Some(Self::Interface),
            _ => None,
        }
    }
}

/// A labeled boundary edge, endpoints as vertex indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub label: BoundaryLabel,
}

/// Mesh quality summary; `inverted_count` must be zero for a usable mesh.
#[derive(Debug, Clone, Copy)]
pub struct QualityReport<R> {
    pub min_area: R,
    pub min_angle: R,
    pub inverted_count: usize,
}

#[derive(Debug)]
pub enum MeshError {
    Geometry(String),
    Tangled { triangle: usize },
    Parse { line: usize, msg: String },
    Inconsistent(String),
    Io(std::io::Error),
}

impl fmt::Display for MeshError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshError::Geometry(msg) => write!(f, "infeasible geometry: {msg}"),
            MeshError::Tangled { triangle } => {
                write!(f, "mesh tangled: triangle {triangle} has non-positive area")
            }
            MeshError::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            MeshError::Inconsistent(msg) => write!(f, "inconsistent mesh: {msg}"),
            MeshError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for MeshError {}

impl From<std::io::Error> for MeshError {
    fn from(e: std::io::Error) -> Self {
        MeshError::Io(e)
    }
}

/// Triangulation with region labels, boundary labels and P2 midpoint nodes.
#[derive(Debug, Clone)]
pub struct Mesh<R: Real> {
    vertices: Vec<Vec2<R>>,
    triangles: Vec<[usize; 3]>,
    region: Vec<Region>,
    boundary_edges: Vec<BoundaryEdge>,
    /// Undirected edges `(i, j)` with `i < j`, sorted lexicographically.
    edges: Vec<[usize; 2]>,
    /// Edge ids of each triangle, in local order `(v0v1, v1v2, v2v0)`.
    tri_edges: Vec<[usize; 3]>,
    /// Midpoint coordinates per edge (the P2 edge nodes).
    midpoints: Vec<Vec2<R>>,
    grid: locate::LocateGrid<R>,
}

impl<R: Real> Mesh<R> {
    /// Builds a mesh from raw parts, deriving the edge table, midpoints and
    /// the point-location grid.
    ///
    /// Interface edges are re-derived from the region labels. If
    /// `boundary_edges` already contains `Interface` entries (e.g. from a
    /// file), the set must agree with the derived one.
    pub fn from_parts(
        vertices: Vec<Vec2<R>>,
        triangles: Vec<[usize; 3]>,
        region: Vec<Region>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        if triangles.len() != region.len() {
            return Err(MeshError::Inconsistent(format!(
                "{} triangles but {} region labels",
                triangles.len(),
                region.len()
            )));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(MeshError::Inconsistent(format!(
                        "triangle {t} references missing vertex {v}"
                    )));
                }
            }
        }

        // Undirected edge table, deterministic order.
        let mut edge_set: Vec<[usize; 2]> = Vec::with_capacity(triangles.len() * 3 / 2);
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edge_set.push([a.min(b), a.max(b)]);
            }
        }
        edge_set.sort_unstable();
        edge_set.dedup();
        let edge_id: HashMap<[usize; 2], usize> =
            edge_set.iter().enumerate().map(|(i, &e)| (e, i)).collect();

        let mut tri_edges = Vec::with_capacity(triangles.len());
        // Incident (triangle, region) per edge; at most two.
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); edge_set.len()];
        for (t, tri) in triangles.iter().enumerate() {
            let mut ids = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let e = edge_id[&[a.min(b), a.max(b)]];
                ids[k] = e;
                incident[e].push(t);
            }
            tri_edges.push(ids);
        }

        // Derive interface edges from region adjacency.
        let mut derived_interface: Vec<[usize; 2]> = Vec::new();
        for (e, inc) in incident.iter().enumerate() {
            if inc.len() == 2 && region[inc[0]] != region[inc[1]] {
                derived_interface.push(edge_set[e]);
            } else if inc.len() > 2 {
                return Err(MeshError::Inconsistent(format!(
                    "edge ({}, {}) shared by more than two triangles",
                    edge_set[e][0], edge_set[e][1]
                )));
            }
        }
        derived_interface.sort_unstable();

        let mut given_interface: Vec<[usize; 2]> = boundary_edges
            .iter()
            .filter(|b| b.label == BoundaryLabel::Interface)
            .map(|b| [b.v[0].min(b.v[1]), b.v[0].max(b.v[1])])
            .collect();
        given_interface.sort_unstable();
        if !given_interface.is_empty() && given_interface != derived_interface {
            return Err(MeshError::Inconsistent(
                "Interface labels disagree with fluid/solid adjacency".into(),
            ));
        }

        let mut boundary_edges: Vec<BoundaryEdge> = boundary_edges
            .into_iter()
            .filter(|b| b.label != BoundaryLabel::Interface)
            .collect();
        for e in derived_interface {
            boundary_edges.push(BoundaryEdge {
                v: e,
                label: BoundaryLabel::Interface,
            });
        }

        // Every true boundary edge (one incident triangle) must carry a label.
        for (e, inc) in incident.iter().enumerate() {
            if inc.len() == 1 {
                let key = edge_set[e];
                let found = boundary_edges
                    .iter()
                    .any(|b| [b.v[0].min(b.v[1]), b.v[0].max(b.v[1])] == key);
                if !found {
                    return Err(MeshError::Inconsistent(format!(
                        "boundary edge ({}, {}) has no label",
                        key[0], key[1]
                    )));
                }
            }
        }
        for b in &boundary_edges {
            let key = [b.v[0].min(b.v[1]), b.v[0].max(b.v[1])];
            if !edge_id.contains_key(&key) {
                return Err(MeshError::Inconsistent(format!(
                    "labeled edge ({}, {}) is not a mesh edge",
                    b.v[0], b.v[1]
                )));
            }
        }

        let midpoints = edge_set
            .iter()
            .map(|&[a, b]| (vertices[a] + vertices[b]) * R::of(0.5))
            .collect();

        let grid = locate::LocateGrid::build(&vertices, &triangles);

        Ok(Self {
            vertices,
            triangles,
            region,
            boundary_edges,
            edges: edge_set,
            tri_edges,
            midpoints,
            grid,
        })
    }

    #[inline]
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    #[inline]
    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    #[inline]
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of P2 nodes: vertices first, then edge midpoints.
    #[inline]
    pub fn n_p2_nodes(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }

    #[inline]
    pub fn vertex(&self, v: usize) -> Vec2<R> {
        self.vertices[v]
    }

    #[inline]
    pub fn vertices(&self) -> &[Vec2<R>] {
        &self.vertices
    }

    #[inline]
    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    #[inline]
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    #[inline]
    pub fn region(&self, t: usize) -> Region {
        self.region[t]
    }

    #[inline]
    pub fn regions(&self) -> &[Region] {
        &self.region
    }

    #[inline]
    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    #[inline]
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = [a.min(b), a.max(b)];
        self.edges.binary_search(&key).ok()
    }

    /// The six P2 nodes of a triangle: three vertices, then the midpoints of
    /// edges `(v0,v1)`, `(v1,v2)`, `(v2,v0)`.
    #[inline]
    pub fn p2_nodes(&self, t: usize) -> [usize; 6] {
        let [a, b, c] = self.triangles[t];
        let e = self.tri_edges[t];
        let nv = self.vertices.len();
        [a, b, c, nv + e[0], nv + e[1], nv + e[2]]
    }

    /// Coordinates of a P2 node (vertex or edge midpoint).
    #[inline]
    pub fn p2_coord(&self, node: usize) -> Vec2<R> {
        let nv = self.vertices.len();
        if node < nv {
            self.vertices[node]
        } else {
            self.midpoints[node - nv]
        }
    }

    #[inline]
    pub fn tri_coords(&self, t: usize) -> [Vec2<R>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of triangle `t` (positive for counter-clockwise order).
    #[inline]
    pub fn signed_area(&self, t: usize) -> R {
        let [p0, p1, p2] = self.tri_coords(t);
        (p1 - p0).cross(p2 - p0) * R::of(0.5)
    }

    pub fn has_solid(&self) -> bool {
        self.region.iter().any(|&r| r == Region::Solid)
    }

    /// P2 nodes lying on boundary edges with the given label.
    pub fn boundary_p2_nodes(&self, label: BoundaryLabel) -> Vec<usize> {
        let nv = self.vertices.len();
        let mut nodes = Vec::new();
        for b in &self.boundary_edges {
            if b.label != label {
                continue;
            }
            let e = self
                .edge_index(b.v[0], b.v[1])
                .expect("boundary edge exists");
            nodes.push(b.v[0]);
            nodes.push(b.v[1]);
            nodes.push(nv + e);
        }
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Vertices incident to at least one Interface edge.
    pub fn interface_vertices(&self) -> Vec<bool> {
        let mut flag = vec![false; self.vertices.len()];
        for b in &self.boundary_edges {
            if b.label == BoundaryLabel::Interface {
                flag[b.v[0]] = true;
                flag[b.v[1]] = true;
            }
        }
        flag
    }

    /// Displaces every vertex by `dt * velocity` and rebuilds midpoints and
    /// the location grid. Connectivity and labels are unchanged. Fails with
    /// the offending triangle id if any signed area becomes non-positive.
    pub fn moved(&self, vertex_velocity: &[Vec2<R>], dt: R) -> Result<Self, MeshError> {
        assert_eq!(
            vertex_velocity.len(),
            self.vertices.len(),
            "velocity must be given at every vertex"
        );
        let vertices: Vec<Vec2<R>> = self
            .vertices
            .iter()
            .zip(vertex_velocity)
            .map(|(&p, &v)| p + v * dt)
            .collect();

        for (t, tri) in self.triangles.iter().enumerate() {
            let a = vertices[tri[0]];
            let b = vertices[tri[1]];
            let c = vertices[tri[2]];
            if (b - a).cross(c - a) <= R::zero() {
                return Err(MeshError::Tangled { triangle: t });
            }
        }

        let midpoints = self
            .edges
            .iter()
            .map(|&[a, b]| (vertices[a] + vertices[b]) * R::of(0.5))
            .collect();
        let grid = locate::LocateGrid::build(&vertices, &self.triangles);

        Ok(Self {
            vertices,
            triangles: self.triangles.clone(),
            region: self.region.clone(),
            boundary_edges: self.boundary_edges.clone(),
            edges: self.edges.clone(),
            tri_edges: self.tri_edges.clone(),
            midpoints,
            grid,
        })
    }

    /// Pure quality query: minimum signed area, minimum interior angle and
    /// the number of inverted (non-positively oriented) triangles.
    pub fn validate(&self) -> QualityReport<R> {
        let mut min_area = R::infinity();
        let mut min_angle = R::infinity();
        let mut inverted = 0usize;
        for t in 0..self.triangles.len() {
            let area = self.signed_area(t);
            if area <= R::zero() {
                inverted += 1;
            }
            if area < min_area {
                min_area = area;
            }
            let [p0, p1, p2] = self.tri_coords(t);
            let sides = [p1 - p0, p2 - p1, p0 - p2];
            for k in 0..3 {
                let u = sides[k] * -R::one();
                let v = sides[(k + 1) % 3];
                let cosine = u.dot(v) / (u.norm() * v.norm());
                let angle = cosine.min(R::one()).max(-R::one()).acos();
                if angle < min_angle {
                    min_angle = angle;
                }
            }
        }
        QualityReport {
            min_area,
            min_angle,
            inverted_count: inverted,
        }
    }

    /// Locates `p`, returning the containing triangle and its barycentric
    /// coordinates, or [`Location::Outside`].
    pub fn locate(&self, p: Vec2<R>) -> Location<R> {
        self.grid.locate(&self.vertices, &self.triangles, p)
    }

    /// Projects a point onto the nearest domain-boundary point (Interface
    /// edges excluded) and locates it. Used for characteristic feet that
    /// exit the domain.
    pub fn project_and_locate(&self, p: Vec2<R>) -> (Vec2<R>, usize, [R; 3]) {
        locate::project_and_locate(self, p)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), MeshError> {
        io::save(self, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, MeshError> {
        io::load(path)
    }

    pub fn write_native(&self, w: &mut impl std::io::Write) -> Result<(), MeshError> {
        io::write(self, w)
    }

    pub fn read_native(text: &str) -> Result<Self, MeshError> {
        io::read(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_triangle() -> Mesh<f64> {
        Mesh::from_parts(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2]],
            vec![Region::Fluid],
            vec![
                BoundaryEdge { v: [0, 1], label: BoundaryLabel::Wall },
                BoundaryEdge { v: [1, 2], label: BoundaryLabel::Wall },
                BoundaryEdge { v: [2, 0], label: BoundaryLabel::Wall },
            ],
        )
        .unwrap()
    }

    #[test]
    fn validate_reference_triangle() {
        let m = reference_triangle();
        let q = m.validate();
        assert_eq!(q.inverted_count, 0);
        assert!((q.min_area - 0.5).abs() < 1e-15);
        assert!((q.min_angle - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn validate_counts_mirror_ordered_triangle() {
        let m = Mesh::from_parts(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(0.0, 1.0),
                Vec2::new(1.0, 0.0),
            ],
            vec![[0, 1, 2]],
            vec![Region::Fluid],
            vec![
                BoundaryEdge { v: [0, 1], label: BoundaryLabel::Wall },
                BoundaryEdge { v: [1, 2], label: BoundaryLabel::Wall },
                BoundaryEdge { v: [2, 0], label: BoundaryLabel::Wall },
            ],
        )
        .unwrap();
        assert_eq!(m.validate().inverted_count, 1);
        assert!(m.validate().min_area < 0.0);
    }

    #[test]
    fn moved_zero_velocity_is_identity() {
        let m = reference_triangle();
        let v = vec![Vec2::zero(); 3];
        let moved = m.moved(&v, 0.1).unwrap();
        for i in 0..3 {
            assert_eq!(moved.vertex(i), m.vertex(i));
        }
    }

    #[test]
    fn moved_rigid_translation_preserves_areas() {
        let m = reference_triangle();
        let v = vec![Vec2::new(1.0, 0.0); 3];
        let moved = m.moved(&v, 0.1).unwrap();
        for i in 0..3 {
            assert!((moved.vertex(i).x - m.vertex(i).x - 0.1).abs() < 1e-15);
            assert_eq!(moved.vertex(i).y, m.vertex(i).y);
        }
        assert!((moved.signed_area(0) - m.signed_area(0)).abs() < 1e-15);
    }

    #[test]
    fn moved_collapse_through_opposite_edge_is_tangling() {
        let m = reference_triangle();
        // Push vertex 0 through the opposite edge (hypotenuse).
        let v = vec![Vec2::new(1.0, 1.0), Vec2::zero(), Vec2::zero()];
        match m.moved(&v, 1.0) {
            Err(MeshError::Tangled { triangle }) => assert_eq!(triangle, 0),
            other => panic!("expected tangling, got {other:?}"),
        }
    }

    #[test]
    fn moved_roundtrip_restores_coordinates() {
        let m = generate_rect_mesh::<f64>(1.0, 0.5, 4, 2).unwrap();
        let vel: Vec<Vec2<f64>> = (0..m.n_vertices())
            .map(|i| Vec2::new(0.01 * (i as f64).sin(), 0.008 * (i as f64 * 1.7).cos()))
            .collect();
        let back: Vec<Vec2<f64>> = vel.iter().map(|&v| -v).collect();
        let there = m.moved(&vel, 0.3).unwrap();
        let again = there.moved(&back, 0.3).unwrap();
        for i in 0..m.n_vertices() {
            let d = again.vertex(i) - m.vertex(i);
            assert!(d.norm() <= 1e-12 * (1.0 + m.vertex(i).norm()));
        }
    }

    #[test]
    fn interface_derivation_partitions_regions() {
        // Two triangles sharing one edge, one Fluid one Solid.
        let m = Mesh::from_parts(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![Region::Fluid, Region::Solid],
            vec![
                BoundaryEdge { v: [0, 1], label: BoundaryLabel::Wall },
                BoundaryEdge { v: [1, 2], label: BoundaryLabel::Wall },
                BoundaryEdge { v: [2, 3], label: BoundaryLabel::Wall },
                BoundaryEdge { v: [3, 0], label: BoundaryLabel::Wall },
            ],
        )
        .unwrap();
        let interfaces: Vec<_> = m
            .boundary_edges()
            .iter()
            .filter(|b| b.label == BoundaryLabel::Interface)
            .collect();
        assert_eq!(interfaces.len(), 1);
        assert_eq!(interfaces[0].v, [0, 2]);
        let iv = m.interface_vertices();
        assert_eq!(iv, vec![true, false, true, false]);
    }
}
