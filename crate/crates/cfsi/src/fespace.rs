//! Finite-element machinery: P2/P1 degree-of-freedom maps (with
//! interface-discontinuous pressure), Lagrange basis evaluation, triangle
//! quadrature, field interpolation and norms.
//!
//! All P2 fields (velocity, microrotation, displacement) share one node
//! numbering: mesh vertices first, then edge midpoints, in mesh order.
//! Pressure is P1 and continuous within each region; every vertex touched by
//! an Interface edge carries two pressure unknowns, one per side.

use crate::linalg::{Mat2, Vec2};
use crate::mesh::{Mesh, Region};
use crate::real::Real;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceTag {
    VectorP2,
    ScalarP2,
    PressureP1,
}

/// Coefficient vector of a finite-element field.
///
/// Layouts: `VectorP2` stores `[x0, y0, x1, y1, ...]` per P2 node,
/// `ScalarP2` one value per P2 node, `PressureP1` one value per pressure
/// unknown of the [`DofMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field<R> {
    pub space: SpaceTag,
    pub values: Vec<R>,
}

#[derive(Debug)]
pub enum FespaceError {
    InconsistentInterface(String),
    UnsupportedOrder(usize),
    SizeMismatch { expected: usize, got: usize },
}

impl fmt::Display for FespaceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FespaceError::InconsistentInterface(msg) => {
                write!(f, "inconsistent interface labeling: {msg}")
            }
            FespaceError::UnsupportedOrder(o) => write!(f, "unsupported quadrature order {o}"),
            FespaceError::SizeMismatch { expected, got } => {
                write!(f, "field length {got} does not match space size {expected}")
            }
        }
    }
}

impl std::error::Error for FespaceError {}

/// Degree-of-freedom map for one mesh.
#[derive(Debug, Clone)]
pub struct DofMap {
    n_vertices: usize,
    n_p2_nodes: usize,
    n_velocity: usize,
    n_microrot: usize,
    n_pressure: usize,
    /// Solid-side duplicate pressure id per vertex (`usize::MAX` if none).
    pressure_solid_copy: Vec<usize>,
    /// Resolved pressure dof per triangle corner.
    tri_pressure: Vec<[usize; 3]>,
    is_interface_vertex: Vec<bool>,
}

impl DofMap {
    #[inline]
    pub fn n_velocity(&self) -> usize {
        self.n_velocity
    }

    #[inline]
    pub fn n_microrot(&self) -> usize {
        self.n_microrot
    }

    #[inline]
    pub fn n_pressure(&self) -> usize {
        self.n_pressure
    }

    #[inline]
    pub fn n_p2_nodes(&self) -> usize {
        self.n_p2_nodes
    }

    #[inline]
    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Velocity dof index (within the velocity block) of a P2 node component.
    #[inline]
    pub fn velocity_dof(&self, node: usize, comp: usize) -> usize {
        2 * node + comp
    }

    /// Pressure dofs of triangle `t`, one per corner.
    #[inline]
    pub fn pressure_dofs(&self, t: usize) -> [usize; 3] {
        self.tri_pressure[t]
    }

    /// Primary (fluid-side) pressure dof of a vertex.
    #[inline]
    pub fn pressure_primary(&self, vertex: usize) -> usize {
        vertex
    }

    /// Solid-side duplicate pressure dof of an interface vertex.
    #[inline]
    pub fn pressure_solid(&self, vertex: usize) -> Option<usize> {
        let id = self.pressure_solid_copy[vertex];
        (id != usize::MAX).then_some(id)
    }

    #[inline]
    pub fn is_interface_vertex(&self, vertex: usize) -> bool {
        self.is_interface_vertex[vertex]
    }

    pub fn space_size(&self, space: SpaceTag) -> usize {
        match space {
            SpaceTag::VectorP2 => self.n_velocity,
            SpaceTag::ScalarP2 => self.n_microrot,
            SpaceTag::PressureP1 => self.n_pressure,
        }
    }

    pub fn zero_field<R: Real>(&self, space: SpaceTag) -> Field<R> {
        Field {
            space,
            values: vec![R::zero(); self.space_size(space)],
        }
    }
}

/// Builds the DOF map: velocity/microrotation on P2 nodes, pressure on
/// vertices with interface duplication. Numbering is deterministic.
pub fn build_spaces<R: Real>(mesh: &Mesh<R>) -> Result<DofMap, FespaceError> {
    let nv = mesh.n_vertices();
    let n_p2 = mesh.n_p2_nodes();
    let is_interface = mesh.interface_vertices();

    // Interface edges must separate regions; Mesh construction guarantees
    // it, but a cheap re-check keeps the contract local.
    let mut edge_regions: Vec<(Option<Region>, Option<Region>)> =
        vec![(None, None); mesh.n_edges()];
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        for k in 0..3 {
            let e = mesh
                .edge_index(tri[k], tri[(k + 1) % 3])
                .expect("triangle edge exists");
            let slot = &mut edge_regions[e];
            if slot.0.is_none() {
                slot.0 = Some(mesh.region(t));
            } else {
                slot.1 = Some(mesh.region(t));
            }
        }
    }
    let mut labeled = vec![false; mesh.n_edges()];
    for be in mesh.boundary_edges() {
        if be.label == crate::mesh::BoundaryLabel::Interface {
            let e = mesh
                .edge_index(be.v[0], be.v[1])
                .expect("labeled edge exists");
            labeled[e] = true;
        }
    }
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        let separates = matches!(edge_regions[e], (Some(r0), Some(r1)) if r0 != r1);
        if labeled[e] != separates {
            return Err(FespaceError::InconsistentInterface(format!(
                "edge {e} ({a}, {b})"
            )));
        }
    }

    let mut pressure_solid_copy = vec![usize::MAX; nv];
    let mut next = nv;
    for v in 0..nv {
        if is_interface[v] {
            pressure_solid_copy[v] = next;
            next += 1;
        }
    }

    let mut tri_pressure = Vec::with_capacity(mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        let mut dofs = [0usize; 3];
        for k in 0..3 {
            let v = tri[k];
            dofs[k] = match mesh.region(t) {
                Region::Fluid => v,
                Region::Solid => {
                    if is_interface[v] {
                        pressure_solid_copy[v]
                    } else {
                        v
                    }
                }
            };
        }
        tri_pressure.push(dofs);
    }

    Ok(DofMap {
        n_vertices: nv,
        n_p2_nodes: n_p2,
        n_velocity: 2 * n_p2,
        n_microrot: n_p2,
        n_pressure: next,
        pressure_solid_copy,
        tri_pressure,
        is_interface_vertex: is_interface,
    })
}

// ---------------------------------------------------------------------------
// Reference bases
// ---------------------------------------------------------------------------

/// P1 Lagrange basis at a barycentric point: values and reference gradients
/// (with respect to the reference coordinates `xi = l1`, `eta = l2`).
#[inline]
pub fn p1_basis<R: Real>(bary: [R; 3]) -> ([R; 3], [Vec2<R>; 3]) {
    let grads = [
        Vec2::new(-R::one(), -R::one()),
        Vec2::new(R::one(), R::zero()),
        Vec2::new(R::zero(), R::one()),
    ];
    (bary, grads)
}

/// P2 Lagrange basis at a barycentric point, local node order
/// `[v0, v1, v2, m01, m12, m20]`.
#[inline]
pub fn p2_basis<R: Real>(bary: [R; 3]) -> ([R; 6], [Vec2<R>; 6]) {
    let [l0, l1, l2] = bary;
    let four = R::of(4.0);
    let one = R::one();
    let two = R::of(2.0);

    let values = [
        l0 * (two * l0 - one),
        l1 * (two * l1 - one),
        l2 * (two * l2 - one),
        four * l0 * l1,
        four * l1 * l2,
        four * l2 * l0,
    ];

    let g0 = Vec2::new(-R::one(), -R::one());
    let g1 = Vec2::new(R::one(), R::zero());
    let g2 = Vec2::new(R::zero(), R::one());

    let grads = [
        g0 * (four * l0 - one),
        g1 * (four * l1 - one),
        g2 * (four * l2 - one),
        g0 * (four * l1) + g1 * (four * l0),
        g1 * (four * l2) + g2 * (four * l1),
        g2 * (four * l0) + g0 * (four * l2),
    ];
    (values, grads)
}

/// Basis evaluation for any space: values and reference gradients.
pub fn eval_basis<R: Real>(space: SpaceTag, bary: [R; 3]) -> (Vec<R>, Vec<Vec2<R>>) {
    match space {
        SpaceTag::PressureP1 => {
            let (v, g) = p1_basis(bary);
            (v.to_vec(), g.to_vec())
        }
        SpaceTag::ScalarP2 | SpaceTag::VectorP2 => {
            let (v, g) = p2_basis(bary);
            (v.to_vec(), g.to_vec())
        }
    }
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Quadrature rule on the reference triangle; weights sum to its area 1/2.
#[derive(Debug, Clone)]
pub struct QuadratureRule<R> {
    pub points: Vec<[R; 3]>,
    pub weights: Vec<R>,
    pub order: usize,
}

/// Rules exact for polynomials up to `order`; orders 2 and 5 are provided.
pub fn quadrature<R: Real>(order: usize) -> Result<QuadratureRule<R>, FespaceError> {
    match order {
        2 => {
            let a = R::of(2.0 / 3.0);
            let b = R::of(1.0 / 6.0);
            Ok(QuadratureRule {
                points: vec![[a, b, b], [b, a, b], [b, b, a]],
                weights: vec![R::of(1.0 / 6.0); 3],
                order,
            })
        }
        5 => {
            let (a1, b1) = (0.059_715_871_789_770, 0.470_142_064_105_115);
            let (a2, b2) = (0.797_426_985_353_087, 0.101_286_507_323_456);
            let w0 = 0.225 * 0.5;
            let w1 = 0.132_394_152_788_506 * 0.5;
            let w2 = 0.125_939_180_544_827 * 0.5;
            let third = 1.0 / 3.0;
            let points = vec![
                [third, third, third],
                [a1, b1, b1],
                [b1, a1, b1],
                [b1, b1, a1],
                [a2, b2, b2],
                [b2, a2, b2],
                [b2, b2, a2],
            ]
            .into_iter()
            .map(|p| [R::of(p[0]), R::of(p[1]), R::of(p[2])])
            .collect();
            let weights = vec![w0, w1, w1, w1, w2, w2, w2]
                .into_iter()
                .map(R::of)
                .collect();
            Ok(QuadratureRule {
                points,
                weights,
                order,
            })
        }
        other => Err(FespaceError::UnsupportedOrder(other)),
    }
}

// ---------------------------------------------------------------------------
// Element geometry
// ---------------------------------------------------------------------------

/// Affine geometry of one triangle: maps reference gradients to physical.
#[derive(Debug, Clone, Copy)]
pub struct TriGeometry<R> {
    pub coords: [Vec2<R>; 3],
    pub inv_jac_t: Mat2<R>,
    pub det_jac: R,
    pub area: R,
}

impl<R: Real> TriGeometry<R> {
    pub fn new(coords: [Vec2<R>; 3]) -> Self {
        let j = Mat2::from_columns(coords[1] - coords[0], coords[2] - coords[0]);
        let det = j.det();
        Self {
            coords,
            inv_jac_t: j.inverse().transpose(),
            det_jac: det,
            area: det * R::of(0.5),
        }
    }

    #[inline]
    pub fn point(&self, bary: [R; 3]) -> Vec2<R> {
        self.coords[0] * bary[0] + self.coords[1] * bary[1] + self.coords[2] * bary[2]
    }

    #[inline]
    pub fn phys_grad(&self, ref_grad: Vec2<R>) -> Vec2<R> {
        self.inv_jac_t.apply(ref_grad)
    }
}

// ---------------------------------------------------------------------------
// Field access and interpolation
// ---------------------------------------------------------------------------

/// Interpolated field value: scalar or 2-vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<R> {
    Scalar(R),
    Vector(Vec2<R>),
}

impl<R: Real> Value<R> {
    pub fn scalar(self) -> R {
        match self {
            Value::Scalar(s) => s,
            Value::Vector(_) => panic!("expected scalar value"),
        }
    }

    pub fn vector(self) -> Vec2<R> {
        match self {
            Value::Vector(v) => v,
            Value::Scalar(_) => panic!("expected vector value"),
        }
    }
}

impl<R: Real> Field<R> {
    pub fn check_size(&self, dofs: &DofMap) -> Result<(), FespaceError> {
        let expected = dofs.space_size(self.space);
        if self.values.len() != expected {
            return Err(FespaceError::SizeMismatch {
                expected,
                got: self.values.len(),
            });
        }
        Ok(())
    }

    /// Nodal interpolation of an analytic vector function (VectorP2 only).
    pub fn from_vector_fn<F>(mesh: &Mesh<R>, f: F) -> Self
    where
        F: Fn(Vec2<R>) -> Vec2<R>,
    {
        let n = mesh.n_p2_nodes();
        let mut values = vec![R::zero(); 2 * n];
        for k in 0..n {
            let v = f(mesh.p2_coord(k));
            values[2 * k] = v.x;
            values[2 * k + 1] = v.y;
        }
        Field {
            space: SpaceTag::VectorP2,
            values,
        }
    }

    /// Nodal interpolation of an analytic scalar function (ScalarP2 only).
    pub fn from_scalar_fn<F>(mesh: &Mesh<R>, f: F) -> Self
    where
        F: Fn(Vec2<R>) -> R,
    {
        let n = mesh.n_p2_nodes();
        let mut values = vec![R::zero(); n];
        for k in 0..n {
            values[k] = f(mesh.p2_coord(k));
        }
        Field {
            space: SpaceTag::ScalarP2,
            values,
        }
    }

    #[inline]
    pub fn vector_at_node(&self, node: usize) -> Vec2<R> {
        Vec2::new(self.values[2 * node], self.values[2 * node + 1])
    }

    #[inline]
    pub fn set_vector_at_node(&mut self, node: usize, v: Vec2<R>) {
        self.values[2 * node] = v.x;
        self.values[2 * node + 1] = v.y;
    }
}

/// Value of `field` inside triangle `t` at barycentric `bary`.
pub fn value_in_triangle<R: Real>(
    field: &Field<R>,
    dofs: &DofMap,
    mesh: &Mesh<R>,
    t: usize,
    bary: [R; 3],
) -> Value<R> {
    match field.space {
        SpaceTag::PressureP1 => {
            let (n, _) = p1_basis(bary);
            let pd = dofs.pressure_dofs(t);
            let mut s = R::zero();
            for k in 0..3 {
                s += n[k] * field.values[pd[k]];
            }
            Value::Scalar(s)
        }
        SpaceTag::ScalarP2 => {
            let (n, _) = p2_basis(bary);
            let nodes = mesh.p2_nodes(t);
            let mut s = R::zero();
            for k in 0..6 {
                s += n[k] * field.values[nodes[k]];
            }
            Value::Scalar(s)
        }
        SpaceTag::VectorP2 => {
            let (n, _) = p2_basis(bary);
            let nodes = mesh.p2_nodes(t);
            let mut v = Vec2::zero();
            for k in 0..6 {
                v += field.vector_at_node(nodes[k]) * n[k];
            }
            Value::Vector(v)
        }
    }
}

/// Interpolates `field` at an arbitrary point; `None` if `p` lies outside
/// the triangulation.
pub fn interpolate<R: Real>(
    field: &Field<R>,
    dofs: &DofMap,
    mesh: &Mesh<R>,
    p: Vec2<R>,
) -> Option<Value<R>> {
    match mesh.locate(p) {
        crate::mesh::Location::Inside { triangle, bary } => {
            Some(value_in_triangle(field, dofs, mesh, triangle, bary))
        }
        crate::mesh::Location::Outside => None,
    }
}

/// L2 norm, H1 seminorm, and (for vector fields) the L2 norm of the
/// divergence, integrated with the order-5 rule.
#[derive(Debug, Clone, Copy)]
pub struct Norms<R> {
    pub l2: R,
    pub h1_semi: R,
    pub div_l2: Option<R>,
}

pub fn field_norms<R: Real>(field: &Field<R>, dofs: &DofMap, mesh: &Mesh<R>) -> Norms<R> {
    let rule = quadrature::<R>(5).expect("order-5 rule");
    let mut l2 = R::zero();
    let mut h1 = R::zero();
    let mut div = R::zero();

    for t in 0..mesh.n_triangles() {
        let geom = TriGeometry::new(mesh.tri_coords(t));
        for (q, &bary) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geom.det_jac;
            match field.space {
                SpaceTag::PressureP1 => {
                    let (n, g) = p1_basis(bary);
                    let pd = dofs.pressure_dofs(t);
                    let mut val = R::zero();
                    let mut grad = Vec2::zero();
                    for k in 0..3 {
                        val += n[k] * field.values[pd[k]];
                        grad += geom.phys_grad(g[k]) * field.values[pd[k]];
                    }
                    l2 += w * val * val;
                    h1 += w * grad.dot(grad);
                }
                SpaceTag::ScalarP2 => {
                    let (n, g) = p2_basis(bary);
                    let nodes = mesh.p2_nodes(t);
                    let mut val = R::zero();
                    let mut grad = Vec2::zero();
                    for k in 0..6 {
                        val += n[k] * field.values[nodes[k]];
                        grad += geom.phys_grad(g[k]) * field.values[nodes[k]];
                    }
                    l2 += w * val * val;
                    h1 += w * grad.dot(grad);
                }
                SpaceTag::VectorP2 => {
                    let (n, g) = p2_basis(bary);
                    let nodes = mesh.p2_nodes(t);
                    let mut val = Vec2::zero();
                    let mut grad = Mat2::zero();
                    for k in 0..6 {
                        let coeff = field.vector_at_node(nodes[k]);
                        let pg = geom.phys_grad(g[k]);
                        val += coeff * n[k];
                        grad.m[0][0] += coeff.x * pg.x;
                        grad.m[0][1] += coeff.x * pg.y;
                        grad.m[1][0] += coeff.y * pg.x;
                        grad.m[1][1] += coeff.y * pg.y;
                    }
                    l2 += w * val.dot(val);
                    h1 += w * grad.ddot(grad);
                    let d = grad.trace();
                    div += w * d * d;
                }
            }
        }
    }

    Norms {
        l2: l2.sqrt(),
        h1_semi: h1.sqrt(),
        div_l2: matches!(field.space, SpaceTag::VectorP2).then(|| div.sqrt()),
    }
}
