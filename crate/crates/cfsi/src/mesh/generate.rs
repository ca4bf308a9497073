//! Mesh generation: a structured rectangle mesh for channel verification
//! runs, and the flag-behind-cylinder benchmark mesh built by constrained
//! Delaunay triangulation with quality refinement.

use super::{BoundaryEdge, BoundaryLabel, GeometryParams, Mesh, MeshError, Region};
use crate::linalg::Vec2;
use crate::real::Real;
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters,
    Triangulation};
use std::collections::HashMap;

/// Structured all-Fluid triangulation of `[0, length] × [0, height]` with
/// `nx × ny` cells, two triangles per cell. Left edge is labeled `Inlet`,
/// right `Outlet`, bottom and top `Wall`.
pub fn generate_rect_mesh<R: Real>(
    length: f64,
    height: f64,
    nx: usize,
    ny: usize,
) -> Result<Mesh<R>, MeshError> {
    if nx == 0 || ny == 0 || length <= 0.0 || height <= 0.0 {
        return Err(MeshError::Geometry(
            "rectangle mesh needs positive size and cell counts".into(),
        ));
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec2::new(
                R::of(length * i as f64 / nx as f64),
                R::of(height * j as f64 / ny as f64),
            ));
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v01 = vid(i, j + 1);
            let v11 = vid(i + 1, j + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let region = vec![Region::Fluid; triangles.len()];
    let mut boundary = Vec::new();
    for i in 0..nx {
        boundary.push(BoundaryEdge {
            v: [vid(i, 0), vid(i + 1, 0)],
            label: BoundaryLabel::Wall,
        });
        boundary.push(BoundaryEdge {
            v: [vid(i, ny), vid(i + 1, ny)],
            label: BoundaryLabel::Wall,
        });
    }
    for j in 0..ny {
        boundary.push(BoundaryEdge {
            v: [vid(0, j), vid(0, j + 1)],
            label: BoundaryLabel::Inlet,
        });
        boundary.push(BoundaryEdge {
            v: [vid(nx, j), vid(nx, j + 1)],
            label: BoundaryLabel::Outlet,
        });
    }
    Mesh::from_parts(vertices, triangles, region, boundary)
}

/// Point key with exact bit equality, used to deduplicate polyline joints.
fn key(p: (f64, f64)) -> (u64, u64) {
    (p.0.to_bits(), p.1.to_bits())
}

struct Builder {
    cdt: ConstrainedDelaunayTriangulation<Point2<f64>>,
    handles: HashMap<(u64, u64), spade::handles::FixedVertexHandle>,
}

impl Builder {
    fn new() -> Self {
        Self {
            cdt: ConstrainedDelaunayTriangulation::new(),
            handles: HashMap::new(),
        }
    }

    fn insert(&mut self, p: (f64, f64)) -> spade::handles::FixedVertexHandle {
        if let Some(&h) = self.handles.get(&key(p)) {
            return h;
        }
        let h = self
            .cdt
            .insert(Point2::new(p.0, p.1))
            .expect("benchmark geometry points are finite");
        self.handles.insert(key(p), h);
        h
    }

    /// Inserts a polyline and adds each segment as a constraint edge.
    fn constrain_polyline(&mut self, pts: &[(f64, f64)]) {
        let hs: Vec<_> = pts.iter().map(|&p| self.insert(p)).collect();
        for w in hs.windows(2) {
            if w[0] != w[1] {
                self.cdt.add_constraint(w[0], w[1]);
            }
        }
    }
}

/// Subdivides the segment `a -> b` into `n` pieces (n+1 points).
fn segment(a: (f64, f64), b: (f64, f64), n: usize) -> Vec<(f64, f64)> {
    (0..=n)
        .map(|k| {
            let t = k as f64 / n as f64;
            (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
        })
        .collect()
}

/// Flag-behind-cylinder benchmark mesh.
///
/// The triangulation covers the channel rectangle minus the cylinder disc;
/// the cylinder arc is resolved by `16 * 2^level` segments whose endpoints
/// are pulled to the flag's left corners so that the flag rectangle conforms
/// exactly. Flag triangles are labeled `Solid`; the flag outline shared with
/// the fluid becomes `Interface`, while its left face (the attachment) is
/// part of the `Cylinder` boundary. Triangle count grows roughly 4x per
/// refinement level.
pub fn generate_benchmark_mesh<R: Real>(
    geom: &GeometryParams<f64>,
    level: usize,
) -> Result<Mesh<R>, MeshError> {
    geom.validate()?;
    if level > 6 {
        return Err(MeshError::Geometry("refinement level capped at 6".into()));
    }
    let s = 1usize << level;
    let sf = s as f64;
    let length = geom.length;
    let height = geom.height;
    let (cx, cy) = (geom.center.x, geom.center.y);
    let r = geom.radius;
    let (fx0, fx1, fy0, fy1) = geom.flag_rect();

    let mut b = Builder::new();

    // Outer rectangle, finer along the obstacle section of the walls.
    let h_near = 0.05 / sf;
    let h_far = 0.10 / sf;
    let x_split = (length * 0.4).min(1.0);
    let n_near = ((x_split / h_near).ceil() as usize).max(2);
    let n_far = (((length - x_split) / h_far).ceil() as usize).max(2);
    let n_side = ((height / h_near).ceil() as usize).max(2);
    for y in [0.0, height] {
        b.constrain_polyline(&segment((0.0, y), (x_split, y), n_near));
        b.constrain_polyline(&segment((x_split, y), (length, y), n_far));
    }
    b.constrain_polyline(&segment((0.0, 0.0), (0.0, height), n_side));
    b.constrain_polyline(&segment((length, 0.0), (length, height), n_side));

    // Cylinder arc: 16 * 2^level segments from the upper to the lower flag
    // corner, going around the left. Interior points sit exactly on the
    // circle; the endpoints are the flag corners themselves.
    let n_arc = 16 * s;
    let alpha = (fy1 - cy).atan2(r);
    let mut arc = Vec::with_capacity(n_arc + 1);
    arc.push((fx0, fy1));
    for k in 1..n_arc {
        let theta = alpha + (2.0 * std::f64::consts::PI - 2.0 * alpha) * k as f64 / n_arc as f64;
        arc.push((cx + r * theta.cos(), cy + r * theta.sin()));
    }
    arc.push((fx0, fy0));
    b.constrain_polyline(&arc);

    // Flag outline. The left face closes the cylinder hole; top, right and
    // bottom will be shared fluid/solid (Interface) edges.
    let n_flag_x = ((geom.flag_length / (0.0175 / sf)).ceil() as usize).max(2);
    let n_flag_y = 2 * s;
    b.constrain_polyline(&segment((fx0, fy0), (fx0, fy1), n_flag_y));
    b.constrain_polyline(&segment((fx0, fy1), (fx1, fy1), n_flag_x));
    b.constrain_polyline(&segment((fx1, fy1), (fx1, fy0), n_flag_y));
    b.constrain_polyline(&segment((fx1, fy0), (fx0, fy0), n_flag_x));

    // Flag midline seeds keep the thin solid band symmetric.
    for k in 1..n_flag_x {
        let x = fx0 + geom.flag_length * k as f64 / n_flag_x as f64;
        b.insert((x, cy));
    }

    // Interior seeds. Refinement alone would coarsen to the area cap away
    // from boundaries, smearing the shear layers and the vortex street; a
    // fine band around the obstacle and a medium wake strip keep the wake
    // instability resolved.
    let mut seed_lattice = |x0: f64, x1: f64, y0: f64, y1: f64, hs: f64, skip: &dyn Fn(f64, f64) -> bool| {
        let clearance = 0.6 * hs;
        let rows = (((y1 - y0) / (hs * 0.866)).floor() as usize).max(1);
        for j in 0..=rows {
            let y = y0 + (y1 - y0) * j as f64 / rows as f64;
            let offset = if j % 2 == 0 { 0.0 } else { hs * 0.5 };
            let cols = ((x1 - x0) / hs).floor() as usize;
            for i in 0..=cols {
                let x = x0 + offset + hs * i as f64;
                if x > x1 || skip(x, y) {
                    continue;
                }
                let in_flag = x > fx0 - clearance
                    && x < fx1 + clearance
                    && y > fy0 - clearance
                    && y < fy1 + clearance;
                let near_cyl = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() < r + clearance;
                if !in_flag && !near_cyl {
                    b.insert((x, y));
                }
            }
        }
    };

    // Shear-layer band around cylinder and flag.
    let h_shear = 0.016 / sf;
    let bx0 = (cx - 1.2 * r).max(2.0 * h_shear);
    let bx1 = fx1 + 0.15;
    let by0 = (cy - 1.5 * r).max(2.0 * h_shear);
    let by1 = (cy + 1.5 * r).min(height - 2.0 * h_shear);
    seed_lattice(bx0, bx1, by0, by1, h_shear, &|_, _| false);

    // Wake strip behind the shear band.
    let h_wake = 0.028 / sf;
    let wx1 = (fx1 + 0.7).min(length - 2.0 * h_wake);
    seed_lattice(
        bx1,
        wx1,
        2.0 * h_wake,
        height - 2.0 * h_wake,
        h_wake,
        &|x, _| x <= bx1,
    );

    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(27.0))
        .with_max_allowed_area(0.0030 / (sf * sf))
        .keep_constraint_edges()
        .with_max_additional_vertices(400_000);
    b.cdt.refine(params);

    // Extract triangles, classify regions, drop the cylinder hole.
    let hole: Vec<(f64, f64)> = arc.clone();
    let in_hole = |p: (f64, f64)| point_in_polygon(p, &hole);
    let in_flag = |p: (f64, f64)| p.0 > fx0 && p.0 < fx1 && p.1 > fy0 && p.1 < fy1;

    let mut used = vec![usize::MAX; b.cdt.num_vertices()];
    let mut vertices: Vec<Vec2<R>> = Vec::new();
    let mut coords: Vec<(f64, f64)> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut region: Vec<Region> = Vec::new();

    for face in b.cdt.inner_faces() {
        let vs = face.vertices();
        let ps: Vec<_> = vs.iter().map(|v| v.position()).collect();
        let centroid = (
            (ps[0].x + ps[1].x + ps[2].x) / 3.0,
            (ps[0].y + ps[1].y + ps[2].y) / 3.0,
        );
        if in_hole(centroid) {
            continue;
        }
        let mut tri = [0usize; 3];
        for (k, v) in vs.iter().enumerate() {
            let idx = v.fix().index();
            if used[idx] == usize::MAX {
                used[idx] = vertices.len();
                vertices.push(Vec2::new(R::of(ps[k].x), R::of(ps[k].y)));
                coords.push((ps[k].x, ps[k].y));
            }
            tri[k] = used[idx];
        }
        // spade faces are counter-clockwise already; keep orientation.
        triangles.push(tri);
        region.push(if in_flag(centroid) {
            Region::Solid
        } else {
            Region::Fluid
        });
    }

    // Boundary edges: each edge with a single incident triangle, labeled by
    // where it sits. Interface edges are derived later from region labels.
    let mut count: HashMap<[usize; 2], usize> = HashMap::new();
    for tri in &triangles {
        for k in 0..3 {
            let (a, bb) = (tri[k], tri[(k + 1) % 3]);
            *count.entry([a.min(bb), a.max(bb)]).or_insert(0) += 1;
        }
    }
    let tol = 1e-9;
    let mut boundary = Vec::new();
    for (&[va, vb], &c) in &count {
        if c != 1 {
            continue;
        }
        let pa = coords[va];
        let pb = coords[vb];
        let label = if pa.0.abs() < tol && pb.0.abs() < tol {
            BoundaryLabel::Inlet
        } else if (pa.0 - length).abs() < tol && (pb.0 - length).abs() < tol {
            BoundaryLabel::Outlet
        } else if (pa.1.abs() < tol && pb.1.abs() < tol)
            || ((pa.1 - height).abs() < tol && (pb.1 - height).abs() < tol)
        {
            BoundaryLabel::Wall
        } else {
            let da = ((pa.0 - cx).powi(2) + (pa.1 - cy).powi(2)).sqrt();
            let db = ((pb.0 - cx).powi(2) + (pb.1 - cy).powi(2)).sqrt();
            if da <= r * 1.05 + tol && db <= r * 1.05 + tol {
                // Circle arc or the flag's clamped left face.
                BoundaryLabel::Cylinder
            } else {
                return Err(MeshError::Inconsistent(format!(
                    "unclassifiable boundary edge near ({:.4}, {:.4})",
                    pa.0, pa.1
                )));
            }
        };
        boundary.push(BoundaryEdge {
            v: [va, vb],
            label,
        });
    }
    boundary.sort_by_key(|b| (b.v[0], b.v[1]));

    Mesh::from_parts(vertices, triangles, region, boundary)
}

/// Even-odd ray casting; adequate for centroids that stay clear of edges.
fn point_in_polygon(p: (f64, f64), poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if ((yi > p.1) != (yj > p.1))
            && (p.0 < (xj - xi) * (p.1 - yi) / (yj - yi) + xi)
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_mesh_counts_and_labels() {
        let m = generate_rect_mesh::<f64>(1.0, 0.5, 4, 2).unwrap();
        assert_eq!(m.n_vertices(), 15);
        assert_eq!(m.n_triangles(), 16);
        assert_eq!(m.validate().inverted_count, 0);
        let inlet = m.boundary_p2_nodes(BoundaryLabel::Inlet);
        assert_eq!(inlet.len(), 5); // 3 vertices + 2 midpoints
        for n in inlet {
            assert!(m.p2_coord(n).x.abs() < 1e-15);
        }
    }

    #[test]
    fn benchmark_level0_covers_channel_with_hole() {
        let geom = GeometryParams::default();
        let m = generate_benchmark_mesh::<f64>(&geom, 0).unwrap();
        assert_eq!(m.validate().inverted_count, 0);

        let mut xmin = f64::INFINITY;
        let mut xmax = f64::NEG_INFINITY;
        let mut ymin = f64::INFINITY;
        let mut ymax = f64::NEG_INFINITY;
        for v in m.vertices() {
            xmin = xmin.min(v.x);
            xmax = xmax.max(v.x);
            ymin = ymin.min(v.y);
            ymax = ymax.max(v.y);
        }
        assert!(xmin.abs() < 1e-12 && (xmax - 2.5).abs() < 1e-12);
        assert!(ymin.abs() < 1e-12 && (ymax - 0.41).abs() < 1e-12);

        // Cylinder hole: no vertex strictly inside the disc; points on the
        // polygonized arc are within a chord sagitta of the radius.
        for v in m.vertices() {
            let d = ((v.x - 0.2).powi(2) + (v.y - 0.2).powi(2)).sqrt();
            assert!(d > 0.05 * (1.0 - 2e-2));
        }
        assert!(m.locate(crate::linalg::Vec2::new(0.2, 0.2)) == super::super::Location::Outside);

        // Interface edges exist and each separates Fluid from Solid (checked
        // inside from_parts); the control point is a mesh vertex.
        assert!(m
            .boundary_edges()
            .iter()
            .any(|b| b.label == BoundaryLabel::Interface));
        let a0 = geom.control_point();
        assert!(m
            .vertices()
            .iter()
            .any(|v| (*v - a0).norm() < 1e-12));
    }

    #[test]
    fn benchmark_solid_tiles_flag_rectangle() {
        let geom = GeometryParams::default();
        let m = generate_benchmark_mesh::<f64>(&geom, 0).unwrap();
        let mut solid_area = 0.0f64;
        for t in 0..m.n_triangles() {
            let [p0, p1, p2] = m.tri_coords(t);
            let inside = |p: crate::linalg::Vec2<f64>| {
                p.x >= 0.25 - 1e-9 && p.x <= 0.6 + 1e-9 && p.y >= 0.19 - 1e-9 && p.y <= 0.21 + 1e-9
            };
            match m.region(t) {
                Region::Solid => {
                    assert!(inside(p0) && inside(p1) && inside(p2));
                    solid_area += m.signed_area(t);
                }
                Region::Fluid => {
                    let c = (p0 + p1 + p2) / 3.0;
                    let in_rect = c.x > 0.25 && c.x < 0.6 && c.y > 0.19 && c.y < 0.21;
                    assert!(!in_rect, "fluid triangle centered inside the flag");
                }
            }
        }
        assert!((solid_area - 0.35 * 0.02).abs() < 1e-10);
    }

    #[test]
    fn benchmark_triangle_count_grows_about_4x_per_level() {
        let geom = GeometryParams::default();
        let n0 = generate_benchmark_mesh::<f64>(&geom, 0).unwrap().n_triangles();
        let n1 = generate_benchmark_mesh::<f64>(&geom, 1).unwrap().n_triangles();
        let ratio = n1 as f64 / n0 as f64;
        assert!(ratio > 2.5 && ratio < 6.0, "ratio {ratio} (n0={n0}, n1={n1})");
    }

    #[test]
    fn infeasible_geometry_is_rejected() {
        let geom = GeometryParams::<f64> {
            flag_length: 2.5,
            ..GeometryParams::default()
        };
        assert!(matches!(
            generate_benchmark_mesh::<f64>(&geom, 0),
            Err(MeshError::Geometry(_))
        ));
    }
}
