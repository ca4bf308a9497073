//! Point location on the triangulation, accelerated by a uniform background
//! grid of cells listing overlapping triangles. The grid is rebuilt whenever
//! the mesh moves.

use super::{BoundaryLabel, Mesh};
use crate::linalg::Vec2;
use crate::real::Real;

/// Barycentric containment tolerance: robust against roundoff at shared
/// edges without capturing genuinely exterior points.
pub const CONTAINMENT_TOL: f64 = 1e-10;

/// Result of a point-location query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location<R> {
    /// Containing triangle and barycentric coordinates (sum to one).
    Inside { triangle: usize, bary: [R; 3] },
    Outside,
}

#[derive(Debug, Clone)]
pub struct LocateGrid<R> {
    xmin: R,
    ymin: R,
    cell: R,
    nx: usize,
    ny: usize,
    /// Triangle ids per cell, cells in row-major order.
    bins: Vec<Vec<u32>>,
}

impl<R: Real> LocateGrid<R> {
    pub fn build(vertices: &[Vec2<R>], triangles: &[[usize; 3]]) -> Self {
        let mut xmin = R::infinity();
        let mut xmax = R::neg_infinity();
        let mut ymin = R::infinity();
        let mut ymax = R::neg_infinity();
        for p in vertices {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        if vertices.is_empty() {
            xmin = R::zero();
            xmax = R::one();
            ymin = R::zero();
            ymax = R::one();
        }

        // Cell size ~ twice the average triangle diameter.
        let mut mean_diam = R::zero();
        for tri in triangles {
            let a = vertices[tri[0]];
            let b = vertices[tri[1]];
            let c = vertices[tri[2]];
            let d = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            mean_diam += d;
        }
        let n = R::of(triangles.len().max(1) as f64);
        mean_diam = mean_diam / n;
        let cell = (mean_diam * R::of(2.0)).max(R::of(1e-12));

        let width = (xmax - xmin).max(cell);
        let height = (ymax - ymin).max(cell);
        let nx = (width / cell).ceil().to_f64() as usize + 1;
        let ny = (height / cell).ceil().to_f64() as usize + 1;

        let mut bins = vec![Vec::new(); nx * ny];
        for (t, tri) in triangles.iter().enumerate() {
            let a = vertices[tri[0]];
            let b = vertices[tri[1]];
            let c = vertices[tri[2]];
            let bx0 = a.x.min(b.x).min(c.x);
            let bx1 = a.x.max(b.x).max(c.x);
            let by0 = a.y.min(b.y).min(c.y);
            let by1 = a.y.max(b.y).max(c.y);
            let i0 = Self::clampi(((bx0 - xmin) / cell).floor().to_f64() as isize, nx);
            let i1 = Self::clampi(((bx1 - xmin) / cell).floor().to_f64() as isize, nx);
            let j0 = Self::clampi(((by0 - ymin) / cell).floor().to_f64() as isize, ny);
            let j1 = Self::clampi(((by1 - ymin) / cell).floor().to_f64() as isize, ny);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins[j * nx + i].push(t as u32);
                }
            }
        }

        Self {
            xmin,
            ymin,
            cell,
            nx,
            ny,
            bins,
        }
    }

    fn clampi(i: isize, n: usize) -> usize {
        i.clamp(0, n as isize - 1) as usize
    }

    pub fn locate(
        &self,
        vertices: &[Vec2<R>],
        triangles: &[[usize; 3]],
        p: Vec2<R>,
    ) -> Location<R> {
        let i = Self::clampi(
            ((p.x - self.xmin) / self.cell).floor().to_f64() as isize,
            self.nx,
        );
        let j = Self::clampi(
            ((p.y - self.ymin) / self.cell).floor().to_f64() as isize,
            self.ny,
        );
        let tol = R::of(CONTAINMENT_TOL);
        let mut best: Option<(usize, [R; 3], R)> = None;
        for &t in &self.bins[j * self.nx + i] {
            let tri = triangles[t as usize];
            if let Some(bary) = barycentric(
                vertices[tri[0]],
                vertices[tri[1]],
                vertices[tri[2]],
                p,
                tol,
            ) {
                let min_l = bary[0].min(bary[1]).min(bary[2]);
                match best {
                    Some((_, _, cur)) if cur >= min_l => {}
                    _ => best = Some((t as usize, bary, min_l)),
                }
            }
        }
        match best {
            Some((triangle, bary, _)) => Location::Inside { triangle, bary },
            None => Location::Outside,
        }
    }
}

/// Barycentric coordinates of `p` in triangle `(a, b, c)` if contained
/// within `tol`, else `None`.
pub fn barycentric<R: Real>(
    a: Vec2<R>,
    b: Vec2<R>,
    c: Vec2<R>,
    p: Vec2<R>,
    tol: R,
) -> Option<[R; 3]> {
    let area2 = (b - a).cross(c - a);
    if area2 <= R::zero() {
        return None;
    }
    let l0 = (b - p).cross(c - p) / area2;
    let l1 = (c - p).cross(a - p) / area2;
    let l2 = R::one() - l0 - l1;
    if l0 >= -tol && l1 >= -tol && l2 >= -tol {
        Some([l0, l1, l2])
    } else {
        None
    }
}

/// Nearest point on the domain boundary (Interface excluded), followed by a
/// location query. Falls back to a full scan and finally to the nearest
/// triangle by centroid, so a triangle is always returned.
pub fn project_and_locate<R: Real>(mesh: &Mesh<R>, p: Vec2<R>) -> (Vec2<R>, usize, [R; 3]) {
    if let Location::Inside { triangle, bary } = mesh.locate(p) {
        return (p, triangle, bary);
    }

    let mut best_d2 = R::infinity();
    let mut best_q = p;
    for b in mesh.boundary_edges() {
        if b.label == BoundaryLabel::Interface {
            continue;
        }
        let a = mesh.vertex(b.v[0]);
        let c = mesh.vertex(b.v[1]);
        let ab = c - a;
        let t = ((p - a).dot(ab) / ab.dot(ab)).max(R::zero()).min(R::one());
        let q = a + ab * t;
        let d2 = (p - q).dot(p - q);
        if d2 < best_d2 {
            best_d2 = d2;
            best_q = q;
        }
    }

    if let Location::Inside { triangle, bary } = mesh.locate(best_q) {
        return (best_q, triangle, bary);
    }

    // Roundoff may leave the projected point marginally outside every
    // triangle; take the triangle whose centroid is closest and clamp.
    let mut best_t = 0usize;
    let mut best = R::infinity();
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.tri_coords(t);
        let centroid = (a + b + c) / R::of(3.0);
        let d2 = (best_q - centroid).dot(best_q - centroid);
        if d2 < best {
            best = d2;
            best_t = t;
        }
    }
    let [a, b, c] = mesh.tri_coords(best_t);
    let centroid = (a + b + c) / R::of(3.0);
    let nudged = best_q + (centroid - best_q) * R::of(1e-9);
    let tol = R::of(1e-6);
    let bary = barycentric(a, b, c, nudged, tol).unwrap_or([
        R::of(1.0 / 3.0),
        R::of(1.0 / 3.0),
        R::of(1.0 / 3.0),
    ]);
    (nudged, best_t, bary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rect_mesh;

    #[test]
    fn locate_vertex_has_unit_barycentric() {
        let m = generate_rect_mesh::<f64>(1.0, 1.0, 3, 3).unwrap();
        let p = m.vertex(5);
        match m.locate(p) {
            Location::Inside { triangle, bary } => {
                let tri = m.triangle(triangle);
                let local = tri.iter().position(|&v| m.vertex(v) == p).unwrap();
                assert!((bary[local] - 1.0).abs() <= 1e-9);
            }
            Location::Outside => panic!("vertex must be located"),
        }
    }

    #[test]
    fn locate_centroid_is_exact() {
        let m = generate_rect_mesh::<f64>(1.0, 1.0, 2, 2).unwrap();
        let t = 3;
        let [a, b, c] = m.tri_coords(t);
        let centroid = (a + b + c) / 3.0;
        match m.locate(centroid) {
            Location::Inside { triangle, bary } => {
                assert_eq!(triangle, t);
                for l in bary {
                    assert!((l - 1.0 / 3.0).abs() < 1e-12);
                }
            }
            Location::Outside => panic!("centroid must be located"),
        }
    }

    #[test]
    fn locate_exterior_point_is_outside() {
        let m = generate_rect_mesh::<f64>(1.0, 1.0, 2, 2).unwrap();
        assert_eq!(m.locate(Vec2::new(-1.0, -1.0)), Location::Outside);
    }

    #[test]
    fn barycentric_sums_to_one() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(2.0, 0.1);
        let c = Vec2::new(0.3, 1.7);
        let p = Vec2::new(0.7, 0.5);
        let l = barycentric(a, b, c, p, 1e-10).unwrap();
        assert!((l[0] + l[1] + l[2] - 1.0f64).abs() < 1e-14);
        let back = a * l[0] + b * l[1] + c * l[2];
        assert!((back - p).norm() < 1e-14);
    }

    #[test]
    fn projection_returns_boundary_point() {
        let m = generate_rect_mesh::<f64>(1.0, 0.5, 4, 2).unwrap();
        let (q, t, bary) = m.project_and_locate(Vec2::new(-0.3, 0.25));
        assert!(q.x.abs() < 1e-12);
        assert!((q.y - 0.25).abs() < 1e-12);
        assert!(t < m.n_triangles());
        let s: f64 = bary.iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}
