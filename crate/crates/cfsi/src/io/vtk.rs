//! Legacy ASCII VTK unstructured-grid snapshots.
//!
//! P2 fields are emitted at vertices only (midpoint values dropped):
//! POINT_DATA carries `velocity`, `microrotation` and `pressure_fluid_side`,
//! CELL_DATA carries the `region` label. Identical (mesh, state) pairs
//! produce byte-identical files, which enables golden-file regression.

use crate::fespace::DofMap;
use crate::linalg::Vec2;
use crate::mesh::{BoundaryEdge, BoundaryLabel, Mesh, MeshError, Region};
use crate::real::Real;
use crate::timeloop::State;
use std::io::Write;
use std::path::Path;

#[derive(Debug)]
pub enum VtkError {
    Io(std::io::Error),
    Parse { line: usize, msg: String },
    Mesh(MeshError),
}

impl std::fmt::Display for VtkError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VtkError::Io(e) => write!(f, "io error: {e}"),
            VtkError::Parse { line, msg } => write!(f, "vtk parse error at line {line}: {msg}"),
            VtkError::Mesh(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for VtkError {}

impl From<std::io::Error> for VtkError {
    fn from(e: std::io::Error) -> Self {
        VtkError::Io(e)
    }
}

impl From<MeshError> for VtkError {
    fn from(e: MeshError) -> Self {
        VtkError::Mesh(e)
    }
}

pub fn write_vtk_snapshot<R: Real>(
    mesh: &Mesh<R>,
    state: &State<R>,
    dofs: &DofMap,
    w: &mut impl Write,
) -> Result<(), VtkError> {
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();

    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "cfsi snapshot")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nv} double")?;
    for v in mesh.vertices() {
        writeln!(w, "{} {} 0", v.x, v.y)?;
    }
    writeln!(w, "CELLS {nt} {}", 4 * nt)?;
    for t in 0..nt {
        let [a, b, c] = mesh.triangle(t);
        writeln!(w, "3 {a} {b} {c}")?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }

    writeln!(w, "POINT_DATA {nv}")?;
    writeln!(w, "VECTORS velocity double")?;
    for v in 0..nv {
        let u = state.u.vector_at_node(v);
        writeln!(w, "{} {} 0", u.x, u.y)?;
    }
    writeln!(w, "SCALARS microrotation double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in 0..nv {
        writeln!(w, "{}", state.w.values[v])?;
    }
    writeln!(w, "SCALARS pressure_fluid_side double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in 0..nv {
        writeln!(w, "{}", state.p.values[dofs.pressure_primary(v)])?;
    }

    writeln!(w, "CELL_DATA {nt}")?;
    writeln!(w, "SCALARS region int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for t in 0..nt {
        let tag = match mesh.region(t) {
            Region::Fluid => 0,
            Region::Solid => 1,
        };
        writeln!(w, "{tag}")?;
    }
    Ok(())
}

pub fn save_vtk_snapshot<R: Real>(
    mesh: &Mesh<R>,
    state: &State<R>,
    dofs: &DofMap,
    path: &Path,
) -> Result<(), VtkError> {
    let mut buf = Vec::new();
    write_vtk_snapshot(mesh, state, dofs, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// A snapshot read back from a VTK file written by this crate. Vertex data
/// only: P1 accuracy. Boundary labels are not stored in VTK, so domain
/// boundary edges come back labeled `Wall`; interface edges are re-derived
/// from the region labels.
#[derive(Debug)]
pub struct VtkSnapshot<R: Real> {
    pub mesh: Mesh<R>,
    pub velocity: Vec<Vec2<R>>,
    pub microrotation: Vec<R>,
    pub pressure: Vec<R>,
}

pub fn read_vtk_snapshot<R: Real>(text: &str) -> Result<VtkSnapshot<R>, VtkError> {
    let mut lines = text.lines().enumerate().peekable();
    let mut next = |expect: &str| -> Result<(usize, String), VtkError> {
        loop {
            match lines.next() {
                Some((i, l)) => {
                    let t = l.trim();
                    if !t.is_empty() {
                        return Ok((i + 1, t.to_string()));
                    }
                }
                None => {
                    return Err(VtkError::Parse {
                        line: 0,
                        msg: format!("unexpected end of file, expected {expect}"),
                    })
                }
            }
        }
    };

    let parse_err = |line: usize, msg: String| VtkError::Parse { line, msg };

    for expect in [
        "# vtk DataFile Version 3.0",
        "cfsi snapshot",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
    ] {
        let (ln, l) = next(expect)?;
        if l != expect {
            return Err(parse_err(ln, format!("expected `{expect}`, found `{l}`")));
        }
    }

    let (ln, points_hdr) = next("POINTS")?;
    let nv: usize = points_hdr
        .strip_prefix("POINTS ")
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(ln, "bad POINTS header".into()))?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next("point")?;
        let parts: Vec<f64> = l
            .split_whitespace()
            .map(|s| s.parse().unwrap_or(f64::NAN))
            .collect();
        if parts.len() != 3 || parts.iter().any(|p| p.is_nan()) {
            return Err(parse_err(ln, "bad point line".into()));
        }
        vertices.push(Vec2::new(R::of(parts[0]), R::of(parts[1])));
    }

    let (ln, cells_hdr) = next("CELLS")?;
    let nt: usize = cells_hdr
        .strip_prefix("CELLS ")
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(ln, "bad CELLS header".into()))?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = next("cell")?;
        let parts: Vec<usize> = l
            .split_whitespace()
            .map(|s| s.parse().unwrap_or(usize::MAX))
            .collect();
        if parts.len() != 4 || parts[0] != 3 || parts[1..].iter().any(|&p| p >= nv) {
            return Err(parse_err(ln, "bad cell line".into()));
        }
        triangles.push([parts[1], parts[2], parts[3]]);
    }
    let (_, _types_hdr) = next("CELL_TYPES")?;
    for _ in 0..nt {
        next("cell type")?;
    }

    let (_, _pd) = next("POINT_DATA")?;
    let (_, _vec_hdr) = next("VECTORS velocity")?;
    let mut velocity = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next("velocity")?;
        let parts: Vec<f64> = l
            .split_whitespace()
            .map(|s| s.parse().unwrap_or(f64::NAN))
            .collect();
        if parts.len() != 3 {
            return Err(parse_err(ln, "bad velocity line".into()));
        }
        velocity.push(Vec2::new(R::of(parts[0]), R::of(parts[1])));
    }

    let mut read_scalars = |name: &str| -> Result<Vec<R>, VtkError> {
        let (ln, hdr) = next("SCALARS")?;
        if !hdr.starts_with(&format!("SCALARS {name}")) {
            return Err(parse_err(ln, format!("expected SCALARS {name}, found {hdr}")));
        }
        next("LOOKUP_TABLE")?;
        let mut vals = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = next("scalar")?;
            let v: f64 = l
                .parse()
                .map_err(|_| parse_err(ln, "bad scalar value".into()))?;
            vals.push(R::of(v));
        }
        Ok(vals)
    };
    let microrotation = read_scalars("microrotation")?;
    let pressure = read_scalars("pressure_fluid_side")?;

    let (_, _cd) = next("CELL_DATA")?;
    next("SCALARS region")?;
    next("LOOKUP_TABLE")?;
    let mut region = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = next("region")?;
        region.push(match l.as_str() {
            "0" => Region::Fluid,
            "1" => Region::Solid,
            other => return Err(parse_err(ln, format!("bad region tag {other}"))),
        });
    }

    // Rebuild a mesh: boundary edges (single-incidence) get a generic Wall
    // label, good enough for interpolation queries.
    let mut count = std::collections::HashMap::new();
    for tri in &triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *count.entry([a.min(b), a.max(b)]).or_insert(0usize) += 1;
        }
    }
    let mut boundary: Vec<BoundaryEdge> = count
        .iter()
        .filter(|&(_, &c)| c == 1)
        .map(|(&v, _)| BoundaryEdge {
            v,
            label: BoundaryLabel::Wall,
        })
        .collect();
    boundary.sort_by_key(|b| b.v);
    let mesh = Mesh::from_parts(vertices, triangles, region, boundary)?;

    Ok(VtkSnapshot {
        mesh,
        velocity,
        microrotation,
        pressure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::build_spaces;
    use crate::mesh::{generate_benchmark_mesh, GeometryParams};

    fn one_triangle_snapshot() -> String {
        let mesh = crate::mesh::Mesh::<f64>::from_parts(
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
        .unwrap();
        let dofs = build_spaces(&mesh).unwrap();
        let state = State::rest(&dofs);
        let mut buf = Vec::new();
        write_vtk_snapshot(&mesh, &state, &dofs, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn one_triangle_format() {
        let text = one_triangle_snapshot();
        assert!(text.contains("POINTS 3 double"));
        assert!(text.contains("CELLS 1 4"));
        assert!(text.contains("3 0 1 2"));
        assert!(text.contains("CELL_TYPES 1"));
        assert!(text.contains("VECTORS velocity double"));
        assert!(text.contains("SCALARS microrotation double 1"));
        assert!(text.contains("SCALARS pressure_fluid_side double 1"));
        assert!(text.contains("SCALARS region int 1"));
    }

    #[test]
    fn rest_state_snapshot_is_all_zero_and_deterministic() {
        let mesh = generate_benchmark_mesh::<f64>(&GeometryParams::default(), 0).unwrap();
        let dofs = build_spaces(&mesh).unwrap();
        let state = State::rest(&dofs);
        let mut a = Vec::new();
        write_vtk_snapshot(&mesh, &state, &dofs, &mut a).unwrap();
        let mut b = Vec::new();
        write_vtk_snapshot(&mesh, &state, &dofs, &mut b).unwrap();
        assert_eq!(a, b);

        let text = String::from_utf8(a).unwrap();
        let solid_count = mesh
            .regions()
            .iter()
            .filter(|&&r| r == Region::Solid)
            .count();
        let region_tags: Vec<&str> = text
            .lines()
            .skip_while(|l| !l.starts_with("CELL_DATA"))
            .skip(3)
            .collect();
        assert_eq!(region_tags.iter().filter(|&&t| t == "1").count(), solid_count);
    }

    #[test]
    fn roundtrip_through_reader() {
        let text = one_triangle_snapshot();
        let snap: VtkSnapshot<f64> = read_vtk_snapshot(&text).unwrap();
        assert_eq!(snap.mesh.n_vertices(), 3);
        assert_eq!(snap.mesh.n_triangles(), 1);
        assert_eq!(snap.velocity.len(), 3);
        assert!(snap.microrotation.iter().all(|&v| v == 0.0));
    }
}
