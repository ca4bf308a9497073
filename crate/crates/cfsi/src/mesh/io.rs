//! Native mesh format (text):
//!
//! ```text
//! cfsi-mesh v1
//! vertices N
//! x y            (N lines)
//! triangles M
//! i j k region   (M lines)
//! boundary K
//! i j label      (K lines)
//! ```
//!
//! Indices are 0-based; coordinates round-trip bit-exactly through the
//! shortest-representation decimal formatting.

use super::{BoundaryEdge, BoundaryLabel, Mesh, MeshError, Region};
use crate::linalg::Vec2;
use crate::real::Real;
use std::io::Write;
use std::path::Path;

pub fn write<R: Real>(mesh: &Mesh<R>, w: &mut impl Write) -> Result<(), MeshError> {
    writeln!(w, "cfsi-mesh v1")?;
    writeln!(w, "vertices {}", mesh.n_vertices())?;
    for v in mesh.vertices() {
        writeln!(w, "{} {}", v.x, v.y)?;
    }
    writeln!(w, "triangles {}", mesh.n_triangles())?;
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.triangle(t);
        writeln!(w, "{} {} {} {}", a, b, c, mesh.region(t))?;
    }
    writeln!(w, "boundary {}", mesh.boundary_edges().len())?;
    for b in mesh.boundary_edges() {
        writeln!(w, "{} {} {}", b.v[0], b.v[1], b.label)?;
    }
    Ok(())
}

pub fn save<R: Real>(mesh: &Mesh<R>, path: &Path) -> Result<(), MeshError> {
    let mut buf = Vec::new();
    write(mesh, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load<R: Real>(path: &Path) -> Result<Mesh<R>, MeshError> {
    let text = std::fs::read_to_string(path)?;
    read(&text)
}

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), MeshError> {
        loop {
            match self.iter.next() {
                Some(line) => {
                    self.line_no += 1;
                    let trimmed = line.trim();
                    if !trimmed.is_empty() {
                        return Ok((self.line_no, trimmed));
                    }
                }
                None => {
                    return Err(MeshError::Parse {
                        line: self.line_no,
                        msg: "unexpected end of file".into(),
                    })
                }
            }
        }
    }
}

fn parse_count(line: &str, line_no: usize, keyword: &str) -> Result<usize, MeshError> {
    let mut parts = line.split_whitespace();
    let head = parts.next().unwrap_or("");
    if head != keyword {
        return Err(MeshError::Parse {
            line: line_no,
            msg: format!("expected `{keyword} N`, found `{line}`"),
        });
    }
    parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or(MeshError::Parse {
            line: line_no,
            msg: format!("bad count in `{line}`"),
        })
}

pub fn read<R: Real>(text: &str) -> Result<Mesh<R>, MeshError> {
    let mut lines = Lines {
        iter: text.lines(),
        line_no: 0,
    };

    let (n, header) = lines.next()?;
    if header != "cfsi-mesh v1" {
        return Err(MeshError::Parse {
            line: n,
            msg: format!("expected header `cfsi-mesh v1`, found `{header}`"),
        });
    }

    let (n, line) = lines.next()?;
    let n_vertices = parse_count(line, n, "vertices")?;
    let mut vertices = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let (ln, line) = lines.next()?;
        let mut parts = line.split_whitespace();
        let x: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(MeshError::Parse {
                line: ln,
                msg: "bad vertex x coordinate".into(),
            })?;
        let y: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(MeshError::Parse {
                line: ln,
                msg: "bad vertex y coordinate".into(),
            })?;
        vertices.push(Vec2::new(R::of(x), R::of(y)));
    }

    let (n, line) = lines.next()?;
    let n_triangles = parse_count(line, n, "triangles")?;
    let mut triangles = Vec::with_capacity(n_triangles);
    let mut region = Vec::with_capacity(n_triangles);
    for _ in 0..n_triangles {
        let (ln, line) = lines.next()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(MeshError::Parse {
                line: ln,
                msg: format!("expected `i j k region`, found `{line}`"),
            });
        }
        let mut tri = [0usize; 3];
        for (k, p) in parts[..3].iter().enumerate() {
            tri[k] = p.parse().map_err(|_| MeshError::Parse {
                line: ln,
                msg: format!("bad vertex index `{p}`"),
            })?;
            if tri[k] >= n_vertices {
                return Err(MeshError::Parse {
                    line: ln,
                    msg: format!("triangle references missing vertex {}", tri[k]),
                });
            }
        }
        let reg = match parts[3] {
            "Fluid" => Region::Fluid,
            "Solid" => Region::Solid,
            other => {
                return Err(MeshError::Parse {
                    line: ln,
                    msg: format!("unknown region `{other}`"),
                })
            }
        };
        triangles.push(tri);
        region.push(reg);
    }

    let (n, line) = lines.next()?;
    let n_boundary = parse_count(line, n, "boundary")?;
    let mut boundary = Vec::with_capacity(n_boundary);
    for _ in 0..n_boundary {
        let (ln, line) = lines.next()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(MeshError::Parse {
                line: ln,
                msg: format!("expected `i j label`, found `{line}`"),
            });
        }
        let a: usize = parts[0].parse().map_err(|_| MeshError::Parse {
            line: ln,
            msg: format!("bad vertex index `{}`", parts[0]),
        })?;
        let b: usize = parts[1].parse().map_err(|_| MeshError::Parse {
            line: ln,
            msg: format!("bad vertex index `{}`", parts[1]),
        })?;
        if a >= n_vertices || b >= n_vertices {
            return Err(MeshError::Parse {
                line: ln,
                msg: "boundary edge references missing vertex".into(),
            });
        }
        let label = BoundaryLabel::parse(parts[2]).ok_or(MeshError::Parse {
            line: ln,
            msg: format!("unknown boundary label `{}`", parts[2]),
        })?;
        boundary.push(BoundaryEdge { v: [a, b], label });
    }

    Mesh::from_parts(vertices, triangles, region, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_benchmark_mesh, GeometryParams};

    #[test]
    fn roundtrip_is_bit_exact() {
        let mesh = generate_benchmark_mesh::<f64>(&GeometryParams::default(), 0).unwrap();
        let mut buf = Vec::new();
        write(&mesh, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let back: Mesh<f64> = read(&text).unwrap();

        assert_eq!(back.n_vertices(), mesh.n_vertices());
        for i in 0..mesh.n_vertices() {
            assert_eq!(back.vertex(i), mesh.vertex(i));
        }
        assert_eq!(back.triangles(), mesh.triangles());
        assert_eq!(back.regions(), mesh.regions());
        assert_eq!(back.boundary_edges().len(), mesh.boundary_edges().len());

        let mut buf2 = Vec::new();
        write(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn missing_vertex_reference_is_parse_error() {
        let text = "cfsi-mesh v1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 9 Fluid\nboundary 0\n";
        match read::<f64>(text) {
            Err(MeshError::Parse { line, msg }) => {
                assert_eq!(line, 7);
                assert!(msg.contains("missing vertex"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_parse_error() {
        assert!(matches!(read::<f64>(""), Err(MeshError::Parse { .. })));
    }
}
