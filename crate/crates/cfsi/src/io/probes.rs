//! Probe time series (control-point displacement plus optional per-probe
//! columns) and line-profile extraction.

use crate::fespace::{value_in_triangle, DofMap, Field};
use crate::linalg::Vec2;
use crate::mesh::{Location, Mesh};
use crate::real::Real;
use crate::timeloop::State;
use std::fmt;
use std::io::Write;

#[derive(Debug, Clone)]
pub struct ProbeRecord<R> {
    pub t: R,
    pub dx: R,
    pub dy: R,
    pub extra: Vec<R>,
}

/// Time series of control-point displacement and probe samples. Time must
/// be strictly increasing; the first record sits at `t = 0`.
#[derive(Debug, Clone, Default)]
pub struct ProbeSeries<R> {
    pub extra_names: Vec<String>,
    pub records: Vec<ProbeRecord<R>>,
}

#[derive(Debug)]
pub enum ProbeError {
    NonMonotoneTime { index: usize },
    Empty,
    Io(std::io::Error),
}

impl fmt::Display for ProbeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbeError::NonMonotoneTime { index } => {
                write!(f, "record {index} breaks strictly increasing time")
            }
            ProbeError::Empty => write!(f, "probe series is empty"),
            ProbeError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for ProbeError {}

impl From<std::io::Error> for ProbeError {
    fn from(e: std::io::Error) -> Self {
        ProbeError::Io(e)
    }
}

impl<R: Real> ProbeSeries<R> {
    pub fn new(extra_names: Vec<String>) -> Self {
        Self {
            extra_names,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: ProbeRecord<R>) -> Result<(), ProbeError> {
        if let Some(last) = self.records.last() {
            if record.t <= last.t {
                return Err(ProbeError::NonMonotoneTime {
                    index: self.records.len(),
                });
            }
        }
        self.records.push(record);
        Ok(())
    }
}

/// CSV with header `t,dxA,dyA[,probe columns]`, one row per step, full
/// double precision.
pub fn write_probe_series<R: Real>(
    series: &ProbeSeries<R>,
    w: &mut impl Write,
) -> Result<(), ProbeError> {
    if series.records.is_empty() {
        return Err(ProbeError::Empty);
    }
    let mut last_t: Option<R> = None;
    for (i, rec) in series.records.iter().enumerate() {
        if let Some(lt) = last_t {
            if rec.t <= lt {
                return Err(ProbeError::NonMonotoneTime { index: i });
            }
        }
        last_t = Some(rec.t);
    }

    let mut header = String::from("t,dxA,dyA");
    for name in &series.extra_names {
        header.push(',');
        header.push_str(name);
    }
    writeln!(w, "{header}")?;
    for rec in &series.records {
        let mut line = format!("{},{},{}", rec.t, rec.dx, rec.dy);
        for v in &rec.extra {
            line.push(',');
            line.push_str(&format!("{v}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// A local extremum of the `dy` series: time, value, and whether it is a
/// maximum.
#[derive(Debug, Clone, Copy)]
pub struct Extremum<R> {
    pub t: R,
    pub dy: R,
    pub is_max: bool,
}

/// Sign alternations of `d(dy)/dt`, i.e. local extrema of `dy(t)`, filtered
/// so that consecutive kept extrema differ by at least `floor` (suppresses
/// step-level jitter).
pub fn dy_extrema<R: Real>(series: &ProbeSeries<R>, floor: R) -> Vec<Extremum<R>> {
    let rec = &series.records;
    let mut raw = Vec::new();
    for i in 1..rec.len().saturating_sub(1) {
        let prev = rec[i].dy - rec[i - 1].dy;
        let next = rec[i + 1].dy - rec[i].dy;
        if prev > R::zero() && next <= R::zero() {
            raw.push(Extremum {
                t: rec[i].t,
                dy: rec[i].dy,
                is_max: true,
            });
        } else if prev < R::zero() && next >= R::zero() {
            raw.push(Extremum {
                t: rec[i].t,
                dy: rec[i].dy,
                is_max: false,
            });
        }
    }
    // Keep only swings larger than the floor, measured against the last
    // kept extremum; same-kind extrema replace the previous one if they
    // extend the swing.
    let mut kept: Vec<Extremum<R>> = Vec::new();
    for e in raw {
        match kept.last() {
            None => kept.push(e),
            Some(last) if last.is_max == e.is_max => {
                let extends = (e.is_max && e.dy > last.dy) || (!e.is_max && e.dy < last.dy);
                if extends {
                    *kept.last_mut().unwrap() = e;
                }
            }
            Some(last) => {
                if (e.dy - last.dy).abs() >= floor {
                    kept.push(e);
                }
            }
        }
    }
    kept
}

/// Peak-to-peak swing of `dy` over `t` in `[t0, t1]`.
pub fn peak_to_peak<R: Real>(series: &ProbeSeries<R>, t0: R, t1: R) -> R {
    let mut lo = R::infinity();
    let mut hi = R::neg_infinity();
    for rec in &series.records {
        if rec.t >= t0 && rec.t <= t1 {
            lo = lo.min(rec.dy);
            hi = hi.max(rec.dy);
        }
    }
    if hi >= lo {
        hi - lo
    } else {
        R::zero()
    }
}

/// One sample of a vertical line profile; `None` values mark points outside
/// the triangulation (e.g. inside the cylinder hole).
#[derive(Debug, Clone, Copy)]
pub struct LineSample<R> {
    pub y: R,
    pub u: Option<Vec2<R>>,
    pub omega: Option<R>,
}

/// Samples `(u, omega)` at `n` points uniformly spaced in `y` along the
/// vertical line `x = x0`, interpolated with P2 accuracy.
pub fn extract_line_profile<R: Real>(
    mesh: &Mesh<R>,
    state: &State<R>,
    dofs: &DofMap,
    x0: R,
    n: usize,
) -> Vec<LineSample<R>> {
    let height = mesh
        .vertices()
        .iter()
        .fold(R::zero(), |acc, v| acc.max(v.y));
    sample_line(mesh, dofs, &state.u, &state.w, x0, height, n)
}

pub(crate) fn sample_line<R: Real>(
    mesh: &Mesh<R>,
    dofs: &DofMap,
    u: &Field<R>,
    w: &Field<R>,
    x0: R,
    height: R,
    n: usize,
) -> Vec<LineSample<R>> {
    let mut out = Vec::with_capacity(n);
    let denom = R::of((n.max(2) - 1) as f64);
    for i in 0..n {
        let y = height * R::of(i as f64) / denom;
        let p = Vec2::new(x0, y);
        match mesh.locate(p) {
            Location::Inside { triangle, bary } => {
                let uv = value_in_triangle(u, dofs, mesh, triangle, bary).vector();
                let wv = value_in_triangle(w, dofs, mesh, triangle, bary).scalar();
                out.push(LineSample {
                    y,
                    u: Some(uv),
                    omega: Some(wv),
                });
            }
            Location::Outside => out.push(LineSample {
                y,
                u: None,
                omega: None,
            }),
        }
    }
    out
}

/// CSV for a line profile: `y,u_x,u_y,omega`, absent samples as empty cells.
pub fn write_line_profile<R: Real>(
    samples: &[LineSample<R>],
    w: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(w, "y,u_x,u_y,omega")?;
    for s in samples {
        match (s.u, s.omega) {
            (Some(u), Some(om)) => writeln!(w, "{},{},{},{}", s.y, u.x, u.y, om)?,
            _ => writeln!(w, "{},,,", s.y)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::build_spaces;
    use crate::mesh::generate_rect_mesh;

    #[test]
    fn single_record_writes_header_plus_row() {
        let mut series = ProbeSeries::<f64>::new(vec![]);
        series
            .push(ProbeRecord {
                t: 0.0,
                dx: 0.0,
                dy: 0.0,
                extra: vec![],
            })
            .unwrap();
        let mut buf = Vec::new();
        write_probe_series(&series, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "t,dxA,dyA");
        assert_eq!(lines[1], "0,0,0");
    }

    #[test]
    fn non_monotone_time_is_rejected() {
        let mut series = ProbeSeries::<f64>::new(vec![]);
        series
            .push(ProbeRecord { t: 0.0, dx: 0.0, dy: 0.0, extra: vec![] })
            .unwrap();
        assert!(series
            .push(ProbeRecord { t: 0.0, dx: 0.0, dy: 0.0, extra: vec![] })
            .is_err());

        // A hand-built series with broken ordering is rejected by the writer.
        let bad = ProbeSeries {
            extra_names: vec![],
            records: vec![
                ProbeRecord { t: 0.0, dx: 0.0, dy: 0.0, extra: vec![] },
                ProbeRecord { t: 0.5, dx: 0.0, dy: 0.0, extra: vec![] },
                ProbeRecord { t: 0.25, dx: 0.0, dy: 0.0, extra: vec![] },
            ],
        };
        let mut buf = Vec::new();
        assert!(matches!(
            write_probe_series(&bad, &mut buf),
            Err(ProbeError::NonMonotoneTime { index: 2 })
        ));
    }

    #[test]
    fn empty_series_is_rejected() {
        let series = ProbeSeries::<f64>::new(vec![]);
        let mut buf = Vec::new();
        assert!(matches!(
            write_probe_series(&series, &mut buf),
            Err(ProbeError::Empty)
        ));
    }

    #[test]
    fn rest_state_line_profile_is_zero() {
        let mesh = generate_rect_mesh::<f64>(1.0, 0.41, 8, 4).unwrap();
        let dofs = build_spaces(&mesh).unwrap();
        let state = State::rest(&dofs);
        let samples = extract_line_profile(&mesh, &state, &dofs, 0.5, 21);
        assert_eq!(samples.len(), 21);
        for s in samples {
            assert_eq!(s.u.unwrap(), Vec2::new(0.0, 0.0));
            assert_eq!(s.omega.unwrap(), 0.0);
        }
    }
}
