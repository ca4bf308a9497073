//! Oracle-vs-solver verification: marches the body-force-driven channel to
//! its discrete steady state and measures L2 errors against the 1D
//! micropolar Poiseuille oracle.

use crate::assembly::{BoundaryConditions, PhysicalParams};
use crate::fespace::{build_spaces, p2_basis, quadrature, DofMap, TriGeometry};
use crate::linalg::Vec2;
use crate::mesh::{generate_rect_mesh, Mesh};
use crate::physics::{poiseuille_micropolar_oracle, ChannelProfile, PhysicsError};
use crate::real::Real;
use crate::timeloop::{State, StepError, StepOptions, Stepper};
use std::fmt;

/// One forced-channel steady-state case.
#[derive(Debug, Clone)]
pub struct ChannelCase<R> {
    pub params: PhysicalParams<R>,
    /// Driving pressure gradient; applied as the body force `(-g, 0)`.
    pub g: R,
    pub length: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub dt: R,
    pub max_steps: usize,
    /// Relative per-step change below which the march stops.
    pub steady_tol: R,
}

impl<R: Real> ChannelCase<R> {
    /// The reference verification tuple on the benchmark-height channel.
    ///
    /// The steady state does not depend on the density, so the march uses a
    /// small one: it shortens the viscous relaxation time and keeps the
    /// channel Reynolds number low enough for a stable steady state.
    pub fn reference(nx: usize, ny: usize) -> Self {
        let params = PhysicalParams {
            rho_f: R::of(1e-2),
            rho_s: R::of(1e-2),
            mu: R::of(1e-3),
            mu_r: R::of(1e-3),
            lambda1: R::of(1e-4),
            micro_inertia: R::of(1e-3),
            body_force: Vec2::new(R::one(), R::zero()),
            ..PhysicalParams::default()
        };
        Self {
            params,
            g: R::of(-1.0),
            length: 1.0,
            height: 0.41,
            nx,
            ny,
            dt: R::of(0.05),
            max_steps: 3000,
            steady_tol: R::of(1e-8),
        }
    }
}

#[derive(Debug)]
pub enum VerifyError {
    Step(StepError),
    Physics(PhysicsError),
    Space(crate::fespace::FespaceError),
    Mesh(crate::mesh::MeshError),
    NotSteady { rel_change: f64, steps: usize },
}

impl fmt::Display for VerifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyError::Step(e) => write!(f, "step failed: {e}"),
            VerifyError::Physics(e) => write!(f, "oracle failed: {e}"),
            VerifyError::Space(e) => write!(f, "{e}"),
            VerifyError::Mesh(e) => write!(f, "{e}"),
            VerifyError::NotSteady { rel_change, steps } => write!(
                f,
                "no steady state after {steps} steps (relative change {rel_change:.3e})"
            ),
        }
    }
}

impl std::error::Error for VerifyError {}

impl From<StepError> for VerifyError {
    fn from(e: StepError) -> Self {
        VerifyError::Step(e)
    }
}

impl From<PhysicsError> for VerifyError {
    fn from(e: PhysicsError) -> Self {
        VerifyError::Physics(e)
    }
}

/// Steady channel solution and how it was reached.
pub struct SteadyChannel<R: Real> {
    pub state: State<R>,
    pub mesh: Mesh<R>,
    pub dofs: DofMap,
    pub steps: usize,
    pub rel_change: f64,
}

/// Marches the forced channel to its discrete steady state.
pub fn march_to_steady<R: Real>(case: &ChannelCase<R>) -> Result<SteadyChannel<R>, VerifyError> {
    let mut params = case.params.clone();
    params.body_force = Vec2::new(-case.g, R::zero());
    let mesh =
        generate_rect_mesh::<R>(case.length, case.height, case.nx, case.ny).map_err(VerifyError::Mesh)?;
    let dofs = build_spaces(&mesh).map_err(VerifyError::Space)?;
    let mut state = State::rest(&dofs);
    let mut stepper = Stepper::new(
        params,
        BoundaryConditions::channel_forced(),
        StepOptions::default(),
    );

    let mut mesh = mesh;
    let mut rel = f64::INFINITY;
    for n in 1..=case.max_steps {
        let prev_u = state.u.values.clone();
        let prev_w = state.w.values.clone();
        let (next, new_mesh, _, _) = stepper.advance(&state, &mesh, &dofs, case.dt)?;
        state = next;
        mesh = new_mesh;

        let mut du = 0.0f64;
        let mut nu = 0.0f64;
        for (&a, &b) in state.u.values.iter().zip(&prev_u) {
            let d = (a - b).to_f64();
            du += d * d;
            nu += b.to_f64() * b.to_f64();
        }
        let mut dw = 0.0f64;
        let mut nw = 0.0f64;
        for (&a, &b) in state.w.values.iter().zip(&prev_w) {
            let d = (a - b).to_f64();
            dw += d * d;
            nw += b.to_f64() * b.to_f64();
        }
        let rel_u = du.sqrt() / nu.sqrt().max(1e-300);
        let rel_w = if nw > 0.0 { dw.sqrt() / nw.sqrt() } else { 0.0 };
        rel = rel_u.max(rel_w);
        if n > 2 && rel < case.steady_tol.to_f64() {
            return Ok(SteadyChannel {
                state,
                mesh,
                dofs,
                steps: n,
                rel_change: rel,
            });
        }
    }
    Err(VerifyError::NotSteady {
        rel_change: rel,
        steps: case.max_steps,
    })
}

/// Relative L2 errors of `(u, omega)` against the 1D oracle profile.
///
/// The oracle samples are interpolated linearly in `y`; with the default
/// `N = 10^4` grid the interpolation error is far below the FE error.
pub fn channel_errors<R: Real>(
    steady: &SteadyChannel<R>,
    oracle: &ChannelProfile<R>,
) -> (f64, f64) {
    let rule = quadrature::<R>(5).expect("order-5 rule");
    let sample = |ys: &[R], vs: &[R], y: R| -> f64 {
        let y = y.to_f64();
        let h = ys[1].to_f64() - ys[0].to_f64();
        let i = ((y / h).floor() as usize).min(vs.len() - 2);
        let y0 = ys[i].to_f64();
        let t = (y - y0) / h;
        vs[i].to_f64() * (1.0 - t) + vs[i + 1].to_f64() * t
    };

    let mut err_u = 0.0f64;
    let mut norm_u = 0.0f64;
    let mut err_w = 0.0f64;
    let mut norm_w = 0.0f64;
    let mesh = &steady.mesh;
    for t in 0..mesh.n_triangles() {
        let geom = TriGeometry::new(mesh.tri_coords(t));
        let nodes = mesh.p2_nodes(t);
        for (q, &bary) in rule.points.iter().enumerate() {
            let wq = (rule.weights[q] * geom.det_jac).to_f64();
            let (n2, _) = p2_basis(bary);
            let p = geom.point(bary);
            let mut uh = Vec2::<R>::zero();
            let mut wh = R::zero();
            for k in 0..6 {
                uh += steady.state.u.vector_at_node(nodes[k]) * n2[k];
                wh += steady.state.w.values[nodes[k]] * n2[k];
            }
            let u_ex = sample(&oracle.y, &oracle.u, p.y);
            let w_ex = sample(&oracle.y, &oracle.omega, p.y);
            let dux = uh.x.to_f64() - u_ex;
            let duy = uh.y.to_f64();
            err_u += wq * (dux * dux + duy * duy);
            norm_u += wq * u_ex * u_ex;
            let dw = wh.to_f64() - w_ex;
            err_w += wq * dw * dw;
            norm_w += wq * w_ex * w_ex;
        }
    }
    let rel_u = err_u.sqrt() / norm_u.sqrt().max(1e-300);
    let rel_w = if norm_w > 0.0 {
        err_w.sqrt() / norm_w.sqrt()
    } else {
        err_w.sqrt()
    };
    (rel_u, rel_w)
}

/// One row of the convergence table.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub nx: usize,
    pub ny: usize,
    pub u_err: f64,
    pub w_err: f64,
    pub steps: usize,
}

/// Runs the reference case on `refinements + 1` nested meshes and reports
/// relative errors against the oracle.
pub fn poiseuille_study<R: Real>(
    base: &ChannelCase<R>,
    refinements: usize,
    oracle_n: usize,
) -> Result<Vec<ConvergenceRow>, VerifyError> {
    let oracle =
        poiseuille_micropolar_oracle(&base.params, base.g, R::of(base.height), oracle_n)?;
    let mut rows = Vec::new();
    for level in 0..=refinements {
        let factor = 1usize << level;
        let case = ChannelCase {
            nx: base.nx * factor,
            ny: base.ny * factor,
            ..base.clone()
        };
        let steady = march_to_steady(&case)?;
        let (u_err, w_err) = channel_errors(&steady, &oracle);
        rows.push(ConvergenceRow {
            nx: case.nx,
            ny: case.ny,
            u_err,
            w_err,
            steps: steady.steps,
        });
    }
    Ok(rows)
}
