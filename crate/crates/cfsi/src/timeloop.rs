//! Semi-implicit time integrator: characteristic convection with ALE
//! correction, one monolithic solve per step, nodal displacement update,
//! and region-wise mesh motion with harmonic extension in the fluid.

use crate::assembly::{
    apply_boundary_conditions, assemble_system, AssemblyError, AssemblyOptions,
    BoundaryConditions, PhysicalParams,
};
use crate::fespace::{
    build_spaces, field_norms, p2_basis, quadrature, value_in_triangle, DofMap, Field, SpaceTag,
    TriGeometry,
};
use crate::linalg::Vec2;
use crate::mesh::{BoundaryLabel, Location, Mesh, MeshError, QualityReport};
use crate::real::Real;
use crate::solver::{LinearSolver, SolverBackend, SolverError};
use std::fmt;

/// Unknown fields at one time level.
#[derive(Debug, Clone)]
pub struct State<R> {
    pub t: R,
    /// Velocity (VectorP2).
    pub u: Field<R>,
    /// Scalar microrotation omega_z (ScalarP2).
    pub w: Field<R>,
    /// Pressure (PressureP1, interface-discontinuous).
    pub p: Field<R>,
    /// Displacement (VectorP2); read only inside the solid.
    pub d: Field<R>,
}

impl<R: Real> State<R> {
    /// All fields zero at `t = 0`.
    pub fn rest(dofs: &DofMap) -> Self {
        Self {
            t: R::zero(),
            u: dofs.zero_field(SpaceTag::VectorP2),
            w: dofs.zero_field(SpaceTag::ScalarP2),
            p: dofs.zero_field(SpaceTag::PressureP1),
            d: dofs.zero_field(SpaceTag::VectorP2),
        }
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepReport<R> {
    pub solve_residual: f64,
    pub quality: QualityReport<R>,
    pub div_norm: R,
    pub wall_seconds: f64,
}

#[derive(Debug)]
pub enum StepError {
    Assembly(AssemblyError),
    Solver(SolverError),
    Mesh(MeshError),
}

impl fmt::Display for StepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepError::Assembly(e) => write!(f, "assembly: {e}"),
            StepError::Solver(e) => write!(f, "solver: {e}"),
            StepError::Mesh(e) => write!(f, "mesh: {e}"),
        }
    }
}

impl std::error::Error for StepError {}

impl From<AssemblyError> for StepError {
    fn from(e: AssemblyError) -> Self {
        StepError::Assembly(e)
    }
}

impl From<SolverError> for StepError {
    fn from(e: SolverError) -> Self {
        StepError::Solver(e)
    }
}

impl From<MeshError> for StepError {
    fn from(e: MeshError) -> Self {
        StepError::Mesh(e)
    }
}

/// P2 node classification with respect to regions and boundaries.
#[derive(Debug, Clone)]
pub struct NodeClasses {
    /// Node belongs to at least one Solid triangle.
    pub solid: Vec<bool>,
    /// Node belongs to at least one Fluid triangle.
    pub fluid: Vec<bool>,
    /// Node lies on an Interface edge.
    pub interface: Vec<bool>,
    /// Node lies on a domain-boundary (non-Interface) edge.
    pub outer: Vec<bool>,
}

pub fn classify_nodes<R: Real>(mesh: &Mesh<R>) -> NodeClasses {
    let n = mesh.n_p2_nodes();
    let nv = mesh.n_vertices();
    let mut solid = vec![false; n];
    let mut fluid = vec![false; n];
    for t in 0..mesh.n_triangles() {
        let dst = match mesh.region(t) {
            crate::mesh::Region::Solid => &mut solid,
            crate::mesh::Region::Fluid => &mut fluid,
        };
        for node in mesh.p2_nodes(t) {
            dst[node] = true;
        }
    }
    let mut interface = vec![false; n];
    let mut outer = vec![false; n];
    for be in mesh.boundary_edges() {
        let e = mesh.edge_index(be.v[0], be.v[1]).expect("edge exists");
        let nodes = [be.v[0], be.v[1], nv + e];
        let dst = if be.label == BoundaryLabel::Interface {
            &mut interface
        } else {
            &mut outer
        };
        for node in nodes {
            dst[node] = true;
        }
    }
    NodeClasses {
        solid,
        fluid,
        interface,
        outer,
    }
}

/// First-order characteristic foot point `x - dt (u(x) - w(x))`, with `u`
/// and `w` interpolated at `x`. On a static mesh (`w = 0`) this is the
/// plain backtracked foot.
pub fn characteristic_foot<R: Real>(
    x: Vec2<R>,
    u_n: &Field<R>,
    w_mesh: &Field<R>,
    mesh: &Mesh<R>,
    dofs: &DofMap,
    dt: R,
) -> Vec2<R> {
    let interp = |f: &Field<R>| match crate::fespace::interpolate(f, dofs, mesh, x) {
        Some(v) => v.vector(),
        None => {
            let (_, t, bary) = mesh.project_and_locate(x);
            value_in_triangle(f, dofs, mesh, t, bary).vector()
        }
    };
    let u = interp(u_n);
    let w = interp(w_mesh);
    x - (u - w) * dt
}

/// Transports a P2 field along characteristics: each node takes the field
/// value at its foot point, feet outside the domain being projected to the
/// nearest boundary point.
pub fn convect<R: Real>(
    field: &Field<R>,
    u_n: &Field<R>,
    w_mesh: &Field<R>,
    mesh: &Mesh<R>,
    dofs: &DofMap,
    dt: R,
) -> Field<R> {
    let n = mesh.n_p2_nodes();
    let mut out = field.clone();
    for k in 0..n {
        let x = mesh.p2_coord(k);
        let rel = u_n.vector_at_node(k) - w_mesh.vector_at_node(k);
        let foot = x - rel * dt;
        let (t, bary) = match mesh.locate(foot) {
            Location::Inside { triangle, bary } => (triangle, bary),
            Location::Outside => {
                let (_, t, bary) = mesh.project_and_locate(foot);
                (t, bary)
            }
        };
        match value_in_triangle(field, dofs, mesh, t, bary) {
            crate::fespace::Value::Scalar(s) => out.values[k] = s,
            crate::fespace::Value::Vector(v) => out.set_vector_at_node(k, v),
        }
    }
    out
}

/// Nodal displacement update `d + dt u`; the foot-point composition is
/// absorbed by moving the node itself.
pub fn update_displacement<R: Real>(d_n: &Field<R>, u_next: &Field<R>, dt: R) -> Field<R> {
    let mut out = d_n.clone();
    for (o, &u) in out.values.iter_mut().zip(&u_next.values) {
        *o += u * dt;
    }
    out
}

/// Solves the vector Laplace problem on the fluid region: Dirichlet
/// interface values on the interface nodes, zero on the outer boundaries,
/// harmonic inside. Returns a full VectorP2 field that is zero on nodes
/// not reached by the fluid.
pub fn harmonic_extension<R: Real>(
    mesh: &Mesh<R>,
    dofs: &DofMap,
    classes: &NodeClasses,
    interface_velocity: &Field<R>,
    solver: &mut LinearSolver,
    matrix_unchanged: bool,
) -> Result<Field<R>, StepError> {
    let n = mesh.n_p2_nodes();
    let rule = quadrature::<R>(5).expect("order-5 rule");

    // Dirichlet values per node and component; `None` marks an unknown.
    let mut fixed: Vec<Option<Vec2<R>>> = vec![None; n];
    for k in 0..n {
        if !classes.fluid[k] {
            fixed[k] = Some(Vec2::zero());
        }
        if classes.outer[k] {
            fixed[k] = Some(Vec2::zero());
        }
        if classes.interface[k] {
            fixed[k] = Some(interface_velocity.vector_at_node(k));
        }
    }

    // Scalar P2 stiffness over fluid triangles; the same matrix serves both
    // components with different lift-off right-hand sides.
    let mut triplets: Vec<(u32, u32, R)> = Vec::new();
    let mut lift: Vec<(usize, usize, R)> = Vec::new();
    for t in 0..mesh.n_triangles() {
        if mesh.region(t) != crate::mesh::Region::Fluid {
            continue;
        }
        let geom = TriGeometry::new(mesh.tri_coords(t));
        let nodes = mesh.p2_nodes(t);
        let mut local = [[R::zero(); 6]; 6];
        for (q, &bary) in rule.points.iter().enumerate() {
            let wq = rule.weights[q] * geom.det_jac;
            let (_, g) = p2_basis(bary);
            let mut pg = [Vec2::<R>::zero(); 6];
            for k in 0..6 {
                pg[k] = geom.phys_grad(g[k]);
            }
            for i in 0..6 {
                for j in 0..6 {
                    local[i][j] += wq * pg[i].dot(pg[j]);
                }
            }
        }
        for i in 0..6 {
            if fixed[nodes[i]].is_some() {
                continue;
            }
            for j in 0..6 {
                if fixed[nodes[j]].is_some() {
                    lift.push((nodes[i], nodes[j], local[i][j]));
                } else {
                    triplets.push((nodes[i] as u32, nodes[j] as u32, local[i][j]));
                }
            }
        }
    }
    for (k, f) in fixed.iter().enumerate() {
        if f.is_some() {
            triplets.push((k as u32, k as u32, R::one()));
        } else if !classes.fluid[k] {
            unreachable!("non-fluid nodes are fixed");
        }
    }
    // Interior fluid nodes with no stiffness row would make the system
    // singular (disconnected fluid region); the solver reports it.

    let mut out = dofs.zero_field::<R>(SpaceTag::VectorP2);
    let mut unchanged = matrix_unchanged;
    for comp in 0..2 {
        let mut rhs = vec![R::zero(); n];
        for (k, f) in fixed.iter().enumerate() {
            if let Some(v) = f {
                rhs[k] = if comp == 0 { v.x } else { v.y };
            }
        }
        for &(row, col, v) in &lift {
            let g = fixed[col].expect("lift column is fixed");
            let g = if comp == 0 { g.x } else { g.y };
            rhs[row] -= v * g;
        }
        let system = crate::assembly::SparseSystem {
            n,
            triplets: triplets.clone(),
            rhs,
            blocks: crate::assembly::BlockRanges {
                velocity: 0..n,
                microrot: n..n,
                pressure: n..n,
            },
            dirichlet: vec![None; n],
        };
        let (x, _) = solver.solve(&system, unchanged)?;
        unchanged = true;
        for k in 0..n {
            out.values[2 * k + comp] = x[k];
        }
    }
    // Re-impose the Dirichlet data exactly.
    for (k, f) in fixed.iter().enumerate() {
        if let Some(v) = f {
            out.set_vector_at_node(k, *v);
        }
    }
    Ok(out)
}

/// Options of the stepping scheme.
#[derive(Debug, Clone)]
pub struct StepOptions {
    pub assembly: AssemblyOptions,
    pub backend: SolverBackend,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            assembly: AssemblyOptions::default(),
            backend: SolverBackend::Direct,
        }
    }
}

/// Owns the solvers and advances the coupled system one `dt` at a time.
pub struct Stepper<R> {
    pub params: PhysicalParams<R>,
    pub bcs: BoundaryConditions<R>,
    pub options: StepOptions,
    solver: LinearSolver,
    ext_solver: LinearSolver,
    steps_taken: usize,
    /// Mesh velocity the previous step actually moved the mesh with; used
    /// as the ALE correction of the next step's characteristic feet.
    last_mesh_velocity: Option<Field<R>>,
}

impl<R: Real> Stepper<R> {
    pub fn new(params: PhysicalParams<R>, bcs: BoundaryConditions<R>, options: StepOptions) -> Self {
        let solver = LinearSolver::new(options.backend);
        Self {
            params,
            bcs,
            options,
            solver,
            ext_solver: LinearSolver::new(SolverBackend::Direct),
            steps_taken: 0,
            last_mesh_velocity: None,
        }
    }

    /// Combined mesh velocity: material velocity on solid nodes, harmonic
    /// extension of the interface velocity on fluid nodes, zero on the
    /// outer boundary.
    fn mesh_velocity(
        &mut self,
        mesh: &Mesh<R>,
        dofs: &DofMap,
        classes: &NodeClasses,
        u: &Field<R>,
        matrix_unchanged: bool,
    ) -> Result<Field<R>, StepError> {
        let any_interface_motion = (0..mesh.n_p2_nodes())
            .any(|k| classes.interface[k] && u.vector_at_node(k).norm() > R::zero());
        let mut w = if any_interface_motion {
            harmonic_extension(mesh, dofs, classes, u, &mut self.ext_solver, matrix_unchanged)?
        } else {
            dofs.zero_field(SpaceTag::VectorP2)
        };
        for k in 0..mesh.n_p2_nodes() {
            if classes.solid[k] {
                w.set_vector_at_node(k, u.vector_at_node(k));
            }
        }
        Ok(w)
    }

    /// One semi-implicit step: mesh velocity, characteristic convection,
    /// monolithic solve, displacement update, region-wise mesh motion,
    /// quality validation. The DofMap is purely connectivity-based and is
    /// returned unchanged; node coordinates live in the returned mesh.
    pub fn advance(
        &mut self,
        state: &State<R>,
        mesh: &Mesh<R>,
        dofs: &DofMap,
        dt: R,
    ) -> Result<(State<R>, Mesh<R>, DofMap, StepReport<R>), StepError> {
        let started = std::time::Instant::now();
        let classes = classify_nodes(mesh);
        let fluid_only = !mesh.has_solid();
        let matrix_unchanged = fluid_only && self.steps_taken > 0;

        // (1) mesh velocity: the field the mesh last moved with (harmonic
        // extension of the interface velocity), i.e. the discrete velocity
        // of the nodes; recomputed from the current field on the first step.
        let w_mesh = if fluid_only {
            dofs.zero_field(SpaceTag::VectorP2)
        } else {
            match self.last_mesh_velocity.take() {
                Some(w) => w,
                None => self.mesh_velocity(mesh, dofs, &classes, &state.u, false)?,
            }
        };

        // (2) convect previous fields along ALE-corrected characteristics.
        let u_conv = convect(&state.u, &state.u, &w_mesh, mesh, dofs, dt);
        let w_conv = convect(&state.w, &state.u, &w_mesh, mesh, dofs, dt);

        // (3) assemble and solve the monolithic system.
        let system = assemble_system(
            mesh,
            dofs,
            &self.params,
            dt,
            &state.d,
            &u_conv,
            &w_conv,
            &self.options.assembly,
        )?;
        let system = apply_boundary_conditions(system, &self.bcs, dofs, mesh, state.t + dt)?;
        let (mut solution, stats) = self.solver.solve(&system, matrix_unchanged)?;
        for (i, v) in system.dirichlet.iter().enumerate() {
            if let Some(g) = *v {
                solution[i] = g;
            }
        }

        let blocks = &system.blocks;
        let mut u_next = dofs.zero_field::<R>(SpaceTag::VectorP2);
        u_next
            .values
            .copy_from_slice(&solution[blocks.velocity.clone()]);
        let mut w_next = dofs.zero_field::<R>(SpaceTag::ScalarP2);
        w_next
            .values
            .copy_from_slice(&solution[blocks.microrot.clone()]);
        let mut p_next = dofs.zero_field::<R>(SpaceTag::PressureP1);
        p_next
            .values
            .copy_from_slice(&solution[blocks.pressure.clone()]);

        // (4) displacement update.
        let d_next = update_displacement(&state.d, &u_next, dt);

        // (5)-(7) move the mesh, rebuild the location grid, validate.
        let new_mesh = if fluid_only {
            mesh.clone()
        } else {
            let w_new = self.mesh_velocity(mesh, dofs, &classes, &u_next, false)?;
            let vel: Vec<Vec2<R>> = (0..mesh.n_vertices())
                .map(|v| w_new.vector_at_node(v))
                .collect();
            let moved = if vel.iter().all(|v| v.norm() == R::zero()) {
                mesh.clone()
            } else {
                mesh.moved(&vel, dt)?
            };
            self.last_mesh_velocity = Some(w_new);
            moved
        };
        let quality = new_mesh.validate();

        let div_norm = field_norms(&u_next, dofs, &new_mesh)
            .div_l2
            .expect("vector field has divergence norm");

        self.steps_taken += 1;
        let report = StepReport {
            solve_residual: stats.residual,
            quality,
            div_norm,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        let next = State {
            t: state.t + dt,
            u: u_next,
            w: w_next,
            p: p_next,
            d: d_next,
        };
        Ok((next, new_mesh, dofs.clone(), report))
    }
}

/// Builds mesh, spaces and a rest state for a fresh run.
pub fn initialize<R: Real>(
    mesh: Mesh<R>,
) -> Result<(Mesh<R>, DofMap, State<R>), crate::fespace::FespaceError> {
    let dofs = build_spaces(&mesh)?;
    let state = State::rest(&dofs);
    Ok((mesh, dofs, state))
}

// ---------------------------------------------------------------------------
// Full simulation driver
// ---------------------------------------------------------------------------

/// Accumulated statistics of one vertical line probe.
#[derive(Debug, Clone)]
pub struct LineProbeStats<R> {
    pub x0: R,
    pub y: Vec<R>,
    /// Time-averaged samples over the averaging window.
    pub avg_ux: Vec<R>,
    pub avg_uy: Vec<R>,
    pub avg_omega: Vec<R>,
    /// Maximum of |omega| over the window (all samples, all steps).
    pub max_abs_omega: R,
    pub steps_accumulated: usize,
}

/// Everything a finished (or aborted) run hands back.
#[derive(Debug)]
pub struct SimulationOutput<R: Real> {
    pub series: crate::io::probes::ProbeSeries<R>,
    pub line_stats: Vec<LineProbeStats<R>>,
    pub state: State<R>,
    pub mesh: Mesh<R>,
    pub dofs: DofMap,
    pub steps: usize,
    /// Step error that terminated the run early, if any.
    pub failure: Option<String>,
}

#[derive(Debug)]
pub enum SimulationError {
    Mesh(MeshError),
    Space(crate::fespace::FespaceError),
    Probe(crate::io::probes::ProbeError),
    Vtk(crate::io::vtk::VtkError),
    Io(std::io::Error),
}

impl fmt::Display for SimulationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimulationError::Mesh(e) => write!(f, "{e}"),
            SimulationError::Space(e) => write!(f, "{e}"),
            SimulationError::Probe(e) => write!(f, "{e}"),
            SimulationError::Vtk(e) => write!(f, "{e}"),
            SimulationError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for SimulationError {}

impl From<MeshError> for SimulationError {
    fn from(e: MeshError) -> Self {
        SimulationError::Mesh(e)
    }
}

impl From<std::io::Error> for SimulationError {
    fn from(e: std::io::Error) -> Self {
        SimulationError::Io(e)
    }
}

/// Runs a configured simulation from rest to `t_end`, recording the
/// control-point displacement every step and writing snapshots at the
/// configured cadence. A step failure terminates the run with partial
/// output and a failure marker appended to the series file.
pub fn run_simulation<R: Real>(
    config: &crate::io::config::Config<R>,
    out_dir: Option<&std::path::Path>,
) -> Result<SimulationOutput<R>, SimulationError> {
    use crate::io::config::{BcKind, GeometryKind};
    use crate::io::probes::{sample_line, ProbeRecord, ProbeSeries};

    let (mesh, height) = match config.geometry_kind {
        GeometryKind::Benchmark => (
            crate::mesh::generate_benchmark_mesh::<R>(&config.geometry, config.numerics.mesh_level)?,
            R::of(config.geometry.height),
        ),
        GeometryKind::Channel => (
            crate::mesh::generate_rect_mesh::<R>(
                config.channel.length,
                config.channel.height,
                config.channel.nx,
                config.channel.ny,
            )?,
            R::of(config.channel.height),
        ),
    };
    let dofs = build_spaces(&mesh).map_err(SimulationError::Space)?;
    let mut state = State::rest(&dofs);
    let mut mesh = mesh;

    let bcs = match config.bcs.kind {
        BcKind::InletProfile => {
            let mut bcs =
                BoundaryConditions::benchmark(config.bcs.u_bar, height, config.bcs.omega_inlet);
            bcs.ramp_time = config.bcs.ramp_time;
            bcs
        }
        BcKind::Forced => BoundaryConditions::channel_forced(),
    };
    let options = StepOptions {
        assembly: AssemblyOptions {
            viscous_in_solid: config.numerics.viscous_in_solid,
        },
        backend: config.numerics.solver,
    };
    let mut stepper = Stepper::new(config.params.clone(), bcs, options);

    // Control point: the mesh vertex initialized closest to A0, tracked as
    // a material point.
    let a0 = match config.geometry_kind {
        GeometryKind::Benchmark => {
            let c = config.geometry.control_point();
            Vec2::new(R::of(c.x), R::of(c.y))
        }
        GeometryKind::Channel => Vec2::zero(),
    };
    let control_vertex = (0..mesh.n_vertices())
        .min_by(|&a, &b| {
            let da = (mesh.vertex(a) - a0).norm();
            let db = (mesh.vertex(b) - a0).norm();
            da.partial_cmp(&db).expect("finite coordinates")
        })
        .unwrap_or(0);
    let control_origin = mesh.vertex(control_vertex);

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let meta = serde_json::json!({
            "version": format!("cfsi-v{}", env!("CARGO_PKG_VERSION")),
            "config": crate::io::config::render_config(config),
        });
        std::fs::write(dir.join("run.json"), format!("{meta:#}\n"))?;
    }

    let n_line_samples = 101usize;
    let probe_xs: Vec<R> = config.probes.line_x.clone();
    let mut extra_names = Vec::new();
    for x in &probe_xs {
        extra_names.push(format!("omega_max@x={x}"));
    }
    let mut series = ProbeSeries::<R>::new(extra_names);
    let mut line_stats: Vec<LineProbeStats<R>> = probe_xs
        .iter()
        .map(|&x0| LineProbeStats {
            x0,
            y: Vec::new(),
            avg_ux: Vec::new(),
            avg_uy: Vec::new(),
            avg_omega: Vec::new(),
            max_abs_omega: R::zero(),
            steps_accumulated: 0,
        })
        .collect();

    let record =
        |mesh: &Mesh<R>, state: &State<R>, dofs: &DofMap| -> (R, R, Vec<R>) {
            let disp = mesh.vertex(control_vertex) - control_origin;
            let mut extra = Vec::with_capacity(probe_xs.len());
            for &x0 in &probe_xs {
                let samples = sample_line(mesh, dofs, &state.u, &state.w, x0, height, n_line_samples);
                let mut m = R::zero();
                for s in &samples {
                    if let Some(om) = s.omega {
                        m = m.max(om.abs());
                    }
                }
                extra.push(m);
            }
            (disp.x, disp.y, extra)
        };

    let (dx, dy, extra) = record(&mesh, &state, &dofs);
    series
        .push(ProbeRecord {
            t: R::zero(),
            dx,
            dy,
            extra,
        })
        .map_err(SimulationError::Probe)?;

    let dt = config.numerics.dt;
    let n_steps = (config.numerics.t_end / dt).round().to_f64() as usize;
    let mut failure = None;

    for step in 1..=n_steps {
        match stepper.advance(&state, &mesh, &dofs, dt) {
            Ok((next, next_mesh, _, _report)) => {
                state = next;
                mesh = next_mesh;
            }
            Err(e) => {
                failure = Some(format!("step {step}: {e}"));
                break;
            }
        }

        let (dx, dy, extra) = record(&mesh, &state, &dofs);
        series
            .push(ProbeRecord {
                t: state.t,
                dx,
                dy,
                extra,
            })
            .map_err(SimulationError::Probe)?;

        // Accumulate line statistics inside the averaging window.
        if state.t >= config.numerics.profile_avg_start {
            for (stats, &x0) in line_stats.iter_mut().zip(&probe_xs) {
                let samples =
                    sample_line(&mesh, &dofs, &state.u, &state.w, x0, height, n_line_samples);
                if stats.y.is_empty() {
                    stats.y = samples.iter().map(|s| s.y).collect();
                    stats.avg_ux = vec![R::zero(); samples.len()];
                    stats.avg_uy = vec![R::zero(); samples.len()];
                    stats.avg_omega = vec![R::zero(); samples.len()];
                }
                for (i, s) in samples.iter().enumerate() {
                    if let (Some(u), Some(om)) = (s.u, s.omega) {
                        stats.avg_ux[i] += u.x;
                        stats.avg_uy[i] += u.y;
                        stats.avg_omega[i] += om;
                        stats.max_abs_omega = stats.max_abs_omega.max(om.abs());
                    }
                }
                stats.steps_accumulated += 1;
            }
        }

        if let Some(dir) = out_dir {
            if config.numerics.snapshot_every > 0 && step % config.numerics.snapshot_every == 0 {
                crate::io::vtk::save_vtk_snapshot(
                    &mesh,
                    &state,
                    &dofs,
                    &dir.join(format!("snap_{step}.vtk")),
                )
                .map_err(SimulationError::Vtk)?;
                if config.numerics.write_mesh_snapshots {
                    mesh.save(&dir.join(format!("mesh_{step}.cfsimesh")))?;
                }
            }
        }
    }

    for stats in &mut line_stats {
        let n = R::of(stats.steps_accumulated.max(1) as f64);
        for v in stats
            .avg_ux
            .iter_mut()
            .chain(stats.avg_uy.iter_mut())
            .chain(stats.avg_omega.iter_mut())
        {
            *v /= n;
        }
    }

    if let Some(dir) = out_dir {
        let mut buf = Vec::new();
        crate::io::probes::write_probe_series(&series, &mut buf).map_err(SimulationError::Probe)?;
        if let Some(msg) = &failure {
            buf.extend_from_slice(format!("# failure: {msg}\n").as_bytes());
        }
        std::fs::write(dir.join("series.csv"), buf)?;
        crate::io::vtk::save_vtk_snapshot(&mesh, &state, &dofs, &dir.join("snap_final.vtk"))
            .map_err(SimulationError::Vtk)?;
    }

    Ok(SimulationOutput {
        series,
        line_stats,
        state,
        mesh,
        dofs,
        steps: n_steps,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rect_mesh;

    fn channel() -> (Mesh<f64>, DofMap, State<f64>) {
        let mesh = generate_rect_mesh::<f64>(1.0, 0.5, 6, 3).unwrap();
        let (mesh, dofs, state) = initialize(mesh).unwrap();
        (mesh, dofs, state)
    }

    #[test]
    fn characteristic_foot_constant_advection() {
        let (mesh, dofs, _) = channel();
        let u = Field::from_vector_fn(&mesh, |_| Vec2::new(1.0, 0.0));
        let w = dofs.zero_field(SpaceTag::VectorP2);
        let foot = characteristic_foot(Vec2::new(0.5, 0.25), &u, &w, &mesh, &dofs, 0.1);
        assert!((foot - Vec2::new(0.4, 0.25)).norm() < 1e-13);
    }

    #[test]
    fn characteristic_foot_lagrangian_limit() {
        let (mesh, dofs, _) = channel();
        let u = Field::from_vector_fn(&mesh, |p| Vec2::new(0.3 + p.y, 0.1 * p.x));
        let foot = characteristic_foot(Vec2::new(0.5, 0.25), &u, &u, &mesh, &dofs, 0.2);
        assert!((foot - Vec2::new(0.5, 0.25)).norm() < 1e-14);
    }

    #[test]
    fn characteristic_foot_zero_velocity_is_identity() {
        let (mesh, dofs, _) = channel();
        let u = dofs.zero_field(SpaceTag::VectorP2);
        let w = dofs.zero_field(SpaceTag::VectorP2);
        let x = Vec2::new(0.31, 0.17);
        assert_eq!(characteristic_foot(x, &u, &w, &mesh, &dofs, 0.5), x);
    }

    #[test]
    fn convect_preserves_constants_and_identity() {
        let (mesh, dofs, _) = channel();
        let c = Field::from_scalar_fn(&mesh, |_| 3.25);
        let u = Field::from_vector_fn(&mesh, |p| Vec2::new(0.2 + 0.1 * p.y, -0.05));
        let w0 = dofs.zero_field(SpaceTag::VectorP2);
        let moved = convect(&c, &u, &w0, &mesh, &dofs, 0.05);
        for &v in &moved.values {
            assert!((v - 3.25).abs() < 1e-13);
        }

        let f = Field::from_scalar_fn(&mesh, |p| p.x * p.y + 0.3 * p.y);
        let zero_u = dofs.zero_field(SpaceTag::VectorP2);
        let same = convect(&f, &zero_u, &w0, &mesh, &dofs, 0.05);
        for (a, b) in same.values.iter().zip(&f.values) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn convect_transports_linear_fields_exactly() {
        let (mesh, dofs, _) = channel();
        // f(x) = a . x, uniform velocity v, static mesh: exact transport
        // wherever the foot stays inside the domain.
        let a = Vec2::new(0.7, -0.4);
        let v = Vec2::new(0.6, 0.2);
        let dt = 0.1;
        let f = Field::from_scalar_fn(&mesh, |p| a.dot(p));
        let u = Field::from_vector_fn(&mesh, |_| v);
        let w0 = dofs.zero_field(SpaceTag::VectorP2);
        let out = convect(&f, &u, &w0, &mesh, &dofs, dt);
        for k in 0..mesh.n_p2_nodes() {
            let x = mesh.p2_coord(k);
            let foot = x - v * dt;
            if foot.x < 0.0 || foot.x > 1.0 || foot.y < 0.0 || foot.y > 0.5 {
                continue;
            }
            let want = a.dot(x) - dt * a.dot(v);
            assert!(
                (out.values[k] - want).abs() < 1e-13,
                "node {k}: {} vs {want}",
                out.values[k]
            );
        }
    }

    #[test]
    fn update_displacement_examples() {
        let (mesh, dofs, _) = channel();
        let d0 = dofs.zero_field::<f64>(SpaceTag::VectorP2);
        let zero_u = dofs.zero_field(SpaceTag::VectorP2);
        let unchanged = update_displacement(&d0, &zero_u, 0.1);
        assert_eq!(unchanged.values, d0.values);

        let u = Field::from_vector_fn(&mesh, |_| Vec2::new(1.0, 0.0));
        let d1 = update_displacement(&d0, &u, 0.01);
        for k in 0..mesh.n_p2_nodes() {
            assert!((d1.vector_at_node(k) - Vec2::new(0.01, 0.0)).norm() < 1e-15);
        }
        let d2 = update_displacement(&d1, &u, 0.01);
        for k in 0..mesh.n_p2_nodes() {
            assert!((d2.vector_at_node(k) - Vec2::new(0.02, 0.0)).norm() < 1e-15);
        }
    }
}
