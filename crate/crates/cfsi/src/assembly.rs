//! Assembly of the monolithic system: one implicit solve per time step for
//! velocity, microrotation and pressure together.
//!
//! Element terms per triangle (order-5 quadrature), with `rho` and the
//! micro-viscous coefficients evaluated from the region label:
//!
//! * velocity rows: `rho/dt` mass, `(mu + mu_r)` viscous form on symmetrized
//!   gradients, pressure coupling `-(p, div u~)`, micropolar coupling
//!   `-2 mu_r (omega, curl u~)`, and in the solid the linearly implicit
//!   elastic increment `c3 dt [Du - grad(u) grad(d)^T - grad(d) grad(u)^T]`;
//! * pressure rows: `-(p~, div u)` and the penalty `zeta (p, p~)`;
//! * microrotation rows: `rho I / dt` mass, `lambda1` stiffness, `4 mu_r`
//!   reaction and the coupling `-2 mu_r (curl u, omega~)`.
//!
//! Every stress-like paper term `S : Du~` is assembled as `S : eps(u~)` with
//! `eps` the symmetric gradient, so the natural outlet condition is the
//! zero-stress one and the unidirectional limit matches the strong-form
//! channel equations. The velocity-row micropolar coupling uses its
//! integrated-by-parts form `-2 mu_r (omega, curl u~)`, which makes the two
//! coupling blocks exact transposes of each other.

use crate::fespace::{p1_basis, p2_basis, quadrature, DofMap, Field, SpaceTag, TriGeometry};
use crate::linalg::{Mat2, Vec2};
use crate::mesh::{BoundaryLabel, Mesh, Region};
use crate::real::Real;
use std::fmt;
use std::ops::Range;

/// Material and model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams<R> {
    /// Fluid density (kg/m^3).
    pub rho_f: R,
    /// Solid density (kg/m^3).
    pub rho_s: R,
    /// Dynamic viscosity (kg/(m s)).
    pub mu: R,
    /// Micro-rotational viscosity (kg/(m s)); 0 recovers classical flow.
    pub mu_r: R,
    /// Spin viscosity lambda1 = beta + gamma (kg m/s).
    pub lambda1: R,
    /// Spin viscosity lambda2 = alpha + beta - gamma; inert in 2D.
    pub lambda2: R,
    /// Micro-inertia coefficient I (m^2).
    pub micro_inertia: R,
    /// Solid elastic coefficient (kg/(m s^2)).
    pub c3: R,
    /// Pressure penalty, 0 < zeta << 1.
    pub zeta: R,
    /// Body force density (N/m^3).
    pub body_force: Vec2<R>,
    /// Body couple density, scalar in 2D (N/m^2).
    pub body_couple: R,
}

impl<R: Real> Default for PhysicalParams<R> {
    fn default() -> Self {
        Self {
            rho_f: R::of(1e3),
            rho_s: R::of(1e3),
            mu: R::one(),
            mu_r: R::of(0.1),
            lambda1: R::of(5e-3),
            lambda2: R::zero(),
            micro_inertia: R::of(1e-4),
            c3: R::of(2e6),
            zeta: R::of(1e-7),
            body_force: Vec2::zero(),
            body_couple: R::zero(),
        }
    }
}

impl<R: Real> PhysicalParams<R> {
    /// Kinematic viscosity of the fluid.
    pub fn nu(&self) -> R {
        self.mu / self.rho_f
    }
}

/// Discretization switches that are not physical constants.
#[derive(Debug, Clone, Copy)]
pub struct AssemblyOptions {
    /// Integrate the viscous and micropolar terms over both regions (the
    /// weak forms are written over the whole domain); `false` restricts
    /// them to the fluid for sensitivity studies.
    pub viscous_in_solid: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            viscous_in_solid: true,
        }
    }
}

/// Velocity boundary prescription per label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityBc<R> {
    /// Both components zero.
    NoSlip,
    /// `(profile(y), 0)` with the parabolic inlet profile.
    Parabolic { u_bar: R, height: R },
    /// Pin the y-component only, leave the x-component natural. Used at
    /// the ends of forced-channel verification runs.
    FixY(R),
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarBc<R> {
    Dirichlet(R),
    Natural,
}

/// Per-label boundary prescriptions for velocity and microrotation.
///
/// `ramp_time > 0` scales the parabolic inlet by the smooth startup factor
/// `(1 - cos(pi t / ramp_time)) / 2` until `t = ramp_time`; this is the
/// standard benchmark protocol for starting the flow from rest.
#[derive(Debug, Clone)]
pub struct BoundaryConditions<R> {
    pub entries: Vec<(BoundaryLabel, VelocityBc<R>, ScalarBc<R>)>,
    pub ramp_time: R,
}

impl<R: Real> BoundaryConditions<R> {
    /// Benchmark channel: parabolic inlet (with the 2 s startup ramp),
    /// no-slip walls and cylinder (which clamps the flag's left face),
    /// do-nothing outlet.
    pub fn benchmark(u_bar: R, height: R, omega_inlet: R) -> Self {
        Self {
            entries: vec![
                (
                    BoundaryLabel::Inlet,
                    VelocityBc::Parabolic { u_bar, height },
                    ScalarBc::Dirichlet(omega_inlet),
                ),
                (BoundaryLabel::Wall, VelocityBc::NoSlip, ScalarBc::Dirichlet(R::zero())),
                (
                    BoundaryLabel::Cylinder,
                    VelocityBc::NoSlip,
                    ScalarBc::Dirichlet(R::zero()),
                ),
                (BoundaryLabel::Outlet, VelocityBc::Natural, ScalarBc::Natural),
            ],
            ramp_time: R::of(2.0),
        }
    }

    /// Body-force-driven channel: no-slip walls, transverse velocity pinned
    /// at both ends. The exact unidirectional solution satisfies the
    /// remaining natural conditions, so the discrete steady state converges
    /// to the 1D channel profile.
    pub fn channel_forced() -> Self {
        Self {
            entries: vec![
                (BoundaryLabel::Wall, VelocityBc::NoSlip, ScalarBc::Dirichlet(R::zero())),
                (BoundaryLabel::Inlet, VelocityBc::FixY(R::zero()), ScalarBc::Natural),
                (BoundaryLabel::Outlet, VelocityBc::FixY(R::zero()), ScalarBc::Natural),
            ],
            ramp_time: R::zero(),
        }
    }

    /// Closed box: everything clamped.
    pub fn closed_box() -> Self {
        Self {
            entries: vec![
                (BoundaryLabel::Wall, VelocityBc::NoSlip, ScalarBc::Dirichlet(R::zero())),
                (BoundaryLabel::Inlet, VelocityBc::NoSlip, ScalarBc::Dirichlet(R::zero())),
                (BoundaryLabel::Outlet, VelocityBc::NoSlip, ScalarBc::Dirichlet(R::zero())),
            ],
            ramp_time: R::zero(),
        }
    }
}

/// Index ranges of the three unknown blocks in the monolithic system.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRanges {
    pub velocity: Range<usize>,
    pub microrot: Range<usize>,
    pub pressure: Range<usize>,
}

impl BlockRanges {
    pub fn new(dofs: &DofMap) -> Self {
        let nu = dofs.n_velocity();
        let nw = dofs.n_microrot();
        let np = dofs.n_pressure();
        Self {
            velocity: 0..nu,
            microrot: nu..nu + nw,
            pressure: nu + nw..nu + nw + np,
        }
    }

    pub fn n_total(&self) -> usize {
        self.pressure.end
    }
}

/// Monolithic sparse system in triplet form plus right-hand side.
#[derive(Debug, Clone)]
pub struct SparseSystem<R> {
    pub n: usize,
    pub triplets: Vec<(u32, u32, R)>,
    pub rhs: Vec<R>,
    pub blocks: BlockRanges,
    /// Prescribed value per row once boundary conditions are applied.
    pub dirichlet: Vec<Option<R>>,
}

impl<R: Real> SparseSystem<R> {
    /// Dense application `y = A x`; test and diagnostics helper.
    pub fn apply(&self, x: &[R]) -> Vec<R> {
        let mut y = vec![R::zero(); self.n];
        for &(r, c, v) in &self.triplets {
            y[r as usize] += v * x[c as usize];
        }
        y
    }
}

#[derive(Debug)]
pub enum AssemblyError {
    InvalidDt(f64),
    InvalidParams(Vec<String>),
    FieldSize(String),
    ConflictingBc { dof: usize },
}

impl fmt::Display for AssemblyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssemblyError::InvalidDt(dt) => write!(f, "time step dt = {dt} must be positive"),
            AssemblyError::InvalidParams(v) => write!(f, "invalid parameters: {}", v.join("; ")),
            AssemblyError::FieldSize(msg) => write!(f, "field size mismatch: {msg}"),
            AssemblyError::ConflictingBc { dof } => {
                write!(f, "dof {dof} prescribed twice with conflicting values")
            }
        }
    }
}

impl std::error::Error for AssemblyError {}

/// The solid stress combination `Dd - grad(d) grad(d)^T` with
/// `Dd = grad(d) + grad(d)^T`; symmetric by construction.
#[inline]
pub fn elastic_tensor<R: Real>(grad_d: Mat2<R>) -> Mat2<R> {
    grad_d.sym2() - grad_d * grad_d.transpose()
}

/// 2D curl of a vector field from its gradient: `d1 u2 - d2 u1`.
#[inline]
pub fn curl_of_vector<R: Real>(grad_u: Mat2<R>) -> R {
    grad_u.m[1][0] - grad_u.m[0][1]
}

/// 2D rot of a scalar field from its gradient: `(d2 w, -d1 w)`.
#[inline]
pub fn rot_of_scalar<R: Real>(grad_w: Vec2<R>) -> Vec2<R> {
    Vec2::new(grad_w.y, -grad_w.x)
}

/// Local dof layout per triangle: 12 velocity + 6 microrotation + 3 pressure.
const N_LOCAL: usize = 21;
const W_OFF: usize = 12;
const P_OFF: usize = 18;

/// Assembles the monolithic matrix and right-hand side of one implicit step.
///
/// `d_n` is the current displacement, `u_convected` and `w_convected` the
/// nodal values of the previous fields composed with the characteristic
/// foot map.
#[allow(clippy::too_many_arguments)]
pub fn assemble_system<R: Real>(
    mesh: &Mesh<R>,
    dofs: &DofMap,
    params: &PhysicalParams<R>,
    dt: R,
    d_n: &Field<R>,
    u_convected: &Field<R>,
    w_convected: &Field<R>,
    options: &AssemblyOptions,
) -> Result<SparseSystem<R>, AssemblyError> {
    if !(dt > R::zero()) {
        return Err(AssemblyError::InvalidDt(dt.to_f64()));
    }
    let check = crate::physics::validate_params(params);
    if !check.is_ok() {
        return Err(AssemblyError::InvalidParams(check.violations));
    }
    for (field, space, name) in [
        (d_n, SpaceTag::VectorP2, "d_n"),
        (u_convected, SpaceTag::VectorP2, "u_convected"),
        (w_convected, SpaceTag::ScalarP2, "w_convected"),
    ] {
        if field.space != space || field.check_size(dofs).is_err() {
            return Err(AssemblyError::FieldSize(name.into()));
        }
    }

    let blocks = BlockRanges::new(dofs);
    let n = blocks.n_total();
    let rule = quadrature::<R>(5).expect("order-5 rule");
    let nq = rule.points.len();

    // Basis tables at the quadrature points (reference values/gradients).
    let mut n2_tab = Vec::with_capacity(nq);
    let mut g2_tab = Vec::with_capacity(nq);
    let mut n1_tab = Vec::with_capacity(nq);
    for &bary in &rule.points {
        let (n2, g2) = p2_basis(bary);
        let (n1, _) = p1_basis(bary);
        n2_tab.push(n2);
        g2_tab.push(g2);
        n1_tab.push(n1);
    }

    let mut triplets: Vec<(u32, u32, R)> = Vec::with_capacity(mesh.n_triangles() * 180);
    let mut rhs = vec![R::zero(); n];

    let w_base = blocks.microrot.start;
    let p_base = blocks.pressure.start;

    let mut local = [[R::zero(); N_LOCAL]; N_LOCAL];
    let mut local_rhs = [R::zero(); N_LOCAL];

    for t in 0..mesh.n_triangles() {
        let geom = TriGeometry::new(mesh.tri_coords(t));
        let nodes = mesh.p2_nodes(t);
        let pdofs = dofs.pressure_dofs(t);
        let region = mesh.region(t);
        let solid = region == Region::Solid;
        let micro_active = options.viscous_in_solid || !solid;

        let rho = if solid { params.rho_s } else { params.rho_f };
        let mass_u = rho / dt;
        let mass_w = rho * params.micro_inertia / dt;
        let visc = if micro_active {
            params.mu + params.mu_r
        } else {
            R::zero()
        };
        let coup = if micro_active {
            R::of(2.0) * params.mu_r
        } else {
            R::zero()
        };
        let react_w = if micro_active {
            R::of(4.0) * params.mu_r
        } else {
            R::zero()
        };
        let stiff_w = if micro_active {
            params.lambda1
        } else {
            R::zero()
        };
        let c3dt = if solid { params.c3 * dt } else { R::zero() };

        for row in local.iter_mut() {
            row.fill(R::zero());
        }
        local_rhs.fill(R::zero());

        for q in 0..nq {
            let wq = rule.weights[q] * geom.det_jac;
            let n2 = &n2_tab[q];
            let n1 = &n1_tab[q];
            // Physical P2 gradients.
            let mut pg = [Vec2::<R>::zero(); 6];
            for k in 0..6 {
                pg[k] = geom.phys_grad(g2_tab[q][k]);
            }

            // Convected values and (in the solid) the displacement gradient.
            let mut uc = Vec2::<R>::zero();
            let mut wc = R::zero();
            let mut grad_d = Mat2::<R>::zero();
            for k in 0..6 {
                uc += u_convected.vector_at_node(nodes[k]) * n2[k];
                wc += w_convected.values[nodes[k]] * n2[k];
                if solid {
                    let dk = d_n.vector_at_node(nodes[k]);
                    grad_d.m[0][0] += dk.x * pg[k].x;
                    grad_d.m[0][1] += dk.x * pg[k].y;
                    grad_d.m[1][0] += dk.y * pg[k].x;
                    grad_d.m[1][1] += dk.y * pg[k].y;
                }
            }
            let elast_n = if solid {
                elastic_tensor(grad_d)
            } else {
                Mat2::zero()
            };

            // Velocity-velocity and velocity-microrotation blocks.
            for a in 0..6 {
                let ga = pg[a];
                let na = n2[a];
                // curl of the two vector basis functions of node a.
                let curl_a = [-ga.y, ga.x];
                for c in 0..2 {
                    let row = 2 * a + c;

                    // RHS: convected mass, body force, explicit elastic term.
                    let f_c = if c == 0 {
                        params.body_force.x
                    } else {
                        params.body_force.y
                    };
                    let uc_c = if c == 0 { uc.x } else { uc.y };
                    let mut r = wq * na * (mass_u * uc_c + f_c);
                    if solid {
                        let ega = elast_n.apply(ga);
                        let ega_c = if c == 0 { ega.x } else { ega.y };
                        r -= wq * params.c3 * ega_c;
                    }
                    local_rhs[row] += r;

                    for b in 0..6 {
                        let gb = pg[b];
                        let nb = n2[b];
                        for d in 0..2 {
                            let col = 2 * b + d;
                            let delta = if c == d { R::one() } else { R::zero() };
                            // Mass: rho/dt (u, u~).
                            let mut v = delta * mass_u * na * nb;
                            // Viscous: (mu + mu_r) eps-form,
                            // delta_cd (ga.gb) + gb_c ga_d.
                            let gb_c = if c == 0 { gb.x } else { gb.y };
                            let ga_d = if d == 0 { ga.x } else { ga.y };
                            let sym = delta * ga.dot(gb) + gb_c * ga_d;
                            v += visc * sym;
                            if solid {
                                // Implicit elastic increment:
                                // c3 dt [sym - delta_cd (m.ga) - ga_d m_c],
                                // m = grad(d) gb.
                                let m = grad_d.apply(gb);
                                let m_c = if c == 0 { m.x } else { m.y };
                                v += c3dt * (sym - delta * m.dot(ga) - ga_d * m_c);
                            }
                            if v != R::zero() {
                                local[row][col] += wq * v;
                            }
                        }
                    }

                    // Coupling -2 mu_r (omega, curl u~).
                    if coup != R::zero() {
                        for j in 0..6 {
                            local[row][W_OFF + j] -= wq * coup * n2[j] * curl_a[c];
                        }
                    }

                    // Pressure coupling -(p, div u~) and its transpose.
                    let div_ac = if c == 0 { ga.x } else { ga.y };
                    for j in 0..3 {
                        let v = wq * n1[j] * div_ac;
                        local[row][P_OFF + j] -= v;
                        local[P_OFF + j][row] -= v;
                    }
                }
            }

            // Microrotation rows.
            for i in 0..6 {
                let row = W_OFF + i;
                local_rhs[row] += wq * n2[i] * (mass_w * wc + params.body_couple);
                for j in 0..6 {
                    let v = (mass_w + react_w) * n2[i] * n2[j] + stiff_w * pg[i].dot(pg[j]);
                    local[row][W_OFF + j] += wq * v;
                }
                if coup != R::zero() {
                    for b in 0..6 {
                        let curl_b = [-pg[b].y, pg[b].x];
                        for d in 0..2 {
                            local[row][2 * b + d] -= wq * coup * n2[i] * curl_b[d];
                        }
                    }
                }
            }

            // Pressure penalty zeta (p, p~).
            for i in 0..3 {
                for j in 0..3 {
                    local[P_OFF + i][P_OFF + j] += wq * params.zeta * n1[i] * n1[j];
                }
            }
        }

        // Scatter.
        let mut global = [0usize; N_LOCAL];
        for k in 0..6 {
            global[2 * k] = dofs.velocity_dof(nodes[k], 0);
            global[2 * k + 1] = dofs.velocity_dof(nodes[k], 1);
            global[W_OFF + k] = w_base + nodes[k];
        }
        for k in 0..3 {
            global[P_OFF + k] = p_base + pdofs[k];
        }
        for (i, row) in local.iter().enumerate() {
            let gi = global[i] as u32;
            for (j, &v) in row.iter().enumerate() {
                if v != R::zero() {
                    triplets.push((gi, global[j] as u32, v));
                }
            }
            rhs[global[i]] += local_rhs[i];
        }
    }

    Ok(SparseSystem {
        n,
        triplets,
        rhs,
        blocks,
        dirichlet: vec![None; n],
    })
}

/// Collects the prescribed value of every Dirichlet dof at time `t`.
pub fn dirichlet_values<R: Real>(
    bcs: &BoundaryConditions<R>,
    dofs: &DofMap,
    mesh: &Mesh<R>,
    t: R,
) -> Result<Vec<Option<R>>, AssemblyError> {
    let blocks = BlockRanges::new(dofs);
    let ramp = if bcs.ramp_time > R::zero() && t < bcs.ramp_time {
        let pi = R::of(std::f64::consts::PI);
        (R::one() - (pi * t / bcs.ramp_time).cos()) * R::of(0.5)
    } else {
        R::one()
    };
    let mut values: Vec<Option<R>> = vec![None; blocks.n_total()];
    let mut set = |dof: usize, v: R| -> Result<(), AssemblyError> {
        match values[dof] {
            Some(old) if old != v => Err(AssemblyError::ConflictingBc { dof }),
            _ => {
                values[dof] = Some(v);
                Ok(())
            }
        }
    };

    for (label, vel_bc, w_bc) in &bcs.entries {
        let nodes = mesh.boundary_p2_nodes(*label);
        for &node in &nodes {
            match *vel_bc {
                VelocityBc::NoSlip => {
                    set(dofs.velocity_dof(node, 0), R::zero())?;
                    set(dofs.velocity_dof(node, 1), R::zero())?;
                }
                VelocityBc::Parabolic { u_bar, height } => {
                    let y = mesh.p2_coord(node).y;
                    let ux = crate::physics::inlet_profile(y, u_bar, height).map_err(|_| {
                        AssemblyError::FieldSize(format!("inlet node at y = {y} outside profile"))
                    })?;
                    set(dofs.velocity_dof(node, 0), ramp * ux)?;
                    set(dofs.velocity_dof(node, 1), R::zero())?;
                }
                VelocityBc::FixY(v) => {
                    set(dofs.velocity_dof(node, 1), v)?;
                }
                VelocityBc::Natural => {}
            }
            match *w_bc {
                ScalarBc::Dirichlet(v) => set(blocks.microrot.start + node, v)?,
                ScalarBc::Natural => {}
            }
        }
    }
    Ok(values)
}

/// Applies Dirichlet conditions by row replacement with column lift-off:
/// prescribed rows become identity rows with the value on the right-hand
/// side, and known values are moved to the right-hand side of the remaining
/// rows so eliminated columns keep the block symmetry.
pub fn apply_boundary_conditions<R: Real>(
    mut system: SparseSystem<R>,
    bcs: &BoundaryConditions<R>,
    dofs: &DofMap,
    mesh: &Mesh<R>,
    t: R,
) -> Result<SparseSystem<R>, AssemblyError> {
    let values = dirichlet_values(bcs, dofs, mesh, t)?;

    let mut kept = Vec::with_capacity(system.triplets.len());
    for &(r, c, v) in &system.triplets {
        let (ri, ci) = (r as usize, c as usize);
        if values[ri].is_some() {
            continue;
        }
        if let Some(g) = values[ci] {
            system.rhs[ri] -= v * g;
            continue;
        }
        kept.push((r, c, v));
    }
    for (i, v) in values.iter().enumerate() {
        if let Some(g) = *v {
            kept.push((i as u32, i as u32, R::one()));
            system.rhs[i] = g;
        }
    }
    system.triplets = kept;
    system.dirichlet = values;
    Ok(system)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::build_spaces;
    use crate::mesh::{generate_rect_mesh, BoundaryEdge, Mesh};
    use rand::{Rng, SeedableRng};
    use std::collections::HashMap;

    fn single_triangle() -> Mesh<f64> {
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

    fn zero_fields(dofs: &DofMap) -> (Field<f64>, Field<f64>, Field<f64>) {
        (
            dofs.zero_field(SpaceTag::VectorP2),
            dofs.zero_field(SpaceTag::VectorP2),
            dofs.zero_field(SpaceTag::ScalarP2),
        )
    }

    fn assemble_default(
        mesh: &Mesh<f64>,
        params: &PhysicalParams<f64>,
        dt: f64,
    ) -> (SparseSystem<f64>, DofMap) {
        let dofs = build_spaces(mesh).unwrap();
        let (d, uc, wc) = zero_fields(&dofs);
        let sys = assemble_system(
            mesh,
            &dofs,
            params,
            dt,
            &d,
            &uc,
            &wc,
            &AssemblyOptions::default(),
        )
        .unwrap();
        (sys, dofs)
    }

    #[test]
    fn elastic_tensor_examples() {
        let z = elastic_tensor(Mat2::<f64>::zero());
        assert_eq!(z, Mat2::zero());

        let a: f64 = 0.37;
        let e = elastic_tensor(Mat2::new(a, 0.0, 0.0, 0.0));
        assert!((e.m[0][0] - (2.0 * a - a * a)).abs() < 1e-15);
        assert_eq!(e.m[0][1], 0.0);
        assert_eq!(e.m[1][0], 0.0);
        assert_eq!(e.m[1][1], 0.0);
    }

    #[test]
    fn elastic_tensor_matches_dense_algebra() {
        // Independent dense routine on plain nested arrays.
        fn dense(g: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
            let mut out = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let mut prod = 0.0;
                    for k in 0..2 {
                        prod += g[i][k] * g[j][k]; // grad d * grad d^T
                    }
                    out[i][j] = g[i][j] + g[j][i] - prod;
                }
            }
            out
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let g = [
                [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            ];
            let want = dense(g);
            let got = elastic_tensor(Mat2 { m: g });
            for i in 0..2 {
                for j in 0..2 {
                    assert!((got.m[i][j] - want[i][j]).abs() <= 1e-14);
                }
            }
            // Symmetry.
            assert!((got.m[0][1] - got.m[1][0]).abs() <= 1e-15);
        }
    }

    #[test]
    fn curl_and_rot_examples() {
        // Rigid rotation u = (-y, x).
        assert_eq!(curl_of_vector(Mat2::new(0.0, -1.0, 1.0, 0.0)), 2.0);
        // Irrotational u = (x, y).
        assert_eq!(curl_of_vector(Mat2::new(1.0, 0.0, 0.0, 1.0)), 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let g = Mat2::new(
                rng.gen::<f64>(),
                rng.gen::<f64>(),
                rng.gen::<f64>(),
                rng.gen::<f64>(),
            );
            assert_eq!(curl_of_vector(g), g.m[1][0] - g.m[0][1]);
        }

        assert_eq!(rot_of_scalar(Vec2::new(1.0, 0.0)), Vec2::new(0.0, -1.0));
        assert_eq!(rot_of_scalar(Vec2::new(0.0, 1.0)), Vec2::new(1.0, 0.0));
        assert_eq!(rot_of_scalar(Vec2::<f64>::zero()), Vec2::zero());
    }

    fn block_entries(
        sys: &SparseSystem<f64>,
        rows: &Range<usize>,
        cols: &Range<usize>,
    ) -> HashMap<(usize, usize), f64> {
        let mut map = HashMap::new();
        for &(r, c, v) in &sys.triplets {
            let (r, c) = (r as usize, c as usize);
            if rows.contains(&r) && cols.contains(&c) {
                *map.entry((r - rows.start, c - cols.start)).or_insert(0.0) += v;
            }
        }
        map
    }

    #[test]
    fn penalty_block_is_scaled_p1_mass_matrix() {
        let mesh = single_triangle();
        let params = PhysicalParams::<f64>::default();
        let (sys, _) = assemble_default(&mesh, &params, 0.01);
        let p = block_entries(&sys, &sys.blocks.pressure.clone(), &sys.blocks.pressure.clone());
        let area = 0.5;
        let zeta = params.zeta;
        for i in 0..3 {
            for j in 0..3 {
                let want = zeta * area / 12.0 * if i == j { 2.0 } else { 1.0 };
                let got = p.get(&(i, j)).copied().unwrap_or(0.0);
                assert!(
                    (got - want).abs() <= 1e-12 * zeta,
                    "penalty ({i},{j}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn zero_mu_r_has_no_coupling_blocks() {
        let mesh = generate_rect_mesh::<f64>(1.0, 1.0, 3, 3).unwrap();
        let params = PhysicalParams::<f64> {
            mu_r: 0.0,
            ..Default::default()
        };
        let (sys, _) = assemble_default(&mesh, &params, 0.01);
        let uw = block_entries(&sys, &sys.blocks.velocity.clone(), &sys.blocks.microrot.clone());
        let wu = block_entries(&sys, &sys.blocks.microrot.clone(), &sys.blocks.velocity.clone());
        assert!(uw.is_empty());
        assert!(wu.is_empty());
    }

    #[test]
    fn coupling_blocks_are_exact_transposes() {
        let mesh = generate_rect_mesh::<f64>(1.3, 0.7, 4, 3).unwrap();
        let params = PhysicalParams::<f64>::default();
        let (sys, _) = assemble_default(&mesh, &params, 0.01);
        let uw = block_entries(&sys, &sys.blocks.velocity.clone(), &sys.blocks.microrot.clone());
        let wu = block_entries(&sys, &sys.blocks.microrot.clone(), &sys.blocks.velocity.clone());
        assert_eq!(uw.len(), wu.len());
        assert!(!uw.is_empty());
        for (&(r, c), &v) in &uw {
            let vt = wu.get(&(c, r)).copied().unwrap_or(0.0);
            assert!(
                (v - vt).abs() <= 1e-12 * v.abs().max(1.0),
                "B_uw[{r},{c}] = {v} vs B_wu[{c},{r}] = {vt}"
            );
        }
    }

    #[test]
    fn velocity_block_is_symmetric_positive_definite_without_displacement() {
        let mesh = generate_rect_mesh::<f64>(1.0, 0.6, 3, 2).unwrap();
        let params = PhysicalParams::<f64>::default();
        let (sys, _) = assemble_default(&mesh, &params, 0.01);
        let uu = block_entries(&sys, &sys.blocks.velocity.clone(), &sys.blocks.velocity.clone());
        let nu = sys.blocks.velocity.len();
        for (&(r, c), &v) in &uu {
            let vt = uu.get(&(c, r)).copied().unwrap_or(0.0);
            assert!((v - vt).abs() <= 1e-12 * v.abs().max(1.0));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let x: Vec<f64> = (0..nu).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut quad = 0.0;
            for (&(r, c), &v) in &uu {
                quad += x[r] * v * x[c];
            }
            assert!(quad >= -1e-10, "u-block must be PSD, got {quad}");
        }
    }

    #[test]
    fn microrotation_block_is_symmetric_positive_definite() {
        let mesh = generate_rect_mesh::<f64>(1.0, 0.6, 3, 2).unwrap();
        let params = PhysicalParams::<f64>::default();
        let (sys, _) = assemble_default(&mesh, &params, 0.01);
        let ww = block_entries(&sys, &sys.blocks.microrot.clone(), &sys.blocks.microrot.clone());
        let nw = sys.blocks.microrot.len();
        for (&(r, c), &v) in &ww {
            let vt = ww.get(&(c, r)).copied().unwrap_or(0.0);
            assert!((v - vt).abs() <= 1e-12 * v.abs().max(1.0));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let x: Vec<f64> = (0..nw).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut quad = 0.0;
            for (&(r, c), &v) in &ww {
                quad += x[r] * v * x[c];
            }
            assert!(quad > 0.0);
        }
    }

    #[test]
    fn rigid_rotation_is_micropolar_equilibrium() {
        // The micropolar reaction of the omega equation, 4 mu_r omega -
        // 2 mu_r curl(u), must vanish elementwise for u = (-Om y, Om x),
        // omega = Om. Isolate those terms as the difference between
        // assemblies with mu_r > 0 and mu_r = 0.
        let mesh = generate_rect_mesh::<f64>(0.8, 0.8, 3, 3).unwrap();
        let dofs = build_spaces(&mesh).unwrap();
        let omega0 = 1.7;
        let params = PhysicalParams::<f64>::default();
        let params0 = PhysicalParams::<f64> {
            mu_r: 0.0,
            ..params.clone()
        };
        let (d, uc, wc) = zero_fields(&dofs);
        let opts = AssemblyOptions::default();
        let sys = assemble_system(&mesh, &dofs, &params, 0.01, &d, &uc, &wc, &opts).unwrap();
        let sys0 = assemble_system(&mesh, &dofs, &params0, 0.01, &d, &uc, &wc, &opts).unwrap();

        let mut x = vec![0.0f64; sys.n];
        let u = Field::from_vector_fn(&mesh, |p| Vec2::new(-omega0 * p.y, omega0 * p.x));
        for i in 0..dofs.n_velocity() {
            x[i] = u.values[i];
        }
        for k in 0..dofs.n_microrot() {
            x[sys.blocks.microrot.start + k] = omega0;
        }

        let y = sys.apply(&x);
        let y0 = sys0.apply(&x);
        let scale = params.mu_r * omega0;
        for i in sys.blocks.microrot.clone() {
            let micro = y[i] - y0[i];
            assert!(
                micro.abs() <= 1e-12 * scale.max(1.0),
                "micropolar residual {micro} at row {i}"
            );
        }
    }

    #[test]
    fn solid_rhs_vanishes_with_zero_displacement() {
        let mesh = Mesh::from_parts(
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
        let params = PhysicalParams::<f64>::default();
        let (sys, _) = assemble_default(&mesh, &params, 0.01);
        for &v in &sys.rhs {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn sparsity_couples_only_shared_triangles() {
        let mesh = generate_rect_mesh::<f64>(1.0, 1.0, 3, 3).unwrap();
        let dofs = build_spaces(&mesh).unwrap();
        let (sys, _) = assemble_default(&mesh, &PhysicalParams::default(), 0.01);

        // dof -> set of triangles touching it.
        let blocks = &sys.blocks;
        let mut touch: Vec<Vec<usize>> = vec![Vec::new(); sys.n];
        for t in 0..mesh.n_triangles() {
            for node in mesh.p2_nodes(t) {
                touch[dofs.velocity_dof(node, 0)].push(t);
                touch[dofs.velocity_dof(node, 1)].push(t);
                touch[blocks.microrot.start + node].push(t);
            }
            for p in dofs.pressure_dofs(t) {
                touch[blocks.pressure.start + p].push(t);
            }
        }
        for &(r, c, _) in &sys.triplets {
            let shared = touch[r as usize]
                .iter()
                .any(|t| touch[c as usize].contains(t));
            assert!(shared, "entry ({r}, {c}) couples unrelated dofs");
        }
    }

    #[test]
    fn wall_dirichlet_rows_become_identity() {
        let mesh = generate_rect_mesh::<f64>(1.0, 0.41, 4, 4).unwrap();
        let dofs = build_spaces(&mesh).unwrap();
        let params = PhysicalParams::<f64>::default();
        let (d, uc, wc) = zero_fields(&dofs);
        let sys = assemble_system(
            &mesh,
            &dofs,
            &params,
            0.01,
            &d,
            &uc,
            &wc,
            &AssemblyOptions::default(),
        )
        .unwrap();
        // Evaluate past the startup ramp so the full profile applies.
        let bcs = BoundaryConditions::benchmark(2.0, 0.41, 0.0);
        let sys = apply_boundary_conditions(sys, &bcs, &dofs, &mesh, 10.0).unwrap();

        let wall_nodes = mesh.boundary_p2_nodes(BoundaryLabel::Wall);
        let node = wall_nodes[1];
        let row = dofs.velocity_dof(node, 0);
        let entries: Vec<_> = sys
            .triplets
            .iter()
            .filter(|&&(r, _, _)| r as usize == row)
            .collect();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].1 as usize, row);
        assert_eq!(entries[0].2, 1.0);
        assert_eq!(sys.rhs[row], 0.0);

        // Midline inlet node carries the profile maximum 1.5 * U_bar = 3.
        let inlet_nodes = mesh.boundary_p2_nodes(BoundaryLabel::Inlet);
        let mid = inlet_nodes
            .iter()
            .copied()
            .find(|&n| (mesh.p2_coord(n).y - 0.205).abs() < 1e-12)
            .expect("midline inlet node");
        assert!((sys.rhs[dofs.velocity_dof(mid, 0)] - 3.0).abs() < 1e-14);
        assert_eq!(sys.rhs[dofs.velocity_dof(mid, 1)], 0.0);
        // Microrotation is clamped on the inlet.
        assert_eq!(sys.rhs[sys.blocks.microrot.start + mid], 0.0);
        assert!(sys.dirichlet[sys.blocks.microrot.start + mid].is_some());
    }

    #[test]
    fn invalid_dt_and_params_are_rejected() {
        let mesh = single_triangle();
        let dofs = build_spaces(&mesh).unwrap();
        let (d, uc, wc) = zero_fields(&dofs);
        let params = PhysicalParams::<f64>::default();
        assert!(matches!(
            assemble_system(
                &mesh,
                &dofs,
                &params,
                0.0,
                &d,
                &uc,
                &wc,
                &AssemblyOptions::default()
            ),
            Err(AssemblyError::InvalidDt(_))
        ));
        let bad = PhysicalParams::<f64> {
            mu: -1.0,
            ..Default::default()
        };
        assert!(matches!(
            assemble_system(
                &mesh,
                &dofs,
                &bad,
                0.01,
                &d,
                &uc,
                &wc,
                &AssemblyOptions::default()
            ),
            Err(AssemblyError::InvalidParams(_))
        ));
    }
}
