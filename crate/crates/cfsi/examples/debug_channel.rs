use cfsi::assembly::BoundaryConditions;
use cfsi::fespace::{build_spaces, field_norms};
use cfsi::mesh::generate_rect_mesh;
use cfsi::timeloop::{State, StepOptions, Stepper};
use cfsi::verify::ChannelCase;
use cfsi::linalg::Vec2;

fn main() {
    let case = ChannelCase::<f64>::reference(40, 10);
    let mut params = case.params.clone();
    params.body_force = Vec2::new(-case.g, 0.0);
    let mesh = generate_rect_mesh::<f64>(case.length, case.height, case.nx, case.ny).unwrap();
    let dofs = build_spaces(&mesh).unwrap();
    let mut state = State::rest(&dofs);
    let mut stepper = Stepper::new(params, BoundaryConditions::channel_forced(), StepOptions::default());
    let mut mesh = mesh;
    for n in 1..=40 {
        let prev = state.u.values.clone();
        let (next, m2, _, rep) = stepper.advance(&state, &mesh, &dofs, case.dt).unwrap();
        state = next;
        mesh = m2;
        let du: f64 = state.u.values.iter().zip(&prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let nu: f64 = state.u.values.iter().map(|a| a * a).sum::<f64>().sqrt();
        let norms = field_norms(&state.u, &dofs, &mesh);
        let wmax = state.w.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let umax = state.u.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if n <= 10 || n % 10 == 0 {
            println!(
                "step {n:3}  |u|={:.4e} rel={:.3e} umax={:.3e} wmax={:.3e} div={:.2e} res={:.1e}",
                norms.l2, du / nu.max(1e-300), umax, wmax, norms.div_l2.unwrap(), rep.solve_residual
            );
        }
    }
}
