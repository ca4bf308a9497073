//! Parameter validation, benchmark inflow/Reynolds helpers, and the
//! independent micropolar Poiseuille oracle used by verification tests.
//!
//! The oracle discretizes the unidirectional strong-form equations
//!
//! ```text
//! (mu + mu_r) u'' + 2 mu_r w'  = G
//! lambda1 w'' - 4 mu_r w - 2 mu_r u' = 0,    u(0)=u(H)=w(0)=w(H)=0
//! ```
//!
//! with second-order central differences and solves the resulting 2x2
//! block-tridiagonal system directly. It shares no code with the
//! finite-element assembly it referees.

use crate::assembly::PhysicalParams;
use crate::linalg::{Mat2, Vec2};
use crate::real::Real;
use std::fmt;

/// Two-point channel profile samples.
#[derive(Debug, Clone)]
pub struct ChannelProfile<R> {
    pub y: Vec<R>,
    pub u: Vec<R>,
    pub omega: Vec<R>,
    pub pressure_gradient: R,
    /// Maximum absolute residual of the discrete equations.
    pub residual: R,
}

impl<R: Real> ChannelProfile<R> {
    pub fn centerline_u(&self) -> R {
        self.u[self.u.len() / 2]
    }

    pub fn max_abs_omega(&self) -> R {
        self.omega
            .iter()
            .fold(R::zero(), |acc, &w| acc.max(w.abs()))
    }

    /// Two-column CSV (`y,value`) per field.
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "y,u,omega")?;
        for i in 0..self.y.len() {
            writeln!(w, "{},{},{}", self.y[i], self.u[i], self.omega[i])?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum PhysicsError {
    OutOfRange(String),
    Singular(String),
}

impl fmt::Display for PhysicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhysicsError::OutOfRange(msg) => write!(f, "out of range: {msg}"),
            PhysicsError::Singular(msg) => write!(f, "singular 1D system: {msg}"),
        }
    }
}

impl std::error::Error for PhysicsError {}

/// Result of parameter validation: hard violations and advisory warnings.
#[derive(Debug, Clone, Default)]
pub struct ParamCheck {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ParamCheck {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_params<R: Real>(p: &PhysicalParams<R>) -> ParamCheck {
    let mut check = ParamCheck::default();
    let mut require = |ok: bool, msg: &str| {
        if !ok {
            check.violations.push(msg.to_string());
        }
    };
    require(p.rho_f > R::zero(), "rho_f > 0 required");
    require(p.rho_s > R::zero(), "rho_s > 0 required");
    require(p.mu > R::zero(), "mu > 0 required");
    require(p.mu_r >= R::zero(), "mu_r >= 0 required");
    require(p.lambda1 > R::zero(), "lambda1 > 0 required");
    require(p.micro_inertia > R::zero(), "micro inertia I > 0 required");
    require(p.c3 > R::zero(), "c3 > 0 required");
    require(
        p.zeta > R::zero() && p.zeta < R::one(),
        "0 < zeta << 1 required",
    );
    if p.lambda2 != R::zero() {
        check.warnings.push(
            "lambda2 != 0 has no effect in 2D: the microrotation is the scalar \
             out-of-plane component, so its divergence vanishes identically"
                .to_string(),
        );
    }
    check
}

/// Parabolic inlet profile `u(y) = U_bar * 6 y (H - y) / H^2` with mean
/// `U_bar` over `[0, H]`.
pub fn inlet_profile<R: Real>(y: R, u_bar: R, height: R) -> Result<R, PhysicsError> {
    if y < R::zero() || y > height {
        return Err(PhysicsError::OutOfRange(format!(
            "y = {y} outside channel [0, {height}]"
        )));
    }
    Ok(u_bar * R::of(6.0) * y * (height - y) / (height * height))
}

/// Reynolds number `U_bar * D / nu`.
pub fn reynolds_number<R: Real>(u_bar: R, diameter: R, nu: R) -> R {
    u_bar * diameter / nu
}

/// Solves the coupled 1D micropolar Poiseuille problem on `n + 1` points.
///
/// `g` is the driving pressure gradient; negative `g` drives flow in `+x`.
/// The returned profile reports the maximum residual of the discrete
/// equations, which must not exceed `1e-8` for a trustworthy solve.
pub fn poiseuille_micropolar_oracle<R: Real>(
    params: &PhysicalParams<R>,
    g: R,
    height: R,
    n: usize,
) -> Result<ChannelProfile<R>, PhysicsError> {
    if n < 1000 {
        return Err(PhysicsError::OutOfRange(format!(
            "grid size {n} < 1000 gives an untrustworthy oracle"
        )));
    }
    if !(height > R::zero()) {
        return Err(PhysicsError::OutOfRange("height must be positive".into()));
    }
    let mu_eff = params.mu + params.mu_r;
    if !(mu_eff > R::zero()) {
        return Err(PhysicsError::Singular("mu + mu_r must be positive".into()));
    }
    if !(params.lambda1 > R::zero()) && params.mu_r > R::zero() {
        return Err(PhysicsError::Singular(
            "lambda1 = 0 with mu_r > 0".into(),
        ));
    }

    let h = height / R::of(n as f64);
    let inv_h2 = R::one() / (h * h);
    let inv_2h = R::one() / (h * R::of(2.0));
    let mu_r = params.mu_r;
    let l1 = params.lambda1;
    let two = R::of(2.0);
    let four = R::of(4.0);

    // Interior unknown pairs (u_i, w_i), i = 1..n-1, block-tridiagonal:
    //   lower C (u,w)_{i-1} + diag A (u,w)_i + upper B (u,w)_{i+1} = rhs.
    let m = n - 1;
    let diag = Mat2::new(
        -two * mu_eff * inv_h2,
        R::zero(),
        R::zero(),
        -two * l1 * inv_h2 - four * mu_r,
    );
    let upper = Mat2::new(mu_eff * inv_h2, two * mu_r * inv_2h, -two * mu_r * inv_2h, l1 * inv_h2);
    let lower = Mat2::new(mu_eff * inv_h2, -two * mu_r * inv_2h, two * mu_r * inv_2h, l1 * inv_h2);
    let rhs = Vec2::new(g, R::zero());

    // Block Thomas elimination.
    let mut dmod: Vec<Mat2<R>> = Vec::with_capacity(m);
    let mut rmod: Vec<Vec2<R>> = Vec::with_capacity(m);
    dmod.push(diag);
    rmod.push(rhs);
    for i in 1..m {
        let factor = dmod[i - 1].det();
        if factor.abs() < R::of(1e-300) {
            return Err(PhysicsError::Singular("zero pivot block".into()));
        }
        let linv = lower * dmod[i - 1].inverse();
        dmod.push(diag - linv * upper);
        let correction = linv.apply(rmod[i - 1]);
        rmod.push(rhs - correction);
    }

    let mut sol = vec![Vec2::<R>::zero(); m];
    sol[m - 1] = dmod[m - 1].inverse().apply(rmod[m - 1]);
    for i in (0..m - 1).rev() {
        let b = rmod[i] - upper.apply(sol[i + 1]);
        sol[i] = dmod[i].inverse().apply(b);
    }

    let mut y = Vec::with_capacity(n + 1);
    let mut u = Vec::with_capacity(n + 1);
    let mut omega = Vec::with_capacity(n + 1);
    y.push(R::zero());
    u.push(R::zero());
    omega.push(R::zero());
    for (i, s) in sol.iter().enumerate() {
        y.push(h * R::of((i + 1) as f64));
        u.push(s.x);
        omega.push(s.y);
    }
    y.push(height);
    u.push(R::zero());
    omega.push(R::zero());

    // Residual of the discrete equations at interior nodes.
    let mut residual = R::zero();
    for i in 1..n {
        let upp = (u[i + 1] - two * u[i] + u[i - 1]) * inv_h2;
        let wpp = (omega[i + 1] - two * omega[i] + omega[i - 1]) * inv_h2;
        let wp = (omega[i + 1] - omega[i - 1]) * inv_2h;
        let up = (u[i + 1] - u[i - 1]) * inv_2h;
        let r1 = mu_eff * upp + two * mu_r * wp - g;
        let r2 = l1 * wpp - four * mu_r * omega[i] - two * mu_r * up;
        residual = residual.max(r1.abs()).max(r2.abs());
    }

    Ok(ChannelProfile {
        y,
        u,
        omega,
        pressure_gradient: g,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_params() -> PhysicalParams<f64> {
        PhysicalParams {
            mu: 1e-3,
            mu_r: 1e-3,
            lambda1: 1e-4,
            ..PhysicalParams::default()
        }
    }

    #[test]
    fn benchmark_defaults_pass_validation() {
        let p: PhysicalParams<f64> = PhysicalParams::default();
        assert!(validate_params(&p).is_ok());
    }

    #[test]
    fn invalid_params_are_reported() {
        let mut p: PhysicalParams<f64> = PhysicalParams::default();
        p.mu = 0.0;
        let check = validate_params(&p);
        assert!(!check.is_ok());
        assert!(check.violations.iter().any(|v| v.contains("mu > 0")));

        let mut p: PhysicalParams<f64> = PhysicalParams::default();
        p.mu_r = -1.0;
        assert!(!validate_params(&p).is_ok());
    }

    #[test]
    fn lambda2_warning_is_nonfatal() {
        let mut p: PhysicalParams<f64> = PhysicalParams::default();
        p.lambda2 = 0.5;
        let check = validate_params(&p);
        assert!(check.is_ok());
        assert_eq!(check.warnings.len(), 1);
    }

    #[test]
    fn inlet_profile_values() {
        assert_eq!(inlet_profile::<f64>(0.0, 2.0, 0.41).unwrap(), 0.0);
        let mid = inlet_profile::<f64>(0.205, 2.0, 0.41).unwrap();
        assert!((mid - 3.0).abs() < 1e-14);
        assert!(inlet_profile::<f64>(0.5, 2.0, 0.41).is_err());
    }

    #[test]
    fn inlet_profile_mean_is_u_bar() {
        // Simpson's rule, exact for the quadratic profile.
        let h = 0.41;
        let n = 100;
        let mut sum = 0.0;
        for i in 0..=n {
            let y = h * i as f64 / n as f64;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            sum += w * inlet_profile::<f64>(y, 2.0, h).unwrap();
        }
        let mean = sum * (h / n as f64) / 3.0 / h;
        assert!((mean - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reynolds_number_benchmark_is_200() {
        assert!((reynolds_number::<f64>(2.0, 0.1, 1e-3) - 200.0).abs() < 1e-12);
        assert_eq!(reynolds_number::<f64>(1.0, 1.0, 1.0), 1.0);
        assert_eq!(
            reynolds_number::<f64>(2.0, 0.7, 0.3),
            2.0 * reynolds_number::<f64>(1.0, 0.7, 0.3)
        );
    }

    #[test]
    fn oracle_classical_limit_is_parabolic() {
        let mut p = reference_params();
        p.mu_r = 0.0;
        let prof = poiseuille_micropolar_oracle(&p, -1.0, 0.41, 2000).unwrap();
        assert!(prof.residual <= 1e-8);
        for i in 0..prof.y.len() {
            let y = prof.y[i];
            let exact = -1.0 * y * (y - 0.41) / (2.0 * p.mu);
            assert!(
                (prof.u[i] - exact).abs() <= 1e-9 * (1.0 + exact.abs()),
                "u({y}) = {} vs {exact}",
                prof.u[i]
            );
            assert!(prof.omega[i].abs() <= 1e-12);
        }
    }

    #[test]
    fn oracle_symmetry() {
        let p = reference_params();
        let prof = poiseuille_micropolar_oracle(&p, -1.0, 0.41, 2000).unwrap();
        assert!(prof.residual <= 1e-8);
        let n = prof.y.len() - 1;
        for i in 0..=n {
            // u symmetric, omega antisymmetric about the midline.
            assert!((prof.u[i] - prof.u[n - i]).abs() <= 1e-9 * (1.0 + prof.u[i].abs()));
            assert!((prof.omega[i] + prof.omega[n - i]).abs() <= 1e-9);
        }
        assert!(prof.omega[n / 2].abs() <= 1e-10);
    }

    #[test]
    fn oracle_richardson_second_order() {
        let p = reference_params();
        let coarse = poiseuille_micropolar_oracle(&p, -1.0, 0.41, 1000).unwrap();
        let mid = poiseuille_micropolar_oracle(&p, -1.0, 0.41, 2000).unwrap();
        let fine = poiseuille_micropolar_oracle(&p, -1.0, 0.41, 4000).unwrap();
        // Each refinement shares every other node with the next.
        let diff = |a: &ChannelProfile<f64>, b: &ChannelProfile<f64>| {
            let mut d = 0.0f64;
            for i in 0..a.y.len() {
                d = d.max((a.u[i] - b.u[2 * i]).abs());
                d = d.max((a.omega[i] - b.omega[2 * i]).abs());
            }
            d
        };
        let d1 = diff(&coarse, &mid);
        let d2 = diff(&mid, &fine);
        let rate = d1 / d2;
        assert!(
            (3.0..5.0).contains(&rate),
            "expected ~4x reduction, got {rate} ({d1} -> {d2})"
        );
    }

    #[test]
    fn oracle_mu_r_sweep_damps_centerline() {
        let p = reference_params();
        let mut last = f64::INFINITY;
        for factor in [0.0, 0.5, 1.0, 2.0] {
            let mut q = p.clone();
            q.mu_r = p.mu * factor;
            let prof = poiseuille_micropolar_oracle(&q, -1.0, 0.41, 2000).unwrap();
            let center = prof.centerline_u();
            assert!(
                center <= last * (1.0 + 1e-12),
                "centerline velocity must not increase with mu_r"
            );
            last = center;
        }
    }

    #[test]
    fn oracle_lambda1_sweep_damps_microrotation() {
        let p = reference_params();
        let mut last = f64::INFINITY;
        for factor in [1.0, 10.0, 100.0] {
            let mut q = p.clone();
            q.lambda1 = p.lambda1 * factor;
            let prof = poiseuille_micropolar_oracle(&q, -1.0, 0.41, 2000).unwrap();
            let peak = prof.max_abs_omega();
            assert!(peak < last, "max |omega| must decrease with lambda1");
            last = peak;
        }
    }

    #[test]
    fn oracle_rejects_small_grids_and_singular_input() {
        let p = reference_params();
        assert!(poiseuille_micropolar_oracle(&p, -1.0, 0.41, 10).is_err());
        let mut q = p.clone();
        q.lambda1 = 0.0;
        assert!(matches!(
            poiseuille_micropolar_oracle(&q, -1.0, 0.41, 2000),
            Err(PhysicsError::Singular(_))
        ));
    }
}
