//! Flat `key = value` configuration with `#` comments and dotted section
//! prefixes. Unknown keys are rejected; omitted keys take the benchmark
//! defaults. `parse(render(parse(text)))` is a fixed point.

use crate::assembly::PhysicalParams;
use crate::linalg::Vec2;
use crate::mesh::GeometryParams;
use crate::real::Real;
use crate::solver::SolverBackend;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryKind {
    /// Flag-behind-cylinder benchmark channel.
    Benchmark,
    /// Plain rectangular channel (verification runs).
    Channel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    /// Parabolic inlet, no-slip walls, do-nothing outlet.
    InletProfile,
    /// Body-force driven channel: no-slip walls, transverse velocity pinned
    /// at both ends.
    Forced,
}

#[derive(Debug, Clone)]
pub struct ChannelConfig {
    pub length: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone)]
pub struct NumericsConfig<R> {
    pub dt: R,
    pub t_end: R,
    pub mesh_level: usize,
    pub solver: SolverBackend,
    pub snapshot_every: usize,
    pub viscous_in_solid: bool,
    /// Time from which line-probe statistics are accumulated.
    pub profile_avg_start: R,
    pub write_mesh_snapshots: bool,
}

#[derive(Debug, Clone)]
pub struct BcsConfig<R> {
    pub u_bar: R,
    pub omega_inlet: R,
    pub kind: BcKind,
    /// Smooth inlet startup ramp duration; 0 disables the ramp.
    pub ramp_time: R,
}

#[derive(Debug, Clone)]
pub struct ProbesConfig<R> {
    pub control_point: bool,
    pub line_x: Vec<R>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepConfig {
    pub param: Option<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Config<R> {
    pub geometry_kind: GeometryKind,
    pub geometry: GeometryParams<f64>,
    pub channel: ChannelConfig,
    pub params: PhysicalParams<R>,
    /// Optional paper-formula coefficient: when set, `c3 = rho_s * c1`
    /// overrides the direct `c3` value.
    pub c1: Option<f64>,
    pub numerics: NumericsConfig<R>,
    pub bcs: BcsConfig<R>,
    pub probes: ProbesConfig<R>,
    pub sweep: SweepConfig,
}

impl<R: Real> Default for Config<R> {
    fn default() -> Self {
        Self {
            geometry_kind: GeometryKind::Benchmark,
            geometry: GeometryParams::default(),
            channel: ChannelConfig {
                length: 1.0,
                height: 0.41,
                nx: 40,
                ny: 10,
            },
            params: PhysicalParams::default(),
            c1: None,
            numerics: NumericsConfig {
                dt: R::of(0.005),
                t_end: R::of(3.0),
                mesh_level: 0,
                solver: SolverBackend::Direct,
                snapshot_every: 100,
                viscous_in_solid: true,
                profile_avg_start: R::of(2.5),
                write_mesh_snapshots: false,
            },
            bcs: BcsConfig {
                u_bar: R::of(2.0),
                omega_inlet: R::zero(),
                kind: BcKind::InletProfile,
                ramp_time: R::of(2.0),
            },
            probes: ProbesConfig {
                control_point: true,
                line_x: vec![R::of(0.7)],
            },
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Syntax { line: usize, msg: String },
    UnknownKey { line: usize, key: String },
    BadValue { line: usize, key: String, msg: String },
    Invariant(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, msg } => write!(f, "line {line}: {msg}"),
            ConfigError::UnknownKey { line, key } => write!(f, "line {line}: unknown key `{key}`"),
            ConfigError::BadValue { line, key, msg } => {
                write!(f, "line {line}: bad value for `{key}`: {msg}")
            }
            ConfigError::Invariant(msg) => write!(f, "invariant violation: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parameter names that a sweep may vary.
pub const SWEEPABLE: &[&str] = &[
    "params.mu",
    "params.mu_r",
    "params.lambda1",
    "params.lambda2",
    "params.micro_inertia",
    "params.c3",
    "params.rho_f",
    "params.rho_s",
    "numerics.dt",
    "bcs.u_bar",
];

/// Applies one sweep value to a copy of the configuration.
pub fn apply_sweep_value<R: Real>(config: &Config<R>, param: &str, value: f64) -> Config<R> {
    let mut c = config.clone();
    let v = R::of(value);
    match param {
        "params.mu" => c.params.mu = v,
        "params.mu_r" => c.params.mu_r = v,
        "params.lambda1" => c.params.lambda1 = v,
        "params.lambda2" => c.params.lambda2 = v,
        "params.micro_inertia" => c.params.micro_inertia = v,
        "params.c3" => c.params.c3 = v,
        "params.rho_f" => c.params.rho_f = v,
        "params.rho_s" => c.params.rho_s = v,
        "numerics.dt" => c.numerics.dt = v,
        "bcs.u_bar" => c.bcs.u_bar = v,
        _ => unreachable!("sweep parameter validated at parse time"),
    }
    c
}

pub fn parse_config<R: Real>(text: &str) -> Result<Config<R>, ConfigError> {
    let mut c = Config::<R>::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
            line: line_no,
            msg: format!("expected `key = value`, found `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        set_key(&mut c, key, value, line_no)?;
    }

    // Resolve the paper formula for the solid coefficient.
    if let Some(c1) = c.c1 {
        c.params.c3 = c.params.rho_s * R::of(c1);
    }

    validate(&c)?;
    Ok(c)
}

fn set_key<R: Real>(
    c: &mut Config<R>,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ConfigError> {
    let bad = |msg: &str| ConfigError::BadValue {
        line,
        key: key.to_string(),
        msg: msg.to_string(),
    };
    let f = |v: &str| -> Result<f64, ConfigError> { v.parse().map_err(|_| bad("expected number")) };
    let r = |v: &str| -> Result<R, ConfigError> { Ok(R::of(f(v)?)) };
    let u = |v: &str| -> Result<usize, ConfigError> {
        v.parse().map_err(|_| bad("expected nonnegative integer"))
    };
    let b = |v: &str| -> Result<bool, ConfigError> {
        match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(bad("expected true or false")),
        }
    };

    match key {
        "geometry.kind" => {
            c.geometry_kind = match value {
                "benchmark" => GeometryKind::Benchmark,
                "channel" => GeometryKind::Channel,
                _ => return Err(bad("expected benchmark or channel")),
            }
        }
        "geometry.length" => c.geometry.length = f(value)?,
        "geometry.height" => c.geometry.height = f(value)?,
        "geometry.cylinder_x" => c.geometry.center.x = f(value)?,
        "geometry.cylinder_y" => c.geometry.center.y = f(value)?,
        "geometry.cylinder_r" => c.geometry.radius = f(value)?,
        "geometry.flag_length" => c.geometry.flag_length = f(value)?,
        "geometry.flag_thickness" => c.geometry.flag_thickness = f(value)?,
        "geometry.channel_length" => c.channel.length = f(value)?,
        "geometry.channel_height" => c.channel.height = f(value)?,
        "geometry.channel_nx" => c.channel.nx = u(value)?,
        "geometry.channel_ny" => c.channel.ny = u(value)?,
        "params.rho_f" => c.params.rho_f = r(value)?,
        "params.rho_s" => c.params.rho_s = r(value)?,
        "params.mu" => c.params.mu = r(value)?,
        "params.mu_r" => c.params.mu_r = r(value)?,
        "params.lambda1" => c.params.lambda1 = r(value)?,
        "params.lambda2" => c.params.lambda2 = r(value)?,
        "params.micro_inertia" => c.params.micro_inertia = r(value)?,
        "params.c3" => c.params.c3 = r(value)?,
        "params.c1" => c.c1 = Some(f(value)?),
        "params.f_x" => c.params.body_force.x = r(value)?,
        "params.f_y" => c.params.body_force.y = r(value)?,
        "params.g" => c.params.body_couple = r(value)?,
        "numerics.dt" => c.numerics.dt = r(value)?,
        "numerics.t_end" => c.numerics.t_end = r(value)?,
        "numerics.mesh_level" => c.numerics.mesh_level = u(value)?,
        "numerics.zeta" => c.params.zeta = r(value)?,
        "numerics.solver" => {
            c.numerics.solver = match value {
                "direct" => SolverBackend::Direct,
                "gmres" => SolverBackend::default_gmres(),
                _ => return Err(bad("expected direct or gmres")),
            }
        }
        "numerics.snapshot_every" => c.numerics.snapshot_every = u(value)?,
        "numerics.viscous_in_solid" => c.numerics.viscous_in_solid = b(value)?,
        "numerics.profile_avg_start" => c.numerics.profile_avg_start = r(value)?,
        "numerics.write_mesh_snapshots" => c.numerics.write_mesh_snapshots = b(value)?,
        "bcs.u_bar" => c.bcs.u_bar = r(value)?,
        "bcs.omega_inlet" => c.bcs.omega_inlet = r(value)?,
        "bcs.ramp_time" => c.bcs.ramp_time = r(value)?,
        "bcs.kind" => {
            c.bcs.kind = match value {
                "inlet_profile" => BcKind::InletProfile,
                "forced" => BcKind::Forced,
                _ => return Err(bad("expected inlet_profile or forced")),
            }
        }
        "probes.control_point" => c.probes.control_point = b(value)?,
        "probes.line_x" => {
            let mut xs = Vec::new();
            if !value.is_empty() {
                for part in value.split(',') {
                    xs.push(R::of(part.trim().parse().map_err(|_| bad("expected numbers"))?));
                }
            }
            c.probes.line_x = xs;
        }
        "sweep.param" => {
            if !SWEEPABLE.contains(&value) {
                return Err(bad(&format!(
                    "unknown sweep parameter (expected one of {})",
                    SWEEPABLE.join(", ")
                )));
            }
            c.sweep.param = Some(value.to_string());
        }
        "sweep.values" => {
            let mut vs = Vec::new();
            for part in value.split(',') {
                vs.push(part.trim().parse().map_err(|_| bad("expected numbers"))?);
            }
            c.sweep.values = vs;
        }
        _ => {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

fn validate<R: Real>(c: &Config<R>) -> Result<(), ConfigError> {
    if !(c.numerics.dt > R::zero()) {
        return Err(ConfigError::Invariant("numerics.dt must be positive".into()));
    }
    if c.numerics.t_end < R::zero() {
        return Err(ConfigError::Invariant(
            "numerics.t_end must be nonnegative".into(),
        ));
    }
    let check = crate::physics::validate_params(&c.params);
    if !check.is_ok() {
        return Err(ConfigError::Invariant(check.violations.join("; ")));
    }
    if c.geometry_kind == GeometryKind::Benchmark {
        c.geometry
            .validate()
            .map_err(|e| ConfigError::Invariant(e.to_string()))?;
    } else if c.channel.nx == 0 || c.channel.ny == 0 {
        return Err(ConfigError::Invariant(
            "channel cell counts must be positive".into(),
        ));
    }
    if c.sweep.param.is_some() && c.sweep.values.is_empty() {
        return Err(ConfigError::Invariant(
            "sweep.param set but sweep.values empty".into(),
        ));
    }
    Ok(())
}

/// Renders a configuration as the canonical flat text (all keys, sorted
/// within their sections).
pub fn render_config<R: Real>(c: &Config<R>) -> String {
    let mut out = String::new();
    let mut push = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };

    push(
        "geometry.kind",
        match c.geometry_kind {
            GeometryKind::Benchmark => "benchmark".into(),
            GeometryKind::Channel => "channel".into(),
        },
    );
    push("geometry.length", format!("{}", c.geometry.length));
    push("geometry.height", format!("{}", c.geometry.height));
    push("geometry.cylinder_x", format!("{}", c.geometry.center.x));
    push("geometry.cylinder_y", format!("{}", c.geometry.center.y));
    push("geometry.cylinder_r", format!("{}", c.geometry.radius));
    push("geometry.flag_length", format!("{}", c.geometry.flag_length));
    push(
        "geometry.flag_thickness",
        format!("{}", c.geometry.flag_thickness),
    );
    push("geometry.channel_length", format!("{}", c.channel.length));
    push("geometry.channel_height", format!("{}", c.channel.height));
    push("geometry.channel_nx", format!("{}", c.channel.nx));
    push("geometry.channel_ny", format!("{}", c.channel.ny));
    push("params.rho_f", format!("{}", c.params.rho_f));
    push("params.rho_s", format!("{}", c.params.rho_s));
    push("params.mu", format!("{}", c.params.mu));
    push("params.mu_r", format!("{}", c.params.mu_r));
    push("params.lambda1", format!("{}", c.params.lambda1));
    push("params.lambda2", format!("{}", c.params.lambda2));
    push("params.micro_inertia", format!("{}", c.params.micro_inertia));
    push("params.c3", format!("{}", c.params.c3));
    if let Some(c1) = c.c1 {
        push("params.c1", format!("{c1}"));
    }
    push("params.f_x", format!("{}", c.params.body_force.x));
    push("params.f_y", format!("{}", c.params.body_force.y));
    push("params.g", format!("{}", c.params.body_couple));
    push("numerics.dt", format!("{}", c.numerics.dt));
    push("numerics.t_end", format!("{}", c.numerics.t_end));
    push("numerics.mesh_level", format!("{}", c.numerics.mesh_level));
    push("numerics.zeta", format!("{}", c.params.zeta));
    push(
        "numerics.solver",
        match c.numerics.solver {
            SolverBackend::Direct => "direct".into(),
            SolverBackend::Gmres { .. } => "gmres".into(),
        },
    );
    push(
        "numerics.snapshot_every",
        format!("{}", c.numerics.snapshot_every),
    );
    push(
        "numerics.viscous_in_solid",
        format!("{}", c.numerics.viscous_in_solid),
    );
    push(
        "numerics.profile_avg_start",
        format!("{}", c.numerics.profile_avg_start),
    );
    push(
        "numerics.write_mesh_snapshots",
        format!("{}", c.numerics.write_mesh_snapshots),
    );
    push("bcs.u_bar", format!("{}", c.bcs.u_bar));
    push("bcs.omega_inlet", format!("{}", c.bcs.omega_inlet));
    push("bcs.ramp_time", format!("{}", c.bcs.ramp_time));
    push(
        "bcs.kind",
        match c.bcs.kind {
            BcKind::InletProfile => "inlet_profile".into(),
            BcKind::Forced => "forced".into(),
        },
    );
    push("probes.control_point", format!("{}", c.probes.control_point));
    push(
        "probes.line_x",
        c.probes
            .line_x
            .iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(","),
    );
    if let Some(param) = &c.sweep.param {
        push("sweep.param", param.clone());
        push(
            "sweep.values",
            c.sweep
                .values
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(","),
        );
    }
    out
}

impl<R: Real> Config<R> {
    /// Body force adjusted so the channel's `Forced` runs can prescribe a
    /// pressure gradient `G` directly: `f = (-G, 0)`.
    pub fn set_pressure_gradient(&mut self, g: R) {
        self.params.body_force = Vec2::new(-g, R::zero());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_benchmark_defaults() {
        let c: Config<f64> = parse_config("").unwrap();
        assert_eq!(c.geometry_kind, GeometryKind::Benchmark);
        assert_eq!(c.geometry.length, 2.5);
        assert_eq!(c.geometry.center, Vec2::new(0.2, 0.2));
        assert_eq!(c.params.rho_f, 1000.0);
        assert_eq!(c.params.mu, 1.0);
        assert_eq!(c.bcs.u_bar, 2.0);
        assert_eq!(c.numerics.dt, 0.005);
    }

    #[test]
    fn negative_mu_r_is_invariant_violation() {
        let err = parse_config::<f64>("params.mu_r = -1").unwrap_err();
        assert!(matches!(err, ConfigError::Invariant(_)));
    }

    #[test]
    fn partial_override_touches_only_that_key() {
        let c: Config<f64> = parse_config("numerics.dt = 0.002").unwrap();
        assert_eq!(c.numerics.dt, 0.002);
        let d: Config<f64> = Config::default();
        assert_eq!(c.numerics.t_end, d.numerics.t_end);
        assert_eq!(c.params.mu, d.params.mu);
    }

    #[test]
    fn unknown_key_and_syntax_errors_carry_line_numbers() {
        let err = parse_config::<f64>("params.mu = 1\nnot_a_key = 2\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 2);
                assert_eq!(key, "not_a_key");
            }
            other => panic!("unexpected {other}"),
        }
        let err = parse_config::<f64>("params.mu 1").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
    }

    #[test]
    fn c1_formula_overrides_c3() {
        let c: Config<f64> = parse_config("params.c1 = 1e6\nparams.rho_s = 1000\n").unwrap();
        assert_eq!(c.params.c3, 1e9);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a comment\n\nparams.mu = 0.5 # trailing\n";
        let c: Config<f64> = parse_config(text).unwrap();
        assert_eq!(c.params.mu, 0.5);
    }

    #[test]
    fn render_parse_is_idempotent() {
        let text = "numerics.dt = 0.0025\nparams.mu_r = 2.5\nsweep.param = params.mu_r\nsweep.values = 0,1,10\nprobes.line_x = 0.7,1.5\n";
        let c1: Config<f64> = parse_config(text).unwrap();
        let r1 = render_config(&c1);
        let c2: Config<f64> = parse_config(&r1).unwrap();
        let r2 = render_config(&c2);
        assert_eq!(r1, r2);
    }

    #[test]
    fn sweep_requires_known_parameter() {
        let err = parse_config::<f64>("sweep.param = params.bogus\nsweep.values = 1\n");
        assert!(err.is_err());
    }
}
