//! `cfsi` command line: meshing, simulation, verification, sweeps and
//! profile extraction.

use cfsi::io::config::{apply_sweep_value, parse_config, Config};
use cfsi::io::probes::write_line_profile;
use cfsi::io::vtk::read_vtk_snapshot;
use cfsi::linalg::Vec2;
use cfsi::mesh::{generate_benchmark_mesh, Location};
use cfsi::timeloop::run_simulation;
use cfsi::verify::{poiseuille_study, ChannelCase};
use clap::{Parser, Subcommand};
use std::error::Error;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "cfsi", version, about = "2D micropolar fluid-structure interaction solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the benchmark mesh and write it in the native format.
    Mesh {
        /// Refinement level; triangle count grows ~4x per level.
        #[arg(long, default_value_t = 0)]
        level: usize,
        /// Output path (native cfsi-mesh text format).
        #[arg(long)]
        out: PathBuf,
        /// Optional config file supplying the geometry.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a configured simulation.
    Run {
        config: PathBuf,
        /// Output directory (series.csv, snapshots, run.json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Verification studies against independent oracles.
    Verify {
        #[command(subcommand)]
        what: VerifyCmd,
    },
    /// Run the sweep defined in the config, one output directory per value.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run the sweep values concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Extract a vertical line profile from a VTK snapshot (vertex data,
    /// P1 accuracy).
    Profile {
        snapshot: PathBuf,
        /// Line position x0.
        #[arg(long)]
        x: f64,
        /// Number of samples in y.
        #[arg(long, default_value_t = 101)]
        n: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// March the forced channel to steady state on nested meshes and print
    /// L2 errors against the 1D micropolar Poiseuille oracle.
    Poiseuille {
        #[arg(long, default_value_t = 1e-3)]
        mu: f64,
        #[arg(long = "mu-r", default_value_t = 1e-3)]
        mu_r: f64,
        #[arg(long, default_value_t = 1e-4)]
        lambda1: f64,
        /// Driving pressure gradient (negative drives +x flow).
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        g: f64,
        /// Number of uniform refinements beyond the 40x10 base mesh.
        #[arg(long, default_value_t = 1)]
        refinements: usize,
        /// 1D oracle grid size.
        #[arg(long, default_value_t = 10_000)]
        oracle_n: usize,
    },
}

fn main() {
    if let Err(e) = dispatch() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn dispatch() -> Result<(), Box<dyn Error>> {
    match Cli::parse().cmd {
        Cmd::Mesh { level, out, config } => {
            let geometry = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    parse_config::<f64>(&text)?.geometry
                }
                None => Default::default(),
            };
            let mesh = generate_benchmark_mesh::<f64>(&geometry, level)?;
            mesh.save(&out)?;
            let q = mesh.validate();
            println!(
                "mesh: {} vertices, {} triangles, min angle {:.1} deg, inverted {}",
                mesh.n_vertices(),
                mesh.n_triangles(),
                q.min_angle.to_degrees(),
                q.inverted_count
            );
            Ok(())
        }
        Cmd::Run { config, out } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg: Config<f64> = parse_config(&text)?;
            let result = run_simulation(&cfg, Some(&out))?;
            match result.failure {
                Some(msg) => Err(format!("run aborted: {msg}").into()),
                None => {
                    let last = result.series.records.last().expect("t=0 record exists");
                    println!(
                        "run complete: {} steps to t = {}, dy(A) = {:.6}",
                        result.steps, last.t, last.dy
                    );
                    Ok(())
                }
            }
        }
        Cmd::Verify { what } => match what {
            VerifyCmd::Poiseuille {
                mu,
                mu_r,
                lambda1,
                g,
                refinements,
                oracle_n,
            } => {
                let mut case = ChannelCase::<f64>::reference(40, 10);
                case.params.mu = mu;
                case.params.mu_r = mu_r;
                case.params.lambda1 = lambda1;
                case.g = g;
                let rows = poiseuille_study(&case, refinements, oracle_n)?;
                println!("cells      u_rel_err      w_rel_err   steps");
                for r in &rows {
                    println!(
                        "{:>3}x{:<3} {:>12.4e} {:>14.4e} {:>7}",
                        r.nx, r.ny, r.u_err, r.w_err, r.steps
                    );
                }
                for pair in rows.windows(2) {
                    let ru = pair[0].u_err / pair[1].u_err;
                    let rw = pair[0].w_err / pair[1].w_err;
                    println!("refinement gain: u {ru:.2}x, omega {rw:.2}x");
                }
                Ok(())
            }
        },
        Cmd::Sweep {
            config,
            out,
            parallel,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg: Config<f64> = parse_config(&text)?;
            let param = cfg
                .sweep
                .param
                .clone()
                .ok_or("config has no sweep.param")?;
            let values = cfg.sweep.values.clone();
            let run_one = |value: f64| -> Result<(), String> {
                let sub = apply_sweep_value(&cfg, &param, value);
                let dir = out.join(format!("{}={}", param.replace('.', "_"), value));
                match run_simulation(&sub, Some(&dir)) {
                    Ok(result) => match result.failure {
                        Some(msg) => Err(format!("{param} = {value}: {msg}")),
                        None => {
                            println!("{param} = {value}: done ({} steps)", result.steps);
                            Ok(())
                        }
                    },
                    Err(e) => Err(format!("{param} = {value}: {e}")),
                }
            };
            let failures: Vec<String> = if parallel {
                std::thread::scope(|scope| {
                    let handles: Vec<_> = values
                        .iter()
                        .map(|&v| scope.spawn(move || run_one(v)))
                        .collect();
                    handles
                        .into_iter()
                        .filter_map(|h| h.join().expect("sweep thread").err())
                        .collect()
                })
            } else {
                values.iter().filter_map(|&v| run_one(v).err()).collect()
            };
            if failures.is_empty() {
                Ok(())
            } else {
                Err(failures.join("; ").into())
            }
        }
        Cmd::Profile { snapshot, x, n, out } => {
            let text = std::fs::read_to_string(&snapshot)?;
            let snap = read_vtk_snapshot::<f64>(&text)?;
            let height = snap
                .mesh
                .vertices()
                .iter()
                .fold(0.0f64, |acc, v| acc.max(v.y));
            let mut samples = Vec::with_capacity(n);
            for i in 0..n {
                let y = height * i as f64 / (n.max(2) - 1) as f64;
                let p = Vec2::new(x, y);
                let sample = match snap.mesh.locate(p) {
                    Location::Inside { triangle, bary } => {
                        let tri = snap.mesh.triangle(triangle);
                        let mut u = Vec2::zero();
                        let mut om = 0.0;
                        for k in 0..3 {
                            u += snap.velocity[tri[k]] * bary[k];
                            om += snap.microrotation[tri[k]] * bary[k];
                        }
                        cfsi::io::probes::LineSample {
                            y,
                            u: Some(u),
                            omega: Some(om),
                        }
                    }
                    Location::Outside => cfsi::io::probes::LineSample {
                        y,
                        u: None,
                        omega: None,
                    },
                };
                samples.push(sample);
            }
            let mut buf = Vec::new();
            write_line_profile(&samples, &mut buf)?;
            std::fs::write(&out, buf)?;
            println!("profile: {} samples at x = {x} -> {}", n, out.display());
            Ok(())
        }
    }
}
