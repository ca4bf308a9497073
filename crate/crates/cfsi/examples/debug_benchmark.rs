use cfsi::io::config::Config;
use cfsi::timeloop::run_simulation;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let level: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mu_r: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let t_end: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let ramp: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let lambda1: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(5e-3);

    let mut config: Config<f64> = Config::default();
    config.numerics.mesh_level = level;
    config.numerics.t_end = t_end;
    config.params.mu_r = mu_r;
    config.bcs.ramp_time = ramp;
    config.params.lambda1 = lambda1;
    let started = Instant::now();
    let out = run_simulation(&config, None).unwrap();
    if let Some(f) = &out.failure {
        println!("FAILED: {f}");
    }
    // Print dy(A) every 0.1 s.
    let every = (0.1 / config.numerics.dt).round() as usize;
    for (i, rec) in out.series.records.iter().enumerate() {
        if i % every == 0 {
            println!("t={:5.2}  dx={:+.5e}  dy={:+.5e}  wmax@0.7={:.3e}", rec.t, rec.dx, rec.dy, rec.extra.first().copied().unwrap_or(0.0));
        }
    }
    let n = out.series.records.len();
    println!("steps: {}, wall: {:.1}s, {:.0} ms/step", n - 1, started.elapsed().as_secs_f64(), started.elapsed().as_secs_f64() * 1000.0 / (n.max(2) - 1) as f64);
}
