//! End-to-end acceptance checks. Runs every criterion, prints one line per
//! criterion and exits nonzero if any failed.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use pfc_etdrk::cli::{self, series, ConstantsArgs, RunArgs, RunConfig};
use pfc_etdrk::energy;
use pfc_etdrk::grid::{self, GridSpec, RealField};
use pfc_etdrk::phifunc;
use pfc_etdrk::scheme::{self, constants_chain, NoHooks};
use pfc_etdrk::spectral::{lowpass, DiagOp, SpectralOps};
use pfc_etdrk::verify::{self, CheckReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const SEED: u64 = 20240601;

fn reports_outcome(reports: &[CheckReport]) -> Outcome {
    let worst = reports.iter().map(|r| r.worst_violation).fold(0.0, f64::min);
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.to_string()).collect();
    if failed.is_empty() {
        Ok(format!("{} claims, worst slack {worst:e}", reports.len()))
    } else {
        Err(failed.join("; "))
    }
}

fn sbp() -> Outcome {
    let mut all = verify::check_sbp(GridSpec::new(2, 16, 16.0).unwrap(), SEED, 100).map_err(|e| e.to_string())?;
    all.extend(verify::check_sbp(GridSpec::new(3, 8, 8.0).unwrap(), SEED + 1, 100).map_err(|e| e.to_string())?);
    reports_outcome(&all)
}

fn stencil_vs_symbol() -> Outcome {
    let mut worst = 0.0f64;
    for (dim, n, len) in [(2, 32, 20.0), (3, 12, 9.0)] {
        let spec = GridSpec::new(dim, n, len).unwrap();
        let ops = SpectralOps::build(spec, 1.0, 0.1).unwrap();
        for t in 0..25u64 {
            let f = RealField::random(spec, &mut ChaCha8Rng::seed_from_u64(SEED + t));
            let a = grid::laplacian(&f);
            let b = ops.apply(&f, DiagOp::Laplacian).unwrap();
            worst = worst.max(a.sub(&b).max_abs() / a.max_abs());
        }
    }
    if worst <= 1e-12 {
        Ok(format!("50 fields, max relative difference {worst:e}"))
    } else {
        Err(format!("max relative difference {worst:e} > 1e-12"))
    }
}

fn phi_accuracy() -> Outcome {
    let m = 10_000;
    let mut args = vec![0.0];
    for i in 0..m - 1 {
        args.push(10f64.powf(-12.0 + (12.0 + 708f64.log10()) * i as f64 / (m - 2) as f64).min(708.0));
    }
    let zero = phifunc::phi(0.0).unwrap();
    if (zero.phi0, zero.phi1, zero.phi2) != (1.0, 1.0, 0.5) || phifunc::phi_ratio(0.0).unwrap() != 0.5 {
        return Err(format!("limits at 0: {zero:?}"));
    }
    let mut worst = 0.0f64;
    let mut prev: Option<phifunc::PhiEval> = None;
    for &a in &args {
        let v = phifunc::phi(a).unwrap();
        let (r0, r1, r2) = common::phi_ref(a);
        for (got, want) in [(v.phi0, r0), (v.phi1, r1), (v.phi2, r2)] {
            worst = worst.max((got - want).abs() / want.abs());
        }
        if let Some(p) = prev {
            if v.phi0 > p.phi0 || v.phi1 > p.phi1 || v.phi2 > p.phi2 {
                return Err(format!("monotonicity broken between {} and {a}", p.a));
            }
        }
        prev = Some(v);
    }
    if worst <= 1e-14 {
        Ok(format!("{} arguments, max relative error {worst:e}", args.len()))
    } else {
        Err(format!("max relative error {worst:e} > 1e-14"))
    }
}

fn prop1() -> Outcome {
    let spec = GridSpec::new(2, 16, 16.0).unwrap();
    let mut all = Vec::new();
    for (i, kappa) in [1.0, 2.0, 10.0].into_iter().enumerate() {
        for (j, tau) in [1e-3, 1e-1, 1.0].into_iter().enumerate() {
            let seed = SEED + 10 * i as u64 + j as u64;
            all.extend(verify::check_prop1(spec, kappa, tau, seed, 200).map_err(|e| e.to_string())?);
        }
    }
    reports_outcome(&all)
}

fn prop2() -> Outcome {
    let spec = GridSpec::new(2, 16, 16.0).unwrap();
    let mut all = Vec::new();
    for (i, kappa) in [0.0, 1.0, 5.0].into_iter().enumerate() {
        for (j, tau) in [1e-3, 1e-1, 1.0].into_iter().enumerate() {
            let seed = SEED + 100 + 10 * i as u64 + j as u64;
            all.extend(verify::check_prop2(spec, kappa, tau, seed, 200).map_err(|e| e.to_string())?);
        }
    }
    reports_outcome(&all)
}

fn nonlinear() -> Outcome {
    let r = verify::check_nonlinear_bounds(GridSpec::new(2, 16, 16.0).unwrap(), SEED, 500).map_err(|e| e.to_string())?;
    reports_outcome(&[r])
}

fn energy_forms() -> Outcome {
    let mut worst = 0.0f64;
    for t in 0..100u64 {
        let spec = if t % 2 == 0 { GridSpec::new(2, 32, 24.0) } else { GridSpec::new(3, 8, 6.0) }.unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + t);
        let raw = RealField::random(spec, &mut rng);
        let u = if t % 4 < 2 { lowpass(&raw, spec.n() / 4) } else { raw };
        let amp = rng.random_range(0.1..2.0);
        let u = u.scaled(amp).map(|x| x + 0.1);
        let a = energy::energy(&u, 0.25).total;
        let b = energy::energy_equivalent(&u, 0.25);
        worst = worst.max((a - b).abs() / a.abs());
    }
    if worst <= 1e-12 {
        Ok(format!("100 fields, max relative difference {worst:e}"))
    } else {
        Err(format!("max relative difference {worst:e} > 1e-12"))
    }
}

fn variational() -> Outcome {
    let eps = 0.25;
    let spec = GridSpec::new(2, 16, 16.0).unwrap();
    let mut ratios = Vec::new();
    for t in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + t);
        let u = lowpass(&RealField::random(spec, &mut rng), 4);
        let w = lowpass(&RealField::random(spec, &mut rng), 4);
        let v = u.lin_comb(0.5, &w, 1.0);
        let exact = grid::inner(&energy::chemical_potential(&u, eps), &v).unwrap();
        let err = |s: f64| {
            let up = energy::energy(&u.lin_comb(1.0, &v, s), eps).total;
            let dn = energy::energy(&u.lin_comb(1.0, &v, -s), eps).total;
            ((up - dn) / (2.0 * s) - exact).abs()
        };
        ratios.push(err(1e-3) / err(1e-4));
    }
    let bad: Vec<&f64> = ratios.iter().filter(|r| !(90.0..=110.0).contains(*r)).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    if bad.is_empty() {
        Ok(format!("error ratios in [{lo:.3}, {hi:.3}]"))
    } else {
        Err(format!("error ratios outside 100 ± 10: {bad:?}"))
    }
}

const RUN_CONFIG: &str = "\
dim = 2
n = 64
length = 32
epsilon = 0.25
tau = 0.01
n_steps = 10000
kappa_policy = lemma_adaptive
init = noise
init.beta0 = 0.07
init.delta = 0.01
init.seed = 7
checkpoint_every = 1000
";

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn mass_and_dissipation() -> (Outcome, Outcome) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(&write_config(dir.path(), "run.cfg", RUN_CONFIG)).unwrap();
    let u0 = cfg.initial_field().unwrap();
    let params = cfg.scheme_params().unwrap();
    let trace = match scheme::run(&u0, &params, cfg.n_steps, &mut NoHooks) {
        Ok(t) => t,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let m0 = grid::mean(&u0);
    let drift = trace.records.iter().map(|r| (r.mass - m0).abs() / m0.abs()).fold(0.0, f64::max);
    let mass = if drift <= 1e-13 {
        Ok(format!("{} steps, max relative mass drift {drift:e}", trace.records.len() - 1))
    } else {
        Err(format!("relative mass drift {drift:e} > 1e-13"))
    };
    let reports = verify::check_dissipation(&trace).unwrap();
    let e0 = trace.records[0].energy.total;
    let e1 = trace.records.last().unwrap().energy.total;
    let stage_max = trace.records.iter().filter_map(|r| r.stage_max).fold(0.0, f64::max);
    let diss = reports_outcome(&reports).map(|s| {
        format!("{s}; kappa {}, max stage sup-norm {stage_max:.4}, energy {e0:.6e} -> {e1:.6e}", trace.kappa)
    });
    (mass, diss)
}

const ORDER_CONFIG: &str = "\
dim = 2
n = 64
length = 32
epsilon = 0.25
tau = 0.01
t_final = 1
kappa_policy = lemma_adaptive
init = noise
init.beta0 = 0.07
init.delta = 0.5
init.cutoff = 8
init.seed = 11
";

fn temporal_order() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(&write_config(dir.path(), "order.cfg", ORDER_CONFIG)).unwrap();
    let u0 = cfg.initial_field().unwrap();
    let params = cfg.scheme_params().unwrap();
    let study = cli::order_study(&u0, &params, &[0.02, 0.01, 0.005], Some(0.000625), 1.0).map_err(|e| e.to_string())?;
    let errs: Vec<String> = study.points.iter().map(|p| format!("{:.3e}", p.err_l2)).collect();
    let msg = format!(
        "l2 errors [{}], order l2 {:.4}, linf {:.4}",
        errs.join(", "),
        study.order_l2,
        study.order_linf
    );
    if (study.order_l2 - 2.0).abs() <= 0.1 && (study.order_linf - 2.0).abs() <= 0.1 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn constants() -> Outcome {
    let args = ConstantsArgs { e0: 0.0, beta0: 0.0, dim: 2, n: 16, length: 1.0, epsilon: 0.25, c2: 1.0, c3: 1.0 };
    let mut buf = Vec::new();
    cli::cmd_constants(&args, &mut buf).map_err(|e| e.to_string())?;
    let text = String::from_utf8(buf).unwrap();
    let kv: std::collections::HashMap<&str, f64> = text
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').expect("key=value line");
            (k, v.parse().expect("numeric value"))
        })
        .collect();
    for (k, want) in [("C1", 2.0), ("C2", 2.0), ("C3", 24.0), ("C4", 3.0)] {
        if kv.get(k) != Some(&want) {
            return Err(format!("{k} = {:?}, expected {want}", kv.get(k)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..100 {
        let vol = rng.random_range(0.5..50.0);
        let e0 = rng.random_range(-vol..10.0 * vol);
        let beta0 = rng.random_range(-1.0..1.0);
        let (c2, c3) = (rng.random_range(0.01..10.0), rng.random_range(0.01..10.0));
        let c = constants_chain(e0, beta0, vol, c2, c3, 0.25).map_err(|e| e.to_string())?;
        if !(c.c10 >= c.c5 && c.c5 >= c.c2) {
            return Err(format!("monotonicity fails at E0={e0} beta0={beta0} C2={c2} C3={c3}"));
        }
    }
    Ok("hand values reproduced; C10 >= C5 >= C2 on 100 random inputs".into())
}

fn resume() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", RUN_CONFIG);
    let (full, part) = (dir.path().join("full"), dir.path().join("part"));
    let args = |out: &Path, resume: bool, stop_at: Option<usize>| RunArgs {
        config: cfg.clone(),
        resume,
        seed: None,
        out_dir: Some(out.to_path_buf()),
        stop_at,
    };
    let mut sink = Vec::new();
    cli::cmd_run(&args(&full, false, None), &mut sink).map_err(|e| e.to_string())?;
    cli::cmd_run(&args(&part, false, Some(5000)), &mut sink).map_err(|e| e.to_string())?;
    let interrupted_rows = series::read(&part.join("series.csv")).map_err(|e| e.to_string())?.len();
    if part.join("final.pfcsnap").exists() {
        return Err("interrupted run wrote a final snapshot".into());
    }
    cli::cmd_run(&args(&part, true, None), &mut sink).map_err(|e| e.to_string())?;
    for name in ["series.csv", "final.pfcsnap"] {
        let a = std::fs::read(full.join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(part.join(name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{name} differs after resume"));
        }
    }
    Ok(format!("interrupted after {} rows; CSV and final snapshot byte-identical", interrupted_rows))
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
}

fn report(c: &Criterion, outcome: Outcome, elapsed: Duration) -> bool {
    let in_time = elapsed <= c.budget;
    let (ok, detail) = match outcome {
        Ok(d) if in_time => (true, d),
        Ok(d) => (false, format!("{d}; over the {:?} budget", c.budget)),
        Err(d) => (false, d),
    };
    println!(
        "[{}] criterion {:>2} {:<34} {:>8.2}s  {}",
        if ok { "PASS" } else { "FAIL" },
        c.id,
        c.name,
        elapsed.as_secs_f64(),
        detail
    );
    ok
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn main() {
    let secs = Duration::from_secs;
    let mut ok = true;
    let simple: Vec<(Criterion, fn() -> Outcome)> = vec![
        (Criterion { id: 1, name: "summation by parts", budget: secs(5) }, sbp),
        (Criterion { id: 2, name: "stencil/spectral Laplacian", budget: secs(2) }, stencil_vs_symbol),
        (Criterion { id: 3, name: "phi-function accuracy", budget: secs(1) }, phi_accuracy),
        (Criterion { id: 4, name: "discrete G-operator estimates", budget: secs(30) }, prop1),
        (Criterion { id: 5, name: "two-function estimate", budget: secs(30) }, prop2),
        (Criterion { id: 6, name: "cubic gradient bound", budget: secs(5) }, nonlinear),
        (Criterion { id: 7, name: "energy form equivalence", budget: secs(2) }, energy_forms),
        (Criterion { id: 8, name: "variational consistency", budget: secs(2) }, variational),
    ];
    for (c, f) in &simple {
        let (out, t) = timed(f);
        ok &= report(c, out, t);
    }

    let ((mass, diss), t) = timed(mass_and_dissipation);
    ok &= report(&Criterion { id: 9, name: "mass conservation", budget: secs(300) }, mass, t);
    ok &= report(&Criterion { id: 10, name: "energy dissipation", budget: secs(300) }, diss, t);

    let (out, t) = timed(temporal_order);
    ok &= report(&Criterion { id: 11, name: "temporal order 2", budget: secs(600) }, out, t);
    let (out, t) = timed(constants);
    ok &= report(&Criterion { id: 12, name: "constants chain", budget: secs(1) }, out, t);
    let (out, t) = timed(resume);
    ok &= report(&Criterion { id: 13, name: "determinism and resume", budget: secs(600) }, out, t);

    if ok {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: FAILED");
        std::process::exit(1);
    }
}
