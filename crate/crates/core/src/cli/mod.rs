//! The `pfc` command line: `run`, `verify`, `order` and `constants`.
//!
//! Commands write machine-readable `key=value` lines (or CSV files) and
//! return an exit status: 0 on success, 1 when a run or check fails, 2 for
//! usage, configuration and I/O errors.

pub mod config;
pub mod series;
pub mod snapshot;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::error::{PfcError, Result};
use crate::grid::{self, GridSpec, RealField};
use crate::scheme::{self, KappaPolicy, RunHooks, SchemeParams, Simulation, StepState, Trace, TraceRecord};
use crate::verify::{self, CheckReport};

pub use config::{InitSpec, RunConfig};
use series::SeriesWriter;
use snapshot::Snapshot;

#[derive(Parser, Debug)]
#[command(name = "pfc", version, about = "ETDRK2 phase field crystal solver and stability checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a simulation described by a config file.
    Run(RunArgs),
    /// Run randomised checks of the discrete estimates.
    Verify(VerifyArgs),
    /// Temporal self-convergence study.
    Order(OrderArgs),
    /// Evaluate the a priori constants chain and the time-step bounds.
    Constants(ConstantsArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Overrides `init.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `out_dir`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Stop after this step as if interrupted (no final snapshot).
    #[arg(long)]
    pub stop_at: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Sbp,
    Prop1,
    Prop2,
    Nonlinear,
    Embed,
    All,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 2.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Domain side; defaults to N (unit mesh size).
    #[arg(long)]
    pub length: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct OrderArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated time steps.
    #[arg(long, value_delimiter = ',', required = true)]
    pub taus: Vec<f64>,
    /// Reference step; defaults to the smallest step over 8.
    #[arg(long)]
    pub tau_ref: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write `order.csv` here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ConstantsArgs {
    /// Initial energy `E_h(u⁰)`.
    #[arg(long, allow_hyphen_values = true)]
    pub e0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta0: f64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub length: f64,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    #[arg(long)]
    pub c2: f64,
    #[arg(long)]
    pub c3: f64,
}

/// Dispatches a parsed command line; returns the exit status.
pub fn main_with(cli: Cli, out: &mut dyn Write) -> i32 {
    let res = match cli.command {
        Command::Run(a) => cmd_run(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Order(a) => cmd_order(&a, out),
        Command::Constants(a) => cmd_constants(&a, out),
    };
    match res {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                PfcError::NonFinite { .. } => 1,
                _ => 2,
            }
        }
    }
}

fn emit(out: &mut dyn Write, line: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| PfcError::io("<stdout>", e))
}

fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| PfcError::io(p, e))
}

/// Files of a run directory.
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
    pub fn series(&self) -> PathBuf {
        self.dir.join("series.csv")
    }
    pub fn snapshots(&self) -> PathBuf {
        self.dir.join("snapshots")
    }
    pub fn snapshot(&self, step: usize) -> PathBuf {
        self.snapshots().join(format!("snap_{step:08}.pfcsnap"))
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join("checkpoint.pfcsnap")
    }
    pub fn checkpoint_meta(&self) -> PathBuf {
        self.dir.join("checkpoint.meta")
    }
    pub fn final_snapshot(&self) -> PathBuf {
        self.dir.join("final.pfcsnap")
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| PfcError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| PfcError::io(path, e))
}

/// Writes the state needed to continue a run.
pub fn write_checkpoint(paths: &RunPaths, state: &StepState, epsilon: f64, tau: f64) -> Result<()> {
    let snap = Snapshot::new(state.u.clone(), epsilon, tau, state.step_index);
    write_atomic(&paths.checkpoint(), &snapshot::encode(&snap))?;
    let meta = format!(
        "step={}\nkappa={}\nrunning_max_inf={}\ninitial_energy={}\nbeta0={}\n",
        state.step_index, state.kappa, state.running_max_inf, state.initial_energy, state.beta0
    );
    write_atomic(&paths.checkpoint_meta(), meta.as_bytes())
}

/// Reads the checkpoint back into a step state.
pub fn read_checkpoint(paths: &RunPaths) -> Result<StepState> {
    let snap = snapshot::read(&paths.checkpoint())?;
    let mp = paths.checkpoint_meta();
    let text = std::fs::read_to_string(&mp).map_err(|e| PfcError::io(&mp, e))?;
    let bad = |msg: String| PfcError::Snapshot { path: mp.clone(), msg };
    let get = |key: &str| -> Result<&str> {
        text.lines()
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| bad(format!("missing `{key}`")))
    };
    let real = |key: &str| -> Result<f64> { get(key)?.parse().map_err(|_| bad(format!("bad `{key}`"))) };
    let step: usize = get("step")?.parse().map_err(|_| bad("bad `step`".into()))?;
    if step != snap.step {
        return Err(bad(format!("meta step {step} does not match snapshot step {}", snap.step)));
    }
    Ok(StepState {
        step_index: step,
        u: snap.field,
        u_tilde: None,
        running_max_inf: real("running_max_inf")?,
        kappa: real("kappa")?,
        initial_energy: real("initial_energy")?,
        beta0: real("beta0")?,
    })
}

struct Driver {
    paths: RunPaths,
    series: SeriesWriter,
    epsilon: f64,
    tau: f64,
    snapshot_every: usize,
    checkpoint_every: usize,
}

impl Driver {
    fn snapshot(&self, path: &Path, state: &StepState) -> Result<()> {
        snapshot::write(path, &Snapshot::new(state.u.clone(), self.epsilon, self.tau, state.step_index))
    }
}

impl RunHooks for Driver {
    fn on_record(&mut self, record: &TraceRecord, state: &StepState) -> Result<()> {
        self.series.push(record)?;
        if self.snapshot_every > 0 && record.step % self.snapshot_every == 0 {
            self.snapshot(&self.paths.snapshot(record.step), state)?;
        }
        Ok(())
    }

    fn checkpoint_every(&self) -> Option<usize> {
        (self.checkpoint_every > 0).then_some(self.checkpoint_every)
    }

    fn on_checkpoint(&mut self, state: &StepState) -> Result<()> {
        self.series.flush()?;
        write_checkpoint(&self.paths, state, self.epsilon, self.tau)
    }

    fn on_restart(&mut self, _kappa: f64) -> Result<()> {
        self.series = SeriesWriter::create(&self.paths.series())?;
        Ok(())
    }
}

/// Summary of a finished `run`.
fn summarize(out: &mut dyn Write, trace: &Trace, state: &StepState, paths: &RunPaths) -> Result<()> {
    let increases = trace
        .records
        .windows(2)
        .filter(|w| w[1].energy.total > w[0].energy.total + verify::ENERGY_TOL * (1.0 + w[0].energy.total.abs()))
        .count();
    let drift = trace
        .records
        .iter()
        .map(|r| (r.mass - state.beta0).abs() / (1.0 + state.beta0.abs()))
        .fold(0.0, f64::max);
    let last = trace.records.last();
    emit(out, format!("steps={}", state.step_index))?;
    emit(out, format!("kappa={}", state.kappa))?;
    if let Some(r) = last {
        emit(out, format!("time={}", r.time))?;
        emit(out, format!("energy={:.16e}", r.energy.total))?;
    }
    emit(out, format!("mass_drift={drift:e}"))?;
    emit(out, format!("energy_increases={increases}"))?;
    emit(out, format!("lemma_violations={}", trace.lemma_violations.len()))?;
    emit(out, format!("restarts={}", trace.restarts))?;
    emit(out, format!("out_dir={}", paths.dir.display()))
}

/// `pfc run`. Returns whether the run reached its last step.
pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<bool> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg = cfg.with_seed(s);
    }
    let dir = args.out_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let paths = RunPaths::new(dir);
    mkdir(&paths.dir)?;
    if cfg.snapshot_every > 0 {
        mkdir(&paths.snapshots())?;
    }
    let params = cfg.scheme_params()?;
    let target = args.stop_at.map_or(cfg.n_steps, |s| s.min(cfg.n_steps));
    let strict = matches!(cfg.policy, KappaPolicy::LemmaAdaptive { strict: true });

    let (sim, series) = if args.resume {
        let state = read_checkpoint(&paths)?;
        if state.u.spec() != &cfg.spec {
            return Err(PfcError::Snapshot {
                path: paths.checkpoint(),
                msg: "checkpoint grid does not match the config".into(),
            });
        }
        info!("resuming at step {}", state.step_index);
        let series = SeriesWriter::resume(&paths.series(), state.step_index)?;
        (Some(Simulation::resume(state, params)?), series)
    } else {
        (None, SeriesWriter::create(&paths.series())?)
    };
    let mut driver = Driver {
        paths,
        series,
        epsilon: cfg.epsilon,
        tau: cfg.tau,
        snapshot_every: cfg.snapshot_every,
        checkpoint_every: cfg.checkpoint_every,
    };

    let (trace, state) = match sim {
        Some(mut sim) => {
            if strict {
                warn!("strict kappa restarts are not applied after a resume");
            }
            let mut trace = Trace { epsilon: cfg.epsilon, kappa: sim.kappa(), ..Default::default() };
            sim.advance_to(target, &mut driver, &mut trace)?;
            (trace, sim.into_state())
        }
        None if strict && args.stop_at.is_none() => {
            let u0 = cfg.initial_field()?;
            scheme::run_with_state(&u0, &params, target, &mut driver)?
        }
        None => {
            let mut sim = Simulation::new(cfg.initial_field()?, params)?;
            let mut trace = Trace { epsilon: cfg.epsilon, kappa: sim.kappa(), ..Default::default() };
            let first = sim.record();
            trace.records.push(first);
            driver.on_record(&first, sim.state())?;
            sim.advance_to(target, &mut driver, &mut trace)?;
            (trace, sim.into_state())
        }
    };
    driver.series.flush()?;
    if !trace.lemma_violations.is_empty() {
        warn!(
            "kappa = {} below the lemma bound at {} steps (first: {})",
            state.kappa,
            trace.lemma_violations.len(),
            trace.lemma_violations[0]
        );
    }
    if target == cfg.n_steps {
        driver.snapshot(&driver.paths.final_snapshot(), &state)?;
    }
    summarize(out, &trace, &state, &driver.paths)?;
    Ok(true)
}

fn print_reports(out: &mut dyn Write, reports: &[CheckReport]) -> Result<bool> {
    for r in reports {
        emit(out, r.to_string())?;
    }
    Ok(verify::all_passed(reports))
}

/// `pfc verify`. Returns whether every check passed.
pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<bool> {
    let spec = GridSpec::new(args.dim, args.n, args.length.unwrap_or(args.n as f64))?;
    let runs = |s: Suite| args.suite == s || args.suite == Suite::All;
    if runs(Suite::Prop1) && args.kappa < 1.0 {
        return Err(PfcError::InvalidArgument(format!(
            "prop1 needs kappa >= 1 (got {}): the estimates are stated under the assumption kappa >= 1",
            args.kappa
        )));
    }
    let mut ok = true;
    if runs(Suite::Sbp) {
        ok &= print_reports(out, &verify::check_sbp(spec, args.seed, args.trials)?)?;
    }
    if runs(Suite::Prop1) {
        ok &= print_reports(out, &verify::check_prop1(spec, args.kappa, args.tau, args.seed, args.trials)?)?;
    }
    if runs(Suite::Prop2) {
        ok &= print_reports(out, &verify::check_prop2(spec, args.kappa, args.tau, args.seed, args.trials)?)?;
    }
    if runs(Suite::Nonlinear) {
        ok &= print_reports(out, &[verify::check_nonlinear_bounds(spec, args.seed, args.trials)?])?;
    }
    if runs(Suite::Embed) {
        let e = verify::estimate_embedding_constants(spec, args.seed, args.trials)?;
        emit(
            out,
            format!(
                "check=embed dim={} n={} length={} samples={} c2_emp={:e} c3_emp={:e}",
                spec.dim(),
                spec.n(),
                spec.len(),
                e.samples,
                e.c2,
                e.c3
            ),
        )?;
    }
    emit(out, format!("all_passed={ok}"))?;
    Ok(ok)
}

/// Least-squares slope of `ln e` against `ln τ`.
pub fn observed_order(taus: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Errors against the reference at one step size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderPoint {
    pub tau: f64,
    pub steps: usize,
    pub err_l2: f64,
    pub err_linf: f64,
}

/// Outcome of a self-convergence study.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderStudy {
    pub tau_ref: f64,
    pub points: Vec<OrderPoint>,
    pub order_l2: f64,
    pub order_linf: f64,
    /// Every error sits at the roundoff floor.
    pub exact: bool,
}

impl OrderStudy {
    pub fn passed(&self) -> bool {
        self.exact || self.order_l2 >= 1.9
    }
}

/// Integrates `u0` to `t_final` with step `tau`.
pub fn integrate(u0: &RealField, params: &SchemeParams, tau: f64, t_final: f64) -> Result<RealField> {
    let steps = config::steps_for(t_final, tau).ok_or_else(|| {
        PfcError::InvalidArgument(format!("final time {t_final} is not an integer multiple of tau = {tau}"))
    })?;
    let sim = Simulation::new(u0.clone(), SchemeParams { tau, ..*params })?;
    let st = sim.stepper();
    let mut u = u0.clone();
    for k in 0..steps {
        u = st.step(&u).u_next;
        if !u.is_finite() {
            return Err(PfcError::NonFinite { step: k + 1 });
        }
    }
    Ok(u)
}

/// Self-convergence of the scheme from `u0` over `taus` against `tau_ref`.
pub fn order_study(u0: &RealField, params: &SchemeParams, taus: &[f64], tau_ref: Option<f64>, t_final: f64) -> Result<OrderStudy> {
    if taus.len() < 2 {
        return Err(PfcError::InvalidArgument("order needs at least two time steps".into()));
    }
    if taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(PfcError::InvalidArgument("time steps must be positive".into()));
    }
    let smallest = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let tau_ref = tau_ref.unwrap_or(smallest / 8.0);
    if tau_ref * 8.0 > smallest * (1.0 + 1e-12) {
        return Err(PfcError::InvalidArgument(format!(
            "reference step {tau_ref} must be at least 8x smaller than {smallest}"
        )));
    }
    for &t in taus.iter().chain([&tau_ref]) {
        if config::steps_for(t_final, t).is_none() {
            return Err(PfcError::InvalidArgument(format!(
                "final time {t_final} is not an integer multiple of tau = {t}"
            )));
        }
    }
    let reference = integrate(u0, params, tau_ref, t_final)?;
    let mut points = Vec::with_capacity(taus.len());
    for &tau in taus {
        let u = integrate(u0, params, tau, t_final)?;
        let d = u.sub(&reference);
        points.push(OrderPoint {
            tau,
            steps: config::steps_for(t_final, tau).unwrap_or(0),
            err_l2: grid::norm2(&d),
            err_linf: d.max_abs(),
        });
    }
    let floor = 1e-11 * reference.max_abs().max(1.0);
    let exact = points.iter().all(|p| p.err_linf <= floor);
    let ts: Vec<f64> = points.iter().map(|p| p.tau).collect();
    let e2: Vec<f64> = points.iter().map(|p| p.err_l2).collect();
    let ei: Vec<f64> = points.iter().map(|p| p.err_linf).collect();
    Ok(OrderStudy { tau_ref, order_l2: observed_order(&ts, &e2), order_linf: observed_order(&ts, &ei), points, exact })
}

/// `pfc order`. Returns whether the observed order is at least 1.9.
pub fn cmd_order(args: &OrderArgs, out: &mut dyn Write) -> Result<bool> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg = cfg.with_seed(s);
    }
    let u0 = cfg.initial_field()?;
    let params = cfg.scheme_params()?;
    let t_final = cfg.final_time();
    let study = order_study(&u0, &params, &args.taus, args.tau_ref, t_final)?;
    emit(out, format!("t_final={t_final}"))?;
    emit(out, format!("tau_ref={}", study.tau_ref))?;
    let mut csv = String::from("tau,steps,err_l2,err_linf\n");
    for p in &study.points {
        emit(out, format!("tau={} steps={} err_l2={:.16e} err_linf={:.16e}", p.tau, p.steps, p.err_l2, p.err_linf))?;
        csv.push_str(&format!("{},{},{:.16e},{:.16e}\n", p.tau, p.steps, p.err_l2, p.err_linf));
    }
    if study.exact {
        emit(out, "order=exact")?;
    } else {
        emit(out, format!("order_l2={:.6}", study.order_l2))?;
        emit(out, format!("order_linf={:.6}", study.order_linf))?;
    }
    emit(out, format!("passed={}", study.passed()))?;
    if let Some(dir) = &args.out_dir {
        mkdir(dir)?;
        let p = dir.join("order.csv");
        std::fs::write(&p, csv).map_err(|e| PfcError::io(&p, e))?;
    }
    Ok(study.passed())
}

/// `pfc constants`.
pub fn cmd_constants(args: &ConstantsArgs, out: &mut dyn Write) -> Result<bool> {
    let spec = GridSpec::new(args.dim, args.n, args.length)?;
    if !(args.epsilon > 0.0 && args.epsilon < 1.0) {
        return Err(PfcError::InvalidArgument(format!("epsilon must lie in (0, 1), got {}", args.epsilon)));
    }
    let chain = scheme::constants_chain(args.e0, args.beta0, spec.volume(), args.c2, args.c3, args.epsilon)?;
    emit(out, format!("volume={}", spec.volume()))?;
    emit(out, format!("beta0={}", chain.beta0))?;
    for (k, v) in chain.entries() {
        emit(out, format!("{k}={v}"))?;
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_fit() {
        let taus = [0.4, 0.2, 0.1];
        let errs: Vec<f64> = taus.iter().map(|t| 3.0 * t * t).collect();
        assert!((observed_order(&taus, &errs) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cli_parses() {
        let c = Cli::try_parse_from(["pfc", "order", "--config", "a.cfg", "--taus", "0.02,0.01"]).unwrap();
        match c.command {
            Command::Order(a) => assert_eq!(a.taus, vec![0.02, 0.01]),
            _ => panic!(),
        }
        assert!(Cli::try_parse_from(["pfc", "verify", "bogus"]).is_err());
        let c = Cli::try_parse_from(["pfc", "constants", "--e0", "-0.5", "--c2", "1", "--c3", "1"]).unwrap();
        assert!(matches!(c.command, Command::Constants(ConstantsArgs { e0, .. }) if e0 == -0.5));
    }

    #[test]
    fn constants_output() {
        let args = ConstantsArgs { e0: 0.0, beta0: 0.0, dim: 2, n: 16, length: 1.0, epsilon: 0.25, c2: 1.0, c3: 1.0 };
        let mut buf = Vec::new();
        assert!(cmd_constants(&args, &mut buf).unwrap());
        let text = String::from_utf8(buf).unwrap();
        for want in ["C1=2\n", "C2=2\n", "C3=24\n", "C4=3\n", "C5=3\n", "C6=81\n"] {
            assert!(text.contains(want), "{text}");
        }
    }
}
