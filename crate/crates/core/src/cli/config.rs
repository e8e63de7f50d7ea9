//! Flat `key = value` run configuration.
//!
//! ```text
//! # grid
//! dim = 2
//! n = 64
//! length = 32
//! epsilon = 0.25
//! tau = 0.01
//! n_steps = 10000        # or t_final = 100
//! kappa_policy = lemma_adaptive
//! init = noise
//! init.beta0 = 0.07
//! init.delta = 0.01
//! init.seed = 42
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{PfcError, Result};
use crate::grid::{GridSpec, RealField};
use crate::scheme::{Forcing, KappaPolicy, SchemeParams};
use crate::spectral::lowpass;

use super::snapshot;

/// Initial data.
#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    /// `β₀ + δ(ξ − ξ̄)` with `ξ` uniform on `[−1, 1]`, optionally low-passed.
    Noise {
        beta0: f64,
        delta: f64,
        seed: u64,
        cutoff: Option<usize>,
    },
    /// `β₀ + A cos(2π k·x / L)`.
    SingleMode { beta0: f64, mode: Vec<i64>, amplitude: f64 },
    /// Field loaded from a snapshot.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub path: PathBuf,
    pub spec: GridSpec,
    pub epsilon: f64,
    pub tau: f64,
    pub n_steps: usize,
    pub t_final: Option<f64>,
    pub policy: KappaPolicy,
    pub forcing: Forcing,
    pub init: InitSpec,
    pub out_dir: PathBuf,
    /// 0 disables periodic snapshots.
    pub snapshot_every: usize,
    /// 0 disables checkpoints.
    pub checkpoint_every: usize,
}

const KEYS: &[&str] = &[
    "dim",
    "n",
    "length",
    "epsilon",
    "tau",
    "n_steps",
    "t_final",
    "kappa_policy",
    "kappa",
    "c2",
    "c3",
    "forcing",
    "init",
    "init.beta0",
    "init.delta",
    "init.seed",
    "init.cutoff",
    "init.mode",
    "init.amplitude",
    "init.path",
    "out_dir",
    "snapshot_every",
    "checkpoint_every",
];

struct Entries {
    path: PathBuf,
    map: HashMap<String, (usize, String)>,
    end_line: usize,
}

impl Entries {
    fn err(&self, line: usize, msg: impl Into<String>) -> PfcError {
        PfcError::Config { path: self.path.clone(), line, msg: msg.into() }
    }

    fn line(&self, key: &str) -> usize {
        self.map.get(key).map(|e| e.0).unwrap_or(self.end_line)
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| self.err(line, format!("{key}: expected {what}, got `{v}`"))),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<T> {
        self.parse(key, what)?
            .ok_or_else(|| self.err(self.end_line, format!("missing required key `{key}`")))
    }

    fn real(&self, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.parse(key, "a real number")?;
        match v {
            Some(x) if !x.is_finite() => Err(self.err(self.line(key), format!("{key}: must be finite"))),
            _ => Ok(v),
        }
    }

    fn check(&self, key: &str, ok: bool, msg: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.err(self.line(key), format!("{key}: {msg}")))
        }
    }
}

fn tokenize(path: &Path, text: &str) -> Result<Entries> {
    let mut map = HashMap::new();
    let mut end_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        end_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| PfcError::Config { path: path.to_path_buf(), line, msg };
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(err(format!("unknown key `{k}`")));
        }
        if v.is_empty() {
            return Err(err(format!("{k}: empty value")));
        }
        if let Some((first, _)) = map.insert(k.to_string(), (line, v.to_string())) {
            return Err(err(format!("duplicate key `{k}` (first set on line {first})")));
        }
    }
    Ok(Entries { path: path.to_path_buf(), map, end_line: end_line + 1 })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PfcError::io(path, e))?;
        Self::parse(path, &text)
    }

    /// Parses config text; relative paths resolve against the directory of `path`.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let e = tokenize(path, text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();

        let dim: usize = e.required("dim", "an integer")?;
        e.check("dim", dim == 2 || dim == 3, "must be 2 or 3")?;
        let n: usize = e.required("n", "an integer")?;
        e.check("n", n >= 4, "must be at least 4")?;
        let length = e.real("length")?.ok_or_else(|| e.err(e.end_line, "missing required key `length`"))?;
        e.check("length", length > 0.0, "must be positive")?;
        let spec = GridSpec::new(dim, n, length).map_err(|err| e.err(e.line("n"), err.to_string()))?;

        let epsilon = e.real("epsilon")?.ok_or_else(|| e.err(e.end_line, "missing required key `epsilon`"))?;
        e.check("epsilon", epsilon > 0.0 && epsilon < 1.0, "must lie in (0, 1)")?;
        let tau = e.real("tau")?.ok_or_else(|| e.err(e.end_line, "missing required key `tau`"))?;
        e.check("tau", tau > 0.0, "must be positive")?;

        let steps: Option<usize> = e.parse("n_steps", "a nonnegative integer")?;
        let t_final = e.real("t_final")?;
        let n_steps = match (steps, t_final) {
            (Some(_), Some(_)) => return Err(e.err(e.line("t_final"), "give either n_steps or t_final, not both")),
            (Some(s), None) => s,
            (None, Some(t)) => {
                e.check("t_final", t >= 0.0, "must be nonnegative")?;
                steps_for(t, tau).ok_or_else(|| {
                    e.err(e.line("t_final"), format!("t_final = {t} is not an integer multiple of tau = {tau}"))
                })?
            }
            (None, None) => return Err(e.err(e.end_line, "missing required key `n_steps` (or `t_final`)")),
        };

        let policy = match e.raw("kappa_policy").map(|(_, v)| v).unwrap_or("lemma_adaptive") {
            "fixed" => {
                let k = e.real("kappa")?.ok_or_else(|| {
                    e.err(e.line("kappa_policy"), "kappa_policy = fixed needs `kappa`")
                })?;
                e.check("kappa", k >= 0.0, "must be nonnegative")?;
                KappaPolicy::Fixed(k)
            }
            "lemma_adaptive" => KappaPolicy::LemmaAdaptive { strict: false },
            "lemma_strict" => KappaPolicy::LemmaAdaptive { strict: true },
            "theory" => {
                let need = |k: &str| {
                    e.real(k)?.ok_or_else(|| e.err(e.line("kappa_policy"), format!("kappa_policy = theory needs `{k}`")))
                };
                let (c2, c3) = (need("c2")?, need("c3")?);
                e.check("c2", c2 > 0.0, "must be positive")?;
                e.check("c3", c3 > 0.0, "must be positive")?;
                KappaPolicy::Theory { c2, c3 }
            }
            other => {
                return Err(e.err(
                    e.line("kappa_policy"),
                    format!("kappa_policy: expected fixed, lemma_adaptive, lemma_strict or theory, got `{other}`"),
                ))
            }
        };
        if e.raw("kappa").is_some() && !matches!(policy, KappaPolicy::Fixed(_)) {
            return Err(e.err(e.line("kappa"), "kappa is only used with kappa_policy = fixed"));
        }

        let forcing = match e.raw("forcing").map(|(_, v)| v).unwrap_or("full") {
            "full" => Forcing::Full,
            "no_cube" => Forcing::NoCube,
            "off" => Forcing::Off,
            other => {
                return Err(e.err(e.line("forcing"), format!("forcing: expected full, no_cube or off, got `{other}`")))
            }
        };

        let beta0 = e.real("init.beta0")?.unwrap_or(0.0);
        let init = match e.raw("init").map(|(_, v)| v).unwrap_or("noise") {
            "noise" => {
                let delta = e.real("init.delta")?.unwrap_or(0.01);
                e.check("init.delta", delta >= 0.0, "must be nonnegative")?;
                let seed = e.parse("init.seed", "an unsigned integer")?.unwrap_or(0);
                let cutoff: Option<usize> = e.parse("init.cutoff", "an integer")?;
                if let Some(c) = cutoff {
                    e.check("init.cutoff", c >= 1, "must be at least 1")?;
                }
                InitSpec::Noise { beta0, delta, seed, cutoff }
            }
            "single_mode" => {
                let (line, raw) = e
                    .raw("init.mode")
                    .ok_or_else(|| e.err(e.line("init"), "init = single_mode needs `init.mode`"))?;
                let mode = raw
                    .split(',')
                    .map(|s| s.trim().parse::<i64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| e.err(line, format!("init.mode: expected comma-separated integers, got `{raw}`")))?;
                if mode.len() != dim {
                    return Err(e.err(line, format!("init.mode: expected {dim} components, got {}", mode.len())));
                }
                let amplitude = e.real("init.amplitude")?.unwrap_or(1.0);
                InitSpec::SingleMode { beta0, mode, amplitude }
            }
            "file" => {
                let (_, p) = e
                    .raw("init.path")
                    .ok_or_else(|| e.err(e.line("init"), "init = file needs `init.path`"))?;
                InitSpec::File { path: base.join(p) }
            }
            other => {
                return Err(e.err(e.line("init"), format!("init: expected noise, single_mode or file, got `{other}`")))
            }
        };

        let out_dir = base.join(e.raw("out_dir").map(|(_, v)| v).unwrap_or("out"));
        let snapshot_every = e.parse("snapshot_every", "a nonnegative integer")?.unwrap_or(0);
        let checkpoint_every = e.parse("checkpoint_every", "a nonnegative integer")?.unwrap_or(0);

        Ok(Self {
            path: path.to_path_buf(),
            spec,
            epsilon,
            tau,
            n_steps,
            t_final,
            policy,
            forcing,
            init,
            out_dir,
            snapshot_every,
            checkpoint_every,
        })
    }

    pub fn scheme_params(&self) -> Result<SchemeParams> {
        Ok(SchemeParams::new(self.tau, self.epsilon, self.policy)?.with_forcing(self.forcing))
    }

    /// `n_steps · τ`.
    pub fn final_time(&self) -> f64 {
        self.t_final.unwrap_or(self.n_steps as f64 * self.tau)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        if let InitSpec::Noise { seed: s, .. } = &mut self.init {
            *s = seed;
        }
        self
    }

    /// Builds the initial field.
    pub fn initial_field(&self) -> Result<RealField> {
        let spec = self.spec;
        match &self.init {
            InitSpec::Noise { beta0, delta, seed, cutoff } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut xi = RealField::random(spec, &mut rng);
                if let Some(c) = cutoff {
                    xi = lowpass(&xi, *c);
                }
                let xi = xi.mean_free();
                Ok(xi.map(|x| beta0 + delta * x))
            }
            InitSpec::SingleMode { beta0, mode, amplitude } => {
                let l = spec.len();
                let k: Vec<f64> = mode.iter().map(|&m| m as f64).collect();
                Ok(RealField::from_fn(spec, |x| {
                    let phase: f64 = x.iter().zip(&k).map(|(xi, ki)| xi * ki).sum();
                    beta0 + amplitude * (2.0 * std::f64::consts::PI * phase / l).cos()
                }))
            }
            InitSpec::File { path } => {
                let snap = snapshot::read(path)?;
                if snap.field.spec() != &spec {
                    return Err(PfcError::Snapshot {
                        path: path.clone(),
                        msg: format!("grid {:?} does not match the configured {:?}", snap.field.spec(), spec),
                    });
                }
                Ok(snap.field)
            }
        }
    }
}

/// `t / τ` when it is an integer up to a relative `1e-9`.
pub fn steps_for(t: f64, tau: f64) -> Option<usize> {
    let r = t / tau;
    let k = r.round();
    ((r - k).abs() <= 1e-9 * r.abs().max(1.0) && k >= 0.0).then_some(k as usize)
}
