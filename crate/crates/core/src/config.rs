//! Run configuration: flat `key=value` files with `#` comments, keys
//! namespaced by dotted section prefixes (`target.d`, `kernel.c`,
//! `sweep.n`). Resolution fills in defaults, validates domains, and rejects
//! unknown or duplicate keys by name. Every resolved config can be written
//! back out and re-resolved to the identical run — that is what makes runs
//! reproducible from the config block embedded in result files.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiments;
use crate::targets::Target;
use crate::KernelKind;

/// Parse `key=value` lines into a map. Blank lines and `#` comments are
/// skipped; duplicate keys and lines without `=` are errors.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(format!("line {}: expected key=value, got `{line}`", lineno + 1)));
        };
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::config(format!("line {}: empty key", lineno + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::config(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

/// Consumes keys out of a parsed map, tracking which were used so leftovers
/// can be rejected by name.
struct KeyReader {
    map: BTreeMap<String, String>,
}

impl KeyReader {
    fn new(map: BTreeMap<String, String>) -> Self {
        KeyReader { map }
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.map.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| Error::config(format!("invalid value for `{key}`: {e} (got `{raw}`)"))),
        }
    }

    fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        self.take(key)?.ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    fn finish(self) -> Result<()> {
        if self.map.is_empty() {
            Ok(())
        } else {
            let keys: Vec<String> = self.map.keys().map(|k| format!("`{k}`")).collect();
            Err(Error::config(format!("unknown key {}", keys.join(", "))))
        }
    }
}

fn domain(key: &str, ok: bool, got: impl Display, want: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(format!("invalid value for `{key}`: must be {want}, got {got}")))
    }
}

fn resolve_seed(r: &mut KeyReader, seed_override: Option<u64>) -> Result<u64> {
    let from_file = r.take::<u64>("seed")?;
    Ok(seed_override.or(from_file).unwrap_or(1))
}

fn resolve_kernel(r: &mut KeyReader, echo: &mut BTreeMap<String, String>) -> Result<(KernelKind, f64)> {
    let kind: KernelKind = r
        .require::<String>("kernel.kind")?
        .parse()
        .map_err(|e: Error| Error::config(format!("`kernel.kind`: {e}")))?;
    let c: f64 = r.require("kernel.c")?;
    domain("kernel.c", c.is_finite() && c > 0.0 && c <= 1.0, c, "in (0, 1]")?;
    echo.insert("kernel.kind".into(), kind.as_str().into());
    echo.insert("kernel.c".into(), fmt_value(c));
    Ok((kind, c))
}

fn resolve_target(r: &mut KeyReader, echo: &mut BTreeMap<String, String>) -> Result<Target> {
    let kind: String = r.require("target.kind")?;
    echo.insert("target.kind".into(), kind.clone());
    let d: usize = r.require("target.d")?;
    echo.insert("target.d".into(), d.to_string());
    let target = match kind.as_str() {
        "normal_iid" => Target::normal_iid(d),
        "laplace_iid" => Target::laplace_iid(d),
        "exchangeable_normal" => {
            let rho: f64 = r.require("target.rho")?;
            echo.insert("target.rho".into(), fmt_value(rho));
            Target::exchangeable_normal(d, rho)
        }
        "student_t" => {
            let rho: f64 = r.require("target.rho")?;
            let nu: f64 = r.take_or("target.nu", 50.0)?;
            echo.insert("target.rho".into(), fmt_value(rho));
            echo.insert("target.nu".into(), fmt_value(nu));
            Target::student_t(d, rho, nu)
        }
        other => {
            return Err(Error::config(format!(
                "invalid value for `target.kind`: unknown target `{other}` (expected normal_iid, laplace_iid, exchangeable_normal, or student_t)"
            )))
        }
    };
    target.map_err(|e| Error::config(format!("target: {e}")))
}

/// Canonical value formatting for resolved-config echoes. Rust's shortest
/// round-trip float formatting guarantees reparsing gives the same bits.
fn fmt_value(v: f64) -> String {
    format!("{v}")
}

/// Resolved `theory-curve` run.
#[derive(Debug, Clone)]
pub struct TheoryCurveConfig {
    pub kind: KernelKind,
    pub c: f64,
    /// Roughness-type constant fed to the acceptance formulas (I for the
    /// random-walk kernel, K for the drift kernel).
    pub constant: f64,
    /// Set when the constant was derived from an equicorrelation overlay.
    pub rho: Option<f64>,
    pub d: usize,
    pub l_min: f64,
    pub l_max: f64,
    pub points: usize,
    /// Optional (a, b) cost model for the update-fraction optimum.
    pub cost: Option<(f64, f64)>,
    pub seed: u64,
    pub resolved: BTreeMap<String, String>,
}

pub fn resolve_theory_curve(
    map: BTreeMap<String, String>,
    seed_override: Option<u64>,
) -> Result<TheoryCurveConfig> {
    let mut r = KeyReader::new(map);
    let mut echo = BTreeMap::new();

    let kind: KernelKind = r
        .require::<String>("theory.kind")?
        .parse()
        .map_err(|e: Error| Error::config(format!("`theory.kind`: {e}")))?;
    let c: f64 = r.take_or("theory.c", 1.0)?;
    domain("theory.c", c.is_finite() && c > 0.0 && c <= 1.0, c, "in (0, 1]")?;

    let rho = r.take::<f64>("theory.rho")?;
    let explicit = match kind {
        KernelKind::Rwm => r.take::<f64>("theory.i")?,
        KernelKind::Mala => r.take::<f64>("theory.k")?,
    };
    // reject the constant for the other kind outright via finish(), but the
    // overlay and an explicit constant must also not be mixed
    if rho.is_some() && explicit.is_some() {
        return Err(Error::config(
            "`theory.rho` derives the roughness constant; do not also set `theory.i`/`theory.k`",
        ));
    }
    let constant = match (rho, explicit) {
        (Some(rho), None) => {
            domain("theory.rho", rho.is_finite() && (0.0..1.0).contains(&rho), rho, "in [0, 1)")?;
            match kind {
                KernelKind::Rwm => crate::theory::exchangeable_roughness(rho),
                KernelKind::Mala => crate::theory::exchangeable_mala_k(rho),
            }
            .map_err(|e| Error::config(format!("`theory.rho`: {e}")))?
        }
        (None, Some(k)) => {
            let key = if kind == KernelKind::Rwm { "theory.i" } else { "theory.k" };
            domain(key, k.is_finite() && k > 0.0, k, "positive")?;
            k
        }
        (None, None) => match kind {
            KernelKind::Rwm => 1.0,
            KernelKind::Mala => 0.25,
        },
        (Some(_), Some(_)) => unreachable!("rejected above"),
    };

    let d: usize = r.take_or("theory.d", 20)?;
    domain("theory.d", d >= 1, d, "at least 1")?;
    let l_min: f64 = r.take_or("theory.l_min", 0.1)?;
    let l_max: f64 = r.take_or("theory.l_max", 6.0)?;
    domain("theory.l_min", l_min.is_finite() && l_min > 0.0 && l_min < l_max, l_min, "positive and below theory.l_max")?;
    domain("theory.l_max", l_max.is_finite(), l_max, "finite")?;
    let points: usize = r.take_or("theory.points", 200)?;
    domain("theory.points", points >= 2, points, "at least 2")?;

    let cost_a = r.take::<f64>("theory.cost_a")?;
    let cost_b = r.take::<f64>("theory.cost_b")?;
    let cost = match (cost_a, cost_b) {
        (Some(a), Some(b)) => {
            domain("theory.cost_a", a.is_finite() && a >= 0.0, a, "non-negative")?;
            domain("theory.cost_b", b.is_finite() && b >= 0.0, b, "non-negative")?;
            Some((a, b))
        }
        (None, None) => None,
        _ => {
            return Err(Error::config(
                "`theory.cost_a` and `theory.cost_b` must be given together",
            ))
        }
    };

    let seed = resolve_seed(&mut r, seed_override)?;
    r.finish()?;

    echo.insert("theory.kind".into(), kind.as_str().into());
    echo.insert("theory.c".into(), fmt_value(c));
    match rho {
        Some(rho) => {
            echo.insert("theory.rho".into(), fmt_value(rho));
        }
        None => {
            let key = if kind == KernelKind::Rwm { "theory.i" } else { "theory.k" };
            echo.insert(key.into(), fmt_value(constant));
        }
    }
    echo.insert("theory.d".into(), d.to_string());
    echo.insert("theory.l_min".into(), fmt_value(l_min));
    echo.insert("theory.l_max".into(), fmt_value(l_max));
    echo.insert("theory.points".into(), points.to_string());
    if let Some((a, b)) = cost {
        echo.insert("theory.cost_a".into(), fmt_value(a));
        echo.insert("theory.cost_b".into(), fmt_value(b));
    }
    echo.insert("seed".into(), seed.to_string());

    Ok(TheoryCurveConfig { kind, c, constant, rho, d, l_min, l_max, points, cost, seed, resolved: echo })
}

/// Resolved `sweep` run: the σ² grid bounds are always concrete here —
/// either user-supplied or derived from the theory optimum.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub target: Target,
    pub kind: KernelKind,
    pub c: f64,
    pub n_steps: u64,
    pub points: usize,
    pub replicates: u32,
    pub sigma2_min: f64,
    pub sigma2_max: f64,
    pub seed: u64,
    pub resolved: BTreeMap<String, String>,
}

pub fn resolve_sweep(map: BTreeMap<String, String>, seed_override: Option<u64>) -> Result<SweepConfig> {
    let mut r = KeyReader::new(map);
    let mut echo = BTreeMap::new();

    let target = resolve_target(&mut r, &mut echo)?;
    let (kind, c) = resolve_kernel(&mut r, &mut echo)?;

    let n_steps: u64 = r.take_or("sweep.n", 100_000)?;
    domain("sweep.n", n_steps >= 1000, n_steps, "at least 1000")?;
    let points: usize = r.take_or("sweep.points", 50)?;
    domain("sweep.points", points >= 2, points, "at least 2")?;
    let replicates: u32 = r.take_or("sweep.replicates", 1)?;
    domain("sweep.replicates", replicates >= 1, replicates, "at least 1")?;

    let lo = r.take::<f64>("sweep.sigma2_min")?;
    let hi = r.take::<f64>("sweep.sigma2_max")?;
    let (sigma2_min, sigma2_max) = match (lo, hi) {
        (Some(lo), Some(hi)) => {
            domain("sweep.sigma2_min", lo.is_finite() && lo > 0.0 && lo < hi, lo, "positive and below sweep.sigma2_max")?;
            domain("sweep.sigma2_max", hi.is_finite(), hi, "finite")?;
            (lo, hi)
        }
        (None, None) => experiments::default_sigma2_bounds(&target, kind, c)
            .map_err(|e| Error::config(format!("sweep grid: {e}; set `sweep.sigma2_min` and `sweep.sigma2_max`")))?,
        _ => {
            return Err(Error::config(
                "`sweep.sigma2_min` and `sweep.sigma2_max` must be given together",
            ))
        }
    };

    let seed = resolve_seed(&mut r, seed_override)?;
    r.finish()?;

    echo.insert("sweep.n".into(), n_steps.to_string());
    echo.insert("sweep.points".into(), points.to_string());
    echo.insert("sweep.replicates".into(), replicates.to_string());
    echo.insert("sweep.sigma2_min".into(), fmt_value(sigma2_min));
    echo.insert("sweep.sigma2_max".into(), fmt_value(sigma2_max));
    echo.insert("seed".into(), seed.to_string());

    Ok(SweepConfig {
        target,
        kind,
        c,
        n_steps,
        points,
        replicates,
        sigma2_min,
        sigma2_max,
        seed,
        resolved: echo,
    })
}

impl SweepConfig {
    pub fn to_spec(&self) -> Result<experiments::SweepSpec> {
        Ok(experiments::SweepSpec {
            target: self.target.clone(),
            kind: self.kind,
            c: self.c,
            n_steps: self.n_steps,
            grid: experiments::geometric_grid(self.sigma2_min, self.sigma2_max, self.points)?,
            replicates: self.replicates,
            seed: self.seed,
        })
    }
}

/// Resolved `tune` run.
#[derive(Debug, Clone)]
pub struct TuneConfig {
    pub target: Target,
    pub kind: KernelKind,
    pub c: f64,
    pub target_accept: f64,
    pub budget: u64,
    pub seed: u64,
    pub resolved: BTreeMap<String, String>,
}

pub fn resolve_tune(map: BTreeMap<String, String>, seed_override: Option<u64>) -> Result<TuneConfig> {
    let mut r = KeyReader::new(map);
    let mut echo = BTreeMap::new();

    let target = resolve_target(&mut r, &mut echo)?;
    let (kind, c) = resolve_kernel(&mut r, &mut echo)?;

    let default_accept = match kind {
        KernelKind::Rwm => 0.234,
        KernelKind::Mala => 0.574,
    };
    let target_accept: f64 = r.take_or("tune.target_accept", default_accept)?;
    domain(
        "tune.target_accept",
        target_accept.is_finite() && target_accept > 0.0 && target_accept < 1.0,
        target_accept,
        "in (0, 1)",
    )?;
    let budget: u64 = r.take_or("tune.budget", 200_000)?;
    domain("tune.budget", budget >= 10_000, budget, "at least 10000 steps")?;

    let seed = resolve_seed(&mut r, seed_override)?;
    r.finish()?;

    echo.insert("tune.target_accept".into(), fmt_value(target_accept));
    echo.insert("tune.budget".into(), budget.to_string());
    echo.insert("seed".into(), seed.to_string());

    Ok(TuneConfig { target, kind, c, target_accept, budget, seed, resolved: echo })
}

/// Resolved `mixing` run over the equicorrelated normal family.
#[derive(Debug, Clone)]
pub struct MixingConfig {
    pub kind: KernelKind,
    pub c: f64,
    pub rho: f64,
    pub ds: Vec<usize>,
    pub steps_per_d: Option<u64>,
    pub seed: u64,
    pub resolved: BTreeMap<String, String>,
}

pub fn resolve_mixing(map: BTreeMap<String, String>, seed_override: Option<u64>) -> Result<MixingConfig> {
    let mut r = KeyReader::new(map);
    let mut echo = BTreeMap::new();

    let (kind, c) = resolve_kernel(&mut r, &mut echo)?;
    let rho: f64 = r.require("target.rho")?;
    domain("target.rho", rho.is_finite() && rho > 0.0 && rho < 1.0, rho, "in (0, 1)")?;

    let ds_raw: String = r.take_or("mixing.ds", "10,20,40".to_string())?;
    let ds: Vec<usize> = ds_raw
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|e| Error::config(format!("invalid value for `mixing.ds`: {e} (got `{part}`)")))
        })
        .collect::<Result<_>>()?;
    domain("mixing.ds", ds.len() >= 2, ds.len(), "a list of at least two dimensions")?;
    domain(
        "mixing.ds",
        ds.windows(2).all(|w| w[0] < w[1]) && ds[0] >= 2,
        ds_raw.trim(),
        "strictly increasing dimensions, each at least 2",
    )?;
    let steps_per_d = r.take::<u64>("mixing.steps_per_d")?;
    if let Some(steps) = steps_per_d {
        domain("mixing.steps_per_d", steps >= 1000, steps, "at least 1000")?;
    }

    let seed = resolve_seed(&mut r, seed_override)?;
    r.finish()?;

    echo.insert("target.rho".into(), fmt_value(rho));
    echo.insert(
        "mixing.ds".into(),
        ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","),
    );
    if let Some(steps) = steps_per_d {
        echo.insert("mixing.steps_per_d".into(), steps.to_string());
    }
    echo.insert("seed".into(), seed.to_string());

    Ok(MixingConfig { kind, c, rho, ds, steps_per_d, seed, resolved: echo })
}
