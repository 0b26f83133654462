//! Experiment configuration: TOML text to validated run descriptions.
//!
//! Unknown keys are rejected. Every error carries the line of the offending
//! key when it can be located.

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use fracfront_core::analytic::LatticeSpec;
use fracfront_core::fraclap::Normalization;
use fracfront_core::grid::{make_algebraic_datum, make_front_datum, Field, Grid};
use fracfront_core::nonlin::{Nonlinearity, DEFAULT_SMOOTHING};
use fracfront_core::solver::{DtControl, SolverConfig};
use serde::Deserialize;
use toml::Spanned;

/// Parse or validation failure with its position in the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

struct Source<'a>(&'a str);

impl Source<'_> {
    fn line_of(&self, span: Range<usize>) -> usize {
        self.0[..span.start.min(self.0.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, span: Range<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError { line: Some(self.line_of(span)), message: message.into() })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Spanned<String>,
    output_dir: Option<String>,
    seed: Option<u64>,
    threads: Option<usize>,
    solver: Option<Spanned<RawSolver>>,
    #[serde(rename = "super")]
    supersolution: Option<Spanned<RawSuper>>,
    #[serde(rename = "sub")]
    subsolution: Option<Spanned<RawSub>>,
    kernel: Option<Spanned<RawKernel>>,
    sweep: Option<Spanned<RawSweep>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    s: Option<Spanned<f64>>,
    kind: Option<Spanned<String>>,
    r: Option<Spanned<f64>>,
    beta: Option<Spanned<f64>>,
    theta: Option<Spanned<f64>>,
    smoothing: Option<Spanned<f64>>,
    #[serde(rename = "N", alias = "n")]
    n: Spanned<i64>,
    #[serde(rename = "L", alias = "length")]
    length: Spanned<f64>,
    x_min: Option<Spanned<f64>>,
    dt: Spanned<f64>,
    #[serde(rename = "T", alias = "t_end")]
    t_end: Spanned<f64>,
    dt_control: Option<Spanned<String>>,
    adaptive_tol: Option<Spanned<f64>>,
    levels: Option<Spanned<Vec<f64>>>,
    snapshot_times: Option<Spanned<Vec<f64>>>,
    normalization: Option<Spanned<String>>,
    datum: Option<Spanned<String>>,
    plateau: Option<Spanned<f64>>,
    drop_start: Option<Spanned<f64>>,
    drop_end: Option<Spanned<f64>>,
    d: Option<Spanned<f64>>,
    exponent: Option<Spanned<f64>>,
    fit_window: Option<Spanned<Vec<f64>>>,
    epsilon: Option<Spanned<f64>>,
    early_stop: Option<bool>,
    trace_every: Option<Spanned<i64>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLattice {
    t_min: Option<f64>,
    t_max: Option<f64>,
    t_points: Option<usize>,
    x_points: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuper {
    s: Spanned<f64>,
    beta: Spanned<f64>,
    r: Option<Spanned<f64>>,
    p: Option<Spanned<f64>>,
    gamma: Option<Spanned<f64>>,
    normalization: Option<Spanned<String>>,
    lattice: Option<RawLattice>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSub {
    s: Spanned<f64>,
    beta: Spanned<f64>,
    r: Option<Spanned<f64>>,
    d: Option<Spanned<f64>>,
    normalization: Option<Spanned<String>>,
    lattice: Option<RawLattice>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    s: Option<Spanned<Vec<f64>>>,
    random_points: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    s: Spanned<Vec<f64>>,
    kind: Spanned<Vec<String>>,
}

/// Initial datum choice.
#[derive(Debug, Clone, PartialEq)]
pub enum DatumSpec {
    Front { plateau: f64, drop_start: f64, drop_end: f64 },
    Algebraic { d: f64, exponent: f64 },
}

impl DatumSpec {
    pub fn build(&self, grid: &Grid) -> fracfront_core::Result<Field> {
        match *self {
            DatumSpec::Front { plateau, drop_start, drop_end } => make_front_datum(grid, plateau, drop_start, drop_end),
            DatumSpec::Algebraic { d, exponent } => make_algebraic_datum(grid, d, exponent),
        }
    }
}

/// One simulation with its analysis settings.
#[derive(Debug, Clone)]
pub struct SimulateSpec {
    pub solver: SolverConfig,
    pub kind: String,
    pub datum: DatumSpec,
    pub fit_window: (f64, f64),
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct SuperSpec {
    pub s: f64,
    pub beta: f64,
    pub r: f64,
    pub p: Option<f64>,
    /// `None`: twice the computed `γ2`.
    pub gamma: Option<f64>,
    pub normalization: Normalization,
    pub lattice: LatticeSpec,
}

#[derive(Debug, Clone)]
pub struct SubSpec {
    pub s: f64,
    pub beta: f64,
    pub r: f64,
    pub d: f64,
    pub normalization: Normalization,
    pub lattice: LatticeSpec,
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub s: Vec<f64>,
    pub random_points: usize,
}

#[derive(Debug, Clone)]
pub enum Mode {
    Simulate(Box<SimulateSpec>),
    CertifySuper(SuperSpec),
    CertifySub(SubSpec),
    KernelCheck(KernelSpec),
    Sweep(Vec<SimulateSpec>),
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Simulate(_) => "simulate",
            Mode::CertifySuper(_) => "certify_super",
            Mode::CertifySub(_) => "certify_sub",
            Mode::KernelCheck(_) => "kernel_check",
            Mode::Sweep(_) => "sweep",
        }
    }
}

/// Validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

fn toml_error(e: toml::de::Error, src: &Source) -> ConfigError {
    let line = e.span().map(|sp| src.line_of(sp));
    ConfigError { line, message: e.message().trim().to_string() }
}

fn in_open_unit(src: &Source, v: &Spanned<f64>, name: &str) -> Result<f64, ConfigError> {
    let x = *v.get_ref();
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        src.err(v.span(), format!("{name} must lie in (0,1), got {x}"))
    }
}

fn positive(src: &Source, v: &Spanned<f64>, name: &str) -> Result<f64, ConfigError> {
    let x = *v.get_ref();
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        src.err(v.span(), format!("{name} must be positive, got {x}"))
    }
}

fn opt<T: Copy>(v: &Option<Spanned<T>>) -> Option<T> {
    v.as_ref().map(|x| *x.get_ref())
}

fn normalization(src: &Source, v: &Option<Spanned<String>>) -> Result<Normalization, ConfigError> {
    match v {
        None => Ok(Normalization::Fourier),
        Some(sp) => match sp.get_ref().as_str() {
            "fourier" => Ok(Normalization::Fourier),
            "unit" => Ok(Normalization::Unit),
            other => src.err(sp.span(), format!("normalization must be \"fourier\" or \"unit\", got \"{other}\"")),
        },
    }
}

fn lattice(raw: Option<RawLattice>) -> Result<LatticeSpec, ConfigError> {
    let mut l = LatticeSpec::default();
    if let Some(r) = raw {
        l.t_min = r.t_min.unwrap_or(l.t_min);
        l.t_max = r.t_max.unwrap_or(l.t_max);
        l.t_points = r.t_points.unwrap_or(l.t_points);
        l.x_points = r.x_points.unwrap_or(l.x_points);
    }
    l.validate().map_err(|e| ConfigError { line: None, message: format!("lattice: {e}") })?;
    Ok(l)
}

const KINDS: [&str; 4] = ["kpp", "monostable", "ignition", "bistable"];

fn nonlinearity(src: &Source, raw: &RawSolver, kind: &str, kind_span: Range<usize>) -> Result<Nonlinearity, ConfigError> {
    let r = match &raw.r {
        Some(v) => positive(src, v, "r")?,
        None => 1.0,
    };
    let need = |v: &Option<Spanned<f64>>, name: &str| -> Result<Spanned<f64>, ConfigError> {
        v.clone().ok_or_else(|| ConfigError {
            line: Some(src.line_of(kind_span.clone())),
            message: format!("kind \"{kind}\" requires {name}"),
        })
    };
    let built = match kind {
        "kpp" => Nonlinearity::kpp(r),
        "monostable" | "degenerate_monostable" => {
            let b = need(&raw.beta, "beta")?;
            if *b.get_ref() <= 1.0 {
                return src.err(b.span(), format!("beta must exceed 1, got {}", b.get_ref()));
            }
            Nonlinearity::degenerate_monostable(r, *b.get_ref())
        }
        "ignition" => {
            let th = need(&raw.theta, "theta")?;
            let theta = in_open_unit(src, &th, "theta")?;
            Nonlinearity::ignition(r, theta, opt(&raw.smoothing).unwrap_or(DEFAULT_SMOOTHING))
        }
        "bistable" => {
            let th = need(&raw.theta, "theta")?;
            Nonlinearity::bistable(r, in_open_unit(src, &th, "theta")?)
        }
        other => return src.err(kind_span, format!("kind must be one of {KINDS:?}, got \"{other}\"")),
    };
    built.map_err(|e| ConfigError { line: Some(src.line_of(kind_span)), message: e.to_string() })
}

fn simulate_spec(
    src: &Source,
    raw: &RawSolver,
    block: Range<usize>,
    s_value: Option<(f64, Range<usize>)>,
    kind_value: Option<(String, Range<usize>)>,
) -> Result<SimulateSpec, ConfigError> {
    let (s, s_span) = match s_value {
        Some(v) => v,
        None => match &raw.s {
            Some(v) => (*v.get_ref(), v.span()),
            None => return src.err(block, "solver block requires s"),
        },
    };
    if !(s > 0.0 && s < 1.0) {
        return src.err(s_span, format!("s must lie in (0,1), got {s}"));
    }
    let (kind, kind_span) = match kind_value {
        Some(v) => v,
        None => match &raw.kind {
            Some(v) => (v.get_ref().clone(), v.span()),
            None => return src.err(block, "solver block requires kind"),
        },
    };
    let f = nonlinearity(src, raw, &kind, kind_span)?;
    let n = *raw.n.get_ref();
    if n < 16 {
        return src.err(raw.n.span(), format!("N must be at least 16, got {n}"));
    }
    let length = positive(src, &raw.length, "L")?;
    let x_min = opt(&raw.x_min).unwrap_or(-0.1 * length);
    let grid = Grid::new(n as usize, x_min, x_min + length).map_err(|e| ConfigError { line: Some(src.line_of(raw.length.span())), message: e.to_string() })?;
    let dt = positive(src, &raw.dt, "dt")?;
    let t_end = positive(src, &raw.t_end, "T")?;
    if dt > t_end {
        return src.err(raw.dt.span(), format!("dt={dt} exceeds T={t_end}"));
    }
    let mut cfg = SolverConfig::new(s, f, grid.clone(), dt, t_end);
    cfg.normalization = normalization(src, &raw.normalization)?;
    cfg.levels = raw.levels.as_ref().map_or(vec![0.25, 0.5, 0.75], |v| v.get_ref().clone());
    if let Some(v) = &raw.levels {
        if let Some(bad) = v.get_ref().iter().find(|&&l| !(l > 0.0 && l < 1.0)) {
            return src.err(v.span(), format!("levels must lie in (0,1), got {bad}"));
        }
    }
    cfg.snapshot_times = raw.snapshot_times.as_ref().map_or(Vec::new(), |v| v.get_ref().clone());
    cfg.early_stop = raw.early_stop.unwrap_or(true);
    if let Some(te) = &raw.trace_every {
        if *te.get_ref() < 1 {
            return src.err(te.span(), "trace_every must be at least 1");
        }
        cfg.trace_every = Some(*te.get_ref() as usize);
    }
    if let Some(dc) = &raw.dt_control {
        cfg.dt_control = match dc.get_ref().as_str() {
            "fixed" => DtControl::Fixed,
            "adaptive" => DtControl::Adaptive { tol: opt(&raw.adaptive_tol).unwrap_or(1e-4) },
            other => return src.err(dc.span(), format!("dt_control must be \"fixed\" or \"adaptive\", got \"{other}\"")),
        };
    }
    if let Err(e) = cfg.validate() {
        return src.err(block, e.to_string());
    }
    let datum = match raw.datum.as_ref().map(|d| (d.get_ref().as_str(), d.span())) {
        None | Some(("front", _)) => DatumSpec::Front {
            plateau: opt(&raw.plateau).unwrap_or(1.0),
            drop_start: opt(&raw.drop_start).unwrap_or(-1.0),
            drop_end: opt(&raw.drop_end).unwrap_or(0.0),
        },
        Some(("algebraic", _)) => DatumSpec::Algebraic { d: opt(&raw.d).unwrap_or(0.1), exponent: opt(&raw.exponent).unwrap_or(2.0 * s) },
        Some((other, span)) => return src.err(span, format!("datum must be \"front\" or \"algebraic\", got \"{other}\"")),
    };
    if let Err(e) = datum.build(&grid) {
        return src.err(raw.datum.as_ref().map_or(block.clone(), |d| d.span()), format!("datum: {e}"));
    }
    let fit_window = match &raw.fit_window {
        None => (0.1 * t_end, t_end),
        Some(w) => match w.get_ref().as_slice() {
            &[a, b] if a > 0.0 && a < b => (a, b),
            _ => return src.err(w.span(), "fit_window must be [t_lo, t_hi] with 0 < t_lo < t_hi"),
        },
    };
    let epsilon = match &raw.epsilon {
        Some(e) => positive(src, e, "epsilon")?,
        None => 0.1,
    };
    Ok(SimulateSpec { solver: cfg, kind, datum, fit_window, epsilon })
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let src = Source(text);
    let raw: RawConfig = toml::from_str(text).map_err(|e| toml_error(e, &src))?;
    let threads = raw.threads.unwrap_or(1);
    if threads == 0 {
        return Err(ConfigError { line: None, message: "threads must be at least 1".into() });
    }
    let missing = |name: &str| ConfigError {
        line: Some(src.line_of(raw.mode.span())),
        message: format!("mode \"{}\" requires a [{name}] block", raw.mode.get_ref()),
    };
    let mode = match raw.mode.get_ref().as_str() {
        "simulate" => {
            let b = raw.solver.as_ref().ok_or_else(|| missing("solver"))?;
            Mode::Simulate(Box::new(simulate_spec(&src, b.get_ref(), b.span(), None, None)?))
        }
        "sweep" => {
            let b = raw.solver.as_ref().ok_or_else(|| missing("solver"))?;
            let sw = raw.sweep.as_ref().ok_or_else(|| missing("sweep"))?.get_ref();
            if sw.s.get_ref().is_empty() || sw.kind.get_ref().is_empty() {
                return src.err(sw.s.span(), "sweep lists must be nonempty");
            }
            let mut jobs = Vec::new();
            for &s in sw.s.get_ref() {
                for kind in sw.kind.get_ref() {
                    jobs.push(simulate_spec(
                        &src,
                        b.get_ref(),
                        b.span(),
                        Some((s, sw.s.span())),
                        Some((kind.clone(), sw.kind.span())),
                    )?);
                }
            }
            Mode::Sweep(jobs)
        }
        "certify_super" => {
            let b = raw.supersolution.as_ref().ok_or_else(|| missing("super"))?.get_ref();
            let s = in_open_unit(&src, &b.s, "s")?;
            if *b.beta.get_ref() <= 1.0 {
                return src.err(b.beta.span(), format!("beta must exceed 1, got {}", b.beta.get_ref()));
            }
            let r = match &b.r {
                Some(v) => positive(&src, v, "r")?,
                None => 1.0,
            };
            let p = match &b.p {
                Some(v) => Some(positive(&src, v, "p")?),
                None => None,
            };
            let gamma = match &b.gamma {
                Some(v) => Some(positive(&src, v, "gamma")?),
                None => None,
            };
            Mode::CertifySuper(SuperSpec {
                s,
                beta: *b.beta.get_ref(),
                r,
                p,
                gamma,
                normalization: normalization(&src, &b.normalization)?,
                lattice: lattice(b.lattice)?,
            })
        }
        "certify_sub" => {
            let b = raw.subsolution.as_ref().ok_or_else(|| missing("sub"))?.get_ref();
            let s = in_open_unit(&src, &b.s, "s")?;
            if *b.beta.get_ref() <= 1.0 {
                return src.err(b.beta.span(), format!("beta must exceed 1, got {}", b.beta.get_ref()));
            }
            if s <= 0.5 && *b.beta.get_ref() >= 2.0 {
                return src.err(b.beta.span(), "s <= 1/2 requires beta < 2: unsupported regime");
            }
            let r = match &b.r {
                Some(v) => positive(&src, v, "r")?,
                None => 1.0,
            };
            let d = match &b.d {
                Some(v) => in_open_unit(&src, v, "d")?,
                None => 0.1,
            };
            Mode::CertifySub(SubSpec {
                s,
                beta: *b.beta.get_ref(),
                r,
                d,
                normalization: normalization(&src, &b.normalization)?,
                lattice: lattice(b.lattice)?,
            })
        }
        "kernel_check" => {
            let (s, random_points) = match raw.kernel.as_ref().map(|k| k.get_ref()) {
                None => (vec![0.25, 0.5, 0.75], 20),
                Some(k) => {
                    let s = match &k.s {
                        None => vec![0.25, 0.5, 0.75],
                        Some(v) => {
                            if let Some(bad) = v.get_ref().iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
                                return src.err(v.span(), format!("s must lie in (0,1), got {bad}"));
                            }
                            v.get_ref().clone()
                        }
                    };
                    (s, k.random_points.unwrap_or(20))
                }
            };
            Mode::KernelCheck(KernelSpec { s, random_points })
        }
        other => {
            return src.err(
                raw.mode.span(),
                format!("mode must be one of simulate, certify_super, certify_sub, kernel_check, sweep; got \"{other}\""),
            )
        }
    };
    Ok(ExperimentConfig {
        mode,
        output_dir: PathBuf::from(raw.output_dir.unwrap_or_else(|| "fracfront-out".into())),
        seed: raw.seed.unwrap_or(0),
        threads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "mode = \"simulate\"\n[solver]\ns = 0.5\nkind = \"kpp\"\nN = 4096\nL = 2000\ndt = 1e-3\nT = 20\n";

    #[test]
    fn minimal_simulate_block() {
        let cfg = parse_config(MINIMAL).unwrap();
        let Mode::Simulate(spec) = cfg.mode else { panic!("wrong mode") };
        assert_eq!(spec.solver.grid.len(), 4096);
        assert_eq!(spec.solver.s, 0.5);
        assert_eq!(spec.fit_window, (2.0, 20.0));
    }

    #[test]
    fn s_out_of_range() {
        let e = parse_config(&MINIMAL.replace("s = 0.5", "s = 1.5")).unwrap_err();
        assert_eq!(e.message, "s must lie in (0,1), got 1.5");
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn unknown_key_has_line() {
        let e = parse_config(&format!("{MINIMAL}bogus = 3\n")).unwrap_err();
        assert_eq!(e.line, Some(9));
        assert!(e.message.contains("bogus"), "{}", e.message);
    }

    #[test]
    fn sweep_enumerates_product() {
        let text = "mode = \"sweep\"\n[solver]\nN = 256\nL = 100\ndt = 0.01\nT = 1\nbeta = 1.5\ntheta = 0.2\n[sweep]\ns = [0.25, 0.5, 0.75]\nkind = [\"ignition\", \"monostable\"]\n";
        let cfg = parse_config(text).unwrap();
        let Mode::Sweep(jobs) = cfg.mode else { panic!("wrong mode") };
        assert_eq!(jobs.len(), 6);
        assert_eq!(jobs[1].kind, "monostable");
        assert_eq!(jobs[5].solver.s, 0.75);
    }

    #[test]
    fn missing_parameter_for_kind() {
        let e = parse_config(&MINIMAL.replace("\"kpp\"", "\"ignition\"")).unwrap_err();
        assert!(e.message.contains("theta"));
        assert_eq!(e.line, Some(4));
    }

    #[test]
    fn certify_blocks() {
        let cfg = parse_config("mode = \"certify_super\"\n[super]\ns = 0.6\nbeta = 3.0\n").unwrap();
        assert_eq!(cfg.mode.label(), "certify_super");
        let e = parse_config("mode = \"certify_sub\"\n[sub]\ns = 0.25\nbeta = 2.5\n").unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(parse_config("mode = \"certify_sub\"\n").is_err());
    }
}
