//! Flat `key=value` experiment configuration.

use std::fmt;
use std::str::FromStr;

use crate::probe::{
    coupling_from_line, BackgroundPhase, CouplingStatistics, DispersiveLine,
    DEFAULT_DISPERSIVE_RATIO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    ProjectionNoise,
    HomodyneCheck,
    SingleProbe,
    DualProbe,
    Conditional,
    Optimize,
    DetuningInvariance,
    OracleCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::ProjectionNoise,
        ExperimentKind::HomodyneCheck,
        ExperimentKind::SingleProbe,
        ExperimentKind::DualProbe,
        ExperimentKind::Conditional,
        ExperimentKind::Optimize,
        ExperimentKind::DetuningInvariance,
        ExperimentKind::OracleCheck,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::ProjectionNoise => "projection-noise",
            ExperimentKind::HomodyneCheck => "homodyne-check",
            ExperimentKind::SingleProbe => "single-probe",
            ExperimentKind::DualProbe => "dual-probe",
            ExperimentKind::Conditional => "conditional",
            ExperimentKind::Optimize => "optimize",
            ExperimentKind::DetuningInvariance => "detuning-invariance",
            ExperimentKind::OracleCheck => "oracle-check",
        }
    }

    fn required(&self) -> &'static [&'static str] {
        match self {
            ExperimentKind::ProjectionNoise => &["n_atoms", "trials"],
            ExperimentKind::HomodyneCheck => &["n_r", "n_p", "trials"],
            ExperimentKind::SingleProbe | ExperimentKind::DualProbe => {
                &["n_atoms", "trials", "n_r", "n_p"]
            }
            ExperimentKind::Conditional => &["n_atoms", "trials", "n_r", "n_p"],
            ExperimentKind::Optimize => &["n_atoms", "detuning"],
            ExperimentKind::DetuningInvariance => &["n_atoms", "c_constant", "detuning"],
            ExperimentKind::OracleCheck => &[],
        }
    }

    fn needs_coupling(&self) -> bool {
        matches!(
            self,
            ExperimentKind::SingleProbe
                | ExperimentKind::DualProbe
                | ExperimentKind::Conditional
                | ExperimentKind::Optimize
        )
    }

    fn needs_linewidth(&self) -> bool {
        matches!(
            self,
            ExperimentKind::Optimize | ExperimentKind::DetuningInvariance
        )
    }

    fn sweepable(&self) -> &'static [SweepParam] {
        use SweepParam::*;
        match self {
            ExperimentKind::ProjectionNoise => &[NAtoms],
            ExperimentKind::HomodyneCheck => &[Phi, NP, NR],
            ExperimentKind::SingleProbe | ExperimentKind::DualProbe => {
                &[NAtoms, NP, MeanK, VarK, VarPhi0]
            }
            ExperimentKind::Conditional => &[NAtoms, NP, MeanK],
            ExperimentKind::Optimize => &[NP],
            ExperimentKind::DetuningInvariance => &[Detuning],
            ExperimentKind::OracleCheck => &[],
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .iter()
            .find(|k| k.as_str() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.as_str()).collect();
                format!(
                    "unknown experiment '{s}' (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    NAtoms,
    NP,
    NR,
    Phi,
    Detuning,
    MeanK,
    VarK,
    VarPhi0,
}

impl SweepParam {
    const ALL: [SweepParam; 8] = [
        SweepParam::NAtoms,
        SweepParam::NP,
        SweepParam::NR,
        SweepParam::Phi,
        SweepParam::Detuning,
        SweepParam::MeanK,
        SweepParam::VarK,
        SweepParam::VarPhi0,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::NAtoms => "n_atoms",
            SweepParam::NP => "n_p",
            SweepParam::NR => "n_r",
            SweepParam::Phi => "phi",
            SweepParam::Detuning => "detuning",
            SweepParam::MeanK => "mean_k",
            SweepParam::VarK => "var_k",
            SweepParam::VarPhi0 => "var_phi0",
        }
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepParam::ALL
            .iter()
            .find(|p| p.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown sweep parameter '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepScale {
    Linear,
    Log,
}

impl SweepScale {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepScale::Linear => "linear",
            SweepScale::Log => "log",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub scale: SweepScale,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i == 0 {
                    return self.start;
                }
                if i == self.points - 1 {
                    return self.stop;
                }
                let t = i as f64 / last;
                match self.scale {
                    SweepScale::Linear => self.start + t * (self.stop - self.start),
                    SweepScale::Log => (self.start.ln() + t * (self.stop / self.start).ln()).exp(),
                }
            })
            .collect()
    }
}

/// A validated experiment description. Optional keys that were not given
/// stay `None` so the config echoes back exactly as written.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n_atoms: Option<u64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub n_r: Option<f64>,
    pub n_p: Option<f64>,
    pub m_r: Option<f64>,
    pub m_p: Option<f64>,
    pub mean_k: Option<f64>,
    pub var_k: Option<f64>,
    pub mean_phi0: Option<f64>,
    pub var_phi0: Option<f64>,
    pub c_constant: Option<f64>,
    pub detuning: Option<f64>,
    pub linewidth: Option<f64>,
    pub detuning_std: Option<f64>,
    pub gamma: Option<f64>,
    pub sweep: Option<Sweep>,
}

/// Every key the config format accepts, in echo order.
pub const KEYS: [&str; 22] = [
    "experiment",
    "n_atoms",
    "trials",
    "seed",
    "n_r",
    "n_p",
    "m_r",
    "m_p",
    "mean_k",
    "var_k",
    "mean_phi0",
    "var_phi0",
    "c_constant",
    "detuning",
    "linewidth",
    "detuning_std",
    "gamma",
    "sweep_param",
    "sweep_start",
    "sweep_stop",
    "sweep_points",
    "sweep_scale",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "{key}: ")?;
        }
        f.write_str(&self.message)
    }
}

/// All violations found in one config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Float formatting shared by the CSV writer and the config echo: shortest
/// round-trip representation, scientific outside `[1e-4, 1e15)`.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

struct Collector {
    errors: Vec<ConfigError>,
    lines: std::collections::HashMap<&'static str, usize>,
}

impl Collector {
    fn push(&mut self, key: &str, message: impl Into<String>) {
        let line = KEYS
            .iter()
            .find(|k| **k == key)
            .and_then(|k| self.lines.get(k).copied());
        self.errors.push(ConfigError {
            line,
            key: Some(key.to_string()),
            message: message.into(),
        });
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let mut values: std::collections::HashMap<&'static str, (usize, String)> = Default::default();
    let mut c = Collector {
        errors: Vec::new(),
        lines: Default::default(),
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            c.errors.push(ConfigError {
                line: Some(line_no),
                key: None,
                message: format!("expected key=value, got '{line}'"),
            });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(known) = KEYS.iter().find(|k| **k == key).copied() else {
            c.errors.push(ConfigError {
                line: Some(line_no),
                key: Some(key.to_string()),
                message: "unknown key".into(),
            });
            continue;
        };
        if let Some((first, _)) = values.get(known) {
            c.errors.push(ConfigError {
                line: Some(line_no),
                key: Some(key.to_string()),
                message: format!("duplicate key (first set on line {first})"),
            });
            continue;
        }
        c.lines.insert(known, line_no);
        values.insert(known, (line_no, value.to_string()));
    }

    let raw = |k: &str| values.get(k).map(|(_, v)| v.as_str());

    let experiment = match raw("experiment") {
        None => {
            c.push("experiment", "missing required key");
            None
        }
        Some(v) => match v.parse::<ExperimentKind>() {
            Ok(k) => Some(k),
            Err(e) => {
                c.push("experiment", e);
                None
            }
        },
    };

    let count = |c: &mut Collector, key: &str, min: i128| -> Option<u64> {
        let v = raw(key)?;
        match v.parse::<i128>() {
            Err(_) => {
                c.push(key, format!("expected an integer, got '{v}'"));
                None
            }
            Ok(n) if n < min => {
                c.push(key, format!("must be >= {min}, got {n}"));
                None
            }
            Ok(n) if n > u64::MAX as i128 => {
                c.push(key, "exceeds the 64-bit range");
                None
            }
            Ok(n) => Some(n as u64),
        }
    };
    let n_atoms = count(&mut c, "n_atoms", 1);
    let trials = count(&mut c, "trials", 1);
    let seed = count(&mut c, "seed", 0);
    let sweep_points = count(&mut c, "sweep_points", 1);

    #[derive(Clone, Copy)]
    enum Bound {
        Any,
        NonNegative,
        Positive,
        NonZero,
    }
    let real = |c: &mut Collector, key: &str, bound: Bound| -> Option<f64> {
        let v = raw(key)?;
        let Ok(x) = v.parse::<f64>() else {
            c.push(key, format!("expected a number, got '{v}'"));
            return None;
        };
        let (ok, what) = match bound {
            Bound::Any => (x.is_finite(), "finite"),
            Bound::NonNegative => (x.is_finite() && x >= 0.0, "finite and >= 0"),
            Bound::Positive => (x.is_finite() && x > 0.0, "finite and > 0"),
            Bound::NonZero => (x.is_finite() && x != 0.0, "finite and non-zero"),
        };
        if !ok {
            c.push(key, format!("must be {what}, got {v}"));
            return None;
        }
        Some(x)
    };
    let n_r = real(&mut c, "n_r", Bound::NonNegative);
    let n_p = real(&mut c, "n_p", Bound::NonNegative);
    let m_r = real(&mut c, "m_r", Bound::NonNegative);
    let m_p = real(&mut c, "m_p", Bound::NonNegative);
    let mean_k = real(&mut c, "mean_k", Bound::NonNegative);
    let var_k = real(&mut c, "var_k", Bound::NonNegative);
    let mean_phi0 = real(&mut c, "mean_phi0", Bound::Any);
    let var_phi0 = real(&mut c, "var_phi0", Bound::NonNegative);
    let c_constant = real(&mut c, "c_constant", Bound::Any);
    let detuning = real(&mut c, "detuning", Bound::NonZero);
    let linewidth = real(&mut c, "linewidth", Bound::Positive);
    let detuning_std = real(&mut c, "detuning_std", Bound::NonNegative);
    let gamma = real(&mut c, "gamma", Bound::Positive);
    let sweep_start = real(&mut c, "sweep_start", Bound::Any);
    let sweep_stop = real(&mut c, "sweep_stop", Bound::Any);

    let sweep_param = raw("sweep_param").and_then(|v| match v.parse::<SweepParam>() {
        Ok(p) => Some(p),
        Err(e) => {
            c.push("sweep_param", e);
            None
        }
    });
    let sweep_scale = match raw("sweep_scale") {
        None | Some("linear") => Some(SweepScale::Linear),
        Some("log") => Some(SweepScale::Log),
        Some(other) => {
            c.push(
                "sweep_scale",
                format!("expected linear or log, got '{other}'"),
            );
            None
        }
    };

    // Dispersive validity whenever both ends of the ratio are known.
    let width = linewidth.or(gamma);
    if let (Some(d), Some(w)) = (detuning, width) {
        if d.abs() < DEFAULT_DISPERSIVE_RATIO * w {
            let key = if linewidth.is_some() {
                "linewidth"
            } else {
                "gamma"
            };
            c.push(
                "detuning",
                format!(
                    "|detuning| = {} must be at least {DEFAULT_DISPERSIVE_RATIO} x {key} = {}",
                    d.abs(),
                    DEFAULT_DISPERSIVE_RATIO * w
                ),
            );
        }
    }

    if c_constant.is_some() && mean_k.is_some() {
        c.push(
            "mean_k",
            "give either mean_k or c_constant (which sets k = c/detuning), not both",
        );
    }
    if c_constant.is_some() && var_k.is_some() {
        c.push(
            "var_k",
            "with c_constant the coupling variance comes from detuning_std",
        );
    }
    if detuning_std.is_some() && c_constant.is_none() {
        c.push("detuning_std", "only meaningful together with c_constant");
    }

    let sweep_keys = [
        "sweep_param",
        "sweep_start",
        "sweep_stop",
        "sweep_points",
        "sweep_scale",
    ];
    let any_sweep = sweep_keys.iter().any(|k| raw(k).is_some());
    let mut sweep = None;
    if any_sweep {
        for k in &sweep_keys[..4] {
            if raw(k).is_none() {
                c.push(k, "required when a sweep is configured");
            }
        }
        if let (Some(param), Some(start), Some(stop), Some(points), Some(scale)) = (
            sweep_param,
            sweep_start,
            sweep_stop,
            sweep_points,
            sweep_scale,
        ) {
            if scale == SweepScale::Log && (start <= 0.0 || stop <= 0.0) {
                c.push("sweep_scale", "log sweeps need positive start and stop");
            }
            let s = Sweep {
                param,
                start,
                stop,
                points: points as usize,
                scale,
            };
            check_sweep_range(&mut c, &s, detuning, width);
            if c_constant.is_some() && matches!(param, SweepParam::MeanK | SweepParam::VarK) {
                c.push(
                    "sweep_param",
                    "cannot sweep the coupling when it is derived from c_constant",
                );
            }
            sweep = Some(s);
        }
    }

    if let Some(kind) = experiment {
        let swept = sweep.map(|s| s.param.as_str());
        for key in kind.required() {
            if raw(key).is_none() && swept != Some(*key) {
                c.push(key, format!("missing required key for {kind}"));
            }
        }
        if kind.needs_coupling()
            && mean_k.is_none()
            && c_constant.is_none()
            && swept != Some("mean_k")
        {
            c.push("mean_k", format!("{kind} needs mean_k or c_constant"));
        }
        if c_constant.is_some() && (detuning.is_none() || width.is_none()) && kind.needs_coupling()
        {
            c.push("c_constant", "needs detuning and linewidth (or gamma)");
        }
        if kind.needs_linewidth() && width.is_none() {
            c.push("gamma", format!("{kind} needs gamma or linewidth"));
        }
        if let Some(s) = &sweep {
            if !kind.sweepable().contains(&s.param) {
                let allowed: Vec<_> = kind.sweepable().iter().map(|p| p.as_str()).collect();
                c.push(
                    "sweep_param",
                    format!(
                        "{} cannot be swept for {kind} (allowed: {})",
                        s.param.as_str(),
                        if allowed.is_empty() {
                            "none".to_string()
                        } else {
                            allowed.join(", ")
                        }
                    ),
                );
            }
        }
    }

    if !c.errors.is_empty() {
        c.errors.sort_by_key(|e| e.line.unwrap_or(usize::MAX));
        return Err(ConfigErrors(c.errors));
    }
    Ok(ExperimentConfig {
        experiment: experiment.expect("checked above"),
        n_atoms,
        trials,
        seed,
        n_r,
        n_p,
        m_r,
        m_p,
        mean_k,
        var_k,
        mean_phi0,
        var_phi0,
        c_constant,
        detuning,
        linewidth,
        detuning_std,
        gamma,
        sweep,
    })
}

fn check_sweep_range(c: &mut Collector, s: &Sweep, detuning: Option<f64>, width: Option<f64>) {
    let values = s.values();
    let bad = |pred: &dyn Fn(f64) -> bool| values.iter().any(|&v| !v.is_finite() || pred(v));
    let message = match s.param {
        SweepParam::NAtoms if bad(&|v| v.round() < 1.0) => Some("n_atoms values must be >= 1"),
        SweepParam::NP
        | SweepParam::NR
        | SweepParam::MeanK
        | SweepParam::VarK
        | SweepParam::VarPhi0
            if bad(&|v| v < 0.0) =>
        {
            Some("swept values must be >= 0")
        }
        SweepParam::Detuning if bad(&|v| v == 0.0) => Some("detuning values must be non-zero"),
        _ => None,
    };
    if let Some(m) = message {
        c.push("sweep_start", m);
    }
    if s.param == SweepParam::Detuning {
        if let Some(w) = width {
            if values
                .iter()
                .any(|v| v.abs() < DEFAULT_DISPERSIVE_RATIO * w)
            {
                c.push(
                    "sweep_start",
                    "swept detunings must stay dispersive (>= 10 linewidths)",
                );
            }
        }
    }
    let _ = detuning;
}

impl ExperimentConfig {
    /// Linewidth used for scattering; falls back to `linewidth`.
    pub fn scattering_rate(&self) -> Option<f64> {
        self.gamma.or(self.linewidth)
    }

    /// Linewidth used for the dispersive-validity check; falls back to `gamma`.
    pub fn dispersive_linewidth(&self) -> Option<f64> {
        self.linewidth.or(self.gamma)
    }

    /// Coupling statistics, either given directly or derived from `c_constant`.
    pub fn coupling(&self) -> crate::Result<CouplingStatistics> {
        match self.c_constant {
            Some(c) => {
                let detuning = self.detuning.unwrap_or(f64::NAN);
                let width = self.dispersive_linewidth().unwrap_or(f64::NAN);
                let line =
                    DispersiveLine::new(c, detuning, width, self.detuning_std.unwrap_or(0.0))?;
                let mut k = coupling_from_line(&line)?;
                k.mean_k = k.mean_k.abs();
                Ok(k)
            }
            None => CouplingStatistics::new(self.mean_k.unwrap_or(0.0), self.var_k.unwrap_or(0.0)),
        }
    }

    pub fn background(&self) -> crate::Result<BackgroundPhase> {
        BackgroundPhase::new(self.mean_phi0.unwrap_or(0.0), self.var_phi0.unwrap_or(0.0))
    }

    /// Set keys as `key=value` lines in canonical order; parses back to `self`.
    pub fn to_lines(&self) -> Vec<String> {
        let mut out = vec![format!("experiment={}", self.experiment)];
        let ints = [
            ("n_atoms", self.n_atoms),
            ("trials", self.trials),
            ("seed", self.seed),
        ];
        for (k, v) in ints {
            if let Some(v) = v {
                out.push(format!("{k}={v}"));
            }
        }
        let reals = [
            ("n_r", self.n_r),
            ("n_p", self.n_p),
            ("m_r", self.m_r),
            ("m_p", self.m_p),
            ("mean_k", self.mean_k),
            ("var_k", self.var_k),
            ("mean_phi0", self.mean_phi0),
            ("var_phi0", self.var_phi0),
            ("c_constant", self.c_constant),
            ("detuning", self.detuning),
            ("linewidth", self.linewidth),
            ("detuning_std", self.detuning_std),
            ("gamma", self.gamma),
        ];
        for (k, v) in reals {
            if let Some(v) = v {
                out.push(format!("{k}={}", format_f64(v)));
            }
        }
        if let Some(s) = &self.sweep {
            out.push(format!("sweep_param={}", s.param.as_str()));
            out.push(format!("sweep_start={}", format_f64(s.start)));
            out.push(format!("sweep_stop={}", format_f64(s.stop)));
            out.push(format!("sweep_points={}", s.points));
            out.push(format!("sweep_scale={}", s.scale.as_str()));
        }
        out
    }
}
