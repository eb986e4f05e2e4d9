//! Scenario files: parsing, validation and resolution into concrete inputs.

use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::liouville::{ChannelKind, DensityMatrix, HilbertOperator, JumpChannel, SystemModel};
use crate::models::{m_level, preset, two_level, two_level_dephasing, MLevelParams, TwoLevelParams};

pub const SCHEMA_VERSION: u32 = 1;

/// A configuration problem located by a JSON pointer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.pointer, self.message)
    }
}

impl std::error::Error for ConfigError {}

type Matrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Preset(String),
    Inline(InlineModel),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InlineModel {
    Preset(String),
    TwoLevel(TwoLevelParams),
    TwoLevelDephasing(TwoLevelParams),
    MLevel(MLevelParams),
    Custom(CustomModel),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    pub labels: Vec<String>,
    /// Rows of `[re, im]` pairs.
    pub hamiltonian: Matrix,
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
    #[serde(default)]
    pub gamma_c: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ChannelSpec {
    Elementary {
        from: String,
        to: String,
        rate: f64,
        #[serde(default)]
        label: Option<String>,
    },
    Operator {
        operator: Matrix,
        #[serde(default)]
        label: Option<String>,
        kind: ChannelKind,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GammaCSpec {
    Scalar(f64),
    List(Vec<f64>),
    Generated(GammaCRange),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaCRange {
    pub from: f64,
    pub to: f64,
    pub points: usize,
    #[serde(default)]
    pub log: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum InitialStateSpec {
    Label(String),
    Matrix { matrix: Matrix },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TimesSpec {
    Grid { start: f64, stop: f64, count: usize },
    List(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Trace,
    Populations,
    Coherences,
    FidelityNh,
    FidelityLindblad,
    Eigenvalues,
    ProjectorTraces,
    SemigroupDefect,
}

impl OutputKind {
    pub const DEFAULT: [OutputKind; 5] = [
        OutputKind::Trace,
        OutputKind::Populations,
        OutputKind::FidelityNh,
        OutputKind::FidelityLindblad,
        OutputKind::Eigenvalues,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    DoubledExp {},
    Microscopic { k: usize, w: f64 },
}

/// The on-disk scenario format.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub gamma_c: Option<GammaCSpec>,
    #[serde(default)]
    pub initial_state: Option<InitialStateSpec>,
    #[serde(default)]
    pub times: Option<TimesSpec>,
    #[serde(default)]
    pub outputs: Option<Vec<OutputKind>>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub liouville_cap: Option<usize>,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        use serde_path_to_error::Segment;
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = pointer_of(e.path());
            let message = e.inner().to_string();
            ConfigError::new(pointer, message)
        })?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "/schema_version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", config.schema_version),
            ));
        }
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// A config holding only a model reference; used when no file is given.
    pub fn for_preset(name: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelSpec::Preset(name.to_string()),
            gamma_c: None,
            initial_state: None,
            times: None,
            outputs: None,
            oracle: None,
            output_dir: None,
            liouville_cap: None,
        }
    }
}

fn parse_matrix(m: &Matrix, pointer: &str) -> Result<Array2<C64>, ConfigError> {
    let n = m.len();
    if n == 0 {
        return Err(ConfigError::new(pointer, "matrix is empty"));
    }
    let mut out = Array2::zeros((n, n));
    for (r, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(ConfigError::new(format!("{pointer}/{r}"), format!("row has {} entries, expected {n}", row.len())));
        }
        for (c, z) in row.iter().enumerate() {
            out[[r, c]] = C64::new(z[0], z[1]);
        }
    }
    Ok(out)
}

fn custom_model(custom: &CustomModel) -> Result<SystemModel, ConfigError> {
    let h = parse_matrix(&custom.hamiltonian, "/model/custom/hamiltonian")?;
    let n = h.nrows();
    let hamiltonian = HilbertOperator::new(h).map_err(|e| ConfigError::new("/model/custom/hamiltonian", e.to_string()))?;
    let index = |label: &str, pointer: String| {
        custom
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| ConfigError::new(pointer, format!("unknown level label {label:?}")))
    };
    let mut channels = Vec::new();
    for (i, ch) in custom.channels.iter().enumerate() {
        let base = format!("/model/custom/channels/{i}");
        match ch {
            ChannelSpec::Elementary { from, to, rate, label } => {
                if !(rate.is_finite() && *rate >= 0.0) {
                    return Err(ConfigError::new(format!("{base}/rate"), "rate must be finite and nonnegative"));
                }
                let a = index(from, format!("{base}/from"))?;
                let b = index(to, format!("{base}/to"))?;
                if a == b {
                    return Err(ConfigError::new(base, "elementary jump needs distinct levels"));
                }
                if *rate > 0.0 {
                    let label = label.clone().unwrap_or_else(|| format!("{from}->{to}"));
                    channels.push(JumpChannel::elementary(n, a, b, *rate, label, ChannelKind::Decay));
                }
            }
            ChannelSpec::Operator { operator, label, kind } => {
                let pointer = format!("{base}/operator");
                let op = HilbertOperator::new(parse_matrix(operator, &pointer)?)
                    .map_err(|e| ConfigError::new(pointer.clone(), e.to_string()))?;
                channels.push(JumpChannel::new(op, label.clone().unwrap_or_else(|| format!("channel{i}")), *kind));
            }
        }
    }
    SystemModel::with_labels(hamiltonian, channels, custom.gamma_c, custom.labels.clone())
        .map_err(|e| ConfigError::new("/model/custom", e.to_string()))
}

/// Everything a command needs, with flags already applied.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: SystemModel,
    pub preset: Option<&'static crate::models::Preset>,
    pub gamma_c: Vec<f64>,
    pub initial_state: DensityMatrix,
    pub times: Vec<f64>,
    pub outputs: Vec<OutputKind>,
    pub oracle: Option<OracleSpec>,
    pub output_dir: Option<String>,
    pub liouville_cap: Option<usize>,
}

impl Scenario {
    pub fn has(&self, kind: OutputKind) -> bool {
        self.outputs.contains(&kind)
    }
}

pub fn expand_gamma_c(spec: &GammaCSpec) -> Result<Vec<f64>, ConfigError> {
    let values = match spec {
        GammaCSpec::Scalar(x) => vec![*x],
        GammaCSpec::List(v) => v.clone(),
        GammaCSpec::Generated(r) => {
            if r.points < 1 {
                return Err(ConfigError::new("/gamma_c/points", "need at least one point"));
            }
            if r.log && (r.from <= 0.0 || r.to <= 0.0) {
                return Err(ConfigError::new("/gamma_c", "log spacing needs positive bounds"));
            }
            let steps = (r.points.max(2) - 1) as f64;
            (0..r.points)
                .map(|i| {
                    let f = if r.points == 1 { 0.0 } else { i as f64 / steps };
                    if r.log {
                        (r.from.ln() + f * (r.to.ln() - r.from.ln())).exp()
                    } else {
                        r.from + f * (r.to - r.from)
                    }
                })
                .collect()
        }
    };
    if values.is_empty() {
        return Err(ConfigError::new("/gamma_c", "no return rates given"));
    }
    for (i, v) in values.iter().enumerate() {
        if !(v.is_finite() && *v >= 0.0) {
            let pointer = if matches!(spec, GammaCSpec::List(_)) { format!("/gamma_c/{i}") } else { "/gamma_c".into() };
            return Err(ConfigError::new(pointer, format!("return rate must be finite and nonnegative, got {v}")));
        }
    }
    Ok(values)
}

pub fn expand_times(spec: &TimesSpec) -> Result<Vec<f64>, ConfigError> {
    let times = match spec {
        TimesSpec::Grid { start, stop, count } => {
            if *count < 2 {
                return Err(ConfigError::new("/times/count", format!("need at least 2 time points, got {count}")));
            }
            if !(stop > start) {
                return Err(ConfigError::new("/times/stop", "stop must exceed start"));
            }
            let h = (stop - start) / (*count - 1) as f64;
            (0..*count).map(|i| if i + 1 == *count { *stop } else { start + i as f64 * h }).collect::<Vec<_>>()
        }
        TimesSpec::List(v) => {
            if v.len() < 2 {
                return Err(ConfigError::new("/times", format!("need at least 2 time points, got {}", v.len())));
            }
            v.clone()
        }
    };
    if let Some(i) = times.iter().position(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(ConfigError::new(format!("/times/{i}"), "times must be finite and nonnegative"));
    }
    if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(ConfigError::new(format!("/times/{}", i + 1), "times must be strictly ascending"));
    }
    Ok(times)
}

/// Parses `START:STOP:COUNT`.
pub fn parse_time_flag(flag: &str) -> Result<TimesSpec, ConfigError> {
    let parts: Vec<&str> = flag.split(':').collect();
    let bad = || ConfigError::new("/times", format!("expected START:STOP:COUNT, got {flag:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(TimesSpec::Grid {
        start: parts[0].trim().parse().map_err(|_| bad())?,
        stop: parts[1].trim().parse().map_err(|_| bad())?,
        count: parts[2].trim().parse().map_err(|_| bad())?,
    })
}

/// Parses `X` or a comma-separated list.
pub fn parse_gamma_c_flag(flag: &str) -> Result<GammaCSpec, ConfigError> {
    let values: Result<Vec<f64>, _> = flag.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if v.len() == 1 => Ok(GammaCSpec::Scalar(v[0])),
        Ok(v) => Ok(GammaCSpec::List(v)),
        Err(_) => Err(ConfigError::new("/gamma_c", format!("cannot parse return rate list {flag:?}"))),
    }
}

/// A level label, or the label written twice (`ee` for `|e><e|`).
fn projector_label(model: &SystemModel, label: &str) -> Option<usize> {
    model.label_index(label).or_else(|| {
        let half = label.len() / 2;
        if label.len() % 2 != 0 || !label.is_char_boundary(half) {
            return None;
        }
        let (a, b) = label.split_at(half);
        if a == b {
            model.label_index(a)
        } else {
            None
        }
    })
}

pub fn resolve(config: &ScenarioConfig) -> Result<Scenario, ConfigError> {
    let (base, preset) = match &config.model {
        ModelSpec::Preset(name) | ModelSpec::Inline(InlineModel::Preset(name)) => {
            let p = preset(name).map_err(|e| ConfigError::new("/model", e.to_string()))?;
            (p.default_model().map_err(|e| ConfigError::new("/model", e.to_string()))?, Some(p))
        }
        ModelSpec::Inline(InlineModel::TwoLevel(p)) => {
            (two_level(p).map_err(|e| ConfigError::new("/model/two_level", e.to_string()))?, None)
        }
        ModelSpec::Inline(InlineModel::TwoLevelDephasing(p)) => (
            two_level_dephasing(p).map_err(|e| ConfigError::new("/model/two_level_dephasing", e.to_string()))?,
            None,
        ),
        ModelSpec::Inline(InlineModel::MLevel(p)) => {
            (m_level(p).map_err(|e| ConfigError::new("/model/m_level", e.to_string()))?, None)
        }
        ModelSpec::Inline(InlineModel::Custom(c)) => (custom_model(c)?, None),
    };
    let gamma_c = match &config.gamma_c {
        Some(spec) => expand_gamma_c(spec)?,
        None => match preset {
            Some(p) => vec![p.gamma_c[0]],
            None => vec![base.gamma_c()],
        },
    };
    let model = base
        .with_gamma_c(gamma_c[0])
        .map_err(|e| ConfigError::new("/gamma_c", e.to_string()))?;
    let initial_state = match &config.initial_state {
        Some(InitialStateSpec::Label(label)) => {
            let idx = projector_label(&model, label)
                .ok_or_else(|| ConfigError::new("/initial_state", format!("unknown level label {label:?}; levels are {:?}", model.labels())))?;
            DensityMatrix::basis_projector(model.dim(), idx)
        }
        Some(InitialStateSpec::Matrix { matrix }) => {
            let m = parse_matrix(matrix, "/initial_state/matrix")?;
            if m.nrows() != model.dim() {
                return Err(ConfigError::new("/initial_state/matrix", format!("expected a {0}x{0} matrix", model.dim())));
            }
            DensityMatrix::new(m).map_err(|e| ConfigError::new("/initial_state/matrix", e.to_string()))?
        }
        None => match preset {
            Some(p) => p.initial_state(),
            None => DensityMatrix::basis_projector(model.dim(), model.dim() - 1),
        },
    };
    let times = match &config.times {
        Some(spec) => expand_times(spec)?,
        None => {
            let (start, stop, count) = preset.map_or((0.0, 50.0, 501), |p| p.times);
            expand_times(&TimesSpec::Grid { start, stop, count })?
        }
    };
    let outputs = config.outputs.clone().unwrap_or_else(|| OutputKind::DEFAULT.to_vec());
    if let Some(OracleSpec::Microscopic { k, w }) = config.oracle {
        if k < 8 {
            return Err(ConfigError::new("/oracle/microscopic/k", "need at least 8 continuum levels"));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(ConfigError::new("/oracle/microscopic/w", "half bandwidth must be positive"));
        }
    }
    Ok(Scenario {
        model,
        preset,
        gamma_c,
        initial_state,
        times,
        outputs,
        oracle: config.oracle,
        output_dir: config.output_dir.clone(),
        liouville_cap: config.liouville_cap,
    })
}
