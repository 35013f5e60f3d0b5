//! Run configuration: a flat-dotted-key TOML file whose every field
//! defaults to the reference simulation setup (3 UEs, 6 four-antenna APs in
//! a 500 m square, 2.4 GHz carrier, -101 dBm noise, 0.3/0.5 W budgets,
//! ridge task with q = 10). Unknown keys are rejected; `--set key=value`
//! overrides are merged onto the file before deserialization, so flag
//! values win over file values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamformerKind {
    Mop,
    Mrc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerStrategyKind {
    Lofpc,
    Fixed,
    Ci,
    Lgr,
}

impl std::fmt::Display for BeamformerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BeamformerKind::Mop => write!(f, "MOP"),
            BeamformerKind::Mrc => write!(f, "MRC"),
        }
    }
}

impl std::fmt::Display for PowerStrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PowerStrategyKind::Lofpc => write!(f, "LOFPC"),
            PowerStrategyKind::Fixed => write!(f, "Fixed"),
            PowerStrategyKind::Ci => write!(f, "Ci"),
            PowerStrategyKind::Lgr => write!(f, "Lgr"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    pub ues: usize,
    pub aps: usize,
    pub antennas: usize,
    pub area_side_m: f64,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self {
            ues: 3,
            aps: 6,
            antennas: 4,
            area_side_m: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub carrier_hz: f64,
    pub path_loss_exponent: f64,
    pub ref_distance_m: f64,
    pub noise_dbm: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            carrier_hz: 2.4e9,
            path_loss_exponent: 3.0,
            ref_distance_m: 1.0,
            noise_dbm: -101.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskSection {
    pub model_dim: usize,
    pub regularization: f64,
    pub samples_per_ue: usize,
    pub learning_rate: f64,
    pub local_epochs: usize,
}

impl Default for TaskSection {
    fn default() -> Self {
        Self {
            model_dim: 10,
            regularization: 5e-5,
            samples_per_ue: 1000,
            learning_rate: 0.05,
            local_epochs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetSection {
    pub p_ave_w: f64,
    pub p_max_w: f64,
    /// When true the two values above are raw per-entry budgets and the
    /// optimizer budgets become `q * raw / G^2`.
    pub raw: bool,
}

impl Default for BudgetSection {
    fn default() -> Self {
        Self {
            p_ave_w: 0.3,
            p_max_w: 0.5,
            raw: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapSection {
    /// Model-norm bound G; 0 selects the automatic choice (twice the
    /// largest initial local-model norm).
    pub model_norm_bound: f64,
    /// Gradient-fluctuation amplitude S.
    pub grad_fluctuation: f64,
    pub mu: f64,
    /// Gradient variance bound N (reporting only).
    pub grad_variance: f64,
    /// Gradient bound W (reporting only).
    pub grad_bound: f64,
    /// Direct overrides of the surrogate weights; all three or none.
    pub raw_a: Option<f64>,
    pub raw_b: Option<f64>,
    pub raw_c: Option<f64>,
}

impl Default for GapSection {
    fn default() -> Self {
        Self {
            model_norm_bound: 0.0,
            grad_fluctuation: 1.0,
            mu: 0.0,
            grad_variance: 0.0,
            grad_bound: 0.0,
            raw_a: None,
            raw_b: None,
            raw_c: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategySection {
    pub beamformer: BeamformerKind,
    pub power: PowerStrategyKind,
}

impl Default for StrategySection {
    fn default() -> Self {
        Self {
            beamformer: BeamformerKind::Mop,
            power: PowerStrategyKind::Lofpc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovSection {
    pub v: f64,
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for LyapunovSection {
    fn default() -> Self {
        Self {
            v: 10.0,
            max_sweeps: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlternationSection {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for AlternationSection {
    fn default() -> Self {
        Self {
            max_iters: 20,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualSection {
    pub step0: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for DualSection {
    fn default() -> Self {
        Self {
            step0: 0.2,
            max_iters: 300,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub rounds: usize,
    pub seed: u64,
    /// Debug mode: force the aggregation error to zero.
    pub perfect_channel: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            rounds: 300,
            seed: 1,
            perfect_channel: false,
        }
    }
}

/// Full resolved configuration of one simulation run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub topology: TopologySection,
    pub channel: ChannelSection,
    pub task: TaskSection,
    pub budget: BudgetSection,
    pub gap: GapSection,
    pub strategy: StrategySection,
    pub lyapunov: LyapunovSection,
    pub alternation: AlternationSection,
    pub dual: DualSection,
    pub run: RunSection,
}

impl SimulationConfig {
    /// Structural sanity checks beyond what types enforce.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.topology.ues == 0 {
            problems.push("topology.ues must be >= 1".to_string());
        }
        if self.topology.aps == 0 {
            problems.push("topology.aps must be >= 1".to_string());
        }
        if self.topology.antennas == 0 {
            problems.push("topology.antennas must be >= 1".to_string());
        }
        if !(self.topology.area_side_m > 0.0) {
            problems.push("topology.area_side_m must be positive".to_string());
        }
        if self.task.model_dim < 5 {
            problems.push(
                "task.model_dim must be >= 5 (label rule uses components 2 and 5)".to_string(),
            );
        }
        if !(self.task.learning_rate > 0.0) {
            problems.push("task.learning_rate must be positive".to_string());
        }
        if self.task.local_epochs == 0 {
            problems.push("task.local_epochs must be >= 1".to_string());
        }
        if !(self.task.regularization >= 0.0) {
            problems.push("task.regularization must be nonnegative".to_string());
        }
        if !(self.budget.p_ave_w > 0.0) || !(self.budget.p_ave_w <= self.budget.p_max_w) {
            problems.push(format!(
                "budget requires 0 < p_ave_w <= p_max_w, got {} and {}",
                self.budget.p_ave_w, self.budget.p_max_w
            ));
        }
        if !(self.lyapunov.v > 0.0) {
            problems.push("lyapunov.v must be positive".to_string());
        }
        if self.run.rounds == 0 {
            problems.push("run.rounds must be >= 1".to_string());
        }
        let raw_flags = [self.gap.raw_a, self.gap.raw_b, self.gap.raw_c];
        let raw_set = raw_flags.iter().filter(|v| v.is_some()).count();
        if raw_set != 0 && raw_set != 3 {
            problems.push("gap.raw_a, gap.raw_b, gap.raw_c must be set together".to_string());
        }
        if self.budget.raw && self.gap.model_norm_bound == 0.0 {
            problems.push("budget.raw = true needs an explicit gap.model_norm_bound".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Raw surrogate-weight override, if fully specified.
    pub fn raw_gap_weights(&self) -> Option<(f64, f64, f64)> {
        match (self.gap.raw_a, self.gap.raw_b, self.gap.raw_c) {
            (Some(a), Some(b), Some(c)) => Some((a, b, c)),
            _ => None,
        }
    }
}

/// Loads a config: optional TOML file, then `--set key=value` overrides.
pub fn parse_config(
    path: Option<&std::path::Path>,
    overrides: &[String],
) -> Result<SimulationConfig> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| Error::ConfigFile {
                path: p.display().to_string(),
                source,
            })?;
            text.parse::<toml::Table>()
                .map_err(|e| Error::ConfigParse(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for entry in overrides {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| Error::ConfigParse(format!("override '{entry}' is not key=value")))?;
        let fragment = parse_override(key.trim(), value.trim())?;
        merge(&mut table, fragment);
    }
    let config: SimulationConfig = table
        .try_into()
        .map_err(|e| Error::ConfigParse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Parses one dotted-key override by round-tripping it through TOML, so
/// `lyapunov.v=25` and `strategy.power=lgr` both work (bare words become
/// strings).
fn parse_override(key: &str, value: &str) -> Result<toml::Table> {
    if key.is_empty() {
        return Err(Error::ConfigParse("empty override key".into()));
    }
    let attempt = format!("{key} = {value}");
    if let Ok(t) = attempt.parse::<toml::Table>() {
        return Ok(t);
    }
    let quoted = format!("{key} = \"{}\"", value.replace('"', "\\\""));
    quoted
        .parse::<toml::Table>()
        .map_err(|e| Error::ConfigParse(format!("override '{key}={value}': {e}")))
}

fn merge(base: &mut toml::Table, patch: toml::Table) {
    for (key, value) in patch {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(existing)), toml::Value::Table(incoming)) => {
                merge(existing, incoming);
            }
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}
