//! Experiment configuration: strict TOML with dotted-key overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sqg_core::bounds::UniversalConstants;
use sqg_core::solver::{Cadence, SolverConfig};

use crate::LabError;

/// One Fourier mode contributing `amplitude · cos(2π k·x + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: [i64; 2],
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumSpec {
    /// An explicit list of modes; an empty list is the zero datum.
    Modes { modes: Vec<ModeSpec> },
    /// `|θ̂(k)| ∝ |k|^{−slope}` for `0 < max(|k1|,|k2|) ≤ k_max`, random phases
    /// from the experiment seed, rescaled to `‖θ₀‖_{L²} = amplitude`.
    RandomSpectrum {
        slope: f64,
        k_max: i64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

impl DatumSpec {
    /// Multiplies the datum by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            DatumSpec::Modes { modes } => DatumSpec::Modes {
                modes: modes
                    .iter()
                    .map(|m| ModeSpec {
                        amplitude: m.amplitude * factor,
                        ..m.clone()
                    })
                    .collect(),
            },
            DatumSpec::RandomSpectrum {
                slope,
                k_max,
                amplitude,
            } => DatumSpec::RandomSpectrum {
                slope: *slope,
                k_max: *k_max,
                amplitude: amplitude * factor,
            },
        }
    }

    /// Largest wavenumber component the datum touches.
    pub fn max_wavenumber(&self) -> i64 {
        match self {
            DatumSpec::Modes { modes } => modes
                .iter()
                .map(|m| m.k[0].abs().max(m.k[1].abs()))
                .max()
                .unwrap_or(0),
            DatumSpec::RandomSpectrum { k_max, .. } => *k_max,
        }
    }

    fn violations(&self, n: usize) -> Vec<String> {
        let mut v = Vec::new();
        let half = n as i64 / 2;
        match self {
            DatumSpec::Modes { modes } => {
                for (i, m) in modes.iter().enumerate() {
                    if m.k == [0, 0] {
                        v.push(format!(
                            "datum.modes[{i}].k = [0, 0]: mean mode is pinned to zero"
                        ));
                    }
                    if m.k[0].abs() >= half || m.k[1].abs() >= half {
                        v.push(format!(
                            "datum.modes[{i}].k = {:?} not representable below Nyquist on n = {n}",
                            m.k
                        ));
                    }
                    if !m.amplitude.is_finite() || !m.phase.is_finite() {
                        v.push(format!(
                            "datum.modes[{i}] has a non-finite amplitude or phase"
                        ));
                    }
                }
            }
            DatumSpec::RandomSpectrum {
                slope,
                k_max,
                amplitude,
            } => {
                if !slope.is_finite() {
                    v.push(format!("datum.slope = {slope} must be finite"));
                }
                if *k_max < 1 || *k_max >= half {
                    v.push(format!("datum.k_max = {k_max} out of [1, {})", half));
                }
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    v.push(format!("datum.amplitude = {amplitude} must be nonnegative"));
                }
            }
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// One Hölder seminorm column per exponent.
    #[serde(default = "default_alphas")]
    pub holder_alphas: Vec<f64>,
    /// Exponent of the regularized quotient `v`.
    #[serde(default = "half")]
    pub v_alpha: f64,
    /// Follow the closed-form `ξ(t)` from the theory bounds; otherwise `ξ`
    /// stays at `xi`.
    #[serde(default = "yes")]
    pub xi_schedule: bool,
    #[serde(default)]
    pub xi: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            holder_alphas: default_alphas(),
            v_alpha: half(),
            xi_schedule: true,
            xi: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_cadence")]
    pub cadence: Cadence,
    #[serde(default)]
    pub snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            cadence: default_cadence(),
            snapshots: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub solver: SolverConfig,
    pub datum: DatumSpec,
    #[serde(default)]
    pub probes: ProbeConfig,
    #[serde(default)]
    pub theory: UniversalConstants,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}
fn default_alphas() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}
fn default_dir() -> PathBuf {
    PathBuf::from("sqg-out")
}
fn default_cadence() -> Cadence {
    Cadence::Time(0.1)
}

impl Default for ExperimentConfig {
    /// A small, well-resolved two-mode run.
    fn default() -> Self {
        Self {
            solver: SolverConfig {
                n: 64,
                t_end: 0.5,
                ..SolverConfig::default()
            },
            datum: DatumSpec::Modes {
                modes: vec![
                    ModeSpec {
                        k: [1, 0],
                        amplitude: 1.0,
                        phase: 0.0,
                    },
                    ModeSpec {
                        k: [1, 1],
                        amplitude: 0.5,
                        phase: 0.3,
                    },
                ],
            },
            probes: ProbeConfig::default(),
            theory: UniversalConstants::default(),
            output: OutputConfig::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Every violated constraint, prefixed with its key.
    pub fn violations(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .solver
            .violations()
            .into_iter()
            .map(|m| format!("solver.{m}"))
            .collect();
        v.extend(self.datum.violations(self.solver.n));
        for (i, a) in self.probes.holder_alphas.iter().enumerate() {
            if !(*a > 0.0 && *a <= 1.0) {
                v.push(format!("probes.holder_alphas[{i}] = {a} out of (0, 1]"));
            }
        }
        if !(self.probes.v_alpha > 0.0 && self.probes.v_alpha < 1.0) {
            v.push(format!(
                "probes.v_alpha = {} out of (0, 1)",
                self.probes.v_alpha
            ));
        }
        if !(self.probes.xi.is_finite() && self.probes.xi >= 0.0) {
            v.push(format!(
                "probes.xi = {} must be nonnegative",
                self.probes.xi
            ));
        }
        if !self.output.cadence.is_valid() {
            v.push(format!(
                "output.cadence = {:?} must be positive",
                self.output.cadence
            ));
        }
        v
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(LabError::Invalid(v))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Parses and validates TOML text.
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let cfg: Self = toml::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical TOML serialization, ignoring the output
    /// directory so relocated reruns share a hash.
    pub fn content_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.dir = PathBuf::new();
        Sha256::digest(canonical.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Applies `key.path=value` overrides. Keys must already exist in the
    /// fully-defaulted config; values are parsed as TOML literals, falling
    /// back to bare strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, LabError> {
        let mut tree = toml::Table::try_from(self).expect("config serializes to a table");
        // c_star is derived from c0; drop the echo so overriding c0 stays consistent.
        if let Some(theory) = tree.get_mut("theory").and_then(|t| t.as_table_mut()) {
            theory.remove("c_star");
        }
        for raw in overrides {
            let raw = raw.as_ref();
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| LabError::Override(format!("`{raw}` is not KEY=VALUE")))?;
            let key = key.trim();
            let parsed = parse_value(value.trim());
            set_path(&mut tree, key, parsed)?;
        }
        let cfg: Self = tree
            .try_into()
            .map_err(|e: toml::de::Error| LabError::Override(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_value(text: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    toml::from_str::<Wrap>(&format!("v = {text}"))
        .map(|w| w.v)
        .unwrap_or_else(|_| toml::Value::String(text.to_string()))
}

fn set_path(tree: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), LabError> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = tree;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        let entry = node
            .get_mut(*part)
            .ok_or_else(|| LabError::Override(format!("unknown config key `{key}`")))?;
        if last {
            *entry = value;
            return Ok(());
        }
        node = entry.as_table_mut().ok_or_else(|| {
            LabError::Override(format!("`{}` is not a table", parts[..=i].join(".")))
        })?;
    }
    Err(LabError::Override("empty key".into()))
}

/// Reads, parses and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, LabError> {
    let text = fs::read_to_string(path).map_err(|e| LabError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    ExperimentConfig::from_toml(&text).map_err(|e| match e {
        LabError::Parse(msg) => LabError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[solver]
n = 64
gamma = 0.8
t_end = 0.5

[datum]
kind = "modes"
modes = [{ k = [1, 0], amplitude = 1.0 }]
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.solver.cfl, 0.5);
        assert_eq!(cfg.probes, ProbeConfig::default());
        assert_eq!(cfg.theory, UniversalConstants::default());
        assert_eq!(cfg.output.cadence, Cadence::Time(0.1));
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let rnd = ExperimentConfig {
            datum: DatumSpec::RandomSpectrum {
                slope: 4.0,
                k_max: 6,
                amplitude: 0.7,
            },
            output: OutputConfig {
                cadence: Cadence::Steps(5),
                ..OutputConfig::default()
            },
            ..ExperimentConfig::default()
        };
        assert_eq!(ExperimentConfig::from_toml(&rnd.to_toml()).unwrap(), rnd);
    }

    #[test]
    fn gamma_out_of_range_is_reported_with_every_violation() {
        let text = MINIMAL.replace("gamma = 0.8", "gamma = 1.5\ncfl = 3.0");
        match ExperimentConfig::from_toml(&text) {
            Err(LabError::Invalid(v)) => {
                assert_eq!(v.len(), 2, "{v:?}");
                assert!(v[0].contains("gamma 1.5 out of [γ₀, 1]"));
                assert!(v[1].contains("cfl"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = MINIMAL.replace("t_end = 0.5", "t_end = 0.5\ntend = 1.0");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("tend") && err.contains("line"), "{err}");
        let text = format!("{MINIMAL}\n[output]\ndirr = \"x\"\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn overrides_address_existing_keys() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let o = cfg
            .with_overrides(&["solver.gamma=0.9", "output.dir=runs/a", "theory.C0=3"])
            .unwrap();
        assert_eq!(o.solver.gamma, 0.9);
        assert_eq!(o.output.dir, PathBuf::from("runs/a"));
        assert_eq!(o.theory.C0(), 3.0);
        let c = cfg.with_overrides(&["theory.c0=0.0625"]).unwrap();
        assert_eq!(c.theory.c_star(), 1.0);
        assert!(matches!(
            cfg.with_overrides(&["solver.gama=0.9"]),
            Err(LabError::Override(_))
        ));
        assert!(matches!(
            cfg.with_overrides(&["solver.gamma"]),
            Err(LabError::Override(_))
        ));
        assert!(matches!(
            cfg.with_overrides(&["solver.gamma=2.0"]),
            Err(LabError::Invalid(_))
        ));
        assert!(cfg.with_overrides(&["solver.n=\"big\""]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let b = a.with_overrides(&["seed=1"]).unwrap();
        assert_eq!(a.content_hash(), ExperimentConfig::default().content_hash());
        let c = a.with_overrides(&["output.dir=\"elsewhere\""]).unwrap();
        assert_eq!(a.content_hash(), c.content_hash());
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }

    #[test]
    fn datum_checks() {
        let mut cfg = ExperimentConfig {
            datum: DatumSpec::Modes {
                modes: vec![ModeSpec {
                    k: [40, 0],
                    amplitude: 1.0,
                    phase: 0.0,
                }],
            },
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.datum = DatumSpec::RandomSpectrum {
            slope: 4.0,
            k_max: 0,
            amplitude: 1.0,
        };
        assert!(cfg.validate().is_err());
    }
}
