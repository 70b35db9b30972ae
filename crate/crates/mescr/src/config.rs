//! Run configuration: a TOML file with unit-suffixed quantities.
//!
//! Quantities accept either a bare number (interpreted as SI) or a string
//! with an explicit unit, e.g. `flexible_length = "30 mm"`,
//! `youngs_flexible = "5 MPa"`, `magnitude = "10 mT"`. Unknown keys are
//! rejected.

use nalgebra::Vector3;
use serde::Deserialize;
use thiserror::Error;

use crate::perfgeom::{PerformanceIndex, QuadratureSpec};
use crate::robot::RobotSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("field {field}: {message}")]
    Invalid { field: String, message: String },
}

/// A physical quantity with an optional unit suffix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity(pub f64);

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Quantity;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number (SI) or a string like \"30 mm\"")
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Quantity, E> {
                Ok(Quantity(v))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Quantity, E> {
                Ok(Quantity(v as f64))
            }
            fn visit_str<E: serde::de::Error>(self, s: &str) -> Result<Quantity, E> {
                parse_quantity(s).map(Quantity).map_err(E::custom)
            }
        }
        de.deserialize_any(V)
    }
}

/// Parse `"<number> <unit>"`, normalizing to SI.
pub fn parse_quantity(s: &str) -> Result<f64, String> {
    let s = s.trim();
    // the unit starts at the first alphabetic character that is not an
    // exponent marker inside the number ("1e-2 A m^2")
    let bytes: Vec<char> = s.chars().collect();
    let mut split = s.len();
    let mut byte_pos = 0;
    for (i, &c) in bytes.iter().enumerate() {
        let is_exponent = (c == 'e' || c == 'E')
            && i > 0
            && bytes[i - 1].is_ascii_digit()
            && bytes
                .get(i + 1)
                .is_some_and(|n| n.is_ascii_digit() || *n == '+' || *n == '-');
        if (c.is_alphabetic() || c == 'µ') && !is_exponent {
            split = byte_pos;
            break;
        }
        byte_pos += c.len_utf8();
    }
    let (num, unit) = s.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("bad number in quantity '{s}'"))?;
    let unit = unit.trim().replace(['·', '*'], " ");
    let unit = unit.split_whitespace().collect::<Vec<_>>().join(" ");
    let scale = match unit.as_str() {
        "" => 1.0,
        // length
        "m" => 1.0,
        "cm" => 1e-2,
        "mm" => 1e-3,
        "um" | "µm" => 1e-6,
        // pressure
        "Pa" => 1.0,
        "kPa" => 1e3,
        "MPa" => 1e6,
        "GPa" => 1e9,
        // magnetic flux density
        "T" => 1.0,
        "mT" => 1e-3,
        "uT" | "µT" => 1e-6,
        // dipole moment
        "A m^2" | "A m2" => 1.0,
        "A mm^2" | "A mm2" => 1e-6,
        // area moment of inertia
        "m^4" | "m4" => 1.0,
        "mm^4" | "mm4" => 1e-12,
        // torque
        "N m" => 1.0,
        "N mm" => 1e-3,
        other => return Err(format!("unknown unit '{other}' in quantity '{s}'")),
    };
    Ok(value * scale)
}

fn default_n_joints() -> usize {
    7
}
fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub flexible_length: Quantity,
    pub magnet_length: Quantity,
    pub area_inertia: Quantity,
    pub youngs_flexible: Quantity,
    pub youngs_magnet: Quantity,
    #[serde(default = "default_poisson_flexible")]
    pub poisson_flexible: f64,
    #[serde(default = "default_poisson_magnet")]
    pub poisson_magnet: f64,
    pub dipole_modulus: Quantity,
    pub magnet_positions: Vec<Quantity>,
    pub magnet_signs: Vec<f64>,
    #[serde(default = "default_n_joints")]
    pub n_joints: usize,
}

fn default_poisson_flexible() -> f64 {
    0.49
}
fn default_poisson_magnet() -> f64 {
    0.3
}

impl RobotConfig {
    pub fn to_spec(&self) -> RobotSpec {
        RobotSpec {
            flexible_length: self.flexible_length.0,
            magnet_length: self.magnet_length.0,
            area_inertia: self.area_inertia.0,
            youngs_flexible: self.youngs_flexible.0,
            youngs_magnet: self.youngs_magnet.0,
            poisson_flexible: self.poisson_flexible,
            poisson_magnet: self.poisson_magnet,
            dipole_modulus: self.dipole_modulus.0,
            magnet_positions: self.magnet_positions.iter().map(|q| q.0).collect(),
            magnet_signs: self.magnet_signs.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default = "default_field_magnitude")]
    pub magnitude: Quantity,
    #[serde(default = "default_direction")]
    pub direction: [f64; 3],
    /// Sweep upper bound (sweep studies).
    #[serde(default = "default_sweep_max")]
    pub sweep_max: Quantity,
    #[serde(default = "default_sweep_steps")]
    pub sweep_steps: usize,
}

fn default_field_magnitude() -> Quantity {
    Quantity(5e-3)
}
fn default_direction() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}
fn default_sweep_max() -> Quantity {
    Quantity(50e-3)
}
fn default_sweep_steps() -> usize {
    51
}

impl FieldConfig {
    pub fn vector(&self) -> Vector3<f64> {
        let d = Vector3::new(self.direction[0], self.direction[1], self.direction[2]);
        self.magnitude.0 * d.normalize()
    }
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            magnitude: default_field_magnitude(),
            direction: default_direction(),
            sweep_max: default_sweep_max(),
            sweep_steps: default_sweep_steps(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol_scale")]
    pub tol_scale: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_tol_scale() -> f64 {
    1e-12
}
fn default_max_iterations() -> usize {
    300
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_scale: default_tol_scale(),
            max_iterations: default_max_iterations(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    #[serde(default = "default_index")]
    pub index: String,
    /// Actuation radius as a fraction of the uniqueness field bound.
    #[serde(default = "default_bmax_fraction")]
    pub b_max_fraction: f64,
    #[serde(default = "default_radial")]
    pub radial_nodes: usize,
    #[serde(default = "default_angular")]
    pub angular_nodes: usize,
    /// Planar (disk) study when true, full ball otherwise.
    #[serde(default = "default_true")]
    pub planar: bool,
    #[serde(default = "default_design_joints")]
    pub n_joints: usize,
}

fn default_index() -> String {
    "manipulability".into()
}
fn default_bmax_fraction() -> f64 {
    0.8
}
fn default_radial() -> usize {
    8
}
fn default_angular() -> usize {
    32
}
fn default_true() -> bool {
    true
}
fn default_design_joints() -> usize {
    60
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            index: default_index(),
            b_max_fraction: default_bmax_fraction(),
            radial_nodes: default_radial(),
            angular_nodes: default_angular(),
            planar: default_true(),
            n_joints: default_design_joints(),
        }
    }
}

impl ObjectiveConfig {
    pub fn performance_index(&self) -> Result<PerformanceIndex, ConfigError> {
        match self.index.as_str() {
            "manipulability" => Ok(PerformanceIndex::Manipulability),
            "distortion" => Ok(PerformanceIndex::Distortion),
            "unit" => Ok(PerformanceIndex::Unit),
            other => Err(ConfigError::Invalid {
                field: "objective.index".into(),
                message: format!("unknown index '{other}'"),
            }),
        }
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            radial: self.radial_nodes,
            angular: self.angular_nodes,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    /// Minimum magnet spacing; default 1.5 × magnet length.
    pub min_spacing: Option<Quantity>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_resolution")]
    pub grid_resolution: usize,
    #[serde(default = "default_one")]
    pub scan_all_patterns: f64,
}

fn default_restarts() -> usize {
    5
}
fn default_resolution() -> usize {
    40
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            min_spacing: None,
            restarts: default_restarts(),
            seed: 0,
            grid_resolution: default_resolution(),
            scan_all_patterns: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub robot: RobotConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub optimize: OptimizeConfig,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let spec = self.robot.to_spec();
        spec.validate().map_err(|e| ConfigError::Invalid {
            field: "robot".into(),
            message: e.to_string(),
        })?;
        if self.robot.n_joints < spec.n_magnets() + 1 {
            return Err(ConfigError::Invalid {
                field: "robot.n_joints".into(),
                message: format!(
                    "need at least {} joints for {} magnets",
                    spec.n_magnets() + 1,
                    spec.n_magnets()
                ),
            });
        }
        self.objective.performance_index()?;
        if !(self.objective.b_max_fraction > 0.0 && self.objective.b_max_fraction <= 1.0) {
            return Err(ConfigError::Invalid {
                field: "objective.b_max_fraction".into(),
                message: "must lie in (0, 1]".into(),
            });
        }
        Ok(())
    }

    pub fn min_spacing(&self) -> f64 {
        self.optimize
            .min_spacing
            .map(|q| q.0)
            .unwrap_or(1.5 * self.robot.magnet_length.0)
    }
}

/// The reference configuration shipped with the examples.
pub fn reference_config_toml() -> &'static str {
    r#"[robot]
flexible_length = "30 mm"
magnet_length = "3 mm"
area_inertia = "0.7854 mm^4"
youngs_flexible = "5 MPa"
youngs_magnet = "160 GPa"
dipole_modulus = "1e-2 A m^2"
magnet_positions = ["33 mm"]
magnet_signs = [1]
n_joints = 7

[field]
magnitude = "5 mT"
direction = [1.0, 0.0, 0.0]
sweep_max = "50 mT"
sweep_steps = 51
"#
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parses_unit_suffixed_quantities() {
        assert_relative_eq!(parse_quantity("30 mm").unwrap(), 0.03);
        assert_relative_eq!(parse_quantity("5 MPa").unwrap(), 5e6);
        assert_relative_eq!(parse_quantity("10 mT").unwrap(), 0.01);
        assert_relative_eq!(parse_quantity("0.7854 mm^4").unwrap(), 0.7854e-12);
        assert_relative_eq!(parse_quantity("1e-2 A m^2").unwrap(), 1e-2);
        assert_relative_eq!(parse_quantity("2 A mm^2").unwrap(), 2e-6);
        assert_relative_eq!(parse_quantity("42").unwrap(), 42.0);
        assert!(parse_quantity("3 parsec").is_err());
    }

    #[test]
    fn reference_config_round_trips_to_the_reference_spec() {
        let cfg = RunConfig::from_str(reference_config_toml()).unwrap();
        let spec = cfg.robot.to_spec();
        let reference = crate::robot::reference_spec();
        assert_relative_eq!(spec.flexible_length, reference.flexible_length);
        assert_relative_eq!(spec.youngs_magnet, reference.youngs_magnet);
        assert_relative_eq!(spec.magnet_positions[0], reference.magnet_positions[0]);
        assert_eq!(cfg.robot.n_joints, 7);
        assert_relative_eq!(cfg.min_spacing(), 4.5e-3);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_fields() {
        let bad = format!("{}\nnot_a_key = 1\n", reference_config_toml());
        assert!(RunConfig::from_str(&bad).is_err());
        let bad = reference_config_toml().replace("[field]", "[robot.extra]\nx = 1\n[field]");
        assert!(RunConfig::from_str(&bad).is_err());
        let bad = format!(
            "{}\n[solver]\ntol_scale = 1e-12\nmystery = 2\n",
            reference_config_toml()
        );
        assert!(RunConfig::from_str(&bad).is_err());
    }

    #[test]
    fn rejects_out_of_range_poisson_ratio() {
        let bad = reference_config_toml().replace(
            "n_joints = 7",
            "n_joints = 7\npoisson_flexible = 0.7",
        );
        let err = RunConfig::from_str(&bad).unwrap_err();
        assert!(err.to_string().contains("poisson_flexible"));
    }

    #[test]
    fn rejects_non_increasing_magnet_positions() {
        let bad = reference_config_toml().replace(
            "magnet_positions = [\"33 mm\"]\nmagnet_signs = [1]",
            "magnet_positions = [\"20 mm\", \"20 mm\", \"36 mm\"]\nmagnet_signs = [1, 1, 1]",
        );
        let err = RunConfig::from_str(&bad).unwrap_err();
        assert!(err.to_string().contains("increasing"));
    }
}
