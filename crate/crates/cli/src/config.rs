//! Experiment configuration: built-in defaults per space, an optional TOML
//! file, and command-line overrides, in increasing precedence.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gflow_core::flow::{integer_ratio, step_count};
use gflow_core::model::{Scheme, SemiConvexity};
use gflow_core::spaces::hilbert::RD_LAMBDA;
use gflow_core::spaces::icdf::ICDF_LAMBDA;
use gflow_core::spaces::sphere::SPHERE_LAMBDA;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Sphere,
    HilbertRd,
    WassersteinIcdf,
    HalfLine,
}

impl Space {
    pub const ALL: [Space; 4] = [Space::Sphere, Space::HilbertRd, Space::WassersteinIcdf, Space::HalfLine];

    pub fn id(&self) -> &'static str {
        match self {
            Space::Sphere => "sphere",
            Space::HilbertRd => "hilbert-rd",
            Space::WassersteinIcdf => "wasserstein-icdf",
            Space::HalfLine => "halfline",
        }
    }

    /// Step size bound `tau_*` of the space's energy.
    pub fn tau_star(&self) -> f64 {
        let lambda = match self {
            Space::Sphere => SPHERE_LAMBDA,
            Space::HilbertRd => RD_LAMBDA,
            Space::WassersteinIcdf => ICDF_LAMBDA,
            Space::HalfLine => 0.0,
        };
        SemiConvexity::maximal(lambda)
            .expect("built-in moduli are nonpositive")
            .tau_star()
    }

    fn defaults(&self) -> Section {
        let ladder = vec![1.28e-3, 6.4e-4, 3.2e-4, 1.6e-4, 8e-5];
        match self {
            Space::Sphere => Section {
                tau_ref: Some(1e-5),
                tau: Some(vec![1.6e-3, 8e-4, 4e-4, 2e-4, 1e-4]),
                tau_coarse: Some(1.6e-3),
                t_final: Some(0.5),
                grid_k: None,
            },
            Space::HilbertRd => Section {
                tau_ref: Some(2e-5),
                tau: Some(ladder),
                tau_coarse: Some(1.28e-3),
                t_final: Some(0.05),
                grid_k: Some(100),
            },
            Space::WassersteinIcdf => Section {
                tau_ref: Some(2e-5),
                tau: Some(ladder),
                tau_coarse: Some(1.28e-3),
                t_final: Some(0.05),
                grid_k: Some(50),
            },
            Space::HalfLine => Section {
                tau_ref: Some(1e-4),
                tau: Some(vec![1e-2, 1e-3, 1e-4]),
                tau_coarse: Some(1e-2),
                t_final: Some(2.0),
                grid_k: None,
            },
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Space {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Space::ALL
            .into_iter()
            .find(|space| space.id() == s)
            .ok_or_else(|| {
                let ids: Vec<&str> = Space::ALL.iter().map(Space::id).collect();
                format!("unknown space '{s}' (expected one of {})", ids.join(", "))
            })
    }
}

pub fn parse_scheme(s: &str) -> Result<Scheme, String> {
    Scheme::from_tag(s).ok_or_else(|| format!("unknown scheme '{s}' (expected mm or bdf2)"))
}

/// Per-space settings; every field may be left to the defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Section {
    pub tau_ref: Option<f64>,
    pub tau: Option<Vec<f64>>,
    pub tau_coarse: Option<f64>,
    pub t_final: Option<f64>,
    pub grid_k: Option<usize>,
}

impl Section {
    /// Fills unset fields from `other`.
    fn or(self, other: Section) -> Section {
        Section {
            tau_ref: self.tau_ref.or(other.tau_ref),
            tau: self.tau.or(other.tau),
            tau_coarse: self.tau_coarse.or(other.tau_coarse),
            t_final: self.t_final.or(other.t_final),
            grid_k: self.grid_k.or(other.grid_k),
        }
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub space: Option<String>,
    pub scheme: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub sphere: Option<Section>,
    #[serde(rename = "hilbert-rd")]
    pub hilbert_rd: Option<Section>,
    #[serde(rename = "wasserstein-icdf")]
    pub wasserstein_icdf: Option<Section>,
    pub halfline: Option<Section>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    fn section(&self, space: Space) -> Option<Section> {
        match space {
            Space::Sphere => self.sphere.clone(),
            Space::HilbertRd => self.hilbert_rd.clone(),
            Space::WassersteinIcdf => self.wasserstein_icdf.clone(),
            Space::HalfLine => self.halfline.clone(),
        }
    }
}

/// Command-line values that override the file and the defaults.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub space: Option<Space>,
    pub schemes: Option<Vec<Scheme>>,
    pub section: Section,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub space: Space,
    pub schemes: Vec<Scheme>,
    pub tau_ref: f64,
    /// Strictly decreasing.
    pub taus: Vec<f64>,
    pub tau_coarse: f64,
    pub t_final: f64,
    pub grid_k: Option<usize>,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
}

pub const DEFAULT_SEED: u64 = 1;

impl ExperimentConfig {
    pub fn resolve(file: Option<&FileConfig>, overrides: Overrides) -> Result<Self, CliError> {
        let empty = FileConfig::default();
        let file = file.unwrap_or(&empty);
        let space = match (overrides.space, &file.space) {
            (Some(space), _) => space,
            (None, Some(id)) => id.parse().map_err(CliError::Config)?,
            (None, None) => return Err(CliError::Config("no space given (use --space)".into())),
        };
        let schemes = match (overrides.schemes, &file.scheme) {
            (Some(s), _) => s,
            (None, Some(tags)) => tags
                .iter()
                .map(|t| parse_scheme(t))
                .collect::<Result<Vec<_>, _>>()
                .map_err(CliError::Config)?,
            (None, None) => vec![Scheme::MinimizingMovement, Scheme::Bdf2],
        };
        let section = overrides
            .section
            .or(file.section(space).unwrap_or_default())
            .or(space.defaults());
        let missing = |name: &str| CliError::Config(format!("{name} is not set for space {space}"));
        let config = ExperimentConfig {
            space,
            schemes,
            tau_ref: section.tau_ref.ok_or_else(|| missing("tau_ref"))?,
            taus: section.tau.ok_or_else(|| missing("tau"))?,
            tau_coarse: section.tau_coarse.ok_or_else(|| missing("tau_coarse"))?,
            t_final: section.t_final.ok_or_else(|| missing("t_final"))?,
            grid_k: section.grid_k,
            out: overrides
                .out
                .or_else(|| file.out.clone())
                .unwrap_or_else(|| PathBuf::from(".")),
            seed: overrides.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            jobs: overrides.jobs.or(file.jobs).unwrap_or(1),
        };
        config.validate_common()?;
        Ok(config)
    }

    fn validate_common(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schemes.is_empty() {
            return bad("no scheme selected".into());
        }
        if self.taus.is_empty() {
            return bad("no step size given".into());
        }
        for &tau in &self.taus {
            if !(tau > 0.0 && tau.is_finite()) {
                return bad(format!("step size {tau} must be positive"));
            }
            if tau >= self.space.tau_star() {
                return bad(format!(
                    "step size {tau} is not below tau_* = {} for space {}",
                    self.space.tau_star(),
                    self.space
                ));
            }
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final {} must be positive", self.t_final));
        }
        if let Some(&tau) = self.taus.iter().find(|&&tau| step_count(self.t_final, tau) == 0) {
            return bad(format!("t_final {} is shorter than the step {tau}; no steps to take", self.t_final));
        }
        match (self.space, self.grid_k) {
            (Space::HilbertRd, Some(k)) if k < 2 => bad(format!("grid_k {k} must be at least 2")),
            (Space::WassersteinIcdf, Some(k)) if k < 4 => bad(format!("grid_k {k} must be at least 4")),
            (Space::HilbertRd | Space::WassersteinIcdf, None) => bad("grid_k is required".into()),
            _ => Ok(()),
        }?;
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        Ok(())
    }

    /// The step-size ladder conditions of a convergence study.
    pub fn validate_study(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.taus.len() < 3 {
            return bad(format!("{} step sizes given, a study needs at least 3", self.taus.len()));
        }
        if self.taus.windows(2).any(|w| !(w[0] > w[1])) {
            return bad("step sizes must be sorted in strictly decreasing order".into());
        }
        if !(self.tau_ref > 0.0) || self.tau_ref >= self.space.tau_star() {
            return bad(format!("reference step {} is out of range", self.tau_ref));
        }
        for &tau in &self.taus {
            if integer_ratio(tau, self.tau_ref).is_none() {
                return bad(format!("step {tau} is not an integer multiple of tau_ref {}", self.tau_ref));
            }
            if integer_ratio(self.tau_coarse, tau).is_none() {
                return bad(format!("tau_coarse {} is not an integer multiple of step {tau}", self.tau_coarse));
            }
        }
        if self.t_final < self.tau_coarse {
            return bad(format!("t_final {} is shorter than tau_coarse {}", self.t_final, self.tau_coarse));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn overrides(space: Space) -> Overrides {
        Overrides {
            space: Some(space),
            ..Overrides::default()
        }
    }

    #[test]
    fn defaults_are_valid_studies() {
        for space in Space::ALL {
            let cfg = ExperimentConfig::resolve(None, overrides(space)).unwrap();
            cfg.validate_study().unwrap();
        }
    }

    #[test]
    fn space_ids_round_trip() {
        for space in Space::ALL {
            assert_eq!(space.id().parse::<Space>().unwrap(), space);
        }
        assert!("torus".parse::<Space>().is_err());
    }

    #[test]
    fn file_then_flags_precedence() {
        let file: FileConfig = toml::from_str(
            r#"
            space = "hilbert-rd"
            scheme = ["bdf2"]
            seed = 9
            [hilbert-rd]
            grid_k = 40
            t_final = 0.02
            "#,
        )
        .unwrap();
        let cfg = ExperimentConfig::resolve(Some(&file), Overrides::default()).unwrap();
        assert_eq!(cfg.space, Space::HilbertRd);
        assert_eq!(cfg.schemes, vec![Scheme::Bdf2]);
        assert_eq!(cfg.grid_k, Some(40));
        assert_eq!(cfg.t_final, 0.02);
        assert_eq!(cfg.tau_ref, 2e-5);
        assert_eq!(cfg.seed, 9);

        let mut o = Overrides::default();
        o.section.grid_k = Some(20);
        o.seed = Some(3);
        let cfg = ExperimentConfig::resolve(Some(&file), o).unwrap();
        assert_eq!(cfg.grid_k, Some(20));
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("spaec = \"sphere\"").is_err());
    }

    #[test]
    fn horizon_shorter_than_step_is_rejected() {
        let mut o = overrides(Space::HalfLine);
        o.section.tau = Some(vec![0.1]);
        o.section.t_final = Some(0.05);
        assert!(matches!(ExperimentConfig::resolve(None, o), Err(CliError::Config(_))));
    }

    #[test]
    fn step_above_tau_star_is_rejected() {
        let mut o = overrides(Space::Sphere);
        o.section.tau = Some(vec![0.06]);
        assert!(ExperimentConfig::resolve(None, o).is_err());
    }

    #[test]
    fn study_ladder_conditions() {
        let mut o = overrides(Space::Sphere);
        o.section.tau = Some(vec![1.6e-3, 1.2e-3, 4e-4]);
        let cfg = ExperimentConfig::resolve(None, o).unwrap();
        assert!(cfg.validate_study().is_err());
        let mut o = overrides(Space::Sphere);
        o.section.tau = Some(vec![1e-4, 2e-4, 4e-4]);
        assert!(ExperimentConfig::resolve(None, o).unwrap().validate_study().is_err());
    }
}
