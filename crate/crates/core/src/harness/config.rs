use crate::error::{Error, Result};
use crate::incident::IncidentField;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Smallest surface quadrature order accepted for flux checks.
pub const MIN_QUAD_ORDER: usize = 8;
/// Smallest layer-potential grid order.
pub const MIN_BEM_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "one")]
    pub r_star: f64,
    pub alpha: Vec<f64>,
    pub epsilon: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default = "zero_list")]
    pub omega: Vec<f64>,
    /// Interior density; `None` ties it to the frequency (`ρ₁ = ω`).
    #[serde(default)]
    pub rho1: Option<f64>,
    #[serde(default = "one")]
    pub kappa1: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            omega: zero_list(),
            rho1: None,
            kappa1: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_rel_tol")]
    pub sequence_rel_tol: f64,
    /// Polar order of the flux quadrature.
    #[serde(default = "default_flux_order")]
    pub flux_order: usize,
    /// Polar order of the boundary-constancy sample grid.
    #[serde(default = "default_spread_order")]
    pub spread_order: usize,
    #[serde(default = "default_volume_order")]
    pub volume_order: usize,
    #[serde(default = "default_bem_order")]
    pub bem_order: usize,
    /// Relative tolerance of rate-fit slopes.
    #[serde(default = "default_fit_tol")]
    pub fit_tolerance: f64,
    #[serde(default = "default_flux_tol")]
    pub flux_tolerance: f64,
    #[serde(default = "default_zero_tol")]
    pub static_zero_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sequence_rel_tol: default_rel_tol(),
            flux_order: default_flux_order(),
            spread_order: default_spread_order(),
            volume_order: default_volume_order(),
            bem_order: default_bem_order(),
            fit_tolerance: default_fit_tol(),
            flux_tolerance: default_flux_tol(),
            static_zero_tol: default_zero_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sequence,
    Field,
    Verify,
    Sweep,
    BemCheck,
    Estimate,
}

/// One experiment: the parameter grid, the physics, the incident field and
/// every numerical tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default = "IncidentField::x1")]
    pub incident: IncidentField,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_experiment")]
    pub experiment: Experiment,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Write assembled operator blocks during BEM checks.
    #[serde(default)]
    pub dump_matrices: bool,
}

/// Command-line overrides of config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub epsilon: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub omega: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuple {
    pub r_star: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub omega: f64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(v) = &o.epsilon {
            self.geometry.epsilon = v.clone();
        }
        if let Some(v) = &o.alpha {
            self.geometry.alpha = v.clone();
        }
        if let Some(v) = &o.omega {
            self.physics.omega = v.clone();
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if o.workers.is_some() {
            self.workers = o.workers;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        let fail = |m: String| Err(Error::Config(m));
        if g.alpha.is_empty() || g.epsilon.is_empty() {
            return fail("alpha and epsilon lists must be non-empty".into());
        }
        if self.physics.omega.is_empty() {
            return fail("omega list must be non-empty".into());
        }
        if !(g.r_star > 0.0) || !g.r_star.is_finite() {
            return fail(format!("r_star must be positive, got {}", g.r_star));
        }
        if let Some(e) = g.epsilon.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return fail(format!("epsilon must lie in (0, 1], got {e}"));
        }
        if let Some(a) = g.alpha.iter().find(|a| !a.is_finite()) {
            return fail(format!("alpha must be finite, got {a}"));
        }
        if let Some(w) = self.physics.omega.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return fail(format!("omega must be non-negative, got {w}"));
        }
        if let Some(r) = self.physics.rho1 {
            if !(r > 0.0 && r <= 1.0) {
                return fail(format!("rho1 must lie in (0, 1], got {r}"));
            }
        }
        if !(self.physics.kappa1 > 0.0) {
            return fail("kappa1 must be positive".into());
        }
        let t = &self.tolerances;
        if !(t.sequence_rel_tol > 0.0 && t.sequence_rel_tol <= 1e-2) {
            return fail(format!("sequence_rel_tol must lie in (0, 1e-2], got {}", t.sequence_rel_tol));
        }
        for (name, v) in [
            ("fit_tolerance", t.fit_tolerance),
            ("flux_tolerance", t.flux_tolerance),
            ("static_zero_tol", t.static_zero_tol),
        ] {
            if !(v > 0.0) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v, min) in [
            ("flux_order", t.flux_order, MIN_QUAD_ORDER),
            ("spread_order", t.spread_order, MIN_QUAD_ORDER),
            ("volume_order", t.volume_order, 4),
            ("bem_order", t.bem_order, MIN_BEM_ORDER),
        ] {
            if v < min {
                return fail(format!("{name} must be at least {min}, got {v}"));
            }
        }
        if self.workers == Some(0) {
            return fail("workers must be at least 1".into());
        }
        self.incident.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Parameter tuples in (alpha, epsilon, omega) order.
    pub fn tuples(&self) -> Vec<Tuple> {
        let mut out = Vec::new();
        for &alpha in &self.geometry.alpha {
            for &epsilon in &self.geometry.epsilon {
                for &omega in &self.physics.omega {
                    out.push(Tuple {
                        r_star: self.geometry.r_star,
                        alpha,
                        epsilon,
                        omega,
                    });
                }
            }
        }
        out
    }

    /// Hex digest of the canonical JSON form, without the output location
    /// and worker count (neither changes results).
    pub fn digest(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = PathBuf::new();
        canon.workers = None;
        let text = serde_json::to_string(&canon).expect("config serializes");
        let hash = Sha256::digest(text.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `<output_dir>/run-<digest prefix>`, created and probed for writing.
    pub fn prepare_run_dir(&self) -> Result<PathBuf> {
        let dir = self.output_dir.join(format!("run-{}", &self.digest()[..12]));
        std::fs::create_dir_all(&dir)?;
        let probe = dir.join(".write-probe");
        std::fs::write(&probe, b"")?;
        std::fs::remove_file(&probe)?;
        Ok(dir)
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.workers {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| Error::Config(format!("worker pool: {e}")))
    }
}

fn one() -> f64 {
    1.0
}
fn zero_list() -> Vec<f64> {
    vec![0.0]
}
fn default_rel_tol() -> f64 {
    1e-10
}
fn default_flux_order() -> usize {
    64
}
fn default_spread_order() -> usize {
    16
}
fn default_volume_order() -> usize {
    12
}
fn default_bem_order() -> usize {
    96
}
fn default_fit_tol() -> f64 {
    0.05
}
fn default_flux_tol() -> f64 {
    1e-6
}
fn default_zero_tol() -> f64 {
    crate::asymptotics::STATIC_ZERO_TOL
}
fn default_experiment() -> Experiment {
    Experiment::Sweep
}
fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"geometry": {"alpha": [0.0], "epsilon": [0.01, 0.001]}}"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.geometry.r_star, 1.0);
        assert_eq!(c.physics.omega, vec![0.0]);
        assert_eq!(c.tolerances.flux_order, 64);
        assert_eq!(c.tuples().len(), 2);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            r#"{"geometry": {"alpha": [], "epsilon": [0.1]}}"#,
            r#"{"geometry": {"alpha": [0], "epsilon": [0.0]}}"#,
            r#"{"geometry": {"alpha": [0], "epsilon": [0.1]}, "tolerances": {"flux_order": 4}}"#,
            r#"{"geometry": {"alpha": [0], "epsilon": [0.1]}, "tolerances": {"sequence_rel_tol": 0.5}}"#,
            r#"{"geometry": {"alpha": [0], "epsilon": [0.1]}, "physics": {"omega": [-1]}}"#,
            r#"{"geometry": {"alpha": [0], "epsilon": [0.1]}, "bogus": 1}"#,
        ];
        for text in bad {
            assert!(RunConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn overrides_replace_keys() {
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.apply(&Overrides {
            epsilon: Some(vec![0.5]),
            seed: Some(9),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(c.geometry.epsilon, vec![0.5]);
        assert_eq!(c.seed, 9);
        assert!(c
            .apply(&Overrides {
                workers: Some(0),
                ..Default::default()
            })
            .is_err());
    }

    #[test]
    fn digest_ignores_output_location() {
        let a = RunConfig::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("/elsewhere");
        b.workers = Some(3);
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }
}
