//! TOML run configuration: one level of sections, every key explicit.

use std::path::PathBuf;

use chemotax::constants::{estimate_cgn, estimate_k, splitmix, OptConfig};
use chemotax::grid::integrate;
use chemotax::model::{
    build_cosine_mode, build_gaussian_bump, build_random_perturbation, build_symmetric_copy, default_floor,
};
use chemotax::{
    Backend, DerivedParams, Domain, DomainConstant, Field, ModelParams, PositivityMode, Regime, SimState,
    SolverConfig,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub model: ModelSection,
    pub u0: InitSpec,
    pub w0: InitSpec,
    #[serde(default = "InitSpec::equilibrium")]
    pub v0: InitSpec,
    #[serde(default = "InitSpec::equilibrium")]
    pub z0: InitSpec,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub constants: ConstantsSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub probe: ProbeSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub chi1: f64,
    pub chi2: f64,
    pub chi3: f64,
    #[serde(default)]
    pub tau1: f64,
    #[serde(default)]
    pub tau2: f64,
}

/// Initial-data recipe for one field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    Gaussian {
        mass: f64,
        center: [f64; 2],
        width: f64,
        floor: Option<f64>,
    },
    Constant {
        value: f64,
    },
    Cosine {
        mean: f64,
        amplitude: f64,
        mode_x: usize,
        mode_y: usize,
    },
    Perturbed {
        mean: f64,
        amplitude: f64,
        seed: u64,
    },
    /// `w0 = (χ₂/χ₁) u0`, `z0 = (χ₁/χ₂) v0`.
    SymmetricCopy,
    Zero,
    /// Signal in balance with its source: `(I − Δ)⁻¹` of `w0` (for `v0`) or `u0` (for `z0`).
    Equilibrium,
}

impl InitSpec {
    fn equilibrium() -> Self {
        InitSpec::Equilibrium
    }

    fn with_seed(&self, seed: u64) -> Self {
        match self {
            InitSpec::Perturbed { mean, amplitude, seed: own } => InitSpec::Perturbed {
                mean: *mean,
                amplitude: *amplitude,
                seed: splitmix(seed, *own),
            },
            other => other.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub blowup_linf_factor: f64,
    pub blowup_entropy_factor: f64,
    pub positivity_mode: String,
    pub helmholtz_backend: String,
    pub max_steps: Option<usize>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::<f64>::default();
        Self {
            dt_init: d.dt_init,
            dt_min: d.dt_min,
            dt_max: d.dt_max,
            cfl_safety: d.cfl_safety,
            t_end: d.t_end,
            blowup_linf_factor: d.blowup_linf_factor,
            blowup_entropy_factor: d.blowup_entropy_factor,
            positivity_mode: "scharfetter_gummel".into(),
            helmholtz_backend: "cosine".into(),
            max_steps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    pub every: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self { every: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSection {
    /// User-supplied `k`; estimated when absent and needed.
    pub k: Option<f64>,
    /// User-supplied `C_GN`; estimated when absent and needed.
    pub cgn: Option<f64>,
    /// Cells per unit length of the estimation grid (capped to the run grid).
    pub estimate_resolution: usize,
    pub random_starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        let o = OptConfig::default();
        Self {
            k: None,
            cgn: None,
            estimate_resolution: 32,
            random_starts: o.random_starts,
            seed: o.seed,
            max_iter: 2000,
            rel_tol: o.rel_tol,
        }
    }
}

impl ConstantsSection {
    pub fn opt_config(&self) -> OptConfig {
        OptConfig {
            random_starts: self.random_starts,
            seed: self.seed,
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
            warm_start: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub base_seed: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { base_seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    /// Gaussian widths tried by `probe-blowup`, each replacing the `u0` width.
    pub widths: Vec<f64>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self { widths: vec![0.02, 0.05, 0.1] }
    }
}

/// Parse error with a 1-based source position.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn position(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl RunConfig {
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| position(src, s.start));
            ConfigError { line, column, message: e.message().trim().to_string() }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn domain(&self) -> Result<Domain<f64>, CliError> {
        let d = &self.domain;
        Ok(Domain::new(d.lx, d.ly, d.nx, d.ny)?)
    }

    pub fn params(&self) -> Result<ModelParams<f64>, CliError> {
        let m = &self.model;
        Ok(ModelParams::new(m.chi1, m.chi2, m.chi3, m.tau1, m.tau2)?)
    }

    pub fn solver_config(&self) -> Result<SolverConfig<f64>, CliError> {
        let s = &self.solver;
        let cfg = SolverConfig {
            dt_init: s.dt_init,
            dt_min: s.dt_min,
            dt_max: s.dt_max,
            cfl_safety: s.cfl_safety,
            t_end: s.t_end,
            blowup_linf_factor: s.blowup_linf_factor,
            blowup_entropy_factor: s.blowup_entropy_factor,
            positivity_mode: s.positivity_mode.parse::<PositivityMode>()?,
            helmholtz_backend: s.helmholtz_backend.parse::<Backend>()?,
            max_steps: s.max_steps,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same recipes with every random seed re-derived from `(seed, ·)`.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.u0 = c.u0.with_seed(seed);
        c.w0 = c.w0.with_seed(seed);
        c.v0 = c.v0.with_seed(seed);
        c.z0 = c.z0.with_seed(seed);
        c
    }

    /// Initial state at `t = 0`.
    pub fn initial_state(&self) -> Result<SimState<f64>, CliError> {
        let dom = self.domain()?;
        let params = self.params()?;
        let u = density(&self.u0, &dom, "u0")?;
        let w = match &self.w0 {
            InitSpec::SymmetricCopy => u.scaled(params.chi2 / params.chi1),
            spec => density(spec, &dom, "w0")?,
        };
        let v = signal(&self.v0, &dom, &w, "v0")?;
        let z = match &self.z0 {
            InitSpec::SymmetricCopy => {
                let (_, z) = build_symmetric_copy(&u, &v, &params)?;
                z
            }
            spec => signal(spec, &dom, &u, "z0")?,
        };
        if matches!(self.w0, InitSpec::SymmetricCopy) && params.tau1 != params.tau2 {
            return Err(CliError::Invalid("symmetric_copy needs tau1 = tau2".into()));
        }
        Ok(SimState::new(u, v, w, z))
    }

    /// Initial state with the densities rescaled to masses `m1`, `m2`; equilibrium signals follow.
    pub fn state_with_masses(&self, m1: f64, m2: f64) -> Result<SimState<f64>, CliError> {
        let dom = self.domain()?;
        let mut s = self.initial_state()?;
        s.u = s.u.scaled(m1 / integrate(&s.u, &dom)?);
        s.w = s.w.scaled(m2 / integrate(&s.w, &dom)?);
        let params = self.params()?;
        if matches!(self.v0, InitSpec::Equilibrium) {
            s.v = chemotax::solve_helmholtz(&s.w, 1.0, 1.0, &dom)?;
        }
        match &self.z0 {
            InitSpec::Equilibrium => s.z = chemotax::solve_helmholtz(&s.u, 1.0, 1.0, &dom)?,
            InitSpec::SymmetricCopy => s.z = build_symmetric_copy(&s.u, &s.v, &params)?.1,
            _ => {}
        }
        Ok(s)
    }

    fn estimation_domain(&self) -> Result<Domain<f64>, CliError> {
        let d = &self.domain;
        let r = self.constants.estimate_resolution as f64;
        let nx = ((d.lx * r).round() as usize).clamp(4, d.nx.max(4));
        let ny = ((d.ly * r).round() as usize).clamp(4, d.ny.max(4));
        Ok(Domain::new(d.lx, d.ly, nx, ny)?)
    }

    /// `k` from the config, or a lower-bound estimate on the estimation grid.
    pub fn k_constant(&self) -> Result<DomainConstant<f64>, CliError> {
        match self.constants.k {
            Some(k) => Ok(DomainConstant::user(k)),
            None => {
                let est = estimate_k(&self.estimation_domain()?, &self.constants.opt_config())?;
                Ok(DomainConstant::estimated(est.value))
            }
        }
    }

    /// `C_GN` from the config, or the fourth root of the estimated `C_GN⁴`.
    pub fn cgn_constant(&self) -> Result<DomainConstant<f64>, CliError> {
        match self.constants.cgn {
            Some(c) => Ok(DomainConstant::user(c)),
            None => {
                let est = estimate_cgn(&self.estimation_domain()?, &self.constants.opt_config())?;
                Ok(DomainConstant::estimated(est.value.powf(0.25)))
            }
        }
    }

    /// Domain constants a `run` needs (`k` when `τ > 0`) or, with `classify`, everything the
    /// regime checks use. Values given in the config are always carried along.
    pub fn constants_for(&self, classify: bool) -> Result<Constants, CliError> {
        let parabolic = self.params()?.regime() == Regime::FullyParabolic;
        let k = if classify || parabolic || self.constants.k.is_some() {
            Some(self.k_constant()?)
        } else {
            None
        };
        let cgn = if (classify && parabolic) || self.constants.cgn.is_some() {
            Some(self.cgn_constant()?)
        } else {
            None
        };
        Ok(Constants { k, cgn })
    }

    pub fn derived(&self, state: &SimState<f64>, c: &Constants) -> Result<DerivedParams<f64>, CliError> {
        let dom = self.domain()?;
        let mut dp = DerivedParams::from_initial(&state.u, &state.w, &self.params()?, &dom)?;
        dp.k = c.k;
        dp.cgn = c.cgn;
        Ok(dp)
    }
}

/// Domain constants resolved once per configuration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Constants {
    pub k: Option<DomainConstant<f64>>,
    pub cgn: Option<DomainConstant<f64>>,
}

fn density(spec: &InitSpec, dom: &Domain<f64>, name: &str) -> Result<Field<f64>, CliError> {
    let f = match spec {
        InitSpec::Gaussian { mass, center, width, floor } => {
            let floor = floor.unwrap_or_else(|| default_floor(*mass, dom));
            build_gaussian_bump(dom, *mass, (center[0], center[1]), *width, floor)?
        }
        InitSpec::Constant { value } => Field::constant(dom, *value),
        InitSpec::Cosine { mean, amplitude, mode_x, mode_y } => {
            build_cosine_mode(dom, *mean, *amplitude, *mode_x, *mode_y)
        }
        InitSpec::Perturbed { mean, amplitude, seed } => build_random_perturbation(dom, *mean, *amplitude, *seed),
        other => {
            return Err(CliError::Invalid(format!("{name}: recipe {other:?} does not describe a density")));
        }
    };
    f.check_positive()
        .map_err(|e| CliError::Invalid(format!("{name}: {e}")))?;
    Ok(f)
}

fn signal(spec: &InitSpec, dom: &Domain<f64>, source: &Field<f64>, name: &str) -> Result<Field<f64>, CliError> {
    Ok(match spec {
        InitSpec::Zero => Field::zeros(dom),
        InitSpec::Equilibrium => chemotax::solve_helmholtz(source, 1.0, 1.0, dom)?,
        InitSpec::SymmetricCopy => {
            return Err(CliError::Invalid(format!("{name}: symmetric_copy is only valid for w0 and z0")));
        }
        InitSpec::Gaussian { .. } | InitSpec::Perturbed { .. } => density(spec, dom, name)?,
        InitSpec::Constant { value } => Field::constant(dom, *value),
        InitSpec::Cosine { mean, amplitude, mode_x, mode_y } => {
            build_cosine_mode(dom, *mean, *amplitude, *mode_x, *mode_y)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[domain]
lx = 1.0
ly = 1.0
nx = 16
ny = 16

[model]
chi1 = 1.0
chi2 = 2.0
chi3 = 0.0

[u0]
kind = "gaussian"
mass = 3.0
center = [0.5, 0.5]
width = 0.1

[w0]
kind = "symmetric_copy"
"#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(c.domain.nx, 16);
        assert_eq!(c.v0, InitSpec::Equilibrium);
        assert_eq!(c.diagnostics.every, 10);
        let s = c.initial_state().unwrap();
        let d = c.domain().unwrap();
        assert!((integrate(&s.w, &d).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn error_positions() {
        let bad = BASE.replace("nx = 16", "nx = \"sixteen\"");
        let e = RunConfig::parse(&bad).unwrap_err();
        assert_eq!(e.line, 5);
        assert_eq!(e.column, 6);
        let e = RunConfig::parse("[domain]\nlx = 1.0\nbogus = 3\n").unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn perturbed_needs_seed() {
        let src = BASE.replace(
            "kind = \"symmetric_copy\"",
            "kind = \"perturbed\"\nmean = 1.0\namplitude = 0.1",
        );
        let e = RunConfig::parse(&src).unwrap_err();
        assert!(e.message.contains("seed"), "{}", e.message);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn reseeding_changes_only_random_recipes() {
        let src = BASE.replace(
            "kind = \"symmetric_copy\"",
            "kind = \"perturbed\"\nmean = 1.0\namplitude = 0.1\nseed = 4",
        );
        let c = RunConfig::parse(&src).unwrap();
        let a = c.reseeded(1);
        let b = c.reseeded(2);
        assert_eq!(a.u0, c.u0);
        assert_ne!(a.w0, b.w0);
        assert_eq!(a.w0, c.reseeded(1).w0);
    }
}
