//! Run configuration: TOML with the groups `grid`, `background`, `gauge`,
//! `initial`, `numerics`, `output` and `experiment`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ymhd::algebra::{GaugeModel, LieData, U1Charges};
use ymhd::constraints::GaussSolveOptions;
use ymhd::dynamics::{Couplings, Dynamics, Potential};
use ymhd::geometry::{Background, ScaleProfile, SpatialMetric, TableProfile};
use ymhd::lattice::{Grid, SectorMask, StencilOrder};

use crate::error::CliError;

pub const GROUPS: [&str; 7] = ["grid", "background", "gauge", "initial", "numerics", "output", "experiment"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub background: BackgroundConfig,
    pub gauge: GaugeConfig,
    pub initial: InitialConfig,
    pub numerics: NumericsConfig,
    pub output: OutputConfig,
    pub experiment: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub n: usize,
    pub length: f64,
    pub stencil_order: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 16, length: 1.0, stencil_order: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    DeSitter,
    Exponential,
    Power,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialKind {
    Static,
    Bianchi1,
    Exponential,
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackgroundConfig {
    pub profile: ProfileKind,
    /// de Sitter radius.
    pub a: f64,
    /// Exponential rate.
    pub rate: f64,
    /// Power-law exponent and time scale.
    pub exponent: f64,
    pub t0: f64,
    /// Two-column `t,s` table for `profile = "table"`.
    pub profile_table: Option<PathBuf>,
    pub lapse: f64,
    pub spatial: SpatialKind,
    pub spatial_rates: [f64; 3],
    /// Four-column `τ,b1,b2,b3` table for `spatial = "table"`.
    pub spatial_table: Option<PathBuf>,
    /// `τ_end / T`.
    pub tau_end_fraction: f64,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        BackgroundConfig {
            profile: ProfileKind::DeSitter,
            a: 1.0,
            rate: 1.0,
            exponent: 2.0,
            t0: 1.0,
            profile_table: None,
            lapse: 1.0,
            spatial: SpatialKind::Static,
            spatial_rates: [0.0; 3],
            spatial_table: None,
            tau_end_fraction: 0.9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    U1Toy,
    Su2Electroweak,
    Su3Color,
    Su2AdjointHiggs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Conformal,
    MexicanHat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaugeConfig {
    pub model: ModelKind,
    pub yukawa: f64,
    pub lambda: f64,
    pub potential: PotentialKind,
    pub mu: f64,
    /// `[higgs, plus, minus]` charges of the u(1) model.
    pub u1_charges: [f64; 3],
}

impl Default for GaugeConfig {
    fn default() -> Self {
        let c = U1Charges::default();
        GaugeConfig {
            model: ModelKind::Su2Electroweak,
            yukawa: 0.8,
            lambda: 0.5,
            potential: PotentialKind::Conformal,
            mu: 0.0,
            u1_charges: [c.higgs, c.plus, c.minus],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `amplitude²` is the order-`k` energy of the assembled data.
    Energy,
    /// `amplitude` multiplies the seed fields directly.
    Seed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialConfig {
    pub seed: u64,
    pub amplitude: f64,
    pub normalization: Normalization,
    pub cutoff: usize,
    pub gauge: bool,
    pub higgs: bool,
    pub dirac: bool,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            seed: 1,
            amplitude: 1e-2,
            normalization: Normalization::Energy,
            cutoff: 2,
            gauge: true,
            higgs: true,
            dirac: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericsConfig {
    pub cfl: f64,
    pub cg_tol: f64,
    /// Report every this many steps (the final step is always reported).
    pub report_every: usize,
    pub energy_k: usize,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    /// Fraction of the run used for decay fits.
    pub decay_window: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig { cfl: 0.5, cg_tol: 1e-10, report_every: 1, energy_k: 2, threads: 0, decay_window: 0.4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub plots: bool,
    /// Write the initial and final states as snapshots.
    pub snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: PathBuf::from("runs/default"), plots: true, snapshots: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Single evolution with monitors and decay fits.
    Evolve,
    /// Evolve data and its gauge transform side by side.
    GaugeInvariance,
    /// Build `g` from a prescribed `α` and compare the temporal coefficient.
    AutomorphismCheck,
    /// Wave-oracle and conformal-residual refinement study.
    ConvergenceStudy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Repeat the run with `Δτ` and `Δx` halved and report constraint orders.
    pub refine: bool,
    pub gauge_seed: u64,
    pub gauge_amplitude: f64,
    pub gauge_cutoff: usize,
    /// `α(τ, x) = alpha_amplitude·sin(alpha_frequency·τ)·a(x)` with a smooth random `a`.
    pub alpha_amplitude: f64,
    pub alpha_frequency: f64,
    pub alpha_samples: usize,
    pub alpha_tau_end: f64,
    /// Grid sizes of the refinement study (each the double of the previous).
    pub resolutions: Vec<usize>,
    pub tau_center: f64,
    /// `Δτ / Δx` of the refinement study.
    pub dt_ratio: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::Evolve,
            refine: false,
            gauge_seed: 11,
            gauge_amplitude: 0.5,
            gauge_cutoff: 1,
            alpha_amplitude: 0.4,
            alpha_frequency: 3.0,
            alpha_samples: 201,
            alpha_tau_end: 1.0,
            resolutions: vec![16, 32],
            tau_center: 0.25,
            dt_ratio: 0.5,
        }
    }
}

/// Everything a run needs, built from a validated configuration.
pub struct Setup {
    pub grid: Grid,
    pub dynamics: Dynamics,
    pub tau_end: f64,
    pub mask: SectorMask,
    pub solve: GaussSolveOptions,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let (cfg, unknown) = RunConfig::parse(text)?;
        cfg.checked(unknown)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let (mut cfg, unknown) = RunConfig::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.checked(unknown)
    }

    /// Deserialize, collecting unknown groups and keys instead of failing on the first.
    fn parse(text: &str) -> Result<(Self, Vec<String>), CliError> {
        let de = toml::de::Deserializer::parse(text).map_err(|e| CliError::Config(vec![e.to_string()]))?;
        let mut unknown = Vec::new();
        let cfg: RunConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| CliError::Config(vec![e.to_string()]))?;
        let msgs = unknown
            .into_iter()
            .map(|p| {
                if p.contains('.') {
                    format!("unknown key `{p}`")
                } else {
                    format!("unknown group `{p}` (known groups: {})", GROUPS.join(", "))
                }
            })
            .collect();
        Ok((cfg, msgs))
    }

    fn checked(self, mut violations: Vec<String>) -> Result<Self, CliError> {
        if let Err(CliError::Config(more)) = self.validate() {
            violations.extend(more);
        }
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(CliError::Config(violations))
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.background.profile_table, &mut self.background.spatial_table].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn model(&self) -> ymhd::Result<GaugeModel> {
        let g = &self.gauge;
        match g.model {
            ModelKind::U1Toy => {
                let [higgs, plus, minus] = g.u1_charges;
                GaugeModel::u1_toy(U1Charges { higgs, plus, minus }, g.yukawa)
            }
            ModelKind::Su2Electroweak => GaugeModel::su2_electroweak(g.yukawa),
            ModelKind::Su3Color => GaugeModel::su3_color(g.yukawa),
            ModelKind::Su2AdjointHiggs => GaugeModel::adjoint_higgs(LieData::su2()),
        }
    }

    pub fn couplings(&self) -> Couplings {
        let potential = match self.gauge.potential {
            PotentialKind::Conformal => Potential::Conformal,
            PotentialKind::MexicanHat => Potential::MexicanHat { mu: self.gauge.mu },
        };
        Couplings { lambda: self.gauge.lambda, potential }
    }

    pub fn background(&self) -> ymhd::Result<Background> {
        let b = &self.background;
        let table = |p: &Option<PathBuf>, what: &str| {
            p.clone().ok_or_else(|| ymhd::Error::Config(format!("`background.{what}` is required for a table")))
        };
        let profile = match b.profile {
            ProfileKind::DeSitter => ScaleProfile::DeSitter { a: b.a },
            ProfileKind::Exponential => ScaleProfile::Exponential { rate: b.rate },
            ProfileKind::Power => ScaleProfile::Power { exponent: b.exponent, t0: b.t0 },
            ProfileKind::Table => {
                let path = table(&b.profile_table, "profile_table")?;
                ScaleProfile::Table(TableProfile::from_csv(&path).map_err(|e| in_file(&path, e))?)
            },
        };
        let spatial = match b.spatial {
            SpatialKind::Static => SpatialMetric::Static,
            SpatialKind::Bianchi1 => SpatialMetric::Bianchi1 { rates: b.spatial_rates },
            SpatialKind::Exponential => SpatialMetric::Exponential { rates: b.spatial_rates },
            SpatialKind::Table => {
                let path = table(&b.spatial_table, "spatial_table")?;
                SpatialMetric::from_csv(&path).map_err(|e| in_file(&path, e))?
            }
        };
        Background::new(profile, b.lapse, spatial)
    }

    pub fn grid_with(&self, n: usize) -> ymhd::Result<Grid> {
        Grid::new(n, self.grid.length, StencilOrder::from_int(self.grid.stencil_order)?)
    }

    pub fn mask(&self) -> SectorMask {
        SectorMask { gauge: self.initial.gauge, higgs: self.initial.higgs, dirac: self.initial.dirac }
    }

    pub fn solve_options(&self) -> GaussSolveOptions {
        GaussSolveOptions { cg_tol: self.numerics.cg_tol, ..GaussSolveOptions::default() }
    }

    pub fn setup(&self) -> ymhd::Result<Setup> {
        let grid = self.grid_with(self.grid.n)?;
        let background = self.background()?;
        let tau_end = self.background.tau_end_fraction * background.horizon();
        let dynamics = Dynamics::new(self.model()?, background, self.couplings())?;
        Ok(Setup { grid, dynamics, tau_end, mask: self.mask(), solve: self.solve_options() })
    }

    /// All violations of the configuration, checked before any field allocation.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut v = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                v.push(msg);
            }
        };
        let g = &self.grid;
        check(g.n >= 8, format!("grid.n must be at least 8, got {}", g.n));
        check(g.length > 0.0 && g.length.is_finite(), format!("grid.length must be positive, got {}", g.length));
        if let Err(e) = StencilOrder::from_int(g.stencil_order) {
            check(false, format!("grid.stencil_order: {e}"));
        }

        let b = &self.background;
        check(
            b.tau_end_fraction > 0.0 && b.tau_end_fraction < 1.0,
            format!("background.tau_end_fraction must lie in (0, 1) so that τ_end < T, got {}", b.tau_end_fraction),
        );
        if let Err(e) = self.background() {
            check(false, format!("background: {e}"));
        }

        let ga = &self.gauge;
        if let Err(e) = self.model() {
            check(false, format!("gauge: {e}"));
        }
        if let Err(e) = self.couplings().validate() {
            check(false, format!("gauge: {e}"));
        }
        check(ga.yukawa.is_finite(), format!("gauge.yukawa must be finite, got {}", ga.yukawa));

        let i = &self.initial;
        check(i.amplitude >= 0.0 && i.amplitude.is_finite(), format!("initial.amplitude must be non-negative, got {}", i.amplitude));
        check(i.cutoff >= 1 && 2 * i.cutoff < g.n, format!("initial.cutoff must lie in [1, n/2), got {}", i.cutoff));

        let nu = &self.numerics;
        check(nu.cfl > 0.0 && nu.cfl <= 1.0, format!("numerics.cfl must lie in (0, 1], got {}", nu.cfl));
        check(nu.cg_tol > 0.0 && nu.cg_tol < 1.0, format!("numerics.cg_tol must lie in (0, 1), got {}", nu.cg_tol));
        check(nu.report_every >= 1, "numerics.report_every must be at least 1".to_string());
        check(nu.energy_k <= ymhd::energy::MAX_ORDER, format!("numerics.energy_k must be at most {}, got {}", ymhd::energy::MAX_ORDER, nu.energy_k));
        check(nu.decay_window > 0.0 && nu.decay_window <= 1.0, format!("numerics.decay_window must lie in (0, 1], got {}", nu.decay_window));

        let e = &self.experiment;
        match e.kind {
            ExperimentKind::GaugeInvariance => {
                check(e.gauge_amplitude.is_finite(), "experiment.gauge_amplitude must be finite".to_string());
                check(e.gauge_cutoff >= 1 && 2 * e.gauge_cutoff < g.n, "experiment.gauge_cutoff must lie in [1, n/2)".to_string());
            }
            ExperimentKind::AutomorphismCheck => {
                check(e.alpha_samples >= 5, "experiment.alpha_samples must be at least 5".to_string());
                check(e.alpha_tau_end > 0.0, "experiment.alpha_tau_end must be positive".to_string());
                if let Ok(bg) = self.background() {
                    check(e.alpha_tau_end < bg.horizon(), "experiment.alpha_tau_end must be below the horizon".to_string());
                }
            }
            ExperimentKind::ConvergenceStudy => {
                check(e.resolutions.len() >= 2, "experiment.resolutions needs at least two grid sizes".to_string());
                check(
                    e.resolutions.windows(2).all(|w| w[1] == 2 * w[0]),
                    format!("experiment.resolutions must double at each level, got {:?}", e.resolutions),
                );
                check(e.resolutions.iter().all(|&n| n >= 8), "experiment.resolutions must be at least 8".to_string());
                check(e.dt_ratio > 0.0 && e.dt_ratio <= 1.0, "experiment.dt_ratio must lie in (0, 1]".to_string());
                check(e.tau_center > 0.0, "experiment.tau_center must be positive".to_string());
                if let (Ok(bg), Some(&n0)) = (self.background(), e.resolutions.first()) {
                    let max_dt = e.dt_ratio * g.length / n0 as f64;
                    check(
                        e.tau_center >= 2.0 * max_dt && e.tau_center + 3.0 * max_dt < bg.horizon(),
                        "experiment.tau_center must leave two steps on either side within the horizon".to_string(),
                    );
                    check(bg.spatial.is_static(), "the convergence study needs static slices".to_string());
                }
                check(self.gauge.potential == PotentialKind::Conformal, "the convergence study needs the conformal potential".to_string());
            }
            ExperimentKind::Evolve => {}
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(v))
        }
    }
}

fn in_file(path: &Path, err: ymhd::Error) -> ymhd::Error {
    ymhd::Error::Config(format!("{}: {err}", path.display()))
}
