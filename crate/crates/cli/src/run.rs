//! Experiment pipeline: background, random data, Gauss solve, evolution with
//! monitors, conformal post-processing, and artifact emission.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use ymhd::conformal::{conformal_residual_check, decay_report, DecayReport, DecaySample, FrameMap, HIGGS_WEIGHT};
use ymhd::constraints::{assemble_initial_data, refinement_orders, ConstraintMonitor, ConstraintReport, InitialDataReport};
use ymhd::dynamics::{wave_residuals, Dynamics, StepControl, WaveResiduals, WaveSnapshots};
use ymhd::energy::{energy_report, estimate_monitor, scaled_initial_data, EstimateVerdict};
use ymhd::lattice::{build_automorphism, write_snapshot, FieldState, GaugeTransform, Grid, RandomSeedFields};
use ymhd::numerics::observed_order;

use crate::config::{ExperimentKind, Normalization, RunConfig, Setup};
use crate::error::{CliError, StageExt};
use crate::output::{self, EnergyRow};

/// Monitors recorded along one evolution.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub energies: Vec<EnergyRow>,
    pub constraints: Vec<ConstraintReport>,
    pub control: StepControl,
    pub initial_data: InitialDataReport,
    pub amplitude_scale: f64,
}

impl Trajectory {
    pub fn energy_series(&self) -> Vec<(f64, f64)> {
        self.energies.iter().map(|r| (r.report.tau, r.report.total())).collect()
    }

    pub fn decay_samples(&self) -> Vec<DecaySample> {
        self.energies.iter().map(|r| r.physical).collect()
    }
}

/// Growth of the primary constraints relative to `max(initial, floor)`.
#[derive(Clone, Debug, Serialize)]
pub struct ConstraintSummary {
    pub floor: f64,
    pub initial: ConstraintReport,
    pub terminal: ConstraintReport,
    pub growth_ratios: Vec<(String, f64)>,
    /// Observed orders against the refined companion run.
    pub refinement_orders: Option<Vec<(String, f64)>>,
    pub refined_terminal: Option<ConstraintReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolveSummary {
    pub estimate: EstimateVerdict,
    pub decay: Option<DecayReport>,
    pub decay_note: Option<String>,
    pub constraints: ConstraintSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct GaugeInvarianceSummary {
    /// Largest relative difference of any sector energy at any report time.
    pub max_relative_difference: f64,
    pub per_sector: Vec<(String, f64)>,
    /// Largest relative difference of the total energy at each order `0..=k`.
    pub per_order: Vec<f64>,
    pub unitarity_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AutomorphismSummary {
    pub max_temporal_error: f64,
    pub max_alpha: f64,
    pub unitarity_defect: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceLevel {
    pub n: usize,
    pub dt: f64,
    pub wave: WaveResiduals,
    pub conformal_mismatch: f64,
    pub conformal_relative: f64,
    pub wrong_weight_relative: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceSummary {
    pub levels: Vec<ConvergenceLevel>,
    /// Observed orders between consecutive levels, per residual.
    pub wave_orders: Vec<Vec<(String, f64)>>,
    pub conformal_orders: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSummary {
    Evolve(EvolveSummary),
    GaugeInvariance { evolve: EvolveSummary, invariance: GaugeInvarianceSummary },
    AutomorphismCheck(AutomorphismSummary),
    ConvergenceStudy(ConvergenceSummary),
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub directory: PathBuf,
    pub experiment: ExperimentSummary,
    pub wall_seconds: f64,
}

fn seeds_for(cfg: &RunConfig, grid: &Grid, fibers: ymhd::lattice::Fibers) -> RandomSeedFields {
    RandomSeedFields::generate(grid, fibers, cfg.initial.seed, cfg.initial.cutoff, cfg.mask())
}

/// Initial data of the configured amplitude, with the seed scale factor used.
pub fn initial_data(cfg: &RunConfig, setup: &Setup, grid: Grid) -> Result<(FieldState, InitialDataReport, f64), CliError> {
    let seeds = seeds_for(cfg, &grid, setup.dynamics.fibers());
    let amp = cfg.initial.amplitude;
    match cfg.initial.normalization {
        Normalization::Energy => {
            scaled_initial_data(&setup.dynamics, grid, &seeds, amp * amp, cfg.numerics.energy_k, &setup.solve).stage("initial data")
        }
        Normalization::Seed => {
            let (u, rep) = assemble_initial_data(&setup.dynamics, grid, &seeds.scaled(amp), &setup.solve).stage("initial data")?;
            Ok((u, rep, amp))
        }
    }
}

fn energy_row(dynamics: &Dynamics, state: &FieldState, k: usize) -> ymhd::Result<EnergyRow> {
    let rate = dynamics.rhs(state)?;
    let report = energy_report(dynamics, state, &rate, k)?;
    let map = FrameMap::at(&dynamics.background, state.tau)?;
    let physical = DecaySample::from_report(&report, &map);
    Ok(EnergyRow { report, physical })
}

/// Evolve `initial` with energy and constraint monitors at the report cadence.
pub fn evolve_monitored(
    dynamics: &Dynamics,
    initial: FieldState,
    control: &StepControl,
    every: usize,
    k: usize,
    mut on_state: impl FnMut(usize, &FieldState) -> ymhd::Result<()>,
) -> ymhd::Result<(Vec<EnergyRow>, Vec<ConstraintReport>, FieldState)> {
    let mut monitor = ConstraintMonitor::new(dynamics, &initial)?;
    let mut energies = Vec::new();
    let last = dynamics.evolve(initial, control, every, |step, state| {
        monitor.record(dynamics, state)?;
        energies.push(energy_row(dynamics, state, k)?);
        on_state(step, state)
    })?;
    Ok((energies, monitor.reports, last))
}

fn trajectory(
    cfg: &RunConfig,
    setup: &Setup,
    initial: FieldState,
    initial_data: InitialDataReport,
    scale: f64,
    control: StepControl,
) -> Result<(Trajectory, FieldState), CliError> {
    let (energies, constraints, last) = evolve_monitored(
        &setup.dynamics,
        initial,
        &control,
        cfg.numerics.report_every,
        cfg.numerics.energy_k,
        |_, _| Ok(()),
    )
    .stage("evolution")?;
    Ok((Trajectory { energies, constraints, control, initial_data, amplitude_scale: scale }, last))
}

fn summarize(cfg: &RunConfig, traj: &Trajectory, refined: Option<&Trajectory>) -> EvolveSummary {
    let floor = cfg.numerics.cg_tol;
    let initial = traj.constraints.first().copied().unwrap_or_default();
    let terminal = traj.constraints.last().copied().unwrap_or_default();
    let base = initial.primary();
    let growth_ratios = base
        .iter()
        .enumerate()
        .map(|(i, (name, b))| {
            let worst = traj.constraints.iter().map(|r| r.primary()[i].1).fold(0.0, f64::max);
            (name.to_string(), worst / b.max(floor))
        })
        .collect();
    let refined_terminal = refined.and_then(|r| r.constraints.last().copied());
    let refinement_orders =
        refined_terminal.map(|fine| refinement_orders(&terminal, &fine).iter().map(|(n, v)| (n.to_string(), *v)).collect());
    let (decay, decay_note) = match decay_report(&traj.decay_samples(), cfg.numerics.decay_window) {
        Ok(d) => (Some(d), None),
        Err(e) => (None, Some(e.to_string())),
    };
    EvolveSummary {
        estimate: estimate_monitor(&traj.energy_series()),
        decay,
        decay_note,
        constraints: ConstraintSummary { floor, initial, terminal, growth_ratios, refinement_orders, refined_terminal },
    }
}

fn run_evolve(cfg: &RunConfig, setup: &Setup, dir: &Path) -> Result<(EvolveSummary, Trajectory), CliError> {
    let (u, rep, scale) = initial_data(cfg, setup, setup.grid)?;
    let control = StepControl::new(&setup.grid, &setup.dynamics.background, cfg.numerics.cfl, setup.tau_end).stage("step control")?;
    if cfg.output.snapshots {
        write_snapshot(&dir.join("initial.snapshot"), &u, json!({ "scale": scale })).stage("snapshot")?;
    }
    let (traj, last) = trajectory(cfg, setup, u, rep, scale, control)?;
    if cfg.output.snapshots {
        write_snapshot(&dir.join("final.snapshot"), &last, json!({ "scale": scale })).stage("snapshot")?;
    }
    let refined = if cfg.experiment.refine {
        // Same continuum data: the seed scale of the coarse run is reused.
        let grid = setup.grid.with_n(2 * setup.grid.n()).stage("refinement")?;
        let seeds = seeds_for(cfg, &grid, setup.dynamics.fibers()).scaled(scale);
        let (u, rep) = assemble_initial_data(&setup.dynamics, grid, &seeds, &setup.solve).stage("refined initial data")?;
        let fine_control =
            StepControl { dt: 0.5 * control.dt, steps: 2 * control.steps, cfl: 0.5 * control.cfl, tau_end: control.tau_end };
        let fine = RunConfig { numerics: crate::config::NumericsConfig { report_every: 2 * cfg.numerics.report_every, ..cfg.numerics.clone() }, ..cfg.clone() };
        Some(trajectory(&fine, setup, u, rep, scale, fine_control)?.0)
    } else {
        None
    };
    let summary = summarize(cfg, &traj, refined.as_ref());
    if let Some(fine) = &refined {
        output::write_constraints_csv(&dir.join("constraints_refined.csv"), &fine.constraints)?;
    }
    Ok((summary, traj))
}

fn run_gauge_invariance(cfg: &RunConfig, setup: &Setup, dir: &Path) -> Result<(ExperimentSummary, Trajectory), CliError> {
    let (summary, traj) = run_evolve(cfg, setup, dir)?;
    let (u, _, _) = initial_data(cfg, setup, setup.grid)?;
    let model = &setup.dynamics.model;
    let e = &cfg.experiment;
    let g = GaugeTransform::smooth_random(model, &setup.grid, e.gauge_seed, e.gauge_amplitude, e.gauge_cutoff).stage("gauge transform")?;
    let frame = setup.dynamics.background.frame(u.tau).stage("gauge transform")?;
    let v = g.apply(&u, model, &frame).stage("gauge transform")?;
    let (other, _, _) = evolve_monitored(
        &setup.dynamics,
        v,
        &traj.control,
        cfg.numerics.report_every,
        cfg.numerics.energy_k,
        |_, _| Ok(()),
    )
    .stage("transformed evolution")?;
    let rel = |p: f64, q: f64| if p == 0.0 && q == 0.0 { 0.0 } else { (p - q).abs() / p.abs().max(q.abs()) };
    let mut per = [0.0f64; 4];
    let mut per_order = vec![0.0f64; cfg.numerics.energy_k + 1];
    let mut rows = Vec::with_capacity(other.len());
    for (a, b) in traj.energies.iter().zip(&other) {
        for (j, m) in per_order.iter_mut().enumerate() {
            *m = m.max(rel(a.report.by_order[j].total, b.report.by_order[j].total));
        }
        let (x, y) = (a.report.at_k(), b.report.at_k());
        let r = [rel(x.yang_mills, y.yang_mills), rel(x.higgs, y.higgs), rel(x.dirac, y.dirac), rel(x.total, y.total)];
        for i in 0..4 {
            per[i] = per[i].max(r[i]);
        }
        rows.push((a.report.tau, r));
    }
    output::write_gauge_csv(&dir.join("gauge_invariance.csv"), &rows)?;
    let names = ["yang_mills", "higgs", "dirac", "total"];
    let invariance = GaugeInvarianceSummary {
        max_relative_difference: per.iter().copied().fold(0.0, f64::max),
        per_sector: names.iter().zip(per).map(|(n, v)| (n.to_string(), v)).collect(),
        per_order,
        unitarity_defect: g.unitarity_defect(),
    };
    Ok((ExperimentSummary::GaugeInvariance { evolve: summary, invariance }, traj))
}

fn run_automorphism(cfg: &RunConfig, setup: &Setup) -> Result<AutomorphismSummary, CliError> {
    let e = &cfg.experiment;
    let model = &setup.dynamics.model;
    let grid = setup.grid;
    let dg = model.dim_g();
    let profile = RandomSeedFields::generate(&grid, setup.dynamics.fibers(), e.gauge_seed, e.gauge_cutoff, cfg.mask());
    // Smooth spatial factor a(x): the first spatial component of a random Lie field, normalized to sup 1.
    let mut base: Vec<f64> = (0..grid.sites()).flat_map(|s| profile.eta[s * 3 * dg..s * 3 * dg + dg].to_vec()).collect();
    let peak = base.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        base.iter_mut().for_each(|v| *v /= peak);
    }
    let amp = e.alpha_amplitude;
    let freq = e.alpha_frequency;
    let alpha = |tau: f64, site: usize| -> Vec<f64> {
        let f = amp * (freq * tau).sin();
        base[site * dg..(site + 1) * dg].iter().map(|v| f * v).collect()
    };
    let taus: Vec<f64> = (0..e.alpha_samples).map(|i| e.alpha_tau_end * i as f64 / (e.alpha_samples - 1) as f64).collect();
    let series = build_automorphism(model, &grid, &taus, alpha).stage("automorphism")?;
    let mut max_err = 0.0f64;
    let mut max_alpha = 0.0f64;
    for i in 2..taus.len() - 2 {
        let coeff = series.temporal_coefficient(model, i).stage("automorphism")?;
        for site in 0..grid.sites() {
            let want = alpha(taus[i], site);
            for a in 0..dg {
                max_err = max_err.max((coeff[site * dg + a] - want[a]).abs());
                max_alpha = max_alpha.max(want[a].abs());
            }
        }
    }
    Ok(AutomorphismSummary {
        max_temporal_error: max_err,
        max_alpha,
        unitarity_defect: series.unitarity_defect(),
        samples: taus.len(),
    })
}

fn run_convergence(cfg: &RunConfig, setup: &Setup) -> Result<ConvergenceSummary, CliError> {
    let e = &cfg.experiment;
    let mut levels = Vec::new();
    for &n in &e.resolutions {
        let grid = cfg.grid_with(n).stage("convergence grid")?;
        let (u, _, _) = initial_data(cfg, setup, grid)?;
        let max_dt = e.dt_ratio * grid.dx();
        let snaps = WaveSnapshots::capture(&setup.dynamics, &u, e.tau_center, max_dt).stage("wave snapshots")?;
        let wave = wave_residuals(&setup.dynamics, &snaps).stage("wave residuals")?;
        let good = conformal_residual_check(&setup.dynamics, &snaps, HIGGS_WEIGHT).stage("conformal check")?;
        let wrong = conformal_residual_check(&setup.dynamics, &snaps, 0.0).stage("conformal check")?;
        levels.push(ConvergenceLevel {
            n,
            dt: snaps.dt,
            wave,
            conformal_mismatch: good.mismatch,
            conformal_relative: good.relative_mismatch(),
            wrong_weight_relative: wrong.relative_mismatch(),
        });
    }
    let wave_orders = levels
        .windows(2)
        .map(|w| {
            w[0].wave
                .as_array()
                .iter()
                .zip(w[1].wave.as_array())
                .map(|((name, c), (_, f))| (name.to_string(), observed_order(*c, f)))
                .collect()
        })
        .collect();
    let conformal_orders = levels.windows(2).map(|w| observed_order(w[0].conformal_mismatch, w[1].conformal_mismatch)).collect();
    Ok(ConvergenceSummary { levels, wave_orders, conformal_orders })
}

/// Run the configured experiment and write all artifacts into `dir`.
pub fn run_experiment(cfg: &RunConfig, dir: &Path) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let start = Instant::now();
    let body = || -> Result<RunSummary, CliError> {
        let setup = cfg.setup().stage("setup")?;
        let (experiment, traj) = match cfg.experiment.kind {
            ExperimentKind::Evolve => {
                let (s, t) = run_evolve(cfg, &setup, dir)?;
                (ExperimentSummary::Evolve(s), Some(t))
            }
            ExperimentKind::GaugeInvariance => {
                let (s, t) = run_gauge_invariance(cfg, &setup, dir)?;
                (s, Some(t))
            }
            ExperimentKind::AutomorphismCheck => (ExperimentSummary::AutomorphismCheck(run_automorphism(cfg, &setup)?), None),
            ExperimentKind::ConvergenceStudy => {
                let s = run_convergence(cfg, &setup)?;
                output::write_convergence_csv(&dir.join("convergence.csv"), &s)?;
                (ExperimentSummary::ConvergenceStudy(s), None)
            }
        };
        let mut fits = json!({});
        if let Some(traj) = &traj {
            output::write_energy_csv(&dir.join("energy.csv"), &traj.energies, cfg.numerics.energy_k)?;
            output::write_constraints_csv(&dir.join("constraints.csv"), &traj.constraints)?;
            let evolve = match &experiment {
                ExperimentSummary::Evolve(s) | ExperimentSummary::GaugeInvariance { evolve: s, .. } => Some(s),
                _ => None,
            };
            if let Some(s) = evolve {
                output::write_json(&dir.join("decay.json"), &json!({ "decay": s.decay, "note": s.decay_note }))?;
                fits = json!({
                    "energy_growth_rate": s.estimate.growth_rate,
                    "decay": s.decay,
                    "constraint_growth": s.constraints.growth_ratios,
                    "constraint_orders": s.constraints.refinement_orders,
                });
            }
            fits["initial_data"] = json!(traj.initial_data);
            fits["amplitude_scale"] = json!(traj.amplitude_scale);
            fits["step"] = json!(traj.control);
        }
        let summary = RunSummary { directory: dir.to_path_buf(), experiment, wall_seconds: start.elapsed().as_secs_f64() };
        output::write_json(
            &dir.join("metadata.json"),
            &json!({
                "version": concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")),
                "config": cfg,
                "config_toml": cfg.to_toml(),
                "horizon": setup.dynamics.background.horizon(),
                "tau_end": setup.tau_end,
                "fits": fits,
                "summary": summary,
            }),
        )?;
        if cfg.output.plots {
            output::replot(dir)?;
        }
        Ok(summary)
    };
    let result = if cfg.numerics.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.numerics.threads)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?
            .install(body)
    } else {
        body()
    };
    if let Err(e) = &result {
        let _ = std::fs::write(dir.join("error.json"), e.to_json());
    }
    result
}
