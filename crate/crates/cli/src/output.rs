//! CSV/JSON artifacts and their plots. Floats are written with 17 significant digits.

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;
use ymhd::conformal::DecaySample;
use ymhd::constraints::ConstraintReport;
use ymhd::energy::EnergyReport;

use crate::error::CliError;
use crate::run::ConvergenceSummary;
use crate::svg::{LinePlot, Scale, Series};

/// One energy report with its physical-frame norms.
#[derive(Clone, Debug)]
pub struct EnergyRow {
    pub report: EnergyReport,
    pub physical: DecaySample,
}

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn energy_columns(k: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["tau", "t", "s"].iter().map(|s| s.to_string()).collect();
    for j in 0..=k {
        for name in ["yang_mills", "higgs", "dirac", "total"] {
            cols.push(format!("{name}_k{j}"));
        }
    }
    for name in [
        "reference_total",
        "sup_e",
        "sup_b",
        "sup_phi",
        "sup_psi",
        "phys_sup_phi",
        "phys_sup_e",
        "phys_sup_psi",
        "phys_l2_phi",
        "phys_l2_psi",
    ] {
        cols.push(name.to_string());
    }
    cols
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_energy_csv(path: &Path, rows: &[EnergyRow], k: usize) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(energy_columns(k))?;
    for row in rows {
        let r = &row.report;
        let p = &row.physical;
        let mut rec = vec![fmt(r.tau), fmt(p.t), fmt(p.s)];
        for s in &r.by_order[..=k] {
            rec.extend([fmt(s.yang_mills), fmt(s.higgs), fmt(s.dirac), fmt(s.total)]);
        }
        rec.extend(
            [r.reference_total, r.sup_e, r.sup_b, r.sup_phi, r.sup_psi, p.sup_phi, p.sup_e, p.sup_psi, p.l2_phi, p.l2_psi]
                .map(fmt),
        );
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_constraints_csv(path: &Path, rows: &[ConstraintReport]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(ConstraintReport::COLUMNS)?;
    for r in rows {
        w.write_record(r.values().map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_gauge_csv(path: &Path, rows: &[(f64, [f64; 4])]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["tau", "rel_yang_mills", "rel_higgs", "rel_dirac", "rel_total"])?;
    for (tau, r) in rows {
        w.write_record([fmt(*tau), fmt(r[0]), fmt(r[1]), fmt(r[2]), fmt(r[3])])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_convergence_csv(path: &Path, s: &ConvergenceSummary) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut header = vec!["n".to_string(), "dt".to_string()];
    if let Some(first) = s.levels.first() {
        header.extend(first.wave.as_array().iter().map(|(n, _)| n.to_string()));
    }
    header.extend(["conformal_mismatch", "conformal_relative", "wrong_weight_relative"].map(String::from));
    w.write_record(&header)?;
    for l in &s.levels {
        let mut rec = vec![l.n.to_string(), fmt(l.dt)];
        rec.extend(l.wave.as_array().iter().map(|(_, v)| fmt(*v)));
        rec.extend([fmt(l.conformal_mismatch), fmt(l.conformal_relative), fmt(l.wrong_weight_relative)]);
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Columns of a CSV file by header name.
pub fn read_columns(path: &Path) -> Result<HashMap<String, Vec<f64>>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let mut cols: HashMap<String, Vec<f64>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
    for rec in r.records() {
        let rec = rec?;
        for (h, v) in headers.iter().zip(rec.iter()) {
            let x = v.parse::<f64>().map_err(|e| CliError::Format(format!("{}: column {h}: {e}", path.display())))?;
            cols.get_mut(h).expect("header present").push(x);
        }
    }
    Ok(cols)
}

fn series(cols: &HashMap<String, Vec<f64>>, x: &str, y: &str, label: &str) -> Option<Series> {
    let (xs, ys) = (cols.get(x)?, cols.get(y)?);
    Some(Series::new(label, xs.iter().copied().zip(ys.iter().copied()).collect()))
}

/// Regenerate the SVG plots of a run directory from its CSV and JSON artifacts.
pub fn replot(dir: &Path) -> Result<Vec<String>, CliError> {
    let mut written = Vec::new();
    let energy_path = dir.join("energy.csv");
    if energy_path.exists() {
        let cols = read_columns(&energy_path)?;
        let k = (0..=ymhd::energy::MAX_ORDER).rev().find(|j| cols.contains_key(&format!("total_k{j}"))).unwrap_or(0);
        let mut plot = LinePlot::new(&format!("Sector energies (k = {k})"), "tau", "energy").scales(Scale::Linear, Scale::Log);
        for name in ["total", "yang_mills", "higgs", "dirac"] {
            if let Some(s) = series(&cols, "tau", &format!("{name}_k{k}"), name) {
                plot = plot.with(s);
            }
        }
        std::fs::write(dir.join("energy.svg"), plot.render())?;
        written.push("energy.svg".to_string());

        let mut decay = LinePlot::new("Physical-frame sup-norms", "s", "sup norm").scales(Scale::Log, Scale::Log);
        for (col, label) in [("phys_sup_phi", "phi"), ("phys_sup_e", "E"), ("phys_sup_psi", "psi")] {
            if let Some(s) = series(&cols, "s", col, label) {
                decay = decay.with(s);
            }
        }
        let decay_path = dir.join("decay.json");
        if decay_path.exists() {
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&decay_path)?)?;
            let svals = cols.get("s").cloned().unwrap_or_default();
            let taus = cols.get("tau").cloned().unwrap_or_default();
            for (key, label) in [("phi", "phi fit"), ("e", "E fit"), ("psi", "psi fit")] {
                let fit = &v["decay"][key];
                let (Some(slope), Some(icpt), Some(start)) =
                    (fit["slope"].as_f64(), fit["intercept"].as_f64(), fit["window_start"].as_f64())
                else {
                    continue;
                };
                let pts: Vec<(f64, f64)> = taus
                    .iter()
                    .zip(&svals)
                    .filter(|(t, _)| **t >= start)
                    .map(|(_, s)| (*s, (icpt + slope * s.ln()).exp()))
                    .collect();
                decay = decay.with(Series::new(format!("{label} {slope:.3}"), pts).dashed());
            }
        }
        std::fs::write(dir.join("decay.svg"), decay.render())?;
        written.push("decay.svg".to_string());
    }
    let constraints_path = dir.join("constraints.csv");
    if constraints_path.exists() {
        let cols = read_columns(&constraints_path)?;
        let mut plot = LinePlot::new("Constraint norms", "tau", "L2 norm").scales(Scale::Linear, Scale::Log);
        for name in ["curvature", "bianchi", "gauss", "dirac", "gauss_drift"] {
            if let Some(s) = series(&cols, "tau", name, name) {
                plot = plot.with(s);
            }
        }
        std::fs::write(dir.join("constraints.svg"), plot.render())?;
        written.push("constraints.svg".to_string());
    }
    if written.is_empty() {
        return Err(CliError::Io(format!("{} contains no plottable artifacts", dir.display())));
    }
    Ok(written)
}
