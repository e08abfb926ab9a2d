//! Subcommand implementations. Each returns its data files in memory so that
//! nothing is written unless the whole command succeeds.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use tribody::calibration::{calibrate_separation, read_records};
use tribody::casimir::CasimirTable;
use tribody::dynamics::{run_gain_experiment, ExperimentOptions};
use tribody::physics::constants::hz;
use tribody::reduced::{eigenvalues, stability_check, transduction_ratio, ReducedModel};
use tribody::spectral::{sweep_seed, sweep_spectrogram, SpectrogramOptions, SweepParameter};
use tribody::system::{SystemConfig, TablePair};

use crate::config::{ForceCurveMode, LoadedConfig, SweepTarget};
use crate::error::{CliError, CliResult};

/// One data file produced by a command.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub path: String,
    pub kind: &'static str,
    pub columns: Vec<String>,
    pub rows: usize,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub command: &'static str,
    pub artifacts: Vec<Artifact>,
    /// Fully resolved configuration, written as the config snapshot.
    pub resolved: Value,
    /// Small machine-readable result summary for the manifest.
    pub summary: Value,
    /// Every run in the command was unstable.
    pub instability_only: bool,
}

fn to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn csv_artifact(path: &str, kind: &'static str, columns: &[&str], rows: &[Vec<String>]) -> CliResult<Artifact> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Core(e.into());
    w.write_record(columns).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    Ok(Artifact {
        path: path.to_string(),
        kind,
        columns: columns.iter().map(|s| s.to_string()).collect(),
        rows: rows.len(),
        bytes,
    })
}

fn resolved_json<T: Serialize>(cfg: &SystemConfig, extra: T) -> CliResult<Value> {
    Ok(json!({
        "system": serde_json::to_value(cfg).map_err(|e| CliError::Core(e.into()))?,
        "command": serde_json::to_value(extra).map_err(|e| CliError::Core(e.into()))?,
    }))
}

pub const FORCE_CURVE_COLUMNS: [&str; 6] = [
    "d1_m",
    "d2_m",
    "force_N",
    "gradient_N_per_m",
    "pair1_gradient_N_per_m",
    "pair2_gradient_N_per_m",
];

/// Net force on cantilever 2 (positive toward cantilever 1) and its gradient
/// with respect to the center position along a gap sweep. The pair columns
/// split the gradient into the contributions of the two sphere–plate gaps.
pub fn force_curve(loaded: &LoadedConfig) -> CliResult<CommandOutput> {
    let file = &loaded.file;
    let sec = file.section(&file.force_curve, "force_curve", "force-curve")?;
    let values = sec.values(file)?;
    let cfg = loaded.base_config()?;
    let (lo, hi) = (file.table.min_nm, file.table.max_nm);
    let total = sec.total_nm.unwrap_or(file.geometry.d1_nm + file.geometry.d2_nm);
    let gaps: Vec<(f64, f64)> = values
        .iter()
        .map(|&v| match sec.mode {
            ForceCurveMode::MoveCenter => (v, total - v),
            ForceCurveMode::Move1 => (v, file.geometry.d2_nm),
            ForceCurveMode::Move3 => (file.geometry.d1_nm, v),
        })
        .collect();
    for (i, &(d1, d2)) in gaps.iter().enumerate() {
        if d1 < lo || d1 > hi || d2 < lo || d2 > hi {
            return Err(CliError::config(
                format!("force_curve.values_nm[{i}]"),
                format!("gaps ({d1}, {d2}) nm leave the force table [{lo}, {hi}] nm"),
            ));
        }
    }
    let tables = TablePair::build(&cfg)?;
    let mut rows = Vec::with_capacity(gaps.len());
    for &(d1, d2) in &gaps {
        let (d1, d2) = (d1 * 1e-9, d2 * 1e-9);
        let a = tables.first.sample(d1)?;
        let b = tables.second.sample(d2)?;
        rows.push(vec![
            num(d1),
            num(d2),
            num(a.force - b.force),
            num(-a.gradient - b.gradient),
            num(-a.gradient),
            num(-b.gradient),
        ]);
    }
    let artifact = csv_artifact("force_curve.csv", "force_curve", &FORCE_CURVE_COLUMNS, &rows)?;
    Ok(CommandOutput {
        command: "force-curve",
        artifacts: vec![artifact],
        resolved: resolved_json(&cfg, sec)?,
        summary: json!({ "mode": sec.mode, "points": rows.len(), "total_nm": total }),
        instability_only: false,
    })
}

pub const EIGEN_COLUMNS: [&str; 8] = [
    "delta3_hz",
    "lambda1_re_hz",
    "lambda2_re_hz",
    "lambda3_re_hz",
    "lambda1_im_hz",
    "lambda2_im_hz",
    "lambda3_im_hz",
    "stability_margin_hz",
];

/// Eigenvalues of the three-mode Hamiltonian along a δ₃ sweep, in Hz and
/// sorted by real part.
pub fn eigen_sweep(loaded: &LoadedConfig) -> CliResult<CommandOutput> {
    let file = &loaded.file;
    let sec = file.section(&file.eigen_sweep, "eigen_sweep", "eigen-sweep")?;
    let deltas = sec.delta3_values()?;
    let mut cfg = loaded.base_config()?;
    let (g12, g23) = match (sec.g12_hz, sec.g23_hz) {
        (Some(a), Some(b)) => (hz(a), hz(b)),
        _ => {
            let tables = TablePair::build(&cfg)?;
            cfg = file.resolve(cfg, &tables)?;
            let m = cfg.reduced_model(&tables)?;
            (m.g12, m.g23)
        }
    };
    let gammas = match sec.damping_hz {
        Some(d) => d.map(hz),
        None => cfg.cantilevers_with_gain()?.map(|c| c.gamma),
    };
    let rows: Vec<Vec<String>> = deltas
        .iter()
        .map(|&d3| {
            let model = ReducedModel::from_parts(gammas, g12, g23, hz(sec.delta2_hz), hz(d3));
            let l = eigenvalues(&model);
            let margin = stability_check(&model).margin;
            let mut r = vec![num(d3)];
            r.extend(l.iter().map(|z| num(to_hz(z.re))));
            r.extend(l.iter().map(|z| num(to_hz(z.im))));
            r.push(num(to_hz(margin)));
            r
        })
        .collect();
    let artifact = csv_artifact("eigenvalues.csv", "eigen_sweep", &EIGEN_COLUMNS, &rows)?;
    Ok(CommandOutput {
        command: "eigen-sweep",
        artifacts: vec![artifact],
        resolved: resolved_json(&cfg, sec)?,
        summary: json!({
            "g12_hz": to_hz(g12),
            "g23_hz": to_hz(g23),
            "delta2_hz": sec.delta2_hz,
            "damping_hz": gammas.map(to_hz),
            "points": rows.len(),
        }),
        instability_only: false,
    })
}

/// Thermal PSD maps of the three cantilevers over a parameter sweep.
pub fn spectrogram(loaded: &LoadedConfig) -> CliResult<CommandOutput> {
    let file = &loaded.file;
    let plan = file.section(&file.sweep, "sweep", "spectrogram")?.plan()?;
    let SweepTarget::Parameter(parameter) = plan.target else {
        return Err(CliError::config("sweep.parameter", "spectrograms cannot sweep the drive amplitude"));
    };
    if plan.delta_d2_ratio.is_some() {
        return Err(CliError::config("sweep.delta_d2_ratio", "not supported for spectrograms"));
    }
    let sec = file.spectrogram.clone().unwrap_or_default();
    let base = loaded.base_config()?;
    let tables = TablePair::build(&base)?;
    let cfg = file.resolve(base, &tables)?;
    let values = plan.absolute(&cfg);
    for (i, &v) in values.iter().enumerate() {
        parameter
            .apply(&cfg, v)
            .validate()
            .map_err(|e| CliError::at_key(&format!("sweep[{i}]"), e))?;
    }
    let options = SpectrogramOptions {
        duration: sec.duration_s,
        settle: sec.settle_s,
        segment_seconds: sec.segment_s,
        overlap: sec.overlap,
        band: sec.band_hz.map(|[a, b]| (a, b)),
    };
    let map = sweep_spectrogram(&cfg, &tables, parameter, &values, &options)?;
    let mut columns = vec![parameter.name().to_string()];
    columns.extend(map.frequencies.iter().map(|f| format!("{f}")));
    let mut artifacts = Vec::new();
    for k in 1..=3 {
        let mut bytes = Vec::new();
        map.write_csv(k, &mut bytes)?;
        artifacts.push(Artifact {
            path: format!("psd_x{k}.csv"),
            kind: "psd_matrix",
            columns: columns.clone(),
            rows: map.rows.len(),
            bytes,
        });
    }
    let mut meta = Vec::new();
    map.write_json(&mut meta)?;
    artifacts.push(Artifact {
        path: "spectrogram.json".into(),
        kind: "psd_axes",
        columns: Vec::new(),
        rows: 0,
        bytes: meta,
    });
    let model = cfg.reduced_model(&tables).ok();
    Ok(CommandOutput {
        command: "spectrogram",
        artifacts,
        resolved: resolved_json(&cfg, json!({ "sweep": file.sweep, "spectrogram": sec, "values": values }))?,
        summary: json!({
            "parameter": parameter.name(),
            "unit": parameter.unit(),
            "rows": map.rows.len(),
            "frequency_step_hz": map.resolution(),
            "mode_frequencies_hz": model.map(|m| m.omegas.map(to_hz)),
        }),
        instability_only: false,
    })
}

pub const TRANSDUCTION_COLUMNS: [&str; 8] = [
    "sweep_value",
    "A1_m",
    "A2_m",
    "A3_m",
    "ratio",
    "stability_margin_rad_s",
    "closed_form_ratio",
    "status",
];

#[derive(Debug, Clone, Serialize)]
struct TransductionRow {
    value: f64,
    amplitudes: Option<[f64; 3]>,
    ratio: Option<f64>,
    margin: f64,
    closed_form: Option<f64>,
    status: &'static str,
}

/// Configuration of one transduction row. Modulation-amplitude rows are
/// re-resolved because the resonant frequencies depend on the amplitudes.
fn row_config(loaded: &LoadedConfig, base: &SystemConfig, resolved: &SystemConfig, target: SweepTarget, value: f64, ratio: Option<f64>, tables: &TablePair) -> CliResult<SystemConfig> {
    let file = &loaded.file;
    let cfg = match target {
        SweepTarget::Parameter(p @ (SweepParameter::DeltaD1 | SweepParameter::DeltaD2)) => {
            let mut c = p.apply(base, value);
            if let Some(r) = ratio {
                c.modulation.delta_d2 = r * value;
            }
            c.validate().map_err(|e| CliError::at_key("sweep", e))?;
            file.resolve(c, tables)?
        }
        SweepTarget::Parameter(p) => p.apply(resolved, value),
        SweepTarget::DriveAmplitude => {
            let mut c = resolved.clone();
            if let Some(d) = c.drive.as_mut() {
                d.amplitude = value;
            }
            c
        }
    };
    cfg.validate().map_err(|e| CliError::at_key("sweep", e))?;
    Ok(cfg)
}

/// Driven steady-state amplitudes and A₃/A₁ for each sweep value, with the
/// closed-form on-resonance ratio where the row is resonant. Unstable rows
/// are flagged rather than treated as failures.
pub fn transduction(loaded: &LoadedConfig) -> CliResult<CommandOutput> {
    let file = &loaded.file;
    let plan = file.section(&file.sweep, "sweep", "transduction")?.plan()?;
    file.section(&file.drive, "drive", "transduction")?;
    let base = loaded.base_config()?;
    let tables = TablePair::build(&base)?;
    let resolved = file.resolve(base.clone(), &tables)?;
    let values = plan.absolute(&resolved);
    let options = ExperimentOptions {
        settle: file.integrator.settle_s,
        window: file.integrator.window_s,
        ..Default::default()
    };
    let rows: Vec<TransductionRow> = values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| -> CliResult<TransductionRow> {
            let mut cfg = row_config(loaded, &base, &resolved, plan.target, value, plan.delta_d2_ratio, &tables)?;
            if cfg.noise.enabled {
                cfg.seed = sweep_seed(resolved.seed, i);
            }
            let model = cfg.reduced_model(&tables)?;
            let margin = stability_check(&model).margin;
            let closed_form = if model.is_resonant() {
                transduction_ratio(&model, &cfg.cantilevers_with_gain()?).ok()
            } else {
                None
            };
            let row = match run_gain_experiment(&cfg, &tables, &options) {
                Ok(out) => TransductionRow {
                    value,
                    amplitudes: Some(out.amplitudes()),
                    ratio: Some(out.ratio),
                    margin,
                    closed_form,
                    status: "ok",
                },
                Err(e) if e.is_instability() => TransductionRow {
                    value,
                    amplitudes: None,
                    ratio: None,
                    margin,
                    closed_form,
                    status: "unstable",
                },
                Err(e) => return Err(e.at_sweep_value(value).into()),
            };
            Ok(row)
        })
        .collect::<CliResult<_>>()?;
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let a = r.amplitudes.map(|a| a.map(Some)).unwrap_or([None; 3]);
            vec![
                num(r.value),
                opt(a[0]),
                opt(a[1]),
                opt(a[2]),
                opt(r.ratio),
                num(r.margin),
                opt(r.closed_form),
                r.status.to_string(),
            ]
        })
        .collect();
    let artifact = csv_artifact("transduction.csv", "transduction", &TRANSDUCTION_COLUMNS, &table)?;
    let unstable = rows.iter().filter(|r| r.status == "unstable").count();
    Ok(CommandOutput {
        command: "transduction",
        artifacts: vec![artifact],
        resolved: resolved_json(&resolved, json!({ "sweep": file.sweep, "values": values }))?,
        summary: json!({
            "parameter": plan.target.name(),
            "unit": plan.target.unit(),
            "rows": rows.len(),
            "unstable_rows": unstable,
        }),
        instability_only: !rows.is_empty() && unstable == rows.len(),
    })
}

/// Separation, contact potential and Casimir gradient from a voltage sweep.
pub fn calibrate(loaded: &LoadedConfig) -> CliResult<CommandOutput> {
    let file = &loaded.file;
    let sec = file.section(&file.calibration, "calibration", "calibrate")?;
    let path = loaded.dir.join(&sec.records);
    let reader = std::fs::File::open(&path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let records = read_records(reader, hz(sec.omega0_hz), sec.k_n_per_m)?;
    let radius = sec.radius_um.unwrap_or(file.geometry.r1_um) * 1e-6;
    let fit = calibrate_separation(&records, radius)?;
    let report = json!({
        "records": records.len(),
        "radius_m": radius,
        "omega0_rad_s": hz(sec.omega0_hz),
        "k_N_per_m": sec.k_n_per_m,
        "x_m": fit.separation,
        "V_c_V": fit.contact_potential,
        "gradient_N_per_m": fit.casimir_gradient,
        "residual_rad_s": fit.residual,
    });
    let bytes = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Core(e.into()))?;
    Ok(CommandOutput {
        command: "calibrate",
        artifacts: vec![Artifact {
            path: "calibration.json".into(),
            kind: "calibration",
            columns: Vec::new(),
            rows: 0,
            bytes,
        }],
        resolved: json!({ "calibration": sec, "records_path": path }),
        summary: report,
        instability_only: false,
    })
}

pub const TABLE_COLUMNS: [&str; 5] = [
    "separation_m",
    "force_N",
    "gradient_N_per_m",
    "curvature_N_per_m2",
    "temperature_K",
];

/// Sphere–plate force table for the configured material, temperature and r₁.
pub fn material_table(loaded: &LoadedConfig) -> CliResult<CommandOutput> {
    let cfg = loaded.base_config()?;
    let table = CasimirTable::build(&cfg.material, cfg.temperature, cfg.geometry.r1, cfg.table_grid)?;
    let mut bytes = Vec::new();
    table.write_csv(&mut bytes)?;
    Ok(CommandOutput {
        command: "material-table",
        artifacts: vec![Artifact {
            path: "casimir_table.csv".into(),
            kind: "force_table",
            columns: TABLE_COLUMNS.iter().map(|s| s.to_string()).collect(),
            rows: table.len(),
            bytes,
        }],
        resolved: resolved_json(&cfg, Value::Null)?,
        summary: json!({
            "radius_m": cfg.geometry.r1,
            "temperature_K": cfg.temperature,
            "points": table.len(),
        }),
        instability_only: false,
    })
}
