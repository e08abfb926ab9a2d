use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tribody::calibration::{synthetic_sweep, ElectrostaticSetup};
use tribody::physics::constants::hz;

fn tribody(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tribody"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn col(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

const GEOMETRY: &str = "[geometry]\nd1_nm = 380\nd2_nm = 380\n";

#[test]
fn move_center_curve_is_symmetric_with_zero_force_at_midpoint() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "fc.toml",
        &format!("{GEOMETRY}[force_curve]\nmode = \"move_center\"\ntotal_nm = 760\nrange_nm = {{ start = 300, stop = 460, step = 4 }}\n"),
    );
    let out = dir.path().join("out");
    assert_ok(&tribody("force-curve", &cfg, &out, &[]));
    let (header, rows) = read_csv(&out.join("force_curve.csv"));
    assert_eq!(&header[..4], ["d1_m", "d2_m", "force_N", "gradient_N_per_m"]);
    let (d1, f, g) = (col(&rows, 0), col(&rows, 2), col(&rows, 3));
    let n = rows.len();
    assert_eq!(n, 41);
    let mid = n / 2;
    assert!((d1[mid] - 380e-9).abs() < 1e-15);
    assert!(f[mid].abs() < 1e-12 * f[0].abs());
    for i in 0..n {
        let j = n - 1 - i;
        assert!((g[i] - g[j]).abs() <= 1e-12 * g[i].abs(), "gradient asymmetric at {i}");
        assert!((f[i] + f[j]).abs() <= 1e-12 * f[i].abs().max(1e-30), "force not odd at {i}");
    }
    assert!(f[0] > 0.0, "center pulled toward the nearer cantilever 1");
}

#[test]
fn move_1_leaves_the_far_pair_constant() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "fc.toml",
        "[geometry]\nd1_nm = 200\nd2_nm = 310\n[force_curve]\nmode = \"move_1\"\nrange_nm = { start = 150, stop = 400, step = 10 }\n",
    );
    let out = dir.path().join("out");
    assert_ok(&tribody("force-curve", &cfg, &out, &[]));
    let (_, rows) = read_csv(&out.join("force_curve.csv"));
    let d2 = col(&rows, 1);
    let pair2 = col(&rows, 5);
    assert!(d2.iter().all(|&d| d == d2[0]));
    assert!(pair2.iter().all(|&g| g == pair2[0]));
    let pair1 = col(&rows, 4);
    assert!(pair1.windows(2).all(|w| w[1] < w[0]), "near-pair gradient falls with d1");
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "fc.toml",
        &format!("{GEOMETRY}[force_curve]\nmode = \"move_3\"\nvalues_nm = []\n"),
    );
    let out = dir.path().join("out");
    assert_ok(&tribody("force-curve", &cfg, &out, &[]));
    let text = fs::read_to_string(out.join("force_curve.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["files"][0]["rows"], 0);
}

fn eigen_config(body: &str) -> String {
    format!("[geometry]\nd1_nm = 88\nd2_nm = 90\n[eigen_sweep]\n{body}")
}

#[test]
fn uncoupled_eigenvalues_are_straight_lines() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "e.toml",
        &eigen_config("delta3_range_hz = { start = -30, stop = 30, step = 5 }\ndelta2_hz = 12\ng12_hz = 0\ng23_hz = 0\ndamping_hz = [0, 0, 0]\n"),
    );
    let out = dir.path().join("out");
    assert_ok(&tribody("eigen-sweep", &cfg, &out, &[]));
    let (_, rows) = read_csv(&out.join("eigenvalues.csv"));
    for r in &rows {
        let d3: f64 = r[0].parse().unwrap();
        let mut want = [0.0, -12.0, -d3];
        want.sort_by(f64::total_cmp);
        for k in 0..3 {
            let got: f64 = r[1 + k].parse().unwrap();
            assert!((got - want[k]).abs() < 1e-9, "δ3 = {d3}: {got} vs {}", want[k]);
        }
    }
}

#[test]
fn lossless_anti_crossing_gap_is_sqrt2_g_at_zero_detuning() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "e.toml",
        &eigen_config("delta3_range_hz = { start = -100, stop = 100, step = 0.5 }\ng12_hz = 20\ng23_hz = 20\ndamping_hz = [0, 0, 0]\n"),
    );
    let out = dir.path().join("out");
    assert_ok(&tribody("eigen-sweep", &cfg, &out, &[]));
    let (_, rows) = read_csv(&out.join("eigenvalues.csv"));
    let d3 = col(&rows, 0);
    let gap: Vec<f64> = rows
        .iter()
        .map(|r| r[3].parse::<f64>().unwrap() - r[1].parse::<f64>().unwrap())
        .collect();
    let imin = (0..gap.len()).min_by(|&a, &b| gap[a].total_cmp(&gap[b])).unwrap();
    assert_eq!(d3[imin], 0.0);
    assert!((gap[imin] - 2f64.sqrt() * 20.0).abs() < 1e-9 * 20.0, "{}", gap[imin]);
}

#[test]
fn reversed_sweep_reverses_rows() {
    let dir = TempDir::new().unwrap();
    let fwd = write_config(
        &dir,
        "f.toml",
        &eigen_config("delta3_range_hz = { start = -40, stop = 40, step = 2 }\ng12_hz = 11\ng23_hz = 15\n"),
    );
    let back = write_config(
        &dir,
        "b.toml",
        &eigen_config("delta3_range_hz = { start = 40, stop = -40, step = -2 }\ng12_hz = 11\ng23_hz = 15\n"),
    );
    let (o1, o2) = (dir.path().join("f"), dir.path().join("b"));
    assert_ok(&tribody("eigen-sweep", &fwd, &o1, &[]));
    assert_ok(&tribody("eigen-sweep", &back, &o2, &[]));
    let (_, a) = read_csv(&o1.join("eigenvalues.csv"));
    let (_, mut b) = read_csv(&o2.join("eigenvalues.csv"));
    b.reverse();
    assert_eq!(a, b);
}

#[test]
fn calibration_recovers_synthetic_separation() {
    let dir = TempDir::new().unwrap();
    let setup = ElectrostaticSetup {
        v_ext: 0.0,
        v_c: -0.042,
        v_rms: 0.0,
        radius: 35e-6,
        separation: 143e-9,
    };
    let volts: Vec<f64> = (0..11).map(|i| -0.25 + 0.05 * i as f64).collect();
    let (w0, k) = (hz(5661.0), 0.18);
    let records = synthetic_sweep(&setup, &volts, 1.1e-3, w0, k).unwrap();
    let mut csv = String::from("V_ext_V,delta_omega_rad_s\n");
    for r in &records {
        csv.push_str(&format!("{:e},{:e}\n", r.v_ext, r.delta_omega));
    }
    fs::write(dir.path().join("sweep.csv"), csv).unwrap();
    let cfg = write_config(
        &dir,
        "c.toml",
        "[geometry]\nd1_nm = 100\nd2_nm = 100\n[calibration]\nrecords = \"sweep.csv\"\nomega0_hz = 5661\nk_n_per_m = 0.18\n",
    );
    let out = dir.path().join("out");
    assert_ok(&tribody("calibrate", &cfg, &out, &[]));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("calibration.json")).unwrap()).unwrap();
    let x = report["x_m"].as_f64().unwrap();
    let vc = report["V_c_V"].as_f64().unwrap();
    assert!((x / 143e-9 - 1.0).abs() < 1e-9, "{x}");
    assert!((vc / -0.042 - 1.0).abs() < 1e-9, "{vc}");
    assert_eq!(report["records"], 11);
}

#[test]
fn degenerate_voltage_design_fails_without_output() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("sweep.csv"), "V_ext_V,delta_omega_rad_s\n0.1,-10\n0.1,-10\n0.2,-12\n").unwrap();
    let cfg = write_config(
        &dir,
        "c.toml",
        "[geometry]\nd1_nm = 100\nd2_nm = 100\n[calibration]\nrecords = \"sweep.csv\"\nomega0_hz = 5661\nk_n_per_m = 0.18\n",
    );
    let out = dir.path().join("out");
    let res = tribody("calibrate", &cfg, &out, &[]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("degenerate"));
    assert!(!out.exists());
}

#[test]
fn rejected_config_exits_2_with_key_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("[geometry]\nd1_nm = 100\nd2_nm = 100\ncolour = 3\n", "geometry.colour"),
        ("[geometry]\nd1_nm = 100\nd2_nm = 100\n[noise]\ntemperature_k = -4\n", "noise.temperature_k"),
        ("[geometry]\nd1_nm = 100\nd2_nm = 100\n[modulation]\ndelta_d1_nm = 30\ndelta_d2_nm = 30\n", "modulation.delta_d1_nm"),
        ("[geometry]\nd1_nm = 100\nd2_nm = 100\n", "force_curve"),
    ];
    for (i, (text, key)) in cases.iter().enumerate() {
        let cfg = write_config(&dir, &format!("bad{i}.toml"), text);
        let out = dir.path().join(format!("out{i}"));
        let res = tribody("force-curve", &cfg, &out, &[]);
        assert_eq!(res.status.code(), Some(2), "{text}");
        let err = String::from_utf8_lossy(&res.stderr);
        assert!(err.contains(key), "{err} lacks {key}");
        assert!(!out.exists());
    }
    let res = tribody("force-curve", &dir.path().join("missing.toml"), &dir.path().join("o"), &[]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn material_table_lists_the_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "m.toml",
        "[geometry]\nd1_nm = 100\nd2_nm = 100\n[material]\nmodel = \"ideal\"\ntemperature_k = 0\n[table]\nmin_nm = 60\nmax_nm = 600\npoints = 25\n",
    );
    let out = dir.path().join("out");
    assert_ok(&tribody("material-table", &cfg, &out, &[]));
    let (header, rows) = read_csv(&out.join("casimir_table.csv"));
    assert_eq!(header, ["separation_m", "force_N", "gradient_N_per_m", "curvature_N_per_m2", "temperature_K"]);
    assert_eq!(rows.len(), 25);
    let x = col(&rows, 0);
    let f = col(&rows, 1);
    assert!((x[0] - 60e-9).abs() < 1e-18 && (x[24] - 600e-9).abs() < 1e-18);
    let pfa = tribody::casimir::ideal_pfa_force(35e-6, x[0]);
    assert!((f[0] / pfa - 1.0).abs() < 1e-6, "{} vs {pfa}", f[0]);
}

const SPECTROGRAM: &str = "\
seed = 11
[geometry]
d1_nm = 100
d2_nm = 105
[integrator]
sample_stride = 50
[modulation]
omega_mod1_hz = \"resonant\"
omega_mod2_hz = \"resonant\"
delta_d1_nm = 4
delta_d2_nm = 5.7
[sweep]
parameter = \"omega_mod2\"
offsets_hz = [-10, 0, 10]
[spectrogram]
duration_s = 2
settle_s = 0.25
segment_s = 0.5
band_hz = [4500, 6500]
";

#[test]
fn spectrogram_outputs_are_deterministic_and_seeded() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "s.toml", SPECTROGRAM);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_ok(&tribody("spectrogram", &cfg, &a, &["--threads", "2"]));
    assert_ok(&tribody("spectrogram", &cfg, &b, &["--threads", "1"]));
    assert_ok(&tribody("spectrogram", &cfg, &c, &["--seed", "12"]));
    for f in ["psd_x1.csv", "psd_x2.csv", "psd_x3.csv", "spectrogram.json", "manifest.json", "resolved.json", "config.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert_ne!(fs::read(a.join("psd_x2.csv")).unwrap(), fs::read(c.join("psd_x2.csv")).unwrap());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(c.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 12);
    assert_eq!(manifest["files"].as_array().unwrap().len(), 4);
    for f in manifest["files"].as_array().unwrap() {
        assert!(c.join(f["path"].as_str().unwrap()).exists());
    }
    let (header, rows) = read_csv(&a.join("psd_x2.csv"));
    assert_eq!(header[0], "omega_mod2");
    assert_eq!(rows.len(), 3);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("spectrogram.json")).unwrap()).unwrap();
    assert_eq!(meta["frequency_bins"].as_u64().unwrap() as usize, header.len() - 1);
    let w: Vec<f64> = col(&rows, 0);
    assert!((w[2] - w[1] - hz(10.0)).abs() < 1e-9 && (w[1] - w[0] - hz(10.0)).abs() < 1e-9);
}

#[test]
fn transduction_with_only_unstable_rows_exits_4() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "t.toml",
        "[geometry]\nd1_nm = 100\nd2_nm = 105\n\
         [modulation]\nomega_mod1_hz = \"resonant\"\nomega_mod2_hz = \"resonant\"\ndelta_d1_nm = 6\ndelta_d2_nm = 8.5\nfrequency_shift = \"normal_modes\"\n\
         [drive]\namplitude_n = 1e-13\n\
         [sweep]\nparameter = \"G\"\nvalues_hz = [20, 30]\n",
    );
    let out = dir.path().join("out");
    let res = tribody("transduction", &cfg, &out, &[]);
    assert_eq!(res.status.code(), Some(4), "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = read_csv(&out.join("transduction.csv"));
    assert_eq!(header.last().unwrap(), "status");
    assert!(rows.iter().all(|r| r[7] == "unstable" && r[4].is_empty()));
    assert!(col(&rows, 5).iter().all(|&m| m < 0.0));
}

#[test]
fn transduction_peaks_on_resonance() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "t.toml",
        "[geometry]\nd1_nm = 100\nd2_nm = 105\n\
         [modulation]\nomega_mod1_hz = \"resonant\"\nomega_mod2_hz = \"resonant\"\ndelta_d1_nm = 6\ndelta_d2_nm = 8.5\nfrequency_shift = \"normal_modes\"\n\
         [drive]\namplitude_n = 1e-13\n\
         [sweep]\nparameter = \"omega_mod2\"\noffsets_hz = [-40, 0, 40]\n",
    );
    let out = dir.path().join("out");
    assert_ok(&tribody("transduction", &cfg, &out, &[]));
    let (_, rows) = read_csv(&out.join("transduction.csv"));
    let ratio = col(&rows, 4);
    assert!(ratio[1] > 5.0 * ratio[0] && ratio[1] > 5.0 * ratio[2], "{ratio:?}");
    assert!(rows[0][6].is_empty() && rows[2][6].is_empty());
    let closed: f64 = rows[1][6].parse().unwrap();
    assert!((ratio[1] / closed - 1.0).abs() < 0.1, "{} vs {closed}", ratio[1]);
}
