use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otfs-isac"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn noiseless_sense_has_zero_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["sense", "--snr", "inf", "--trials", "1"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = lines(&dir.path().join("sensing.csv"));
    assert_eq!(
        rows[0],
        "snr_db,t1_delay_bin_mae,t1_doppler_bin_mae,t1_range_rmse_m,t1_speed_rmse_mps,t1_detection_rate,\
         t2_delay_bin_mae,t2_doppler_bin_mae,t2_range_rmse_m,t2_speed_rmse_mps,t2_detection_rate"
    );
    assert_eq!(rows.len(), 2);
    let fields: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(fields[0], "inf");
    for t in 0..2 {
        for v in &fields[1 + 5 * t..5 + 5 * t] {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0);
        }
        assert_eq!(fields[5 + 5 * t].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn config_file_round_trips_through_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let out = run(
        &[
            "chanest",
            "--scenario",
            "S2",
            "--trials",
            "3",
            "--snr=-10:-6:2",
            "--frames",
            "pilot_only",
        ],
        &first,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = fs::read_to_string(first.join("manifest.txt")).unwrap();
    assert!(manifest.contains("# command: chanest"));
    assert!(manifest.contains("scenario = \"S2\""));

    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, &manifest).unwrap();
    let second = dir.path().join("b");
    let out = run(&["chanest", "--config", cfg.to_str().unwrap()], &second);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let a = fs::read(first.join("chanest.csv")).unwrap();
    assert_eq!(a, fs::read(second.join("chanest.csv")).unwrap());
    let rows = lines(&first.join("chanest.csv"));
    assert_eq!(rows.len(), 1 + 3 * 2);
    assert!(rows[1].starts_with("-10.00,proposed,pilot_only,"));
    assert!(rows[2].starts_with("-10.00,single_pilot,pilot_only,"));
}

#[test]
fn config_errors_are_readable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "trials = 0\n[physical]\nfc_hz = 60e9\ndelta_f_hz = 480e3\nm = 64\nn = 16\n[pilot]\nsize = [8, 4]\n\
         [[targets]]\npower_db = 0.0\ndoppler_bins = [1, 2]\ndelay_bins = { s1 = [1, 2], s2 = [1, 9] }\n",
    )
    .unwrap();
    let out = run(&["sense", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("trials must be at least 1"), "{err}");

    let out = run(&["sense", "--preset", "nope"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
}

#[test]
fn rdm_export_writes_images() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["rdm", "--snr", "inf", "--mode", "bistatic"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let pgm = fs::read(dir.path().join("rdm.pgm")).unwrap();
    let header = b"P5\n32 256\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    assert_eq!(pgm.len(), header.len() + 256 * 32);
    assert_eq!(lines(&dir.path().join("rdm.csv")).len(), 1 + 256 * 32);

    let targets = lines(&dir.path().join("targets.csv"));
    let bins = |kind: &str| {
        let mut v: Vec<(String, String)> = targets
            .iter()
            .filter(|r| r.starts_with(kind))
            .map(|r| {
                let f: Vec<&str> = r.split(',').collect();
                (f[2].to_string(), f[3].to_string())
            })
            .collect();
        v.sort();
        v
    };
    assert_eq!(bins("truth"), bins("detection"));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bench", "--sizes", "4x4,8x8", "--reps", "1"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = lines(&dir.path().join("bench.csv"));
    assert_eq!(rows[0], "M,N,MN,t_naive_s,t_fft_s,ratio");
    assert!(rows[1].starts_with("4,4,16,"));
    assert!(rows[2].starts_with("8,8,64,"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fitted exponent"));
}
