//! CLI acceptance: determinism of every command (criterion 10), the
//! pattern→bfp round trip, output formats and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn antenna(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_antenna"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

#[test]
fn criterion_10_determinism_of_every_command() {
    let work = tempfile::tempdir().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["pattern", "--resolution_mrad", "1"],
        vec![
            "map", "--t_min", "330", "--t_max", "370", "--t_steps", "3", "--h_min", "180",
            "--h_max", "220", "--h_steps", "3",
        ],
        vec![
            "optimize", "--t_min", "340", "--t_max", "360", "--h_min", "190", "--h_max", "210",
            "--tolerance", "5",
        ],
        vec!["bfp", "--resolution_mrad", "1", "--image_pixels", "64"],
        vec!["photo-sim", "--duration", "0.0005", "--seed", "42"],
        vec![
            "budget", "--s_de", "4.9e7", "--eta_det", "0.518", "--n2_on", "0.82", "--k21",
            "1.26e8", "--off_fraction", "0.05",
        ],
    ];
    let mut pass = true;
    for (i, base) in commands.iter().enumerate() {
        let mut manifests = Vec::new();
        for run in 0..2 {
            let out = work.path().join(format!("cmd{i}_run{run}"));
            let out_str = out.to_str().unwrap().to_string();
            let mut args: Vec<&str> = base.clone();
            args.push("--out_dir");
            args.push(&out_str);
            let result = antenna(&args, work.path());
            assert!(
                result.status.success(),
                "{base:?} failed: {}",
                String::from_utf8_lossy(&result.stderr)
            );
            manifests.push(read(&out, "manifest.txt"));
        }
        pass &= manifests[0] == manifests[1];
        assert_eq!(
            manifests[0], manifests[1],
            "manifests differ for {base:?}"
        );
    }
    // photo-fit consumes a stream produced by photo-sim
    let sim_dir = work.path().join("fit_input");
    let sim_dir_str = sim_dir.to_str().unwrap().to_string();
    let r = antenna(
        &["photo-sim", "--duration", "0.002", "--seed", "9", "--out_dir", &sim_dir_str],
        work.path(),
    );
    assert!(r.status.success());
    let stream = sim_dir.join("photons.csv");
    let stream_str = stream.to_str().unwrap().to_string();
    let mut manifests = Vec::new();
    for run in 0..2 {
        let out = work.path().join(format!("fit_run{run}"));
        let out_str = out.to_str().unwrap().to_string();
        let r = antenna(
            &[
                "photo-fit", "--stream", &stream_str, "--bin_width", "4e-10", "--max_delay",
                "4e-8", "--irf_sigma", "0", "--out_dir", &out_str,
            ],
            work.path(),
        );
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        manifests.push(read(&out, "manifest.txt"));
    }
    pass &= manifests[0] == manifests[1];
    assert_eq!(manifests[0], manifests[1], "photo-fit manifests differ");
    println!(
        "acceptance criterion 10 (CLI determinism): {} — identical manifests for all 7 commands",
        if pass { "PASS" } else { "FAIL" }
    );
}

#[test]
fn parallel_map_matches_serial() {
    let work = tempfile::tempdir().unwrap();
    let args = [
        "map", "--t_min", "330", "--t_max", "370", "--t_steps", "4", "--h_min", "180", "--h_max",
        "220", "--h_steps", "4",
    ];
    let mut manifests = Vec::new();
    for threads in ["1", "4"] {
        let out = work.path().join(format!("threads_{threads}"));
        let out_str = out.to_str().unwrap().to_string();
        let mut argv: Vec<&str> = args.to_vec();
        argv.push("--out_dir");
        argv.push(&out_str);
        let r = Command::new(env!("CARGO_BIN_EXE_antenna"))
            .args(&argv)
            .env("ANTENNA_THREADS", threads)
            .current_dir(work.path())
            .output()
            .unwrap();
        assert!(r.status.success());
        manifests.push(read(&out, "manifest.txt"));
    }
    assert_eq!(manifests[0], manifests[1], "thread count changed the results");
}

#[test]
fn pattern_csv_feeds_bfp_identically() {
    let work = tempfile::tempdir().unwrap();
    let pat = work.path().join("pat");
    let pat_str = pat.to_str().unwrap().to_string();
    let r = antenna(
        &["pattern", "--resolution_mrad", "0.25", "--out_dir", &pat_str],
        work.path(),
    );
    assert!(r.status.success());

    let direct = work.path().join("direct");
    let direct_str = direct.to_str().unwrap().to_string();
    let r = antenna(
        &["bfp", "--resolution_mrad", "0.25", "--fwhm_deg", "0", "--out_dir", &direct_str],
        work.path(),
    );
    assert!(r.status.success());

    let via_csv = work.path().join("via_csv");
    let via_str = via_csv.to_str().unwrap().to_string();
    let csv_in = pat.join("pattern.csv");
    let csv_in_str = csv_in.to_str().unwrap().to_string();
    let r = antenna(
        &["bfp", "--pattern_csv", &csv_in_str, "--fwhm_deg", "0", "--out_dir", &via_str],
        work.path(),
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));

    let parse_profile = |dir: &Path| -> Vec<(f64, f64)> {
        String::from_utf8(read(dir, "bfp_profile.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let mut it = l.split(',');
                (
                    it.next().unwrap().parse().unwrap(),
                    it.next().unwrap().parse().unwrap(),
                )
            })
            .collect()
    };
    let a = parse_profile(&direct);
    let b = parse_profile(&via_csv);
    assert_eq!(a.len(), b.len());
    for ((ra, ia), (rb, ib)) in a.iter().zip(&b) {
        assert!((ra - rb).abs() <= 1e-9 * ra.abs().max(1.0));
        assert!((ia - ib).abs() <= 1e-9 * ia.abs().max(1.0));
    }
}

#[test]
fn pattern_summary_reports_collection_efficiency() {
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("out");
    let out_str = out.to_str().unwrap().to_string();
    let r = antenna(
        &["pattern", "--resolution_mrad", "0.5", "--out_dir", &out_str],
        work.path(),
    );
    assert!(r.status.success());
    let stdout = String::from_utf8(r.stdout).unwrap();
    let eta: f64 = stdout
        .split("eta(NA=1.65) = ")
        .nth(1)
        .and_then(|s| s.split(',').next())
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    // exact-model value for the nominal defaults
    assert!((eta - 0.9491).abs() < 2e-3, "summary eta {eta}");
}

#[test]
fn budget_prints_reference_chain() {
    let work = tempfile::tempdir().unwrap();
    let r = antenna(
        &[
            "budget", "--s_de", "4.9e7", "--eta_det", "0.518", "--n2_on", "0.82", "--k21",
            "1.26e8", "--off_fraction", "0.05",
        ],
        work.path(),
    );
    assert!(r.status.success());
    let stdout = String::from_utf8(r.stdout).unwrap();
    let eta: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("eta = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((eta - 0.96).abs() <= 0.01, "eta {eta}");
}

#[test]
fn pgm_has_16bit_header_and_payload() {
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("out");
    let out_str = out.to_str().unwrap().to_string();
    let r = antenna(
        &[
            "bfp", "--resolution_mrad", "1", "--image_pixels", "512", "--out_dir", &out_str,
        ],
        work.path(),
    );
    assert!(r.status.success());
    let bytes = read(&out, "bfp_image.pgm");
    let header = b"P5\n512 512\n65535\n";
    assert!(bytes.starts_with(header));
    assert_eq!(bytes.len(), header.len() + 512 * 512 * 2);
}

#[test]
fn exit_codes_follow_the_contract() {
    let work = tempfile::tempdir().unwrap();
    // validation: NA exceeding the immersion index
    let r = antenna(&["pattern", "--na", "1.80"], work.path());
    assert_eq!(r.status.code(), Some(3));
    // parse: unknown key
    let r = antenna(&["pattern", "--polarisation", "p"], work.path());
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("polarisation"));
    // parse: unknown key in a config file
    let cfg = work.path().join("bad.cfg");
    std::fs::write(&cfg, "t = 350\npolarisation = p\n").unwrap();
    let cfg_str = cfg.to_str().unwrap().to_string();
    let r = antenna(&["pattern", "--config", &cfg_str], work.path());
    assert_eq!(r.status.code(), Some(2));
    // module error: fit on a valid but too-small stream
    let tiny = work.path().join("tiny.csv");
    let mut text = String::from("timestamp_s\n");
    for i in 0..50 {
        text.push_str(&format!("{}\n", i as f64 * 1e-6));
    }
    std::fs::write(&tiny, text).unwrap();
    let tiny_str = tiny.to_str().unwrap().to_string();
    let r = antenna(
        &["photo-fit", "--stream", &tiny_str, "--bin_width", "1e-7", "--max_delay", "1e-5"],
        work.path(),
    );
    assert_eq!(r.status.code(), Some(4));
    // i/o error: unreadable config path
    let r = antenna(&["pattern", "--config", "/nonexistent/x.cfg"], work.path());
    assert_eq!(r.status.code(), Some(5));
    // config file + override precedence
    let cfg = work.path().join("good.cfg");
    std::fs::write(&cfg, "# nominal defaults\nt = 350\nh = 200\nna = 1.65\n").unwrap();
    let cfg_str = cfg.to_str().unwrap().to_string();
    let out = work.path().join("out");
    let out_str = out.to_str().unwrap().to_string();
    let r = antenna(
        &[
            "pattern", "--config", &cfg_str, "--resolution_mrad", "1", "--na", "1.0",
            "--out_dir", &out_str,
        ],
        work.path(),
    );
    assert!(r.status.success());
    let stdout = String::from_utf8(r.stdout).unwrap();
    assert!(stdout.contains("eta(NA=1) ="), "{stdout}");
}
