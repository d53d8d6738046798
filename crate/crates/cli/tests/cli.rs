mod common;

use std::path::Path;

use common::*;
use oocsvd::store::read_dense_record_file;
use oocsvd_cli::profile::{parse_profile, stage_seconds};

fn rank10_fixture(dir: &Path) -> (std::path::PathBuf, Vec<f64>) {
    // power steps without re-orthogonalization resolve sigma_r to about
    // eps * (sigma_1 / sigma_r)^(2q+1), so the spectrum stays within 2x
    let sigma: Vec<f64> = (0..10).map(|k| 10.0 - 0.5 * k as f64).collect();
    let a = with_spectrum(120, 90, &sigma, 1);
    let path = dir.join("in.mtx");
    write_mtx(&path, &a);
    (path, jacobi_singular_values(&a))
}

fn code(out: &std::process::Output) -> Option<i32> {
    out.status.code()
}

#[test]
fn rsvd_matches_dense_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let (input, oracle) = rank10_fixture(dir.path());
    let out = dir.path().join("out");
    run_ok(&[&"rsvd", &"--rank", &"10", &"--power", &"auto", &"--memory-per-matrix", &"1M", &"--seed", &"7", &input, &out]);
    let s = read_singular_values(&out);
    assert_eq!(s.len(), 10);
    for (got, want) in s.iter().zip(&oracle) {
        assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
    }
    let (rows, cols, u) = read_dense_record_file(&out.join("U.blk")).unwrap();
    assert_eq!((rows, cols), (120, 10));
    let (rows, cols, _) = read_dense_record_file(&out.join("V.blk")).unwrap();
    assert_eq!((rows, cols), (90, 10));
    let (rows, cols, sb) = read_dense_record_file(&out.join("S.blk")).unwrap();
    assert_eq!((rows, cols), (10, 1));
    assert_eq!(sb, s);
    // columns of U are orthonormal
    for a in 0..10 {
        for b in 0..10 {
            let d: f64 = (0..120).map(|i| u[i * 10 + a] * u[i * 10 + b]).sum();
            assert!((d - f64::from(a == b)).abs() < 1e-10);
        }
    }
}

#[test]
fn repeated_runs_are_bitwise_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (input, _) = rank10_fixture(dir.path());
    let mut outputs = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let out = dir.path().join(name);
        run_ok(&[
            &"rsvd", &"--rank", &"10", &"--power", &"auto", &"--memory-per-matrix", &"1M", &"--seed", &"7",
            &"--threads", &threads, &input, &out,
        ]);
        outputs.push(output_files(&out).into_iter().map(|(_, b)| b).collect::<Vec<_>>());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn usage_parse_budget_and_io_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (input, _) = rank10_fixture(dir.path());
    let out = dir.path().join("out");
    assert_eq!(code(&oocsvd(&[&"rsvd", &"--rank", &"0", &input, &out])), Some(2));
    assert_eq!(code(&oocsvd(&[&"rsvd", &"--rank", &"91", &input, &out])), Some(2));

    let bad = dir.path().join("bad.mtx");
    std::fs::write(&bad, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 x 3.0\n").unwrap();
    let res = oocsvd(&[&"rsvd", &"--rank", &"1", &bad, &out]);
    assert_eq!(code(&res), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 4"), "{}", String::from_utf8_lossy(&res.stderr));

    let missing = dir.path().join("nope.mtx");
    assert_eq!(code(&oocsvd(&[&"rsvd", &"--rank", &"1", &missing, &out])), Some(5));

    // a single row of the sketch does not fit in 16 bytes
    let res = oocsvd(&[&"rsvd", &"--rank", &"10", &"--memory-per-matrix", &"16", &input, &out]);
    assert_eq!(code(&res), Some(4), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn profile_has_the_eight_stages_and_accounts_for_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let sigma: Vec<f64> = (1..=40).map(|k| 1.0 / k as f64).collect();
    let input = dir.path().join("in.mtx");
    write_mtx(&input, &with_spectrum(400, 300, &sigma, 2));
    let out = dir.path().join("out");
    let profile = dir.path().join("run.tsv");
    run_ok(&[&"rsvd", &"--rank", &"20", &"--power", &"2", &"--memory-per-matrix", &"32K", &"--profile-out", &profile, &input, &out]);
    let text = std::fs::read_to_string(&profile).unwrap();
    let stages = stage_seconds(&text).expect("all eight stage keys");
    let names: Vec<_> = stages.iter().map(|(k, _)| k.as_str()).collect();
    assert_eq!(
        names,
        ["Text Parsing", "Preparation of O", "O*A^T", "Orthogonalization", "A^T*Q_r", "SVD0 Preparation", "SVD0", "Postprocessing"]
    );
    let sum: f64 = stages.iter().map(|(_, s)| s).sum();
    let pairs = parse_profile(&text);
    let get = |k: &str| pairs.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone()).unwrap();
    let total: f64 = get("total_seconds").parse().unwrap();
    assert!((sum - total).abs() <= 0.05 * total, "stages {sum} vs total {total}");
    assert!(get("peak_resident_bytes").parse::<u64>().unwrap() > 0);
    assert_eq!(get("power_iterations"), "2");
    assert_eq!(get("steps_executed"), "14");
    assert!(get("blocks.U").parse::<usize>().unwrap() > 1);
}

#[test]
fn svd_command_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let a = with_spectrum(30, 20, &[9.0, 7.0, 4.0, 2.0, 1.0, 0.5, 0.25, 0.125], 3);
    let oracle = jacobi_singular_values(&a);
    let input = dir.path().join("a.mtx");
    write_mtx(&input, &a);
    let out = dir.path().join("out");
    run_ok(&[&"svd", &input, &out]);
    let s = read_singular_values(&out);
    assert_eq!(s.len(), 20);
    for (got, want) in s.iter().zip(&oracle).take(8) {
        assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
    }
    assert!(s[8..].iter().all(|x| x.abs() <= 1e-12));
}

#[test]
fn full_rank_image_round_trips_within_one_grey_level() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h) = (48, 40);
    let px = test_image(w, h, 4);
    let input = dir.path().join("in.pgm");
    write_pgm(&input, w, h, &px);
    let output = dir.path().join("out.pgm");
    run_ok(&[&"compress-image", &"--rank", &"40", &"--power", &"0", &input, &output]);
    let (ow, oh, got) = read_pgm(&output);
    assert_eq!((ow, oh), (w, h));
    let worst = px.iter().zip(&got).map(|(a, b)| a.abs_diff(*b)).max().unwrap();
    assert!(worst <= 1, "max difference {worst}");
}

fn image_error(original: &[u8], path: &Path) -> f64 {
    let (_, _, got) = read_pgm(path);
    let num: f64 = original.iter().zip(&got).map(|(a, b)| (*a as f64 - *b as f64).powi(2)).sum();
    let den: f64 = original.iter().map(|a| (*a as f64).powi(2)).sum();
    (num / den).sqrt()
}

#[test]
fn power_iteration_improves_image_approximation() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h) = (512, 512);
    let px = test_image(w, h, 5);
    let input = dir.path().join("in.pgm");
    write_pgm(&input, w, h, &px);
    let (auto, plain) = (dir.path().join("auto.pgm"), dir.path().join("plain.pgm"));
    run_ok(&[&"compress-image", &"--rank", &"50", &"--power", &"auto", &input, &auto]);
    run_ok(&[&"compress-image", &"--rank", &"50", &"--power", &"0", &input, &plain]);
    let (e_auto, e_plain) = (image_error(&px, &auto), image_error(&px, &plain));
    assert!(e_auto < e_plain, "auto {e_auto} vs q=0 {e_plain}");
}

#[test]
fn half_precision_image_stays_within_two_grey_levels() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h) = (512, 512);
    let px = test_image(w, h, 6);
    let input = dir.path().join("in.pgm");
    write_pgm(&input, w, h, &px);
    let (double, half) = (dir.path().join("double.pgm"), dir.path().join("half.pgm"));
    // power products in single precision drop directions below
    // 2^-24 * (sigma_1 / sigma_r)^(2q+1), so the comparison runs at q = 0
    run_ok(&[&"compress-image", &"--rank", &"50", &"--power", &"0", &"--seed", &"3", &input, &double]);
    run_ok(&[
        &"compress-image", &"--rank", &"50", &"--power", &"0", &"--seed", &"3", &"--precision", &"half", &input, &half,
    ]);
    let (_, _, a) = read_pgm(&double);
    let (_, _, b) = read_pgm(&half);
    let mad = a.iter().zip(&b).map(|(x, y)| x.abs_diff(*y) as f64).sum::<f64>() / a.len() as f64;
    assert!(mad <= 2.0, "mean absolute difference {mad}");
}

#[test]
fn image_demo_runs_in_one_kilobyte_per_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h) = (64, 64);
    let px = test_image(w, h, 7);
    let input = dir.path().join("in.pgm");
    write_pgm(&input, w, h, &px);
    let output = dir.path().join("out.pgm");
    let profile = dir.path().join("p.tsv");
    run_ok(&[&"compress-image", &"--rank", &"8", &"--memory-per-matrix", &"1K", &"--profile-out", &profile, &input, &output]);
    let text = std::fs::read_to_string(&profile).unwrap();
    for (k, v) in parse_profile(&text) {
        if k.starts_with("peak_bytes.") {
            assert!(v.parse::<u64>().unwrap() <= 1024, "{k} = {v}");
        }
    }
    assert!(image_error(&px, &output) < 0.5);
}

#[test]
fn interrupted_run_resumes_to_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (input, _) = rank10_fixture(dir.path());
    let reference = dir.path().join("ref");
    let args = |out: &Path| -> Vec<std::ffi::OsString> {
        ["rsvd", "--rank", "10", "--power", "3", "--memory-per-matrix", "4K", "--seed", "9"]
            .iter()
            .map(Into::into)
            .chain([input.clone().into(), out.as_os_str().to_owned()])
            .collect()
    };
    let argv = args(&reference);
    run_ok(&argv.iter().map(|a| a as &dyn AsRef<std::ffi::OsStr>).collect::<Vec<_>>());
    let want = output_files(&reference).into_iter().map(|(_, b)| b).collect::<Vec<_>>();

    let out = dir.path().join("cut");
    let mut argv = args(&out);
    argv.splice(1..1, ["--abort-after-step".into(), "7".into()]);
    let killed = oocsvd(&argv.iter().map(|a| a as &dyn AsRef<std::ffi::OsStr>).collect::<Vec<_>>());
    assert!(!killed.status.success());
    assert!(!out.join("U.blk").exists());

    run_ok(&[&"resume", &out.join("work")]);
    let got = output_files(&out).into_iter().map(|(_, b)| b).collect::<Vec<_>>();
    assert!(got == want, "resumed outputs differ");

    // a second resume touches nothing
    let before: Vec<_> = output_files(&out).iter().map(|(p, _)| std::fs::metadata(p).unwrap().modified().unwrap()).collect();
    run_ok(&[&"resume", &out.join("work")]);
    let after: Vec<_> = output_files(&out).iter().map(|(p, _)| std::fs::metadata(p).unwrap().modified().unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn resume_without_plan_or_with_changed_input() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(code(&oocsvd(&[&"resume", &empty])), Some(6));
    assert_eq!(code(&oocsvd(&[&"resume", &dir.path().join("absent")])), Some(6));

    let (input, _) = rank10_fixture(dir.path());
    let out = dir.path().join("out");
    let killed = oocsvd(&[&"rsvd", &"--abort-after-step", &"4", &"--rank", &"5", &"--power", &"1", &input, &out]);
    assert!(!killed.status.success());
    write_mtx(&input, &with_spectrum(120, 90, &[1.0, 2.0], 8));
    assert_eq!(code(&oocsvd(&[&"resume", &out.join("work")])), Some(7));
}

#[test]
fn info_reports_shape_density_and_size() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = dir.path().join("tiny.mtx");
    std::fs::write(&tiny, "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 5.0\n").unwrap();
    let text = String::from_utf8(run_ok(&[&"info", &tiny]).stdout).unwrap();
    let pairs = parse_profile(&text);
    let get = |k: &str| pairs.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone()).unwrap();
    assert_eq!(get("rows"), "2");
    assert_eq!(get("nnz"), "1");
    assert_eq!(get("density").parse::<f64>().unwrap(), 0.25);
    assert_eq!(get("dense_bytes"), "32");

    // header only: the body is never read
    let big = dir.path().join("big.mtx");
    std::fs::write(&big, "%%MatrixMarket matrix coordinate real general\n% header only\n1447360 1447360 5514242\n").unwrap();
    let text = String::from_utf8(run_ok(&[&"info", &"--memory-per-matrix", &"16M", &big]).stdout).unwrap();
    let pairs = parse_profile(&text);
    let get = |k: &str| pairs.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone()).unwrap();
    assert_eq!((get("rows"), get("cols"), get("nnz")), ("1447360".into(), "1447360".into(), "5514242".into()));
    assert_eq!(get("dense_bytes"), (1_447_360u128 * 1_447_360 * 8).to_string());
    assert_eq!(get("dense_size"), "16.76 TB");
    assert_ne!(get("partition"), "1x1");

    let bad = dir.path().join("bad.mtx");
    std::fs::write(&bad, "%%MatrixMarket matrix coordinate real general\n2 two 1\n").unwrap();
    assert_eq!(code(&oocsvd(&[&"info", &bad])), Some(3));
}
