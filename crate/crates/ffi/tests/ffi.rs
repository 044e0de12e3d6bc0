use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use autoseg_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(autoseg_last_error()) }.to_string_lossy().into_owned()
}

fn step_series() -> *mut AutosegSeries {
    let values: Vec<f64> = (0..600)
        .map(|i| if i < 300 { 1.0 } else { 6.0 } + 0.05 * (((i * 7919) % 13) as f64 - 6.0) / 6.0)
        .collect();
    let mut s = ptr::null_mut();
    let st = unsafe { autoseg_series_new(values.as_ptr(), 1, values.len(), &mut s) };
    assert_eq!(st, AutosegStatus::Ok);
    s
}

#[test]
fn series_handles() {
    let values = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(autoseg_series_new(values.as_ptr(), 2, 3, &mut s), AutosegStatus::Ok);
        assert_eq!(autoseg_series_len(s), 3);
        assert_eq!(autoseg_series_channels(s), 2);
        autoseg_series_free(s);
        autoseg_series_free(ptr::null_mut());
        assert_eq!(autoseg_series_len(ptr::null()), 0);
    }
}

#[test]
fn invalid_inputs_report_errors() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(autoseg_series_new(ptr::null(), 1, 5, &mut s), AutosegStatus::NullPointer);
        assert!(last_error().contains("values"));
        let bad = [1.0, f64::NAN, 3.0];
        assert_eq!(autoseg_series_new(bad.as_ptr(), 1, 3, &mut s), AutosegStatus::InvalidInput);
        assert!(last_error().contains("non-finite"));
        assert!(s.is_null());

        let path = CString::new("/no/such/file.csv").unwrap();
        assert_eq!(autoseg_series_load_csv(path.as_ptr(), false, false, &mut s), AutosegStatus::Io);
        assert!(last_error().contains("/no/such/file.csv"));

        let series = step_series();
        let mut d = ptr::null_mut();
        assert_eq!(autoseg_pelt(series, 99, 0.0, 1, &mut d), AutosegStatus::InvalidConfig);
        assert_eq!(autoseg_bocpd(series, 7, 0.0, 0.5, &mut d), AutosegStatus::InvalidConfig);
        let params = autoseg_detect_params_default();
        assert_eq!(autoseg_detect(series, &params, &mut d), AutosegStatus::InvalidConfig);
        assert!(d.is_null());
        autoseg_series_free(series);
    }
}

#[test]
fn detectors_and_evaluation() {
    let series = step_series();
    unsafe {
        let mut params = autoseg_detect_params_default();
        params.window_size = 40;
        params.learning_rate = 0.02;
        params.epochs = 25;
        params.depth = 1;
        let mut ae = ptr::null_mut();
        assert_eq!(autoseg_detect(series, &params, &mut ae), AutosegStatus::Ok, "{}", last_error());
        let (mut ts, mut vs, mut n) = (ptr::null(), ptr::null(), 0usize);
        assert!(autoseg_detection_curve(ae, &mut ts, &mut vs, &mut n));
        assert_eq!(n, 600 / 20 - 2);

        let mut pelt = ptr::null_mut();
        assert_eq!(
            autoseg_pelt(series, AutosegPeltCost::NormalMean as u32, 0.0, 1, &mut pelt),
            AutosegStatus::Ok
        );
        assert!(!autoseg_detection_curve(pelt, &mut ts, &mut vs, &mut n));
        assert_eq!(n, 0);
        let mut len = 0;
        let bps = autoseg_detection_breakpoints(pelt, &mut len);
        assert_eq!(std::slice::from_raw_parts(bps, len), &[300]);

        let mut json = ptr::null_mut();
        assert_eq!(autoseg_detection_to_json(pelt, &mut json), AutosegStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        autoseg_string_free(json);
        assert!(text.contains("\"breakpoints\": [\n    300\n  ]") || text.contains("[300]"), "{text}");

        let truth = [300usize];
        let mut eval = AutosegEval::default();
        assert_eq!(autoseg_evaluate(truth.as_ptr(), 1, 600, pelt, 10, &mut eval), AutosegStatus::Ok);
        assert_eq!((eval.correct, eval.tpr, eval.fpr, eval.pl_defined, eval.pl), (1, 1.0, 0.0, true, 0.0));

        let mut bocpd = ptr::null_mut();
        assert_eq!(
            autoseg_bocpd(series, AutosegBocpdModel::GammaPrecision as u32, 0.0, 0.5, &mut bocpd),
            AutosegStatus::Ok
        );
        let empty: [usize; 0] = [];
        assert_eq!(autoseg_evaluate(empty.as_ptr(), 0, 600, bocpd, 10, &mut eval), AutosegStatus::Undefined);

        for d in [ae, pelt, bocpd] {
            autoseg_detection_free(d);
        }
        autoseg_series_free(series);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(autoseg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compile and run a C program against the generated header and the static
/// library, when a C compiler and the archive are available.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("autoseg.h").exists());

    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let archive = profile_dir.join("libautoseg_ffi.a");
    if !archive.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&header_dir)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let expected = format!("1 200 1.0\n{} 1\n", AutosegStatus::InvalidConfig as i32);
    assert_eq!(String::from_utf8_lossy(&out.stdout), expected);
}
