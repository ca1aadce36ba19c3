use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use cegmix_ffi::*;

fn last_error() -> String {
    let p = cegmix_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn transitions(counts: &[(u64, u64)]) -> *mut CegmixDataset {
    let s: Vec<u64> = counts.iter().map(|c| c.0).collect();
    let t: Vec<u64> = counts.iter().map(|c| c.1).collect();
    let mut d = ptr::null_mut();
    assert_eq!(cegmix_transitions_new(s.as_ptr(), t.as_ptr(), s.len(), &mut d), CegmixStatus::Ok);
    d
}

unsafe fn labels(p: *const CegmixPartition) -> Vec<usize> {
    let mut needed = 0;
    assert_eq!(cegmix_partition_labels(p, ptr::null_mut(), 0, &mut needed), CegmixStatus::BufferTooSmall);
    let mut buf = vec![0usize; needed];
    assert_eq!(cegmix_partition_labels(p, buf.as_mut_ptr(), buf.len(), &mut needed), CegmixStatus::Ok);
    buf
}

#[test]
fn ahc_exact_and_metrics() {
    unsafe {
        let d = transitions(&[(10, 100), (90, 100), (12, 100), (88, 100)]);
        let mut n = 0;
        assert_eq!(cegmix_dataset_len(d, &mut n), CegmixStatus::Ok);
        assert_eq!(n, 4);

        let (mut greedy, mut exact) = (ptr::null_mut(), ptr::null_mut());
        let (mut gs, mut es) = (0.0, 0.0);
        assert_eq!(cegmix_ahc_binomial(d, 1.0, 1.0, &mut greedy, &mut gs), CegmixStatus::Ok);
        assert_eq!(cegmix_exact_binomial(d, 1.0, 1.0, &mut exact, &mut es), CegmixStatus::Ok);
        assert!(gs <= es + 1e-9);
        assert_eq!(labels(greedy), vec![0, 1, 0, 1]);

        let truth_labels = [4usize, 9, 4, 9];
        let mut truth = ptr::null_mut();
        assert_eq!(cegmix_partition_new(d, truth_labels.as_ptr(), 4, &mut truth), CegmixStatus::Ok);
        let (mut v, mut r) = (0.0, 0.0);
        assert_eq!(cegmix_nmi(greedy, truth, &mut v), CegmixStatus::Ok);
        assert_eq!(cegmix_rand_index(greedy, truth, &mut r), CegmixStatus::Ok);
        assert!((v - 1.0).abs() < 1e-12 && r == 1.0);
        let (mut units, mut blocks) = (0, 0);
        assert_eq!(cegmix_partition_size(truth, &mut units, &mut blocks), CegmixStatus::Ok);
        assert_eq!((units, blocks), (4, 2));

        cegmix_partition_free(greedy);
        cegmix_partition_free(exact);
        cegmix_partition_free(truth);
        cegmix_dataset_free(d);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let s = [5u64];
        let t = [3u64];
        let mut d = ptr::null_mut();
        assert_eq!(cegmix_transitions_new(s.as_ptr(), t.as_ptr(), 1, &mut d), CegmixStatus::InvalidInput);
        assert!(d.is_null());
        assert!(last_error().contains("successes"));

        assert_eq!(cegmix_transitions_new(ptr::null(), t.as_ptr(), 1, &mut d), CegmixStatus::NullPointer);
        let mut out = 0.0;
        assert_eq!(cegmix_log_marginal_binomial(1, 2, -1.0, 1.0, &mut out), CegmixStatus::InvalidArgument);
        assert_eq!(cegmix_log_marginal_binomial(1, 2, 1.0, 1.0, &mut out), CegmixStatus::Ok);
        assert!(cegmix_last_error().is_null());
        assert!((out - (1.0f64 / 6.0).ln()).abs() < 1e-12);

        let c = CString::new("/nonexistent/data.csv").unwrap();
        assert_eq!(cegmix_dataset_read_csv(c.as_ptr(), 0, &mut d), CegmixStatus::Io);
        assert_eq!(cegmix_dataset_read_csv(c.as_ptr(), 7, &mut d), CegmixStatus::InvalidArgument);

        let big = transitions(&[(1, 2); 11]);
        let mut p = ptr::null_mut();
        assert_eq!(cegmix_exact_binomial(big, 1.0, 1.0, &mut p, ptr::null_mut()), CegmixStatus::InvalidInput);
        cegmix_dataset_free(big);

        cegmix_dataset_free(ptr::null_mut());
        cegmix_partition_free(ptr::null_mut());
        cegmix_search_result_free(ptr::null_mut());
        cegmix_string_free(ptr::null_mut());
    }
}

#[test]
fn csv_and_weibull_clustering() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    let mut text = String::from("edge_id,obs_index,holding_time\n");
    for e in 0..4 {
        for i in 0..40 {
            let u = (i as f64 + 0.5) / 40.0;
            let scale = if e % 2 == 0 { 1.0 } else { 30.0 };
            text.push_str(&format!("e{e},{i},{}\n", scale * (-(1.0 - u).ln())));
        }
    }
    std::fs::write(&path, text).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(cegmix_dataset_read_csv(c.as_ptr(), CegmixDataKind::Holding as u32, &mut d), CegmixStatus::Ok);
        let mut p = ptr::null_mut();
        assert_eq!(cegmix_ahc_weibull(d, 1.0, 1.0, 1.0, &mut p, ptr::null_mut()), CegmixStatus::Ok);
        assert_eq!(labels(p), vec![0, 1, 0, 1]);
        cegmix_partition_free(p);
        cegmix_dataset_free(d);
    }
}

#[test]
fn mixture_search_round_trip() {
    unsafe {
        let counts: Vec<(u64, u64)> = (0..10).map(|i| if i % 2 == 0 { (100, 1000) } else { (800, 1000) }).collect();
        let d = transitions(&counts);
        let mut o = cegmix_search_options_default();
        o.k_max = 3;
        o.chains = 2;
        o.warmup = 300;
        o.samples = 500;
        let mut r = ptr::null_mut();
        assert_eq!(cegmix_select_clusters(d, &o, &mut r), CegmixStatus::Ok, "{}", last_error());
        let mut k = 0;
        assert_eq!(cegmix_search_result_k(r, &mut k), CegmixStatus::Ok);
        assert_eq!(k, 2);
        let mut p = ptr::null_mut();
        assert_eq!(cegmix_search_result_partition(r, &mut p), CegmixStatus::Ok);
        assert_eq!(labels(p), vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
        let mut json = ptr::null_mut();
        assert_eq!(cegmix_search_result_json(r, &mut json), CegmixStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["k_selected"], 2);
        cegmix_string_free(json);
        cegmix_partition_free(p);
        cegmix_search_result_free(r);

        o.chains = 0;
        assert_eq!(cegmix_select_clusters(d, &o, &mut r), CegmixStatus::InvalidArgument);
        cegmix_dataset_free(d);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(cegmix_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cegmix.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["cegmix_select_clusters", "CEGMIX_STATUS_OK", "CEGMIX_DATA_KIND_HOLDING", "typedef struct CegmixDataset CegmixDataset"] {
        assert!(text.contains(name), "{name}");
    }
    let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).status() else {
        eprintln!("no C compiler available, syntax check skipped");
        return;
    };
    assert!(status.success());
}
