use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use piostack::stacker::{
    feature_names, fit_stacked, split_base_stack, GbdtConfig, SplitProtocol, StackInstance,
};
use piostack_ffi::*;

fn last_error() -> String {
    let p = piostack_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn scalar_functions() {
    assert_eq!(piostack_sigmoid(0.0), 0.5);
    let mut out = 0.0;
    let status =
        unsafe { piostack_bce_with_logits([0.0; 3].as_ptr(), [1.0, 0.0, 1.0].as_ptr(), &mut out) };
    assert_eq!(status, PiostackStatus::Ok);
    assert!((out - 3.0 * 2f64.ln()).abs() < 1e-12);
    assert!(piostack_last_error().is_null());

    let scores = [0.1, 0.4, 0.35, 0.8];
    let labels = [0u8, 0, 1, 1];
    assert_eq!(
        unsafe { piostack_roc_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut out) },
        PiostackStatus::Ok
    );
    assert!((out - 0.75).abs() < 1e-15);
    let status = unsafe { piostack_roc_auc(scores.as_ptr(), [1u8; 4].as_ptr(), 4, &mut out) };
    assert_eq!(status, PiostackStatus::SingleClass);
    assert!(!last_error().is_empty());

    let v = unsafe { CStr::from_ptr(piostack_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported() {
    let status =
        unsafe { piostack_bce_with_logits(ptr::null(), [0.0; 3].as_ptr(), ptr::null_mut()) };
    assert_eq!(status, PiostackStatus::NullPointer);
    assert!(last_error().contains("logits"));
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { piostack_normalize_heading(ptr::null(), &mut out) },
        PiostackStatus::NullPointer
    );
    let bad = [0xffu8, 0];
    assert_eq!(
        unsafe { piostack_normalize_heading(bad.as_ptr().cast(), &mut out) },
        PiostackStatus::InvalidUtf8
    );
}

#[test]
fn headings() {
    let raw = CString::new("Population and Interventions:").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { piostack_normalize_heading(raw.as_ptr(), &mut s) },
        PiostackStatus::Ok
    );
    assert_eq!(
        unsafe { CStr::from_ptr(s) }.to_str().unwrap(),
        "population and intervention"
    );
    unsafe { piostack_string_free(s) };

    let mut map = ptr::null_mut();
    assert_eq!(
        unsafe { piostack_heading_map_default(&mut map) },
        PiostackStatus::Ok
    );
    for (h, want) in [
        ("subjects", 1),
        ("POPULATION AND INTERVENTION", 3),
        ("aim", PIOSTACK_HEADING_NEGATIVE),
        ("population and method", PIOSTACK_HEADING_DISCARD),
    ] {
        let h = CString::new(h).unwrap();
        let mut code = 99;
        assert_eq!(
            unsafe { piostack_heading_map_lookup(map, h.as_ptr(), &mut code) },
            PiostackStatus::Ok
        );
        assert_eq!(code, want);
    }
    unsafe { piostack_heading_map_free(map) };

    let bad = CString::new("no tab here").unwrap();
    let mut map = ptr::null_mut();
    assert_eq!(
        unsafe { piostack_heading_map_parse(bad.as_ptr(), &mut map) },
        PiostackStatus::Parse
    );
    assert!(map.is_null());
}

#[test]
fn qief_counts() {
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { piostack_qief_default(&mut d) }, PiostackStatus::Ok);
    let text = CString::new("23% of 150 patients received 50 mg daily").unwrap();
    let mut counts = [0u32; 4];
    assert_eq!(
        unsafe { piostack_qief_count(d, text.as_ptr(), counts.as_mut_ptr()) },
        PiostackStatus::Ok
    );
    assert_eq!(
        counts,
        piostack::features::qief_features(text.to_str().unwrap()).as_array()
    );
    unsafe { piostack_qief_free(d) };

    let custom = CString::new("pct\t%\npop\tpatients\ndose\tmg\nnum\t[0-9]+").unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(
        unsafe { piostack_qief_parse(custom.as_ptr(), &mut d) },
        PiostackStatus::Ok
    );
    assert_eq!(
        unsafe { piostack_qief_count(d, text.as_ptr(), counts.as_mut_ptr()) },
        PiostackStatus::Ok
    );
    assert_eq!(counts, [1, 1, 1, 3]);
    unsafe { piostack_qief_free(d) };
}

fn saved_model(
    dir: &std::path::Path,
) -> (PathBuf, piostack::stacker::StackedModel, Vec<StackInstance>) {
    let ids: Vec<String> = (0..80).map(|k| format!("{k}-0")).collect();
    let split = split_base_stack(&ids, &SplitProtocol::default()).unwrap();
    let inst: Vec<StackInstance> = split
        .stack_ids
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let t = [
                (k % 2) as f64,
                (k % 3 == 0) as u8 as f64,
                (k % 5 < 2) as u8 as f64,
            ];
            let base = t.map(|v| 0.3 + 0.4 * v + 0.01 * (k % 7) as f64);
            StackInstance::assemble(id.clone(), &[base], [1.0, 0.0, t[0], 0.0, k as f64], t)
        })
        .collect();
    let cfg = GbdtConfig {
        num_rounds: 10,
        ..GbdtConfig::default()
    };
    let fit = fit_stacked(&inst, &split, feature_names(1), vec!["m".into()], &cfg).unwrap();
    let path = dir.join("model.json");
    fit.model.save(&path).unwrap();
    (path, fit.model, inst)
}

#[test]
fn model_roundtrip_through_c_abi() {
    let dir = tempfile::tempdir().unwrap();
    let (path, model, inst) = saved_model(dir.path());
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { piostack_model_load(cpath.as_ptr(), &mut h) },
        PiostackStatus::Ok
    );
    let mut n = 0;
    assert_eq!(
        unsafe { piostack_model_n_features(h, &mut n) },
        PiostackStatus::Ok
    );
    assert_eq!(n, 8);
    for i in &inst {
        let mut p = [0.0; 3];
        assert_eq!(
            unsafe { piostack_model_predict(h, i.x.as_ptr(), n, p.as_mut_ptr()) },
            PiostackStatus::Ok
        );
        assert_eq!(p, model.predict(&i.x).unwrap());
    }
    let mut p = [0.0; 3];
    assert_eq!(
        unsafe { piostack_model_predict(h, inst[0].x.as_ptr(), 3, p.as_mut_ptr()) },
        PiostackStatus::Shape
    );
    unsafe { piostack_model_free(h) };

    let wrong = dir.path().join("v2.json");
    std::fs::write(&wrong, r#"{"schema_version": 2}"#).unwrap();
    let cwrong = CString::new(wrong.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { piostack_model_load(cwrong.as_ptr(), &mut h) },
        PiostackStatus::Schema
    );
    let missing = CString::new(dir.path().join("none.json").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { piostack_model_load(missing.as_ptr(), &mut h) },
        PiostackStatus::Io
    );
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "piostack.h"

int main(void) {
    if (piostack_sigmoid(0.0) != 0.5) return 1;
    PiostackHeadingMap *map = NULL;
    if (piostack_heading_map_default(&map) != PIOSTACK_STATUS_OK) return 2;
    int32_t code = 0;
    if (piostack_heading_map_lookup(map, "Participants", &code) != PIOSTACK_STATUS_OK || code != 1) return 3;
    piostack_heading_map_free(map);
    char *norm = NULL;
    if (piostack_normalize_heading("OUTCOMES:", &norm) != PIOSTACK_STATUS_OK) return 4;
    if (strcmp(norm, "outcome") != 0) return 5;
    piostack_string_free(norm);
    double out = 0;
    if (piostack_roc_auc(NULL, NULL, 3, &out) != PIOSTACK_STATUS_NULL_POINTER) return 6;
    if (piostack_last_error() == NULL) return 7;
    printf("ok %s\n", piostack_version());
    return 0;
}
"#;

/// Compile a C client against the generated header and the static library.
#[test]
fn c_client_links_against_static_library() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libpiostack_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let exe = dir.path().join("client");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let cc = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        cc.status.success(),
        "{}",
        String::from_utf8_lossy(&cc.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "client exited {:?}",
        run.status.code()
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
