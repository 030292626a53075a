//! Compiles and runs a small C program against the generated header and the
//! static library. Skipped when no C compiler or static archive is present.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "finslerlab.h"

int main(void) {
    FlMetric *m = NULL;
    if (fl_metric_sqrt2d("-x2", "x1", "x1^2+x2^2", &m) != FL_STATUS_OK) return 1;
    double x[2] = {0.6, 0.0}, y[2] = {1.0, 0.0}, lambda = 0.0;
    if (fl_metric_einstein_scalar(m, x, y, &lambda) != FL_STATUS_OK) return 2;
    fl_metric_free(m);
    if (fabs(lambda + 1.25) > 1e-9) return 3;
    if (fl_metric_sqrt2d("x1 +", "x1", "x1", &m) != FL_STATUS_PARSE) return 4;
    if (fl_last_error_message() == NULL) return 5;
    printf("%.12f\n", lambda);
    return 0;
}
"#;

#[test]
fn c_program_links_against_header() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = crate_dir.join("include");
    assert!(header_dir.join("finslerlab.h").exists(), "header not generated");
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let archive = profile_dir.join("libfinslerlab_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !archive.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or {} missing", archive.display());
        return;
    }
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("ffi_smoke.c");
    let bin = tmp.join("ffi_smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "-1.250000000000");
}
