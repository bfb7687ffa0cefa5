//! Compiles a small C program against the generated header and static
//! library and checks its output.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "rrdps.h"

int main(void) {
    RrdpsChannel *ch = NULL;
    RrdpsEnsemble *ens = NULL;
    RrdpsEvaluation *eval = NULL;
    const double x[4] = {0.5, 0.1, 0.05, 0.01};
    if (rrdps_channel_standard(16, 30.0, &ch) != RRDPS_STATUS_OK) return 10;
    if (rrdps_ensemble_new(x, 0.0, &ens) != RRDPS_STATUS_OK) return 11;
    if (rrdps_evaluate(ens, ch, RRDPS_RATE_SCOPE_WHOLE_BRACKET, &eval) != RRDPS_STATUS_OK) return 12;
    printf("%.12g\n", rrdps_evaluation_rate(eval));

    double g = 0.0;
    RrdpsStatus st = rrdps_gain(ch, -1.0, &g);
    char msg[128];
    rrdps_last_error_message(msg, sizeof msg);
    printf("%d %s\n", (int)st, rrdps_status_string(st));

    rrdps_evaluation_free(eval);
    rrdps_ensemble_free(ens);
    rrdps_channel_free(ch);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler on PATH; skipping");
        return;
    }
    let lib = target_dir().join("librrdps_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();

    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");

    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("8.422968897e-05"));
    assert_eq!(lines.next(), Some("2 argument outside its domain"));
}
