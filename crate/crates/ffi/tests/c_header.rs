use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "scenopt.h"

int main(void) {
    double kt = 0.0;
    uint64_t m = 0;
    if (scenopt_iteration_confidence(1e-3, 1, &kt) != SCENOPT_STATUS_OK) return 1;
    if (scenopt_min_scenarios(0.1, kt, 1, &m) != SCENOPT_STATUS_OK) return 2;
    if (m != 71) return 3;
    ScenoptOptimizer *h = NULL;
    if (scenopt_optimizer_new("{", &h) != SCENOPT_STATUS_CONFIG || h != NULL) return 4;
    if (scenopt_last_error() == NULL) return 5;
    printf("%llu\n", (unsigned long long)m);
    return 0;
}
"#;

fn compiler() -> Option<String> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .map(String::from)
}

#[test]
fn header_compiles_and_links() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler available; skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    assert!(include.join("scenopt.h").exists());
    // the test binary lives in target/<profile>/deps
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib_dir = deps.parent().unwrap().to_path_buf();
    let staticlib = lib_dir.join("libscenopt_ffi.a");
    assert!(staticlib.exists(), "missing {}", staticlib.display());

    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&staticlib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "71");
}
