use std::path::Path;
use std::process::{Command, Output};

fn hypofem(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypofem"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files_with_ext(dir: &Path, ext: &str) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    v.sort();
    v
}

fn summary_value(text: &str, key: &str) -> f64 {
    let field = text.split_whitespace().find_map(|w| w.strip_prefix(&format!("{key}="))).unwrap();
    field.parse().unwrap()
}

#[test]
fn decay_smoke_solve_on_two_elements() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypofem(&["solve", "--case", "decay", "--levels", "2", "--p", "1", "--q", "0", "--k-rule", "single"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&files_with_ext(dir.path(), "csv")[0]).unwrap();
    let values: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 4);
    assert!(values.iter().all(|v| v.is_finite()));
    let vtk = std::fs::read_to_string(&files_with_ext(dir.path(), "vtk")[0]).unwrap();
    assert!(vtk.starts_with("# vtk DataFile"));
}

#[test]
fn stationary_nodal_error_decreases_under_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let errs: Vec<f64> = [32, 128]
        .iter()
        .map(|e| {
            let o = hypofem(&["solve", "--case", "stationary", "--p", "2", "--levels", &e.to_string()], dir.path());
            assert!(o.status.success());
            summary_value(&stdout(&o), "max_nodal_error")
        })
        .collect();
    assert!(errs[1] < errs[0], "{errs:?}");
}

#[test]
fn convergence_writes_csv_and_both_plots() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypofem(&["convergence", "--case", "stationary", "--p", "1", "--levels", "8,32,128"], dir.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&files_with_ext(dir.path(), "csv")[0]).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0].join(","), "case,method,p,q,elements,dofs,h_max,k,err_st,err_A_final,eoc_st,wall_s,iters");
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1][10], "");
    let eoc: f64 = rows[3][10].parse().unwrap();
    assert!((eoc - 1.0).abs() < 0.3, "eoc {eoc}");
    assert_eq!(files_with_ext(dir.path(), "svg").len(), 2);
    let json = files_with_ext(dir.path(), "json");
    assert_eq!(json.len(), 1);
    // The config hash is part of every output name.
    let stem = json[0].file_stem().unwrap().to_str().unwrap().to_string();
    assert!(files_with_ext(dir.path(), "csv")[0].to_str().unwrap().contains(&stem));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"case": "decay", "p": 2, "q": 1, "levels": [8], "t_f": 0.5, "k_rule": "fixed:0.25"}"#).unwrap();
    let o = hypofem(&["decay", "--config", cfg.to_str().unwrap(), "--q", "0"], &dir.path().join("out"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let written = std::fs::read_to_string(&files_with_ext(&dir.path().join("out"), "json")[0]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&written).unwrap();
    assert_eq!((v["p"].as_u64(), v["q"].as_u64(), v["case"].as_str()), (Some(2), Some(0), Some("decay")));
}

#[test]
fn params_dump_lists_every_element() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypofem(&["params-dump", "--p", "3", "--levels", "32"], dir.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&files_with_ext(dir.path(), "csv")[0]).unwrap();
    assert!(csv.starts_with("element,h,C_INV,C_inv,tau,C_delta,delta,alpha,beta,gamma"));
    assert_eq!(csv.lines().count(), 33);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_case = hypofem(&["convergence", "--case", "nonsense"], dir.path());
    assert_eq!(bad_case.status.code(), Some(3));
    let bad_levels = hypofem(&["convergence", "--levels", "30"], dir.path());
    assert_eq!(bad_levels.status.code(), Some(3));
    let decay_with_source = hypofem(&["decay", "--case", "stationary"], dir.path());
    assert_eq!(decay_with_source.status.code(), Some(3));
    let bad_flag = hypofem(&["solve", "--no-such-flag"], dir.path());
    assert_eq!(bad_flag.status.code(), Some(3));
    let cfg = dir.path().join("starved.json");
    std::fs::write(&cfg, r#"{"solver": {"max_iter": 1, "restart": 1}}"#).unwrap();
    let starved = hypofem(&["solve", "--config", cfg.to_str().unwrap(), "--p", "2"], dir.path());
    assert_eq!(starved.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&starved.stderr).contains("solver failure"));
}
