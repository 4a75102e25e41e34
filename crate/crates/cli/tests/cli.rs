//! End-to-end runs of the binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use failaware::checkpoint::Checkpoint;
use failaware::dataset::Dataset;
use failaware::report::read_csv;

const BIN: &str = env!("CARGO_BIN_EXE_failaware");

const CLASSIFY: &str = r#"
seed = 7

[task]
kind = "classify"
classes = 6
dim = 6

[data]
count = 100

[bc]
instances = 200
epochs = 3

[fa]
architecture = { kind = "fmp1", memory_encoder = "replica" }
episodes = 60
log_every = 20

[eval]
episodes = 50
seeds = [1, 2]
policies = [{ kind = "re" }, { kind = "sp", checkpoint = "bc.ckpt" }, { kind = "fa" }]
"#;

const SWEEP: &str = r#"
seed = 3

[task]
kind = "correlated"
actions = 8

[bc]
instances = 100
epochs = 2

[fa]
architecture = { kind = "fmp1", memory_encoder = "replica" }
episodes = 30

[sweep]
axis = "correlation-length"
values = [0.0, 1.0, 2.0, 5.0]
episodes = 20
policies = [
  { kind = "sp" },
  { kind = "fa", architecture = { kind = "fmp1", memory_encoder = "replica" } },
  { kind = "fa", architecture = { kind = "fmp2", memory_encoder = "replica", hidden = 8 } },
]
"#;

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(BIN)
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    fs::create_dir_all(dir).unwrap();
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn pipeline(dir: &Path, cfg: &Path) {
    for cmd in ["gen-data", "train-bc", "train-fa", "eval"] {
        ok(&run(cmd, cfg, dir, &[]));
    }
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CLASSIFY);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    pipeline(&a, &cfg);
    pipeline(&b, &cfg);
    for f in ["dataset.fad", "bc.ckpt", "bc_log.csv", "fa.ckpt", "fa_log.csv", "eval.csv", "eval.json"] {
        let x = fs::read(a.join(f)).unwrap();
        let y = fs::read(b.join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
    let ds = Dataset::load(&a.join("dataset.fad")).unwrap();
    assert_eq!(ds.instances.len(), 100);
    assert_eq!(ds.header.seed, 7);
    let rows = read_csv(&a.join("eval.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[2].policy, "FMP-1");
}

#[test]
fn threads_do_not_change_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CLASSIFY);
    let a = tmp.path().join("a");
    pipeline(&a, &cfg);
    let b = tmp.path().join("b");
    fs::create_dir_all(&b).unwrap();
    for f in ["bc.ckpt", "fa.ckpt"] {
        fs::copy(a.join(f), b.join(f)).unwrap();
    }
    ok(&run("eval", &cfg, &b, &["--threads", "3"]));
    assert_eq!(fs::read(a.join("eval.csv")).unwrap(), fs::read(b.join("eval.csv")).unwrap());
}

#[test]
fn fa_stage_keeps_shared_blobs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CLASSIFY);
    ok(&run("train-bc", &cfg, tmp.path(), &[]));
    ok(&run("train-fa", &cfg, tmp.path(), &[]));
    let bc = Checkpoint::load(&tmp.path().join("bc.ckpt")).unwrap();
    let fa = Checkpoint::load(&tmp.path().join("fa.ckpt")).unwrap();
    let shared = fa.weights.shared_partition();
    assert!(!shared.is_empty());
    for name in shared {
        let x = bc.weights.params.get(&name).unwrap();
        let y = fa.weights.params.get(&name).unwrap();
        let same = x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits());
        assert!(same, "{name} changed");
    }
    let log = fs::read_to_string(tmp.path().join("fa_log.csv")).unwrap();
    assert!(log.starts_with("episode,epsilon,mean_reward,loss\n"));
}

#[test]
fn bc_accuracy_is_reproduced_from_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CLASSIFY);
    ok(&run("train-bc", &cfg, tmp.path(), &[]));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("bc.json")).unwrap()).unwrap();
    let logged = report["accuracy"].as_f64().unwrap();
    let ckpt = Checkpoint::load(&tmp.path().join("bc.ckpt")).unwrap();
    let rc = failaware::config::RunConfig::parse(CLASSIFY).unwrap();
    let ds = Dataset::generate(&rc.task, &rc.assess, rc.seed, rc.bc.instances()).unwrap();
    let data = failaware_core::training::bc_dataset(&rc.task, &rc.assess, &ds.instances).unwrap();
    let acc = failaware_core::training::bc_accuracy(&ckpt.weights, &data).unwrap();
    assert_eq!(acc, logged);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CLASSIFY);
    ok(&run("gen-data", &cfg, &tmp.path().join("a"), &["--seed", "9"]));
    ok(&run("gen-data", &cfg, &tmp.path().join("b"), &[]));
    let a = Dataset::load(&tmp.path().join("a/dataset.fad")).unwrap();
    assert_eq!(a.header.seed, 9);
    assert_ne!(
        fs::read(tmp.path().join("a/dataset.fad")).unwrap(),
        fs::read(tmp.path().join("b/dataset.fad")).unwrap()
    );
}

#[test]
fn misspelled_key_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &CLASSIFY.replace("epochs = 3", "epohcs = 3"));
    let o = run("gen-data", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epohcs"));
}

#[test]
fn missing_config_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("eval", &tmp.path().join("nope.toml"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fa_without_bc_checkpoint_is_dependency_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CLASSIFY);
    let o = run("train-fa", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn truncated_checkpoint_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CLASSIFY);
    ok(&run("train-bc", &cfg, tmp.path(), &[]));
    let p = tmp.path().join("bc.ckpt");
    let bytes = fs::read(&p).unwrap();
    fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
    let o = run("train-fa", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("size") || err.contains("truncated"), "{err}");
}

#[test]
fn incompatible_checkpoint_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CLASSIFY);
    ok(&run("train-bc", &cfg, tmp.path(), &[]));
    let other = write_config(&tmp.path().join("x"), &CLASSIFY.replace("classes = 6", "classes = 5"));
    let o = run("train-fa", &other, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("incompatible"));
}

#[test]
fn baseline_eval_needs_no_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[task]\nkind = \"classify\"\nclasses = 5\ndim = 5\n[bc]\ninstances = 50\nepochs = 1\n[eval]\nepisodes = 30\npolicies = [{ kind = \"sp\" }, { kind = \"lpre\" }, { kind = \"re\" }]\n";
    let cfg = write_config(tmp.path(), text);
    ok(&run("eval", &cfg, tmp.path(), &[]));
    assert_eq!(read_csv(&tmp.path().join("eval.csv")).unwrap().len(), 3);
}

#[test]
fn unwritable_output_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CLASSIFY);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let o = run("gen-data", &cfg, &blocker.join("sub"), &[]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sweep_rows_and_plots_regenerate_from_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(&tmp.path().join("cfg"), SWEEP);
    let out = tmp.path().join("s");
    ok(&run("sweep", &cfg, &out, &[]));
    let rows = read_csv(&out.join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.axis == "correlation_length"));
    let tsr = fs::read(out.join("sweep_tsr.svg")).unwrap();
    let tns = fs::read(out.join("sweep_tns.svg")).unwrap();
    fs::remove_file(out.join("sweep_tsr.svg")).unwrap();
    fs::remove_file(out.join("sweep_tns.svg")).unwrap();
    ok(&run("plot", &cfg, &out, &[]));
    assert_eq!(fs::read(out.join("sweep_tsr.svg")).unwrap(), tsr);
    assert_eq!(fs::read(out.join("sweep_tns.svg")).unwrap(), tns);
}
