use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ktram() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ktram"));
    cmd.env_remove("KTRAM_SEED");
    cmd
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn comment_seed(text: &str) -> String {
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# ktram "), "{first}");
    first
        .split(' ')
        .find_map(|f| f.strip_prefix("seed="))
        .unwrap()
        .to_string()
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = ktram().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("ktram: error:"), "{err}");
    assert!(err.contains("Usage: ktram"), "{err}");
}

#[test]
fn help_exits_zero() {
    let o = ktram().arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("device"));
}

#[test]
fn default_sweep_layout() {
    let o = ktram().args(["device", "sweep"]).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(comment_seed(&text), "42");
    assert_eq!(lines[1], "step,volts,seconds,on_fraction,conductance_S");
    assert_eq!(lines.len(), 2 + 80);
    assert!(lines[2].starts_with("0,"));
    assert!(lines[81].starts_with("79,"));
}

#[test]
fn custom_pulse_file() {
    let dir = tempfile::tempdir().unwrap();
    let pulses = dir.path().join("p.csv");
    std::fs::write(
        &pulses,
        "# two pulses\nvolts,seconds\n0.8,5e-8\n-0.8,5e-8\n",
    )
    .unwrap();
    let o = ktram()
        .args(["device", "sweep", "--pulses"])
        .arg(&pulses)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn pulse_outside_limits_is_invariant_error() {
    let dir = tempfile::tempdir().unwrap();
    let pulses = dir.path().join("p.csv");
    std::fs::write(&pulses, "2.0,5e-8\n").unwrap();
    let o = ktram()
        .args(["device", "sweep", "--pulses"])
        .arg(&pulses)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("ktram: error:"));
}

#[test]
fn missing_file_is_data_error() {
    let o = ktram()
        .args(["bench", "classify", "--data", "/nonexistent/x.csv"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.starts_with("ktram: error:") && err.contains("/nonexistent/x.csv"),
        "{err}"
    );
}

#[test]
fn ragged_csv_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "0,1,A\n1,B\n").unwrap();
    let o = ktram()
        .args(["bench", "classify", "--data"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupt_state_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.bin");
    std::fs::write(&path, b"not a state file").unwrap();
    let o = ktram()
        .args(["core", "load", "--state"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flag_value_is_usage_error() {
    let o = ktram()
        .args(["--mode", "quantum", "device", "sweep"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = ktram()
        .args(["--preset", "Xx", "device", "sweep"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.kv");
    std::fs::write(&cfg, "seed = 9\n").unwrap();

    let seed = |cmd: &mut Command| comment_seed(&stdout(&cmd.output().unwrap()));
    assert_eq!(seed(ktram().args(["device", "sweep"])), "42");
    assert_eq!(
        seed(ktram().env("KTRAM_SEED", "7").args(["device", "sweep"])),
        "7"
    );
    assert_eq!(
        seed(
            ktram()
                .env("KTRAM_SEED", "7")
                .arg("--config")
                .arg(&cfg)
                .args(["device", "sweep"])
        ),
        "9"
    );
    assert_eq!(
        seed(
            ktram()
                .env("KTRAM_SEED", "7")
                .arg("--config")
                .arg(&cfg)
                .args(["--seed", "3", "device", "sweep"])
        ),
        "3"
    );
}

#[test]
fn config_file_device_override_and_unknown_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.kv");
    std::fs::write(&cfg, "preset = Sn\n[device]\nbeta = 12\n").unwrap();
    let o = ktram()
        .arg("--config")
        .arg(&cfg)
        .args(["device", "sweep"])
        .output()
        .unwrap();
    let first = stdout(&o).lines().next().unwrap().to_string();
    assert!(
        first.contains(" preset=Sn ") && first.contains(" beta=12 "),
        "{first}"
    );

    std::fs::write(&cfg, "epoks = 3\n").unwrap();
    let o = ktram()
        .arg("--config")
        .arg(&cfg)
        .args(["device", "sweep"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("epoks"));
}

#[test]
fn stochastic_sweep_depends_on_seed() {
    let run = |seed: &str| {
        stdout(
            &ktram()
                .args(["--mode", "stochastic", "--seed", seed, "device", "sweep"])
                .output()
                .unwrap(),
        )
    };
    assert_eq!(run("1"), run("1"));
    let body = |t: String| t.lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_ne!(body(run("1")), body(run("2")));
}

#[test]
fn classify_report_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let o = ktram()
        .args(["bench", "classify", "--header", "--epochs", "5", "--data"])
        .arg(data("separable.csv"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let file = std::fs::read_to_string(&out).unwrap();
    assert!(file.starts_with("# ktram "));
    assert!(file.lines().any(|l| l.starts_with("train_errors,")));
    assert!(file.lines().any(|l| l.starts_with("accuracy,")));
    assert!(file.lines().any(|l| l.starts_with("confusion,A,")));
}

#[test]
fn anomaly_and_cluster_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    let mut text = String::from("a,b,c,d\n");
    for i in 0..40 {
        text.push_str(if i % 4 == 0 { "1,1,0,1\n" } else { "1,1,0,0\n" });
    }
    std::fs::write(&train, &text).unwrap();
    let test = dir.path().join("test.csv");
    std::fs::write(&test, "a,b,c,d\n1,1,0,0\n0,0,1,1\n").unwrap();

    let scores = dir.path().join("scores.csv");
    let o = ktram()
        .args(["bench", "anomaly", "--header", "--train"])
        .arg(&train)
        .arg("--test")
        .arg(&test)
        .arg("--out")
        .arg(&scores)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let file = std::fs::read_to_string(&scores).unwrap();
    let lines: Vec<_> = file.lines().collect();
    assert!(lines[0].starts_with("# ktram "));
    assert_eq!(lines[1], "index,score,anomaly,label");
    assert_eq!(lines.len(), 4);

    let sigs = dir.path().join("sigs.csv");
    let o = ktram()
        .args(["bench", "cluster", "--header", "--ensemble", "8", "--data"])
        .arg(&train)
        .arg("--out")
        .arg(&sigs)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let file = std::fs::read_to_string(&sigs).unwrap();
    let lines: Vec<_> = file.lines().collect();
    assert_eq!(lines[1], "index,signature,label");
    assert_eq!(lines.len(), 2 + 40);
    assert!(lines[2].split(',').nth(1).unwrap().len() == 8);
}

#[test]
fn core_state_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.state");
    let b = dir.path().join("b.state");
    let o = ktram()
        .args([
            "--seed", "11", "core", "save", "--rows", "2", "--cols", "8", "--state",
        ])
        .arg(&a)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("nodes"));
    let o = ktram()
        .args(["core", "load", "--state"])
        .arg(&a)
        .arg("--resave")
        .arg(&b)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let c = dir.path().join("c.state");
    let o = ktram()
        .args(["core", "load", "--steps", "5", "--state"])
        .arg(&a)
        .arg("--resave")
        .arg(&c)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}
