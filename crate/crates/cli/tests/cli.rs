use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::thread;

use ddgm_core::denoise::protocol::serve_connection;
use ddgm_core::io;
use ddgm_core::Image;

fn ddgm(args: &[&str]) -> Output {
    ddgm_env(args, &[])
}

fn ddgm_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ddgm"));
    cmd.args(args).env_remove("DDGM_DENOISER_ENDPOINT");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("failed to launch ddgm")
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "ddgm failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthesizes and simulates a small dataset; returns the simulated directory.
fn dataset(root: &Path, count: usize) -> PathBuf {
    let truth = root.join("truth");
    let sims = root.join("sim");
    let count = format!("count={count}");
    ok(ddgm(&["synthesize", "-o", path(&truth), "--set", &count, "--set", "height=16", "--set", "width=16"]));
    ok(ddgm(&["simulate", "-i", path(&truth), "-o", path(&sims), "--set", "angles=16"]));
    sims
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn zero_gradient_steps_give_zero_image() {
    let tmp = tempfile::tempdir().unwrap();
    let sims = dataset(tmp.path(), 1);
    let out = tmp.path().join("rec");
    ok(ddgm(&["reconstruct", "-i", path(&sims), "-o", path(&out), "--set", "method=algebraic", "--set", "grad_steps=0"]));
    let x = io::read_image(&out.join("recon/x_0000")).unwrap();
    assert_eq!(x, Image::zeros(16, 16));
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let sims = dataset(tmp.path(), 1);
    let out = tmp.path().join("rec");
    for set in ["method=tomosynthesis", "grad_stepz=3", "stride=0", "step_size=-1"] {
        let res = ddgm(&["reconstruct", "-i", path(&sims), "-o", path(&out), "--set", set, "--set", "patch=8"]);
        assert_eq!(res.status.code(), Some(2), "{set}: {}", String::from_utf8_lossy(&res.stderr));
    }
    let res = ddgm(&["reconstruct", "-o", path(&out)]);
    assert_eq!(res.status.code(), Some(2), "missing input");
}

#[test]
fn ddgm_run_logs_its_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let sims = dataset(tmp.path(), 1);
    let out = tmp.path().join("rec");
    ok(ddgm(&["reconstruct", "-i", path(&sims), "-o", path(&out), "--set", "steps=50", "--set", "grad_steps=25"]));
    let m = manifest(&out);
    assert_eq!(m["results"]["totals"]["net_evals"], 50);
    assert_eq!(m["results"]["totals"]["grad_evals"], 1250);
    let trace = std::fs::read_to_string(out.join("trace/trace_0000.csv")).unwrap();
    assert_eq!(trace.lines().count(), 51);
    assert!(trace.starts_with("n,sigma,data_residual,mse_opt\n"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let sims = dataset(tmp.path(), 2);
    let out = tmp.path().join("rec");
    let args = ["reconstruct", "-i", path(&sims), "-o", path(&out), "--set", "steps=10", "--set", "png=true"];
    ok(ddgm(&args));
    let first = std::fs::read(out.join("manifest.json")).unwrap();
    let recon = std::fs::read(out.join("recon/x_0001.f32")).unwrap();
    ok(ddgm(&args));
    assert_eq!(first, std::fs::read(out.join("manifest.json")).unwrap());
    assert_eq!(recon, std::fs::read(out.join("recon/x_0001.f32")).unwrap());
}

#[test]
fn manifest_replays_to_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let sims = dataset(tmp.path(), 2);
    let out = tmp.path().join("rec");
    ok(ddgm(&["reconstruct", "-i", path(&sims), "-o", path(&out), "--set", "method=dps", "--set", "schedule=sampler", "--set", "steps=10"]));
    let replay = tmp.path().join("replay");
    ok(ddgm(&["reconstruct", "--config", path(&out.join("manifest.json")), "-o", path(&replay)]));
    let (a, b) = (manifest(&out), manifest(&replay));
    assert_eq!(a["outputs"], b["outputs"]);
    assert_eq!(a["results"], b["results"]);
}

#[test]
fn resumed_sweep_matches_uninterrupted_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let sims = dataset(tmp.path(), 2);
    let grid = tmp.path().join("grid.toml");
    std::fs::write(&grid, "steps = 8\n[grid]\ngrad_steps = [2, 6]\nmethod = [\"algebraic\", \"ddgm\"]\n").unwrap();
    let run = |out: &Path| ok(ddgm(&["sweep", "-c", path(&grid), "-i", path(&sims), "-o", path(out)]));

    let full = tmp.path().join("full");
    run(&full);
    let resumed = tmp.path().join("resumed");
    run(&resumed);
    // simulate an interruption: one cell and the summary were never written
    let cell = std::fs::read_dir(resumed.join("cells")).unwrap().next().unwrap().unwrap().path();
    std::fs::remove_file(&cell).unwrap();
    std::fs::remove_file(resumed.join("sweep.csv")).unwrap();
    run(&resumed);

    let csv = std::fs::read_to_string(full.join("sweep.csv")).unwrap();
    assert_eq!(csv, std::fs::read_to_string(resumed.join("sweep.csv")).unwrap());
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("grad_steps,method,step_size,mse_mean,mse_se"));

    let report = ok(ddgm(&["report", path(&full)]));
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("| grad_steps | method | MSE | SSIM | residual |"), "{text}");
    assert!(text.contains(" ± "));
}

/// Serves zero noise predictions to every connection.
fn zero_server() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            thread::spawn(move || {
                let _ = serve_connection(&mut stream, |x| Ok(Image::zeros(x.height(), x.width())));
            });
        }
    });
    format!("tcp://{addr}")
}

#[test]
fn environment_endpoint_overrides_configured_denoiser() {
    let tmp = tempfile::tempdir().unwrap();
    let sims = dataset(tmp.path(), 1);
    let endpoint = zero_server();

    let local = tmp.path().join("local");
    ok(ddgm(&["reconstruct", "-i", path(&sims), "-o", path(&local), "--set", "denoiser=passthrough", "--set", "steps=5"]));
    let remote = tmp.path().join("remote");
    ok(ddgm_env(
        &["reconstruct", "-i", path(&sims), "-o", path(&remote), "--set", "steps=5"],
        &[("DDGM_DENOISER_ENDPOINT", &endpoint)],
    ));
    // a zero-predicting server behaves exactly like the pass-through denoiser
    let recon = |d: &Path| std::fs::read(d.join("recon/x_0000.f32")).unwrap();
    assert_eq!(recon(&local), recon(&remote));

    let dead = ddgm_env(
        &["reconstruct", "-i", path(&sims), "-o", path(&tmp.path().join("dead")), "--set", "steps=5"],
        &[("DDGM_DENOISER_ENDPOINT", "tcp://127.0.0.1:1")],
    );
    assert_eq!(dead.status.code(), Some(4), "{}", String::from_utf8_lossy(&dead.stderr));
}

#[test]
fn generate_and_blend_demo_run() {
    let tmp = tempfile::tempdir().unwrap();
    let samples = tmp.path().join("samples");
    ok(ddgm(&["generate", "-o", path(&samples), "--set", "count=2", "--set", "schedule=sampler", "--set", "height=8", "--set", "width=8"]));
    let x = io::read_image(&samples.join("samples/x_0001")).unwrap();
    assert!(x.is_finite() && x.norm_sq() > 0.0);

    let blend = tmp.path().join("blend");
    ok(ddgm(&["blend-demo", "-o", path(&blend), "--set", "width=128", "--set", "steps=10"]));
    let z = manifest(&blend)["results"]["seam"]["z"].as_f64().unwrap();
    assert!(z.abs() <= 2.0, "seam z {z}");
}
