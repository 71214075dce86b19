use std::path::Path;
use std::process::{Command, Output};

use soundmask::audio::{load_wav, save_wav, AudioClip};

fn soundmask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soundmask"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = soundmask(&["demo", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    assert_eq!(soundmask(&[]).status.code(), Some(2));
    assert_eq!(
        soundmask(&["gen-noise", "--kind", "pink", "--out", "x.wav"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn execution_errors_exit_one_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("n.wav");
    let o = soundmask(&["gen-noise", "--kind", "gan", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
    let o = soundmask(&["gen-noise", "--kind", "white"]);
    assert_eq!(o.status.code(), Some(1), "no output path");
}

#[test]
fn silent_file_is_listed_as_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("clips");
    std::fs::create_dir(&input).unwrap();
    save_wav(
        &AudioClip::new(vec![0; 32000], 16000).unwrap(),
        input.join("silence.wav"),
    )
    .unwrap();
    let out = dir.path().join("randomness.json");
    let o = soundmask(&[
        "measure-randomness",
        "--in",
        p(&input),
        "--condition",
        "original",
        "--out",
        p(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = json(&out);
    assert_eq!(r["skipped_degenerate"]["count"], 1);
    assert_eq!(r["skipped_degenerate"]["clips"][0]["id"], "silence.wav");
    assert_eq!(r["scored"], 0);
    assert!(r["aggregate"].is_null());
    assert!(dir.path().join("randomness.json.provenance.json").exists());
}

#[test]
fn gen_noise_is_seeded_and_peak_limited() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.wav");
    let b = dir.path().join("b.wav");
    let c = dir.path().join("c.wav");
    for (path, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        let o = soundmask(&[
            "gen-noise",
            "--kind",
            "white",
            "--seconds",
            "1",
            "--seed",
            seed,
            "--out",
            p(path),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    let clip = load_wav(&a).unwrap();
    assert_eq!(clip.len(), 16000);
    // -20 dBFS default peak
    assert!(clip.peak() <= 3277, "{}", clip.peak());
    let prov = json(&dir.path().join("a.wav.provenance.json"));
    assert_eq!(prov["command"], "gen-noise");
    assert_eq!(prov["seeds"]["noise"], 3);
    assert_eq!(prov["artifacts"][0]["file"], "a.wav");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "peak_dbfs = -6.0\nsnr_db = 0.0\n[seeds]\ndata = 1\nnoise = 2\ngan = 3\nattack = 4\n",
    )
    .unwrap();
    let from_file = dir.path().join("file.wav");
    let from_flag = dir.path().join("flag.wav");
    assert!(soundmask(&[
        "gen-noise",
        "--kind",
        "white",
        "--config",
        p(&cfg),
        "--out",
        p(&from_file)
    ])
    .status
    .success());
    assert!(soundmask(&[
        "gen-noise",
        "--kind",
        "white",
        "--config",
        p(&cfg),
        "--peak-dbfs",
        "-12",
        "--out",
        p(&from_flag)
    ])
    .status
    .success());
    let peak_file = load_wav(&from_file).unwrap().peak();
    let peak_flag = load_wav(&from_flag).unwrap().peak();
    assert!(peak_file > 13000 && peak_file <= 16423, "{peak_file}");
    assert!(peak_flag > 6000 && peak_flag <= 8231, "{peak_flag}");
    let prov = json(&dir.path().join("flag.wav.provenance.json"));
    assert_eq!(prov["config"]["peak_dbfs"], -12.0);
    assert_eq!(prov["config"]["snr_db"], 0.0);
    assert_eq!(prov["seeds"]["attack"], 4);
    assert!(prov["config"].get("out").is_none());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "snr = 3.0\n").unwrap();
    let out = dir.path().join("n.wav");
    let o = soundmask(&[
        "gen-noise",
        "--kind",
        "white",
        "--config",
        p(&cfg),
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("snr"));
}

#[test]
fn ingest_mitigate_measure_attack_chain() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = soundmask(&["ingest", "--scenario", "MGI", "--out", p(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = json(&data.join("MGI/manifest.json"));
    let records = manifest["records"].as_array().unwrap();
    assert_eq!(records.len(), 200);
    assert_eq!(records.iter().filter(|r| r["split"] == "test").count(), 30);
    assert!(data.join("provenance.json").exists());

    let masked = dir.path().join("masked");
    let o = soundmask(&[
        "mitigate",
        "--in",
        p(&data),
        "--noise",
        "white",
        "--snr-db",
        "0",
        "--out",
        p(&masked),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        json(&masked.join("MGI/manifest.json"))["records"]
            .as_array()
            .unwrap()
            .len(),
        200
    );

    let clean_r = dir.path().join("clean.json");
    let masked_r = dir.path().join("masked.json");
    for (input, out) in [
        (data.join("MGI/test"), &clean_r),
        (masked.join("MGI/test"), &masked_r),
    ] {
        let o = soundmask(&["measure-randomness", "--in", p(&input), "--out", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let clean = json(&clean_r)["aggregate"]["combined"].as_f64().unwrap();
    let mixed = json(&masked_r)["aggregate"]["combined"].as_f64().unwrap();
    assert!(
        mixed > clean,
        "mixing white noise at 0 dB raises randomness: {clean} -> {mixed}"
    );

    let run = dir.path().join("attack");
    let o = soundmask(&[
        "attack",
        "--family",
        "cnn",
        "--scenario",
        "MGI",
        "--condition",
        "white",
        "--data",
        p(&data),
        "--epochs",
        "2",
        "--out",
        p(&run),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let result = json(&run.join("result.json"));
    assert_eq!(result["noise"], "white");
    assert_eq!(result["result"]["samples"], 30);
    assert!(run.join("model.sma").exists());
    assert_eq!(
        json(&run.join("provenance.json"))["artifacts"]
            .as_array()
            .unwrap()
            .len(),
        3
    );
}

#[test]
fn demo_outputs_rebuild_through_evaluate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo");
    let o = soundmask(&[
        "demo",
        "--steps",
        "2",
        "--epochs",
        "1",
        "--scenario",
        "MGI",
        "--scenario",
        "SEI",
        "--out",
        p(&demo),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "report.json",
        "report.schema.json",
        "inputs.json",
        "figures/bia.svg",
        "gan/checkpoint.smg",
        "provenance.json",
    ] {
        assert!(demo.join(f).exists(), "{f}");
    }

    let gen = dir.path().join("gan.wav");
    let ckpt = demo.join("gan/checkpoint.smg");
    assert!(soundmask(&[
        "gen-noise",
        "--kind",
        "gan",
        "--ckpt",
        p(&ckpt),
        "--out",
        p(&gen)
    ])
    .status
    .success());
    assert_eq!(load_wav(&gen).unwrap().len(), 32000);

    let rebuilt = dir.path().join("rebuilt");
    let o = soundmask(&[
        "evaluate",
        "--in",
        p(&demo.join("inputs.json")),
        "--out",
        p(&rebuilt),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(demo.join("report.json")).unwrap(),
        std::fs::read(rebuilt.join("report.json")).unwrap()
    );

    let again = dir.path().join("again");
    let o = soundmask(&["report", "--in", p(&demo), "--out", p(&again)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(demo.join("figures/bia.svg")).unwrap(),
        std::fs::read(again.join("figures/bia.svg")).unwrap()
    );

    let mut tampered = json(&demo.join("report.json"));
    tampered["metrics"]["mitigation"]["cells"][0]["delta"] = serde_json::json!(0.5);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, tampered.to_string()).unwrap();
    let o = soundmask(&[
        "report",
        "--in",
        p(&bad),
        "--out",
        p(&dir.path().join("bad")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("metrics.mitigation.cells[0]"));
}

#[test]
fn train_gan_writes_checkpoint_trace_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("g.smg");
    let o = soundmask(&[
        "train-gan",
        "--steps",
        "1",
        "--seed",
        "2",
        "--out",
        p(&ckpt),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(ckpt.exists());
    assert!(dir.path().join("g.smg.trace.json").exists());
    let prov = json(&dir.path().join("g.smg.provenance.json"));
    assert_eq!(prov["config"]["gan_steps"], 1);
    assert_eq!(prov["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn demo_with_one_inference_scenario_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = soundmask(&[
        "demo",
        "--scenario",
        "MGI",
        "--steps",
        "1",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("two inference scenarios"));
}
