use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CORPUS: &str = "\
the storm came over the hills .
the dog ran home .
a storm broke the old house .
the dog slept in the calm sun .
the storm killed the crops .
a girl found a dog .
";

const LEXICON: &str = "word\tvalence\tarousal\tdominance
storm\t0.2\t0.9\t0.5
killed\t0.05\t0.95\t0.4
broke\t0.1\t0.7\t0.4
calm\t0.8\t0.1\t0.5
sun\t0.9\t0.3\t0.5
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twistbeam"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("corpus.txt"), CORPUS).unwrap();
        std::fs::write(dir.path().join("lexicon.tsv"), LEXICON).unwrap();
        std::fs::write(
            dir.path().join("prompts.txt"),
            "the dog ran home .\nthe storm came .\n",
        )
        .unwrap();
        let config = r#"{
            "decode": {"beam_sizes": [2, 4, 8], "fixed_beam": 2, "max_sentence_tokens": 10, "n_target": 4},
            "lexicon": {"path": "lexicon.tsv"},
            "provider": {"kind": "builtin_ngram", "model": "model.json"}
        }"#;
        std::fs::write(dir.path().join("config.json"), config).unwrap();
        let ws = Workspace { dir };
        let out = run(&[
            "train-lm",
            "--corpus",
            p(&ws.path("corpus.txt")),
            "--order",
            "2",
            "--k",
            "0.1",
            "--out",
            p(&ws.path("model.json")),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn generate_is_deterministic_in_both_formats() {
    let ws = Workspace::new();
    let cfg = ws.path("config.json");
    let args = [
        "generate",
        "--config",
        p(&cfg),
        "--prompt",
        "the dog ran home .",
        "--seed",
        "7",
        "--json",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let story: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    for key in [
        "prompt",
        "sentences",
        "n_it",
        "trace_ref",
        "metadata",
        "trace",
    ] {
        assert!(story.get(key).is_some(), "missing {key}");
    }
    assert_eq!(story["sentences"].as_array().unwrap().len(), 3);

    let text = run(&args[..args.len() - 1]);
    assert_eq!(code(&text), 0);
    let text = String::from_utf8(text.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(text.lines().filter(|l| l.starts_with("* ")).count(), 1);
}

#[test]
fn overrides_change_the_story_config() {
    let ws = Workspace::new();
    let cfg = ws.path("config.json");
    let base = [
        "generate",
        "--config",
        p(&cfg),
        "--prompt",
        "the storm",
        "--seed",
        "1",
        "--json",
    ];
    let a = run(&base);
    let mut with_set = base.to_vec();
    with_set.extend(["--set", "decode.fixed_beam=3"]);
    let b = run(&with_set);
    assert_eq!(code(&b), 0);
    let ha: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let hb: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_ne!(ha["metadata"]["config_hash"], hb["metadata"]["config_hash"]);
}

#[test]
fn training_ablation_eval_and_analytics() {
    let ws = Workspace::new();
    let cfg = ws.path("config.json");
    let state = ws.path("bandit.json");
    let out = run(&[
        "train-bandit",
        "--config",
        p(&cfg),
        "--prompts",
        p(&ws.path("prompts.txt")),
        "--epochs",
        "2",
        "--seed",
        "3",
        "--out",
        p(&state),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let log: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(log["epoch_mean_payoff"].as_array().unwrap().len(), 2);
    assert!(state.exists());

    let ablate_dir = ws.path("ablate");
    let out = run(&[
        "ablate",
        "--config",
        p(&cfg),
        "--set",
        &format!("bandit.state={:?}", p(&state)),
        "--prompts",
        p(&ws.path("prompts.txt")),
        "--variants",
        "full,fixed2,no_rerank",
        "--seed",
        "5",
        "--out-dir",
        p(&ablate_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
    for name in [
        "beam_by_position.csv",
        "transitions.csv",
        "episodes.jsonl",
        "traces.jsonl",
        "summary.json",
    ] {
        assert!(ablate_dir.join(name).exists(), "{name}");
    }

    let out = run(&[
        "eval",
        "--config",
        p(&cfg),
        "--stories",
        p(&ablate_dir.join("full.stories.jsonl")),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["stories"].as_array().unwrap().len(), 2);
    assert!(report["note"].as_str().unwrap().contains("UNION"));

    let stats_dir = ws.path("stats");
    let out = run(&[
        "trace-stats",
        "--traces",
        p(&ablate_dir.join("traces.jsonl")),
        "--out-dir",
        p(&stats_dir),
        "--beam-sizes",
        "2,4,8",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(stats_dir.join("transitions.csv")).unwrap();
    assert!(csv.starts_with("from,2,4,8"));

    let out = run(&[
        "regret",
        "--episodes",
        p(&ablate_dir.join("episodes.jsonl")),
        "--beam-sizes",
        "2,4,8",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn twist_histogram_from_labels() {
    let ws = Workspace::new();
    let labels = ws.path("labels.csv");
    std::fs::write(
        &labels,
        "story_id,twist_position,story_length\na,2,5\nb,3,5\nc,3,5\nd,4,5\n",
    )
    .unwrap();
    let out_path = ws.path("twist.json");
    let out = run(&[
        "build-twist-hist",
        "--labels",
        p(&labels),
        "--out",
        p(&out_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dist: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(dist["n_max"], 5);
    assert_eq!(dist["probs"]["3"], 0.5);

    std::fs::write(&labels, "story_id,twist_position,story_length\na,1,5\n").unwrap();
    assert_eq!(
        code(&run(&[
            "build-twist-hist",
            "--labels",
            p(&labels),
            "--out",
            p(&out_path)
        ])),
        2
    );
}

#[test]
fn exit_codes() {
    let ws = Workspace::new();
    let cfg = ws.path("config.json");
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["generate", "--config", p(&cfg)])), 1);
    assert_eq!(
        code(&run(&[
            "ablate",
            "--prompts",
            "x",
            "--out-dir",
            "y",
            "--variants",
            "greedy"
        ])),
        1
    );
    assert_eq!(code(&run(&["--help"])), 0);

    let missing = run(&[
        "generate",
        "--config",
        p(&ws.path("nope.json")),
        "--prompt",
        "a",
    ]);
    assert_eq!(code(&missing), 2);
    let empty_prompt = run(&["generate", "--config", p(&cfg), "--prompt", "   "]);
    assert_eq!(code(&empty_prompt), 2);
    std::fs::write(ws.path("bad.json"), "{\"decode\": {\"beam_sizes\": []}}").unwrap();
    assert_eq!(
        code(&run(&[
            "generate",
            "--config",
            p(&ws.path("bad.json")),
            "--prompt",
            "a"
        ])),
        2
    );

    let remote = run(&[
        "generate",
        "--config",
        p(&cfg),
        "--set",
        "provider={\"kind\":\"remote\",\"endpoint\":\"http://127.0.0.1:9\"}",
        "--prompt",
        "the dog",
    ]);
    assert_eq!(
        code(&remote),
        3,
        "{}",
        String::from_utf8_lossy(&remote.stderr)
    );
}
