use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use gramforge::oracle::{sequence_score, train_ngram_oracle, TokenSequence};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

const CORPUS: &str = "she answered quickly\nhe answered slowly\nshe ran quickly\nthey ran home\n";

fn gramforge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gramforge"))
        .current_dir(dir)
        .env_remove("GRAMFORGE_CONFIG")
        .env_remove("RUST_LOG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("corpus.txt"), CORPUS).unwrap();
    fs::copy(data("category_corpus.txt"), dir.path().join("cc.txt")).unwrap();
    dir
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn score_prints_the_three_log_probabilities() {
    let dir = setup();
    let out = gramforge(dir.path(), &["score", "she answered quickly", "--corpus", "corpus.txt", "--order", "2"]);
    assert!(out.status.success(), "{out:?}");
    let corpus: Vec<TokenSequence> = CORPUS.lines().map(|l| TokenSequence::parse(l).unwrap()).collect();
    let oracle = train_ngram_oracle(&corpus, 2, 0.1).unwrap();
    let expected = sequence_score(&oracle, &TokenSequence::parse("she answered quickly").unwrap()).unwrap();
    let text = stdout(&out);
    for (label, value) in [
        ("forward", expected.forward_logprob),
        ("backward", expected.backward_logprob),
        ("combined", expected.combined_logprob),
    ] {
        let line = text.lines().find(|l| l.trim_start().starts_with(label)).expect(label);
        let printed: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!((printed - value).abs() < 1e-6, "{label}: {printed} vs {value}");
    }
    let row: Value = serde_json::from_str(fs::read_to_string(dir.path().join("gramforge-out/scores.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(row["combined_logprob"].as_f64().unwrap(), expected.combined_logprob);
}

#[test]
fn parse_prints_the_figure_linkage() {
    let dir = setup();
    let out = gramforge(dir.path(), &["parse", "the small kids play football", "--grammar", "poc.dict"]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    for link in ["the[0] -- kids[2]", "small[1] -- kids[2]", "kids[2] -- play[3]", "play[3] -- football[4]"] {
        assert!(text.contains(link), "{text}");
    }
    let linkage: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("gramforge-out/linkage.json")).unwrap()).unwrap();
    assert_eq!(linkage["links"].as_array().unwrap().len(), 4);
}

#[test]
fn poc_rejects_every_spurious_rule() {
    let dir = setup();
    let start = Instant::now();
    let out = gramforge(dir.path(), &["poc", "--out", "poc"]);
    assert!(out.status.success(), "{out:?}");
    assert!(start.elapsed() < Duration::from_secs(300));
    let text = stdout(&out);
    assert!(text.contains("spurious rejected: 6/6"), "{text}");
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("poc/poc_report.json")).unwrap()).unwrap();
    assert_eq!(report["spurious_rejected"], 6);
    assert_eq!(report["correct_total"], 15);
    assert!(report["correct_rejected"].as_u64().unwrap() <= 3);
}

#[test]
fn exit_codes_classify_failures() {
    let dir = setup();
    let p = dir.path();
    let code = |args: &[&str]| gramforge(p, args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["matrix"]), 1);
    assert_eq!(code(&["score", "hi", "--endpoint", "http://127.0.0.1:1"]), 1);
    assert_eq!(code(&["score", "hi", "--corpus", "missing.txt"]), 2);
    assert_eq!(code(&["score", "hi", "--config", "missing.toml"]), 2);
    fs::write(p.join("bad.toml"), "[oracle]\nkind = \"ngram\"\norder = 0\n").unwrap();
    assert_eq!(code(&["score", "hi", "--corpus", "corpus.txt", "--config", "bad.toml"]), 2);
    fs::write(p.join("typo.toml"), "seeed = 1\n").unwrap();
    assert_eq!(code(&["poc", "--config", "typo.toml"]), 2);
    let closed = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let endpoint = format!("http://{closed}");
    assert_eq!(code(&["score", "hi", "--oracle", "remote", "--endpoint", &endpoint, "--timeout", "2"]), 3);
    assert_eq!(code(&["parse", "kids small the", "--grammar", "poc.dict"]), 4);
    fs::write(p.join("broken.dict"), "kids small-;\n").unwrap();
    assert_eq!(code(&["parse", "kids", "--grammar", "broken.dict"]), 4);
}

#[test]
fn config_file_comes_from_the_environment_and_flags_win() {
    let dir = setup();
    let p = dir.path();
    fs::write(p.join("c.toml"), "seed = 7\ncorpus = \"corpus.txt\"\n[oracle]\nkind = \"ngram\"\norder = 2\n").unwrap();
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_gramforge"))
            .current_dir(p)
            .env("GRAMFORGE_CONFIG", "c.toml")
            .args(args)
            .output()
            .unwrap()
    };
    assert!(run(&["score", "she ran", "--out", "a"]).status.success());
    let a = manifest(&p.join("a"));
    assert_eq!(a["seed"], 7);
    assert_eq!(a["config"]["oracle"]["order"], 2);
    assert_eq!(a["config"]["induction"]["seed"], 7);
    assert!(run(&["score", "she ran", "--out", "b", "--seed", "3", "--order", "3"]).status.success());
    let b = manifest(&p.join("b"));
    assert_eq!(b["seed"], 3);
    assert_eq!(b["config"]["oracle"]["order"], 3);
    assert_ne!(a["config_hash"], b["config_hash"]);
}

#[test]
fn manifest_lists_artifact_hashes() {
    let dir = setup();
    let out = gramforge(dir.path(), &["matrix", "--corpus", "corpus.txt", "--out", "m"]);
    assert!(out.status.success(), "{out:?}");
    let m = manifest(&dir.path().join("m"));
    assert_eq!(m["format_version"], 1);
    assert_eq!(m["command"]["name"], "matrix");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let listed = m["artifacts"].as_array().unwrap();
    assert_eq!(listed.len(), 2);
    for a in listed {
        let bytes = fs::read(dir.path().join("m").join(a["path"].as_str().unwrap())).unwrap();
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(a["sha256"].as_str().unwrap(), digest);
    }
}

#[test]
fn rerun_reproduces_identical_artifacts() {
    let dir = setup();
    let p = dir.path();
    let first = gramforge(p, &["categories", "--corpus", "cc.txt", "--order", "2", "--seed", "5", "--out", "one"]);
    assert!(first.status.success(), "{first:?}");
    let again = gramforge(p, &["rerun", "one/manifest.json", "--out", "two", "--jobs", "2"]);
    assert!(again.status.success(), "{again:?}");
    assert_eq!(artifacts(&p.join("one")), artifacts(&p.join("two")));
    assert_eq!(stdout(&first), stdout(&again));
}

#[test]
fn generated_gold_corpus_induces_the_noun_phrase_rule() {
    let dir = setup();
    let p = dir.path();
    let generated = gramforge(p, &["generate", "--grammar", "gold.dict", "--count", "300", "--seed", "1", "--out", "gen"]);
    assert!(generated.status.success(), "{generated:?}");
    let lexicon = data("gold_lexicon.json");
    let induced = gramforge(
        p,
        &[
            "induce",
            "--corpus",
            "gen/sentences.txt",
            "--lexicon",
            lexicon.to_str().unwrap(),
            "--terminator",
            ".",
            "--out",
            "ind",
        ],
    );
    assert!(induced.status.success(), "{induced:?}");
    let grammar = fs::read_to_string(p.join("ind/grammar.dict")).unwrap();
    assert!(grammar.contains("adj- & det-"), "{grammar}");
    let parsed = gramforge(
        p,
        &[
            "parse",
            "the small kids eat the candy .",
            "--grammar",
            "ind/grammar.dict",
            "--lexicon",
            "ind/lexicon.json",
            "--out",
            "parsed",
        ],
    );
    assert!(parsed.status.success(), "{parsed:?}\n{grammar}");
}

#[test]
fn eval_rule_reports_a_verdict() {
    let dir = setup();
    let p = dir.path();
    assert!(gramforge(p, &["generate", "--grammar", "gold.dict", "--count", "2000", "--out", "gen"]).status.success());
    let out = gramforge(
        p,
        &["eval-rule", "subj: adj- & det- & verb+", "--grammar", "gold.dict", "--corpus", "gen/sentences.txt", "--out", "ev"],
    );
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).starts_with("accept"), "{}", stdout(&out));
    let report: Value = serde_json::from_str(&fs::read_to_string(p.join("ev/report.json")).unwrap()).unwrap();
    assert_eq!(report["mutated_rule"], "subj: adj+ & det+ & verb-");
}
