//! Shared fixtures for the CLI and acceptance suites: a synthetic two-class
//! corpus generator, config writing, and a runner for the compiled binary.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Two-class synthetic sentiment-style corpus. Each example mixes a few
/// class-indicator words with shared filler words, so a mean-pooling
/// classifier separates it cleanly while no single token decides the label
/// on its own.
pub struct CorpusSpec {
    pub n_class_words: usize,
    pub n_filler_words: usize,
    pub indicators_per_example: usize,
    pub fillers_per_example: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        // Two indicator words among six fillers keeps the trained
        // classifier's pooled-space margins small enough that perturbations
        // with norms well below the embedding scale still flip predictions.
        CorpusSpec {
            n_class_words: 25,
            n_filler_words: 20,
            indicators_per_example: 2,
            fillers_per_example: 6,
        }
    }
}

pub fn generate_corpus(spec: &CorpusSpec, n: usize, seed: u64) -> Vec<(String, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class_words: [Vec<String>; 2] = [
        (0..spec.n_class_words)
            .map(|i| format!("good{i:02}"))
            .collect(),
        (0..spec.n_class_words)
            .map(|i| format!("bad{i:02}"))
            .collect(),
    ];
    let fillers: Vec<String> = (0..spec.n_filler_words)
        .map(|i| format!("word{i:02}"))
        .collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let mut tokens: Vec<String> = Vec::new();
        for _ in 0..spec.indicators_per_example {
            tokens.push(class_words[label][rng.random_range(0..spec.n_class_words)].clone());
        }
        for _ in 0..spec.fillers_per_example {
            tokens.push(fillers[rng.random_range(0..spec.n_filler_words)].clone());
        }
        tokens.shuffle(&mut rng);
        out.push((tokens.join(" "), label));
    }
    out
}

pub fn write_tsv(path: &Path, rows: &[(String, usize)]) {
    let mut text = String::new();
    for (sentence, label) in rows {
        text.push_str(&format!("{sentence}\t{label}\n"));
    }
    fs::write(path, text).unwrap();
}

/// Writes train/test TSVs and a config file into `dir`; returns the config
/// path. `extra` lines are appended verbatim and may override earlier keys
/// only by being different keys (the parser rejects duplicates of nothing;
/// last assignment wins since keys are applied in order).
pub fn setup_run(dir: &Path, n_train: usize, n_test: usize, seed: u64, extra: &str) -> PathBuf {
    let spec = CorpusSpec::default();
    let train = generate_corpus(&spec, n_train, seed ^ 0x1111);
    let test = generate_corpus(&spec, n_test, seed ^ 0x2222);
    write_tsv(&dir.join("train.tsv"), &train);
    write_tsv(&dir.join("test.tsv"), &test);
    let config = format!(
        "train_tsv = {}\n\
         test_tsv = {}\n\
         text_cols = 0\n\
         label_col = 1\n\
         classifier_epochs = 8\n\
         attack_epochs = 15\n\
         seed = {seed}\n\
         out_dir = {}\n\
         {extra}\n",
        dir.join("train.tsv").display(),
        dir.join("test.tsv").display(),
        dir.join("out").display(),
    );
    let config_path = dir.join("run.conf");
    fs::write(&config_path, config).unwrap();
    config_path
}

/// Runs the compiled `advtext` binary with the given arguments.
pub fn run_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_advtext"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

pub fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}
