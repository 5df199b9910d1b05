//! The experiment pipeline behind each subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use advtext_core::advgen::{attack_success_rate, build_substitution_table, generate_adversarial};
use advtext_core::error::{Error, Result};
use advtext_core::io::{
    load_checkpoint, load_perturbation, save_checkpoint, save_perturbation, Checkpoint, FileMeta,
    PerturbationFile,
};
use advtext_core::metrics::{accuracy, ni_vocab, AttackCell, AttackReport};
use advtext_core::model::{train_classifier, ClassifierTrainConfig};
use advtext_core::perturb::{
    apply_sweep, train_perturbation, AttackMethod, PerturbationKind, SweepResult,
};
use advtext_core::report::{
    attack_report_to_text, data_ratio_report_to_text, ni_report_to_text, samples_to_text,
    DataRatioReport, DataRatioRow,
};
use advtext_core::text::{
    encode_examples, load_tsv, load_tsv_with_labels, split_train_eval, subsample, DatasetSplit,
    Vocabulary,
};

use crate::config::RunConfig;

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn labels_to_text(labels: &[String]) -> String {
    let mut out = String::new();
    for (id, label) in labels.iter().enumerate() {
        out.push_str(&format!("{label}\t{id}\n"));
    }
    out
}

fn labels_from_text(text: &str) -> Result<Vec<String>> {
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (label, id) = line.split_once('\t').ok_or(Error::Parse {
            line: i + 1,
            message: "expected label<TAB>id".into(),
        })?;
        let id: usize = id.parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("bad label id {id:?}"),
        })?;
        if id != labels.len() {
            return Err(Error::Parse {
                line: i + 1,
                message: "label ids must be dense and ordered".into(),
            });
        }
        labels.push(label.to_string());
    }
    if labels.len() < 2 {
        return Err(Error::Format(
            "label file needs at least two classes".into(),
        ));
    }
    Ok(labels)
}

/// Default checkpoint location for a run: `<out>/classifier.ckpt`.
pub fn default_ckpt(config: &RunConfig) -> PathBuf {
    config.out_dir.join("classifier.ckpt")
}

/// Vocabulary and label map live next to the checkpoint they belong to.
struct Artifacts {
    vocab: Vocabulary,
    labels: Vec<String>,
    ckpt: Checkpoint,
}

fn load_artifacts(ckpt_path: &Path) -> Result<Artifacts> {
    let dir = ckpt_path.parent().unwrap_or(Path::new("."));
    let vocab = Vocabulary::load(&dir.join("vocab.tsv"))?;
    let labels_path = dir.join("labels.tsv");
    let labels = labels_from_text(
        &fs::read_to_string(&labels_path).map_err(|e| Error::io(&labels_path, e))?,
    )?;
    let ckpt = load_checkpoint(ckpt_path)?;
    ckpt.validate_vocab(&vocab)?;
    Ok(Artifacts {
        vocab,
        labels,
        ckpt,
    })
}

/// Loads the train file, re-derives the train/eval split, encodes everything
/// with an existing vocabulary and label map, and attaches the test file
/// when the command needs one.
fn prepare_split(
    config: &RunConfig,
    vocab: &Vocabulary,
    labels: &[String],
    with_test: bool,
) -> Result<DatasetSplit> {
    let raw = load_tsv_with_labels(&config.train_tsv, &config.schema(), labels)?;
    let (train_raw, eval_raw) = split_train_eval(&raw, config.eval_ratio, config.seed)?;
    let test = if with_test {
        let path = config.test_tsv.as_ref().expect("validated by caller");
        encode_examples(
            vocab,
            &load_tsv_with_labels(path, &config.schema(), labels)?,
        )
    } else {
        Vec::new()
    };
    Ok(DatasetSplit {
        train: encode_examples(vocab, &train_raw),
        eval: encode_examples(vocab, &eval_raw),
        test,
    })
}

pub fn cmd_train_classifier(config: &RunConfig) -> Result<()> {
    config.validate(false)?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let config_hash = config.config_hash();
    println!("config {config_hash:016x}, seed {}", config.seed);

    let raw = load_tsv(&config.train_tsv, &config.schema())?;
    if raw.label_names.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "training data has {} distinct labels, need at least 2",
            raw.label_names.len()
        )));
    }
    let corpus: Vec<Vec<String>> = raw.examples.iter().map(|ex| ex.tokens.clone()).collect();
    let vocab = Vocabulary::build(&corpus, config.min_count);
    let (train_raw, eval_raw) = split_train_eval(&raw.examples, config.eval_ratio, config.seed)?;
    let train = encode_examples(&vocab, &train_raw);
    let eval = encode_examples(&vocab, &eval_raw);

    let train_config = ClassifierTrainConfig {
        vocab_size: vocab.len(),
        num_classes: raw.label_names.len(),
        embed_dim: config.embed_dim,
        hidden_dim: config.hidden_dim,
        learning_rate: config.classifier_lr,
        epochs: config.classifier_epochs,
        batch_size: config.classifier_batch,
        optimizer: config.classifier_optimizer_kind(),
        early_stop_patience: config.classifier_patience,
        seed: config.seed,
    };
    let params = train_classifier(&train, &eval, &train_config)?;
    let eval_accuracy_text = if eval.is_empty() {
        "none".to_string()
    } else {
        accuracy(&params, &eval, None)?.to_string()
    };

    vocab.save(&config.out_dir.join("vocab.tsv"))?;
    write_file(
        &config.out_dir.join("labels.tsv"),
        &labels_to_text(&raw.label_names),
    )?;
    let ckpt = Checkpoint {
        meta: FileMeta {
            config_hash,
            seed: config.seed,
        },
        vocab_hash: vocab.hash(),
        params,
    };
    let ckpt_path = default_ckpt(config);
    save_checkpoint(&ckpt_path, &ckpt)?;

    let log = format!(
        "# report=train-log v1\n# config_hash={config_hash:016x}\n# seed={}\n\
         n_train={}\nn_eval={}\nvocab_size={}\nnum_classes={}\nfinal_eval_accuracy={}\n",
        config.seed,
        train.len(),
        eval.len(),
        vocab.len(),
        raw.label_names.len(),
        eval_accuracy_text,
    );
    write_file(&config.out_dir.join("train_log.txt"), &log)?;

    println!("wrote {}", ckpt_path.display());
    println!("final eval accuracy: {eval_accuracy_text}");
    Ok(())
}

fn pert_file_name(method: AttackMethod, eps: f64) -> String {
    format!("pert_{}_{}.bin", method.label().to_lowercase(), eps)
}

fn sweep_to_report(
    sweep: &SweepResult,
    config_hash: u64,
    seed: u64,
    n_train: usize,
    n_eval: usize,
    n_test: usize,
) -> AttackReport {
    AttackReport {
        config_hash,
        seed,
        n_train,
        n_eval,
        n_test,
        clean_accuracy: sweep.clean_accuracy,
        cells: sweep
            .cells
            .iter()
            .map(|cell| AttackCell {
                method: cell.method.label().to_string(),
                eps: cell.eps,
                accuracy: cell.accuracy,
                seed: cell.seed,
            })
            .collect(),
    }
}

pub fn cmd_attack(config: &RunConfig, ckpt_path: &Path) -> Result<()> {
    config.validate(true)?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let config_hash = config.config_hash();
    println!("config {config_hash:016x}, seed {}", config.seed);

    let artifacts = load_artifacts(ckpt_path)?;
    let params = &artifacts.ckpt.params;
    let data = prepare_split(config, &artifacts.vocab, &artifacts.labels, true)?;

    let sweep = apply_sweep(
        params,
        &data.train,
        &data.eval,
        &data.test,
        &AttackMethod::ALL,
        &config.eps_grid,
        &config.perturb_config(),
    )?;

    for cell in &sweep.cells {
        let path = config.out_dir.join(pert_file_name(cell.method, cell.eps));
        save_perturbation(
            &path,
            &PerturbationFile {
                meta: FileMeta {
                    config_hash,
                    seed: cell.seed,
                },
                perturbation: cell.perturbation.clone(),
            },
        )?;
    }

    let report = sweep_to_report(
        &sweep,
        config_hash,
        config.seed,
        data.train.len(),
        data.eval.len(),
        data.test.len(),
    );
    let report_path = config.out_dir.join("attack_report.tsv");
    write_file(&report_path, &attack_report_to_text(&report))?;

    println!("clean accuracy: {}", report.clean_accuracy);
    for cell in &report.cells {
        println!(
            "{} eps={}: accuracy {}",
            cell.method, cell.eps, cell.accuracy
        );
    }
    println!("wrote {}", report_path.display());
    Ok(())
}

pub fn cmd_ni(config: &RunConfig, ckpt_path: &Path, pert_path: &Path, k: usize) -> Result<()> {
    config.validate(false)?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    println!("config {:016x}, seed {}", config.config_hash(), config.seed);

    let artifacts = load_artifacts(ckpt_path)?;
    let pert = load_perturbation(pert_path)?;
    pert.perturbation.validate_against(&artifacts.ckpt.params)?;

    let report = ni_vocab(
        &artifacts.ckpt.params.embeddings,
        &pert.perturbation,
        k,
        &artifacts.vocab,
    )?;
    let text = ni_report_to_text(&report, config.config_hash(), config.seed);
    let path = config.out_dir.join("ni_report.tsv");
    write_file(&path, &text)?;

    println!(
        "ni aggregate (k={}, eps={}, kind={}): {}",
        report.k,
        report.eps,
        report.kind.label(),
        report.aggregate
    );
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_data_ratio(config: &RunConfig, ckpt_path: &Path, ratios: &[f64]) -> Result<()> {
    config.validate(true)?;
    if ratios.is_empty() || ratios.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::InvalidInput(
            "ratios must be in (0, 1], comma-separated".into(),
        ));
    }
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let config_hash = config.config_hash();
    println!("config {config_hash:016x}, seed {}", config.seed);

    let artifacts = load_artifacts(ckpt_path)?;
    let params = &artifacts.ckpt.params;
    let data = prepare_split(config, &artifacts.vocab, &artifacts.labels, true)?;
    let clean_accuracy = accuracy(params, &data.test, None)?;

    let perturb_config = config.perturb_config();
    let mut rows = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let sub = subsample(&data.train, ratio, config.seed)?;
        let n_train = sub.len();
        let delta = train_perturbation(
            params,
            &sub,
            &data.eval,
            &perturb_config,
            PerturbationKind::Single,
        )?;
        let acc = accuracy(params, &data.test, Some(&delta))?;
        println!("ratio {ratio}: n_train {n_train}, accuracy {acc}");
        rows.push(DataRatioRow {
            ratio,
            n_train,
            accuracy: acc,
            seed: config.seed,
        });
    }

    let report = DataRatioReport {
        config_hash,
        seed: config.seed,
        eps: config.eps,
        clean_accuracy,
        rows,
    };
    let path = config.out_dir.join("data_ratio_report.tsv");
    write_file(&path, &data_ratio_report_to_text(&report))?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_generate_samples(config: &RunConfig, ckpt_path: &Path, pert_path: &Path) -> Result<()> {
    config.validate(true)?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    println!("config {:016x}, seed {}", config.config_hash(), config.seed);

    let artifacts = load_artifacts(ckpt_path)?;
    let params = &artifacts.ckpt.params;
    let pert = load_perturbation(pert_path)?;
    pert.perturbation.validate_against(params)?;

    let data = prepare_split(config, &artifacts.vocab, &artifacts.labels, true)?;
    let table = build_substitution_table(&params.embeddings, &pert.perturbation, &artifacts.vocab)?;

    let mut samples = Vec::new();
    let mut skipped = 0usize;
    for example in &data.test {
        match generate_adversarial(example, &table, params, &artifacts.vocab)? {
            Some(sample) => samples.push(sample),
            None => skipped += 1,
        }
    }
    let success = attack_success_rate(&data.test, &table, params, &artifacts.vocab)?;

    let vocab = &artifacts.vocab;
    let decode = |id: usize| vocab.decode(id).unwrap_or("?").to_string();
    let text = samples_to_text(
        &samples,
        skipped,
        config.config_hash(),
        config.seed,
        &decode,
    );
    let path = config.out_dir.join("samples.tsv");
    write_file(&path, &text)?;

    println!(
        "generated {} samples ({} skipped), success rate {}{}",
        samples.len(),
        skipped,
        success.rate,
        if success.degenerate {
            " (no clean-correct examples)"
        } else {
            ""
        }
    );
    println!("wrote {}", path.display());
    Ok(())
}
