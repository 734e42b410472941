use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use asmt_core::bleu::{corpus_bleu, write_report, DEFAULT_MAX_N};
use asmt_core::corpus::{
    load_parallel, read_lines, tokenize, tokenize_parallel, train_truecaser, truecase, ParallelCorpus, SentencePair,
};
use asmt_core::decoder::tune_weights;
use asmt_core::pipeline::{train, Translator};
use asmt_core::{NGramModel, PhraseTable, TransliterationTable, TruecaseModel};
use rayon::prelude::*;

use crate::config::{run_config, with_weights, SystemConfig};

pub const LM_FILE: &str = "lm.arpa";
pub const PHRASE_FILE: &str = "phrase-table.txt";
pub const TRUECASE_FILE: &str = "truecase.txt";
pub const RUN_CONFIG: &str = "run.ini";

pub fn cmd_train(config: &Path) -> Result<()> {
    let cfg = SystemConfig::load(config).context("config")?;
    let corpus = load_parallel(&cfg.source, &cfg.target, &cfg.source_lang, &cfg.target_lang).context("load")?;
    eprintln!("load: {} sentence pairs", corpus.len());

    let models = train(&corpus, &cfg.train).context("train")?;
    let s = &models.summary;
    eprintln!("clean: kept {} of {} pairs", s.pairs_kept, s.pairs_loaded);
    eprintln!("lm: order {}, {} n-grams", cfg.train.lm_order, s.lm_entries);
    for (name, trace) in [("forward", &s.forward_trace), ("reverse", &s.reverse_trace)] {
        let lls: Vec<String> = trace.iter().map(|t| format!("{:.4}", t.log_likelihood)).collect();
        eprintln!("align: {name} EM log-likelihood {}", lls.join(" "));
    }
    eprintln!("phrase: {} phrase pairs", s.phrase_entries);

    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).with_context(|| format!("write: creating {}", out.display()))?;
    models.lm.write_arpa(&out.join(LM_FILE)).context("write")?;
    models.phrase_table.write(&out.join(PHRASE_FILE)).context("write")?;
    models.source_truecaser.write(&out.join(TRUECASE_FILE)).context("write")?;
    let run = run_config(
        &cfg,
        &[("lm", LM_FILE), ("phrase_table", PHRASE_FILE), ("truecase", TRUECASE_FILE)],
    );
    let run_path = out.join(RUN_CONFIG);
    run.write_to_file(&run_path)
        .with_context(|| format!("write: {}", run_path.display()))?;
    eprintln!("write: artifacts and {} in {}", RUN_CONFIG, out.display());
    Ok(())
}

fn load_translator(cfg: &SystemConfig) -> Result<Translator> {
    let model = cfg
        .model
        .as_ref()
        .ok_or_else(|| anyhow!("config has no [model] section; use the run config written by train"))?;
    let lm = NGramModel::read_arpa(&model.lm).context("load: language model")?;
    let phrase_table = PhraseTable::read(&model.phrase_table).context("load: phrase table")?;
    let source_truecaser = TruecaseModel::read(&model.truecase).context("load: truecase model")?;
    let translit = if cfg.translit_enabled {
        let table = match &cfg.translit_table {
            Some(p) => TransliterationTable::load_table(p).context("load: transliteration table")?,
            None => TransliterationTable::bundled(),
        };
        Some((table, cfg.target_script.clone()))
    } else {
        None
    };
    let mut decoder = cfg.decoder;
    decoder.max_phrase_len = phrase_table.max_phrase_len().max(1);
    Ok(Translator {
        source_truecaser,
        lm,
        phrase_table,
        weights: cfg.weights,
        decoder,
        translit,
    })
}

pub fn cmd_translate(config: &Path, input: impl BufRead, mut output: impl Write) -> Result<()> {
    let cfg = SystemConfig::load(config).context("config")?;
    let translator = load_translator(&cfg)?;
    let lines: Vec<String> = input
        .lines()
        .collect::<std::io::Result<_>>()
        .context("input: reading lines")?;

    let results: Vec<String> = lines
        .par_iter()
        .enumerate()
        .map(|(i, line)| match translator.translate_line(line) {
            Ok(out) => out,
            Err(e) => {
                eprintln!("warning: line {}: {e}; copying input", i + 1);
                line.clone()
            }
        })
        .collect();
    for line in results {
        writeln!(output, "{line}").context("output")?;
    }
    output.flush().context("output")?;
    Ok(())
}

pub fn cmd_score(hyp: &Path, reference: &Path) -> Result<String> {
    let hyps = read_lines(hyp).context("score: hypotheses")?;
    let refs = read_lines(reference).context("score: references")?;
    if hyps.len() != refs.len() {
        bail!("score: {} hypothesis lines but {} reference lines", hyps.len(), refs.len());
    }
    let hyps: Vec<_> = hyps.iter().map(|l| tokenize(l)).collect();
    let refs: Vec<_> = refs.iter().map(|l| tokenize(l)).collect();
    let report = corpus_bleu(&hyps, &refs, DEFAULT_MAX_N).context("score")?;
    Ok(write_report(&report))
}

/// Path of the tuned config written next to `config`.
pub fn tuned_path(config: &Path) -> std::path::PathBuf {
    let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("config");
    config.with_file_name(format!("{stem}.tuned.ini"))
}

pub fn cmd_tune(config: &Path, dev_src: &Path, dev_ref: &Path) -> Result<std::path::PathBuf> {
    let cfg = SystemConfig::load(config).context("config")?;
    let translator = load_translator(&cfg)?;
    let src = read_lines(dev_src).context("tune: dev source")?;
    let refs = read_lines(dev_ref).context("tune: dev reference")?;
    let dev = tokenize_parallel(&src, &refs, &cfg.source_lang, &cfg.target_lang).context("tune")?;
    if dev.is_empty() {
        bail!("tune: dev set is empty");
    }

    // references are truecased like the LM training targets
    let train_targets = read_lines(&cfg.target).context("tune: training target")?;
    let target_truecaser = train_truecaser(&train_targets.iter().map(|l| tokenize(l)).collect::<Vec<_>>());
    let dev = ParallelCorpus::new(
        dev.pairs
            .iter()
            .map(|p| {
                SentencePair::new(
                    truecase(&p.source, &translator.source_truecaser),
                    truecase(&p.target, &target_truecaser),
                )
            })
            .collect(),
        dev.source_lang.clone(),
        dev.target_lang.clone(),
    );

    let result = tune_weights(&dev, &translator.phrase_table, &translator.lm, &cfg.grid, &translator.decoder)
        .context("tune")?;
    println!("{:>8} {:>8} {:>8} {:>8} {:>8}", "lm", "tm_fwd", "tm_rev", "wp", "BLEU");
    for (w, bleu) in &result.table {
        println!(
            "{:>8} {:>8} {:>8} {:>8} {:>8.2}",
            w.lm, w.tm_fwd, w.tm_rev, w.word_penalty, bleu
        );
    }
    let b = result.best;
    println!(
        "best: lm={} tm_fwd={} tm_rev={} word_penalty={} BLEU={:.2}",
        b.lm, b.tm_fwd, b.tm_rev, b.word_penalty, result.best_bleu
    );

    let out = tuned_path(config);
    with_weights(&cfg, &result.best)
        .write_to_file(&out)
        .with_context(|| format!("tune: writing {}", out.display()))?;
    eprintln!("tune: wrote {}", out.display());
    Ok(out)
}
