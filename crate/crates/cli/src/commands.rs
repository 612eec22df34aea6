use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use gramforge::categories::{
    categories_from_lexicon, category_tag_corpus, cluster_categories, listing, TaggedSentence, WordCategory,
};
use gramforge::corpus::{read_corpus_file, vocabulary};
use gramforge::grammar::{generate_seeded, parse_with, Grammar, Linkage, ParseOptions, Rule};
use gramforge::induction::{
    evaluate_against_references, evaluate_rule, induce, EvaluationMode, EvaluationReport, Verdict,
};
use gramforge::oracle::{
    sequence_score, train_ngram_oracle, Memoized, RemoteOracle, SequenceOracle, SequenceScore, TokenSequence,
};
use gramforge::poc::{full_grammar, gold_grammar, noun_phrase_grammar, run_poc};
use gramforge::probmatrix::{
    build_sense_matrix, expand_corpus, fill_matrix_resume, FillCheckpoint, FillOptions, MatrixTable, ProbMatrix,
};
use gramforge::wsd::{induce_senses, SenseInventory};
use serde::Serialize;

use crate::artifacts::Artifacts;
use crate::config::{OracleSpec, PipelineConfig};
use crate::error::CliError;
use crate::{Command, MatrixFormat};

type Oracle = Box<dyn SequenceOracle>;

pub fn execute(command: &Command, config: &PipelineConfig, out: &mut Artifacts) -> Result<(), CliError> {
    match command {
        Command::Score { sentences } => score(sentences, config, out),
        Command::Matrix { format } => {
            let corpus = require_corpus(config)?;
            let oracle = build_oracle(config, Some(&corpus), out)?;
            let m = fill(&corpus, &oracle, config)?;
            write_matrix(&m, *format, out)?;
            println!("{} rows x {} columns", m.n_rows(), m.n_cols());
            Ok(())
        }
        Command::Wsd => {
            let corpus = require_corpus(config)?;
            let oracle = build_oracle(config, Some(&corpus), out)?;
            let m = fill(&corpus, &oracle, config)?;
            write_matrix(&m, MatrixFormat::Csv, out)?;
            let senses = senses(&m, &corpus, config, out)?;
            for model in senses.iter().filter(|s| s.n_senses() > 1) {
                println!("{}: {} senses", model.word, model.n_senses());
            }
            Ok(())
        }
        Command::Categories => {
            let corpus = require_corpus(config)?;
            let oracle = build_oracle(config, Some(&corpus), out)?;
            let (categories, _) = categorize(&corpus, &oracle, config, out)?;
            print!("{}", listing(&categories));
            Ok(())
        }
        Command::Induce { lexicon, terminator } => {
            let corpus = require_corpus(config)?;
            let oracle = build_oracle(config, Some(&corpus), out)?;
            let tagged = match lexicon {
                Some(path) => {
                    let categories = categories_from_lexicon(&read_lexicon(path)?);
                    let tagged = category_tag_corpus(&corpus, &SenseInventory::default(), &categories, None);
                    out.write_jsonl("tagged.jsonl", &tagged)?;
                    tagged
                }
                None => categorize(&corpus, &oracle, config, out)?.1,
            };
            let induction = induce(&tagged, &oracle, &config.induction, terminator.as_deref())?;
            out.write_jsonl("candidates.jsonl", &induction.candidates)?;
            out.write_jsonl("reports.jsonl", &induction.reports)?;
            out.write("grammar.dict", induction.grammar.to_string().as_bytes())?;
            out.write_json("lexicon.json", induction.grammar.lexicon())?;
            for r in &induction.reports {
                println!("{}", report_line(r));
            }
            let count = |v: Verdict| induction.reports.iter().filter(|r| r.verdict == v).count();
            println!(
                "accepted {}, rejected {}, skipped {}",
                count(Verdict::Accept),
                count(Verdict::Reject),
                count(Verdict::Skip)
            );
            Ok(())
        }
        Command::EvalRule {
            rule,
            grammar,
            lexicon,
            references,
        } => {
            let grammar = load_grammar(grammar, lexicon.as_deref())?;
            let rule = Rule::parse(rule)?;
            let corpus = optional_corpus(config)?;
            let oracle = build_oracle(config, corpus.as_deref(), out)?;
            let references = match (references, config.induction.mode) {
                (Some(path), _) => Some(read_corpus(path)?),
                (None, EvaluationMode::Reference) => Some(corpus.clone().ok_or_else(|| {
                    CliError::Usage("reference mode needs --references or --corpus".into())
                })?),
                (None, EvaluationMode::Mutation) => None,
            };
            let report = match &references {
                Some(refs) => evaluate_against_references(&rule, &grammar, &oracle, refs, &config.induction)?,
                None => evaluate_rule(&rule, &grammar, &oracle, &config.induction)?,
            };
            out.write_json("report.json", &report)?;
            println!("{}", report_line(&report));
            if let Some(m) = &report.mutated_rule {
                println!("mutated: {m}");
            }
            Ok(())
        }
        Command::Generate {
            grammar,
            lexicon,
            anchor,
            count,
        } => {
            let grammar = load_grammar(grammar, lexicon.as_deref())?;
            let anchor = anchor.as_deref().map(Rule::parse).transpose()?;
            let generated = generate_seeded(
                &grammar,
                anchor.as_ref(),
                &config.induction.generation,
                *count,
                config.seed,
                "generate",
            )
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
            let mut text = String::new();
            for g in &generated {
                println!("{}", g.sentence);
                text.push_str(&format!("{}\n", g.sentence));
            }
            out.write("sentences.txt", text.as_bytes())?;
            out.write_jsonl("generated.jsonl", &generated)?;
            Ok(())
        }
        Command::Parse {
            sentence,
            grammar,
            lexicon,
            connected,
        } => {
            let grammar = load_grammar(grammar, lexicon.as_deref())?;
            let sentence = parse_sentence(sentence)?;
            let options = ParseOptions {
                require_connected: *connected,
                ..ParseOptions::default()
            };
            let linkage = parse_with(&sentence, &grammar, &options)?;
            out.write_json("linkage.json", &linkage)?;
            print!("{}", render_linkage(&sentence, &linkage, &grammar));
            Ok(())
        }
        Command::Poc => {
            let report = run_poc(&config.poc_config())?;
            out.write_json("poc_report.json", &report)?;
            let reports: Vec<&EvaluationReport> = report.rules.iter().map(|r| &r.report).collect();
            out.write_jsonl("reports.jsonl", &reports)?;
            println!("{report}");
            Ok(())
        }
        Command::Rerun { .. } => Err(CliError::Usage("a manifest cannot record a rerun".into())),
    }
}

#[derive(Serialize)]
struct ScoredSentence {
    sentence: String,
    #[serde(flatten)]
    score: SequenceScore,
}

fn score(texts: &[String], config: &PipelineConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let sentences = texts.iter().map(|t| parse_sentence(t)).collect::<Result<Vec<_>, _>>()?;
    let corpus = optional_corpus(config)?;
    let oracle = build_oracle(config, corpus.as_deref(), out)?;
    let mut rows = Vec::with_capacity(sentences.len());
    for s in sentences {
        let score = sequence_score(&oracle, &s)?;
        println!("{s}");
        println!("  forward   {:.6}", score.forward_logprob);
        println!("  backward  {:.6}", score.backward_logprob);
        println!("  combined  {:.6}", score.combined_logprob);
        rows.push(ScoredSentence {
            sentence: s.to_string(),
            score,
        });
    }
    out.write_jsonl("scores.jsonl", &rows)
}

fn parse_sentence(text: &str) -> Result<TokenSequence, CliError> {
    TokenSequence::parse(text).map_err(|e| CliError::Data(format!("{text:?}: {e}")))
}

fn read_corpus(path: &Path) -> Result<Vec<TokenSequence>, CliError> {
    if !path.is_file() {
        return Err(CliError::Config(format!("{} does not exist", path.display())));
    }
    let corpus = read_corpus_file(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    log::info!("read {} sentences from {}", corpus.len(), path.display());
    Ok(corpus)
}

fn optional_corpus(config: &PipelineConfig) -> Result<Option<Vec<TokenSequence>>, CliError> {
    config.corpus.as_deref().map(read_corpus).transpose()
}

fn require_corpus(config: &PipelineConfig) -> Result<Vec<TokenSequence>, CliError> {
    optional_corpus(config)?.ok_or_else(|| CliError::Usage("this command needs a corpus (--corpus)".into()))
}

/// Trains the n-gram oracle on `corpus`, or connects to the remote one.
fn build_oracle(
    config: &PipelineConfig,
    corpus: Option<&[TokenSequence]>,
    out: &mut Artifacts,
) -> Result<Oracle, CliError> {
    match &config.oracle {
        OracleSpec::Ngram(spec) => {
            let corpus = corpus.ok_or_else(|| CliError::Usage("the n-gram oracle is trained on --corpus".into()))?;
            let model = train_ngram_oracle(corpus, spec.order, spec.smoothing_k)?;
            let mut bytes = Vec::new();
            model.write_to(&mut bytes)?;
            out.write("oracle.ngram", &bytes)?;
            Ok(Box::new(model))
        }
        OracleSpec::Remote(remote) => {
            log::info!("using oracle service at {}", remote.endpoint);
            Ok(Box::new(Memoized::new(RemoteOracle::new(remote.clone()))))
        }
    }
}

fn fill(corpus: &[TokenSequence], oracle: &Oracle, config: &PipelineConfig) -> Result<ProbMatrix, CliError> {
    let rows = expand_corpus(corpus);
    let vocab = vocabulary(corpus);
    log::info!("filling {} x {} matrix", rows.len(), vocab.len());
    let options = FillOptions { jobs: config.jobs };
    Ok(fill_matrix_resume(rows, vocab, oracle, options, FillCheckpoint::default())?)
}

fn write_matrix(m: &ProbMatrix, format: MatrixFormat, out: &mut Artifacts) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    let table = MatrixTable::from(m);
    match format {
        MatrixFormat::Csv => {
            table.write_csv(&mut bytes)?;
            out.write("matrix.csv", &bytes)
        }
        MatrixFormat::Binary => {
            table.write_binary(&mut bytes)?;
            out.write("matrix.bin", &bytes)
        }
    }
}

fn senses(
    m: &ProbMatrix,
    corpus: &[TokenSequence],
    config: &PipelineConfig,
    out: &mut Artifacts,
) -> Result<SenseInventory, CliError> {
    let senses = induce_senses(m, corpus, &config.wsd)?;
    out.write_json("senses.json", &senses)?;
    Ok(senses)
}

/// Matrix, senses and categories, then the corpus tagged with them.
fn categorize(
    corpus: &[TokenSequence],
    oracle: &Oracle,
    config: &PipelineConfig,
    out: &mut Artifacts,
) -> Result<(Vec<WordCategory>, Vec<TaggedSentence>), CliError> {
    let m = fill(corpus, oracle, config)?;
    write_matrix(&m, MatrixFormat::Csv, out)?;
    let senses = senses(&m, corpus, config, out)?;
    let sm = build_sense_matrix(&m, &senses)?;
    let mut bytes = Vec::new();
    MatrixTable::from(&sm).write_csv(&mut bytes)?;
    out.write("sense_matrix.csv", &bytes)?;
    let categories = cluster_categories(&sm, &config.categories)?;
    out.write_json("categories.json", &categories)?;
    out.write("categories.txt", listing(&categories).as_bytes())?;
    let tagged = category_tag_corpus(corpus, &senses, &categories, Some(&m));
    out.write_jsonl("tagged.jsonl", &tagged)?;
    Ok((categories, tagged))
}

fn read_lexicon(path: &Path) -> Result<BTreeMap<String, Vec<String>>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Reads a grammar file, falling back to the bundled grammars by name.
fn load_grammar(path: &Path, lexicon: Option<&Path>) -> Result<Grammar, CliError> {
    let grammar = if path.is_file() {
        let text = fs::read_to_string(path)?;
        Grammar::parse(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
    } else {
        let bundled = match path.to_str() {
            Some("poc.dict") => noun_phrase_grammar(),
            Some("gold.dict") => gold_grammar(),
            Some("full.dict") => full_grammar(),
            _ => return Err(CliError::Config(format!("grammar {} does not exist", path.display()))),
        };
        log::info!("using the bundled grammar {}", path.display());
        bundled
    };
    Ok(match lexicon {
        Some(l) => grammar.with_lexicon(read_lexicon(l)?),
        None => grammar,
    })
}

fn report_line(r: &EvaluationReport) -> String {
    let margin = r.margin.map_or_else(|| "n/a".to_string(), |m| format!("{m:+.3}"));
    let mut line = format!("{:<7} margin {:>7}  {}", format!("{:?}", r.verdict).to_lowercase(), margin, r.rule);
    if let Some(reason) = &r.skip_reason {
        line.push_str(&format!("  ({reason})"));
    }
    line
}

fn render_linkage(sentence: &TokenSequence, linkage: &Linkage, grammar: &Grammar) -> String {
    let mut s = format!("{sentence}\n");
    for w in &linkage.words {
        let disjunct = grammar
            .rule(&w.owner)
            .and_then(|r| r.disjuncts.get(w.disjunct))
            .map_or_else(String::new, ToString::to_string);
        s.push_str(&format!("  {:>2} {:<12} {}: {}\n", w.position, w.word, w.owner, disjunct));
    }
    s.push_str("links:\n");
    for l in &linkage.links {
        let left = &linkage.words[l.left];
        let right = &linkage.words[l.right];
        s.push_str(&format!("  {}[{}] -- {}[{}]\n", left.word, l.left, right.word, l.right));
    }
    s
}
