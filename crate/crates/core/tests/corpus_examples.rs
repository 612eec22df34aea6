use std::collections::BTreeMap;

use gramforge::categories::{categories_from_lexicon, category_tag_corpus};
use gramforge::corpus::{vocabulary, word_counts};
use gramforge::oracle::*;
use gramforge::poc::{category_corpus, gold_lexicon};
use gramforge::probmatrix::{build_sense_matrix, expand_corpus, fill_matrix};
use gramforge::wsd::{cluster_senses, collect_instances, induce_senses, SenseInventory, SphericalKMeans, WsdConfig};

fn seq(text: &str) -> TokenSequence {
    TokenSequence::parse(text).unwrap()
}

#[test]
fn instances_follow_word_frequency() {
    let corpus = category_corpus();
    let oracle = train_ngram_oracle(&corpus, 2, 0.1).unwrap();
    let m = fill_matrix(expand_corpus(&corpus), vocabulary(&corpus), &oracle).unwrap();
    let time = collect_instances(&m, "time").unwrap();
    assert_eq!(time.len(), 5);
    assert_eq!(time.iter().map(|i| i.sentence_id).collect::<Vec<_>>(), [2, 5, 6, 7, 8]);
    for (word, n) in word_counts(&corpus) {
        assert_eq!(collect_instances(&m, &word).unwrap().len(), n, "{word}");
    }
}

#[test]
fn attributive_fat_is_one_sense() {
    let corpus = category_corpus();
    let oracle = train_ngram_oracle(&corpus, 2, 0.1).unwrap();
    let m = fill_matrix(expand_corpus(&corpus), vocabulary(&corpus), &oracle).unwrap();
    let instances = collect_instances(&m, "fat").unwrap();
    for seed in 0..5 {
        let model = cluster_senses(&m, &instances, &SphericalKMeans::default(), seed).unwrap();
        let sense = |sentence: usize| {
            let i = instances.iter().find(|i| i.sentence_id == sentence).unwrap();
            model.sense_of(i.sentence_id, i.position).unwrap()
        };
        // "the fat cat", "a fat fly" against "associated with fat ."
        assert_eq!(sense(3), sense(4));
        assert_ne!(sense(3), sense(1));
    }
}

#[test]
fn cell_is_the_filled_sentence_score() {
    let corpus: Vec<TokenSequence> = ["the party was a success", "the frog was green", "a frog sat"]
        .iter()
        .map(|s| seq(s))
        .collect();
    let oracle = train_ngram_oracle(&corpus, 2, 0.5).unwrap();
    let m = fill_matrix(expand_corpus(&corpus), vocabulary(&corpus), &oracle).unwrap();
    let row = m
        .rows()
        .iter()
        .position(|r| r.text() == format!("the {BLANK} was a success"))
        .unwrap();
    let col = m.column_index("frog").unwrap();
    let expected = sequence_score(&oracle, &seq("the frog was a success")).unwrap();
    assert_eq!(m.get(row, col), expected.combined_logprob);
}

#[test]
fn gold_categories_tag_a_sentence() {
    let lexicon = gold_lexicon();
    let categories = categories_from_lexicon(&lexicon);
    let corpus = [seq("the small kids eat the candy")];
    let tagged = category_tag_corpus(&corpus, &SenseInventory::default(), &categories, None);
    let tags: Vec<&str> = tagged[0].iter().map(|t| t.tag.as_str()).collect();
    assert_eq!(tags, ["det", "adj", "subj", "verb", "det", "obj"]);
}

#[test]
fn planted_contexts_split_the_column() {
    let river = [
        "we sat on the bank of the river",
        "ducks rested on the bank of the lake",
        "children played on the bank of the pond",
        "we walked along the shore of the lake",
        "they sat on the edge of the pond",
        "ducks rested on the side of the river",
    ];
    let money = [
        "she opened a bank account today",
        "he closed my bank account yesterday",
        "i checked my bank account today",
        "she opened a savings account today",
        "he closed my checking account yesterday",
        "i checked my joint account today",
    ];
    let corpus: Vec<TokenSequence> = river.iter().chain(&money).map(|s| seq(s)).collect();
    let oracle = train_ngram_oracle(&corpus, 2, 0.1).unwrap();
    let m = fill_matrix(expand_corpus(&corpus), vocabulary(&corpus), &oracle).unwrap();
    let config = WsdConfig {
        k: 1,
        per_word_k: BTreeMap::from([("bank".to_string(), 2)]),
        filter_fraction: 0.0,
        ..Default::default()
    };
    let senses = induce_senses(&m, &corpus, &config).unwrap();
    assert_eq!(senses.get("bank").unwrap().n_senses(), 2);
    let sm = build_sense_matrix(&m, &senses).unwrap();
    let bank: Vec<usize> = (0..sm.n_cols()).filter(|&c| sm.columns()[c].word == "bank").collect();
    let sense_of_row = |row: usize| bank.iter().position(|&c| sm.get(row, c).is_some()).unwrap();
    let planted: Vec<(usize, usize)> = collect_instances(&m, "bank")
        .unwrap()
        .iter()
        .map(|i| (sense_of_row(i.row_index), usize::from(i.sentence_id >= river.len())))
        .collect();
    let river_sense = planted[0].0;
    for (sense, family) in planted {
        assert_eq!(sense == river_sense, family == 0);
    }
}
