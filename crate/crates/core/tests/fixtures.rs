use std::collections::HashMap;
use std::path::{Path, PathBuf};

use lexstress_core::analysis::{classify_outcome, effective_score, match_gold, match_gold_with};
use lexstress_core::corpus::make_mask_plan;
use lexstress_core::lexicon::marker_of;
use lexstress_core::metrics::best_predictions_table;
use lexstress_core::pipeline::{self, Inputs};
use lexstress_core::predictions::{parse_records, validate_against_plan};
use lexstress_core::{CaseLabel, Corpus, EvalOptions, FrequencyLexicon, MatchPolicy, RunConfig, Structure};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

fn config() -> RunConfig {
    RunConfig::from_toml(&read("lexstress.toml"), &fixture("")).unwrap()
}

fn inputs() -> Inputs {
    Inputs::load(&config()).unwrap()
}

fn corpus() -> Corpus {
    Corpus::from_json(&read("corpus_18pairs.json")).unwrap()
}

#[test]
fn corpus_has_eighteen_pairs() {
    let c = corpus();
    assert_eq!(c.sentences().len(), 36);
    assert_eq!(c.pairs().len(), 18);
    let poetry = c.pairs().iter().filter(|p| p.noncanonical_id.ends_with('A')).count();
    assert_eq!(poetry, 7);
    assert_eq!(c.pair_of("2.Ac").unwrap().noncanonical_id, "2.A");
}

#[test]
fn fixture_mask_plans() {
    let c = corpus();
    let plan = |id: &str| {
        let s = c.sentence(id).unwrap();
        make_mask_plan(s, &s.listed_policy()).unwrap()
    };
    assert_eq!(c.sentence("1.B").unwrap().tokens.len(), 14);
    assert_eq!(plan("1.B").mask_indices.len(), 8);
    assert_eq!(c.sentence("5.A").unwrap().tokens.len(), 9);
    assert_eq!(plan("5.A").mask_indices.len(), 6);
    assert_eq!(plan("1.B"), plan("1.B"));
}

#[test]
fn word_counts_match_the_comparison_tables() {
    let expected = [
        ("1.B", 14),
        ("2.A", 10),
        ("3.A", 14),
        ("4.A", 10),
        ("5.A", 9),
        ("6.B", 6),
        ("7.B", 5),
        ("8.B", 10),
        ("9.B", 7),
        ("10.B", 12),
        ("11.B", 15),
        ("12.A", 11),
        ("13.A", 15),
        ("14.A", 14),
        ("15.B", 25),
        ("16.B", 22),
        ("17.B", 15),
        ("18.B", 22),
    ];
    // canonical versions that gained or lost words while restructuring
    let exceptions: HashMap<&str, usize> = [("7.Bc", 6), ("15.Bc", 21), ("18.Bc", 21)].into();
    let c = corpus();
    for (id, n) in expected {
        assert_eq!(c.sentence(id).unwrap().tokens.len(), n, "{id}");
        let cid = format!("{id}c");
        let want = exceptions.get(cid.as_str()).copied().unwrap_or(n);
        assert_eq!(c.sentence(&cid).unwrap().tokens.len(), want, "{cid}");
    }
}

#[test]
fn canonical_versions_keep_the_content_words() {
    let c = corpus();
    for p in c.pairs() {
        let nc = c.sentence(&p.noncanonical_id).unwrap();
        let cs = c.sentence(&p.canonical_id).unwrap();
        let subs: HashMap<&str, &str> = cs
            .substitutions
            .iter()
            .map(|s| (s.from.as_str(), s.to.as_str()))
            .collect();
        let canon: Vec<String> = cs.tokens.iter().map(|t| t.surface.to_lowercase()).collect();
        for t in nc.tokens.iter().filter(|t| t.is_content) {
            let surface = subs.get(t.surface.as_str()).copied().unwrap_or(&t.surface);
            assert!(
                canon.contains(&surface.to_lowercase()),
                "{} lost {:?}",
                cs.id,
                t.surface
            );
        }
        for t in cs.tokens.iter().filter(|t| t.inserted) {
            assert!(
                !nc.tokens.iter().any(|n| n.surface.eq_ignore_ascii_case(&t.surface)),
                "{}",
                cs.id
            );
        }
    }
}

#[test]
fn records_cover_the_plans_exactly() {
    let c = corpus();
    let set = parse_records(&read("predictions_18pairs.jsonl")).unwrap();
    assert_eq!(set.header.k, 10);
    let report = validate_against_plan(&set.records, &c, &c.mask_plans().unwrap());
    assert!(report.is_clean(), "{report:?}");
    let mut dropped = set.records.clone();
    let gone = dropped.remove(17);
    let report = validate_against_plan(&dropped, &c, &c.mask_plans().unwrap());
    assert_eq!(report.missing, vec![(gone.sentence_id, gone.mask_index)]);
}

#[test]
fn esempi_record() {
    let set = parse_records(&read("predictions_18pairs.jsonl")).unwrap();
    let r = set
        .records
        .iter()
        .find(|r| r.sentence_id == "11.B" && r.gold_surface == "esempi")
        .unwrap();
    assert_eq!(r.candidates[0].score, 0.65383);
    assert_eq!(match_gold(r, MatchPolicy::default()).match_rank, Some(1));
    assert_eq!(effective_score(r, MatchPolicy::default()), 0.65383);
}

#[test]
fn morph_variant_verdicts() {
    let c = corpus();
    let set = parse_records(&read("predictions_18pairs.jsonl")).unwrap();
    let find = |sid: &str, gold: &str| {
        set.records
            .iter()
            .find(|r| r.sentence_id == sid && r.gold_surface == gold)
            .unwrap()
    };
    let penso = find("3.A", "Penso");
    let variants = &c.sentence("3.A").unwrap().tokens[0].variants;
    assert!(!match_gold(penso, MatchPolicy::default()).recognized);
    assert!(match_gold_with(penso, config().match_policy(), variants).recognized);
}

#[test]
fn band_markers_reproduce() {
    let cfg = config();
    let lexicon = FrequencyLexicon::from_tsv(&read("lexicon_raw.tsv"), &cfg.thresholds).unwrap();
    let text = read("band_markers.tsv");
    let mut n = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let band = lexicon.band_of(&cfg.thresholds, f[3]);
        assert_eq!(marker_of(band), f[1], "{} {}", f[0], f[2]);
        n += 1;
    }
    assert_eq!(n, 131);
}

#[test]
fn predictability_of_17b_is_the_sum_of_its_slots() {
    let inputs = inputs();
    let eval = pipeline::evaluate(&inputs, &EvalOptions::from_config(&config())).unwrap();
    let slots: Vec<_> = eval.outcomes.iter().filter(|o| o.sentence_id == "17.Bc").collect();
    assert_eq!(slots.len(), 9);
    let recognized: Vec<f64> = slots
        .iter()
        .filter(|o| o.recognized)
        .map(|o| o.effective_score)
        .collect();
    assert_eq!(recognized, vec![0.81857, 0.194, 0.283, 0.55038, 0.96136, 0.83]);
    let by_hand: f64 = slots.iter().map(|o| o.effective_score).sum();
    let got =
        lexstress_core::analysis::sentence_predictability(&slots.iter().map(|o| (*o).clone()).collect::<Vec<_>>())
            .unwrap();
    assert!((got - by_hand).abs() < 1e-12);
}

#[test]
fn best_predictions_lexical_types_and_phrases() {
    let inputs = inputs();
    let eval = pipeline::evaluate(&inputs, &EvalOptions::from_config(&config())).unwrap();
    let rows = best_predictions_table(&eval.outcomes, &inputs.corpus, 0.5);
    let miei = rows.iter().find(|r| r.gold == "miei").unwrap();
    assert_eq!(
        (miei.score, miei.structure, miei.phrase.as_str()),
        (0.88233, Structure::NonCanonical, "miei colleghi")
    );
    let vita = rows.iter().find(|r| r.gold == "vita").unwrap();
    assert_eq!((vita.score, vita.phrase.as_str()), (0.99582, "senatore a vita"));
    assert!(best_predictions_table(&eval.outcomes, &inputs.corpus, 1.01).is_empty());
}

#[test]
fn boundary_record_is_degenerate() {
    let c = corpus();
    let cfg = config();
    let lexicon = FrequencyLexicon::from_tsv(&read("lexicon_raw.tsv"), &cfg.thresholds).unwrap();
    let set = parse_records(&read("predictions_18pairs.jsonl")).unwrap();
    let oggi = set
        .records
        .iter()
        .find(|r| r.sentence_id == "1.B" && r.mask_index == 0)
        .unwrap();
    assert_eq!(
        classify_outcome(oggi, &lexicon, &c, cfg.match_policy()).unwrap(),
        CaseLabel::BoundaryDegenerate
    );
}

#[test]
fn worker_count_does_not_change_the_bundle() {
    let inputs = inputs();
    let mut opts = EvalOptions::from_config(&config());
    let bundles: Vec<_> = [1, 2, 8]
        .into_iter()
        .map(|w| {
            opts.workers = w;
            pipeline::run(&inputs, &opts).unwrap().1
        })
        .collect();
    assert_eq!(bundles[0], bundles[1]);
    assert_eq!(bundles[1], bundles[2]);
}
