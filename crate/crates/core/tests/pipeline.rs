//! Report fields recomputed from the individual modules.

use unitscore::corpus_io::Manifest;
use unitscore::framesync::{build_contingency, gold_streams};
use unitscore::runner::{evaluate, evaluate_inputs, EvalOptions, EvalReport, Inputs};
use unitscore::synth::{generate, write_corpus, ChannelSpec};
use unitscore::{assignment, metrics, PhonemeInventory, Track};

fn noisy_inputs(track: Track, seed: u64) -> Inputs {
    let inv = PhonemeInventory::builtin("english").unwrap();
    let mut spec = ChannelSpec::new(inv.clone());
    spec.seed = seed;
    spec.substitution = 0.1;
    spec.deletion = 0.05;
    spec.insertion = 0.1;
    let (gold, units, _) = generate(&spec, 60).unwrap();
    Inputs {
        manifest: Manifest {
            language: "english".into(),
            track,
            vocab_size: spec.vocab_size(),
            inventory: "inventory.txt".into(),
            gold: "gold.tsv".into(),
            units: "units.txt".into(),
            split: "dev".into(),
            features: None,
        },
        inventory: inv,
        gold,
        units,
    }
}

#[test]
fn report_matches_modules() {
    for track in [Track::ManyToOne, Track::OneToOne] {
        let inputs = noisy_inputs(track, 3);
        let (report, a) = evaluate_inputs(&inputs, &EvalOptions::default()).unwrap();
        let inv = &inputs.inventory;
        let silence = inv.silence_index();
        let table = build_contingency(&inputs.gold, &inputs.units, inv, inputs.manifest.vocab_size).unwrap();
        let expect = match track {
            Track::ManyToOne => assignment::many_to_one(&table),
            Track::OneToOne => assignment::one_to_one(&table).unwrap(),
        };
        assert_eq!(a, expect);
        let pnmi: f64 = metrics::pnmi(&table).unwrap();
        assert!((report.pnmi - pnmi * 100.0).abs() < 1e-9);

        let assigned = assignment::apply(&a, &inputs.units).unwrap();
        let golds = gold_streams(&inputs.gold, &inputs.units, inv).unwrap();
        let mut bd = metrics::PerBreakdown::default();
        let mut bc = metrics::BoundaryCounts::default();
        for (id, g) in &golds {
            let h = &assigned[id];
            bd = bd.merge(metrics::per(&metrics::collapse(g, silence), &metrics::collapse(h, silence)));
            let gb = metrics::segment_boundaries(inputs.gold.get(id).unwrap(), silence);
            let pb = metrics::frame_boundaries(h, inputs.units.frame_rate);
            bc = bc.merge(metrics::BoundaryCounts::from_utterance(&gb, &pb, metrics::DEFAULT_TOLERANCE).unwrap());
        }
        let per: f64 = bd.rate().unwrap();
        assert!((report.per - per * 100.0).abs() < 1e-9);
        assert_eq!(report.per_breakdown.sub, bd.substitutions);
        assert_eq!(report.per_breakdown.del, bd.deletions);
        assert_eq!(report.per_breakdown.ins, bd.insertions);
        let seg: metrics::BoundaryScore<f64> = metrics::segmentation_scores(bc).unwrap();
        assert_eq!(report.boundaries.hits, seg.hits);
        assert_eq!(report.f1, seg.f1);
        assert_eq!(report.r_value, seg.r_value);
        let subs: u64 = report.confusion.counts.iter().flatten().sum();
        assert_eq!(subs, bd.substitutions);
    }
}

#[test]
fn report_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let inv = PhonemeInventory::builtin("french").unwrap();
    let mut spec = ChannelSpec::new(inv.clone());
    spec.seed = 9;
    spec.substitution = 0.15;
    let (gold, units, planted) = generate(&spec, 40).unwrap();
    let files = write_corpus(dir.path(), &inv, &gold, &units, Some(&planted), Track::ManyToOne, "test").unwrap();
    let out = dir.path().join("r.json");
    let written = evaluate(&files.manifest, &out, None, &EvalOptions::default()).unwrap();
    assert_eq!(written.assignment.as_deref(), Some("r.assignment.tsv"));
    assert!(dir.path().join("r.assignment.tsv").exists());
    let loaded = EvalReport::load(&out).unwrap();
    assert_eq!(loaded.to_json().unwrap(), written.to_json().unwrap());
    assert_eq!(loaded.split, "test");
    assert_eq!(loaded.language, "french");
}

#[test]
fn one_to_one_needs_matching_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    let inv = PhonemeInventory::builtin("english").unwrap();
    let mut spec = ChannelSpec::new(inv.clone());
    spec.units_per_phone = 2;
    let (gold, units, _) = generate(&spec, 5).unwrap();
    let files = write_corpus(dir.path(), &inv, &gold, &units, None, Track::ManyToOne, "dev").unwrap();
    let m = Manifest::load(&files.manifest).unwrap();
    assert!(Inputs::load(m, Some(Track::OneToOne)).is_err());
}
