//! Many-to-one scores of one latent channel quantized at growing vocabulary
//! sizes. Finer quantizations refine coarser ones, so many-to-one mapping
//! can only gain from extra units.
//!
//! cargo run --release -p unitscore --example vocab_fairness

use unitscore::corpus_io::Manifest;
use unitscore::runner::{evaluate_inputs, EvalOptions, Inputs};
use unitscore::synth::{generate, ChannelSpec, LatentChannel};
use unitscore::{PhonemeInventory, Track};

pub const LEVELS: [usize; 4] = [8, 64, 256, 1024];

fn main() -> unitscore::Result<()> {
    let inv = PhonemeInventory::builtin("english").expect("shipped inventory");
    let mut spec = ChannelSpec::new(inv.clone());
    spec.seed = 11;
    let (gold, _, _) = generate(&spec, 300)?;
    let channel = LatentChannel {
        spread: 0.6,
        jitter: 0.0,
        seed: 12,
    };
    let corpora = channel.quantize(&gold, spec.frame_rate, inv.silence_index(), &LEVELS)?;
    println!("{:>6} {:>8} {:>8} {:>8} {:>8}", "units", "pnmi", "per", "f1", "r_value");
    for (k, units) in LEVELS.iter().zip(corpora) {
        let manifest = Manifest {
            language: inv.language().to_string(),
            track: Track::ManyToOne,
            vocab_size: *k,
            inventory: "inventory.txt".into(),
            gold: "gold.tsv".into(),
            units: "units.txt".into(),
            split: "dev".into(),
            features: None,
        };
        let inputs = Inputs {
            manifest,
            inventory: inv.clone(),
            gold: gold.clone(),
            units,
        };
        let (r, _) = evaluate_inputs(&inputs, &EvalOptions::default())?;
        println!("{:>6} {:>8.2} {:>8.2} {:>8.2} {:>8.2}", k, r.pnmi, r.per, r.f1, r.r_value);
    }
    Ok(())
}
