//! Scratch probe: frequency-bucketed F1 across table geometries on the
//! Zipf lexicon task.

use conmt::embed::{combine, gen_clumped, gen_uniform};
use conmt::toymodel::{
    bucket_spec_by_rank, frequency_experiment, gen_task, ModelConfig, TaskKind, ToyTaskSpec,
    TrainConfig,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(15);
    let pairs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10000);
    let seeds: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1);
    let clump_frac: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.65);
    let rare_frac: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0.35);
    let freq_frac: f64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let len_hi: usize = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(6);
    let v = 2000usize;
    let d = 128usize;

    let t0 = std::time::Instant::now();
    for seed in 0..seeds {
        let ds = gen_task(&ToyTaskSpec {
            kind: TaskKind::Lexicon,
            vocab_size: v,
            zipf_s: 1.2,
            len_range: (2, len_hi),
            pairs,
            seed: 100 + seed,
        })
        .unwrap();
        let uniform = gen_uniform(v, d, 200 + seed).unwrap();
        let clumped = gen_clumped(v, d, 300 + seed, clump_frac, 0.999).unwrap();
        let noise = gen_uniform(v, d, 400 + seed).unwrap();
        let combined = combine(&clumped, &noise, 0.9).unwrap();
        let tables = vec![
            ("uniform".to_string(), uniform),
            ("clumped".to_string(), clumped),
            ("combined".to_string(), combined),
        ];
        let spec = bucket_spec_by_rank(&ds.vocab, &[rare_frac, freq_frac]).unwrap();
        let cfg = TrainConfig {
            lr,
            epochs,
            batch_size: 8,
            eval_every: 0,
            seed: 500 + seed,
            ..Default::default()
        };
        let outcomes = frequency_experiment(
            &ds,
            &tables,
            &ModelConfig { hidden: 128, max_src_len: 8 },
            &cfg,
            &spec,
        )
        .unwrap();
        for o in &outcomes {
            println!(
                "seed {seed} {:>8}: rare {:.4}  mid {:.4}  freq {:.4}  bleu {:.2}  acc {:.4}  [gold rare {} freq {}]",
                o.label,
                o.rare_f1(),
                o.bucket_f1[1.min(o.bucket_f1.len() - 1)],
                o.frequent_f1(),
                o.bleu,
                o.final_accuracy,
                o.report.buckets[0].gold(),
                o.report.buckets.last().unwrap().gold(),
            );
        }
        println!("-- elapsed {:.0}s", t0.elapsed().as_secs_f64());
    }
}
