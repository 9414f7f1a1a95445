//! Scratch probe: copy-task learnability across hyperparameters.

use conmt::embed::gen_uniform;
use conmt::toymodel::{
    gen_task, train, LossKind, ModelConfig, TaskKind, ToySeq2Seq, ToyTaskSpec, TrainConfig,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let hidden: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(128);
    let len_hi: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(4);
    let pairs: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let epochs: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(50);
    let batch: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(32);
    let kind = args.get(7).map(|s| s.as_str()).unwrap_or("uniform");
    let loss = if args.get(8).map(|s| s.as_str()) == Some("discrete") {
        LossKind::Discrete
    } else {
        LossKind::Cosine
    };
    let clip: f64 = args.get(9).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let vocab: usize = args.get(10).and_then(|s| s.parse().ok()).unwrap_or(200);

    let spec = ToyTaskSpec {
        kind: TaskKind::Copy,
        vocab_size: vocab,
        len_range: (1, len_hi),
        pairs,
        seed: 1,
        ..Default::default()
    };
    let ds = gen_task(&spec).unwrap();
    let table = match kind {
        "hypercube" => conmt::embed::gen_hypercube(vocab, 64, 2).unwrap().0,
        _ => gen_uniform(vocab, 64, 2).unwrap(),
    };
    let mut model = ToySeq2Seq::new(
        &ModelConfig { hidden, max_src_len: 8 },
        &table,
        ds.eos,
        3,
    )
    .unwrap();
    let cfg = TrainConfig {
        lr,
        epochs,
        batch_size: batch,
        loss,
        eval_every: 5,
        grad_clip: Some(clip),
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    match train(&mut model, &ds, &cfg) {
        Ok(rep) => {
            for m in rep.epochs.iter().filter(|m| m.heldout_accuracy.is_some()) {
                println!(
                    "epoch {:3}  train_loss {:.4}  heldout_loss {:.4}  acc {:.4}",
                    m.epoch,
                    m.train_loss,
                    m.heldout_loss.unwrap(),
                    m.heldout_accuracy.unwrap()
                );
            }
            println!(
                "lr={lr} hidden={hidden} len<=:{len_hi} pairs={pairs} batch={batch}: final acc {:.4}  ({:.1}s)",
                rep.final_accuracy,
                t0.elapsed().as_secs_f64()
            );
        }
        Err(e) => println!("TRAIN FAILED: {e}"),
    }
}
