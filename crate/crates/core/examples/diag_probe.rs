//! Scratch probe: error anatomy of a trained copy model.

use conmt::embed::gen_uniform;
use conmt::toymodel::{
    decode_corpus, gen_task, train, LossKind, ModelConfig, TaskKind, ToySeq2Seq, ToyTaskSpec,
    TrainConfig,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let hidden: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(128);
    let len_hi: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    let epochs: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(30);
    let clip: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1.0);

    let ds = gen_task(&ToyTaskSpec {
        kind: TaskKind::Copy,
        vocab_size: 200,
        len_range: (1, len_hi),
        pairs: 2000,
        seed: 1,
        ..Default::default()
    })
    .unwrap();
    let table = gen_uniform(200, 64, 2).unwrap();
    let mut model =
        ToySeq2Seq::new(&ModelConfig { hidden, max_src_len: 8 }, &table, ds.eos, 3).unwrap();
    let cfg = TrainConfig {
        lr,
        epochs,
        batch_size: 8,
        loss: LossKind::Cosine,
        eval_every: 0,
        grad_clip: Some(clip),
        ..Default::default()
    };
    train(&mut model, &ds, &cfg).unwrap();
    let (_, heldout) = ds.split(0.1);
    let srcs: Vec<Vec<usize>> = heldout.iter().map(|(s, _)| s.clone()).collect();
    let refs: Vec<Vec<usize>> = heldout.iter().map(|(_, t)| t.clone()).collect();
    let hyps = decode_corpus(&model, &srcs, 8).unwrap();

    let mut len_ok = 0;
    let mut by_len: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
    let mut by_pos: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
    for (h, r) in hyps.iter().zip(&refs) {
        if h.len() == r.len() {
            len_ok += 1;
        }
        let e = by_len.entry(r.len()).or_default();
        e.1 += 1;
        if h == r {
            e.0 += 1;
        }
        for i in 0..r.len() {
            let p = by_pos.entry(i).or_default();
            p.1 += 1;
            if h.get(i) == Some(&r[i]) {
                p.0 += 1;
            }
        }
    }
    println!("length match: {}/{}", len_ok, refs.len());
    for (l, (ok, n)) in &by_len {
        println!("  ref len {l}: exact {ok}/{n}");
    }
    for (p, (ok, n)) in &by_pos {
        println!("  pos {p}: token acc {:.3} ({n})", *ok as f64 / *n as f64);
    }
    let first_srcs: Vec<Vec<usize>> = (0..5).map(|i| srcs[i].clone()).collect();
    let sample = decode_corpus(&model, &first_srcs, 8).unwrap();
    for i in 0..5 {
        println!("src {:?} -> hyp {:?}", srcs[i], sample[i]);
    }
}
