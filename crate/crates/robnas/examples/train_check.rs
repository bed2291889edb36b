// scratch: training sanity + timing
use robnas::cellspace::Cell;
use robnas::tinynet::{build_network, synth_dataset, NetworkConfig, TrainOptions};

fn main() {
    let cfg = NetworkConfig { image_size: 8, stem_width: 4, ..Default::default() };
    let ds = synth_dataset(3, 8, 4, 256, 64, 1);
    for id in [13661u32, 7777, 464, 15624, 0] {
        let cell = Cell::from_local_id(id);
        let net = build_network(&cell, &cfg, 11);
        let x = ds.test_batch(0, 16);
        let logits = net.forward(&x).unwrap();
        let mx = logits.data().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        println!("cell {id}: initial |logit|max {mx:.3}");
        for lr in [0.01] {
            let mut net = build_network(&cell, &cfg, 11);
            let t0 = std::time::Instant::now();
            match net.train(&ds, &TrainOptions { lr, ..Default::default() }) {
                Ok(report) => {
                    let x = ds.test_batch(0, 64);
                    let logits = net.forward(&x).unwrap();
                    let mut correct = 0;
                    for i in 0..64 {
                        if robnas::tinynet::argmax(&logits.data()[i*4..(i+1)*4]) == ds.test_labels()[i] { correct += 1; }
                    }
                    println!("  lr {lr}: losses {:?} train_acc {:.3} test_acc {:.3} ({:.2?})",
                        report.epoch_losses.iter().map(|v| (v*100.0).round()/100.0).collect::<Vec<_>>(),
                        report.final_train_accuracy, correct as f64/64.0, t0.elapsed());
                }
                Err(e) => println!("  lr {lr}: {e}"),
            }
        }
    }
}
