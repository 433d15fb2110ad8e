//! Centralized training of the one-hidden-layer network on synthetic data.
//!
//! Usage: cargo run --release --example train_mlp -- [epochs] [hidden]

use fedsim::data::generate_synthetic;
use fedsim::engine::centralized_train_epoch;
use fedsim::nn::{cross_entropy, evaluate_accuracy, forward, MlpDims, MlpModel, Mode};
use fedsim::rng::RngStream;

fn main() -> fedsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(5, |a| a.parse().expect("epochs"));
    let hidden: usize = args.next().map_or(100, |a| a.parse().expect("hidden"));

    let (train, test) = generate_synthetic(20, 64, 500, 100, 3.0, 1)?;
    let dims = MlpDims::new(train.dim(), hidden, train.classes)?;
    let root = RngStream::new(1);
    let mut model = MlpModel::init(dims, &mut root.derive("init").rng());
    let all: Vec<usize> = (0..train.len()).collect();
    println!("{} parameters", dims.parameter_count());

    for epoch in 1..=epochs {
        let mut rng = root.derive("epoch").index(epoch as u64).rng();
        model = centralized_train_epoch(model, &train, &all, 32, 0.01, 0.9, &mut rng)?;
        let (logits, _) = forward(&model, train.features.view(), Mode::Eval)?;
        let loss = cross_entropy(logits.view(), &train.labels)?;
        let acc = evaluate_accuracy(&model, test.features.view(), &test.labels)?;
        println!("epoch {epoch:>3}  train loss {loss:.4}  test acc {acc:.4}");
    }
    Ok(())
}
