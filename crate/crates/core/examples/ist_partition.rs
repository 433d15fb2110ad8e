//! One round of independent subnetwork training by hand: partition the
//! hidden layer, cut out each site's subnet, nudge it, and put the pieces
//! back together.

use fedsim::nn::{MlpDims, MlpModel};
use fedsim::rng::RngStream;
use fedsim::vertical::{extract, partition, reassemble};

fn main() -> fedsim::Result<()> {
    let dims = MlpDims::new(6, 10, 3)?;
    let global = MlpModel::init(dims, &mut RngStream::new(1).rng());
    let asn = partition(dims.hidden, 3, 0, &mut RngStream::new(2).rng())?;

    let mut subnets = Vec::new();
    for site in 0..asn.sites {
        let mut sub = extract(&global, &asn, site)?;
        println!(
            "site {site}: neurons {:?}, {} parameters",
            sub.neurons,
            sub.model.parameter_count()
        );
        // Stand-in for local training: each site shifts its copy of b2.
        sub.model.b2.mapv_inplace(|b| b + site as f32);
        subnets.push(sub);
    }
    let merged = reassemble(&subnets, &asn, &vec![1.0; subnets.len()])?;
    println!("b2 before {:?}", global.b2.to_vec());
    println!("b2 after  {:?}", merged.b2.to_vec());
    assert_eq!(merged.w1, global.w1);
    Ok(())
}
