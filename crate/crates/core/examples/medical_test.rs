//! A test result Y is disclosed while disease status X stays private.
//! Symbols are listed as ("1", "0"): positive first.

use chi2mech::designer::design_mechanism;
use chi2mech::{ChannelMatrix, ProbVector};

fn main() -> chi2mech::Result<()> {
    let labels = vec!["1".to_string(), "0".to_string()];
    let leakage = ChannelMatrix::from_rows(&[vec![0.9, 0.05], vec![0.1, 0.95]])?;
    let py = ProbVector::new(vec![0.06, 0.94])?.with_labels(labels)?;
    let (mech, r) = design_mechanism(&leakage, &py, 0.01)?;
    println!("P(disease) = {:.3}", r.px[0]);
    println!("W = {:?}", r.w);
    println!("utility {:.4} eps^2 nats = {:.4} eps^2 bits", r.utility_nats_coeff, r.utility_bits_coeff);
    for (u, post) in mech.posteriors().iter().enumerate() {
        println!("P(disease | U={u}) = {:.5}", post[0]);
    }
    Ok(())
}
