//! When the adversary only sees U through a noisy channel, a skewed P_U buys utility.

use chi2mech::adversary::{design_adversarial_mechanism, invert_binary_channel};
use chi2mech::designer::design_mechanism;
use chi2mech::{Budget, ChannelMatrix, ProbVector};

fn main() -> chi2mech::Result<()> {
    let leakage = ChannelMatrix::from_rows(&[vec![0.25, 0.4], vec![0.75, 0.6]])?;
    let py = ProbVector::new(vec![0.25, 0.75])?;
    let eps = 0.005;
    let (_, base) = design_mechanism(&leakage, &py, eps)?;
    println!("direct design: {:.4} eps^2 nats", base.utility_nats_coeff);
    for (x, y) in [(1.0, 0.0), (0.9, 0.1), (0.8, 0.05), (0.3, 0.9)] {
        let ch = ChannelMatrix::from_rows(&[vec![x, y], vec![1.0 - x, 1.0 - y]])?;
        let ch = invert_binary_channel(&ch)?;
        let (_, r) = design_adversarial_mechanism(&leakage, &py, &ch, eps, Budget::HalfEps2)?;
        println!(
            "channel [[{x}, {y}], ..] class {:?}: P_U = {:?}, gain {:.4}, utility {:.4} eps^2, P_U' = {:?}",
            ch.class,
            r.pu.as_slice(),
            ch.gain(),
            r.utility_nats_coeff,
            r.pu_prime.as_slice()
        );
    }
    Ok(())
}
