//! A provider holding X discloses about Y while protecting Z.

use chi2mech::provider::{design_provider_mechanism, ProviderScenario};
use chi2mech::{Budget, ChannelMatrix, ProbVector};

fn main() -> chi2mech::Result<()> {
    let px = ProbVector::new(vec![0.3, 0.5, 0.2])?;
    let pyx = ChannelMatrix::from_rows(&[vec![0.9, 0.2, 0.1], vec![0.1, 0.8, 0.9]])?;
    let pzx = ChannelMatrix::from_rows(&[vec![0.7, 0.1, 0.2], vec![0.2, 0.8, 0.1], vec![0.1, 0.1, 0.7]])?;
    let s = ProviderScenario::new(pyx, pzx, px)?;
    let (mech, r) = design_provider_mechanism(&s, 0.02, Budget::Eps2)?;
    println!("singular values of W1 W2: {:?}", r.product_singular_values);
    println!("case {:?}, sigma {:.4}, utility {:.4} eps^2 nats", r.case, r.sigma_selected, r.utility_nats_coeff);
    println!("exact I(U;Y) {:.4e}, I(U;Z) {:.4e}", r.exact_utility_nats, r.leakage_mi_nats);
    println!("P_(U|X) = {:?}", mech.kernel().to_rows());
    Ok(())
}
