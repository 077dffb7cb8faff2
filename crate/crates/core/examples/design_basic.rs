//! Design a mechanism for a 2x2 leakage and print what it discloses.

use chi2mech::designer::design_mechanism;
use chi2mech::{ChannelMatrix, ProbVector};

fn main() -> chi2mech::Result<()> {
    let leakage = ChannelMatrix::from_rows(&[vec![0.25, 0.4], vec![0.75, 0.6]])?;
    let py = ProbVector::new(vec![0.25, 0.75])?;
    let eps = 0.01;
    let (mech, report) = design_mechanism(&leakage, &py, eps)?;

    println!("P_X            {:?}", report.px.as_slice());
    println!("singular values {:?}", report.singular_values);
    println!("L*             {:?}", report.l_star.l_slice());
    println!("utility ~ {:.4} eps^2 nats ({:.4} bits)", report.utility_nats_coeff, report.utility_bits_coeff);
    println!("exact I(U;Y) at eps={eps}: {:.6e} nats", report.exact_utility_nats);
    println!("I(U;X) = {:.6e}, per-letter chi2 {:?}", report.leakage_mi_nats, report.chi2_per_letter);
    println!("admissible eps < {:.4}", report.eps_bound_posthoc);
    for (u, c) in mech.output_conditionals().iter().enumerate() {
        println!("P(Y | U={u}) = {:?}", c.as_slice());
    }
    Ok(())
}
