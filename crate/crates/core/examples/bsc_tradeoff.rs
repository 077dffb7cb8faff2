//! Error probability and MMSE of the disclosure when the leakage is a BSC.

use chi2mech::cli::commands::expected_mmse;
use chi2mech::designer::design_mechanism;
use chi2mech::probcore::{error_probability, mmse_binary};
use chi2mech::{ChannelMatrix, ProbVector};

fn main() -> chi2mech::Result<()> {
    let py = ProbVector::new(vec![0.25, 0.75])?;
    println!("alpha  eps    sigma_max  P(U!=Y)   MMSE    (no disclosure: 0.5, P_X(1)P_X(0))");
    for alpha in [0.1, 0.25, 0.4] {
        let leakage = ChannelMatrix::from_rows(&[vec![1.0 - alpha, alpha], vec![alpha, 1.0 - alpha]])?;
        for eps in [0.01, 0.02, 0.03] {
            let (m, r) = design_mechanism(&leakage, &py, eps)?;
            let perr = error_probability(m.pu(), m.output_conditionals())?;
            println!(
                "{alpha:<6} {eps:<6} {:<10.4} {perr:<9.5} {:.5} ({:.5})",
                r.sigma_max,
                expected_mmse(&m)?,
                mmse_binary(&r.px)?
            );
        }
    }
    Ok(())
}
