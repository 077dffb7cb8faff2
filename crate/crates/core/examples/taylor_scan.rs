//! How fast the quadratic utility approximation becomes exact as eps shrinks.

use chi2mech::oracle::taylor_residual_scan;
use chi2mech::{ChannelMatrix, ProbVector};

fn main() -> chi2mech::Result<()> {
    let leakage = ChannelMatrix::from_rows(&[vec![0.25, 0.4], vec![0.75, 0.6]])?;
    let py = ProbVector::new(vec![0.25, 0.75])?;
    let eps: Vec<f64> = (0..8).map(|i| 0.064 / 2f64.powi(i)).collect();
    println!("eps         exact         approx        |exact-approx|/eps^2");
    for p in taylor_residual_scan(&leakage, &py, &eps)? {
        println!("{:<11.6} {:.6e}  {:.6e}  {:.6e}", p.eps, p.exact, p.approx, p.residual_ratio);
    }
    Ok(())
}
