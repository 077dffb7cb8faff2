//! The closed-form design against brute force: grids for binary Y, random search otherwise.

use chi2mech::designer::design_mechanism;
use chi2mech::oracle::{exact_binary_search, exact_conditional_search, randomized_search};
use chi2mech::sampling::random_instance;
use chi2mech::{ChannelMatrix, ProbVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> chi2mech::Result<()> {
    let leakage = ChannelMatrix::from_rows(&[vec![0.25, 0.4], vec![0.75, 0.6]])?;
    let py = ProbVector::new(vec![0.25, 0.75])?;
    println!("eps     approx       conditional  kernel grid");
    for eps in [0.0025, 0.005, 0.01, 0.02] {
        let (_, r) = design_mechanism(&leakage, &py, eps)?;
        let cond = exact_conditional_search(&leakage, &py, eps, 2000)?;
        let kern = exact_binary_search(&leakage, &py, eps, 2000)?;
        println!(
            "{eps:<7} {:.5e}  {:.5e}  {:.5e}",
            r.approx_utility_nats, cond.best_utility_nats, kern.best_utility_nats
        );
    }

    let (leakage, py) = random_instance(&mut ChaCha8Rng::seed_from_u64(3), 4);
    let (_, r) = design_mechanism(&leakage, &py, 1e-6)?;
    let eps = r.eps_bound_posthoc / 4.0;
    let (_, r) = design_mechanism(&leakage, &py, eps)?;
    let best = randomized_search(&leakage, &py, eps, 20_000, 1)?;
    println!(
        "K=4, eps {eps:.4}: design {:.5e}, best of {} random kernels {:.5e}",
        r.exact_utility_nats, best.grid_resolution, best.best_utility_nats
    );
    Ok(())
}
