//! Numerical rank of the stacked BLIN design for a few shapes. With shared
//! regressors the diagonal shift `(A + cI, B − cI)` is always a null
//! direction, so the rank can reach at most `S² + L² − 1`. When `S = L`
//! and only two slices are usable the design falls short of that bound:
//! every matrix commuting with `X₁X₂⁻¹` adds a null direction, leaving
//! rank `2S² − S`.

use blin::estimators::{design_rank_check, RankCheck};
use blin::linalg::standard_normal_matrix;
use blin::{LagSpec, TensorSeries};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> blin::Result<()> {
    let cases = [(3, 2, 3, (1, 1)), (3, 2, 6, (1, 1)), (4, 3, 6, (2, 1)), (3, 3, 3, (1, 1)), (3, 3, 4, (1, 1))];
    println!("{:>2} {:>2} {:>2} {:>6} {:>5} {:>8} {:>8} {:>7}", "S", "L", "T", "lags", "rank", "max", "expected", "unique");
    for (k, &(s, l, t, (pa, pb))) in cases.iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(k as u64);
        let slices: Vec<_> = (0..t).map(|_| standard_normal_matrix(&mut rng, s, l)).collect();
        let series = TensorSeries::from_matrices(&slices)?;
        let lags = LagSpec::new(pa, pb)?;
        match design_rank_check(&series, &lags)? {
            RankCheck::Checked { rank, max_rank, expected, unique, .. } => {
                println!("{s:>2} {l:>2} {t:>2} {:>6} {rank:>5} {max_rank:>8} {expected:>8} {unique:>7}", lags.to_string())
            }
            RankCheck::Unchecked { elements, .. } => println!("{s} {l} {t}: design of {elements} entries not decomposed"),
        }
    }
    Ok(())
}
