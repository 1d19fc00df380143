use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::PlanError;

/// An `a x a` Latin square with symbols `1..=a`.
///
/// Built from the cyclic square by independent random permutations of
/// rows, columns and symbols. This does not sample uniformly from all
/// Latin squares of the order.
pub fn generate_latin_square(a: usize, seed: u64) -> Result<Vec<Vec<u32>>, PlanError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    latin_square_with(a, &mut rng)
}

pub(crate) fn latin_square_with<R: Rng>(a: usize, rng: &mut R) -> Result<Vec<Vec<u32>>, PlanError> {
    if a == 0 {
        return Err(PlanError::EmptySquare);
    }
    let mut rows: Vec<usize> = (0..a).collect();
    let mut cols: Vec<usize> = (0..a).collect();
    let mut symbols: Vec<u32> = (1..=a as u32).collect();
    rows.shuffle(rng);
    cols.shuffle(rng);
    symbols.shuffle(rng);
    Ok(rows
        .iter()
        .map(|&i| cols.iter().map(|&j| symbols[(i + j) % a]).collect())
        .collect())
}

/// True when every row and column of `square` is a permutation of `1..=n`.
pub fn is_latin_square(square: &[Vec<u32>]) -> bool {
    let n = square.len();
    let perm = |it: &mut dyn Iterator<Item = u32>| {
        let mut seen = vec![false; n];
        for s in it {
            let s = s as usize;
            if s == 0 || s > n || seen[s - 1] {
                return false;
            }
            seen[s - 1] = true;
        }
        seen.iter().all(|&x| x)
    };
    square.iter().all(|r| r.len() == n)
        && square.iter().all(|r| perm(&mut r.iter().copied()))
        && (0..n).all(|j| perm(&mut square.iter().map(|r| r[j])))
}
