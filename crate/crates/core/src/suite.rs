//! The seeded verification suite of small pure-integer instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{generate_random_instance, GeneratorParams, InstanceError, MiblpInstance};

pub const SUITE_SIZE: u64 = 200;

/// Generator parameters for suite member `seed`: at most 4 variables per
/// level, at most 4 follower rows, bounds at most 5, and a full grid of at
/// most 4096 points so exhaustive checks stay cheap.
pub fn suite_params(seed: u64) -> GeneratorParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let (n1, n2) = loop {
        let n1 = rng.gen_range(1..=4usize);
        let n2 = rng.gen_range(1..=4usize);
        if n1 + n2 <= 6 {
            break (n1, n2);
        }
    };
    let bound = match n1 + n2 {
        0..=4 => 5,
        5 => 4,
        _ => 3,
    };
    GeneratorParams {
        seed,
        n1,
        n2,
        m1: rng.gen_range(0..=1),
        m2: rng.gen_range(1..=4),
        coeff_range: (-5, 5),
        bound,
    }
}

pub fn suite_instance(seed: u64) -> Result<MiblpInstance, InstanceError> {
    generate_random_instance(&suite_params(seed))
}

/// Suite members for seeds `1..=count`.
pub fn suite(count: u64) -> Vec<(u64, MiblpInstance)> {
    (1..=count)
        .filter_map(|s| suite_instance(s).ok().map(|i| (s, i)))
        .collect()
}
