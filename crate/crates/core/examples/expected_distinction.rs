//! Why uncertain items make good fitness items: a threshold item at `t`
//! separates two uniformly drawn coefficients with probability `2 t (1 - t)`,
//! which peaks at `t = 0.5` where the item's entropy is also largest.
//!
//! ```text
//! cargo run --example expected_distinction
//! ```

use paretomerge::sampling::{bernoulli_entropy, expected_distinction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pairs = 100_000;
    println!("{:>4}  {:>10}  {:>10}  {:>8}", "t", "simulated", "2t(1-t)", "H(t)");
    for i in 1..=9 {
        let t = f64::from(i) / 10.0;
        let hits = (0..pairs)
            .filter(|_| (rng.gen::<f64>() >= t) != (rng.gen::<f64>() >= t))
            .count();
        println!(
            "{t:>4.1}  {:>10.4}  {:>10.4}  {:>8.4}",
            hits as f64 / f64::from(pairs),
            expected_distinction(t),
            bernoulli_entropy(t).unwrap()
        );
    }
}
