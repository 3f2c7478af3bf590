//! Scratch diagnostic. Not part of the API.

use groupoid_harmonics::linalg::CMatrix;
use groupoid_harmonics::sdp::{schur_cb_norm_sdp, SdpOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let n = 3usize;
    for seed in [321u64, 322, 323] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a.set(
                    i,
                    j,
                    Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
                );
            }
        }
        let start = Instant::now();
        let sol = schur_cb_norm_sdp(&a, 1e-7).unwrap();
        println!(
            "seed {}: t = {:.9}, iters = {}, cert = {:.2e}, converged = {}, elapsed = {:?}",
            seed,
            sol.t,
            sol.iterations,
            sol.certificate,
            sol.converged,
            start.elapsed()
        );
        let _ = SdpOptions::default();
    }
}
