//! Per-component random streams derived from one master seed.
//!
//! Stream `c` of master seed `m` is seeded with `splitmix64(m ^ splitmix64(c))`
//! where `c` is the component's fixed tag. Changing how often one component
//! draws (for instance turning a regularizer on) leaves every other stream
//! untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One step of the splitmix64 generator, used as a 64-bit mixing function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Init = 1,
    Env = 2,
    Exploration = 3,
    Replay = 4,
    TargetNoise = 5,
    Perturbation = 6,
    Rademacher = 7,
    Eval = 8,
    EvalNoise = 9,
    Probe = 10,
}

pub fn derive_seed(master: u64, stream: Stream) -> u64 {
    splitmix64(master ^ splitmix64(stream as u64))
}

pub fn stream_rng(master: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn splitmix_reference_values() {
        // first outputs of the reference generator seeded with 0
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn streams_are_distinct_and_stable() {
        let all = [
            Stream::Init,
            Stream::Env,
            Stream::Exploration,
            Stream::Replay,
            Stream::TargetNoise,
            Stream::Perturbation,
            Stream::Rademacher,
            Stream::Eval,
            Stream::EvalNoise,
            Stream::Probe,
        ];
        let seeds: std::collections::HashSet<u64> = all.iter().map(|&s| derive_seed(7, s)).collect();
        assert_eq!(seeds.len(), all.len());
        let a: u64 = stream_rng(7, Stream::Env).random();
        let b: u64 = stream_rng(7, Stream::Env).random();
        assert_eq!(a, b);
        assert_ne!(derive_seed(7, Stream::Env), derive_seed(8, Stream::Env));
    }
}
