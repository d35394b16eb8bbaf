//! Seed-derived random substreams.
//!
//! Every replication owns a private ChaCha stream keyed by
//! `(seed, product_id)` and selected by the replication index, so results do
//! not depend on evaluation order or on the number of workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Stream for replication `index` of `product_id` under `seed`.
pub fn substream(seed: u64, product_id: &str, index: u64) -> Stream {
    let key = splitmix64(seed ^ splitmix64(fnv1a(product_id.as_bytes())));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
