//! Counter-based random substreams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 generator keyed
//! by `(seed, stream_id)` and positioned on a ChaCha stream given by a chunk
//! index. Work is always cut into chunks at fixed boundaries, so results are
//! identical for any number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Rows per sampling chunk. Chunk boundaries never depend on the thread count.
pub const CHUNK_ROWS: usize = 4096;

/// Stream tags for the independent random consumers of a computation.
pub mod tags {
    pub const GAUSS_Z: u64 = 0x5a;
    pub const GAUSS_G: u64 = 0x6b;
    pub const DIRECTIONS: u64 = 0xd1;
    pub const BOOTSTRAP: u64 = 0xb0;
    pub const COVARIANCE: u64 = 0xc0;
    pub const MATRIX_W: u64 = 0x77;
    pub const SAMPLES_X: u64 = 0x78;
}

#[inline]
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child stream id from a parent id and a tag or index.
pub fn derive_stream(parent: u64, child: u64) -> u64 {
    let mut state = parent ^ child.rotate_left(32) ^ 0xA076_1D64_78BD_642F;
    splitmix64(&mut state) ^ splitmix64(&mut state).rotate_left(17)
}

/// Hashes a label (map name, experiment name) into a stream id.
pub fn label_stream(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xCBF2_9CE4_8422_2325_u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3))
}

/// Generator for chunk `chunk` of logical stream `stream_id` under master `seed`.
pub fn substream(seed: u64, stream_id: u64, chunk: u64) -> ChaCha8Rng {
    let mut state = seed ^ derive_stream(stream_id, 0x5EED);
    let mut key = [0u8; 32];
    for word in key.chunks_exact_mut(8) {
        word.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(chunk);
    rng
}
