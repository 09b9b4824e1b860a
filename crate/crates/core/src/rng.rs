//! Keyed random streams.
//!
//! Every stochastic entity draws from its own ChaCha8 stream. The key is
//! derived from the master seed and the entity kind; the stream id is the
//! entity index. ChaCha is a counter-based cipher, so a stream's full state is
//! `(key, stream, word position)` and draws on one stream never move another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamKind {
    Topology,
    Stimulus,
    Neuron,
    Synapse,
}

impl StreamKind {
    fn tag(self) -> u64 {
        match self {
            StreamKind::Topology => 0x746f_706f,
            StreamKind::Stimulus => 0x7374_696d,
            StreamKind::Neuron => 0x6e65_7572,
            StreamKind::Synapse => 0x7379_6e61,
        }
    }
}

/// Independent stream for `(seed, kind, id)`.
pub fn stream(seed: u64, kind: StreamKind, id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&kind.tag().to_le_bytes());
    key[16..24].copy_from_slice(b"hhnet-v1");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(id);
    rng
}
