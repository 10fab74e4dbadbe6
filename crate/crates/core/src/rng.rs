//! Counter-based random streams.
//!
//! A [`RngStream`] is a ChaCha8 key derived from a tuple of identifiers
//! (global seed, frame, condition, modality). Each element (point, particle,
//! occluder) gets its own ChaCha stream selected by index, so draws never
//! depend on iteration order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Lidar,
    RgbParticles,
    RgbLens,
}

impl Modality {
    fn tag(self) -> u64 {
        match self {
            Modality::Lidar => 1,
            Modality::RgbParticles => 2,
            Modality::RgbLens => 3,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one 64-bit key.
pub fn derive_key(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// FNV-1a, stable across platforms and releases.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: [u8; 32],
}

impl RngStream {
    pub fn from_key(key: u64) -> Self {
        let mut seed = [0u8; 32];
        let mut state = key;
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        RngStream { seed }
    }

    pub fn new(global_seed: u64, frame_id: &str, modality: Modality) -> Self {
        Self::from_key(derive_key(&[global_seed, hash_str(frame_id), modality.tag()]))
    }

    /// Key including the weather condition, used by the dataset pipeline.
    pub fn for_condition(
        global_seed: u64,
        frame_id: &str,
        weather: crate::Weather,
        severity_level: u8,
        modality: Modality,
    ) -> Self {
        Self::from_key(derive_key(&[
            global_seed,
            hash_str(frame_id),
            hash_str(weather.as_str()),
            u64::from(severity_level),
            modality.tag(),
        ]))
    }

    /// Independent generator for element `index`.
    pub fn at(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(index);
        rng
    }
}
