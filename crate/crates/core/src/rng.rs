//! Counter-based random streams and deterministic replication.
//!
//! A [`Stream`] is a 128-bit key. Child streams are derived by hashing the
//! parent key with an index, so replica `i` of a run always sees the same
//! random numbers no matter which worker executes it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used by every sampler in the crate.
pub type SimRng = ChaCha8Rng;

/// Sub-stream tags used when one replica needs several independent sources.
pub mod tag {
    pub const ENV: u64 = 0x454e_5600;
    pub const ENV_RIGHT: u64 = 0x454e_5601;
    pub const ENV_LEFT: u64 = 0x454e_5602;
    pub const ENV_SUP: u64 = 0x454e_5603;
    pub const ENV_MIN: u64 = 0x454e_5604;
    pub const PROFILE: u64 = 0x5052_4f00;
    pub const PATH: u64 = 0x5041_5400;
    pub const STABLE: u64 = 0x5354_4100;
    pub const SUP: u64 = 0x5355_5000;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Stream {
    key: [u64; 2],
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            key: [splitmix64(seed), splitmix64(seed ^ 0x5851_f42d_4c95_7f2d)],
        }
    }

    /// Child stream number `index`. Distinct indices give unrelated keys.
    pub fn split(&self, index: u64) -> Stream {
        let h = splitmix64(index ^ 0xd1b5_4a32_d192_ed03);
        Stream {
            key: [
                splitmix64(self.key[0] ^ h),
                splitmix64(self.key[1].rotate_left(17) ^ h.wrapping_mul(0xff51_afd7_ed55_8ccd)),
            ],
        }
    }

    pub fn rng(&self) -> SimRng {
        let mut seed = [0u8; 32];
        let words = [
            self.key[0],
            self.key[1],
            splitmix64(self.key[0] ^ self.key[1]),
            splitmix64(self.key[1].wrapping_add(self.key[0].rotate_left(29))),
        ];
        for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

/// Runs `f(i, stream.split(i))` for `i in 0..n` and returns the results in
/// index order.
pub fn replicate<T, F>(n: usize, stream: Stream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Stream) -> T + Sync + Send,
{
    replicate_with(Execution::default(), n, stream, f)
}

pub fn replicate_with<T, F>(mode: Execution, n: usize, stream: Stream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Stream) -> T + Sync + Send,
{
    match mode {
        Execution::Parallel => parallel(n, stream, f),
        Execution::Sequential => (0..n).map(|i| f(i, stream.split(i as u64))).collect(),
    }
}

#[cfg(feature = "parallel")]
fn parallel<T, F>(n: usize, stream: Stream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Stream) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(|i| f(i, stream.split(i as u64))).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel<T, F>(n: usize, stream: Stream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Stream) -> T + Sync + Send,
{
    (0..n).map(|i| f(i, stream.split(i as u64))).collect()
}

/// Like [`replicate`] but stops at the first failing replica (lowest index).
pub fn try_replicate<T, F>(n: usize, stream: Stream, f: F) -> crate::Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, Stream) -> crate::Result<T> + Sync + Send,
{
    try_replicate_with(Execution::default(), n, stream, f)
}

pub fn try_replicate_with<T, F>(mode: Execution, n: usize, stream: Stream, f: F) -> crate::Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, Stream) -> crate::Result<T> + Sync + Send,
{
    replicate_with(mode, n, stream, |i, s| {
        f(i, s).map_err(|e| crate::Error::Replica {
            replica: i,
            error: Box::new(e),
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_same_numbers() {
        let a: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(Stream::new(7).rng(), |r, _| Some(r.random()))
            .collect();
        let b: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(Stream::new(7).rng(), |r, _| Some(r.random()))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn children_differ() {
        let s = Stream::new(1);
        assert_ne!(s.split(0), s.split(1));
        assert_ne!(s.split(0), s);
        let x: u64 = s.split(0).rng().random();
        let y: u64 = s.split(1).rng().random();
        assert_ne!(x, y);
    }

    #[test]
    fn replication_order_is_index_order() {
        let s = Stream::new(3);
        let par = replicate_with(Execution::Parallel, 257, s, |i, st| (i, st.rng().random::<u64>()));
        let seq = replicate_with(Execution::Sequential, 257, s, |i, st| (i, st.rng().random::<u64>()));
        assert_eq!(par, seq);
        assert!(par.iter().enumerate().all(|(k, (i, _))| k == *i));
    }
}
