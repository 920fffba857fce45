use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DatasetManifest;
use crate::error::{Error, Result};

/// Split sizes for `n` items: floors of `f * n`, with the remainder handed
/// to the largest fractional parts (earlier splits win ties).
fn split_sizes(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let raw = fractions.map(|f| f * n as f64);
    let mut sizes = raw.map(|r| (r + 1e-9).floor() as usize);
    let mut rest = n.saturating_sub(sizes.iter().sum());
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = raw[a] - sizes[a] as f64;
        let fb = raw[b] - sizes[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        sizes[i] += 1;
        rest -= 1;
    }
    sizes
}

/// Conversation-level train/dev/test split after a seeded shuffle. Each
/// split keeps the conversations in their original relative order.
pub fn split_dataset(
    manifest: &DatasetManifest,
    fractions: [f64; 3],
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest, DatasetManifest)> {
    if fractions.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::Config(format!("split fractions must be positive: {fractions:?}")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions sum to {total}, not 1")));
    }
    let n = manifest.conversations.len();
    let sizes = split_sizes(n, fractions);
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Config(format!(
            "{} conversations cannot fill split {i} at fraction {}",
            n, fractions[i]
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut parts = Vec::with_capacity(3);
    let mut start = 0;
    for size in sizes {
        let mut idx = order[start..start + size].to_vec();
        idx.sort_unstable();
        start += size;
        let convs = idx
            .into_iter()
            .map(|i| manifest.conversations[i].clone())
            .collect();
        parts.push(manifest.with_conversations(convs));
    }
    let test = parts.pop().expect("three parts");
    let dev = parts.pop().expect("three parts");
    let train = parts.pop().expect("three parts");
    Ok((train, dev, test))
}
