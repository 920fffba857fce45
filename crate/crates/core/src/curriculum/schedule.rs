use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::difficulty::sort_by_difficulty;
use crate::error::{Error, Result};

/// Conversations partitioned into buckets of increasing difficulty.
#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumSchedule {
    buckets: Vec<Vec<String>>,
    difficulties: IndexMap<String, f64>,
}

impl CurriculumSchedule {
    pub fn buckets(&self) -> &[Vec<String>] {
        &self.buckets
    }

    pub fn num_buckets(&self) -> usize {
        self.buckets.len()
    }

    pub fn difficulty(&self, id: &str) -> Option<f64> {
        self.difficulties.get(id).copied()
    }

    pub fn difficulties(&self) -> &IndexMap<String, f64> {
        &self.difficulties
    }

    pub fn num_conversations(&self) -> usize {
        self.difficulties.len()
    }

    /// Buckets in play at `epoch` (1-based): one more bucket every
    /// `epochs_per_bucket` epochs until all are included.
    pub fn buckets_at(&self, epoch: usize, epochs_per_bucket: usize) -> usize {
        let per = epochs_per_bucket.max(1);
        epoch.div_ceil(per).clamp(1, self.buckets.len())
    }

    /// Conversations trained on at `epoch`, easiest first.
    pub fn conversations_at(&self, epoch: usize, epochs_per_bucket: usize) -> Vec<String> {
        self.buckets[..self.buckets_at(epoch, epochs_per_bucket)]
            .iter()
            .flatten()
            .cloned()
            .collect()
    }
}

/// Sorts conversations by difficulty (ties by id) and cuts them into
/// `num_buckets` contiguous buckets whose sizes differ by at most one,
/// larger buckets first.
pub fn build_schedule(difficulties: &[(String, f64)], num_buckets: usize) -> Result<CurriculumSchedule> {
    let n = difficulties.len();
    if num_buckets == 0 {
        return Err(Error::Config("curriculum needs at least one bucket".into()));
    }
    if num_buckets > n {
        return Err(Error::Config(format!(
            "{num_buckets} buckets requested for {n} conversations"
        )));
    }
    if let Some((id, _)) = difficulties.iter().find(|(_, d)| !d.is_finite()) {
        return Err(Error::Data(format!("conversation `{id}` has a non-finite difficulty")));
    }
    let mut sorted = difficulties.to_vec();
    sort_by_difficulty(&mut sorted);
    let mut map = IndexMap::with_capacity(n);
    for (id, d) in &sorted {
        if map.insert(id.clone(), *d).is_some() {
            return Err(Error::Data(format!("conversation id `{id}` appears twice")));
        }
    }

    let base = n / num_buckets;
    let extra = n % num_buckets;
    let mut buckets = Vec::with_capacity(num_buckets);
    let mut start = 0;
    for b in 0..num_buckets {
        let size = base + usize::from(b < extra);
        buckets.push(sorted[start..start + size].iter().map(|(id, _)| id.clone()).collect());
        start += size;
    }
    Ok(CurriculumSchedule {
        buckets,
        difficulties: map,
    })
}

/// Training conversations for each epoch `1..=total_epochs`, each list a
/// seeded shuffle of the buckets in play.
pub fn curriculum_epoch_plan(
    schedule: &CurriculumSchedule,
    total_epochs: usize,
    epochs_per_bucket: usize,
    seed: u64,
) -> Vec<Vec<String>> {
    (1..=total_epochs)
        .map(|epoch| shuffle_for_epoch(schedule.conversations_at(epoch, epochs_per_bucket), seed, epoch))
        .collect()
}

/// Seeded order for one epoch. The result depends only on the set of ids,
/// the seed and the epoch, not on the input order.
pub fn shuffle_for_epoch(mut ids: Vec<String>, seed: u64, epoch: usize) -> Vec<String> {
    ids.sort_unstable();
    ids.shuffle(&mut epoch_rng(seed, epoch));
    ids
}

/// RNG for shuffling epoch `epoch`: the run seed on a per-epoch stream.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn entries(n: usize) -> Vec<(String, f64)> {
        // difficulty decreasing with id so sorting matters
        (0..n).map(|i| (format!("c{i:02}"), 1.0 / (1.0 + i as f64))).collect()
    }

    #[test]
    fn ten_into_five() {
        let s = build_schedule(&entries(10), 5).unwrap();
        assert!(s.buckets().iter().all(|b| b.len() == 2));
        assert_eq!(s.buckets()[0], vec!["c09", "c08"]);
        let maxes: Vec<f64> = s
            .buckets()
            .iter()
            .map(|b| b.iter().map(|id| s.difficulty(id).unwrap()).fold(f64::MIN, f64::max))
            .collect();
        for w in s.buckets().windows(2).zip(maxes.windows(2)) {
            let min_next = w.0[1].iter().map(|id| s.difficulty(id).unwrap()).fold(f64::MAX, f64::min);
            assert!(w.1[0] <= min_next);
        }
    }

    #[test]
    fn uneven_sizes_larger_first() {
        let s = build_schedule(&entries(7), 3).unwrap();
        let sizes: Vec<usize> = s.buckets().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
    }

    #[test]
    fn single_bucket_holds_everything() {
        let s = build_schedule(&entries(6), 1).unwrap();
        assert_eq!(s.buckets()[0].len(), 6);
        let plan = curriculum_epoch_plan(&s, 3, 1, 0);
        assert!(plan.iter().all(|e| e.len() == 6));
    }

    #[test]
    fn equal_difficulties_follow_id_order() {
        let e: Vec<(String, f64)> = ["d", "a", "c", "b"].iter().map(|s| (s.to_string(), 0.5)).collect();
        let s = build_schedule(&e, 2).unwrap();
        assert_eq!(s.buckets(), &[vec!["a", "b"], vec!["c", "d"]]);
    }

    #[test]
    fn too_many_buckets_is_config_error() {
        assert!(matches!(build_schedule(&entries(3), 4), Err(Error::Config(_))));
        assert!(matches!(build_schedule(&entries(3), 0), Err(Error::Config(_))));
    }

    #[test]
    fn cumulative_plan() {
        let s = build_schedule(&entries(10), 5).unwrap();
        let plan = curriculum_epoch_plan(&s, 9, 1, 7);
        for (e, ids) in plan.iter().enumerate() {
            let epoch = e + 1;
            let expected: BTreeSet<&String> = s.buckets()[..epoch.min(5)].iter().flatten().collect();
            let got: BTreeSet<&String> = ids.iter().collect();
            assert_eq!(got, expected, "epoch {epoch}");
        }
        assert_eq!(plan, curriculum_epoch_plan(&s, 9, 1, 7));
    }

    #[test]
    fn one_bucket_plan_is_a_plain_shuffle() {
        let e = entries(6);
        let s = build_schedule(&e, 1).unwrap();
        let ids: Vec<String> = e.iter().map(|(id, _)| id.clone()).collect();
        let plain: Vec<Vec<String>> = (1..=4).map(|ep| shuffle_for_epoch(ids.clone(), 3, ep)).collect();
        assert_eq!(curriculum_epoch_plan(&s, 4, 1, 3), plain);
    }

    #[test]
    fn epochs_per_bucket_slows_the_ramp() {
        let s = build_schedule(&entries(10), 5).unwrap();
        let sizes: Vec<usize> = curriculum_epoch_plan(&s, 12, 2, 0).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 2, 4, 4, 6, 6, 8, 8, 10, 10, 10, 10]);
    }
}
