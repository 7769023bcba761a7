//! Seeded 90/10 train/dev partitioning.

use crate::io::seeded_key;

/// `(train, dev)` sizes for `n` items: train gets `floor(0.9 n)`, dev the rest.
pub fn split_sizes(n: usize) -> (usize, usize) {
    let train = n * 9 / 10;
    (train, n - train)
}

/// Partitions `items` into train and dev. Membership depends only on each
/// item's key bytes and the seed, never on input order; both halves keep
/// the input order.
pub fn seeded_split<T, K, F>(items: Vec<T>, seed: u64, key: F) -> (Vec<T>, Vec<T>)
where
    K: AsRef<[u8]>,
    F: Fn(&T) -> K,
{
    let n = items.len();
    let (_, dev_n) = split_sizes(n);
    if n > 0 && n < 10 {
        log::warn!("splitting only {n} items; dev split receives {dev_n}");
    }
    let keys: Vec<K> = items.iter().map(&key).collect();
    let mut ranked: Vec<(u64, usize)> = keys
        .iter()
        .enumerate()
        .map(|(i, k)| (seeded_key(seed, &[b"split", k.as_ref()]), i))
        .collect();
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| keys[a.1].as_ref().cmp(keys[b.1].as_ref())));
    let mut is_dev = vec![false; n];
    for &(_, i) in ranked.iter().take(dev_n) {
        is_dev[i] = true;
    }
    let mut train = Vec::with_capacity(n - dev_n);
    let mut dev = Vec::with_capacity(dev_n);
    for (item, d) in items.into_iter().zip(is_dev) {
        if d {
            dev.push(item);
        } else {
            train.push(item);
        }
    }
    (train, dev)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: u64) -> Vec<u64> {
        (0..n).collect()
    }

    #[test]
    fn hundred_items_split_90_10() {
        let (train, dev) = seeded_split(ids(100), 3, |i| i.to_le_bytes());
        assert_eq!((train.len(), dev.len()), (90, 10));
        let mut all: Vec<u64> = train.iter().chain(&dev).copied().collect();
        all.sort();
        assert_eq!(all, ids(100));
    }

    #[test]
    fn same_seed_same_partition_regardless_of_order() {
        let (_, dev_a) = seeded_split(ids(50), 9, |i| i.to_le_bytes());
        let mut rev = ids(50);
        rev.reverse();
        let (_, mut dev_b) = seeded_split(rev, 9, |i| i.to_le_bytes());
        dev_b.sort();
        assert_eq!(dev_a, dev_b);
    }

    #[test]
    fn small_inputs_still_get_a_dev_item() {
        for n in 1..10 {
            let (train, dev) = seeded_split(ids(n), 0, |i| i.to_le_bytes());
            assert!(!dev.is_empty());
            assert_eq!(train.len() + dev.len(), n as usize);
        }
        let (train, dev) = seeded_split(Vec::<u64>::new(), 0, |i| i.to_le_bytes());
        assert!(train.is_empty() && dev.is_empty());
    }

    #[test]
    fn sizes_are_floor_and_ceil() {
        assert_eq!(split_sizes(78_589), (70_730, 7_859));
        assert_eq!(split_sizes(15), (13, 2));
    }
}
