use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LabeledClip, SplitRatios};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<LabeledClip>,
    pub val: Vec<LabeledClip>,
    pub test: Vec<LabeledClip>,
}

impl Splits {
    pub fn parts(&self) -> [&[LabeledClip]; 3] {
        [&self.train, &self.val, &self.test]
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Apportions `total` by `ratios` with the largest-remainder rule.
fn apportion(total: usize, ratios: &[f64]) -> Vec<usize> {
    let ideal: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    let mut counts: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        (ideal[b] - ideal[b].floor())
            .total_cmp(&(ideal[a] - ideal[a].floor()))
            .then(a.cmp(&b))
    });
    let mut left = total - counts.iter().sum::<usize>();
    for &j in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[j] += 1;
        left -= 1;
    }
    counts
}

/// Per-stratum clip targets whose column sums equal the global
/// apportionment, each within one clip of the stratum's ideal share.
fn stratum_targets(sizes: &[usize], ratios: &[f64]) -> Vec<Vec<usize>> {
    let total: usize = sizes.iter().sum();
    let global = apportion(total, ratios);
    let floors: Vec<Vec<usize>> = sizes
        .iter()
        .map(|&n| {
            ratios
                .iter()
                .map(|r| (r * n as f64).floor() as usize)
                .collect()
        })
        .collect();
    let mut leftover: Vec<usize> = sizes
        .iter()
        .zip(&floors)
        .map(|(&n, t)| n - t.iter().sum::<usize>())
        .collect();
    let mut need: Vec<usize> = (0..ratios.len())
        .map(|j| global[j] - floors.iter().map(|t| t[j]).sum::<usize>())
        .collect();
    // extra[s][j]: stratum s gives split j one clip above its floor
    let mut extra = vec![vec![false; ratios.len()]; sizes.len()];

    let mut candidates = Vec::new();
    for (s, &n) in sizes.iter().enumerate() {
        for (j, r) in ratios.iter().enumerate() {
            let ideal = r * n as f64;
            candidates.push((ideal - ideal.floor(), s, j));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for &(_, s, j) in &candidates {
        if leftover[s] > 0 && need[j] > 0 {
            extra[s][j] = true;
            leftover[s] -= 1;
            need[j] -= 1;
        }
    }
    // the greedy pass can strand a remainder; reroute it along augmenting
    // paths, which always exist because row and column totals agree
    for s in 0..sizes.len() {
        while leftover[s] > 0 {
            let mut visited = vec![false; ratios.len()];
            let found = augment(s, &mut extra, &mut need, &mut visited);
            debug_assert!(found, "no augmenting path");
            if !found {
                break;
            }
            leftover[s] -= 1;
        }
    }
    floors
        .into_iter()
        .zip(extra)
        .map(|(f, e)| {
            f.into_iter()
                .zip(e)
                .map(|(c, x)| c + usize::from(x))
                .collect()
        })
        .collect()
}

/// Finds a split for one more clip from stratum `s`, possibly moving
/// other strata's extra clips to different splits.
fn augment(s: usize, extra: &mut [Vec<bool>], need: &mut [usize], visited: &mut [bool]) -> bool {
    for j in 0..need.len() {
        if extra[s][j] || visited[j] {
            continue;
        }
        visited[j] = true;
        if need[j] > 0 {
            need[j] -= 1;
            extra[s][j] = true;
            return true;
        }
        for other in 0..extra.len() {
            if other != s && extra[other][j] {
                extra[other][j] = false;
                if augment(other, extra, need, visited) {
                    extra[s][j] = true;
                    return true;
                }
                extra[other][j] = true;
            }
        }
    }
    false
}

/// Splits clips into train/validation/test, stratified by label and
/// grouped by source so no recording contributes to two splits.
///
/// Groups within each stratum are shuffled by `seed` and dealt to
/// whichever split is furthest below its clip target. Output order within
/// each split follows clip id.
pub fn split(clips: &[LabeledClip], ratios: SplitRatios, seed: u64) -> Result<Splits> {
    ratios.validate()?;
    if clips.is_empty() {
        return Err(Error::TooFewClips("no clips".into()));
    }
    // group by source; a group's stratum is its first clip's label key
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in clips.iter().enumerate() {
        groups.entry(c.source.as_str()).or_default().push(i);
    }
    let mut strata: BTreeMap<String, Vec<Vec<usize>>> = BTreeMap::new();
    for (_, members) in groups {
        strata
            .entry(clips[members[0]].label_key())
            .or_default()
            .push(members);
    }
    let sizes: Vec<usize> = strata
        .values()
        .map(|gs| gs.iter().map(Vec::len).sum())
        .collect();
    let r = ratios.as_array();
    let targets = stratum_targets(&sizes, &r);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assigned: [Vec<usize>; 3] = Default::default();
    for ((_, mut gs), target) in strata.into_iter().zip(targets) {
        gs.shuffle(&mut rng);
        let mut filled = [0usize; 3];
        for g in gs {
            let j = (0..3)
                .max_by_key(|&j| (target[j] as i64 - filled[j] as i64, std::cmp::Reverse(j)))
                .unwrap();
            filled[j] += g.len();
            assigned[j].extend(g);
        }
    }

    let mut parts = assigned.map(|idx| {
        let mut v: Vec<LabeledClip> = idx.into_iter().map(|i| clips[i].clone()).collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    });
    // every class of every task must reach every split
    let tasks: Vec<&String> = clips[0].labels.keys().collect();
    for task in tasks {
        let all = super::class_counts(clips, task);
        for (name, part) in ["train", "val", "test"].iter().zip(&parts) {
            let got = super::class_counts(part, task);
            for class in all.keys() {
                if !got.contains_key(class) {
                    return Err(Error::TooFewClips(format!(
                        "{task}={class} has no clips in the {name} split"
                    )));
                }
            }
        }
    }
    let [train, val, test] = std::mem::take(&mut parts);
    Ok(Splits { train, val, test })
}

/// `k` folds over source groups, each fold's groups dealt round-robin
/// after a seeded shuffle. Returns clip indices per fold.
pub fn k_folds(clips: &[LabeledClip], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in clips.iter().enumerate() {
        groups.entry(c.source.as_str()).or_default().push(i);
    }
    if k < 2 || groups.len() < k {
        return Err(Error::TooFewClips(format!(
            "{} source groups cannot fill {k} folds",
            groups.len()
        )));
    }
    let mut gs: Vec<Vec<usize>> = groups.into_values().collect();
    gs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, g) in gs.into_iter().enumerate() {
        folds[i % k].extend(g);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_uses_largest_remainder() {
        assert_eq!(apportion(200, &[0.7, 0.15, 0.15]), vec![140, 30, 30]);
        assert_eq!(apportion(10, &[0.7, 0.15, 0.15]), vec![7, 2, 1]);
        assert_eq!(apportion(0, &[0.5, 0.5]), vec![0, 0]);
    }

    #[test]
    fn stratum_targets_sum_to_global() {
        let sizes = [13, 7, 22, 9];
        let r = [0.7, 0.15, 0.15];
        let t = stratum_targets(&sizes, &r);
        let global = apportion(51, &r);
        for j in 0..3 {
            assert_eq!(t.iter().map(|row| row[j]).sum::<usize>(), global[j]);
        }
        for (row, &n) in t.iter().zip(&sizes) {
            assert_eq!(row.iter().sum::<usize>(), n);
            for j in 0..3 {
                assert!((row[j] as f64 - r[j] * n as f64).abs() <= 1.0);
            }
        }
    }
}
