use std::collections::{BTreeMap, HashMap, HashSet};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numkernel::SeededRng;

/// Train / validation / test proportions by segment count.
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.5, 0.2, 0.3];

/// Sample indices of each partition, in dataset order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

const PARTITION_NAMES: [&str; 3] = ["train", "val", "test"];

impl Split {
    pub fn partitions(&self) -> [&[usize]; 3] {
        [&self.train, &self.val, &self.test]
    }

    /// One `partition,segment id` line per segment, partitions in
    /// train / val / test order.
    pub fn to_text(&self, dataset: &Dataset) -> String {
        let mut out = String::new();
        for (name, part) in PARTITION_NAMES.iter().zip(self.partitions()) {
            for &i in part {
                out.push_str(name);
                out.push(',');
                out.push_str(&dataset.samples[i].id);
                out.push('\n');
            }
        }
        out
    }

    /// Parses split text against the segment ids of `dataset`. Segments not
    /// listed belong to no partition; listing one twice is an error.
    pub fn parse(text: &str, dataset: &Dataset) -> Result<Split> {
        let index: HashMap<&str, usize> =
            dataset.samples.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
        let mut seen = HashSet::new();
        let mut parts: [Vec<usize>; 3] = Default::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (name, id) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(n + 1, "expected 'partition,id'"))?;
            let p = PARTITION_NAMES
                .iter()
                .position(|x| *x == name)
                .ok_or_else(|| Error::parse(n + 1, format!("unknown partition '{name}'")))?;
            let i = *index
                .get(id)
                .ok_or_else(|| Error::parse(n + 1, format!("unknown segment '{id}'")))?;
            if !seen.insert(i) {
                return Err(Error::parse(n + 1, format!("segment '{id}' listed twice")));
            }
            parts[p].push(i);
        }
        for p in &mut parts {
            p.sort_unstable();
        }
        let [train, val, test] = parts;
        Ok(Split { train, val, test })
    }
}

/// Assigns whole groups to partitions so that segment counts approach
/// `fractions`.
///
/// Groups are visited in shuffled order and each goes to the partition with
/// the largest remaining deficit (ties to the earlier partition). Any
/// partition left empty then takes the smallest group of the most populated
/// partition.
pub fn split_grouped(dataset: &Dataset, fractions: [f64; 3], rng: &mut SeededRng) -> Result<Split> {
    if fractions.iter().any(|f| !(*f > 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!("split fractions {fractions:?} must be positive and sum to 1")));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in dataset.samples.iter().enumerate() {
        groups.entry(s.group.as_str()).or_default().push(i);
    }
    if groups.len() < 3 {
        return Err(Error::input(format!(
            "{} groups cannot fill three disjoint partitions",
            groups.len()
        )));
    }
    let mut order: Vec<Vec<usize>> = groups.into_values().collect();
    rng.shuffle(&mut order);

    let n = dataset.len() as f64;
    let targets: Vec<f64> = fractions.iter().map(|f| f * n).collect();
    let mut counts = [0usize; 3];
    let mut assigned: [Vec<usize>; 3] = Default::default();
    for (g, members) in order.iter().enumerate() {
        let mut best = 0;
        for p in 1..3 {
            if targets[p] - counts[p] as f64 > targets[best] - counts[best] as f64 {
                best = p;
            }
        }
        counts[best] += members.len();
        assigned[best].push(g);
    }
    for p in 0..3 {
        if assigned[p].is_empty() {
            let donor = (0..3).max_by_key(|&q| (assigned[q].len() > 1, counts[q])).expect("three partitions");
            let (pos, &g) = assigned[donor]
                .iter()
                .enumerate()
                .min_by_key(|(_, &g)| order[g].len())
                .expect("donor has groups");
            assigned[donor].remove(pos);
            counts[donor] -= order[g].len();
            counts[p] += order[g].len();
            assigned[p].push(g);
        }
    }
    let collect = |p: usize| {
        let mut idx: Vec<usize> = assigned[p].iter().flat_map(|&g| order[g].iter().copied()).collect();
        idx.sort_unstable();
        idx
    };
    Ok(Split {
        train: collect(0),
        val: collect(1),
        test: collect(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetHeader, SegmentSample};
    use crate::hierarchy::ClassHierarchy;
    use crate::numkernel::Matrix;

    fn dataset(groups: &[usize]) -> Dataset {
        let header = DatasetHeader {
            radar_channels: vec!["VV".into()],
            radar_dates: vec!["d0".into()],
            optical_channels: vec!["R".into()],
            optical_dates: vec!["d0".into()],
        };
        let samples = groups
            .iter()
            .enumerate()
            .map(|(i, g)| SegmentSample {
                id: format!("s{i}"),
                group: format!("g{g}"),
                radar: Matrix::zeros(1, 1),
                optical: Matrix::zeros(1, 1),
                label: 0,
            })
            .collect();
        Dataset::new(header, samples, ClassHierarchy::single_level(vec!["c".into()]).unwrap()).unwrap()
    }

    #[test]
    fn singleton_groups_split_exactly() {
        let ds = dataset(&(0..10).collect::<Vec<_>>());
        for seed in 0..20 {
            let s = split_grouped(&ds, DEFAULT_FRACTIONS, &mut SeededRng::new(seed)).unwrap();
            assert_eq!((s.train.len(), s.val.len(), s.test.len()), (5, 2, 3));
        }
    }

    #[test]
    fn one_group_is_an_error() {
        let ds = dataset(&[0; 10]);
        assert!(matches!(split_grouped(&ds, DEFAULT_FRACTIONS, &mut SeededRng::new(1)).unwrap_err(), Error::Input(_)));
    }

    #[test]
    fn bad_fractions() {
        let ds = dataset(&(0..10).collect::<Vec<_>>());
        assert!(split_grouped(&ds, [0.5, 0.5, 0.5], &mut SeededRng::new(1)).is_err());
        assert!(split_grouped(&ds, [1.0, 0.0, 0.0], &mut SeededRng::new(1)).is_err());
    }

    #[test]
    fn partitions_cover_and_respect_groups() {
        let groups: Vec<usize> = (0..500).map(|i| i / 5).collect();
        let ds = dataset(&groups);
        for seed in 0..10 {
            let s = split_grouped(&ds, DEFAULT_FRACTIONS, &mut SeededRng::new(seed)).unwrap();
            let mut all: Vec<usize> = s.partitions().concat();
            all.sort_unstable();
            assert_eq!(all, (0..500).collect::<Vec<_>>());
            let owners: Vec<HashSet<&str>> = s
                .partitions()
                .iter()
                .map(|p| p.iter().map(|&i| ds.samples[i].group.as_str()).collect())
                .collect();
            for a in 0..3 {
                for b in a + 1..3 {
                    assert!(owners[a].is_disjoint(&owners[b]));
                }
            }
            for (p, f) in s.partitions().iter().zip(DEFAULT_FRACTIONS) {
                assert!((p.len() as f64 / 500.0 - f).abs() <= 0.05);
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let groups: Vec<usize> = (0..60).map(|i| i / 3).collect();
        let ds = dataset(&groups);
        let a = split_grouped(&ds, DEFAULT_FRACTIONS, &mut SeededRng::new(9)).unwrap();
        let b = split_grouped(&ds, DEFAULT_FRACTIONS, &mut SeededRng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uneven_groups_still_fill_every_partition() {
        let mut groups = vec![0; 40];
        groups.extend([1, 2]);
        let ds = dataset(&groups);
        for seed in 0..10 {
            let s = split_grouped(&ds, DEFAULT_FRACTIONS, &mut SeededRng::new(seed)).unwrap();
            assert!(s.partitions().iter().all(|p| !p.is_empty()));
        }
    }

    #[test]
    fn text_roundtrip() {
        let ds = dataset(&[0, 0, 1, 2, 3, 3, 4]);
        let s = split_grouped(&ds, DEFAULT_FRACTIONS, &mut SeededRng::new(3)).unwrap();
        assert_eq!(Split::parse(&s.to_text(&ds), &ds).unwrap(), s);
    }

    #[test]
    fn text_errors() {
        let ds = dataset(&[0, 1, 2]);
        let line = |text: &str| match Split::parse(text, &ds).unwrap_err() {
            Error::Parse { line, .. } => line,
            e => panic!("{e}"),
        };
        assert_eq!(line("train,s0\nval s1\n"), 2);
        assert_eq!(line("train,s0\nholdout,s1\n"), 2);
        assert_eq!(line("train,s9\n"), 1);
        assert_eq!(line("train,s0\ntest,s1\nval,s0\n"), 3);
        let partial = Split::parse("\ntest,s2\n", &ds).unwrap();
        assert_eq!(partial, Split { train: vec![], val: vec![], test: vec![2] });
    }
}
