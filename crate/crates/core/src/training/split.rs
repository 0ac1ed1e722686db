use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WiceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    ByPage,
    BySite,
}

impl SplitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitMode::ByPage => "by_page",
            SplitMode::BySite => "by_site",
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitMode {
    type Err = WiceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "by_page" => Ok(SplitMode::ByPage),
            "by_site" => Ok(SplitMode::BySite),
            _ => Err(WiceError::InvalidConfig(format!("unknown split mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    /// Train, validation, test.
    pub ratios: (u32, u32, u32),
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(mode: SplitMode, seed: u64) -> Self {
        SplitSpec { mode, ratios: (5, 2, 3), seed }
    }

    /// Sizes of the three parts for `n` units by largest remainder, so each
    /// part is within one unit of its exact share. Ties favour train, then
    /// validation.
    pub fn cut_sizes(&self, n: usize) -> (usize, usize, usize) {
        let (a, b, c) = self.ratios;
        let ratios = [a as usize, b as usize, c as usize];
        let total: usize = ratios.iter().sum();
        let mut sizes = ratios.map(|r| n * r / total);
        let left = n - sizes.iter().sum::<usize>();
        let mut order = [0, 1, 2];
        order.sort_by_key(|&i| std::cmp::Reverse(n * ratios[i] % total));
        for &i in order.iter().take(left) {
            sizes[i] += 1;
        }
        (sizes[0], sizes[1], sizes[2])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub mode: SplitMode,
    pub seed: u64,
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn part(&self, name: &str) -> Option<&[String]> {
        match name {
            "train" => Some(&self.train),
            "valid" => Some(&self.valid),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Partition `(page_id, site_id)` pairs. Input order does not matter; each
/// part is returned sorted.
pub fn split_dataset(pages: &[(String, String)], spec: &SplitSpec) -> Result<Split> {
    if pages.is_empty() {
        return Err(WiceError::EmptyCorpus);
    }
    let (a, b, c) = spec.ratios;
    if a == 0 || b == 0 || c == 0 {
        return Err(WiceError::InvalidConfig("split ratios must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parts: [BTreeSet<String>; 3] = Default::default();
    match spec.mode {
        SplitMode::ByPage => {
            let mut ids: Vec<&String> = pages.iter().map(|(p, _)| p).collect::<BTreeSet<_>>().into_iter().collect();
            ids.shuffle(&mut rng);
            let (train, valid, _) = spec.cut_sizes(ids.len());
            for (i, id) in ids.into_iter().enumerate() {
                parts[bucket(i, train, valid)].insert(id.clone());
            }
        }
        SplitMode::BySite => {
            let mut by_site: BTreeMap<&str, Vec<&String>> = BTreeMap::new();
            for (p, s) in pages {
                by_site.entry(s).or_default().push(p);
            }
            let mut sites: Vec<&str> = by_site.keys().copied().collect();
            sites.shuffle(&mut rng);
            let (train, valid, _) = spec.cut_sizes(sites.len());
            for (i, site) in sites.into_iter().enumerate() {
                let k = bucket(i, train, valid);
                parts[k].extend(by_site[site].iter().map(|p| (*p).clone()));
            }
        }
    }
    let [train, valid, test] = parts;
    Ok(Split {
        mode: spec.mode,
        seed: spec.seed,
        train: train.into_iter().collect(),
        valid: valid.into_iter().collect(),
        test: test.into_iter().collect(),
    })
}

fn bucket(i: usize, train: usize, valid: usize) -> usize {
    if i < train {
        0
    } else if i < train + valid {
        1
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pages(n: usize, sites: usize) -> Vec<(String, String)> {
        (0..n).map(|i| (format!("p{i:05}"), format!("s{}", i % sites))).collect()
    }

    #[test]
    fn ten_pages_by_page() {
        let s = split_dataset(&pages(10, 3), &SplitSpec::new(SplitMode::ByPage, 0)).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (5, 2, 3));
    }

    #[test]
    fn shared_site_stays_together() {
        let p = vec![
            ("a".to_string(), "x".to_string()),
            ("b".to_string(), "x".to_string()),
            ("c".to_string(), "y".to_string()),
        ];
        for seed in 0..20 {
            let s = split_dataset(&p, &SplitSpec::new(SplitMode::BySite, seed)).unwrap();
            let together = [&s.train, &s.valid, &s.test].iter().any(|part| part.contains(&"a".into()) && part.contains(&"b".into()));
            assert!(together);
        }
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(split_dataset(&[], &SplitSpec::new(SplitMode::ByPage, 0)), Err(WiceError::EmptyCorpus)));
    }

    #[test]
    fn largest_remainder_cuts() {
        let spec = SplitSpec::new(SplitMode::ByPage, 0);
        assert_eq!(spec.cut_sizes(7), (4, 1, 2));
        assert_eq!(spec.cut_sizes(9), (4, 2, 3));
        assert_eq!(spec.cut_sizes(1), (1, 0, 0));
        assert_eq!(spec.cut_sizes(20), (10, 4, 6));
        for n in 0..500 {
            let (t, v, e) = spec.cut_sizes(n);
            assert_eq!(t + v + e, n);
            for (size, share) in [(t, 0.5), (v, 0.2), (e, 0.3)] {
                assert!((size as f64 - share * n as f64).abs() < 1.0, "{n}");
            }
        }
    }

    proptest! {
        #[test]
        fn partitions_are_sound(n in 1usize..300, sites in 1usize..40, seed in any::<u64>(), by_site in any::<bool>()) {
            let p = pages(n, sites.min(n));
            let mode = if by_site { SplitMode::BySite } else { SplitMode::ByPage };
            let spec = SplitSpec::new(mode, seed);
            let s = split_dataset(&p, &spec).unwrap();
            let mut all: Vec<&String> = s.train.iter().chain(&s.valid).chain(&s.test).collect();
            all.sort();
            let expected: Vec<&String> = p.iter().map(|(id, _)| id).collect();
            prop_assert_eq!(all, expected);
            prop_assert_eq!(&s, &split_dataset(&p, &spec).unwrap());
            if !by_site {
                let (a, b, c) = spec.cut_sizes(n);
                prop_assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (a, b, c));
            }
        }
    }
}
