//! Seeded stand-ins for the 20 KEEL benchmark tables.
//!
//! Each surrogate keeps the benchmark's name, feature count and class counts
//! and is emitted as KEEL text, so it flows through the same parser as a real
//! file. Features live on `[0, 1]`; the minority class is a shifted, tighter
//! cluster that overlaps the majority along a few informative features.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataio::{parse_keel, Dataset};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetInfo {
    pub name: &'static str,
    pub features: usize,
    pub minority: usize,
    pub majority: usize,
}

impl DatasetInfo {
    pub fn rows(&self) -> usize {
        self.minority + self.majority
    }

    pub fn imbalance_ratio(&self) -> f64 {
        self.majority as f64 / self.minority as f64
    }
}

const fn info(name: &'static str, features: usize, minority: usize, majority: usize) -> DatasetInfo {
    DatasetInfo {
        name,
        features,
        minority,
        majority,
    }
}

pub const CATALOG: [DatasetInfo; 20] = [
    info("abalone9-18", 8, 42, 689),
    info("ecoli4", 7, 20, 316),
    info("page-blocks-1-3-vs-4", 10, 28, 444),
    info("yeast5", 8, 44, 1440),
    info("yeast-0-5-6-7-9-vs-4", 8, 51, 477),
    info("yeast-2-vs-4", 9, 51, 463),
    info("ecoli1", 7, 77, 259),
    info("ecoli2", 7, 52, 284),
    info("ecoli3", 7, 35, 301),
    info("ecoli-0-vs-1", 7, 77, 143),
    info("glass-0-1-2-3-vs-4-5-6", 9, 51, 163),
    info("haberman", 3, 81, 225),
    info("newthyroid2", 5, 35, 180),
    info("segment0", 19, 329, 1979),
    info("vehicle2", 18, 218, 628),
    info("yeast3", 8, 163, 1321),
    info("heart", 13, 120, 150),
    info("ionosphere", 33, 126, 225),
    info("spambase", 57, 1812, 2785),
    info("titanic", 3, 711, 1490),
];

pub fn lookup(name: &str) -> Option<DatasetInfo> {
    CATALOG.iter().copied().find(|d| d.name == name)
}

fn name_seed(name: &str) -> u64 {
    let tags: Vec<u64> = name.bytes().map(u64::from).collect();
    derive_seed(0x5eed, &tags)
}

/// KEEL text for the named surrogate. `abalone9-18` gets a leading
/// three-valued `Sex` attribute like the original.
pub fn keel_text(name: &str) -> Result<String> {
    let info = lookup(name).ok_or_else(|| Error::Config(format!("no surrogate for dataset `{name}`")))?;
    let mut rng = seeded(name_seed(name));
    let categorical = name == "abalone9-18";
    let numeric = if categorical { info.features - 1 } else { info.features };

    // Roughly a third of the numeric features carry the class signal.
    let informative = numeric.div_ceil(3).max(1);
    let base: Vec<f64> = (0..numeric).map(|_| rng.random_range(0.3..0.7)).collect();
    let shift: Vec<f64> = (0..numeric)
        .map(|j| {
            if j < informative {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                sign * rng.random_range(0.12..0.22)
            } else {
                0.0
            }
        })
        .collect();
    let wide = Normal::new(0.0, 0.13).expect("valid sigma");
    let tight = Normal::new(0.0, 0.09).expect("valid sigma");

    let mut text = format!("@relation {name}\n");
    if categorical {
        text.push_str("@attribute Sex {M, F, I}\n");
    }
    for j in 0..numeric {
        text.push_str(&format!("@attribute A{} real [0.0, 1.0]\n", j + 1));
    }
    text.push_str("@attribute Class {positive, negative}\n@data\n");

    let mut emit = |positive: bool, rng: &mut rand_chacha::ChaCha8Rng| {
        let mut fields = Vec::with_capacity(info.features + 1);
        if categorical {
            let weights = if positive { [0.2, 0.2, 0.6] } else { [0.37, 0.33, 0.3] };
            let u: f64 = rng.random();
            let idx = if u < weights[0] {
                0
            } else if u < weights[0] + weights[1] {
                1
            } else {
                2
            };
            fields.push(["M", "F", "I"][idx].to_string());
        }
        for j in 0..numeric {
            let (centre, noise) = if positive {
                (base[j] + shift[j], tight.sample(rng))
            } else {
                (base[j], wide.sample(rng))
            };
            fields.push(format!("{:.4}", (centre + noise).clamp(0.0, 1.0)));
        }
        fields.push(if positive { "positive" } else { "negative" }.to_string());
        text.push_str(&fields.join(", "));
        text.push('\n');
    };
    // Interleave classes so file order carries no label information.
    let total = info.rows();
    let mut remaining = (info.minority, info.majority);
    for _ in 0..total {
        let p = remaining.0 as f64 / (remaining.0 + remaining.1) as f64;
        let positive = rng.random_bool(p);
        if positive {
            remaining.0 -= 1;
        } else {
            remaining.1 -= 1;
        }
        emit(positive, &mut rng);
    }
    Ok(text)
}

pub fn dataset(name: &str) -> Result<Dataset> {
    parse_keel(&keel_text(name)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{class_stats, FeatureKind};

    #[test]
    fn catalog_matches_class_counts() {
        for info in CATALOG {
            let ds = dataset(info.name).unwrap();
            let (n_min, n_maj, _) = class_stats(&ds);
            assert_eq!((n_min, n_maj), (info.minority, info.majority), "{}", info.name);
            assert_eq!(ds.schema.len(), info.features, "{}", info.name);
            assert_eq!(ds.positive_label, "positive");
        }
    }

    #[test]
    fn abalone_has_categorical_sex() {
        let ds = dataset("abalone9-18").unwrap();
        assert!(matches!(ds.schema.features[0].kind, FeatureKind::Categorical { .. }));
        assert_eq!(ds.schema.encoded_width(), 10);
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(keel_text("haberman").unwrap(), keel_text("haberman").unwrap());
        assert_ne!(keel_text("haberman").unwrap(), keel_text("titanic").unwrap());
        assert!(keel_text("iris").is_err());
    }

    #[test]
    fn imbalance_ratio_of_abalone() {
        assert!((lookup("abalone9-18").unwrap().imbalance_ratio() - 16.4).abs() < 0.01);
    }
}
