use super::config::{ConfigError, SplitSpec};
use super::{Dataset, IdentityType};
use crate::hashing::stable_hash;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

/// Unit ids per partition: sample ids for grouped data, instance ids otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<String>,
    pub validation: Vec<String>,
}

/// Splits with-identity data at sample granularity (stratified by identity
/// type) and identity-stripped data at instance granularity. Units are ranked
/// by a seeded hash of their law-situation pair, so identity types that share
/// pairs also share the partition of those pairs.
pub fn split(dataset: &Dataset, spec: &SplitSpec, seed: u64) -> Result<Partition, ConfigError> {
    spec.validate()?;
    // (group, unit id, law, situation) in canonical order
    let units: Vec<(Option<IdentityType>, &str, &str, &str)> = if dataset.has_samples() {
        dataset
            .samples
            .iter()
            .map(|s| (Some(s.identity_type), s.sample_id.as_str(), s.law_id.as_str(), s.situation_id.as_str()))
            .collect()
    } else {
        dataset
            .instances
            .iter()
            .map(|i| (None, i.instance_id.as_str(), i.law_id.as_str(), i.situation_id.as_str()))
            .collect()
    };

    let mut groups: BTreeMap<Option<IdentityType>, Vec<(u64, &str)>> = BTreeMap::new();
    for (group, id, law, situation) in &units {
        let rank = stable_hash(seed, &["split", law, situation]);
        groups.entry(*group).or_default().push((rank, id));
    }

    let mut train_ids: HashSet<&str> = HashSet::new();
    for (group, mut members) in groups {
        let n = members.len();
        let n_train = match *spec {
            SplitSpec::Fractions { train, .. } => ((n as f64) * train).round() as usize,
            SplitSpec::Counts {
                train_count,
                validation_count,
            } => {
                if train_count + validation_count != n {
                    let which = group.map(|g| g.to_string()).unwrap_or_else(|| "instances".into());
                    return Err(ConfigError::invalid(format!(
                        "split counts {train_count} + {validation_count} do not cover the {n} units of group `{which}`"
                    )));
                }
                train_count
            }
        };
        members.sort_unstable();
        train_ids.extend(members.iter().take(n_train).map(|(_, id)| *id));
    }

    let (train, validation): (Vec<_>, Vec<_>) = units.iter().map(|u| u.1).partition(|id| train_ids.contains(id));
    Ok(Partition {
        train: train.into_iter().map(str::to_string).collect(),
        validation: validation.into_iter().map(str::to_string).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_with_id, generate_without_id, CorpusConfig};

    fn config_with_360_pairs() -> CorpusConfig {
        let mut c = CorpusConfig::bundled();
        c.pairs_per_type = Some(360);
        c
    }

    #[test]
    fn table_split_sizes() {
        let c = config_with_360_pairs();
        let d = generate_with_id(&c).unwrap();
        let p = split(&d, &c.split_spec, c.seed).unwrap();
        // 315 / 45 per identity type
        assert_eq!(p.train.len(), 315 * 4);
        assert_eq!(p.validation.len(), 45 * 4);
        for t in IdentityType::ALL {
            let prefix = format!("bsr_with_id/{t}/");
            assert_eq!(p.train.iter().filter(|s| s.starts_with(&prefix)).count(), 315);
        }
    }

    #[test]
    fn partitions_are_disjoint_exhaustive_and_deterministic() {
        let c = CorpusConfig::bundled();
        let d = generate_without_id(&c).unwrap();
        let a = split(&d, &c.split_spec, 3).unwrap();
        let b = split(&d, &c.split_spec, 3).unwrap();
        assert_eq!(a, b);
        let all: HashSet<&String> = a.train.iter().chain(&a.validation).collect();
        assert_eq!(all.len(), d.instances.len());
        assert_ne!(a, split(&d, &c.split_spec, 4).unwrap());
    }

    #[test]
    fn counts_must_cover_units() {
        let c = CorpusConfig::bundled();
        let d = generate_without_id(&c).unwrap();
        let ok = SplitSpec::Counts { train_count: 1400, validation_count: 100 };
        assert_eq!(split(&d, &ok, 1).unwrap().validation.len(), 100);
        let bad = SplitSpec::Counts { train_count: 10, validation_count: 10 };
        assert!(split(&d, &bad, 1).is_err());
    }

    #[test]
    fn fraction_outside_unit_interval_is_error() {
        let d = Dataset::default();
        let spec = SplitSpec::Fractions { train: 1.2, validation: -0.2 };
        assert!(split(&d, &spec, 1).is_err());
    }
}
