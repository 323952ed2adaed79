use super::config::{ConfigError, CorpusConfig};
use super::render::{render_prompt, NameChooser};
use super::{label_of, Dataset, IdentityType, PromptInstance, Sample};
use crate::hashing::stable_hash;
use std::collections::BTreeSet;

pub const WITH_ID: &str = "bsr_with_id";
pub const WITHOUT_ID: &str = "bsr_without_id";
pub const TEST_WITH_ID: &str = "bsr_test_with_id";

/// Law-situation pairs (as indices into the config) used for one identity
/// type, in canonical order. `None` selects all pairs; otherwise the `n`
/// pairs with the smallest seeded hash are kept.
pub fn selected_pairs(
    config: &CorpusConfig,
    identity_type: IdentityType,
    pairs_per_type: Option<usize>,
    seed: u64,
) -> BTreeSet<(usize, usize)> {
    let all = (0..config.laws.len()).flat_map(|l| (0..config.situations.len()).map(move |s| (l, s)));
    match pairs_per_type {
        None => all.collect(),
        Some(n) => {
            let mut ranked: Vec<(u64, (usize, usize))> = all
                .map(|(l, s)| {
                    let h = stable_hash(
                        seed,
                        &[
                            "select",
                            identity_type.as_str(),
                            &config.laws[l].law_id,
                            &config.situations[s].situation_id,
                        ],
                    );
                    (h, (l, s))
                })
                .collect();
            ranked.sort_unstable();
            ranked.into_iter().take(n).map(|(_, p)| p).collect()
        }
    }
}

/// The with-identity corpus: one sample of `K` instances per selected pair
/// and identity type.
pub fn generate_with_id(config: &CorpusConfig) -> Result<Dataset, ConfigError> {
    build_with_id(config, WITH_ID, config.seed, config.pairs_per_type)
}

/// The common test corpus, built the same way from an independent seed.
pub fn generate_test_with_id(config: &CorpusConfig) -> Result<Dataset, ConfigError> {
    build_with_id(config, TEST_WITH_ID, config.test_seed(), config.test_pairs_per_type)
}

fn build_with_id(
    config: &CorpusConfig,
    name: &str,
    seed: u64,
    pairs_per_type: Option<usize>,
) -> Result<Dataset, ConfigError> {
    config.validate()?;
    let names = NameChooser::new(seed);
    let selections: Vec<BTreeSet<(usize, usize)>> = config
        .rosters
        .iter()
        .map(|r| selected_pairs(config, r.identity_type, pairs_per_type, seed))
        .collect();

    let mut dataset = Dataset {
        name: name.to_string(),
        ..Dataset::default()
    };
    for (li, law) in config.laws.iter().enumerate() {
        for (si, situation) in config.situations.iter().enumerate() {
            let label = label_of(law, situation);
            for (roster, selected) in config.rosters.iter().zip(&selections) {
                if !selected.contains(&(li, si)) {
                    continue;
                }
                let sample_id = format!(
                    "{name}/{}/{}/{}",
                    roster.identity_type, law.law_id, situation.situation_id
                );
                let mut instance_ids = Vec::with_capacity(roster.identities.len());
                for identity in &roster.identities {
                    let actor = names.choose(&sample_id, identity);
                    let instance_id = format!("{sample_id}/{}", identity.identity_key);
                    dataset.instances.push(PromptInstance {
                        instance_id: instance_id.clone(),
                        sample_id: Some(sample_id.clone()),
                        law_id: law.law_id.clone(),
                        situation_id: situation.situation_id.clone(),
                        identity_type: Some(roster.identity_type),
                        identity_key: Some(identity.identity_key.clone()),
                        rendered_text: render_prompt(&config.template, law, situation, Some((identity, actor)))?,
                        label,
                    });
                    instance_ids.push(instance_id);
                }
                dataset.samples.push(Sample {
                    sample_id,
                    law_id: law.law_id.clone(),
                    situation_id: situation.situation_id.clone(),
                    identity_type: roster.identity_type,
                    instance_ids,
                });
            }
        }
    }
    Ok(dataset)
}

/// The identity-stripped corpus: the with-identity corpus after removing
/// names and descriptors, de-duplicated to one instance per pair.
pub fn generate_without_id(config: &CorpusConfig) -> Result<Dataset, ConfigError> {
    config.validate()?;
    let pairs: BTreeSet<(usize, usize)> = config
        .rosters
        .iter()
        .flat_map(|r| selected_pairs(config, r.identity_type, config.pairs_per_type, config.seed))
        .collect();
    let mut dataset = Dataset {
        name: WITHOUT_ID.to_string(),
        ..Dataset::default()
    };
    for (li, si) in pairs {
        let law = &config.laws[li];
        let situation = &config.situations[si];
        dataset.instances.push(PromptInstance {
            instance_id: format!("{WITHOUT_ID}/{}/{}", law.law_id, situation.situation_id),
            sample_id: None,
            law_id: law.law_id.clone(),
            situation_id: situation.situation_id.clone(),
            identity_type: None,
            identity_key: None,
            rendered_text: render_prompt(&config.template, law, situation, None)?,
            label: label_of(law, situation),
        });
    }
    Ok(dataset)
}
