//! Two-level label hierarchy: a meta classifier picks a group, the group's
//! own classifier picks the final label.
//!
//! The final label always belongs to the selected group by construction, so
//! a wrong meta decision forces a wrong final label — composite accuracy can
//! never exceed meta accuracy.

use crate::error::{Error, Result};
use crate::models::decoder::{decoder_network_spec, DecoderKind, DecoderSpec};
use crate::nn::{Chain, Element, Initializer, ParamStore, Tensor};

/// An ordered partition of the label set into named groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchySpec {
    groups: Vec<(String, Vec<String>)>,
}

impl HierarchySpec {
    /// Validates a grouping: at least one group, no empty group, no
    /// duplicate meta label, no fine label in two groups.
    pub fn new(groups: Vec<(String, Vec<String>)>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Config("hierarchy needs at least one group".into()));
        }
        let mut seen_meta = std::collections::BTreeSet::new();
        let mut seen_fine = std::collections::BTreeSet::new();
        for (meta, fines) in &groups {
            if !seen_meta.insert(meta.as_str()) {
                return Err(Error::Config(format!("duplicate group label `{meta}`")));
            }
            if fines.is_empty() {
                return Err(Error::Config(format!("group `{meta}` has no labels")));
            }
            for fine in fines {
                if !seen_fine.insert(fine.as_str()) {
                    return Err(Error::Config(format!(
                        "label `{fine}` appears in more than one group"
                    )));
                }
            }
        }
        Ok(HierarchySpec { groups })
    }

    /// Checks that the grouped labels are exactly `all_labels` (as a set).
    pub fn validate_partition(&self, all_labels: &[String]) -> Result<()> {
        let grouped: std::collections::BTreeSet<&str> =
            self.groups.iter().flat_map(|(_, f)| f.iter().map(String::as_str)).collect();
        let full: std::collections::BTreeSet<&str> =
            all_labels.iter().map(String::as_str).collect();
        if grouped != full {
            let missing: Vec<&&str> = full.difference(&grouped).collect();
            let extra: Vec<&&str> = grouped.difference(&full).collect();
            return Err(Error::Config(format!(
                "hierarchy does not partition the label set (missing {missing:?}, extra {extra:?})"
            )));
        }
        Ok(())
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[(String, Vec<String>)] {
        &self.groups
    }

    pub fn meta_label(&self, group: usize) -> &str {
        &self.groups[group].0
    }

    pub fn group_labels(&self, group: usize) -> &[String] {
        &self.groups[group].1
    }

    /// All fine labels flattened in group order; positions are the global
    /// fine indices used by predictions.
    pub fn fine_labels(&self) -> Vec<&str> {
        self.groups.iter().flat_map(|(_, f)| f.iter().map(String::as_str)).collect()
    }

    /// Range of global fine indices covered by `group`.
    pub fn group_span(&self, group: usize) -> std::ops::Range<usize> {
        let start: usize = self.groups[..group].iter().map(|(_, f)| f.len()).sum();
        start..start + self.groups[group].1.len()
    }

    /// Group index and in-group index of a fine label.
    pub fn locate(&self, label: &str) -> Option<(usize, usize)> {
        for (gi, (_, fines)) in self.groups.iter().enumerate() {
            if let Some(li) = fines.iter().position(|f| f == label) {
                return Some((gi, li));
            }
        }
        None
    }
}

/// The ten-scene grouping used by the urban acoustic-scene experiments:
/// three indoor scenes, four outdoor scenes, three vehicle interiors.
pub fn standard_scene_groups() -> HierarchySpec {
    let g = |meta: &str, fines: &[&str]| {
        (meta.to_string(), fines.iter().map(|s| s.to_string()).collect::<Vec<_>>())
    };
    HierarchySpec::new(vec![
        g("indoor", &["airport", "metro_station", "shopping_mall"]),
        g("outdoor", &["park", "public_square", "street_pedestrian", "street_traffic"]),
        g("vehicle", &["bus", "metro", "tram"]),
    ])
    .expect("the standard grouping is a valid partition")
}

/// A compiled two-level classifier: one meta chain over the groups and one
/// fine chain per group, all over a shared store.
#[derive(Debug)]
pub struct HierarchyModel<F: Element> {
    spec: HierarchySpec,
    meta: Chain<F>,
    fine: Vec<Chain<F>>,
}

impl<F: Element> HierarchyModel<F> {
    /// Builds the meta classifier and one per-group classifier, each an MLP
    /// decoder over `embed_width`-wide inputs, under the `hier.` prefix.
    pub fn build(
        spec: &HierarchySpec,
        embed_width: usize,
        store: &mut ParamStore<F>,
        init: &mut Initializer,
    ) -> Result<Self> {
        let meta_net = decoder_network_spec(&DecoderSpec::new(
            DecoderKind::Mlp,
            embed_width,
            spec.group_count(),
        )?)?;
        let meta = meta_net.build("hier.meta", store, init)?;
        let mut fine = Vec::with_capacity(spec.group_count());
        for (gi, (meta_label, fines)) in spec.groups().iter().enumerate() {
            if fines.len() < 2 {
                return Err(Error::Config(format!(
                    "group `{meta_label}` has {} label(s); a classifier needs at least 2",
                    fines.len()
                )));
            }
            let net = decoder_network_spec(&DecoderSpec::new(
                DecoderKind::Mlp,
                embed_width,
                fines.len(),
            )?)?;
            fine.push(net.build(&format!("hier.g{gi:02}"), store, init)?);
        }
        Ok(HierarchyModel { spec: spec.clone(), meta, fine })
    }

    pub fn spec(&self) -> &HierarchySpec {
        &self.spec
    }

    pub fn meta_chain(&self) -> &Chain<F> {
        &self.meta
    }

    pub fn fine_chains(&self) -> &[Chain<F>] {
        &self.fine
    }
}

fn argmax_lowest<F: Element>(row: &[F]) -> usize {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Picks (group, global fine index) from probability vectors: the meta row
/// selects the group, that group's row selects the label. Ties resolve to
/// the lowest index.
pub fn hierarchical_pick<F: Element>(
    spec: &HierarchySpec,
    meta_probs: &[F],
    fine_probs: &[Vec<F>],
) -> Result<(usize, usize)> {
    if meta_probs.len() != spec.group_count() {
        return Err(Error::Shape(format!(
            "meta probabilities have {} entries for {} groups",
            meta_probs.len(),
            spec.group_count()
        )));
    }
    if fine_probs.len() != spec.group_count() {
        return Err(Error::Shape(format!(
            "{} fine probability rows for {} groups",
            fine_probs.len(),
            spec.group_count()
        )));
    }
    let group = argmax_lowest(meta_probs);
    let row = &fine_probs[group];
    if row.len() != spec.group_labels(group).len() {
        return Err(Error::Shape(format!(
            "group {group} probabilities have {} entries for {} labels",
            row.len(),
            spec.group_labels(group).len()
        )));
    }
    let local = argmax_lowest(row);
    Ok((group, spec.group_span(group).start + local))
}

/// Runs the two-level classifier on a batch of embeddings; returns one
/// (group, global fine index) pair per row. The label always belongs to
/// the selected group.
pub fn hierarchical_predict<F: Element>(
    model: &HierarchyModel<F>,
    store: &ParamStore<F>,
    embeddings: &Tensor<F>,
) -> Result<Vec<(usize, usize)>> {
    let meta_probs = model.meta.forward_infer(store, embeddings)?;
    let fine_probs: Vec<Tensor<F>> = model
        .fine
        .iter()
        .map(|chain| chain.forward_infer(store, embeddings))
        .collect::<Result<_>>()?;
    let mut picks = Vec::with_capacity(embeddings.batch());
    for bi in 0..embeddings.batch() {
        let rows: Vec<Vec<F>> = fine_probs.iter().map(|t| t.item(bi).to_vec()).collect();
        picks.push(hierarchical_pick(&model.spec, meta_probs.item(bi), &rows)?);
    }
    Ok(picks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_f32(n: usize, seed: u64) -> Vec<f32> {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        (0..n)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) as f32
            })
            .collect()
    }

    #[test]
    fn standard_grouping_partitions_ten_scenes() {
        let spec = standard_scene_groups();
        assert_eq!(spec.group_count(), 3);
        assert_eq!(spec.fine_labels().len(), 10);
        assert_eq!(spec.group_labels(2), &["bus", "metro", "tram"]);
        assert_eq!(spec.group_span(1), 3..7);
        assert_eq!(spec.locate("tram"), Some((2, 2)));
        let all: Vec<String> = spec.fine_labels().iter().map(|s| s.to_string()).collect();
        spec.validate_partition(&all).unwrap();
    }

    #[test]
    fn invalid_groupings_are_rejected() {
        assert!(HierarchySpec::new(vec![]).is_err());
        assert!(HierarchySpec::new(vec![("a".into(), vec![])]).is_err());
        assert!(HierarchySpec::new(vec![
            ("a".into(), vec!["x".into()]),
            ("a".into(), vec!["y".into()]),
        ])
        .is_err());
        assert!(HierarchySpec::new(vec![
            ("a".into(), vec!["x".into()]),
            ("b".into(), vec!["x".into()]),
        ])
        .is_err());
        let spec = standard_scene_groups();
        let mut labels: Vec<String> =
            spec.fine_labels().iter().map(|s| s.to_string()).collect();
        labels.push("cave".into());
        assert!(spec.validate_partition(&labels).unwrap_err().is_config());
        labels.truncate(9);
        assert!(spec.validate_partition(&labels).is_err());
    }

    #[test]
    fn pick_composes_meta_and_group_decisions() {
        let spec = standard_scene_groups();
        // Meta says vehicle (index 2); the vehicle classifier says bus.
        let meta = vec![0.1f32, 0.2, 0.7];
        let fine = vec![
            vec![0.4f32, 0.3, 0.3],
            vec![0.25f32, 0.25, 0.25, 0.25],
            vec![0.6f32, 0.3, 0.1],
        ];
        let (group, label) = hierarchical_pick(&spec, &meta, &fine).unwrap();
        assert_eq!(group, 2);
        assert_eq!(spec.fine_labels()[label], "bus");
    }

    #[test]
    fn wrong_meta_decision_forces_a_label_outside_the_true_group() {
        let spec = standard_scene_groups();
        // Ground truth is bus (vehicle), but the meta row favors indoor.
        let meta = vec![0.8f32, 0.1, 0.1];
        let fine = vec![
            vec![0.9f32, 0.05, 0.05],
            vec![0.25f32, 0.25, 0.25, 0.25],
            vec![1.0f32, 0.0, 0.0], // even a certain vehicle row is unused
        ];
        let (group, label) = hierarchical_pick(&spec, &meta, &fine).unwrap();
        assert_eq!(group, 0);
        assert!(spec.group_span(0).contains(&label));
        assert_ne!(spec.fine_labels()[label], "bus");
    }

    #[test]
    fn predicted_label_always_belongs_to_the_selected_group() {
        let spec = standard_scene_groups();
        let mut store: ParamStore<f32> = ParamStore::new();
        let mut init = Initializer::new(23);
        let model = HierarchyModel::build(&spec, 16, &mut store, &mut init).unwrap();
        for seed in 0..10u64 {
            let x = Tensor::from_vec(&[3, 16], pseudo_f32(48, 60 + seed)).unwrap();
            for (group, label) in hierarchical_predict(&model, &store, &x).unwrap() {
                assert!(
                    spec.group_span(group).contains(&label),
                    "label {label} outside group {group}"
                );
            }
        }
    }

    #[test]
    fn singleton_groups_cannot_build_classifiers() {
        let spec = HierarchySpec::new(vec![
            ("a".into(), vec!["x".into()]),
            ("b".into(), vec!["y".into(), "z".into()]),
        ])
        .unwrap();
        let mut store: ParamStore<f32> = ParamStore::new();
        let mut init = Initializer::new(1);
        assert!(HierarchyModel::build(&spec, 8, &mut store, &mut init)
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn pick_rejects_mismatched_probability_rows() {
        let spec = standard_scene_groups();
        let fine = vec![vec![0.5f32, 0.5]; 3];
        assert!(hierarchical_pick(&spec, &[0.5f32, 0.5], &fine).is_err());
        let meta = vec![0.4f32, 0.3, 0.3];
        assert!(hierarchical_pick(&spec, &meta, &fine).is_err());
    }
}
