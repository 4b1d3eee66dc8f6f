use std::collections::BTreeMap;

use crate::corpus::{LabeledTriple, Source, ValidityLabel, Variant};
use crate::error::{Error, Result};

/// An original with whichever of its variants are present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantGroup {
    pub orig: LabeledTriple,
    pub neg_if: Option<LabeledTriple>,
    pub neg_then: Option<LabeledTriple>,
    pub neg_both: Option<LabeledTriple>,
}

impl VariantGroup {
    pub fn new(orig: LabeledTriple) -> Self {
        VariantGroup {
            orig,
            neg_if: None,
            neg_then: None,
            neg_both: None,
        }
    }

    pub fn source(&self) -> Source {
        self.orig.triple.source
    }

    fn slot(&mut self, variant: Variant) -> &mut Option<LabeledTriple> {
        match variant {
            Variant::NegIf => &mut self.neg_if,
            Variant::NegThen => &mut self.neg_then,
            Variant::NegBoth | Variant::Orig => &mut self.neg_both,
        }
    }

    /// Members in slot order.
    pub fn members(&self) -> impl Iterator<Item = &LabeledTriple> {
        std::iter::once(&self.orig)
            .chain(self.neg_if.as_ref())
            .chain(self.neg_then.as_ref())
            .chain(self.neg_both.as_ref())
    }
}

/// Groups labeled triples by lineage, ordered by original id. Variants
/// whose original is absent are returned separately.
pub fn group_variants(labeled: &[LabeledTriple]) -> Result<(Vec<VariantGroup>, Vec<LabeledTriple>)> {
    let mut groups: BTreeMap<&str, VariantGroup> = labeled
        .iter()
        .filter(|t| t.triple.is_original())
        .map(|t| (t.triple.id.as_str(), VariantGroup::new(t.clone())))
        .collect();
    let mut orphans = Vec::new();
    for t in labeled.iter().filter(|t| !t.triple.is_original()) {
        let parent = t.triple.parent_id.as_deref().unwrap_or_default();
        match groups.get_mut(parent) {
            Some(g) => {
                let slot = g.slot(t.triple.variant);
                if slot.as_ref().is_some_and(|other| other.triple.id != t.triple.id) {
                    return Err(Error::ValidationError(format!(
                        "group {parent} has two {} members",
                        t.triple.variant
                    )));
                }
                *slot = Some(t.clone());
            }
            None => orphans.push(t.clone()),
        }
    }
    Ok((groups.into_values().collect(), orphans))
}

/// Whether an (orig, neg_if, neg_then) label vector is one of the four
/// contrastive patterns:
///
/// | orig | neg_if | neg_then |
/// |------|--------|----------|
/// | V    | I      | V        |
/// | V    | V      | I        |
/// | I    | V      | I        |
/// | I    | I      | V        |
pub fn atomic_pattern(orig: ValidityLabel, neg_if: ValidityLabel, neg_then: ValidityLabel) -> bool {
    use ValidityLabel::*;
    matches!(
        (orig, neg_if, neg_then),
        (Valid, Invalid, Valid) | (Valid, Valid, Invalid) | (Invalid, Valid, Invalid) | (Invalid, Invalid, Valid)
    )
}

/// Keeps ATOMIC groups matching a contrastive pattern. The doubly negated
/// member is always removed from the result.
pub fn select_contrastive_atomic(groups: &[VariantGroup]) -> Result<Vec<VariantGroup>> {
    let mut out = Vec::new();
    for g in groups {
        let (Some(neg_if), Some(neg_then)) = (&g.neg_if, &g.neg_then) else {
            return Err(Error::IncompleteGroup(g.orig.triple.id.clone()));
        };
        if atomic_pattern(g.orig.label, neg_if.label, neg_then.label) {
            out.push(VariantGroup {
                neg_both: None,
                ..g.clone()
            });
        }
    }
    Ok(out)
}

/// (original, doubly negated) pairs of ANION groups.
pub fn anion_pairs(groups: &[VariantGroup]) -> Vec<(LabeledTriple, LabeledTriple)> {
    groups
        .iter()
        .filter(|g| g.source() == Source::Anion)
        .filter_map(|g| g.neg_both.clone().map(|b| (g.orig.clone(), b)))
        .collect()
}

/// Keeps pairs with one Valid and one Invalid member.
pub fn select_contrastive_anion(pairs: &[(LabeledTriple, LabeledTriple)]) -> Vec<(LabeledTriple, LabeledTriple)> {
    use ValidityLabel::*;
    pairs
        .iter()
        .filter(|(a, b)| matches!((a.label, b.label), (Valid, Invalid) | (Invalid, Valid)))
        .cloned()
        .collect()
}

pub fn flatten_atomic(groups: &[VariantGroup]) -> Vec<LabeledTriple> {
    groups.iter().flat_map(|g| g.members().cloned()).collect()
}

pub fn flatten_anion(pairs: &[(LabeledTriple, LabeledTriple)]) -> Vec<LabeledTriple> {
    pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EventText, LabelSource, Relation, Split, Triple};
    use crate::negator::generate_variants;
    use ValidityLabel::*;

    fn group(labels: [ValidityLabel; 4]) -> VariantGroup {
        let t = Triple::original(
            Source::Atomic,
            Split::Train,
            EventText::affirmative("PersonX takes a picture").unwrap(),
            Relation::XWant,
            EventText::affirmative("to look at the picture").unwrap(),
        );
        let vs = generate_variants(&t).unwrap();
        let lt = |t: Triple, l| LabeledTriple::new(t, l, LabelSource::Synthetic);
        VariantGroup {
            orig: lt(t, labels[0]),
            neg_if: Some(lt(vs[0].clone(), labels[1])),
            neg_then: Some(lt(vs[1].clone(), labels[2])),
            neg_both: Some(lt(vs[2].clone(), labels[3])),
        }
    }

    #[test]
    fn selection_examples() {
        let picked = select_contrastive_atomic(&[group([Valid, Invalid, Valid, Valid])]).unwrap();
        assert_eq!(picked.len(), 1);
        assert!(picked[0].neg_both.is_none());
        assert!(select_contrastive_atomic(&[group([Valid, Valid, Valid, Valid])]).unwrap().is_empty());
        assert!(select_contrastive_atomic(&[group([Valid, Ambiguous, Invalid, Valid])]).unwrap().is_empty());
    }

    #[test]
    fn missing_slot_is_an_error() {
        let mut g = group([Valid, Invalid, Valid, Valid]);
        g.neg_then = None;
        assert!(matches!(select_contrastive_atomic(&[g]), Err(Error::IncompleteGroup(_))));
    }

    #[test]
    fn grouping_by_lineage() {
        let g = group([Valid, Invalid, Valid, Ambiguous]);
        let mut flat: Vec<_> = g.members().cloned().collect();
        flat.reverse();
        let (groups, orphans) = group_variants(&flat).unwrap();
        assert_eq!(groups, vec![g.clone()]);
        assert!(orphans.is_empty());
        let (groups, orphans) = group_variants(&flat[..3]).unwrap();
        assert!(groups.is_empty());
        assert_eq!(orphans.len(), 3);
    }

    #[test]
    fn anion_selection() {
        let g = group([Valid, Valid, Valid, Valid]);
        let pair = |a, b| {
            let mut x = g.orig.clone();
            x.label = a;
            let mut y = g.neg_both.clone().unwrap();
            y.label = b;
            (x, y)
        };
        assert_eq!(select_contrastive_anion(&[pair(Valid, Invalid)]).len(), 1);
        assert_eq!(select_contrastive_anion(&[pair(Invalid, Valid)]).len(), 1);
        assert!(select_contrastive_anion(&[pair(Valid, Valid)]).is_empty());
        assert!(select_contrastive_anion(&[pair(Valid, Ambiguous)]).is_empty());
    }
}
