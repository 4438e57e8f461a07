//! Known mappings supplied by a human matcher.

use thiserror::Error;

use crate::retrieve::CandidateSet;
use crate::scalar::Real;
use crate::schema::{same_name, GroundTruth, MatchPair, Schema};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuidanceError {
    #[error("guidance source table {0} is not in the source schema")]
    UnknownSourceTable(String),
    #[error("guidance source {table}.{attribute} is not in the source schema")]
    UnknownSourceAttribute { table: String, attribute: String },
    #[error("guidance target table {0} is not in the target schema")]
    UnknownTargetTable(String),
    #[error("guidance target {table}.{attribute} is not in the target schema")]
    UnknownTargetAttribute { table: String, attribute: String },
}

impl GuidanceError {
    /// Name of the offending request field.
    pub fn field(&self) -> &'static str {
        match self {
            GuidanceError::UnknownSourceTable(_) => "src_table",
            GuidanceError::UnknownSourceAttribute { .. } => "src_attr",
            GuidanceError::UnknownTargetTable(_) => "tgt_table",
            GuidanceError::UnknownTargetAttribute { .. } => "tgt_attr",
        }
    }
}

/// Checks that a pair names existing attributes on both sides.
pub fn validate_guidance_pair(source: &Schema, target: &Schema, pair: &MatchPair) -> Result<(), GuidanceError> {
    let table = source
        .table(&pair.src_table)
        .ok_or_else(|| GuidanceError::UnknownSourceTable(pair.src_table.clone()))?;
    if table.attribute(&pair.src_attr).is_none() {
        return Err(GuidanceError::UnknownSourceAttribute {
            table: pair.src_table.clone(),
            attribute: pair.src_attr.clone(),
        });
    }
    if let Some(t) = &pair.target {
        let table = target
            .table(&t.table)
            .ok_or_else(|| GuidanceError::UnknownTargetTable(t.table.clone()))?;
        if table.attribute(&t.attribute).is_none() {
            return Err(GuidanceError::UnknownTargetAttribute {
                table: t.table.clone(),
                attribute: t.attribute.clone(),
            });
        }
    }
    Ok(())
}

/// Adds the target table of every guided pair for this source table to the
/// candidate set. Pairs for other source tables and null pairs are ignored.
pub fn apply_guidance<F: Real>(
    mut candidates: CandidateSet<F>,
    guidance: &[MatchPair],
    target: &Schema,
) -> Result<CandidateSet<F>, GuidanceError> {
    let order: Vec<String> = target.tables.iter().map(|t| t.name.clone()).collect();
    let source_table = candidates.source_table.clone();
    for pair in guidance.iter().filter(|p| same_name(&p.src_table, &source_table)) {
        let Some(t) = &pair.target else { continue };
        let table = target
            .table(&t.table)
            .ok_or_else(|| GuidanceError::UnknownTargetTable(t.table.clone()))?;
        candidates.insert(&table.name, &order);
    }
    Ok(candidates)
}

/// One guidance pair per source table, taken from the ground truth: the
/// mapping of `SUBJECT_ID` if the table has it and it is mapped, otherwise
/// the mapping of the first primary-key attribute that is mapped.
pub fn auto_guidance(source: &Schema, truth: &GroundTruth) -> Vec<MatchPair> {
    let mapped = |table: &str, attr: &str| {
        truth
            .pairs
            .iter()
            .find(|p| same_name(&p.src_table, table) && same_name(&p.src_attr, attr) && !p.is_null())
    };
    source
        .tables
        .iter()
        .filter_map(|table| {
            let subject = table.attribute("SUBJECT_ID").and_then(|a| mapped(&table.name, &a.name));
            let pair = subject.or_else(|| table.primary_keys().find_map(|a| mapped(&table.name, &a.name)))?;
            Some(MatchPair::new(
                &table.name,
                &table.attribute(&pair.src_attr)?.name,
                pair.target.clone(),
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Attribute, Table};

    fn target() -> Schema {
        Schema {
            name: "t".into(),
            tables: vec![
                Table::new("A", "", vec![Attribute::new("x", "", "")]),
                Table::new("B", "", vec![Attribute::new("y", "", "")]),
                Table::new("C", "", vec![Attribute::new("z", "", "")]),
            ],
        }
    }

    fn cands(tables: &[&str]) -> CandidateSet<f64> {
        CandidateSet {
            source_table: "S".into(),
            tables: tables.iter().map(|s| s.to_string()).collect(),
            per_attribute_hits: Vec::new(),
        }
    }

    #[test]
    fn union_semantics() {
        let t = target();
        let out = apply_guidance(cands(&["C"]), &[MatchPair::mapped("S", "a", "a", "x")], &t).unwrap();
        assert_eq!(out.tables, ["A", "C"]);
        let same = apply_guidance(out.clone(), &[MatchPair::mapped("S", "a", "A", "x")], &t).unwrap();
        assert_eq!(same, out);
        let other = apply_guidance(cands(&["C"]), &[MatchPair::mapped("R", "a", "A", "x")], &t).unwrap();
        assert_eq!(other.tables, ["C"]);
        let err = apply_guidance(cands(&["C"]), &[MatchPair::mapped("S", "a", "Q", "x")], &t).unwrap_err();
        assert_eq!(err, GuidanceError::UnknownTargetTable("Q".into()));
    }

    #[test]
    fn validation_names_the_field() {
        let source = Schema {
            name: "s".into(),
            tables: vec![Table::new("S", "", vec![Attribute::new("a", "", "")])],
        };
        let t = target();
        assert!(validate_guidance_pair(&source, &t, &MatchPair::mapped("S", "a", "B", "y")).is_ok());
        let e = validate_guidance_pair(&source, &t, &MatchPair::mapped("S", "nope", "B", "y")).unwrap_err();
        assert_eq!(e.field(), "src_attr");
        let e = validate_guidance_pair(&source, &t, &MatchPair::mapped("Z", "a", "B", "y")).unwrap_err();
        assert_eq!(e.field(), "src_table");
        let e = validate_guidance_pair(&source, &t, &MatchPair::mapped("S", "a", "Q", "y")).unwrap_err();
        assert_eq!(e.field(), "tgt_table");
        let e = validate_guidance_pair(&source, &t, &MatchPair::mapped("S", "a", "B", "q")).unwrap_err();
        assert_eq!(e.field(), "tgt_attr");
    }

    #[test]
    fn auto_guidance_rule() {
        let source = Schema {
            name: "s".into(),
            tables: vec![
                Table::new(
                    "P",
                    "",
                    vec![
                        Attribute::new("ROW_ID", "", "").primary_key(),
                        Attribute::new("SUBJECT_ID", "", ""),
                    ],
                ),
                Table::new(
                    "Q",
                    "",
                    vec![
                        Attribute::new("ROW_ID", "", "").primary_key(),
                        Attribute::new("ICD", "", "").primary_key(),
                    ],
                ),
                Table::new("R", "", vec![Attribute::new("v", "", "").primary_key()]),
            ],
        };
        let truth = GroundTruth::new(vec![
            MatchPair::mapped("P", "ROW_ID", "A", "x"),
            MatchPair::mapped("p", "subject_id", "B", "y"),
            MatchPair::null("Q", "ROW_ID"),
            MatchPair::mapped("Q", "ICD", "C", "z"),
            MatchPair::null("R", "v"),
        ]);
        let g = auto_guidance(&source, &truth);
        assert_eq!(
            g,
            vec![
                MatchPair::mapped("P", "SUBJECT_ID", "B", "y"),
                MatchPair::mapped("Q", "ICD", "C", "z")
            ]
        );
    }
}
