//! Schema and ground-truth data model, loaders, validation and dataset
//! statistics.
//!
//! Names are stored exactly as written in the input files but compared
//! case-insensitively (after trimming), since source and target schemas
//! routinely disagree on casing (`SUBJECT_ID` vs `person_id`).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Literal used for null mappings in ground-truth files and model output.
pub const NA: &str = "NA";

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid schema at {element}: {message}")]
    Validation { element: String, message: String },
    #[error("line {line}: exactly one of TGT_ENT/TGT_ATT is NA for {src_table}.{src_attr}")]
    InconsistentNa {
        line: u64,
        src_table: String,
        src_attr: String,
    },
    #[error("unknown source attribute {table}.{attribute}")]
    UnknownAttribute { table: String, attribute: String },
}

/// Case-insensitive, whitespace-trimmed identifier comparison.
pub fn same_name(a: &str, b: &str) -> bool {
    let (a, b) = (a.trim(), b.trim());
    a.len() == b.len()
        && a.chars()
            .zip(b.chars())
            .all(|(x, y)| x.to_lowercase().eq(y.to_lowercase()))
}

/// Normalized form used as a lookup key.
pub fn name_key(name: &str) -> String {
    name.trim().to_lowercase()
}

fn is_na(s: &str) -> bool {
    s.trim() == NA
}

/// A `(table, attribute)` reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(String, String)", into = "(String, String)")]
pub struct AttrRef {
    pub table: String,
    pub attribute: String,
}

impl AttrRef {
    pub fn new(table: impl Into<String>, attribute: impl Into<String>) -> Self {
        Self {
            table: table.into(),
            attribute: attribute.into(),
        }
    }

    /// Case-insensitive equality.
    pub fn matches(&self, other: &AttrRef) -> bool {
        same_name(&self.table, &other.table) && same_name(&self.attribute, &other.attribute)
    }

    pub fn key(&self) -> (String, String) {
        (name_key(&self.table), name_key(&self.attribute))
    }
}

impl From<(String, String)> for AttrRef {
    fn from((table, attribute): (String, String)) -> Self {
        Self { table, attribute }
    }
}

impl From<AttrRef> for (String, String) {
    fn from(r: AttrRef) -> Self {
        (r.table, r.attribute)
    }
}

impl fmt::Display for AttrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.attribute)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(rename = "type", default)]
    pub data_type: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub primary_key: bool,
    #[serde(default)]
    pub references: Option<AttrRef>,
}

impl Attribute {
    pub fn new(name: impl Into<String>, data_type: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            data_type: data_type.into(),
            description: description.into(),
            primary_key: false,
            references: None,
        }
    }

    pub fn primary_key(mut self) -> Self {
        self.primary_key = true;
        self
    }

    pub fn references(mut self, table: impl Into<String>, attribute: impl Into<String>) -> Self {
        self.references = Some(AttrRef::new(table, attribute));
        self
    }

    pub fn is_foreign_key(&self) -> bool {
        self.references.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub attributes: Vec<Attribute>,
}

impl Table {
    pub fn new(name: impl Into<String>, description: impl Into<String>, attributes: Vec<Attribute>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            attributes,
        }
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| same_name(&a.name, name))
    }

    pub fn primary_keys(&self) -> impl Iterator<Item = &Attribute> {
        self.attributes.iter().filter(|a| a.primary_key)
    }

    pub fn foreign_keys(&self) -> impl Iterator<Item = &Attribute> {
        self.attributes.iter().filter(|a| a.is_foreign_key())
    }

    /// Attributes that are neither primary nor foreign keys.
    pub fn other_columns(&self) -> impl Iterator<Item = &Attribute> {
        self.attributes.iter().filter(|a| !a.primary_key && !a.is_foreign_key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub tables: Vec<Table>,
}

impl Schema {
    /// Parses and validates a schema document. Dangling foreign-key
    /// references to tables outside the schema are logged, not rejected.
    pub fn from_json_str(text: &str, origin: &str) -> Result<Self, SchemaError> {
        let schema: Schema = serde_json::from_str(text).map_err(|e| SchemaError::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        for warning in schema.validate()? {
            tracing::warn!(origin, "{warning}");
        }
        Ok(schema)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    /// Checks the structural invariants and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, SchemaError> {
        let invalid = |element: String, message: &str| SchemaError::Validation {
            element,
            message: message.to_string(),
        };
        if self.tables.is_empty() {
            return Err(invalid(self.name.clone(), "schema has no tables"));
        }
        let mut warnings = Vec::new();
        let mut seen_tables = HashSet::new();
        for (ti, table) in self.tables.iter().enumerate() {
            if table.name.trim().is_empty() {
                return Err(invalid(format!("tables[{ti}]"), "empty table name"));
            }
            if !seen_tables.insert(name_key(&table.name)) {
                return Err(invalid(table.name.clone(), "duplicate table name"));
            }
            if table.attributes.is_empty() {
                return Err(invalid(table.name.clone(), "table has no attributes"));
            }
            let mut seen_attrs = HashSet::new();
            for (ai, attr) in table.attributes.iter().enumerate() {
                if attr.name.trim().is_empty() {
                    return Err(invalid(
                        format!("{}.attributes[{ai}]", table.name),
                        "empty attribute name",
                    ));
                }
                if !seen_attrs.insert(name_key(&attr.name)) {
                    return Err(invalid(
                        format!("{}.{}", table.name, attr.name),
                        "duplicate attribute name",
                    ));
                }
                let Some(fk) = &attr.references else { continue };
                match self.table(&fk.table) {
                    Some(referenced) if referenced.attribute(&fk.attribute).is_none() => {
                        return Err(invalid(
                            format!("{}.{}", table.name, attr.name),
                            &format!("references missing attribute {fk}"),
                        ));
                    }
                    Some(_) => {}
                    None => warnings.push(format!(
                        "{}.{} references table {} outside schema {}",
                        table.name, attr.name, fk.table, self.name
                    )),
                }
            }
        }
        Ok(warnings)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| same_name(&t.name, name))
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables.iter().position(|t| same_name(&t.name, name))
    }

    pub fn attribute(&self, table: &str, attribute: &str) -> Option<&Attribute> {
        self.table(table).and_then(|t| t.attribute(attribute))
    }

    pub fn attribute_count(&self) -> usize {
        self.tables.iter().map(|t| t.attributes.len()).sum()
    }

    /// All `(table, attribute)` pairs in file order.
    pub fn attribute_refs(&self) -> impl Iterator<Item = AttrRef> + '_ {
        self.tables
            .iter()
            .flat_map(|t| t.attributes.iter().map(move |a| AttrRef::new(&t.name, &a.name)))
    }
}

/// Reads a schema in the canonical JSON format.
pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema, SchemaError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Schema::from_json_str(&text, &path.display().to_string())
}

/// One row of the match relation. `target == None` is a null mapping.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MatchPairRecord", into = "MatchPairRecord")]
pub struct MatchPair {
    pub src_table: String,
    pub src_attr: String,
    pub target: Option<AttrRef>,
}

impl MatchPair {
    pub fn new(src_table: impl Into<String>, src_attr: impl Into<String>, target: Option<AttrRef>) -> Self {
        Self {
            src_table: src_table.into(),
            src_attr: src_attr.into(),
            target,
        }
    }

    pub fn mapped(src_table: &str, src_attr: &str, tgt_table: &str, tgt_attr: &str) -> Self {
        Self::new(src_table, src_attr, Some(AttrRef::new(tgt_table, tgt_attr)))
    }

    pub fn null(src_table: &str, src_attr: &str) -> Self {
        Self::new(src_table, src_attr, None)
    }

    pub fn source(&self) -> AttrRef {
        AttrRef::new(&self.src_table, &self.src_attr)
    }

    pub fn is_null(&self) -> bool {
        self.target.is_none()
    }
}

/// Flat wire form shared by the CSV files and JSON request bodies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchPairRecord {
    pub src_table: String,
    pub src_attr: String,
    pub tgt_table: String,
    pub tgt_attr: String,
}

impl TryFrom<MatchPairRecord> for MatchPair {
    type Error = String;

    fn try_from(r: MatchPairRecord) -> Result<Self, Self::Error> {
        match (is_na(&r.tgt_table), is_na(&r.tgt_attr)) {
            (true, true) => Ok(MatchPair::new(r.src_table, r.src_attr, None)),
            (false, false) => Ok(MatchPair::new(
                r.src_table,
                r.src_attr,
                Some(AttrRef::new(r.tgt_table, r.tgt_attr)),
            )),
            _ => Err(format!(
                "exactly one of tgt_table/tgt_attr is NA for {}.{}",
                r.src_table, r.src_attr
            )),
        }
    }
}

impl From<MatchPair> for MatchPairRecord {
    fn from(p: MatchPair) -> Self {
        let (tgt_table, tgt_attr) = match p.target {
            Some(t) => (t.table, t.attribute),
            None => (NA.to_string(), NA.to_string()),
        };
        Self {
            src_table: p.src_table,
            src_attr: p.src_attr,
            tgt_table,
            tgt_attr,
        }
    }
}

/// The match relation. Loaders accept 1:n rows; evaluation decides what to
/// do with them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruth {
    pub pairs: Vec<MatchPair>,
}

const TRUTH_HEADER: [&str; 4] = ["SRC_ENT", "SRC_ATT", "TGT_ENT", "TGT_ATT"];

impl GroundTruth {
    pub fn new(pairs: Vec<MatchPair>) -> Self {
        Self { pairs }
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    /// Parses the four-column `SRC_ENT,SRC_ATT,TGT_ENT,TGT_ATT` format.
    /// Extra columns (an index column, notes) are ignored.
    pub fn from_csv_reader<R: Read>(reader: R, origin: &str) -> Result<Self, SchemaError> {
        let parse_err = |message: String| SchemaError::Parse {
            origin: origin.to_string(),
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
        let mut columns = [0usize; 4];
        for (slot, wanted) in columns.iter_mut().zip(TRUTH_HEADER) {
            *slot = headers
                .iter()
                .position(|h| same_name(h, wanted))
                .ok_or_else(|| parse_err(format!("missing column {wanted}")))?;
        }
        let mut pairs = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| parse_err(e.to_string()))?;
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize| record.get(columns[i]).unwrap_or("").to_string();
            let raw = MatchPairRecord {
                src_table: field(0),
                src_attr: field(1),
                tgt_table: field(2),
                tgt_attr: field(3),
            };
            if raw.src_table.is_empty() || raw.src_attr.is_empty() {
                return Err(parse_err(format!("line {line}: empty source column")));
            }
            if raw.tgt_table.is_empty() || raw.tgt_attr.is_empty() {
                return Err(parse_err(format!("line {line}: empty target column (use NA)")));
            }
            let (src_table, src_attr) = (raw.src_table.clone(), raw.src_attr.clone());
            pairs.push(MatchPair::try_from(raw).map_err(|_| SchemaError::InconsistentNa {
                line,
                src_table,
                src_attr,
            })?);
        }
        Ok(Self { pairs })
    }

    pub fn from_csv_str(text: &str) -> Result<Self, SchemaError> {
        Self::from_csv_reader(text.as_bytes(), "<string>")
    }

    pub fn to_csv_string(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(TRUTH_HEADER).expect("in-memory write");
        for pair in &self.pairs {
            let r = MatchPairRecord::from(pair.clone());
            wtr.write_record([&r.src_table, &r.src_attr, &r.tgt_table, &r.tgt_attr])
                .expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    /// Pairs grouped by normalized source attribute, in first-seen order.
    pub fn by_source(&self) -> Vec<(AttrRef, Vec<&MatchPair>)> {
        let mut order: Vec<(AttrRef, Vec<&MatchPair>)> = Vec::new();
        let mut index: BTreeMap<(String, String), usize> = BTreeMap::new();
        for pair in &self.pairs {
            let src = pair.source();
            let slot = *index.entry(src.key()).or_insert_with(|| {
                order.push((src.clone(), Vec::new()));
                order.len() - 1
            });
            order[slot].1.push(pair);
        }
        order
    }
}

/// Reads a ground-truth CSV file.
pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth, SchemaError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| SchemaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    GroundTruth::from_csv_reader(file, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_columns: usize,
    pub n_tables: usize,
    pub n_mapped_columns: usize,
    pub n_null_mappings: usize,
}

/// Source-side dataset statistics.
///
/// A source attribute counts as mapped if any of its pairs has a target,
/// and as a null mapping if all of its pairs are NA.
pub fn dataset_stats(source: &Schema, truth: &GroundTruth) -> Result<DatasetStats, SchemaError> {
    let mut n_mapped_columns = 0;
    let mut n_null_mappings = 0;
    for (src, pairs) in truth.by_source() {
        if source.attribute(&src.table, &src.attribute).is_none() {
            return Err(SchemaError::UnknownAttribute {
                table: src.table,
                attribute: src.attribute,
            });
        }
        if pairs.iter().any(|p| !p.is_null()) {
            n_mapped_columns += 1;
        } else {
            n_null_mappings += 1;
        }
    }
    Ok(DatasetStats {
        n_columns: source.attribute_count(),
        n_tables: source.tables.len(),
        n_mapped_columns,
        n_null_mappings,
    })
}

/// Target-side statistics: `n_mapped_columns` counts distinct target
/// attributes referenced by the truth. Unknown target attributes are
/// logged and skipped, since target schemas may be partial subsets.
pub fn target_stats(target: &Schema, truth: &GroundTruth) -> DatasetStats {
    let mut mapped = HashSet::new();
    for t in truth.pairs.iter().filter_map(|p| p.target.as_ref()) {
        if target.attribute(&t.table, &t.attribute).is_some() {
            mapped.insert(t.key());
        } else {
            tracing::warn!("ground truth references unknown target attribute {t}");
        }
    }
    DatasetStats {
        n_columns: target.attribute_count(),
        n_tables: target.tables.len(),
        n_mapped_columns: mapped.len(),
        n_null_mappings: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mini() -> Schema {
        Schema {
            name: "mini".into(),
            tables: vec![
                Table::new(
                    "PATIENTS",
                    "One row per patient.",
                    vec![
                        Attribute::new("SUBJECT_ID", "INTEGER", "patient id").primary_key(),
                        Attribute::new("GENDER", "VARCHAR(5)", "gender"),
                    ],
                ),
                Table::new(
                    "ADMISSIONS",
                    "Admissions.",
                    vec![
                        Attribute::new("HADM_ID", "INTEGER", "admission id").primary_key(),
                        Attribute::new("SUBJECT_ID", "INTEGER", "").references("PATIENTS", "SUBJECT_ID"),
                        Attribute::new("ADMITTIME", "TIMESTAMP", "admit time"),
                    ],
                ),
            ],
        }
    }

    #[test]
    fn mini_fixture_counts() {
        let text = mini().to_json_string();
        let s = Schema::from_json_str(&text, "mini").unwrap();
        assert_eq!(s.tables.len(), 2);
        assert_eq!(s.attribute_count(), 5);
        assert_eq!(s.tables[1].attributes[2].name, "ADMITTIME");
    }

    #[test]
    fn duplicate_table_names_rejected_case_insensitively() {
        let mut s = mini();
        s.tables[1].name = "X".into();
        s.tables[0].name = "x".into();
        let err = s.validate().unwrap_err();
        match err {
            SchemaError::Validation { element, .. } => assert_eq!(element, "X"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_attribute_and_empty_table_rejected() {
        let mut s = mini();
        s.tables[0].attributes[1].name = "subject_id".into();
        assert!(matches!(s.validate(), Err(SchemaError::Validation { .. })));

        let mut s = mini();
        s.tables[0].attributes.clear();
        assert!(matches!(s.validate(), Err(SchemaError::Validation { .. })));

        let s = Schema {
            name: "e".into(),
            tables: vec![],
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn fk_to_missing_attribute_is_error_but_outside_table_is_warning() {
        let mut s = mini();
        s.tables[1].attributes[1].references = Some(AttrRef::new("PATIENTS", "NOPE"));
        assert!(s.validate().is_err());

        let mut s = mini();
        s.tables[1].attributes[1].references = Some(AttrRef::new("CAREGIVERS", "CGID"));
        let warnings = s.validate().unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("CAREGIVERS"));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(
            Schema::from_json_str("{\"name\": 1", "bad"),
            Err(SchemaError::Parse { .. })
        ));
    }

    #[test]
    fn references_serialize_as_pair() {
        let json = serde_json::to_value(&mini().tables[1].attributes[1]).unwrap();
        assert_eq!(json["references"], serde_json::json!(["PATIENTS", "SUBJECT_ID"]));
        assert_eq!(json["type"], "INTEGER");
    }

    #[test]
    fn truth_rows_and_na_sentinel() {
        let t = GroundTruth::from_csv_str(
            "SRC_ENT,SRC_ATT,TGT_ENT,TGT_ATT\nADMISSIONS,SUBJECT_ID,PERSON,person_id\nADMISSIONS,ROW_ID,NA,NA\n",
        )
        .unwrap();
        assert_eq!(
            t.pairs[0],
            MatchPair::mapped("ADMISSIONS", "SUBJECT_ID", "PERSON", "person_id")
        );
        assert_eq!(t.pairs[1], MatchPair::null("ADMISSIONS", "ROW_ID"));
    }

    #[test]
    fn half_na_row_is_inconsistent() {
        let err = GroundTruth::from_csv_str("SRC_ENT,SRC_ATT,TGT_ENT,TGT_ATT\nX,a,NA,b\n").unwrap_err();
        assert!(matches!(err, SchemaError::InconsistentNa { ref src_table, .. } if src_table == "X"));
    }

    #[test]
    fn truth_with_index_column_and_spaces() {
        let t = GroundTruth::from_csv_str(",SRC_ENT,SRC_ATT,TGT_ENT,TGT_ATT\n0, A , b ,NA,NA\n").unwrap();
        assert_eq!(t.pairs, vec![MatchPair::null("A", "b")]);
    }

    #[test]
    fn truth_missing_header_column() {
        assert!(matches!(
            GroundTruth::from_csv_str("SRC_ENT,SRC_ATT,TGT_ENT\nA,b,C\n"),
            Err(SchemaError::Parse { .. })
        ));
    }

    #[test]
    fn truth_csv_round_trip() {
        let t = GroundTruth::new(vec![MatchPair::mapped("A", "x,y", "B", "z"), MatchPair::null("A", "w")]);
        assert_eq!(GroundTruth::from_csv_str(&t.to_csv_string()).unwrap(), t);
    }

    #[test]
    fn stats_hand_counted_fixture() {
        let source = Schema {
            name: "s".into(),
            tables: vec![Table::new(
                "T",
                "",
                vec![
                    Attribute::new("a", "", ""),
                    Attribute::new("b", "", ""),
                    Attribute::new("c", "", ""),
                ],
            )],
        };
        let truth = GroundTruth::new(vec![
            MatchPair::mapped("T", "a", "U", "x"),
            MatchPair::mapped("T", "b", "U", "y"),
            MatchPair::null("t", "C"),
        ]);
        let stats = dataset_stats(&source, &truth).unwrap();
        assert_eq!(
            stats,
            DatasetStats {
                n_columns: 3,
                n_tables: 1,
                n_mapped_columns: 2,
                n_null_mappings: 1
            }
        );
    }

    #[test]
    fn stats_empty_truth_and_unknown_attribute() {
        let s = mini();
        let stats = dataset_stats(&s, &GroundTruth::default()).unwrap();
        assert_eq!(
            (
                stats.n_columns,
                stats.n_tables,
                stats.n_mapped_columns,
                stats.n_null_mappings
            ),
            (5, 2, 0, 0)
        );

        let truth = GroundTruth::new(vec![MatchPair::null("PATIENTS", "DOB")]);
        assert!(matches!(
            dataset_stats(&s, &truth),
            Err(SchemaError::UnknownAttribute { .. })
        ));
    }

    #[test]
    fn stats_mapped_wins_over_na_for_same_attribute() {
        let s = mini();
        let truth = GroundTruth::new(vec![
            MatchPair::null("PATIENTS", "GENDER"),
            MatchPair::mapped("PATIENTS", "GENDER", "PERSON", "gender_concept_id"),
        ]);
        let stats = dataset_stats(&s, &truth).unwrap();
        assert_eq!((stats.n_mapped_columns, stats.n_null_mappings), (1, 0));
    }

    #[test]
    fn target_stats_counts_distinct_targets() {
        let target = mini();
        let truth = GroundTruth::new(vec![
            MatchPair::mapped("X", "a", "PATIENTS", "subject_id"),
            MatchPair::mapped("X", "b", "PATIENTS", "SUBJECT_ID"),
            MatchPair::mapped("X", "c", "ADMISSIONS", "HADM_ID"),
            MatchPair::mapped("X", "d", "NOWHERE", "z"),
        ]);
        let stats = target_stats(&target, &truth);
        assert_eq!((stats.n_columns, stats.n_tables, stats.n_mapped_columns), (5, 2, 2));
    }
}
