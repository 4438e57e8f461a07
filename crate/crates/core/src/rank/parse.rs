//! Tolerant parsing of ranker responses.
//!
//! Model output is JSON-like rather than JSON: single-quoted strings,
//! apostrophes inside them, trailing commas, surrounding prose and code
//! fences. The reader below accepts all of that, never panics, and bounds
//! nesting depth.

use std::collections::BTreeMap;

use super::{Diagnostic, DiagnosticKind, RankError, RankedRow, Target};
use crate::schema::{same_name, AttrRef, Table, NA};

const MAX_DEPTH: usize = 64;
const MAX_START_ATTEMPTS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Str(String),
    Bare(String),
    Obj(Vec<(String, Value)>),
    Arr(Vec<Value>),
}

struct Reader<'a> {
    chars: &'a [char],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn value(&mut self, depth: usize) -> Option<Value> {
        if depth > MAX_DEPTH {
            return None;
        }
        self.skip_ws();
        match self.peek()? {
            '{' => self.object(depth),
            '[' => self.array(depth),
            q @ ('\'' | '"') => self.string(q).map(Value::Str),
            _ => self.bare().map(Value::Bare),
        }
    }

    fn object(&mut self, depth: usize) -> Option<Value> {
        self.pos += 1;
        let mut fields = Vec::new();
        loop {
            if self.eat('}') {
                return Some(Value::Obj(fields));
            }
            self.skip_ws();
            let key = match self.peek()? {
                q @ ('\'' | '"') => self.string(q)?,
                _ => self.bare()?,
            };
            if !self.eat(':') {
                return None;
            }
            let value = self.value(depth + 1)?;
            fields.push((key, value));
            if !self.eat(',') {
                return self.eat('}').then_some(Value::Obj(fields));
            }
        }
    }

    fn array(&mut self, depth: usize) -> Option<Value> {
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            if self.eat(']') {
                return Some(Value::Arr(items));
            }
            items.push(self.value(depth + 1)?);
            if !self.eat(',') {
                return self.eat(']').then_some(Value::Arr(items));
            }
        }
    }

    /// A single-quoted string only closes at a quote followed by a
    /// structural character, so `'patient's id'` reads as one string.
    fn string(&mut self, quote: char) -> Option<String> {
        self.pos += 1;
        let mut out = String::new();
        loop {
            let c = self.peek()?;
            self.pos += 1;
            match c {
                '\\' => {
                    let e = self.peek()?;
                    self.pos += 1;
                    match e {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        'u' => {
                            let hex: String = self.chars.get(self.pos..self.pos + 4)?.iter().collect();
                            self.pos += 4;
                            out.push(u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32)?);
                        }
                        other => out.push(other),
                    }
                }
                c if c == quote => {
                    if quote == '"' || self.closes_here() {
                        return Some(out);
                    }
                    out.push(c);
                }
                c => out.push(c),
            }
        }
    }

    fn closes_here(&self) -> bool {
        let mut i = self.pos;
        while self.chars.get(i).is_some_and(|c| *c == ' ' || *c == '\t') {
            i += 1;
        }
        matches!(self.chars.get(i), None | Some(',' | ':' | '}' | ']' | '\n' | '\r'))
    }

    fn bare(&mut self) -> Option<String> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| !c.is_whitespace() && !matches!(c, ',' | ':' | '{' | '}' | '[' | ']' | '\'' | '"'))
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| self.chars[start..self.pos].iter().collect())
    }
}

/// One entry of a response, before validation. `slots[i]` holds the
/// `(TGT_ENT{i+1}, TGT_ATT{i+1})` values as given.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedEntry {
    pub src_table: Option<String>,
    pub src_attr: Option<String>,
    pub slots: Vec<(Option<String>, Option<String>)>,
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Str(s) => Some(s.trim().to_string()),
        Value::Bare(s) if matches!(s.as_str(), "null" | "None") => None,
        Value::Bare(s) => Some(s.trim().to_string()),
        _ => None,
    }
}

fn target_index(key: &str, prefix: &str) -> Option<usize> {
    let upper = key.trim().to_ascii_uppercase();
    let rest = upper.strip_prefix(prefix)?;
    if rest.is_empty() {
        return Some(1);
    }
    rest.parse::<usize>().ok().filter(|&i| (1..=1000).contains(&i))
}

fn is_entry(fields: &[(String, Value)]) -> bool {
    fields
        .iter()
        .any(|(k, _)| same_name(k, "SRC_ENT") || same_name(k, "SRC_ATT"))
}

fn entry_from(fields: &[(String, Value)]) -> ParsedEntry {
    let mut entry = ParsedEntry::default();
    let mut slots: BTreeMap<usize, (Option<String>, Option<String>)> = BTreeMap::new();
    for (key, value) in fields {
        if same_name(key, "SRC_ENT") {
            entry.src_table = scalar(value);
        } else if same_name(key, "SRC_ATT") {
            entry.src_attr = scalar(value);
        } else if let Some(i) = target_index(key, "TGT_ENT") {
            slots.entry(i).or_default().0 = scalar(value);
        } else if let Some(i) = target_index(key, "TGT_ATT") {
            slots.entry(i).or_default().1 = scalar(value);
        }
    }
    if let Some(&max) = slots.keys().next_back() {
        entry.slots = (1..=max).map(|i| slots.remove(&i).unwrap_or_default()).collect();
    }
    entry
}

fn entries_from(v: &Value, depth: usize) -> Vec<ParsedEntry> {
    if depth > MAX_DEPTH {
        return Vec::new();
    }
    let children: Vec<&Value> = match v {
        Value::Obj(fields) if is_entry(fields) => return vec![entry_from(fields)],
        Value::Obj(fields) => fields.iter().map(|(_, v)| v).collect(),
        Value::Arr(items) => items.iter().collect(),
        _ => return Vec::new(),
    };
    let direct: Vec<ParsedEntry> = children
        .iter()
        .filter_map(|c| match c {
            Value::Obj(f) if is_entry(f) => Some(entry_from(f)),
            _ => None,
        })
        .collect();
    if !direct.is_empty() {
        return direct;
    }
    children
        .iter()
        .map(|c| entries_from(c, depth + 1))
        .find(|e| !e.is_empty())
        .unwrap_or_default()
}

/// Finds the first object (or array) in `raw` that contains mapping
/// entries and returns them in order of appearance.
pub fn extract_entries(raw: &str) -> Option<Vec<ParsedEntry>> {
    let chars: Vec<char> = raw.chars().collect();
    chars
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(c, '{' | '['))
        .take(MAX_START_ATTEMPTS)
        .find_map(|(start, _)| {
            let mut reader = Reader {
                chars: &chars,
                pos: start,
            };
            let value = reader.value(0)?;
            let entries = entries_from(&value, 0);
            (!entries.is_empty()).then_some(entries)
        })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedResponse {
    pub rows: Vec<RankedRow>,
    /// For each row, the index of the expected attribute it answers, or
    /// `None` for extra and repeated rows.
    pub expected_index: Vec<Option<usize>>,
    pub diagnostics: Vec<Diagnostic>,
}

fn is_na(s: &str) -> bool {
    s.trim().eq_ignore_ascii_case(NA)
}

/// Parses a ranker response into ranked rows and diagnostics.
///
/// Every row gets exactly `k` slots (padded with [`Target::Empty`] or
/// truncated). A row that stops early after `NA` is complete; other short
/// rows are flagged. Targets naming an attribute of a candidate table are
/// rewritten to the schema's casing; anything else is kept verbatim and
/// flagged as hallucinated.
pub fn parse_topk_response(
    raw: &str,
    expected: &[AttrRef],
    k: usize,
    candidates: &[&Table],
) -> Result<ParsedResponse, RankError> {
    let entries = extract_entries(raw).ok_or_else(|| {
        let preview: String = raw.chars().take(120).collect();
        RankError::Unparseable(preview)
    })?;
    let mut out = ParsedResponse::default();
    let mut seen = vec![false; expected.len()];
    for entry in entries {
        let src_table = entry.src_table.clone().unwrap_or_default();
        let src_attr = entry.src_attr.clone().unwrap_or_default();
        let hit = expected
            .iter()
            .position(|e| same_name(&e.table, &src_table) && same_name(&e.attribute, &src_attr));
        let slot = match hit {
            Some(i) if !seen[i] => {
                seen[i] = true;
                Some(i)
            }
            Some(_) => {
                out.diagnostics.push(Diagnostic::new(
                    DiagnosticKind::ExtraRow,
                    &src_table,
                    Some(&src_attr),
                    "repeated row",
                ));
                None
            }
            None => {
                out.diagnostics.push(Diagnostic::new(
                    DiagnosticKind::ExtraRow,
                    &src_table,
                    Some(&src_attr),
                    "row for an attribute that was not requested",
                ));
                None
            }
        };
        let (table_name, attr_name) = match slot {
            Some(i) => (expected[i].table.clone(), expected[i].attribute.clone()),
            None => (src_table, src_attr),
        };
        let mut diag = |kind, detail: String| {
            out.diagnostics
                .push(Diagnostic::new(kind, &table_name, Some(&attr_name), detail));
        };

        let mut targets = Vec::with_capacity(k);
        let mut seen_na = false;
        for (i, (ent, att)) in entry.slots.iter().enumerate().take(k) {
            let rank = i + 1;
            let target = match (ent.as_deref(), att.as_deref()) {
                (None, None) => Target::Empty,
                (Some(e), Some(a)) if is_na(e) && is_na(a) => {
                    if seen_na {
                        diag(DiagnosticKind::DuplicateNa, format!("NA repeated at rank {rank}"));
                        Target::Empty
                    } else {
                        seen_na = true;
                        Target::Na
                    }
                }
                (Some(e), Some(a)) if !is_na(e) && !is_na(a) && !e.is_empty() && !a.is_empty() => {
                    let found = candidates
                        .iter()
                        .find(|t| same_name(&t.name, e))
                        .and_then(|t| t.attribute(a).map(|attr| (t, attr)));
                    match found {
                        Some((t, attr)) => Target::attribute(&t.name, &attr.name),
                        None => {
                            diag(
                                DiagnosticKind::HallucinatedTarget,
                                format!("{e}.{a} at rank {rank} is not a candidate attribute"),
                            );
                            Target::attribute(e, a)
                        }
                    }
                }
                (e, a) => {
                    diag(
                        DiagnosticKind::MalformedTarget,
                        format!("rank {rank}: table {e:?}, attribute {a:?}"),
                    );
                    Target::Empty
                }
            };
            targets.push(target);
        }
        let provided = entry.slots.len().min(k);
        if provided < k && !seen_na {
            diag(DiagnosticKind::ShortRow, format!("{provided} of {k} targets"));
        }
        targets.resize(k, Target::Empty);
        out.rows.push(RankedRow {
            src_table: table_name,
            src_attr: attr_name,
            targets,
            unresolved: false,
        });
        out.expected_index.push(slot);
    }
    for (e, _) in expected.iter().zip(&seen).filter(|(_, s)| !**s) {
        out.diagnostics.push(Diagnostic::new(
            DiagnosticKind::MissingRow,
            &e.table,
            Some(&e.attribute),
            "no row in response",
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Attribute;

    /// The sample output format from the matching instructions, as printed
    /// (tabs, line breaks and trailing ellipsis included).
    const SAMPLE: &str = "{'1': {'SRC_ENT': 'SOURCE_TABLE_NAME', 'SRC_ATT': 'SOURCE_COLUMN_NAME', \n\
\t   'TGT_ENT1': 'TARGET_TABLE_NAME1', 'TGT_ATT1': 'TARGET_COLUMN_NAME1', \n\
\t   'TGT_ENT2': 'TARGET_TABLE_NAME2', 'TGT_ATT2': 'TARGET_COLUMN_NAME2'},\n \
 '2': {'SRC_ENT': 'SOURCE_TABLE_NAME', 'SRC_ATT': 'SOURCE_COLUMN_NAME',\n\
\t   'TGT_ENT1': 'TARGET_TABLE_NAME1', 'TGT_ATT1': 'TARGET_COLUMN_NAME1',\n\
\t   'TGT_ENT2': 'TARGET_TABLE_NAME2', 'TGT_ATT2': 'TARGET_COLUMN_NAME2'}} ...";

    fn person() -> Table {
        Table::new(
            "PERSON",
            "",
            vec![
                Attribute::new("person_id", "", ""),
                Attribute::new("gender_concept_id", "", ""),
            ],
        )
    }

    #[test]
    fn sample_output_parses_positionally() {
        let entries = extract_entries(SAMPLE).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].src_table.as_deref(), Some("SOURCE_TABLE_NAME"));
        assert_eq!(entries[1].src_attr.as_deref(), Some("SOURCE_COLUMN_NAME"));
        assert_eq!(
            entries[0].slots,
            vec![
                (Some("TARGET_TABLE_NAME1".into()), Some("TARGET_COLUMN_NAME1".into())),
                (Some("TARGET_TABLE_NAME2".into()), Some("TARGET_COLUMN_NAME2".into())),
            ]
        );
        let parsed = parse_topk_response(SAMPLE, &[], 2, &[]).unwrap();
        assert_eq!(parsed.rows.len(), 2);
        assert_eq!(
            parsed.rows[0].targets[1],
            Target::attribute("TARGET_TABLE_NAME2", "TARGET_COLUMN_NAME2")
        );
    }

    #[test]
    fn prose_fences_and_double_quotes() {
        let raw = "Sure! Here you go:\n```json\n{\"1\": {\"SRC_ENT\": \"A\", \"SRC_ATT\": \"b\", \
\"TGT_ENT1\": \"PERSON\", \"TGT_ATT1\": \"PERSON_ID\"}}\n```\nLet me know {if} more.";
        let t = person();
        let parsed = parse_topk_response(raw, &[AttrRef::new("a", "B")], 1, &[&t]).unwrap();
        assert!(parsed.diagnostics.is_empty(), "{:?}", parsed.diagnostics);
        assert_eq!(parsed.rows[0].src_table, "a");
        assert_eq!(parsed.rows[0].targets, vec![Target::attribute("PERSON", "person_id")]);
        assert_eq!(parsed.expected_index, vec![Some(0)]);
    }

    #[test]
    fn apostrophes_inside_single_quotes() {
        let raw = "{'1': {'SRC_ENT': 'patient's table', 'SRC_ATT': 'x', 'TGT_ENT1': 'NA', 'TGT_ATT1': 'NA',}}";
        let entries = extract_entries(raw).unwrap();
        assert_eq!(entries[0].src_table.as_deref(), Some("patient's table"));
        assert_eq!(entries[0].slots[0].0.as_deref(), Some("NA"));
    }

    #[test]
    fn duplicate_na_is_flagged_and_row_kept() {
        let raw = "{'1': {'SRC_ENT': 'A', 'SRC_ATT': 'b', 'TGT_ENT1': 'NA', 'TGT_ATT1': 'NA', \
'TGT_ENT2': 'NA', 'TGT_ATT2': 'NA'}}";
        let parsed = parse_topk_response(raw, &[AttrRef::new("A", "b")], 2, &[]).unwrap();
        assert_eq!(parsed.rows.len(), 1);
        assert_eq!(parsed.rows[0].targets, vec![Target::Na, Target::Empty]);
        assert_eq!(parsed.diagnostics.len(), 1);
        assert_eq!(parsed.diagnostics[0].kind, DiagnosticKind::DuplicateNa);
    }

    #[test]
    fn missing_rows_are_reported() {
        let raw = "{'1': {'SRC_ENT': 'T', 'SRC_ATT': 'a', 'TGT_ENT1': 'PERSON', 'TGT_ATT1': 'person_id'}, \
'2': {'SRC_ENT': 'T', 'SRC_ATT': 'b', 'TGT_ENT1': 'PERSON', 'TGT_ATT1': 'person_id'}}";
        let expected = [AttrRef::new("T", "a"), AttrRef::new("T", "b"), AttrRef::new("T", "c")];
        let t = person();
        let parsed = parse_topk_response(raw, &expected, 1, &[&t]).unwrap();
        assert_eq!(parsed.rows.len(), 2);
        assert_eq!(parsed.diagnostics.len(), 1);
        let d = &parsed.diagnostics[0];
        assert_eq!((d.kind, d.src_attr.as_deref()), (DiagnosticKind::MissingRow, Some("c")));
    }

    #[test]
    fn hallucinated_short_extra_and_malformed() {
        let raw = "[{'SRC_ENT': 'T', 'SRC_ATT': 'a', 'TGT_ENT1': 'PERSON', 'TGT_ATT1': 'shoe_size', \
'TGT_ENT2': 'NA', 'TGT_ATT2': 'person_id'},\
{'SRC_ENT': 'T', 'SRC_ATT': 'a', 'TGT_ENT1': 'PERSON', 'TGT_ATT1': 'person_id'},\
{'SRC_ENT': 'T', 'SRC_ATT': 'zzz', 'TGT_ENT1': 'PERSON', 'TGT_ATT1': 'person_id'}]";
        let t = person();
        let parsed = parse_topk_response(raw, &[AttrRef::new("T", "a")], 3, &[&t]).unwrap();
        let kinds: Vec<DiagnosticKind> = parsed.diagnostics.iter().map(|d| d.kind).collect();
        assert!(kinds.contains(&DiagnosticKind::HallucinatedTarget));
        assert!(kinds.contains(&DiagnosticKind::MalformedTarget));
        assert!(kinds.contains(&DiagnosticKind::ShortRow));
        assert_eq!(kinds.iter().filter(|k| **k == DiagnosticKind::ExtraRow).count(), 2);
        assert_eq!(parsed.rows[0].targets[0], Target::attribute("PERSON", "shoe_size"));
        assert!(parsed.rows.iter().all(|r| r.targets.len() == 3));
        assert_eq!(parsed.expected_index, vec![Some(0), None, None]);
    }

    #[test]
    fn rows_longer_than_k_are_truncated() {
        let raw = "{'1': {'SRC_ENT': 'T', 'SRC_ATT': 'a', 'TGT_ENT1': 'PERSON', 'TGT_ATT1': 'person_id', \
'TGT_ENT2': 'PERSON', 'TGT_ATT2': 'gender_concept_id'}}";
        let t = person();
        let parsed = parse_topk_response(raw, &[AttrRef::new("T", "a")], 1, &[&t]).unwrap();
        assert_eq!(parsed.rows[0].targets.len(), 1);
        assert!(parsed.diagnostics.is_empty());
    }

    #[test]
    fn wrapped_mapping_is_found() {
        let raw = r#"{"result": {"mappings": [{"SRC_ENT": "T", "SRC_ATT": "a", "TGT_ENT1": "NA", "TGT_ATT1": "NA"}]}}"#;
        let parsed = parse_topk_response(raw, &[AttrRef::new("T", "a")], 1, &[]).unwrap();
        assert_eq!(parsed.rows[0].targets, vec![Target::Na]);
    }

    #[test]
    fn unparseable_inputs() {
        for raw in ["", "no json here", "{'a': 1}", "{{{{{{", "[1, 2, 3]", "{'SRC_ENT"] {
            assert!(
                matches!(parse_topk_response(raw, &[], 1, &[]), Err(RankError::Unparseable(_))),
                "{raw}"
            );
        }
    }

    #[test]
    fn deep_nesting_does_not_overflow() {
        let raw = "[".repeat(100_000);
        assert!(extract_entries(&raw).is_none());
        let raw = format!(
            "{}{{'SRC_ENT': 'T', 'SRC_ATT': 'a'}}{}",
            "{'x': ".repeat(200),
            "}".repeat(200)
        );
        let _ = extract_entries(&raw);
    }

    proptest::proptest! {
        #[test]
        fn parser_is_total(raw in "\\PC{0,200}") {
            let _ = parse_topk_response(&raw, &[AttrRef::new("T", "a")], 2, &[]);
        }

        #[test]
        fn parser_is_total_on_structured_noise(raw in "[{}\\[\\]'\":, a-zA-Z_0-9\\\\]{0,200}") {
            let _ = parse_topk_response(&raw, &[AttrRef::new("T", "a")], 2, &[]);
        }
    }
}
