//! Structured documents for tables and attributes.
//!
//! A table document is the table name followed by an overview paragraph and
//! three sections (primary keys, foreign keys, other columns). An attribute
//! document is the document of its table with the attribute name on its own
//! line above the title.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::schema::{name_key, Attribute, Schema, Table};

pub const PRIMARY_KEYS: &str = "Primary Keys:";
pub const FOREIGN_KEYS: &str = "Foreign Keys:";
pub const OTHER_COLUMNS: &str = "Other Columns:";

/// How much of the schema text goes into a document.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocMode {
    /// Descriptions, types and foreign-key targets.
    #[default]
    Full,
    /// Bare table and attribute names.
    NamesOnly,
}

impl std::str::FromStr for DocMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(DocMode::Full),
            "names-only" => Ok(DocMode::NamesOnly),
            other => Err(format!("unknown document mode `{other}` (expected full or names-only)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocKind {
    TableDoc,
    AttributeDoc,
}

/// Where a document came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Origin {
    pub schema: String,
    pub table: String,
    pub attribute: Option<String>,
}

impl Origin {
    pub fn table(schema: &str, table: &str) -> Self {
        Self {
            schema: schema.to_string(),
            table: table.to_string(),
            attribute: None,
        }
    }

    pub fn attribute(schema: &str, table: &str, attribute: &str) -> Self {
        Self {
            schema: schema.to_string(),
            table: table.to_string(),
            attribute: Some(attribute.to_string()),
        }
    }

    /// Parses `schema__table` or `schema__table__attribute`.
    pub fn parse(s: &str) -> Option<Self> {
        let parts: Vec<&str> = s.split("__").collect();
        match parts.as_slice() {
            [schema, table] if !schema.is_empty() && !table.is_empty() => Some(Self::table(schema, table)),
            [schema, table, attr] if !schema.is_empty() && !table.is_empty() && !attr.is_empty() => {
                Some(Self::attribute(schema, table, attr))
            }
            _ => None,
        }
    }

    fn key(&self) -> (String, String, Option<String>) {
        (
            name_key(&self.schema),
            name_key(&self.table),
            self.attribute.as_deref().map(name_key),
        )
    }

    /// File name for the document, components joined by `__`.
    pub fn file_name(&self) -> String {
        let safe = |s: &str| -> String {
            s.chars()
                .map(|c| {
                    if c.is_alphanumeric() || matches!(c, '_' | '-' | '.') {
                        c
                    } else {
                        '_'
                    }
                })
                .collect()
        };
        let mut name = format!("{}__{}", safe(&self.schema), safe(&self.table));
        if let Some(attr) = &self.attribute {
            name.push_str("__");
            name.push_str(&safe(attr));
        }
        name.push_str(".txt");
        name
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}__{}", self.schema, self.table)?;
        if let Some(attr) = &self.attribute {
            write!(f, "__{attr}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub kind: DocKind,
    pub title: String,
    pub highlight: Option<String>,
    pub body: String,
    pub origin: Origin,
}

impl Document {
    /// Full rendered text: optional highlight line, title line, body.
    pub fn text(&self) -> String {
        let mut out = String::with_capacity(self.body.len() + self.title.len() + 64);
        if let Some(h) = &self.highlight {
            out.push_str(h);
            out.push('\n');
        }
        out.push_str(&self.title);
        out.push('\n');
        out.push_str(&self.body);
        out
    }
}

fn entry(attr: &Attribute, with_reference: bool) -> String {
    let mut line = if attr.data_type.trim().is_empty() {
        format!("{}: {}", attr.name, attr.description)
    } else {
        format!("{} ({}): {}", attr.name, attr.data_type, attr.description)
    };
    if let (true, Some(fk)) = (with_reference, &attr.references) {
        if !attr.description.is_empty() {
            line.push(' ');
        }
        line.push_str(&format!("References to [{}, {}]", fk.table, fk.attribute));
    }
    line
}

fn render_body(table: &Table, mode: DocMode) -> String {
    let mut lines: Vec<String> = Vec::new();
    let render = |a: &Attribute, fk: bool| match mode {
        DocMode::Full => entry(a, fk),
        DocMode::NamesOnly => a.name.clone(),
    };
    if mode == DocMode::Full && !table.description.trim().is_empty() {
        lines.push(table.description.clone());
    }
    lines.push(PRIMARY_KEYS.to_string());
    lines.extend(table.primary_keys().map(|a| render(a, false)));
    lines.push(FOREIGN_KEYS.to_string());
    lines.extend(table.foreign_keys().map(|a| render(a, true)));
    lines.push(OTHER_COLUMNS.to_string());
    lines.extend(table.other_columns().map(|a| render(a, false)));
    lines.join("\n")
}

/// Document for a whole table.
pub fn table_to_doc(schema: &Schema, table: &Table, mode: DocMode) -> Document {
    debug_assert!(schema.table(&table.name).is_some(), "table not in schema");
    Document {
        kind: DocKind::TableDoc,
        title: table.name.clone(),
        highlight: None,
        body: render_body(table, mode),
        origin: Origin::table(&schema.name, &table.name),
    }
}

/// Document for one attribute: its table's document with a highlight line.
pub fn attribute_to_doc(schema: &Schema, table: &Table, attr: &Attribute, mode: DocMode) -> Document {
    debug_assert!(table.attribute(&attr.name).is_some(), "attribute not in table");
    let mut doc = table_to_doc(schema, table, mode);
    doc.kind = DocKind::AttributeDoc;
    doc.highlight = Some(attr.name.clone());
    doc.origin = Origin::attribute(&schema.name, &table.name, &attr.name);
    doc
}

/// An ordered collection of documents with an origin index.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    index: HashMap<(String, String, Option<String>), usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        let index = documents.iter().enumerate().map(|(i, d)| (d.origin.key(), i)).collect();
        Self { documents, index }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, origin: &Origin) -> Option<&Document> {
        self.index.get(&origin.key()).map(|&i| &self.documents[i])
    }

    pub fn table_doc(&self, table: &str) -> Option<&Document> {
        self.documents
            .iter()
            .find(|d| d.kind == DocKind::TableDoc && crate::schema::same_name(&d.origin.table, table))
    }

    /// Attribute documents of one table, in corpus order.
    pub fn attribute_docs<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a Document> + 'a {
        self.documents
            .iter()
            .filter(move |d| d.kind == DocKind::AttributeDoc && crate::schema::same_name(&d.origin.table, table))
    }

    /// Writes one text file per document plus an `index.json` mapping
    /// origin to file name.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.documents.len());
        for doc in &self.documents {
            let file = doc.origin.file_name();
            std::fs::write(dir.join(&file), doc.text())?;
            entries.push(serde_json::json!({ "origin": doc.origin.to_string(), "file": file }));
        }
        let index = serde_json::to_string_pretty(&entries).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("index.json"), index)
    }
}

/// Table documents for every table of a schema.
pub fn table_corpus(schema: &Schema, mode: DocMode) -> Corpus {
    Corpus::new(schema.tables.iter().map(|t| table_to_doc(schema, t, mode)).collect())
}

/// Attribute documents for every attribute of a schema.
pub fn attribute_corpus(schema: &Schema, mode: DocMode) -> Corpus {
    Corpus::new(
        schema
            .tables
            .iter()
            .flat_map(|t| t.attributes.iter().map(move |a| attribute_to_doc(schema, t, a, mode)))
            .collect(),
    )
}

/// Source attribute corpus and target table corpus, in that order.
pub fn build_corpora(source: &Schema, target: &Schema, mode: DocMode) -> (Corpus, Corpus) {
    (attribute_corpus(source, mode), table_corpus(target, mode))
}
