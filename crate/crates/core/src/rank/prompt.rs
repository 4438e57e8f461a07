//! The matching prompt.
//!
//! The system text is the fixed matching instruction with K substituted.
//! The user text carries, in order: the expected output format, the
//! indexed source attributes, the source table document, the indexed
//! target attributes, one document per candidate table, an optional block
//! of known mappings, and the closing reminder.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RankError;
use crate::docgen::Corpus;
use crate::schema::{same_name, MatchPair, Schema, Table};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPrompt {
    pub system_text: String,
    pub user_text: String,
    pub k: usize,
    pub source_table: String,
    pub source_attributes: Vec<String>,
    pub candidate_tables: Vec<String>,
}

impl MatchPrompt {
    /// System and user text joined by a newline.
    pub fn full_text(&self) -> String {
        format!("{}\n{}", self.system_text, self.user_text)
    }

    pub fn char_len(&self) -> usize {
        self.system_text.chars().count() + 1 + self.user_text.chars().count()
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.full_text().as_bytes()))
    }
}

pub fn system_text(k: usize) -> String {
    [
        format!(
            "You are an expert in databases, and schema matching at top k specifically. Your task is to create \
matches between source and target tables and attributes. For each attribute from the source you always suggest \
the top {k} most relevant tables and columns from the target. You are excellent at this task."
        ),
        "If none of the columns are relevant,  the last table and column should be \"NA\", \"NA\". This value may \
appear only once per mapping!"
            .to_string(),
        "Your job is to match the schemas. You never provide explanations, code or anything else, only results. \
Below are the two schemas."
            .to_string(),
        "Create top k matches between source and target tables and columns.".to_string(),
        format!(
            "Make sure to match the entire input. Make sure to return the results in the following json format \
with top {k} target results foreach input in source."
        ),
    ]
    .join("\n")
}

fn expected_format(k: usize) -> String {
    let targets = (1..=k)
        .map(|i| format!("'TGT_ENT{i}': 'TARGET_TABLE_NAME{i}', 'TGT_ATT{i}': 'TARGET_COLUMN_NAME{i}'"))
        .collect::<Vec<_>>()
        .join(", ");
    let source = "'SRC_ENT': 'SOURCE_TABLE_NAME', 'SRC_ATT': 'SOURCE_COLUMN_NAME',";
    format!("Expected output format:\n{{'1': {{{source}\n{targets}}},\n'2': {{{source}\n{targets}}}}}...")
}

const CLOSING: &str = "Remember to match the entire input. Make sure to return only the results!";

pub struct PromptInputs<'a> {
    pub source_table: &'a Table,
    /// Source attribute corpus.
    pub source_docs: &'a Corpus,
    /// Source attributes to ask about, in order.
    pub attributes: &'a [String],
    pub target: &'a Schema,
    /// Target table corpus.
    pub target_docs: &'a Corpus,
    pub candidate_tables: &'a [String],
    pub k: usize,
    /// Known mappings; pairs for other source tables are ignored.
    pub guidance: &'a [MatchPair],
}

/// Builds the prompt for one source table. Output is a pure function of the
/// inputs.
pub fn build_match_prompt(inputs: &PromptInputs<'_>) -> Result<MatchPrompt, RankError> {
    let k = inputs.k;
    if k == 0 {
        return Err(RankError::InvalidK);
    }
    let table = inputs.source_table;
    let source_doc = inputs
        .source_docs
        .attribute_docs(&table.name)
        .next()
        .ok_or_else(|| RankError::MissingDocument(format!("source table {}", table.name)))?;

    let mut blocks = vec![expected_format(k)];

    let mut source_block = String::from("Source Schema:\n,SRC_ENT, SRC_ATT");
    for (i, attr) in inputs.attributes.iter().enumerate() {
        source_block.push_str(&format!("\n{i},{}, {attr}", table.name));
    }
    blocks.push(source_block);
    blocks.push(format!("{}\n{}", source_doc.title, source_doc.body));

    let mut target_block = String::from("Target Schema:\n,TGT_ENT,TGT_ATT");
    let mut target_docs = Vec::with_capacity(inputs.candidate_tables.len());
    let mut row = 0usize;
    for name in inputs.candidate_tables {
        let t = inputs
            .target
            .table(name)
            .ok_or_else(|| RankError::MissingDocument(format!("target table {name}")))?;
        let doc = inputs
            .target_docs
            .table_doc(&t.name)
            .ok_or_else(|| RankError::MissingDocument(format!("target table {name}")))?;
        for attr in &t.attributes {
            target_block.push_str(&format!("\n{row},{},{}", t.name, attr.name));
            row += 1;
        }
        target_docs.push(doc.text());
    }
    blocks.push(target_block);
    blocks.extend(target_docs);

    let guided: Vec<&MatchPair> = inputs
        .guidance
        .iter()
        .filter(|p| same_name(&p.src_table, &table.name) && p.target.is_some())
        .collect();
    if !guided.is_empty() {
        let mut block = String::from("Known mappings:\n,SRC_ENT,SRC_ATT,TGT_ENT,TGT_ATT");
        for (i, p) in guided.iter().enumerate() {
            let t = p.target.as_ref().expect("filtered");
            block.push_str(&format!(
                "\n{i},{},{},{},{}",
                p.src_table, p.src_attr, t.table, t.attribute
            ));
        }
        blocks.push(block);
    }
    blocks.push(CLOSING.to_string());

    Ok(MatchPrompt {
        system_text: system_text(k),
        user_text: blocks.join("\n\n"),
        k,
        source_table: table.name.clone(),
        source_attributes: inputs.attributes.to_vec(),
        candidate_tables: inputs.candidate_tables.to_vec(),
    })
}
