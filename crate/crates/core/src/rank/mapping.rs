//! Per-table mapping: prompt, rank, parse, re-ask, pad.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{
    build_match_prompt, parse_topk_response, Diagnostic, DiagnosticKind, MatchPrompt, PromptInputs, RankError,
    RankRequest, RankedRow, Ranker, TranscriptLog,
};
use crate::docgen::{Corpus, DocMode};
use crate::schema::{name_key, AttrRef, MatchPair, Schema, Table};

pub struct MappingRequest<'a> {
    pub source: &'a Schema,
    pub target: &'a Schema,
    /// Source attribute corpus.
    pub source_docs: &'a Corpus,
    /// Target table corpus.
    pub target_docs: &'a Corpus,
    pub mode: DocMode,
    pub source_table: &'a Table,
    /// Candidate target tables, in target-schema order.
    pub candidate_tables: &'a [String],
    pub k: usize,
    pub guidance: &'a [MatchPair],
    /// Maximum prompt length in characters.
    pub budget_chars: usize,
    pub transcript: Option<&'a TranscriptLog>,
}

/// Ranked rows for one source table, in attribute order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMapping {
    pub rows: Vec<RankedRow>,
    pub diagnostics: Vec<Diagnostic>,
    /// Ranker calls made, re-asks and batches included.
    pub calls: usize,
}

struct Session<'r, 'a> {
    ranker: &'r dyn Ranker,
    req: &'r MappingRequest<'a>,
    diagnostics: Vec<Diagnostic>,
    calls: usize,
}

impl Session<'_, '_> {
    fn prompt(&self, attributes: &[String], tables: &[String]) -> Result<MatchPrompt, RankError> {
        let r = self.req;
        build_match_prompt(&PromptInputs {
            source_table: r.source_table,
            source_docs: r.source_docs,
            attributes,
            target: r.target,
            target_docs: r.target_docs,
            candidate_tables: tables,
            k: r.k,
            guidance: r.guidance,
        })
    }

    fn fits(&self, attributes: &[String], tables: &[String]) -> Result<bool, RankError> {
        Ok(self.prompt(attributes, tables)?.char_len() <= self.req.budget_chars)
    }

    fn call(&mut self, prompt: &MatchPrompt) -> Result<String, RankError> {
        self.calls += 1;
        let outcome = self.ranker.rank(&RankRequest {
            prompt,
            source: self.req.source,
            target: self.req.target,
            mode: self.req.mode,
        });
        if let Some(log) = self.req.transcript {
            log.record(self.ranker, prompt, &outcome)?;
        }
        outcome
    }

    /// One pass over `attributes`; returns a slot per attribute.
    fn ask(&mut self, attributes: &[String], tables: &[String]) -> Result<Vec<Option<RankedRow>>, RankError> {
        let r = self.req;
        let prompt = self.prompt(attributes, tables)?;
        let raw = self.call(&prompt)?;
        let expected: Vec<AttrRef> = attributes
            .iter()
            .map(|a| AttrRef::new(&r.source_table.name, a))
            .collect();
        let candidates: Vec<&Table> = tables.iter().filter_map(|t| r.target.table(t)).collect();
        let mut slots = vec![None; attributes.len()];
        match parse_topk_response(&raw, &expected, r.k, &candidates) {
            Ok(parsed) => {
                self.diagnostics.extend(parsed.diagnostics);
                for (row, idx) in parsed.rows.into_iter().zip(parsed.expected_index) {
                    if let Some(i) = idx {
                        slots[i] = Some(row);
                    }
                }
            }
            Err(RankError::Unparseable(preview)) => {
                self.diagnostics.push(Diagnostic::new(
                    DiagnosticKind::Unparseable,
                    &r.source_table.name,
                    None,
                    preview,
                ));
            }
            Err(e) => return Err(e),
        }
        Ok(slots)
    }

    /// Asks for every attribute, re-asks once for whatever is missing and
    /// pads the rest.
    fn resolve(&mut self, attributes: &[String], tables: &[String]) -> Result<Vec<RankedRow>, RankError> {
        let mut slots = self.ask(attributes, tables)?;
        let missing: Vec<usize> = (0..slots.len()).filter(|&i| slots[i].is_none()).collect();
        if !missing.is_empty() {
            let retry: Vec<String> = missing.iter().map(|&i| attributes[i].clone()).collect();
            let again = self.ask(&retry, tables)?;
            for (&i, row) in missing.iter().zip(again) {
                slots[i] = row;
            }
        }
        let table = &self.req.source_table.name;
        Ok(slots
            .into_iter()
            .zip(attributes)
            .map(|(slot, attr)| {
                slot.unwrap_or_else(|| {
                    self.diagnostics.push(Diagnostic::new(
                        DiagnosticKind::Unresolved,
                        table,
                        Some(attr),
                        "no row after re-ask",
                    ));
                    RankedRow::unresolved(table, attr, self.req.k)
                })
            })
            .collect())
    }

    /// Greedy batches of candidate tables that each fit the budget.
    fn batches(&self, attributes: &[String]) -> Result<Vec<Vec<String>>, RankError> {
        let mut out: Vec<Vec<String>> = Vec::new();
        let mut current: Vec<String> = Vec::new();
        for table in self.req.candidate_tables {
            current.push(table.clone());
            if self.fits(attributes, &current)? {
                continue;
            }
            current.pop();
            if current.is_empty() {
                let chars = self.prompt(attributes, std::slice::from_ref(table))?.char_len();
                return Err(RankError::ContextOverflow {
                    chars,
                    budget: self.req.budget_chars,
                });
            }
            out.push(std::mem::take(&mut current));
            current.push(table.clone());
            if !self.fits(attributes, &current)? {
                let chars = self.prompt(attributes, &current)?.char_len();
                return Err(RankError::ContextOverflow {
                    chars,
                    budget: self.req.budget_chars,
                });
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
        Ok(out)
    }
}

/// Produces K ranked targets for every attribute of the source table.
///
/// When the prompt over all candidate tables exceeds the budget, the
/// candidates are split into batches that fit, each batch is ranked, and
/// the tables that won any slot are ranked together in a final call. If
/// even that union is too long, the tables with the most wins are kept.
pub fn create_topk_mapping(ranker: &dyn Ranker, req: &MappingRequest<'_>) -> Result<TableMapping, RankError> {
    if req.k == 0 {
        return Err(RankError::InvalidK);
    }
    if req.candidate_tables.is_empty() {
        return Err(RankError::NoCandidates(req.source_table.name.clone()));
    }
    let attributes: Vec<String> = req.source_table.attributes.iter().map(|a| a.name.clone()).collect();
    let mut session = Session {
        ranker,
        req,
        diagnostics: Vec::new(),
        calls: 0,
    };

    let rows = if session.fits(&attributes, req.candidate_tables)? {
        session.resolve(&attributes, req.candidate_tables)?
    } else {
        let batches = session.batches(&attributes)?;
        session.diagnostics.push(Diagnostic::new(
            DiagnosticKind::ContextSplit,
            &req.source_table.name,
            None,
            format!(
                "{} candidate tables split into {} batches",
                req.candidate_tables.len(),
                batches.len()
            ),
        ));
        let mut wins: HashMap<String, usize> = HashMap::new();
        let mut first = None;
        for batch in &batches {
            let rows = session.resolve(&attributes, batch)?;
            for t in rows.iter().flat_map(|r| &r.targets).filter_map(|t| t.as_attr()) {
                if batch.iter().any(|b| name_key(b) == name_key(&t.table)) {
                    *wins.entry(name_key(&t.table)).or_default() += 1;
                }
            }
            first.get_or_insert(rows);
        }
        let mut union: Vec<String> = req
            .candidate_tables
            .iter()
            .filter(|t| wins.contains_key(&name_key(t)))
            .cloned()
            .collect();
        if union.is_empty() {
            first.expect("at least one batch")
        } else {
            while union.len() > 1 && !session.fits(&attributes, &union)? {
                let weakest = union
                    .iter()
                    .enumerate()
                    .rev()
                    .min_by_key(|(_, t)| wins[&name_key(t)])
                    .map(|(i, _)| i)
                    .expect("non-empty");
                union.remove(weakest);
            }
            session.resolve(&attributes, &union)?
        }
    };

    Ok(TableMapping {
        rows,
        diagnostics: session.diagnostics,
        calls: session.calls,
    })
}
