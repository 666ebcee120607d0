//! Question files: one item per line, `text<TAB>answer|answer|...`, with the
//! topic mention in square brackets on labeled items. A sidecar file holds
//! the question type of each line.

use std::io::{BufRead, Write};

use super::QAItem;
use crate::error::{Result, VrnError};
use crate::kg::{tokenize, KnowledgeGraph};

pub fn write_qa<W: Write>(items: &[QAItem], g: &KnowledgeGraph, mut w: W) -> Result<()> {
    for it in items {
        let answers: Vec<&str> = it.answers.iter().map(|&a| g.entity_name(a)).collect();
        writeln!(w, "{}\t{}", it.surface(), answers.join("|"))?;
    }
    Ok(())
}

pub fn write_types<W: Write>(items: &[QAItem], mut w: W) -> Result<()> {
    for it in items {
        writeln!(w, "{}", it.type_id)?;
    }
    Ok(())
}

/// Parses a question file. `hops` is recorded on every item; types, when
/// given, must have one line per question.
pub fn read_qa<R: BufRead, T: BufRead>(qa: R, types: Option<T>, g: &KnowledgeGraph, hops: usize) -> Result<Vec<QAItem>> {
    let type_ids: Option<Vec<String>> = types.map(|t| t.lines().collect()).transpose()?;
    let mut items = Vec::new();
    for (i, line) in qa.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (text, answers) = line
            .split_once('\t')
            .ok_or_else(|| VrnError::Malformed { line: lineno, reason: "expected `question<TAB>answers`".into() })?;
        let mut tokens = Vec::new();
        let mut mention = None;
        let mut rest = text;
        while let Some(open) = rest.find('[') {
            tokens.extend(tokenize(&rest[..open]));
            let close = rest[open..]
                .find(']')
                .ok_or_else(|| VrnError::Malformed { line: lineno, reason: "unclosed `[`".into() })?;
            let inner = tokenize(&rest[open + 1..open + close]);
            if mention.is_some() {
                return Err(VrnError::Malformed { line: lineno, reason: "more than one bracketed entity".into() });
            }
            mention = Some((tokens.len(), inner.len()));
            tokens.extend(inner);
            rest = &rest[open + close + 1..];
        }
        tokens.extend(tokenize(rest));
        let topic = match mention {
            Some((s, l)) => {
                let name = tokens[s..s + l].join(" ");
                Some(g.entity_by_name(&name).ok_or(VrnError::UnknownEntityName(name))?)
            }
            None => None,
        };
        let mut answer_ids = answers
            .split('|')
            .filter(|a| !a.is_empty())
            .map(|a| g.entity_by_name(a).ok_or_else(|| VrnError::UnknownEntityName(a.to_owned())))
            .collect::<Result<Vec<_>>>()?;
        if answer_ids.is_empty() {
            return Err(VrnError::Malformed { line: lineno, reason: "no answers".into() });
        }
        answer_ids.sort_unstable();
        answer_ids.dedup();
        let type_id = match &type_ids {
            Some(t) => t
                .get(items.len())
                .cloned()
                .ok_or_else(|| VrnError::Malformed { line: lineno, reason: "types file is shorter than questions".into() })?,
            None => String::new(),
        };
        items.push(QAItem { tokens, mention, source: topic, topic, answers: answer_ids, hops, type_id });
    }
    Ok(items)
}
