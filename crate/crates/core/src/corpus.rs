//! Editing-task corpus: loading, validation, and visibility-variant rendering.
//!
//! A corpus is a directory of `*.task.json` bundles. Each bundle describes one
//! editing problem: the instruction, the original code, the test suite, and
//! optionally a highlighted region and a cursor position. Rendering a task
//! under a visibility variant inserts literal markers into the code; stripping
//! the markers reproduces the original byte-for-byte.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opens a highlighted region in rendered code.
pub const HIGHLIGHT_BEGIN: &str = "<<HL>>";
/// Closes a highlighted region in rendered code.
pub const HIGHLIGHT_END: &str = "<</HL>>";
/// Marks the cursor position inside a highlighted region.
pub const CURSOR_MARKER: &str = "<<CUR>>";

/// A half-open character-offset range `[start, end)` into the original code.
///
/// Offsets count Unicode scalar values, not bytes, so a span survives any
/// byte-level encoding concerns and round-trips exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// One editing problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditTask {
    pub id: String,
    pub instruction: String,
    pub instruction_language: String,
    pub code_language: String,
    pub original_code: String,
    pub test_suite: String,
    /// Shell-free argv template; `{code_file}` and `{test_file}` are
    /// substituted with sandbox paths at run time.
    pub test_command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlight: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cursor: Option<usize>,
}

/// How much spatial context the pipeline sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityVariant {
    CodeOnly,
    Highlight,
    HighlightCursor,
}

impl VisibilityVariant {
    pub const ALL: [VisibilityVariant; 3] = [
        VisibilityVariant::CodeOnly,
        VisibilityVariant::Highlight,
        VisibilityVariant::HighlightCursor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VisibilityVariant::CodeOnly => "code_only",
            VisibilityVariant::Highlight => "highlight",
            VisibilityVariant::HighlightCursor => "highlight_cursor",
        }
    }

    /// Human-facing label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            VisibilityVariant::CodeOnly => "CODE ONLY",
            VisibilityVariant::Highlight => "HIGHLIGHT",
            VisibilityVariant::HighlightCursor => "HIGHLIGHT + CURSOR",
        }
    }

    pub fn parse(s: &str) -> Option<VisibilityVariant> {
        match s {
            "code_only" => Some(VisibilityVariant::CodeOnly),
            "highlight" => Some(VisibilityVariant::Highlight),
            "highlight_cursor" => Some(VisibilityVariant::HighlightCursor),
            _ => None,
        }
    }
}

impl fmt::Display for VisibilityVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Marked-up source text produced by [`render_visible_code`].
#[derive(Debug, Clone, PartialEq)]
pub struct VisibleCode {
    pub text: String,
    pub variant: VisibilityVariant,
}

impl VisibleCode {
    /// The region a plan is allowed to reference, with markers removed:
    /// the highlighted span under `Highlight`/`HighlightCursor`, the whole
    /// file under `CodeOnly`.
    pub fn editable_region(&self) -> String {
        match self.variant {
            VisibilityVariant::CodeOnly => strip_markers(&self.text),
            VisibilityVariant::Highlight | VisibilityVariant::HighlightCursor => {
                let begin = self.text.find(HIGHLIGHT_BEGIN);
                let end = self.text.find(HIGHLIGHT_END);
                match (begin, end) {
                    (Some(b), Some(e)) if b + HIGHLIGHT_BEGIN.len() <= e => {
                        strip_markers(&self.text[b + HIGHLIGHT_BEGIN.len()..e])
                    }
                    _ => strip_markers(&self.text),
                }
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed task bundle {path}: {source}")]
    Malformed {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("task {task_id}: field {field}: {message}")]
    Invariant {
        task_id: String,
        field: &'static str,
        message: String,
    },
    #[error("task {task_id}: duplicate id")]
    DuplicateId { task_id: String },
    #[error("task {task_id}: variant {variant} requires {missing}")]
    NotRenderable {
        task_id: String,
        variant: VisibilityVariant,
        missing: &'static str,
    },
}

impl EditTask {
    /// Checks every task invariant, naming the offending field on failure.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |field: &'static str, message: String| CorpusError::Invariant {
            task_id: self.id.clone(),
            field,
            message,
        };
        if self.id.is_empty() {
            return Err(fail("id", "must be non-empty".into()));
        }
        if self.original_code.is_empty() {
            return Err(fail("original_code", "must be non-empty".into()));
        }
        if self.test_suite.is_empty() {
            return Err(fail("test_suite", "must be non-empty".into()));
        }
        let len = self.original_code.chars().count();
        if let Some(span) = self.highlight {
            if span.start > span.end {
                return Err(fail(
                    "highlight",
                    format!("start {} exceeds end {}", span.start, span.end),
                ));
            }
            if span.end > len {
                return Err(fail(
                    "highlight",
                    format!("end {} exceeds code length {}", span.end, len),
                ));
            }
        }
        if let Some(cursor) = self.cursor {
            if cursor > len {
                return Err(fail(
                    "cursor",
                    format!("offset {} exceeds code length {}", cursor, len),
                ));
            }
            if let Some(span) = self.highlight {
                if cursor < span.start || cursor > span.end {
                    return Err(fail(
                        "cursor",
                        format!(
                            "offset {} outside highlight span ({}, {})",
                            cursor, span.start, span.end
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Whether the task carries the span/offset the variant needs.
    pub fn is_renderable(&self, variant: VisibilityVariant) -> bool {
        match variant {
            VisibilityVariant::CodeOnly => true,
            VisibilityVariant::Highlight => self.highlight.is_some(),
            VisibilityVariant::HighlightCursor => self.highlight.is_some() && self.cursor.is_some(),
        }
    }
}

/// Loads a corpus from a directory of `*.task.json` bundles or a single
/// bundle file. Tasks are returned sorted by id; any invariant violation
/// rejects the load with a diagnostic naming the task and field.
pub fn load_corpus(path: &Path) -> Result<Vec<EditTask>, CorpusError> {
    let meta = fs::metadata(path).map_err(|source| CorpusError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;

    let mut files = Vec::new();
    if meta.is_dir() {
        let entries = fs::read_dir(path).map_err(|source| CorpusError::Unreadable {
            path: path.display().to_string(),
            source,
        })?;
        for entry in entries {
            let entry = entry.map_err(|source| CorpusError::Unreadable {
                path: path.display().to_string(),
                source,
            })?;
            let p = entry.path();
            if p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".task.json"))
            {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }

    let mut tasks = Vec::with_capacity(files.len());
    for file in &files {
        let text = fs::read_to_string(file).map_err(|source| CorpusError::Unreadable {
            path: file.display().to_string(),
            source,
        })?;
        let task: EditTask =
            serde_json::from_str(&text).map_err(|source| CorpusError::Malformed {
                path: file.display().to_string(),
                source,
            })?;
        task.validate()?;
        tasks.push(task);
    }

    tasks.sort_by(|a, b| a.id.cmp(&b.id));
    for pair in tasks.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(CorpusError::DuplicateId {
                task_id: pair[0].id.clone(),
            });
        }
    }
    Ok(tasks)
}

/// Renders the task's code under a visibility variant by inserting literal
/// markers. Stripping the markers reproduces `original_code` byte-for-byte.
pub fn render_visible_code(
    task: &EditTask,
    variant: VisibilityVariant,
) -> Result<VisibleCode, CorpusError> {
    let code = &task.original_code;
    let not_renderable = |missing| CorpusError::NotRenderable {
        task_id: task.id.clone(),
        variant,
        missing,
    };
    let text = match variant {
        VisibilityVariant::CodeOnly => code.clone(),
        VisibilityVariant::Highlight => {
            let span = task.highlight.ok_or_else(|| not_renderable("highlight"))?;
            let start = char_to_byte(code, span.start);
            let end = char_to_byte(code, span.end);
            let mut text = String::with_capacity(code.len() + 16);
            text.push_str(&code[..start]);
            text.push_str(HIGHLIGHT_BEGIN);
            text.push_str(&code[start..end]);
            text.push_str(HIGHLIGHT_END);
            text.push_str(&code[end..]);
            text
        }
        VisibilityVariant::HighlightCursor => {
            let span = task.highlight.ok_or_else(|| not_renderable("highlight"))?;
            let cursor = task.cursor.ok_or_else(|| not_renderable("cursor"))?;
            let start = char_to_byte(code, span.start);
            let end = char_to_byte(code, span.end);
            let cur = char_to_byte(code, cursor);
            let mut text = String::with_capacity(code.len() + 24);
            text.push_str(&code[..start]);
            text.push_str(HIGHLIGHT_BEGIN);
            text.push_str(&code[start..cur]);
            text.push_str(CURSOR_MARKER);
            text.push_str(&code[cur..end]);
            text.push_str(HIGHLIGHT_END);
            text.push_str(&code[end..]);
            text
        }
    };
    Ok(VisibleCode { text, variant })
}

/// Removes every rendering marker, recovering the original code.
pub fn strip_markers(text: &str) -> String {
    text.replace(HIGHLIGHT_BEGIN, "")
        .replace(HIGHLIGHT_END, "")
        .replace(CURSOR_MARKER, "")
}

fn char_to_byte(s: &str, char_offset: usize) -> usize {
    s.char_indices()
        .nth(char_offset)
        .map(|(b, _)| b)
        .unwrap_or(s.len())
}
