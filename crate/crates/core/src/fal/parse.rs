//! Stage 1: log parsing. Extracts one [`ParsedFailure`] per failed or
//! errored test from raw runner output.
//!
//! The primary dialect is pytest's plain-text report (verbose progress
//! lines, FAILURES/ERRORS traceback sections, and the short test summary).
//! A minimal generic dialect (`FAIL <name>: <message>`) covers non-Python
//! runners. Anything else degrades to a single `<unparsed>` entry rather
//! than an error: parsing is total.

use super::ParsedFailure;

const EXCERPT_LINES: usize = 12;

pub fn parse_log(raw_log: &str) -> Vec<ParsedFailure> {
    let lines: Vec<&str> = raw_log.lines().collect();
    let mut failures: Vec<ParsedFailure> = Vec::new();

    parse_traceback_sections(&lines, &mut failures);
    parse_short_summary(&lines, &mut failures);
    parse_generic_dialect(&lines, &mut failures);

    if failures.is_empty() && !raw_log.trim().is_empty() && !has_pass_evidence(raw_log) {
        failures.push(ParsedFailure {
            test_name: "<unparsed>".to_string(),
            exception_type: String::new(),
            expected: None,
            actual: None,
            location: None,
            excerpt: tail_excerpt(&lines, lines.len()),
        });
    }
    failures
}

fn has_pass_evidence(log: &str) -> bool {
    log.contains(" passed") || log.contains("PASSED") || log.lines().any(|l| l.trim() == "OK")
}

/// Walks the `FAILURES` and `ERRORS` sections, one block per `___ name ___`
/// sub-header.
fn parse_traceback_sections(lines: &[&str], out: &mut Vec<ParsedFailure>) {
    #[derive(PartialEq)]
    enum Section {
        None,
        Failures,
        Errors,
    }
    let mut section = Section::None;
    let mut block_name: Option<String> = None;
    let mut block_start = 0;

    let flush = |name: &Option<String>, start: usize, end: usize, out: &mut Vec<ParsedFailure>| {
        if let Some(name) = name {
            if let Some(failure) = parse_block(name, &lines[start..end]) {
                merge(out, failure);
            }
        }
    };

    for (i, line) in lines.iter().enumerate() {
        if let Some(banner) = banner_title(line) {
            flush(&block_name, block_start, i, out);
            block_name = None;
            section = match banner.as_str() {
                "FAILURES" => Section::Failures,
                "ERRORS" => Section::Errors,
                _ => Section::None,
            };
            continue;
        }
        if section == Section::None {
            continue;
        }
        if let Some(header) = block_title(line) {
            flush(&block_name, block_start, i, out);
            block_name = Some(normalize_block_name(&header, section == Section::Errors));
            block_start = i + 1;
        }
    }
    flush(&block_name, block_start, lines.len(), out);
}

/// `=== TITLE ===` banner lines (allowing trailing counts like
/// `1 failed, 1 passed in 0.87s`).
fn banner_title(line: &str) -> Option<String> {
    let trimmed = line.trim();
    if !trimmed.starts_with("==") || !trimmed.ends_with("==") {
        return None;
    }
    let inner = trimmed.trim_matches('=').trim();
    if inner.is_empty() {
        None
    } else {
        Some(inner.to_string())
    }
}

/// `___ test_name ___` sub-header lines inside FAILURES/ERRORS sections.
fn block_title(line: &str) -> Option<String> {
    let trimmed = line.trim();
    if !trimmed.starts_with("__") || !trimmed.ends_with("__") {
        return None;
    }
    let inner = trimmed.trim_matches('_').trim();
    if inner.is_empty() {
        None
    } else {
        Some(inner.to_string())
    }
}

fn normalize_block_name(header: &str, in_errors: bool) -> String {
    if in_errors {
        if header.starts_with("ERROR collecting ") {
            return "<collection>".to_string();
        }
        if let Some(rest) = header.strip_prefix("ERROR at setup of ") {
            return rest.to_string();
        }
        if let Some(rest) = header.strip_prefix("ERROR ") {
            return rest.to_string();
        }
    }
    header.to_string()
}

fn parse_block(name: &str, block: &[&str]) -> Option<ParsedFailure> {
    let mut exception_type = String::new();
    let mut expected = None;
    let mut actual = None;
    let mut location = None;

    for line in block {
        if let Some(e_line) = strip_e_prefix(line) {
            if expected.is_none() {
                if let Some((a, e)) = parse_assert_comparison(e_line) {
                    actual = Some(a);
                    expected = Some(e);
                    if exception_type.is_empty() {
                        exception_type = "AssertionError".to_string();
                    }
                }
            }
            if let Some(name) = exception_name(e_line) {
                exception_type = name;
            }
        } else if let Some((file, lineno, exc)) = parse_location_trailer(line) {
            location = Some((file, lineno));
            // The trailer names the bare exception class; trust it over
            // anything inferred from E-lines.
            exception_type = exc;
        }
    }

    if exception_type.is_empty() && expected.is_none() && block.iter().all(|l| l.trim().is_empty())
    {
        return None;
    }
    Some(ParsedFailure {
        test_name: name.to_string(),
        exception_type,
        expected,
        actual,
        location,
        excerpt: tail_excerpt(block, EXCERPT_LINES),
    })
}

/// pytest prefixes traceback detail lines with `E`.
fn strip_e_prefix(line: &str) -> Option<&str> {
    let rest = line.strip_prefix('E')?;
    if rest.is_empty() {
        return Some("");
    }
    if rest.starts_with(' ') || rest.starts_with('\t') {
        Some(rest.trim_start())
    } else {
        None
    }
}

/// `assert <actual> == <expected>`, optionally prefixed `AssertionError: `.
fn parse_assert_comparison(text: &str) -> Option<(String, String)> {
    let text = text.strip_prefix("AssertionError:").unwrap_or(text).trim();
    let rest = text.strip_prefix("assert ")?;
    let (lhs, rhs) = rest.split_once(" == ")?;
    let lhs = lhs.trim();
    let rhs = rhs.trim();
    if lhs.is_empty() || rhs.is_empty() {
        return None;
    }
    Some((lhs.to_string(), rhs.to_string()))
}

/// `SomeError: message` at the start of a detail line. Dotted paths like
/// `mod.Cls.<locals>.FrobnicationError: msg` reduce to the bare class name.
fn exception_name(text: &str) -> Option<String> {
    let head = text.split(':').next()?;
    if head.is_empty() || head.len() == text.len() {
        return None;
    }
    if !head
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '<' || c == '>')
    {
        return None;
    }
    let bare = head.rsplit('.').next().unwrap_or(head);
    let mut chars = bare.chars();
    match chars.next() {
        Some(first) if first.is_ascii_uppercase() => {}
        _ => return None,
    }
    if !bare.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return None;
    }
    Some(bare.to_string())
}

/// `file.py:12: AssertionError` trailer lines.
fn parse_location_trailer(line: &str) -> Option<(String, u32, String)> {
    let line = line.trim();
    let mut parts = line.splitn(3, ':');
    let file = parts.next()?;
    let lineno = parts.next()?.trim().parse::<u32>().ok()?;
    let exc = parts.next()?.trim();
    if file.is_empty() || file.contains(' ') {
        return None;
    }
    if exc.is_empty() || !exc.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return None;
    }
    if !exc.chars().next().is_some_and(|c| c.is_ascii_uppercase()) {
        return None;
    }
    Some((file.to_string(), lineno, exc.to_string()))
}

/// Short-summary lines: `FAILED file::test - message` / `ERROR file - msg`.
fn parse_short_summary(lines: &[&str], out: &mut Vec<ParsedFailure>) {
    for line in lines {
        let line = line.trim_end();
        let (status, rest) = if let Some(rest) = line.strip_prefix("FAILED ") {
            ("FAILED", rest)
        } else if let Some(rest) = line.strip_prefix("ERROR ") {
            ("ERROR", rest)
        } else {
            continue;
        };
        let (id, message) = match rest.split_once(" - ") {
            Some((id, msg)) => (id.trim(), Some(msg.trim())),
            None => (rest.trim(), None),
        };
        if id.is_empty() || id.contains(' ') {
            continue;
        }
        let test_name = match id.split_once("::") {
            Some((_, test)) => test.to_string(),
            None if status == "ERROR" => "<collection>".to_string(),
            None => id.to_string(),
        };

        let mut exception_type = String::new();
        let mut expected = None;
        let mut actual = None;
        if let Some(msg) = message {
            let msg = msg.trim_end_matches("...").trim_end();
            if let Some(name) = exception_name(msg) {
                exception_type = name;
            }
            if let Some((a, e)) = parse_assert_comparison(msg) {
                actual = Some(a);
                expected = Some(e);
                if exception_type.is_empty() {
                    exception_type = "AssertionError".to_string();
                }
            }
        }
        merge(
            out,
            ParsedFailure {
                test_name,
                exception_type,
                expected,
                actual,
                location: None,
                excerpt: line.to_string(),
            },
        );
    }
}

/// Minimal generic dialect: `FAIL <name>: <message>`.
fn parse_generic_dialect(lines: &[&str], out: &mut Vec<ParsedFailure>) {
    for line in lines {
        let Some(rest) = line.strip_prefix("FAIL ") else {
            continue;
        };
        let Some((name, message)) = rest.split_once(':') else {
            continue;
        };
        let name = name.trim();
        if name.is_empty() || name.contains(' ') {
            continue;
        }
        let message = message.trim();
        merge(
            out,
            ParsedFailure {
                test_name: name.to_string(),
                exception_type: exception_name(message).unwrap_or_default(),
                expected: None,
                actual: None,
                location: None,
                excerpt: line.trim_end().to_string(),
            },
        );
    }
}

/// Keeps log order and fills gaps: the first sighting of a test wins its
/// position; later sightings only supply missing fields.
fn merge(out: &mut Vec<ParsedFailure>, incoming: ParsedFailure) {
    if let Some(existing) = out.iter_mut().find(|f| f.test_name == incoming.test_name) {
        if existing.exception_type.is_empty() {
            existing.exception_type = incoming.exception_type;
        }
        if existing.expected.is_none() && incoming.expected.is_some() {
            existing.expected = incoming.expected;
            existing.actual = incoming.actual;
        }
        if existing.location.is_none() {
            existing.location = incoming.location;
        }
        return;
    }
    out.push(incoming);
}

fn tail_excerpt(lines: &[&str], max: usize) -> String {
    let mut kept: Vec<&str> = lines
        .iter()
        .rev()
        .skip_while(|l| l.trim().is_empty())
        .take(max)
        .copied()
        .collect();
    kept.reverse();
    kept.join("\n")
}
