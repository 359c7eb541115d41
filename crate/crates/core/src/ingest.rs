//! Parsing of behavior-log and catalog files into events and a catalog,
//! with validation, rejection accounting and deterministic id assignment.
//!
//! Wire formats (TSV, UTF-8, one record per line):
//!
//! * behavior log: `user \t item \t action \t epoch_seconds` with an
//!   optional fifth `category` column on purchase rows;
//! * catalog: `item \t category`.
//!
//! Timestamps must be non-negative integer epoch seconds; fractional
//! values are rejected so time differences have one fixed unit.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::model::{Action, BehaviorEvent, Catalog, CategoryId, IdDictionary, ItemId, UserId};
use crate::{Error, Result};

/// One id space per identifier kind, shared across every file of a run
/// so ids stay consistent between logs, catalogs and index dumps.
#[derive(Default, Clone, Debug)]
pub struct Dictionaries {
    pub users: IdDictionary,
    pub items: IdDictionary,
    pub categories: IdDictionary,
}

impl Dictionaries {
    pub fn new() -> Self {
        Self::default()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ParseMode {
    /// Malformed lines are skipped and counted.
    Lenient,
    /// The first malformed line aborts the parse.
    Strict,
}

/// Per-file accounting: `accepted + rejected == total` always holds, and
/// the first ten rejections are kept with their line numbers.
#[derive(Clone, Debug)]
pub struct ParseReport {
    pub path: String,
    pub total: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub sample_rejections: Vec<(usize, String)>,
}

const REJECTION_SAMPLE_LIMIT: usize = 10;

impl ParseReport {
    fn new(path: &Path) -> Self {
        Self {
            path: path.display().to_string(),
            total: 0,
            accepted: 0,
            rejected: 0,
            sample_rejections: Vec::new(),
        }
    }

    fn reject(&mut self, line: usize, reason: String) {
        self.rejected += 1;
        if self.sample_rejections.len() < REJECTION_SAMPLE_LIMIT {
            self.sample_rejections.push((line, reason));
        }
    }
}

impl fmt::Display for ParseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} lines, {} accepted, {} rejected",
            self.path, self.total, self.accepted, self.rejected
        )?;
        for (line, reason) in &self.sample_rejections {
            write!(f, "\n  line {line}: {reason}")?;
        }
        Ok(())
    }
}

/// Accumulates item-to-category assignments from catalog files and from
/// inline category columns, tracking the first-seen line of each entry so
/// conflicts can be reported precisely.
#[derive(Default, Clone, Debug)]
pub struct CatalogBuilder {
    entries: HashMap<ItemId, (CategoryId, usize)>,
}

impl CatalogBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn add(
        &mut self,
        item: ItemId,
        category: CategoryId,
        line: usize,
        dicts: &Dictionaries,
    ) -> Result<()> {
        match self.entries.get(&item) {
            None => {
                self.entries.insert(item, (category, line));
                Ok(())
            }
            Some(&(existing, _)) if existing == category => Ok(()),
            Some(&(existing, first_line)) => Err(Error::CatalogConflict {
                item: dicts.items.name(item.0).unwrap_or("?").to_string(),
                first_category: dicts.categories.name(existing.0).unwrap_or("?").to_string(),
                first_line,
                second_category: dicts.categories.name(category.0).unwrap_or("?").to_string(),
                second_line: line,
            }),
        }
    }

    pub fn finish(self) -> Catalog {
        let mut catalog = Catalog::new();
        for (item, (category, _)) in self.entries {
            catalog.insert(item, category);
        }
        catalog
    }
}

fn parse_timestamp(field: &str) -> std::result::Result<u64, String> {
    if field.is_empty() {
        return Err("empty timestamp".to_string());
    }
    if field.contains('.') {
        return Err(format!(
            "invalid timestamp '{field}': fractional seconds are not allowed"
        ));
    }
    field
        .parse::<u64>()
        .map_err(|_| format!("invalid timestamp '{field}': expected a non-negative integer"))
}

fn parse_action(field: &str) -> std::result::Result<Action, String> {
    if field.eq_ignore_ascii_case("click") {
        Ok(Action::Click)
    } else if field.eq_ignore_ascii_case("purchase") {
        Ok(Action::Purchase)
    } else {
        Err(format!("unknown action '{field}'"))
    }
}

fn parse_log_line(
    line: &str,
    dicts: &mut Dictionaries,
) -> std::result::Result<(BehaviorEvent, Option<CategoryId>), String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 && fields.len() != 5 {
        return Err(format!(
            "expected 4 or 5 tab-separated columns, found {}",
            fields.len()
        ));
    }
    if fields[0].is_empty() || fields[1].is_empty() {
        return Err("empty user or item field".to_string());
    }
    let action = parse_action(fields[2])?;
    let timestamp = parse_timestamp(fields[3])?;
    let category = if fields.len() == 5 {
        if action != Action::Purchase {
            return Err("category column is only valid on purchase rows".to_string());
        }
        if fields[4].is_empty() {
            return Err("empty category field".to_string());
        }
        Some(CategoryId(dicts.categories.intern(fields[4])))
    } else {
        None
    };
    let event = BehaviorEvent {
        user: UserId(dicts.users.intern(fields[0])),
        item: ItemId(dicts.items.intern(fields[1])),
        action,
        timestamp,
    };
    Ok((event, category))
}

/// Parses a behavior log. Inline category columns (purchase rows only)
/// feed `catalog` when one is supplied.
pub fn parse_log(
    path: &Path,
    mode: ParseMode,
    dicts: &mut Dictionaries,
    mut catalog: Option<&mut CatalogBuilder>,
) -> Result<(Vec<BehaviorEvent>, ParseReport)> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut events = Vec::new();
    let mut report = ParseReport::new(path);
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        report.total += 1;
        match parse_log_line(&line, dicts) {
            Ok((event, inline_category)) => {
                if let (Some(category), Some(builder)) = (inline_category, catalog.as_deref_mut())
                {
                    builder.add(event.item, category, line_no, dicts)?;
                }
                report.accepted += 1;
                events.push(event);
            }
            Err(reason) => {
                if mode == ParseMode::Strict {
                    return Err(Error::Malformed {
                        path: path.display().to_string(),
                        line: line_no,
                        reason,
                    });
                }
                report.reject(line_no, reason);
            }
        }
    }
    Ok((events, report))
}

/// Parses an `item \t category` catalog file into `builder`. Duplicate
/// rows must agree on the category; conflicts are fatal with both line
/// numbers reported.
pub fn parse_catalog(
    path: &Path,
    dicts: &mut Dictionaries,
    builder: &mut CatalogBuilder,
) -> Result<usize> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut rows = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Malformed {
                path: path.display().to_string(),
                line: line_no,
                reason: "expected 'item\\tcategory'".to_string(),
            });
        }
        let item = ItemId(dicts.items.intern(fields[0]));
        let category = CategoryId(dicts.categories.intern(fields[1]));
        builder.add(item, category, line_no, dicts)?;
        rows += 1;
    }
    Ok(rows)
}

/// Writes events back out in the behavior-log format, resolving internal
/// ids through `dicts`. Re-parsing the output yields the same events.
pub fn write_events<W: Write>(
    out: &mut W,
    events: &[BehaviorEvent],
    dicts: &Dictionaries,
) -> std::io::Result<()> {
    for ev in events {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            dicts.users.name(ev.user.0).unwrap_or("?"),
            dicts.items.name(ev.item.0).unwrap_or("?"),
            ev.action,
            ev.timestamp
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        use std::io::Write as _;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_well_formed_lines() {
        let f = write_temp("A\th\tclick\t100\nB\th\tPURCHASE\t200\n");
        let mut dicts = Dictionaries::new();
        let (events, report) = parse_log(f.path(), ParseMode::Lenient, &mut dicts, None).unwrap();
        assert_eq!(report.total, 2);
        assert_eq!(report.accepted, 2);
        assert_eq!(report.rejected, 0);
        assert_eq!(
            events[0],
            BehaviorEvent {
                user: UserId(0),
                item: ItemId(0),
                action: Action::Click,
                timestamp: 100,
            }
        );
        assert_eq!(events[1].action, Action::Purchase);
    }

    #[test]
    fn unknown_action_is_rejected() {
        let f = write_temp("A\th\tbuy\t100\n");
        let mut dicts = Dictionaries::new();
        let (events, report) = parse_log(f.path(), ParseMode::Lenient, &mut dicts, None).unwrap();
        assert!(events.is_empty());
        assert_eq!(report.rejected, 1);
        assert!(report.sample_rejections[0].1.contains("unknown action"));
    }

    #[test]
    fn fractional_timestamp_is_rejected() {
        let f = write_temp("A\th\tclick\t100.5\n");
        let mut dicts = Dictionaries::new();
        let (_, report) = parse_log(f.path(), ParseMode::Lenient, &mut dicts, None).unwrap();
        assert_eq!(report.rejected, 1);
        assert!(report.sample_rejections[0].1.contains("fractional"));
    }

    #[test]
    fn strict_mode_fails_on_first_bad_line() {
        let f = write_temp("A\th\tclick\t100\nA\th\tbuy\t100\n");
        let mut dicts = Dictionaries::new();
        let err = parse_log(f.path(), ParseMode::Strict, &mut dicts, None).unwrap_err();
        match err {
            Error::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn accounting_always_balances() {
        let f = write_temp("A\th\tclick\t100\nnot a record\nB\tk\tclick\t1\n\n");
        let mut dicts = Dictionaries::new();
        let (_, report) = parse_log(f.path(), ParseMode::Lenient, &mut dicts, None).unwrap();
        assert_eq!(report.total, 4);
        assert_eq!(report.accepted + report.rejected, report.total);
    }

    #[test]
    fn inline_category_only_on_purchases() {
        let f = write_temp("A\th\tpurchase\t10\tTShirt\nA\tk\tclick\t11\tTShirt\n");
        let mut dicts = Dictionaries::new();
        let mut builder = CatalogBuilder::new();
        let (events, report) =
            parse_log(f.path(), ParseMode::Lenient, &mut dicts, Some(&mut builder)).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(report.rejected, 1);
        let catalog = builder.finish();
        assert_eq!(catalog.category_of(ItemId(0)), Some(CategoryId(0)));
    }

    #[test]
    fn catalog_parses_and_detects_conflicts() {
        let f = write_temp("h\tTShirtMale\nk\tJeans\nh\tTShirtMale\n");
        let mut dicts = Dictionaries::new();
        let mut builder = CatalogBuilder::new();
        assert_eq!(parse_catalog(f.path(), &mut dicts, &mut builder).unwrap(), 3);
        let catalog = builder.finish();
        assert_eq!(catalog.len(), 2);

        let f2 = write_temp("h\tA\nh\tB\n");
        let mut dicts2 = Dictionaries::new();
        let mut builder2 = CatalogBuilder::new();
        let err = parse_catalog(f2.path(), &mut dicts2, &mut builder2).unwrap_err();
        match err {
            Error::CatalogConflict {
                item,
                first_line,
                second_line,
                ..
            } => {
                assert_eq!(item, "h");
                assert_eq!(first_line, 1);
                assert_eq!(second_line, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn events_round_trip_through_serialization() {
        let f = write_temp("A\th\tclick\t100\nB\tk\tpurchase\t7\nA\tk\tclick\t3\n");
        let mut dicts = Dictionaries::new();
        let (events, _) = parse_log(f.path(), ParseMode::Lenient, &mut dicts, None).unwrap();

        let mut buf = Vec::new();
        write_events(&mut buf, &events, &dicts).unwrap();
        let f2 = write_temp(std::str::from_utf8(&buf).unwrap());
        let mut dicts2 = Dictionaries::new();
        let (reparsed, _) = parse_log(f2.path(), ParseMode::Lenient, &mut dicts2, None).unwrap();
        assert_eq!(events, reparsed);
    }

    #[test]
    fn missing_file_reports_path() {
        let mut dicts = Dictionaries::new();
        let err = parse_log(
            Path::new("/nonexistent/clicks.tsv"),
            ParseMode::Lenient,
            &mut dicts,
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/clicks.tsv"));
    }
}
