//! On-disk index formats. Every artifact is TSV with external string
//! ids, so index directories are self-contained and diffable:
//!
//! * neighbor index: `seed \t neighbor \t score \t rank`;
//! * complementary index: `seed \t neighbor \t score \t s1 \t s2 \t rank`;
//! * category report: `category_i \t category_j \t theta \t selected`;
//! * cluster dump: `item \t cluster_label` (labels are item ids).
//!
//! Scores print with Rust's shortest round-trip float formatting, so
//! equal runs produce byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::labelprop::ClusterAssignment;
use crate::model::{IdDictionary, ItemId, NeighborList};
use crate::surprise::{CategoryRelevance, SurpriseList};
use crate::{Error, Result};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn item_name(items: &IdDictionary, id: ItemId) -> String {
    items
        .name(id.0)
        .map_or_else(|| id.to_string(), str::to_string)
}

/// Writes a neighbor index. Seeds with empty lists are omitted.
pub fn write_neighbor_tsv(
    path: &Path,
    lists: &[NeighborList],
    items: &IdDictionary,
) -> Result<()> {
    let mut out = create(path)?;
    for list in lists {
        for (rank0, entry) in list.entries.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                item_name(items, list.seed),
                item_name(items, entry.item),
                entry.score,
                rank0 + 1
            )
            .map_err(io_err(path))?;
        }
    }
    out.flush().map_err(io_err(path))
}

/// Writes a complementary index with its blend components.
pub fn write_surprise_tsv(
    path: &Path,
    lists: &[SurpriseList],
    items: &IdDictionary,
) -> Result<()> {
    let mut out = create(path)?;
    for list in lists {
        for (rank0, entry) in list.entries.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                item_name(items, list.seed),
                item_name(items, entry.item),
                entry.score,
                entry.s1,
                entry.s2,
                rank0 + 1
            )
            .map_err(io_err(path))?;
        }
    }
    out.flush().map_err(io_err(path))
}

/// Writes the category relevance report.
pub fn write_category_report(
    path: &Path,
    relevance: &CategoryRelevance,
    categories: &IdDictionary,
) -> Result<()> {
    let mut out = create(path)?;
    let name = |c: crate::model::CategoryId| {
        categories
            .name(c.0)
            .map_or_else(|| c.to_string(), str::to_string)
    };
    for (i, j, theta, selected) in relevance.report_rows() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            name(i),
            name(j),
            theta,
            u8::from(selected)
        )
        .map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// Writes the item -> cluster-label dump. Labels resolve through the
/// same item dictionary, since labels are item ids.
pub fn write_cluster_tsv(
    path: &Path,
    assignment: &ClusterAssignment,
    items: &IdDictionary,
) -> Result<()> {
    let mut out = create(path)?;
    for (item, label) in assignment.iter() {
        writeln!(
            out,
            "{}\t{}",
            item_name(items, item),
            item_name(items, ItemId(label.0)),
        )
        .map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// A neighbor index read back with external ids, seeds mapped to their
/// neighbors in rank order. Accepts both the 4-column and the 6-column
/// layout.
pub fn read_neighbor_tsv(path: &Path) -> Result<BTreeMap<String, Vec<(String, f64)>>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut index: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let malformed = |reason: &str| Error::Malformed {
            path: path.display().to_string(),
            line: idx + 1,
            reason: reason.to_string(),
        };
        if fields.len() != 4 && fields.len() != 6 {
            return Err(malformed("expected 4 or 6 tab-separated columns"));
        }
        let score: f64 = fields[2]
            .parse()
            .map_err(|_| malformed("invalid score"))?;
        let rank: usize = fields[fields.len() - 1]
            .parse()
            .map_err(|_| malformed("invalid rank"))?;
        let neighbors = index.entry(fields[0].to_string()).or_default();
        if rank != neighbors.len() + 1 {
            return Err(malformed("ranks must ascend from 1 per seed"));
        }
        neighbors.push((fields[1].to_string(), score));
    }
    Ok(index)
}

/// Reads a cluster dump back with external ids.
pub fn read_cluster_tsv(path: &Path) -> Result<Vec<(String, String)>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut pairs = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Malformed {
                path: path.display().to_string(),
                line: idx + 1,
                reason: "expected 'item\\tcluster_label'".to_string(),
            });
        }
        pairs.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(pairs)
}

/// Renders a neighbor index to its on-disk bytes without touching the
/// filesystem (used for byte-identity checks).
pub fn render_neighbor_tsv(lists: &[NeighborList], items: &IdDictionary) -> String {
    let mut out = String::new();
    for list in lists {
        for (rank0, entry) in list.entries.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                item_name(items, list.seed),
                item_name(items, entry.item),
                entry.score,
                rank0 + 1
            ));
        }
    }
    out
}

/// Renders a complementary index to its on-disk bytes.
pub fn render_surprise_tsv(lists: &[SurpriseList], items: &IdDictionary) -> String {
    let mut out = String::new();
    for list in lists {
        for (rank0, entry) in list.entries.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                item_name(items, list.seed),
                item_name(items, entry.item),
                entry.score,
                entry.s1,
                entry.s2,
                rank0 + 1
            ));
        }
    }
    out
}
