//! Senate returns ingestion: parse statewide returns, aggregate votes per
//! election cycle into DEMOCRAT / REPUBLICAN / OTHER proportions, and hand
//! the resulting matrix to the estimators as a weighted dataset.
//!
//! Column names default to the MIT Election Lab senate file
//! (`year, state_po, party_simplified, candidatevotes, totalvotes`) and can be
//! overridden with a `key=value` config file.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::expfam::WeightedDataset;

/// Proportion substituted for a party that received no votes in a cycle.
pub const ZERO_PROPORTION_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaConfig {
    pub year: String,
    pub state: String,
    pub party: String,
    pub candidate_votes: String,
    pub total_votes: String,
    /// Rows are kept only when this column (if present) equals `stage_value`.
    pub stage: Option<String>,
    pub stage_value: String,
    pub first_year: i32,
    pub last_year: i32,
    /// `None` detects comma or tab from the header line.
    pub delimiter: Option<u8>,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            year: "year".into(),
            state: "state_po".into(),
            party: "party_simplified".into(),
            candidate_votes: "candidatevotes".into(),
            total_votes: "totalvotes".into(),
            stage: Some("stage".into()),
            stage_value: "gen".into(),
            first_year: 1976,
            last_year: 2020,
            delimiter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Party {
    Dem,
    Rep,
    Other,
}

/// Labels counted as DEM and REP; everything else, blanks included, is OTHER.
#[derive(Debug, Clone, PartialEq)]
pub struct PartyMapping {
    pub dem: Vec<String>,
    pub rep: Vec<String>,
}

impl Default for PartyMapping {
    fn default() -> Self {
        PartyMapping {
            dem: vec!["DEMOCRAT".into()],
            rep: vec!["REPUBLICAN".into()],
        }
    }
}

impl PartyMapping {
    pub fn classify(&self, label: &str) -> Party {
        let label = label.trim();
        if self.dem.iter().any(|d| d.eq_ignore_ascii_case(label)) {
            Party::Dem
        } else if self.rep.iter().any(|r| r.eq_ignore_ascii_case(label)) {
            Party::Rep
        } else {
            Party::Other
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub schema: SchemaConfig,
    pub parties: PartyMapping,
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        PipelineConfig::parse(&fs::read_to_string(path)?)
    }

    /// Parses `key=value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            let value = value.trim().trim_matches('"').to_string();
            let list = || -> Vec<String> {
                value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            };
            let year = |v: &str| {
                v.parse::<i32>()
                    .map_err(|_| Error::Config(format!("line {}: `{v}` is not a year", n + 1)))
            };
            let s = &mut cfg.schema;
            match key.trim() {
                "year" => s.year = value,
                "state" => s.state = value,
                "party" => s.party = value,
                "candidate_votes" => s.candidate_votes = value,
                "total_votes" => s.total_votes = value,
                "stage" => s.stage = (!value.is_empty()).then_some(value),
                "stage_value" => s.stage_value = value,
                "first_year" => s.first_year = year(&value)?,
                "last_year" => s.last_year = year(&value)?,
                "delimiter" => {
                    s.delimiter = match value.as_str() {
                        "comma" | "," => Some(b','),
                        "tab" | "\\t" => Some(b'\t'),
                        "auto" => None,
                        other => return Err(Error::Config(format!("unknown delimiter `{other}`"))),
                    }
                }
                "dem_labels" => cfg.parties.dem = list(),
                "rep_labels" => cfg.parties.rep = list(),
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown config key `{other}`",
                        n + 1
                    )))
                }
            }
        }
        if cfg.schema.first_year > cfg.schema.last_year {
            return Err(Error::Config("first_year is after last_year".into()));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReturnsRow {
    pub year: i32,
    pub state: String,
    pub party: String,
    pub candidate_votes: u64,
    pub total_votes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    /// 1-based line number in the input, header included.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub rows: Vec<ReturnsRow>,
    pub rejects: Vec<Reject>,
    /// Well-formed rows dropped by the year range or stage filter.
    pub filtered: usize,
}

pub fn load_returns(path: &Path, schema: &SchemaConfig) -> Result<LoadReport> {
    let file = fs::File::open(path)?;
    load_returns_from_reader(file, schema)
}

pub fn load_returns_from_reader<R: Read>(
    mut reader: R,
    schema: &SchemaConfig,
) -> Result<LoadReport> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let delimiter = schema.delimiter.unwrap_or_else(|| {
        let header = text.lines().next().unwrap_or("");
        if header.contains('\t') {
            b'\t'
        } else {
            b','
        }
    });
    let mut input = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = input.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing required column `{name}`")))
    };
    let year_i = find(&schema.year)?;
    let state_i = find(&schema.state)?;
    let party_i = find(&schema.party)?;
    let cand_i = find(&schema.candidate_votes)?;
    let total_i = find(&schema.total_votes)?;
    let stage_i = schema
        .stage
        .as_ref()
        .and_then(|s| headers.iter().position(|h| h.trim() == s));

    let mut report = LoadReport::default();
    for (idx, record) in input.records().enumerate() {
        let line = idx + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                report.rejects.push(Reject {
                    line,
                    reason: format!("unreadable record: {e}"),
                });
                continue;
            }
        };
        let field = |i: usize| record.get(i).map(str::trim);
        let parsed = (|| -> std::result::Result<ReturnsRow, String> {
            let get =
                |i: usize, name: &str| field(i).ok_or_else(|| format!("missing field `{name}`"));
            let year_s = get(year_i, &schema.year)?;
            let year = year_s
                .parse::<i32>()
                .map_err(|_| format!("year `{year_s}` is not an integer"))?;
            let count = |i: usize, name: &str| -> std::result::Result<u64, String> {
                let s = get(i, name)?;
                s.parse::<u64>()
                    .map_err(|_| format!("{name} `{s}` is not a non-negative integer"))
            };
            let candidate_votes = count(cand_i, &schema.candidate_votes)?;
            let total_votes = count(total_i, &schema.total_votes)?;
            if total_votes == 0 {
                return Err(format!("{} is zero", schema.total_votes));
            }
            if candidate_votes > total_votes {
                return Err(format!(
                    "candidate votes {candidate_votes} exceed total votes {total_votes}"
                ));
            }
            Ok(ReturnsRow {
                year,
                state: get(state_i, &schema.state)?.to_string(),
                party: field(party_i).unwrap_or("").to_string(),
                candidate_votes,
                total_votes,
            })
        })();
        match parsed {
            Ok(row) => {
                let stage_ok = stage_i
                    .map(|i| field(i).is_some_and(|s| s.eq_ignore_ascii_case(&schema.stage_value)))
                    .unwrap_or(true);
                let in_range = (schema.first_year..=schema.last_year).contains(&row.year);
                if stage_ok && in_range {
                    report.rows.push(row);
                } else {
                    report.filtered += 1;
                }
            }
            Err(reason) => report.rejects.push(Reject { line, reason }),
        }
    }
    Ok(report)
}

/// Mapped-party vote totals of one cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PartyTally {
    pub dem: u64,
    pub rep: u64,
    pub other: u64,
}

impl PartyTally {
    pub fn total(&self) -> u64 {
        self.dem + self.rep + self.other
    }
}

/// Sums candidate votes per even cycle year and mapped party. Rows from odd
/// years are skipped with a warning.
pub fn tally(rows: &[ReturnsRow], mapping: &PartyMapping) -> BTreeMap<i32, PartyTally> {
    let mut out: BTreeMap<i32, PartyTally> = BTreeMap::new();
    let mut odd = 0usize;
    for row in rows {
        if row.year % 2 != 0 {
            odd += 1;
            continue;
        }
        let t = out.entry(row.year).or_default();
        match mapping.classify(&row.party) {
            Party::Dem => t.dem += row.candidate_votes,
            Party::Rep => t.rep += row.candidate_votes,
            Party::Other => t.other += row.candidate_votes,
        }
    }
    if odd > 0 {
        log::warn!("skipped {odd} rows from odd-numbered years");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProportionRow {
    pub year: i32,
    pub dem: f64,
    pub rep: f64,
    pub other: f64,
}

impl ProportionRow {
    pub fn values(&self) -> [f64; 3] {
        [self.dem, self.rep, self.other]
    }
}

/// One row per election cycle, columns (dem, rep, other), all in (0, 1).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProportionMatrix {
    pub rows: Vec<ProportionRow>,
}

pub fn aggregate(rows: &[ReturnsRow], mapping: &PartyMapping) -> Result<ProportionMatrix> {
    let mut out = Vec::new();
    for (year, t) in tally(rows, mapping) {
        let total = t.total();
        if total == 0 {
            return Err(Error::Aggregation(format!(
                "cycle {year} has zero total votes"
            )));
        }
        let n = total as f64;
        let mut p = [t.dem as f64 / n, t.rep as f64 / n, t.other as f64 / n];
        debug_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        if p.contains(&0.0) {
            log::warn!(
                "cycle {year}: a party has no votes; flooring its proportion at {ZERO_PROPORTION_FLOOR} and renormalizing"
            );
            for v in &mut p {
                if *v == 0.0 {
                    *v = ZERO_PROPORTION_FLOOR;
                }
            }
            let s: f64 = p.iter().sum();
            for v in &mut p {
                *v /= s;
            }
        }
        out.push(ProportionRow {
            year,
            dem: p[0],
            rep: p[1],
            other: p[2],
        });
    }
    Ok(ProportionMatrix { rows: out })
}

/// Rounds to `digits` significant digits and prints the shortest decimal
/// that reads back as the rounded value.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x);
    rounded.to_string()
}

impl ProportionMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values().to_vec()).collect()
    }

    /// `year,dem,rep,other` with 12 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["year", "dem", "rep", "other"])?;
        for r in &self.rows {
            out.write_record([
                r.year.to_string(),
                format_significant(r.dem, 12),
                format_significant(r.rep, 12),
                format_significant(r.other, 12),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(reader);
        let headers: Vec<String> = input
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if headers != ["year", "dem", "rep", "other"] {
            return Err(Error::Schema(format!(
                "expected header year,dem,rep,other, found {}",
                headers.join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, record) in input.records().enumerate() {
            let record = record?;
            let bad = |f: &str| Error::Schema(format!("row {}: `{f}` is not a number", i + 1));
            let year = record[0]
                .trim()
                .parse::<i32>()
                .map_err(|_| bad(&record[0]))?;
            let num = |j: usize| record[j].trim().parse::<f64>().map_err(|_| bad(&record[j]));
            let row = ProportionRow {
                year,
                dem: num(1)?,
                rep: num(2)?,
                other: num(3)?,
            };
            if row.values().iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
                return Err(Error::Schema(format!(
                    "row {}: proportions must lie in (0, 1)",
                    i + 1
                )));
            }
            rows.push(row);
        }
        Ok(ProportionMatrix { rows })
    }
}

/// Observations = the matrix, weights all one.
pub fn to_weighted_dataset(matrix: &ProportionMatrix) -> Result<WeightedDataset> {
    if matrix.is_empty() {
        return Err(Error::Domain("proportion matrix is empty".into()));
    }
    WeightedDataset::unweighted(matrix.observations())
}

/// Loads either a raw returns file or an already aggregated `year,dem,rep,other`
/// matrix, recognized by its header.
pub fn load_matrix(
    path: &Path,
    config: &PipelineConfig,
) -> Result<(ProportionMatrix, Option<LoadReport>)> {
    let text = fs::read_to_string(path)?;
    let header = text.lines().next().unwrap_or("").trim();
    if header.replace(' ', "") == "year,dem,rep,other" {
        return Ok((ProportionMatrix::read_csv(text.as_bytes())?, None));
    }
    let report = load_returns_from_reader(text.as_bytes(), &config.schema)?;
    let matrix = aggregate(&report.rows, &config.parties)?;
    Ok((matrix, Some(report)))
}
