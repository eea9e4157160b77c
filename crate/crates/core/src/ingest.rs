//! Record parsing, patent counting, matrix construction and green tagging.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Read;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::code::{validate_prefix, ActivityCode, Scheme};
use crate::error::{Error, Result, RowError};
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub geo: String,
    pub activity: ActivityCode,
    pub value: f64,
    pub period: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatentRecord {
    pub patent_id: String,
    pub period: i32,
    pub codes: Vec<ActivityCode>,
    pub locations: Vec<String>,
}

/// Column mapping for delimited record files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordSchema {
    pub geo_column: String,
    pub activity_column: String,
    pub value_column: String,
    pub period_column: String,
    /// When absent, activity cells must carry a `SCHEME:code` prefix.
    pub scheme: Option<Scheme>,
}

impl Default for RecordSchema {
    fn default() -> Self {
        RecordSchema {
            geo_column: "geo".into(),
            activity_column: "activity".into(),
            value_column: "value".into(),
            period_column: "year".into(),
            scheme: Some(Scheme::Hs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    /// Scan everything, then fail listing every malformed row.
    #[default]
    Strict,
    /// Skip malformed rows and list them in the report.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ParseOptions {
    pub mode: ParseMode,
    pub min_year: Option<i32>,
    pub max_year: Option<i32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_accepted: usize,
    pub zero_value_rows: usize,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub report: IngestReport,
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Config(format!("missing column `{name}` in header")))
}

fn row_err(line: u64, field: &str, message: impl Into<String>) -> RowError {
    RowError {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn check_year(line: u64, field: &str, year: i32, options: &ParseOptions) -> std::result::Result<(), RowError> {
    if options.min_year.is_some_and(|lo| year < lo) || options.max_year.is_some_and(|hi| year > hi) {
        return Err(row_err(line, field, format!("period {year} outside configured range")));
    }
    Ok(())
}

fn parse_activity(scheme: Option<Scheme>, raw: &str) -> Result<ActivityCode> {
    match scheme {
        Some(s) => ActivityCode::new(s, raw),
        None => raw.trim().parse(),
    }
}

fn finish<T>(records: Vec<T>, errors: Vec<RowError>, mut report: IngestReport, mode: ParseMode) -> Result<Parsed<T>> {
    if !errors.is_empty() && mode == ParseMode::Strict {
        return Err(Error::MalformedRows(errors));
    }
    report.rows_accepted = records.len();
    report.skipped = errors.iter().map(ToString::to_string).collect();
    Ok(Parsed { records, report })
}

/// Parses a comma-delimited record file with a header row.
pub fn parse_records<R: Read>(input: R, schema: &RecordSchema, options: &ParseOptions) -> Result<Parsed<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = rdr.headers()?.clone();
    let gi = column_index(&headers, &schema.geo_column)?;
    let ai = column_index(&headers, &schema.activity_column)?;
    let vi = column_index(&headers, &schema.value_column)?;
    let pi = column_index(&headers, &schema.period_column)?;

    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut report = IngestReport::default();
    let mut row = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                errors.push(row_err(line, "<row>", e.to_string()));
                report.rows_read += 1;
                continue;
            }
        }
        report.rows_read += 1;
        let line = row.position().map_or(0, |p| p.line());
        match parse_record_row(&row, line, (gi, ai, vi, pi), schema, options) {
            Ok(rec) => {
                if rec.value == 0.0 {
                    report.zero_value_rows += 1;
                }
                records.push(rec);
            }
            Err(e) => errors.push(e),
        }
    }
    finish(records, errors, report, options.mode)
}

fn parse_record_row(
    row: &csv::StringRecord,
    line: u64,
    (gi, ai, vi, pi): (usize, usize, usize, usize),
    schema: &RecordSchema,
    options: &ParseOptions,
) -> std::result::Result<RawRecord, RowError> {
    let field = |i: usize, name: &str| {
        row.get(i)
            .map(str::trim)
            .ok_or_else(|| row_err(line, name, "missing field"))
    };
    let geo = field(gi, &schema.geo_column)?;
    if geo.is_empty() {
        return Err(row_err(line, &schema.geo_column, "empty geo identifier"));
    }
    let activity_raw = field(ai, &schema.activity_column)?;
    let activity = parse_activity(schema.scheme, activity_raw)
        .map_err(|e| row_err(line, &schema.activity_column, e.to_string()))?;
    let value_raw = field(vi, &schema.value_column)?;
    let value: f64 = value_raw
        .parse()
        .map_err(|_| row_err(line, &schema.value_column, format!("not a number: `{value_raw}`")))?;
    if !value.is_finite() {
        return Err(row_err(line, &schema.value_column, "value must be finite"));
    }
    if value < 0.0 {
        return Err(row_err(line, &schema.value_column, format!("negative value {value_raw}")));
    }
    let period_raw = field(pi, &schema.period_column)?;
    let period: i32 = period_raw
        .parse()
        .map_err(|_| row_err(line, &schema.period_column, format!("not a year: `{period_raw}`")))?;
    check_year(line, &schema.period_column, period, options)?;
    Ok(RawRecord {
        geo: geo.to_string(),
        activity,
        value,
        period,
    })
}

/// Parses a patent file with columns `patent_id, year, codes, locations`,
/// list cells separated by `;`.
pub fn parse_patents<R: Read>(input: R, scheme: Scheme, options: &ParseOptions) -> Result<Parsed<PatentRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = rdr.headers()?.clone();
    let idx = [
        column_index(&headers, "patent_id")?,
        column_index(&headers, "year")?,
        column_index(&headers, "codes")?,
        column_index(&headers, "locations")?,
    ];
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    let mut report = IngestReport::default();
    let mut row = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                errors.push(row_err(line, "<row>", e.to_string()));
                report.rows_read += 1;
                continue;
            }
        }
        report.rows_read += 1;
        let line = row.position().map_or(0, |p| p.line());
        match parse_patent_row(&row, line, idx, scheme, options) {
            Ok(rec) => {
                if !seen.insert(rec.patent_id.clone()) {
                    errors.push(row_err(line, "patent_id", format!("duplicate id `{}`", rec.patent_id)));
                } else {
                    records.push(rec);
                }
            }
            Err(e) => errors.push(e),
        }
    }
    finish(records, errors, report, options.mode)
}

fn split_list(cell: &str) -> Vec<&str> {
    cell.split(';').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_patent_row(
    row: &csv::StringRecord,
    line: u64,
    [ii, yi, ci, li]: [usize; 4],
    scheme: Scheme,
    options: &ParseOptions,
) -> std::result::Result<PatentRecord, RowError> {
    let field = |i: usize, name: &str| {
        row.get(i)
            .map(str::trim)
            .ok_or_else(|| row_err(line, name, "missing field"))
    };
    let patent_id = field(ii, "patent_id")?;
    if patent_id.is_empty() {
        return Err(row_err(line, "patent_id", "empty id"));
    }
    let year_raw = field(yi, "year")?;
    let period: i32 = year_raw
        .parse()
        .map_err(|_| row_err(line, "year", format!("not a year: `{year_raw}`")))?;
    check_year(line, "year", period, options)?;
    let codes = split_list(field(ci, "codes")?)
        .into_iter()
        .map(|c| ActivityCode::new(scheme, c).map_err(|e| row_err(line, "codes", e.to_string())))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if codes.is_empty() {
        return Err(row_err(line, "codes", "no codes"));
    }
    let locations: Vec<String> = split_list(field(li, "locations")?)
        .into_iter()
        .map(String::from)
        .collect();
    if locations.is_empty() {
        return Err(row_err(line, "locations", "no locations"));
    }
    Ok(PatentRecord {
        patent_id: patent_id.to_string(),
        period,
        codes,
        locations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountingMode {
    /// Each patent carries total weight 1, split by location occurrences.
    #[default]
    Fractional,
    /// Each distinct location on a patent gets weight 1.
    Full,
}

/// Geographic granularity: identifiers kept as-is or cut to a prefix
/// (e.g. NUTS-2 from NUTS-3 codes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeoLevel {
    #[default]
    AsIs,
    Prefix(usize),
}

impl GeoLevel {
    fn apply<'a>(&self, geo: &'a str) -> &'a str {
        match *self {
            GeoLevel::AsIs => geo,
            GeoLevel::Prefix(n) => match geo.char_indices().nth(n) {
                Some((i, _)) => &geo[..i],
                None => geo,
            },
        }
    }
}

/// Converts patents to (geo, code, period) weights. Each patent's weight is
/// additionally split equally across its distinct codes after truncation.
pub fn count_patents(
    records: &[PatentRecord],
    mode: CountingMode,
    level: GeoLevel,
    code_depth: Option<usize>,
) -> Result<Vec<RawRecord>> {
    let mut acc: BTreeMap<(String, ActivityCode, i32), CompensatedSum> = BTreeMap::new();
    for p in records {
        if p.locations.is_empty() || p.codes.is_empty() {
            return Err(Error::Data(format!("patent `{}` has no locations or codes", p.patent_id)));
        }
        let codes: BTreeSet<ActivityCode> = p
            .codes
            .iter()
            .map(|c| match code_depth {
                Some(d) => c.truncate(d),
                None => Ok(c.clone()),
            })
            .collect::<Result<_>>()?;
        let mut occurrences: BTreeMap<&str, usize> = BTreeMap::new();
        for loc in &p.locations {
            *occurrences.entry(level.apply(loc)).or_default() += 1;
        }
        let n_loc = p.locations.len() as f64;
        let n_codes = codes.len() as f64;
        for (geo, count) in occurrences {
            let geo_weight = match mode {
                CountingMode::Fractional => count as f64 / n_loc,
                CountingMode::Full => 1.0,
            };
            for code in &codes {
                acc.entry((geo.to_string(), code.clone(), p.period))
                    .or_default()
                    .add(geo_weight / n_codes);
            }
        }
    }
    Ok(acc
        .into_iter()
        .map(|((geo, activity, period), w)| RawRecord {
            geo,
            activity,
            value: w.value(),
            period,
        })
        .collect())
}

/// Raw geography x activity volumes for one layer and one period.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBipartite {
    pub geos: Vec<String>,
    pub activities: Vec<ActivityCode>,
    pub weights: Array2<f64>,
    pub period: i32,
    pub layer: String,
}

pub(crate) fn check_unique<T: Ord + std::fmt::Display>(items: &[T], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for it in items {
        if !seen.insert(it) {
            return Err(Error::Data(format!("duplicate {what} identifier `{it}`")));
        }
    }
    Ok(())
}

impl WeightedBipartite {
    pub fn new(
        geos: Vec<String>,
        activities: Vec<ActivityCode>,
        weights: Array2<f64>,
        period: i32,
        layer: impl Into<String>,
    ) -> Result<Self> {
        if weights.dim() != (geos.len(), activities.len()) {
            return Err(Error::Data(format!(
                "weight matrix is {:?}, labels are {}x{}",
                weights.dim(),
                geos.len(),
                activities.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Data(format!("weight {w} is negative or non-finite")));
        }
        check_unique(&geos, "geo")?;
        check_unique(&activities, "activity")?;
        Ok(WeightedBipartite {
            geos,
            activities,
            weights,
            period,
            layer: layer.into(),
        })
    }

    pub fn zero_rows(&self) -> Vec<String> {
        self.weights
            .rows()
            .into_iter()
            .zip(&self.geos)
            .filter(|(r, _)| r.iter().all(|&w| w == 0.0))
            .map(|(_, g)| g.clone())
            .collect()
    }

    pub fn zero_columns(&self) -> Vec<ActivityCode> {
        self.weights
            .columns()
            .into_iter()
            .zip(&self.activities)
            .filter(|(c, _)| c.iter().all(|&w| w == 0.0))
            .map(|(_, a)| a.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixReport {
    pub records_used: usize,
    pub zero_rows: Vec<String>,
    pub zero_columns: Vec<ActivityCode>,
}

/// Aggregates records of one period into a geo x activity matrix with codes
/// truncated to `digits`. Output is independent of record order.
pub fn build_matrix(
    records: &[RawRecord],
    period: i32,
    digits: usize,
    layer: &str,
) -> Result<(WeightedBipartite, MatrixReport)> {
    let selected: Vec<&RawRecord> = records.iter().filter(|r| r.period == period).collect();
    if selected.is_empty() {
        return Err(Error::EmptyPeriod(period));
    }
    let max_depth = selected.iter().map(|r| r.activity.depth()).max().unwrap_or(0);
    if digits == 0 || digits > max_depth {
        return Err(Error::Config(format!(
            "aggregation depth {digits} not in 1..={max_depth} (deepest code present)"
        )));
    }
    let scheme = selected[0].activity.scheme();
    if let Some(r) = selected.iter().find(|r| r.activity.scheme() != scheme) {
        return Err(Error::SchemeMismatch {
            expected: scheme.to_string(),
            found: r.activity.scheme().to_string(),
        });
    }

    let mut cells: Vec<(&str, ActivityCode, f64)> = selected
        .iter()
        .map(|r| Ok((r.geo.as_str(), r.activity.truncate(digits)?, r.value)))
        .collect::<Result<_>>()?;
    cells.sort_by(|a, b| a.0.cmp(b.0).then_with(|| a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));

    let geos: Vec<String> = cells
        .iter()
        .map(|c| c.0)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(String::from)
        .collect();
    let activities: Vec<ActivityCode> = cells
        .iter()
        .map(|c| c.1.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let col_of: BTreeMap<&ActivityCode, usize> = activities.iter().enumerate().map(|(i, a)| (a, i)).collect();

    let mut weights = Array2::<f64>::zeros((geos.len(), activities.len()));
    let mut row = 0;
    let mut i = 0;
    while i < cells.len() {
        while geos[row] != cells[i].0 {
            row += 1;
        }
        let mut acc = CompensatedSum::new();
        let mut j = i;
        while j < cells.len() && cells[j].0 == cells[i].0 && cells[j].1 == cells[i].1 {
            acc.add(cells[j].2);
            j += 1;
        }
        weights[[row, col_of[&cells[i].1]]] = acc.value();
        i = j;
    }

    let matrix = WeightedBipartite::new(geos, activities, weights, period, layer)?;
    let report = MatrixReport {
        records_used: selected.len(),
        zero_rows: matrix.zero_rows(),
        zero_columns: matrix.zero_columns(),
    };
    Ok((matrix, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Exact,
    Prefix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreenEntry {
    /// Normalised code text.
    pub pattern: String,
    pub mode: MatchMode,
}

/// A named list of green codes with exact or prefix matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenClassification {
    pub name: String,
    pub scheme: Scheme,
    pub entries: Vec<GreenEntry>,
}

impl GreenClassification {
    pub fn new(name: impl Into<String>, scheme: Scheme, entries: Vec<GreenEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Data("green classification has no entries".into()));
        }
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert((&e.pattern, e.mode)) {
                return Err(Error::Data(format!("duplicate green entry `{}` ({:?})", e.pattern, e.mode)));
            }
        }
        Ok(GreenClassification {
            name: name.into(),
            scheme,
            entries,
        })
    }

    /// Parses a list with one entry per line: `<code>` (exact) or `<code>*`
    /// (prefix). Lines starting with `#` are comments.
    pub fn parse(text: &str, name: &str, scheme: Scheme) -> Result<Self> {
        let mut entries = Vec::new();
        let mut errors = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let entry = match line.strip_suffix('*') {
                Some(p) => validate_prefix(scheme, p).map(|pattern| GreenEntry {
                    pattern,
                    mode: MatchMode::Prefix,
                }),
                None => ActivityCode::new(scheme, line).map(|c| GreenEntry {
                    pattern: c.normalized(),
                    mode: MatchMode::Exact,
                }),
            };
            match entry {
                Ok(e) => entries.push(e),
                Err(e) => errors.push(row_err(i as u64 + 1, "code", e.to_string())),
            }
        }
        if !errors.is_empty() {
            return Err(Error::MalformedRows(errors));
        }
        Self::new(name, scheme, entries)
    }

    pub fn matches(&self, code: &ActivityCode) -> bool {
        let norm = code.normalized();
        self.entries.iter().any(|e| match e.mode {
            MatchMode::Exact => norm == e.pattern,
            MatchMode::Prefix => norm.starts_with(&e.pattern),
        })
    }

    /// Boolean mask over `activities`; errors when schemes differ.
    pub fn mask(&self, activities: &[ActivityCode]) -> Result<ActivityMask> {
        if let Some(a) = activities.iter().find(|a| a.scheme() != self.scheme) {
            return Err(Error::SchemeMismatch {
                expected: self.scheme.to_string(),
                found: a.scheme().to_string(),
            });
        }
        Ok(ActivityMask {
            name: self.name.clone(),
            activities: activities.to_vec(),
            flags: activities.iter().map(|a| self.matches(a)).collect(),
        })
    }
}

/// A named subset of a matrix's activity columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityMask {
    pub name: String,
    pub activities: Vec<ActivityCode>,
    pub flags: Vec<bool>,
}

impl ActivityMask {
    pub fn from_flags(name: impl Into<String>, activities: Vec<ActivityCode>, flags: Vec<bool>) -> Result<Self> {
        if activities.len() != flags.len() {
            return Err(Error::Data("mask length differs from activity count".into()));
        }
        Ok(ActivityMask {
            name: name.into(),
            activities,
            flags,
        })
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i)
    }

    /// Checks that the mask is aligned with `activities` and selects something.
    pub(crate) fn check_against(&self, activities: &[ActivityCode]) -> Result<()> {
        if self.activities != activities {
            return Err(Error::Data(format!(
                "mask `{}` is not aligned with the matrix activities",
                self.name
            )));
        }
        if self.count() == 0 {
            return Err(Error::EmptyIntersection(format!(
                "mask `{}` selects no matrix activity",
                self.name
            )));
        }
        Ok(())
    }
}

/// Tags the matrix columns matched by `classification`.
pub fn tag_green(matrix: &WeightedBipartite, classification: &GreenClassification) -> Result<ActivityMask> {
    classification.mask(&matrix.activities)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatentGreenRule {
    /// Green when any code matches.
    #[default]
    Any,
    /// Green only when every code matches.
    All,
}

/// Ids of patents tagged green under `rule`.
pub fn green_patents(records: &[PatentRecord], classification: &GreenClassification, rule: PatentGreenRule) -> Vec<String> {
    records
        .iter()
        .filter(|p| match rule {
            PatentGreenRule::Any => p.codes.iter().any(|c| classification.matches(c)),
            PatentGreenRule::All => p.codes.iter().all(|c| classification.matches(c)),
        })
        .map(|p| p.patent_id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hs_schema() -> RecordSchema {
        RecordSchema {
            geo_column: "geo".into(),
            activity_column: "product".into(),
            value_column: "value".into(),
            period_column: "year".into(),
            scheme: Some(Scheme::Hs),
        }
    }

    #[test]
    fn parses_a_trade_row() {
        let text = "geo,product,value,year\nDEU,850231,1200.5,2010\n";
        let parsed = parse_records(text.as_bytes(), &hs_schema(), &ParseOptions::default()).unwrap();
        assert_eq!(
            parsed.records,
            vec![RawRecord {
                geo: "DEU".into(),
                activity: ActivityCode::hs("850231").unwrap(),
                value: 1200.5,
                period: 2010,
            }]
        );
    }

    #[test]
    fn negative_value_is_a_row_error() {
        let text = "geo,product,value,year\nDEU,850231,1,2010\nFRA,850231,-3,2010\n";
        match parse_records(text.as_bytes(), &hs_schema(), &ParseOptions::default()) {
            Err(Error::MalformedRows(rows)) => {
                assert_eq!(rows.len(), 1);
                assert_eq!(rows[0].line, 3);
                assert_eq!(rows[0].field, "value");
            }
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn lenient_mode_skips_and_reports() {
        let text = "geo,product,value,year\nDEU,850231,1,2010\nFRA,85x,1,2010\nITA,850231,0,2010\n";
        let opts = ParseOptions {
            mode: ParseMode::Lenient,
            ..Default::default()
        };
        let parsed = parse_records(text.as_bytes(), &hs_schema(), &opts).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.report.skipped.len(), 1);
        assert_eq!(parsed.report.zero_value_rows, 1);
    }

    #[test]
    fn unknown_scheme_prefix_is_rejected() {
        let schema = RecordSchema {
            scheme: None,
            ..hs_schema()
        };
        let text = "geo,product,value,year\nDEU,XYZ:1,1,2010\n";
        let err = parse_records(text.as_bytes(), &schema, &ParseOptions::default()).unwrap_err();
        assert!(err.to_string().contains("unknown classification scheme"));
    }

    #[test]
    fn year_range_is_enforced() {
        let opts = ParseOptions {
            min_year: Some(2000),
            max_year: Some(2005),
            ..Default::default()
        };
        let text = "geo,product,value,year\nDEU,850231,1,2010\n";
        assert!(parse_records(text.as_bytes(), &hs_schema(), &opts).is_err());
    }

    fn patent(locs: &[&str], codes: &[&str]) -> PatentRecord {
        PatentRecord {
            patent_id: "p".into(),
            period: 2015,
            codes: codes.iter().map(|c| ActivityCode::cpc(c).unwrap()).collect(),
            locations: locs.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn weight_of(out: &[RawRecord], geo: &str) -> f64 {
        out.iter().filter(|r| r.geo == geo).map(|r| r.value).sum()
    }

    #[test]
    fn fractional_counting_splits_by_inventor() {
        let out = count_patents(&[patent(&["r1", "r2"], &["Y02E"])], CountingMode::Fractional, GeoLevel::AsIs, None).unwrap();
        assert_eq!(weight_of(&out, "r1"), 0.5);
        assert_eq!(weight_of(&out, "r2"), 0.5);

        let p = patent(&["r1", "r1", "r2"], &["Y02E"]);
        let out = count_patents(&[p.clone()], CountingMode::Fractional, GeoLevel::AsIs, None).unwrap();
        assert!((weight_of(&out, "r1") - 2.0 / 3.0).abs() < 1e-15);
        assert!((weight_of(&out, "r2") - 1.0 / 3.0).abs() < 1e-15);

        let out = count_patents(&[p], CountingMode::Full, GeoLevel::AsIs, None).unwrap();
        assert_eq!(weight_of(&out, "r1"), 1.0);
        assert_eq!(weight_of(&out, "r2"), 1.0);
    }

    #[test]
    fn codes_share_the_weight_after_truncation() {
        let p = patent(&["r1"], &["Y02E 10/50", "Y02E 10/40", "H01L 31/04"]);
        let out = count_patents(&[p], CountingMode::Fractional, GeoLevel::AsIs, Some(4)).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|r| r.value == 0.5));
        assert!(count_patents(&[], CountingMode::Full, GeoLevel::AsIs, None).unwrap().is_empty());
    }

    #[test]
    fn geo_level_prefix_merges_regions() {
        let p = patent(&["ITC41", "ITC42", "DE111"], &["Y02E"]);
        let out = count_patents(&[p], CountingMode::Fractional, GeoLevel::Prefix(4), None).unwrap();
        assert!((weight_of(&out, "ITC4") - 2.0 / 3.0).abs() < 1e-15);
    }

    fn rec(geo: &str, code: &str, value: f64, period: i32) -> RawRecord {
        RawRecord {
            geo: geo.into(),
            activity: ActivityCode::hs(code).unwrap(),
            value,
            period,
        }
    }

    #[test]
    fn build_matrix_aggregates_and_filters() {
        let recs = vec![
            rec("g1", "850231", 2.0, 2010),
            rec("g1", "850239", 3.0, 2010),
            rec("g2", "850239", 7.0, 2011),
        ];
        let (m, report) = build_matrix(&recs, 2010, 4, "trade").unwrap();
        assert_eq!(m.geos, vec!["g1"]);
        assert_eq!(m.activities, vec![ActivityCode::hs("8502").unwrap()]);
        assert_eq!(m.weights[[0, 0]], 5.0);
        assert_eq!(report.records_used, 2);
        assert!(matches!(build_matrix(&recs, 1999, 4, "trade"), Err(Error::EmptyPeriod(1999))));
        assert!(build_matrix(&recs, 2010, 8, "trade").is_err());
    }

    #[test]
    fn zero_rows_are_kept_and_flagged() {
        let recs = vec![rec("g1", "850231", 2.0, 2010), rec("g2", "850231", 0.0, 2010)];
        let (m, report) = build_matrix(&recs, 2010, 6, "trade").unwrap();
        assert_eq!(m.geos.len(), 2);
        assert_eq!(report.zero_rows, vec!["g2".to_string()]);
    }

    #[test]
    fn green_tagging() {
        let cls = GreenClassification::parse("# mitigation\nY02*\nY04S*\n", "y02", Scheme::Cpc).unwrap();
        assert!(cls.matches(&ActivityCode::cpc("Y02E 10/50").unwrap()));
        assert!(cls.matches(&ActivityCode::cpc("y04s 10/12").unwrap()));
        assert!(!cls.matches(&ActivityCode::cpc("H01L").unwrap()));

        let hs = GreenClassification::parse("850231\n", "cleg", Scheme::Hs).unwrap();
        assert!(hs.matches(&ActivityCode::hs("850231").unwrap()));
        assert!(!hs.matches(&ActivityCode::hs("850239").unwrap()));
        let err = hs.mask(&[ActivityCode::cpc("Y02E").unwrap()]).unwrap_err();
        assert!(matches!(err, Error::SchemeMismatch { .. }));
    }

    #[test]
    fn green_list_rejects_duplicates_and_empty() {
        assert!(GreenClassification::parse("Y02*\nY02*\n", "x", Scheme::Cpc).is_err());
        assert!(GreenClassification::parse("# nothing\n", "x", Scheme::Cpc).is_err());
        // same code in both modes is allowed
        assert!(GreenClassification::parse("Y02E\nY02E*\n", "x", Scheme::Cpc).is_ok());
    }

    #[test]
    fn patent_green_rules() {
        let cls = GreenClassification::parse("Y02*\n", "y02", Scheme::Cpc).unwrap();
        let mut mixed = patent(&["r1"], &["Y02E", "H01L"]);
        mixed.patent_id = "mixed".into();
        let mut pure = patent(&["r1"], &["Y02E", "Y02P"]);
        pure.patent_id = "pure".into();
        let recs = [mixed, pure];
        assert_eq!(green_patents(&recs, &cls, PatentGreenRule::Any), vec!["mixed", "pure"]);
        assert_eq!(green_patents(&recs, &cls, PatentGreenRule::All), vec!["pure"]);
    }
}
