//! CSV inputs: per-generation monthly history and the GA calendar.

use std::collections::BTreeMap;
use std::path::Path;

use crate::domain::{GaCalendar, GaEntry, GenerationId, GenerationSeries, MonthIndex};
use crate::error::{Error, Result};

pub const HISTORY_HEADER: [&str; 6] = [
    "generation_id",
    "month",
    "shipments",
    "upgrades",
    "new_receipts",
    "gross_returns",
];
pub const GA_HEADER: [&str; 4] = ["generation_id", "family", "ordinal", "ga_month"];

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn row_err(file: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Row {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, file: &str, want: &[&str]) -> Result<()> {
    let h = rdr.headers().map_err(|e| row_err(file, 1, e.to_string()))?;
    if h.iter().ne(want.iter().copied()) {
        return Err(row_err(
            file,
            1,
            format!("header must be `{}`", want.join(",")),
        ));
    }
    Ok(())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Parses history CSV text. `file` labels error messages.
pub fn parse_history(text: &str, file: &str) -> Result<Vec<GenerationSeries>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, file, &HISTORY_HEADER)?;
    let mut rows: BTreeMap<String, Vec<(MonthIndex, [f64; 4], u64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            row_err(file, line, e.to_string())
        })?;
        let line = line_of(&rec);
        if rec.len() != HISTORY_HEADER.len() {
            return Err(row_err(
                file,
                line,
                format!(
                    "expected {} fields, found {}",
                    HISTORY_HEADER.len(),
                    rec.len()
                ),
            ));
        }
        let generation = rec[0].to_string();
        if generation.is_empty() {
            return Err(row_err(file, line, "empty generation_id"));
        }
        let month: MonthIndex = rec[1]
            .parse()
            .map_err(|e: Error| row_err(file, line, e.to_string()))?;
        let mut q = [0.0; 4];
        for (i, slot) in q.iter_mut().enumerate() {
            let name = HISTORY_HEADER[i + 2];
            let v: f64 = rec[i + 2].parse().map_err(|_| {
                row_err(
                    file,
                    line,
                    format!("{name} `{}` is not a number", &rec[i + 2]),
                )
            })?;
            if !v.is_finite() {
                return Err(row_err(file, line, format!("{name} must be finite")));
            }
            if v < 0.0 {
                return Err(row_err(file, line, format!("negative {name} {v}")));
            }
            *slot = v;
        }
        rows.entry(generation).or_default().push((month, q, line));
    }

    let mut out = Vec::with_capacity(rows.len());
    for (generation, mut r) in rows {
        r.sort_by_key(|(m, _, _)| *m);
        for w in r.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.0 == b.0 {
                return Err(row_err(
                    file,
                    b.2.max(a.2),
                    format!("duplicate month {} for `{generation}`", a.0),
                ));
            }
            if b.0 - a.0 != 1 {
                return Err(Error::validation(format!(
                    "{file}: `{generation}` has a gap between {} and {}",
                    a.0, b.0
                )));
            }
        }
        let col = |i: usize| r.iter().map(|(_, q, _)| q[i]).collect::<Vec<f64>>();
        out.push(GenerationSeries::new(
            &generation,
            r[0].0,
            col(0),
            col(1),
            col(2),
            col(3),
        )?);
    }
    Ok(out)
}

pub fn load_history(path: &Path) -> Result<Vec<GenerationSeries>> {
    parse_history(&read_text(path)?, &path.display().to_string())
}

/// History CSV text. Values use the shortest round-trip representation.
pub fn history_csv(series: &[GenerationSeries]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Serde(e.to_string());
    w.write_record(HISTORY_HEADER).map_err(ser)?;
    for s in series {
        for i in 0..s.len() {
            w.write_record([
                s.generation.clone(),
                (s.start + i as i32).to_string(),
                s.shipments[i].to_string(),
                s.upgrades[i].to_string(),
                s.new_receipts[i].to_string(),
                s.gross_returns[i].to_string(),
            ])
            .map_err(ser)?;
        }
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
}

/// Parses GA calendar CSV text. Empty input gives an empty calendar.
pub fn parse_ga_calendar(text: &str, file: &str) -> Result<GaCalendar> {
    if text.trim().is_empty() {
        return Ok(GaCalendar::default());
    }
    let mut rdr = reader(text);
    check_header(&mut rdr, file, &GA_HEADER)?;
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            row_err(file, line, e.to_string())
        })?;
        let line = line_of(&rec);
        if rec.len() != GA_HEADER.len() {
            return Err(row_err(
                file,
                line,
                format!("expected {} fields, found {}", GA_HEADER.len(), rec.len()),
            ));
        }
        let ordinal: i32 = rec[2].parse().map_err(|_| {
            row_err(
                file,
                line,
                format!("ordinal `{}` is not an integer", &rec[2]),
            )
        })?;
        let generation =
            GenerationId::new(&rec[0], ordinal).map_err(|e| row_err(file, line, e.to_string()))?;
        let ga_month: MonthIndex = rec[3]
            .parse()
            .map_err(|e: Error| row_err(file, line, e.to_string()))?;
        entries.push(GaEntry {
            generation,
            family: rec[1].to_string(),
            ga_month,
        });
    }
    GaCalendar::new(entries)
}

pub fn load_ga_calendar(path: &Path) -> Result<GaCalendar> {
    parse_ga_calendar(&read_text(path)?, &path.display().to_string())
}

pub fn ga_calendar_csv(calendar: &GaCalendar) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Serde(e.to_string());
    w.write_record(GA_HEADER).map_err(ser)?;
    for e in calendar.entries() {
        w.write_record([
            e.generation.name.clone(),
            e.family.clone(),
            e.generation.ordinal.to_string(),
            e.ga_month.to_string(),
        ])
        .map_err(ser)?;
    }
    into_string(w)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_history(path: &Path, series: &[GenerationSeries]) -> Result<()> {
    write_text(path, &history_csv(series)?)
}

pub fn write_ga_calendar(path: &Path, calendar: &GaCalendar) -> Result<()> {
    write_text(path, &ga_calendar_csv(calendar)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const H: &str = "generation_id,month,shipments,upgrades,new_receipts,gross_returns\n";

    #[test]
    fn two_generations() {
        let mut text = H.to_string();
        for g in ["a", "b"] {
            for i in 0..60 {
                text.push_str(&format!("{g},{},1,2,3,4\n", MonthIndex(180 + i)));
            }
        }
        let s = parse_history(&text, "h.csv").unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|g| g.len() == 60));
    }

    #[test]
    fn negative_quantity_names_line() {
        let text = format!("{H}genN,2015-02,10,2,1,5\ngenN,2015-03,10,2,-1,5\n");
        let e = parse_history(&text, "h.csv").unwrap_err().to_string();
        assert!(
            e.contains("line 3") && e.contains("negative new_receipts"),
            "{e}"
        );
    }

    #[test]
    fn gap_is_an_error() {
        let text = format!("{H}g,2015-01,1,1,1,1\ng,2015-03,1,1,1,1\n");
        let e = parse_history(&text, "h.csv").unwrap_err().to_string();
        assert!(e.contains("gap between 2015-01 and 2015-03"), "{e}");
    }

    #[test]
    fn bad_header_and_fields() {
        assert!(parse_history("a,b\n", "h").is_err());
        assert!(parse_history(&format!("{H}g,2015-01,1,x,1,1\n"), "h").is_err());
        assert!(parse_history(&format!("{H}g,2015-1,1,1,1,1\n"), "h").is_err());
    }

    #[test]
    fn calendar_examples() {
        let ok = "generation_id,family,ordinal,ga_month\nN-1,f,1,2010-06\nN,f,2,2013-02\nN+1,f,3,2015-08\n";
        assert_eq!(parse_ga_calendar(ok, "ga").unwrap().entries().len(), 3);
        let bad = "generation_id,family,ordinal,ga_month\nN,f,2,2015-08\nN+1,f,3,2014-01\n";
        let e = parse_ga_calendar(bad, "ga").unwrap_err().to_string();
        assert!(e.contains("`N+1`") && e.contains("`N`"), "{e}");
        let empty = parse_ga_calendar("", "ga").unwrap();
        assert!(empty.is_empty());
        assert!(empty.trigger_ga("N").is_err());
    }

    #[test]
    fn missing_file_is_exit_2() {
        let e = load_history(Path::new("/nonexistent/h.csv")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("/nonexistent/h.csv"));
    }

    proptest! {
        #[test]
        fn history_round_trip(
            start in 0i32..400,
            data in prop::collection::vec((0.0f64..1e6, 0.0f64..1e6, 0.0f64..1e6, 0.0f64..1e6), 1..40),
        ) {
            let s = GenerationSeries::new(
                "g1",
                MonthIndex(start),
                data.iter().map(|d| d.0).collect(),
                data.iter().map(|d| d.1).collect(),
                data.iter().map(|d| d.2).collect(),
                data.iter().map(|d| d.3).collect(),
            ).unwrap();
            let back = parse_history(&history_csv(std::slice::from_ref(&s)).unwrap(), "x").unwrap();
            prop_assert_eq!(back, vec![s]);
        }
    }
}
