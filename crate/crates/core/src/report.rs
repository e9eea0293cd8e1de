//! Cycle report: monthly forecast table with quarterly subtotals, followed by labeled sections.

use std::collections::BTreeMap;

use crate::domain::MonthIndex;
use crate::error::{Error, Result};
use crate::ewa::EwaStatus;
use crate::pipeline::{analog_fit, CycleArtifacts};

pub const MAIN_HEADER: [&str; 14] = [
    "month",
    "actual",
    "best_fit",
    "lci",
    "uci",
    "mape",
    "deviation",
    "pad",
    "color",
    "score",
    "projection",
    "alert",
    "recommendation",
    "adjustment_notes",
];

/// Section name and header, in report order.
pub const SECTIONS: [(&str, &[&str]); 5] = [
    (
        "leaderboard",
        &[
            "algorithm",
            "mape_best_fit",
            "mape_lci",
            "mape_uci",
            "correlation",
        ],
    ),
    (
        "ewa_stats",
        &[
            "algorithm",
            "cum_sum_mean",
            "cum_sum_sd",
            "mape_score",
            "projection",
        ],
    ),
    ("cycle", &["key", "value"]),
    (
        "correlation",
        &["predictor", "target", "pearson_r", "strength"],
    ),
    (
        "outliers",
        &[
            "generation",
            "feature",
            "month",
            "value",
            "band_low",
            "band_high",
            "action",
        ],
    ),
];

fn num(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

struct Out {
    done: Vec<u8>,
    w: csv::Writer<Vec<u8>>,
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

impl Out {
    fn drain(&mut self) -> Result<()> {
        let w = std::mem::replace(&mut self.w, writer());
        self.done
            .extend(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?);
        Ok(())
    }

    fn finish(mut self) -> Result<String> {
        self.drain()?;
        String::from_utf8(self.done).map_err(|e| Error::Serde(e.to_string()))
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w
            .write_record(fields)
            .map_err(|e| Error::Serde(e.to_string()))
    }

    fn section(&mut self, name: &str, header: &[&str]) -> Result<()> {
        self.drain()?;
        self.done
            .extend_from_slice(format!("\n# {name}\n").as_bytes());
        self.row(header)
    }
}

fn quarter_label(m: MonthIndex) -> String {
    format!("{:04}-Q{}", m.year(), m.quarter())
}

/// Renders the report. Identical artifacts give identical bytes.
pub fn emit_report(a: &CycleArtifacts) -> Result<String> {
    let ingest = &a.ingest;
    let fc = &a.adjusted.forecast;
    let ewa = &a.ewa.report;
    let actuals = ingest.actuals();
    let evaluated = ewa.status == EwaStatus::Evaluated;
    let step1 = ewa.step1.as_ref();

    let mut months: Vec<MonthIndex> = fc.months.iter().collect();
    if let Some(s) = step1 {
        months.extend(s.months.iter().copied());
    }
    months.sort();
    months.dedup();

    let mut out = Out {
        done: Vec::new(),
        w: writer(),
    };
    out.row(MAIN_HEADER)?;
    for m in &months {
        let actual = if *m < ingest.cycle {
            actuals.get(*m)
        } else {
            None
        };
        let idx = fc.index_of(*m);
        let best = idx.map(|i| fc.best_fit[i]);
        let ape = match (actual, best) {
            (Some(a), Some(b)) if a != 0.0 => Some(((a - b) / a * 100.0).abs()),
            _ => None,
        };
        let pos = step1.and_then(|s| s.months.iter().position(|x| x == m));
        let in_window = evaluated && pos.is_some();
        let mut notes: Vec<String> = a
            .adjusted
            .applied
            .iter()
            .filter(|adj| adj.months.contains(m))
            .map(|adj| format!("{} x{:.4}", adj.rule, adj.factor))
            .collect();
        let flags = a.analysis.flags.annotation(*m);
        if !flags.is_empty() {
            notes.push(flags);
        }
        out.row([
            m.to_string(),
            opt(actual),
            opt(best),
            opt(idx.map(|i| fc.lci[i])),
            opt(idx.map(|i| fc.uci[i])),
            opt(ape),
            opt(pos.and_then(|i| step1.map(|s| s.deviation[i]))),
            opt(pos.and_then(|i| step1.and_then(|s| s.pad[i]))),
            ewa.color_at(*m)
                .map(|c| c.name().to_string())
                .unwrap_or_default(),
            if in_window {
                ewa.score.to_string()
            } else {
                String::new()
            },
            if in_window {
                opt(ewa.projection)
            } else {
                String::new()
            },
            if in_window {
                ewa.alert.name().to_string()
            } else {
                String::new()
            },
            if in_window {
                ewa.recommendation.name().to_string()
            } else {
                String::new()
            },
            notes.join(";"),
        ])?;
    }

    let mut quarters: BTreeMap<String, (f64, f64, f64, usize)> = BTreeMap::new();
    for (i, m) in fc
        .months
        .iter()
        .enumerate()
        .filter(|(_, m)| *m >= ingest.cycle)
    {
        let q = quarters.entry(quarter_label(m)).or_default();
        q.0 += fc.best_fit[i];
        q.1 += fc.lci[i];
        q.2 += fc.uci[i];
        q.3 += 1;
    }
    for (label, (b, l, u, n)) in &quarters {
        let mut row = vec![label.clone(), String::new(), num(*b), num(*l), num(*u)];
        row.resize(MAIN_HEADER.len() - 1, String::new());
        row.push(format!("quarter subtotal ({n} months)"));
        out.row(row)?;
    }

    out.section(SECTIONS[0].0, SECTIONS[0].1)?;
    for r in &a.train.leaderboard.rows {
        out.row([
            r.algorithm.clone(),
            num(r.mape_best_fit),
            num(r.mape_lci),
            num(r.mape_uci),
            num(r.correlation),
        ])?;
    }

    out.section(SECTIONS[1].0, SECTIONS[1].1)?;
    for s in &a.forecast.stats {
        out.row([
            s.algorithm.clone(),
            opt(s.cum_sum_mean),
            opt(s.cum_sum_sd),
            s.mape_score.to_string(),
            opt(s.projection),
        ])?;
    }

    out.section(SECTIONS[2].0, SECTIONS[2].1)?;
    let an = &a.analysis;
    let tr = &a.train;
    let mut kv: Vec<(String, String)> = vec![
        ("generation".into(), ingest.generation.clone()),
        ("cycle".into(), ingest.cycle.to_string()),
        ("latest_data_month".into(), ingest.latest_month.to_string()),
        ("matched_generation".into(), an.genealogy.generation.clone()),
        ("genealogy_score".into(), num(an.genealogy.score)),
        ("shift_months".into(), an.shift.to_string()),
        ("analog_fit_r".into(), opt(analog_fit(an))),
    ];
    for n in &an.normalization {
        kv.push((format!("normalization_{}", n.feature), num(n.factor)));
    }
    kv.extend([
        ("selected_predictors".into(), an.selected.join(";")),
        (
            "selection_note".into(),
            an.selection_note.clone().unwrap_or_default(),
        ),
        ("ramp_up".into(), an.phases.ramp_up.to_string()),
        ("plateau".into(), an.phases.plateau.to_string()),
        ("ramp_down".into(), an.phases.ramp_down.to_string()),
        ("train_months".into(), tr.train_months.to_string()),
        ("test_months".into(), tr.test_months.to_string()),
        ("best_model".into(), fc.model.kind.label().to_string()),
        ("test_mape".into(), num(fc.test_mape)),
        ("test_correlation".into(), num(fc.test_correlation)),
        ("adjustments".into(), fc.adjustments.join(";")),
        ("ewa_status".into(), ewa.status.name().to_string()),
        (
            "previous_cycle".into(),
            a.ewa
                .previous_cycle
                .map(|m| m.to_string())
                .unwrap_or_default(),
        ),
    ]);
    if evaluated {
        let s1 = step1.expect("evaluated");
        let s2 = ewa.step2.as_ref().expect("evaluated");
        kv.extend([
            (
                "step1_cumulative_deviation".into(),
                num(s1.cumulative_deviation),
            ),
            ("step1_window_pad".into(), num(s1.window_pad)),
            ("step2_window_pad".into(), num(s2.window_pad)),
            ("step2_alert".into(), s2.alert.name().to_string()),
            ("steps_disagree".into(), ewa.steps_disagree.to_string()),
            ("alert".into(), ewa.alert.name().to_string()),
            (
                "recommendation".into(),
                ewa.recommendation.name().to_string(),
            ),
            ("score".into(), ewa.score.to_string()),
        ]);
    }
    kv.push(("projection".into(), opt(ewa.projection)));
    kv.push(("cum_sum_mean".into(), opt(ewa.six_month_stats.map(|s| s.0))));
    kv.push(("cum_sum_sd".into(), opt(ewa.six_month_stats.map(|s| s.1))));
    for (f, msg) in &tr.failures {
        kv.push((format!("failed_{f}"), msg.clone()));
    }
    for (k, v) in kv {
        out.row([k, v])?;
    }

    out.section(SECTIONS[3].0, SECTIONS[3].1)?;
    for r in &an.correlation.rows {
        out.row([
            r.predictor.clone(),
            r.target.clone(),
            num(r.pearson_r),
            r.strength.name().to_string(),
        ])?;
    }

    out.section(SECTIONS[4].0, SECTIONS[4].1)?;
    for g in &a.prepared.generations {
        for rep in &g.outliers {
            for f in &rep.flagged {
                out.row([
                    g.series.generation.clone(),
                    rep.feature.clone(),
                    f.month.to_string(),
                    num(f.value),
                    num(f.band_low),
                    num(f.band_high),
                    format!("{:?}", rep.action).to_lowercase(),
                ])?;
            }
        }
    }

    out.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub month_rows: usize,
    pub quarter_rows: usize,
    pub section_rows: BTreeMap<String, usize>,
    pub cycle: BTreeMap<String, String>,
}

fn invalid(line: usize, msg: impl Into<String>) -> Error {
    Error::Row {
        file: "report".into(),
        line: line as u64,
        message: msg.into(),
    }
}

fn parse_opt_num(cell: &str, line: usize, col: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| invalid(line, format!("{col} `{cell}` is not a number")))
}

fn is_quarter(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 7
        && b[..4].iter().all(u8::is_ascii_digit)
        && &s[4..6] == "-Q"
        && (b'1'..=b'4').contains(&b[6])
}

/// Checks the report layout, headers, field counts and cell types.
pub fn validate_report(text: &str) -> Result<ReportSummary> {
    let blocks: Vec<&str> = text.split("\n\n").collect();
    if blocks.len() != SECTIONS.len() + 1 {
        return Err(invalid(
            0,
            format!(
                "expected {} blocks, found {}",
                SECTIONS.len() + 1,
                blocks.len()
            ),
        ));
    }
    let read = |block: &str| -> Result<Vec<csv::StringRecord>> {
        csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(block.as_bytes())
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| invalid(0, e.to_string()))
    };

    let main = read(blocks[0])?;
    if main.is_empty() || main[0].iter().ne(MAIN_HEADER.iter().copied()) {
        return Err(invalid(
            1,
            format!("main header must be `{}`", MAIN_HEADER.join(",")),
        ));
    }
    let (mut month_rows, mut quarter_rows) = (0, 0);
    let mut last_month: Option<MonthIndex> = None;
    for (i, r) in main.iter().enumerate().skip(1) {
        let line = i + 1;
        if r.len() != MAIN_HEADER.len() {
            return Err(invalid(
                line,
                format!("expected {} fields, found {}", MAIN_HEADER.len(), r.len()),
            ));
        }
        if is_quarter(&r[0]) {
            quarter_rows += 1;
        } else {
            let m: MonthIndex = r[0]
                .parse()
                .map_err(|e: Error| invalid(line, e.to_string()))?;
            if quarter_rows > 0 || last_month.is_some_and(|p| p >= m) {
                return Err(invalid(
                    line,
                    "month rows must be increasing and precede quarter rows",
                ));
            }
            last_month = Some(m);
            month_rows += 1;
        }
        let cols = [
            "actual",
            "best_fit",
            "lci",
            "uci",
            "mape",
            "deviation",
            "pad",
            "score",
            "projection",
        ];
        let idx = [1, 2, 3, 4, 5, 6, 7, 9, 10];
        let mut v = [None; 9];
        for (k, (&c, name)) in idx.iter().zip(cols).enumerate() {
            v[k] = parse_opt_num(&r[c], line, name)?;
        }
        if let (Some(b), Some(l), Some(u)) = (v[1], v[2], v[3]) {
            if !(0.0 <= l && l <= b + 1e-9 && b <= u + 1e-9) {
                return Err(invalid(line, "need 0 <= lci <= best_fit <= uci"));
            }
        }
        if v.iter().take(5).flatten().any(|x| *x < 0.0) {
            return Err(invalid(line, "negative quantity"));
        }
        if !["", "Red", "Yellow", "Green"].contains(&&r[8]) {
            return Err(invalid(line, format!("unknown color `{}`", &r[8])));
        }
        if !["", "None", "OverForecast", "UnderForecast"].contains(&&r[11]) {
            return Err(invalid(line, format!("unknown alert `{}`", &r[11])));
        }
        if !["", "UseBestFit", "UseLCI", "UseUCI", "RetrainModel"].contains(&&r[12]) {
            return Err(invalid(
                line,
                format!("unknown recommendation `{}`", &r[12]),
            ));
        }
    }
    if month_rows == 0 {
        return Err(invalid(2, "no month rows"));
    }

    let mut section_rows = BTreeMap::new();
    let mut cycle = BTreeMap::new();
    for (block, (name, header)) in blocks[1..].iter().zip(SECTIONS) {
        let block = block.trim_end_matches('\n');
        let (title, body) = block.split_once('\n').unwrap_or((block, ""));
        if title != format!("# {name}") {
            return Err(invalid(
                0,
                format!("expected section `# {name}`, found `{title}`"),
            ));
        }
        let rows = read(body)?;
        if rows.is_empty() || rows[0].iter().ne(header.iter().copied()) {
            return Err(invalid(
                0,
                format!("section {name}: header must be `{}`", header.join(",")),
            ));
        }
        for r in &rows[1..] {
            if r.len() != header.len() {
                return Err(invalid(
                    0,
                    format!(
                        "section {name}: expected {} fields, found {}",
                        header.len(),
                        r.len()
                    ),
                ));
            }
            match name {
                "leaderboard" => {
                    for c in 1..5 {
                        if parse_opt_num(&r[c], 0, header[c])?.is_none() {
                            return Err(invalid(
                                0,
                                format!("leaderboard {} missing {}", &r[0], header[c]),
                            ));
                        }
                    }
                }
                "ewa_stats" => {
                    for c in [1, 2, 4] {
                        parse_opt_num(&r[c], 0, header[c])?;
                    }
                    r[3].parse::<i64>().map_err(|_| {
                        invalid(0, format!("mape_score `{}` is not an integer", &r[3]))
                    })?;
                }
                "cycle" => {
                    cycle.insert(r[0].to_string(), r[1].to_string());
                }
                "correlation" => {
                    parse_opt_num(&r[2], 0, "pearson_r")?;
                    if !["Weak", "Medium", "Strong"].contains(&&r[3]) {
                        return Err(invalid(0, format!("unknown strength `{}`", &r[3])));
                    }
                }
                _ => {
                    r[2].parse::<MonthIndex>()?;
                }
            }
        }
        section_rows.insert(name.to_string(), rows.len() - 1);
    }
    if section_rows["leaderboard"] == 0 {
        return Err(invalid(0, "empty leaderboard"));
    }
    for key in [
        "generation",
        "cycle",
        "matched_generation",
        "best_model",
        "ewa_status",
    ] {
        if !cycle.contains_key(key) {
            return Err(invalid(0, format!("cycle section lacks `{key}`")));
        }
    }
    Ok(ReportSummary {
        month_rows,
        quarter_rows,
        section_rows,
        cycle,
    })
}
