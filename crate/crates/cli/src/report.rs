//! Summaries over result CSVs: per-group row counts, ratio extremes and
//! means, and per-measure means.
//!
//! Grouping is by column values (default `policy,noise`), so sweeping a
//! noise parameter and grouping by `noise` yields the error-versus-ratio
//! curve directly. All aggregation is exact; decimals are rendered only for
//! display, with the exact value alongside.

use std::collections::BTreeMap;

use precsched::rational::{decimal_string, format_rat, parse_rat, Rat};

use crate::error::CliError;

#[derive(Debug, Default)]
struct GroupAcc {
    rows: usize,
    errors: usize,
    max_ratio: Option<Rat>,
    ratio_sum: Rat,
    ratio_count: usize,
    /// Per-measure (sum, finite count, infinite count).
    measures: BTreeMap<String, (Rat, usize, usize)>,
}

fn zero() -> Rat {
    Rat::from_integer(0.into())
}

/// Builds the text summary for a results CSV.
pub fn summarize(csv_text: &str, group_by: &[String], precision: usize) -> Result<String, CliError> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr.headers().map_err(|e| CliError::Data(e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut key_cols = Vec::new();
    for key in group_by {
        let idx = column(key).ok_or_else(|| {
            CliError::InvalidSpec(format!("results have no column named '{key}'"))
        })?;
        key_cols.push((key.clone(), idx));
    }
    let status_col = column("status");
    let ratio_col = column("ratio");
    let errors_col = column("errors");

    let mut groups: BTreeMap<String, GroupAcc> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::Data(e.to_string()))?;
        let key = key_cols
            .iter()
            .map(|(name, idx)| format!("{name}={}", record.get(*idx).unwrap_or("")))
            .collect::<Vec<_>>()
            .join(" ");
        let acc = groups.entry(key).or_default();
        acc.rows += 1;
        if let Some(idx) = status_col {
            if record.get(idx).map(|s| s != "ok").unwrap_or(false) {
                acc.errors += 1;
            }
        }
        if let Some(idx) = ratio_col {
            let field = record.get(idx).unwrap_or("");
            if !field.is_empty() {
                let ratio = parse_rat(field).map_err(|e| CliError::Data(e.to_string()))?;
                acc.ratio_sum += &ratio;
                acc.ratio_count += 1;
                if acc.max_ratio.as_ref().map(|m| ratio > *m).unwrap_or(true) {
                    acc.max_ratio = Some(ratio);
                }
            }
        }
        if let Some(idx) = errors_col {
            for pair in record.get(idx).unwrap_or("").split(';').filter(|p| !p.is_empty()) {
                let Some((name, value)) = pair.split_once('=') else { continue };
                let slot = acc.measures.entry(name.to_string()).or_insert((zero(), 0, 0));
                if value == "inf" {
                    slot.2 += 1;
                } else if let Ok(v) = parse_rat(value) {
                    slot.0 += &v;
                    slot.1 += 1;
                }
            }
        }
    }

    let show = |r: &Rat| format!("{} ({})", decimal_string(r, precision), format_rat(r));
    let mut out = String::new();
    out.push_str("group\trows\terrors\tmax_ratio\tmean_ratio\tmeasures\n");
    for (key, acc) in &groups {
        let max = acc.max_ratio.as_ref().map(&show).unwrap_or_default();
        let mean = if acc.ratio_count > 0 {
            show(&(&acc.ratio_sum / Rat::from_integer(acc.ratio_count.into())))
        } else {
            String::new()
        };
        let measures = acc
            .measures
            .iter()
            .map(|(name, (sum, finite, infinite))| {
                let mut cell = if *finite > 0 {
                    format!("mean_{name}={}", show(&(sum / Rat::from_integer((*finite).into()))))
                } else {
                    format!("mean_{name}=", )
                };
                if *infinite > 0 {
                    cell.push_str(&format!(" inf_{name}={infinite}"));
                }
                cell
            })
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&format!(
            "{key}\t{}\t{}\t{max}\t{mean}\t{measures}\n",
            acc.rows, acc.errors
        ));
    }
    if groups.is_empty() {
        out.push_str("(no rows)\n");
    }
    Ok(out)
}

// ───────────────────────── tests ─────────────────────────
