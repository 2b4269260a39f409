//! Report documents and their emission formats.
//!
//! Reports keep every number at full precision. Rounding to three decimals
//! happens only in the markdown rendering; the delimited and structured
//! formats carry the exact values, and the structured form parses back to an
//! equal [`Report`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chowliu::ValidationReport;
use crate::dependence::DependenceMatrix;
use crate::entropy::{profile, EntropyProfile};
use crate::error::{Error, Result};
use crate::guesswork::{format_rate, GuessworkTable};
use crate::numeric::compensated_sum;
use crate::quantize::BinnedChannel;
use crate::sweep::{SensitivityCurve, SizeMean, SubsetResult, SweepFailure};

pub const SCHEMA: &str = "sensor-entropy.report.v1";

/// Shortest text that parses back to the same value.
fn num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Delimited,
    Structured,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" | "delimited" => Ok(Format::Delimited),
            "json" | "structured" => Ok(Format::Structured),
            "md" | "markdown" => Ok(Format::Markdown),
            other => Err(Error::UnsupportedSchema(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub dataset: String,
    pub binning: String,
    pub timestamp: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRow {
    pub channel: String,
    pub bins: usize,
    pub profile: EntropyProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleSensorTable {
    pub rows: Vec<ChannelRow>,
    pub mean: EntropyProfile,
    /// Sample standard deviation across channels (zero for one channel).
    pub sd: EntropyProfile,
}

impl SingleSensorTable {
    pub fn new(rows: Vec<ChannelRow>) -> Self {
        let n = rows.len() as f64;
        let column = |f: fn(&EntropyProfile) -> f64| -> (f64, f64) {
            if rows.is_empty() {
                return (0.0, 0.0);
            }
            let mean = compensated_sum(rows.iter().map(|r| f(&r.profile))) / n;
            let var = if rows.len() > 1 {
                compensated_sum(rows.iter().map(|r| (f(&r.profile) - mean).powi(2))) / (n - 1.0)
            } else {
                0.0
            };
            (mean, var.sqrt())
        };
        let cols = [
            column(|p| p.h0),
            column(|p| p.h1),
            column(|p| p.h2),
            column(|p| p.hmin),
        ];
        SingleSensorTable {
            mean: EntropyProfile::from_orders(cols.map(|c| c.0)),
            sd: EntropyProfile::from_orders(cols.map(|c| c.1)),
            rows,
        }
    }

    /// Profiles every binned channel on its present values.
    pub fn from_channels(channels: &[BinnedChannel]) -> Result<Self> {
        let rows = channels
            .iter()
            .map(|c| {
                Ok(ChannelRow {
                    channel: c.name.clone(),
                    bins: c.bin_count(),
                    profile: profile(&c.pmf()?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(rows))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRanking {
    /// All channels of the sweep; a subset equal to it is labelled
    /// "All sensors".
    pub universe: Vec<String>,
    pub results: Vec<SubsetResult>,
    pub failures: Vec<SweepFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationTable {
    pub rows: Vec<ValidationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeansCurve {
    pub rows: Vec<SizeMean>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Payload {
    SingleSensorTable(SingleSensorTable),
    SubsetRanking(SubsetRanking),
    ValidationTable(ValidationTable),
    DependenceMatrix(DependenceMatrix),
    SensitivityCurve(SensitivityCurve),
    SweepMeansCurve(MeansCurve),
    GuessworkTable(GuessworkTable),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::SingleSensorTable(_) => "single_sensor_table",
            Payload::SubsetRanking(_) => "subset_ranking",
            Payload::ValidationTable(_) => "validation_table",
            Payload::DependenceMatrix(_) => "dependence_matrix",
            Payload::SensitivityCurve(_) => "sensitivity_curve",
            Payload::SweepMeansCurve(_) => "sweep_means_curve",
            Payload::GuessworkTable(_) => "guesswork_table",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub metadata: Metadata,
    #[serde(flatten)]
    pub payload: Payload,
}

impl Report {
    pub fn new(metadata: Metadata, payload: Payload) -> Self {
        Report {
            schema: SCHEMA.to_string(),
            metadata,
            payload,
        }
    }

    /// Parses a structured emission, rejecting other schema versions.
    pub fn from_structured(text: &str) -> Result<Self> {
        let report: Report = serde_json::from_str(text)?;
        if report.schema != SCHEMA {
            return Err(Error::UnsupportedSchema(report.schema));
        }
        Ok(report)
    }

    pub fn emit(&self, format: Format) -> Result<String> {
        match format {
            Format::Structured => {
                let mut s = serde_json::to_string_pretty(self)?;
                s.push('\n');
                Ok(s)
            }
            Format::Delimited => self.delimited(),
            Format::Markdown => Ok(self.markdown()),
        }
    }

    fn delimited(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let profile_cols = |p: &EntropyProfile| p.orders().map(num);
        match &self.payload {
            Payload::SingleSensorTable(t) => {
                w.write_record(["channel", "bins", "h0", "h1", "h2", "hmin"])?;
                for r in &t.rows {
                    let mut rec = vec![r.channel.clone(), r.bins.to_string()];
                    rec.extend(profile_cols(&r.profile));
                    w.write_record(&rec)?;
                }
                if !t.rows.is_empty() {
                    for (label, p) in [("mean", &t.mean), ("sd", &t.sd)] {
                        let mut rec = vec![label.to_string(), String::new()];
                        rec.extend(profile_cols(p));
                        w.write_record(&rec)?;
                    }
                }
            }
            Payload::SubsetRanking(r) => {
                w.write_record(["rank", "subset", "size", "h0", "h1", "h2", "hmin", "gap", "method"])?;
                for (i, res) in r.results.iter().enumerate() {
                    let mut rec = vec![(i + 1).to_string(), res.subset.join(";"), res.size.to_string()];
                    rec.extend(profile_cols(&res.profile));
                    rec.push(num(res.gap));
                    rec.push(format!("{:?}", res.method).to_lowercase());
                    w.write_record(&rec)?;
                }
            }
            Payload::ValidationTable(t) => {
                w.write_record([
                    "subset", "n", "direct_h0", "direct_h1", "direct_h2", "direct_hmin", "chowliu_h0", "chowliu_h1",
                    "chowliu_h2", "chowliu_hmin", "mae", "rel_error_pct",
                ])?;
                for r in &t.rows {
                    let mut rec = vec![r.subset.join(";"), r.n.to_string()];
                    rec.extend(profile_cols(&r.direct));
                    rec.extend(profile_cols(&r.chowliu));
                    rec.push(num(r.mae));
                    rec.push(num(r.rel_error_pct));
                    w.write_record(&rec)?;
                }
            }
            Payload::DependenceMatrix(m) => return Ok(m.to_delimited()),
            Payload::SensitivityCurve(c) => {
                w.write_record(["series", "bins", "h0", "h1", "h2", "hmin"])?;
                for (k, p) in &c.points {
                    let mut rec = vec!["grid".to_string(), k.to_string()];
                    rec.extend(profile_cols(p));
                    w.write_record(&rec)?;
                }
                for (label, m) in [("fd", &c.fd), ("scott", &c.scott)] {
                    if let Some(m) = m {
                        let mut rec = vec![label.to_string(), num(m.mean_bins)];
                        rec.extend(profile_cols(&m.profile));
                        w.write_record(&rec)?;
                    }
                }
            }
            Payload::SweepMeansCurve(c) => {
                w.write_record(["size", "count", "h0", "h1", "h2", "hmin"])?;
                for r in &c.rows {
                    let mut rec = vec![r.size.to_string(), r.count.to_string()];
                    rec.extend(profile_cols(&r.mean));
                    w.write_record(&rec)?;
                }
            }
            Payload::GuessworkTable(t) => {
                let mut header = vec!["hmin".to_string(), "expected_guesses".to_string()];
                header.extend(t.rates.iter().map(|&r| format!("seconds_at_{}", num(r))));
                w.write_record(&header)?;
                for row in &t.rows {
                    let mut rec = vec![num(row.hmin), num(row.expected_guesses)];
                    rec.extend(row.seconds.iter().copied().map(num));
                    w.write_record(&rec)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn markdown(&self) -> String {
        let mut out = String::new();
        let f3 = |v: f64| format!("{v:.3}");
        let profile_cells = |p: &EntropyProfile| p.orders().map(f3).join(" | ");
        let mut table = |header: &[&str], rows: Vec<String>| {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}|", header.iter().map(|_| "---").collect::<Vec<_>>().join("|"));
            for r in rows {
                let _ = writeln!(out, "| {r} |");
            }
        };
        match &self.payload {
            Payload::SingleSensorTable(t) => {
                let mut rows: Vec<String> = t
                    .rows
                    .iter()
                    .map(|r| format!("{} | {} | {}", r.channel, r.bins, profile_cells(&r.profile)))
                    .collect();
                if !t.rows.is_empty() {
                    rows.push(format!("Mean |  | {}", profile_cells(&t.mean)));
                    rows.push(format!("S.D. |  | {}", profile_cells(&t.sd)));
                }
                table(&["Sensor", "Bins", "H0", "H1", "H2", "Hmin"], rows);
            }
            Payload::SubsetRanking(r) => {
                let rows = r
                    .results
                    .iter()
                    .map(|res| {
                        let label = if res.subset == r.universe {
                            "All sensors".to_string()
                        } else {
                            res.subset.join(" + ")
                        };
                        format!("{label} | {} | {} | {}", res.size, profile_cells(&res.profile), f3(res.gap))
                    })
                    .collect();
                table(&["Modality", "#", "H0", "H1", "H2", "Hmin", "H1−Hmin"], rows);
            }
            Payload::ValidationTable(t) => {
                let rows = t
                    .rows
                    .iter()
                    .map(|r| {
                        let pairs: Vec<String> = r
                            .direct
                            .orders()
                            .iter()
                            .zip(r.chowliu.orders())
                            .map(|(d, c)| format!("{} | {}", f3(*d), f3(c)))
                            .collect();
                        format!(
                            "{} | {} | {} | {} | {:.1}",
                            r.subset.join(" + "),
                            r.n,
                            pairs.join(" | "),
                            f3(r.mae),
                            r.rel_error_pct
                        )
                    })
                    .collect();
                table(
                    &[
                        "Modality", "n", "H0", "H0 CL", "H1", "H1 CL", "H2", "H2 CL", "Hmin", "Hmin CL", "MAE", "Rel. err. %",
                    ],
                    rows,
                );
            }
            Payload::DependenceMatrix(m) => {
                let mut header = vec![""];
                header.extend(m.channels.iter().map(String::as_str));
                let rows = m
                    .channels
                    .iter()
                    .zip(&m.values)
                    .map(|(name, row)| {
                        let cells: Vec<String> = row.iter().map(|v| v.map(f3).unwrap_or_default()).collect();
                        format!("{name} | {}", cells.join(" | "))
                    })
                    .collect();
                table(&header, rows);
            }
            Payload::SensitivityCurve(c) => {
                let mut rows: Vec<String> = c
                    .points
                    .iter()
                    .map(|(k, p)| format!("{k} | {}", profile_cells(p)))
                    .collect();
                for (label, m) in [("FD", &c.fd), ("Scott", &c.scott)] {
                    if let Some(m) = m {
                        rows.push(format!("{label} ({:.1}) | {}", m.mean_bins, profile_cells(&m.profile)));
                    }
                }
                table(&["Bins", "H0", "H1", "H2", "Hmin"], rows);
            }
            Payload::SweepMeansCurve(c) => {
                let rows = c
                    .rows
                    .iter()
                    .map(|r| format!("{} | {} | {}", r.size, r.count, profile_cells(&r.mean)))
                    .collect();
                table(&["#", "Subsets", "H0", "H1", "H2", "Hmin"], rows);
            }
            Payload::GuessworkTable(t) => {
                let rate_labels: Vec<String> = t.rates.iter().map(|&r| format!("Time {}", format_rate(r))).collect();
                let mut header = vec!["Hmin", "E[G] (guesses)"];
                header.extend(rate_labels.iter().map(String::as_str));
                let rows = t
                    .rows
                    .iter()
                    .map(|r| format!("{} | {} | {}", r.hmin, r.expected_label, r.time_labels.join(" | ")))
                    .collect();
                table(&header, rows);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guesswork::guesswork_table;
    use crate::sweep::JointMethod;

    fn meta() -> Metadata {
        Metadata {
            dataset: "demo".into(),
            binning: "fd".into(),
            timestamp: "2026-01-01T00:00:00Z".into(),
            tool_version: "0.1.0".into(),
        }
    }

    fn ranking(results: Vec<SubsetResult>) -> Report {
        Report::new(
            meta(),
            Payload::SubsetRanking(SubsetRanking {
                universe: vec!["a".into(), "b".into(), "c".into()],
                results,
                failures: vec![],
            }),
        )
    }

    fn result(names: &[&str], p: [f64; 4]) -> SubsetResult {
        SubsetResult::new(names.iter().map(|s| s.to_string()).collect(), EntropyProfile::from_orders(p), JointMethod::Chowliu)
    }

    #[test]
    fn ranking_markdown_layout() {
        let r = ranking(vec![
            result(&["a", "b", "c"], [48.0611, 25.0894, 17.1159, 11.0078]),
            result(&["a", "c"], [20.0, 10.0, 8.0, 6.5]),
        ]);
        let md = r.emit(Format::Markdown).unwrap();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], "| Modality | # | H0 | H1 | H2 | Hmin | H1−Hmin |");
        assert_eq!(lines[2], "| All sensors | 3 | 48.061 | 25.089 | 17.116 | 11.008 | 14.082 |");
        assert_eq!(lines[3], "| a + c | 2 | 20.000 | 10.000 | 8.000 | 6.500 | 3.500 |");
    }

    #[test]
    fn empty_ranking_is_header_only() {
        let r = ranking(vec![]);
        assert_eq!(r.emit(Format::Markdown).unwrap().lines().count(), 2);
        assert_eq!(r.emit(Format::Delimited).unwrap(), "rank,subset,size,h0,h1,h2,hmin,gap,method\n");
    }

    #[test]
    fn structured_round_trip_and_determinism() {
        let r = ranking(vec![result(&["a", "b"], [1.0 / 3.0, 0.1 + 0.2, 1e-17, 0.0])]);
        let a = r.emit(Format::Structured).unwrap();
        assert_eq!(a, r.emit(Format::Structured).unwrap());
        assert!(a.contains("\"kind\": \"subset_ranking\""));
        assert!(a.contains(SCHEMA));
        assert_eq!(Report::from_structured(&a).unwrap(), r);

        let g = Report::new(meta(), Payload::GuessworkTable(guesswork_table(&[8.0, 24.0], &[1.0, 1e6]).unwrap()));
        assert_eq!(Report::from_structured(&g.emit(Format::Structured).unwrap()).unwrap(), g);
        let bad = a.replace(SCHEMA, "sensor-entropy.report.v0");
        assert!(matches!(Report::from_structured(&bad), Err(Error::UnsupportedSchema(_))));
    }

    #[test]
    fn single_sensor_statistics() {
        let row = |c: &str, h: f64| ChannelRow {
            channel: c.into(),
            bins: 10,
            profile: EntropyProfile::from_orders([h, h, h, h]),
        };
        let t = SingleSensorTable::new(vec![row("x", 1.0), row("y", 2.0), row("z", 6.0)]);
        assert_eq!(t.mean.h1, 3.0);
        assert!((t.sd.h1 - 7f64.sqrt()).abs() < 1e-12);
        let r = Report::new(meta(), Payload::SingleSensorTable(t));
        let md = r.emit(Format::Markdown).unwrap();
        assert!(md.contains("| Mean |  | 3.000 | 3.000 | 3.000 | 3.000 |"));
        assert!(md.contains("| S.D. |  | 2.646 |"));
        let csv = r.emit(Format::Delimited).unwrap();
        assert!(csv.starts_with("channel,bins,h0,h1,h2,hmin\nx,10,1.0,1.0,1.0,1.0\n"));
    }

    #[test]
    fn guesswork_markdown() {
        let r = Report::new(meta(), Payload::GuessworkTable(guesswork_table(&[12.0], &[1.0, 1e3]).unwrap()));
        let md = r.emit(Format::Markdown).unwrap();
        assert_eq!(md.lines().next().unwrap(), "| Hmin | E[G] (guesses) | Time 1/s | Time 10^3/s |");
        assert_eq!(md.lines().nth(2).unwrap(), "| 12 | 2,048 | 34.1 min | 2.05 s |");
    }

    #[test]
    fn format_names() {
        assert_eq!("csv".parse::<Format>().unwrap(), Format::Delimited);
        assert_eq!("json".parse::<Format>().unwrap(), Format::Structured);
        assert_eq!("markdown".parse::<Format>().unwrap(), Format::Markdown);
        assert!("xml".parse::<Format>().is_err());
    }
}
