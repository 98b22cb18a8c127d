//! Challenge CSV formats and report rendering.
//!
//! Numbers are written in shortest round-trip form, so parsing a written
//! file reproduces the original values. Input accepts LF or CRLF; output
//! is LF.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::detection::{Detection, GroundTruthSet, PredictionSet};
use crate::geometry::BoundingBox;
use crate::metric::{score_coefficient, ScoreReport};

const PREDICTIONS_HEADER: &str = "patientId,PredictionString";
const GROUND_TRUTH_HEADER: &str = "patientId,x,y,width,height,Target";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("line {line}: invalid box: {message}")]
    InvalidBox { line: usize, message: String },
    #[error("line {line}: duplicate image {image_id:?}")]
    DuplicateImage { line: usize, image_id: String },
    #[error("line {line}: image {image_id:?} has both positive and negative rows")]
    ConflictingTarget { line: usize, image_id: String },
}

/// Numbered non-empty rows, line endings stripped. Line numbers count every
/// physical line so errors point at the real file location.
fn rows(input: &str) -> impl Iterator<Item = (usize, &str)> {
    input
        .split('\n')
        .enumerate()
        .map(|(i, line)| (i + 1, line.strip_suffix('\r').unwrap_or(line)))
        .filter(|(_, line)| !line.is_empty())
}

fn expect_header(row: Option<(usize, &str)>, want: &str) -> Result<(), CsvError> {
    match row {
        Some((_, got)) if got == want => Ok(()),
        Some((line, got)) => Err(CsvError::MalformedRow {
            line,
            message: format!("expected header {want:?}, got {got:?}"),
        }),
        None => Err(CsvError::MalformedRow {
            line: 1,
            message: format!("missing header {want:?}"),
        }),
    }
}

fn parse_number(token: &str, line: usize) -> Result<f64, CsvError> {
    token.trim().parse().map_err(|_| CsvError::MalformedRow {
        line,
        message: format!("expected a number, got {token:?}"),
    })
}

/// Parses `patientId,PredictionString` rows. The prediction string is a
/// space-separated run of `confidence x y width height` groups with (x, y)
/// the top-left corner; an empty string registers the image with zero
/// detections. Every detection is tagged with `model_id`.
pub fn parse_predictions_csv(
    input: &str,
    model_id: impl Into<String>,
) -> Result<PredictionSet, CsvError> {
    let mut set = PredictionSet::new(model_id);
    let mut lines = rows(input);
    expect_header(lines.next(), PREDICTIONS_HEADER)?;
    for (line, row) in lines {
        let (image_id, rest) = row.split_once(',').ok_or_else(|| CsvError::MalformedRow {
            line,
            message: "expected `patientId,PredictionString`".into(),
        })?;
        if image_id.is_empty() {
            return Err(CsvError::MalformedRow {
                line,
                message: "empty patient id".into(),
            });
        }
        if rest.contains(',') {
            return Err(CsvError::MalformedRow {
                line,
                message: "expected 2 fields".into(),
            });
        }
        if set.entries.contains_key(image_id) {
            return Err(CsvError::DuplicateImage {
                line,
                image_id: image_id.to_string(),
            });
        }

        let tokens: Vec<&str> = rest.split_whitespace().collect();
        if !tokens.len().is_multiple_of(5) {
            return Err(CsvError::MalformedRow {
                line,
                message: format!(
                    "prediction string holds {} values, expected groups of 5",
                    tokens.len()
                ),
            });
        }
        let mut dets = Vec::with_capacity(tokens.len() / 5);
        for group in tokens.chunks(5) {
            // Ensembled clusters larger than n_scale legitimately carry
            // confidences above 1, so only non-finite values are rejected.
            let score = parse_number(group[0], line)?;
            if !score.is_finite() {
                return Err(CsvError::MalformedRow {
                    line,
                    message: format!("confidence {} is not finite", group[0]),
                });
            }
            let x = parse_number(group[1], line)?;
            let y = parse_number(group[2], line)?;
            let width = parse_number(group[3], line)?;
            let height = parse_number(group[4], line)?;
            let bbox = BoundingBox::from_xywh(x, y, width, height).map_err(|e| {
                CsvError::InvalidBox {
                    line,
                    message: e.to_string(),
                }
            })?;
            dets.push(Detection::new(bbox, score, set.model_id.clone()));
        }
        set.entries.insert(image_id.to_string(), dets);
    }
    Ok(set)
}

/// One row per image in ascending id order, detections in descending score
/// order (ties by box order).
pub fn write_predictions_csv(set: &PredictionSet) -> String {
    let mut out = String::from(PREDICTIONS_HEADER);
    out.push('\n');
    for (image_id, dets) in &set.entries {
        let mut ordered: Vec<&Detection> = dets.iter().collect();
        ordered.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.bbox.lex_cmp(&b.bbox))
        });
        let groups: Vec<String> = ordered
            .iter()
            .map(|d| {
                let b = &d.bbox;
                format!(
                    "{} {} {} {} {}",
                    d.score,
                    b.x_min(),
                    b.y_min(),
                    b.width(),
                    b.height()
                )
            })
            .collect();
        let _ = writeln!(out, "{},{}", image_id, groups.join(" "));
    }
    out
}

/// Parses `patientId,x,y,width,height,Target` rows. `Target=1` rows add a
/// box; `Target=0` rows register a negative image, coordinates ignored.
/// Positive rows accumulate per image, but an image cannot be both.
pub fn parse_ground_truth_csv(input: &str) -> Result<GroundTruthSet, CsvError> {
    let mut set = GroundTruthSet::new();
    let mut negatives: BTreeSet<String> = BTreeSet::new();
    let mut lines = rows(input);
    expect_header(lines.next(), GROUND_TRUTH_HEADER)?;
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 6 {
            return Err(CsvError::MalformedRow {
                line,
                message: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let image_id = fields[0];
        if image_id.is_empty() {
            return Err(CsvError::MalformedRow {
                line,
                message: "empty patient id".into(),
            });
        }
        match fields[5].trim() {
            "1" => {
                if negatives.contains(image_id) {
                    return Err(CsvError::ConflictingTarget {
                        line,
                        image_id: image_id.to_string(),
                    });
                }
                let x = parse_number(fields[1], line)?;
                let y = parse_number(fields[2], line)?;
                let width = parse_number(fields[3], line)?;
                let height = parse_number(fields[4], line)?;
                let bbox = BoundingBox::from_xywh(x, y, width, height).map_err(|e| {
                    CsvError::InvalidBox {
                        line,
                        message: e.to_string(),
                    }
                })?;
                set.entries.entry(image_id.to_string()).or_default().push(bbox);
            }
            "0" => {
                if set.entries.get(image_id).is_some_and(|boxes| !boxes.is_empty()) {
                    return Err(CsvError::ConflictingTarget {
                        line,
                        image_id: image_id.to_string(),
                    });
                }
                set.entries.entry(image_id.to_string()).or_default();
                negatives.insert(image_id.to_string());
            }
            other => {
                return Err(CsvError::MalformedRow {
                    line,
                    message: format!("Target must be 0 or 1, got {other:?}"),
                });
            }
        }
    }
    Ok(set)
}

/// One row per box for positive images, one `Target=0` row for negatives,
/// in ascending image-id order.
pub fn write_ground_truth_csv(set: &GroundTruthSet) -> String {
    let mut out = String::from(GROUND_TRUTH_HEADER);
    out.push('\n');
    for (image_id, boxes) in &set.entries {
        if boxes.is_empty() {
            let _ = writeln!(out, "{image_id},,,,,0");
        } else {
            for b in boxes {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},1",
                    image_id,
                    b.x_min(),
                    b.y_min(),
                    b.width(),
                    b.height()
                );
            }
        }
    }
    out
}

/// Output shapes for [`write_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Dataset mean to four decimals plus image counts.
    SummaryText,
    /// One JSON object per image.
    JsonLines,
    /// One row per image with per-threshold tally columns.
    Csv,
}

/// Renders a report deterministically: identical reports give identical
/// bytes.
pub fn write_report(report: &ScoreReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::SummaryText => summary_text(report),
        ReportFormat::JsonLines => json_lines(report),
        ReportFormat::Csv => report_csv(report),
    }
}

fn summary_text(report: &ScoreReport) -> String {
    let excluded = report.per_image.len() - report.included_count;
    format!(
        "mC: {:.4}\nimages included: {}\nimages excluded: {}\n",
        report.mc_dataset, report.included_count, excluded
    )
}

fn json_lines(report: &ScoreReport) -> String {
    let mut out = String::new();
    for img in &report.per_image {
        let thresholds: Vec<serde_json::Value> = img
            .tallies
            .iter()
            .map(|tally| {
                serde_json::json!({
                    "threshold": tally.threshold,
                    "tp": tally.true_positives,
                    "fp": tally.false_positives,
                    "fn": tally.false_negatives,
                    "c": score_coefficient(tally).ok(),
                })
            })
            .collect();
        let record = serde_json::json!({
            "image_id": img.image_id,
            "included": img.included(),
            "c": img.score,
            "thresholds": thresholds,
        });
        let _ = writeln!(out, "{record}");
    }
    out
}

fn report_csv(report: &ScoreReport) -> String {
    let thresholds: Vec<f64> = report
        .per_image
        .first()
        .map(|img| img.tallies.iter().map(|t| t.threshold).collect())
        .unwrap_or_default();
    let mut out = String::from("image_id,included,c");
    for t in &thresholds {
        let _ = write!(out, ",c@{t},tp@{t},fp@{t},fn@{t}");
    }
    out.push('\n');
    for img in &report.per_image {
        let c = img.score.map(|v| v.to_string()).unwrap_or_default();
        let _ = write!(out, "{},{},{}", img.image_id, img.included(), c);
        for tally in &img.tallies {
            let c_t = score_coefficient(tally)
                .map(|v| v.to_string())
                .unwrap_or_default();
            let _ = write!(
                out,
                ",{},{},{},{}",
                c_t, tally.true_positives, tally.false_positives, tally.false_negatives
            );
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{dataset_score, image_score, ImageScore, MetricConfig};

    #[test]
    fn prediction_row_becomes_a_corner_box() {
        let set = parse_predictions_csv("patientId,PredictionString\np1,0.9 10 10 50 80\n", "m")
            .unwrap();
        let dets = set.detections("p1");
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].score, 0.9);
        let b = dets[0].bbox;
        assert_eq!((b.x_min(), b.y_min(), b.x_max(), b.y_max()), (10.0, 10.0, 60.0, 90.0));
        assert_eq!(dets[0].model_id, "m");
    }

    #[test]
    fn empty_prediction_string_registers_the_image() {
        let set = parse_predictions_csv("patientId,PredictionString\np2,\n", "m").unwrap();
        assert!(set.entries.contains_key("p2"));
        assert!(set.detections("p2").is_empty());
    }

    #[test]
    fn short_tuple_is_malformed() {
        let err = parse_predictions_csv("patientId,PredictionString\np3,0.9 10 10 50\n", "m")
            .unwrap_err();
        assert!(matches!(err, CsvError::MalformedRow { line: 2, .. }));
    }

    #[test]
    fn ensembled_confidence_above_one_is_accepted() {
        let set = parse_predictions_csv("patientId,PredictionString\np1,1.45 10 10 50 80\n", "m")
            .unwrap();
        assert_eq!(set.detections("p1")[0].score, 1.45);
        let err = parse_predictions_csv("patientId,PredictionString\np1,inf 10 10 50 80\n", "m")
            .unwrap_err();
        assert!(matches!(err, CsvError::MalformedRow { line: 2, .. }));
    }

    #[test]
    fn crlf_input_parses() {
        let set = parse_predictions_csv("patientId,PredictionString\r\np1,0.9 10 10 50 80\r\n", "m")
            .unwrap();
        assert_eq!(set.detections("p1").len(), 1);
    }

    #[test]
    fn written_predictions_round_trip_exactly() {
        let text = "patientId,PredictionString\np1,0.9 10 10 50 80\np2,\n";
        let set = parse_predictions_csv(text, "m").unwrap();
        assert_eq!(write_predictions_csv(&set), text);
    }

    #[test]
    fn empty_set_writes_header_only() {
        assert_eq!(
            write_predictions_csv(&PredictionSet::new("m")),
            "patientId,PredictionString\n"
        );
    }

    #[test]
    fn stronger_detection_is_written_first() {
        let text = "patientId,PredictionString\np1,0.4 100 100 10 10 0.9 10 10 50 80\n";
        let set = parse_predictions_csv(text, "m").unwrap();
        assert_eq!(
            write_predictions_csv(&set),
            "patientId,PredictionString\np1,0.9 10 10 50 80 0.4 100 100 10 10\n"
        );
    }

    #[test]
    fn ground_truth_rows_accumulate() {
        let text = "patientId,x,y,width,height,Target\np1,10,10,50,80,1\np2,,,,,0\np1,0,0,5,5,1\n";
        let set = parse_ground_truth_csv(text).unwrap();
        assert_eq!(set.boxes("p1").len(), 2);
        let b = set.boxes("p1")[0];
        assert_eq!((b.x_min(), b.y_min(), b.x_max(), b.y_max()), (10.0, 10.0, 60.0, 90.0));
        assert!(set.entries.contains_key("p2"));
        assert!(set.boxes("p2").is_empty());
    }

    #[test]
    fn mixed_targets_for_one_image_conflict() {
        let text = "patientId,x,y,width,height,Target\np1,10,10,50,80,1\np1,,,,,0\n";
        let err = parse_ground_truth_csv(text).unwrap_err();
        assert_eq!(
            err,
            CsvError::ConflictingTarget {
                line: 3,
                image_id: "p1".into()
            }
        );
    }

    #[test]
    fn ground_truth_round_trips() {
        let text = "patientId,x,y,width,height,Target\np1,10,10,50,80,1\np2,,,,,0\n";
        let set = parse_ground_truth_csv(text).unwrap();
        assert_eq!(write_ground_truth_csv(&set), text);
    }

    #[test]
    fn summary_prints_four_decimals() {
        let report = ScoreReport {
            per_image: vec![ImageScore {
                image_id: "p1".into(),
                tallies: vec![],
                score: Some(0.23104),
            }],
            mc_dataset: 0.23104,
            included_count: 1,
        };
        let text = write_report(&report, ReportFormat::SummaryText);
        assert!(text.contains("0.2310"));
        assert!(text.contains("images included: 1"));
    }

    fn half_overlap_report() -> ScoreReport {
        let gt = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let pred = Detection::new(BoundingBox::new(0.0, 0.0, 10.0, 5.0).unwrap(), 0.9, "m");
        let mut preds = PredictionSet::new("m");
        preds.entries.insert("p1".into(), vec![pred]);
        let mut gts = GroundTruthSet::new();
        gts.entries.insert("p1".into(), vec![gt]);
        dataset_score(&preds, &gts, &MetricConfig::default()).unwrap()
    }

    #[test]
    fn json_lines_has_one_record_per_image() {
        let text = write_report(&half_overlap_report(), ReportFormat::JsonLines);
        let records: Vec<&str> = text.lines().collect();
        assert_eq!(records.len(), 1);
        let value: serde_json::Value = serde_json::from_str(records[0]).unwrap();
        assert_eq!(value["image_id"], "p1");
        assert_eq!(value["c"], 0.375);
        assert_eq!(value["thresholds"].as_array().unwrap().len(), 8);
        assert_eq!(value["thresholds"][0]["c"], 1.0);
        assert_eq!(value["thresholds"][7]["c"], 0.0);
    }

    #[test]
    fn csv_report_is_one_row_per_image() {
        let text = write_report(&half_overlap_report(), ReportFormat::Csv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("image_id,included,c,c@0.4,tp@0.4"));
        assert!(lines[1].starts_with("p1,true,0.375,"));
    }

    #[test]
    fn excluded_image_has_no_score_cell() {
        let img = image_score("p0", &[], &[], &MetricConfig::default());
        let report = ScoreReport {
            per_image: vec![img],
            mc_dataset: 0.0,
            included_count: 0,
        };
        let json = write_report(&report, ReportFormat::JsonLines);
        let value: serde_json::Value = serde_json::from_str(json.lines().next().unwrap()).unwrap();
        assert_eq!(value["included"], false);
        assert_eq!(value["c"], serde_json::Value::Null);
    }
}
