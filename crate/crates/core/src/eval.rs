//! Confusion matrices, accuracy, Cohen's kappa and report rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Stage;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("malformed report: {0}")]
    Report(String),
}

/// Rows are true stages, columns predicted stages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 4]; 4]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> [u64; 4] {
        self.counts.map(|r| r.iter().sum())
    }

    pub fn col_sums(&self) -> [u64; 4] {
        std::array::from_fn(|j| self.counts.iter().map(|r| r[j]).sum())
    }

    /// Adds another matrix's counts (pooling across recordings).
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().flatten().zip(other.counts.iter().flatten()) {
            *a += b;
        }
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }
}

pub fn confusion(truth: &[Stage], pred: &[Stage]) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::Contract(format!("{} true stages vs {} predictions", truth.len(), pred.len())));
    }
    if truth.is_empty() {
        return Err(EvalError::Contract("no epochs to score".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in truth.iter().zip(pred) {
        cm.counts[t.index()][p.index()] += 1;
    }
    Ok(cm)
}

/// `(p_o - p_e) / (1 - p_e)`. When chance agreement is total (`p_e = 1`),
/// returns 1 for perfect observed agreement and 0 otherwise.
pub fn cohen_kappa(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let n = cm.total();
    if n == 0 {
        return Err(EvalError::Contract("kappa of an empty matrix".into()));
    }
    let (rows, cols) = (cm.row_sums(), cm.col_sums());
    let chance: u128 = rows.iter().zip(&cols).map(|(&r, &c)| u128::from(r) * u128::from(c)).sum();
    let n2 = u128::from(n) * u128::from(n);
    let trace = cm.trace();
    if chance == n2 {
        return Ok(if trace == n { 1.0 } else { 0.0 });
    }
    // Exact in integers up to the final division: kappa = (N*trace - chance) / (N^2 - chance).
    let num = i128::try_from(u128::from(n) * u128::from(trace)).unwrap() - chance as i128;
    Ok(num as f64 / (n2 - chance) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub kappa: f64,
    /// `None` for a stage with no true epochs.
    pub per_class_recall: [Option<f64>; 4],
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    counts: [[u64; 4]; 4],
    accuracy: f64,
    kappa: f64,
    recall: [Option<f64>; 4],
}

impl EvalReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<Self, EvalError> {
        let rows = cm.row_sums();
        Ok(EvalReport {
            accuracy: cm.accuracy(),
            kappa: cohen_kappa(&cm)?,
            per_class_recall: std::array::from_fn(|i| (rows[i] > 0).then(|| cm.counts[i][i] as f64 / rows[i] as f64)),
            confusion: cm,
        })
    }

    pub fn from_stages(truth: &[Stage], pred: &[Stage]) -> Result<Self, EvalError> {
        EvalReport::from_confusion(confusion(truth, pred)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ReportJson {
            counts: self.confusion.counts,
            accuracy: self.accuracy,
            kappa: self.kappa,
            recall: self.per_class_recall,
        })
        .expect("report serialises")
    }

    /// Parses the JSON twin. Metrics are recomputed from the counts and
    /// must agree with the stored values.
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let raw: ReportJson = serde_json::from_str(text).map_err(|e| EvalError::Report(e.to_string()))?;
        let report = EvalReport::from_confusion(ConfusionMatrix::from_counts(raw.counts))?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        let recall_ok = report
            .per_class_recall
            .iter()
            .zip(&raw.recall)
            .all(|(a, b)| matches!((a, b), (None, None)) || matches!((a, b), (Some(x), Some(y)) if close(*x, *y)));
        if !close(report.accuracy, raw.accuracy) || !close(report.kappa, raw.kappa) || !recall_ok {
            return Err(EvalError::Report("stored metrics disagree with counts".into()));
        }
        Ok(report)
    }
}

/// Row percentages in tenths of a percent, rounded by largest remainder so
/// each non-empty row sums to exactly 1000 tenths. Ties go to the lower
/// column.
pub fn row_percent_tenths(row: &[u64; 4]) -> Option<[u64; 4]> {
    let total: u64 = row.iter().sum();
    if total == 0 {
        return None;
    }
    let scaled = row.map(|c| u128::from(c) * 1000);
    let t = u128::from(total);
    let mut tenths = scaled.map(|s| (s / t) as u64);
    let mut order = [0, 1, 2, 3];
    order.sort_by(|&a, &b| (scaled[b] % t).cmp(&(scaled[a] % t)));
    let short = 1000 - tenths.iter().sum::<u64>();
    for &i in order.iter().take(short as usize) {
        tenths[i] += 1;
    }
    Some(tenths)
}

/// Text table of row-normalised percentages plus the JSON twin.
pub fn render_report(report: &EvalReport) -> (String, String) {
    let mut out = String::new();
    let _ = writeln!(out, "{:<8}{:>8}{:>8}{:>8}{:>8}", "true", "Wake", "Light", "Deep", "REM");
    for stage in Stage::ALL {
        let _ = write!(out, "{:<8}", stage.name());
        match row_percent_tenths(&report.confusion.counts[stage.index()]) {
            Some(cells) => {
                for c in cells {
                    let _ = write!(out, "{:>8}", format!("{}.{}%", c / 10, c % 10));
                }
            }
            None => out.push_str(&format!("{:>8}", "-").repeat(4)),
        }
        out.push('\n');
    }
    let _ = writeln!(out, "epochs   {}", report.confusion.total());
    let _ = writeln!(out, "accuracy {:.4}", report.accuracy);
    let _ = writeln!(out, "kappa    {:.4}", report.kappa);
    let recalls: Vec<String> = Stage::ALL
        .iter()
        .zip(&report.per_class_recall)
        .map(|(s, r)| match r {
            Some(r) => format!("{s} {:.1}%", r * 100.0),
            None => format!("{s} n/a"),
        })
        .collect();
    let _ = writeln!(out, "recall   {}", recalls.join(", "));
    (out, report.to_json())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Stage::*;

    fn embed(m: [[u64; 2]; 2]) -> ConfusionMatrix {
        let mut c = [[0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = m[i][j];
            }
        }
        ConfusionMatrix::from_counts(c)
    }

    #[test]
    fn tally() {
        let cm = confusion(&[Wake, Wake, Light], &[Wake, Light, Light]).unwrap();
        assert_eq!(cm.counts[0][0], 1);
        assert_eq!(cm.counts[0][1], 1);
        assert_eq!(cm.counts[1][1], 1);
        assert_eq!(cm.total(), 3);
        assert!(confusion(&[], &[]).is_err());
        assert!(confusion(&[Wake], &[]).is_err());
        let perfect = confusion(&[Wake, Deep, Rem], &[Wake, Deep, Rem]).unwrap();
        assert_eq!(perfect.trace(), perfect.total());
    }

    #[test]
    fn kappa_examples() {
        let id = ConfusionMatrix::from_counts([[3, 0, 0, 0], [0, 5, 0, 0], [0, 0, 1, 0], [0, 0, 0, 9]]);
        assert_eq!(cohen_kappa(&id).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&embed([[25, 25], [25, 25]])).unwrap(), 0.0);
        assert!((cohen_kappa(&embed([[40, 10], [20, 30]])).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn degenerate_chance() {
        let one_class = embed([[10, 0], [0, 0]]);
        assert_eq!(cohen_kappa(&one_class).unwrap(), 1.0);
        assert!(cohen_kappa(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn recall_undefined_rows() {
        let r = EvalReport::from_confusion(embed([[3, 1], [0, 4]])).unwrap();
        assert_eq!(r.per_class_recall, [Some(0.75), Some(1.0), None, None]);
        assert_eq!(r.accuracy, 7.0 / 8.0);
    }

    #[test]
    fn deep_row_fixture() {
        let cm = ConfusionMatrix::from_counts([
            [904, 60, 6, 30],
            [80, 798, 42, 80],
            [0, 375, 618, 7],
            [60, 90, 3, 847],
        ]);
        let (text, json) = render_report(&EvalReport::from_confusion(cm).unwrap());
        let deep = text.lines().find(|l| l.starts_with("Deep")).unwrap();
        let cells: Vec<&str> = deep.split_whitespace().collect();
        assert_eq!(cells, ["Deep", "0.0%", "37.5%", "61.8%", "0.7%"]);
        assert!(text.lines().any(|l| l.starts_with("Wake") && l.contains("90.4%")));
        assert_eq!(EvalReport::from_json(&json).unwrap(), EvalReport::from_confusion(cm).unwrap());
    }

    #[test]
    fn identity_renders_hundreds() {
        let cm = ConfusionMatrix::from_counts([[2, 0, 0, 0], [0, 7, 0, 0], [0, 0, 1, 0], [0, 0, 0, 3]]);
        let (text, _) = render_report(&EvalReport::from_confusion(cm).unwrap());
        let table: String = text.lines().take(5).collect();
        assert_eq!(table.matches("100.0%").count(), 4);
    }

    #[test]
    fn tampered_json_rejected() {
        let r = EvalReport::from_confusion(embed([[3, 1], [0, 4]])).unwrap();
        let bad = r.to_json().replace("\"kappa\": 0.", "\"kappa\": 0.1");
        assert!(EvalReport::from_json(&bad).is_err());
        assert!(EvalReport::from_json("{}").is_err());
    }
}
