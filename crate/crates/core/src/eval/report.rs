use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Metric values for one topic, or their means.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TopicMetrics {
    /// P@K, one value per cut.
    pub precision: Vec<f64>,
    /// NDCG@K, one value per cut.
    pub ndcg: Vec<f64>,
    pub bpref: f64,
    pub rbp: f64,
    /// Average precision (mean: MAP).
    pub map: f64,
    pub num_ret: usize,
    pub num_rel: usize,
    pub num_rel_ret: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub run_tag: String,
    pub cuts: Vec<usize>,
    pub per_topic: BTreeMap<u32, TopicMetrics>,
    /// Arithmetic means over `per_topic`; counts are summed.
    pub mean: TopicMetrics,
    /// Run topics with no judgments at all; excluded from the means.
    pub unjudged_topics: Vec<u32>,
}

impl MetricReport {
    pub(crate) fn new(
        run_tag: String,
        cuts: Vec<usize>,
        per_topic: BTreeMap<u32, TopicMetrics>,
        unjudged_topics: Vec<u32>,
    ) -> Self {
        let mut mean = TopicMetrics {
            precision: vec![0.0; cuts.len()],
            ndcg: vec![0.0; cuts.len()],
            ..Default::default()
        };
        let n = per_topic.len();
        if n > 0 {
            let nf = n as f64;
            for m in per_topic.values() {
                for (acc, v) in mean.precision.iter_mut().zip(&m.precision) {
                    *acc += v / nf;
                }
                for (acc, v) in mean.ndcg.iter_mut().zip(&m.ndcg) {
                    *acc += v / nf;
                }
                mean.bpref += m.bpref / nf;
                mean.rbp += m.rbp / nf;
                mean.map += m.map / nf;
                mean.num_ret += m.num_ret;
                mean.num_rel += m.num_rel;
                mean.num_rel_ret += m.num_rel_ret;
            }
        }
        Self {
            run_tag,
            cuts,
            per_topic,
            mean,
            unjudged_topics,
        }
    }

    pub fn num_topics(&self) -> usize {
        self.per_topic.len()
    }

    fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = self.cuts.iter().map(|k| format!("P@{k}")).collect();
        cols.extend(self.cuts.iter().map(|k| format!("NDCG@{k}")));
        cols.extend(["Bpref", "RBP", "MAP", "num_ret", "num_rel", "num_rel_ret"].map(String::from));
        cols
    }

    fn row(m: &TopicMetrics) -> Vec<String> {
        let mut row: Vec<String> = m.precision.iter().chain(&m.ndcg).map(|v| format!("{v:.4}")).collect();
        row.extend([m.bpref, m.rbp, m.map].map(|v| format!("{v:.4}")));
        row.extend([m.num_ret, m.num_rel, m.num_rel_ret].map(|v| v.to_string()));
        row
    }

    fn rows(&self) -> Vec<(String, Vec<String>)> {
        let mut rows: Vec<(String, Vec<String>)> =
            self.per_topic.iter().map(|(t, m)| (t.to_string(), Self::row(m))).collect();
        rows.push(("all".to_string(), Self::row(&self.mean)));
        rows
    }

    /// Aligned table, one row per topic and a final `all` row.
    pub fn to_text(&self) -> String {
        let mut header = vec!["topic".to_string()];
        header.extend(self.columns());
        let body: Vec<Vec<String>> = self
            .rows()
            .into_iter()
            .map(|(t, mut r)| {
                r.insert(0, t);
                r
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| body.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
            .collect();
        let mut out = format!("run: {}\n", self.run_tag);
        for line in std::iter::once(&header).chain(&body) {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| if i == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  "));
        }
        if !self.unjudged_topics.is_empty() {
            let list: Vec<String> = self.unjudged_topics.iter().map(u32::to_string).collect();
            let _ = writeln!(out, "unjudged topics (excluded): {}", list.join(" "));
        }
        out
    }

    /// CSV with a `topic` column; the mean row has topic `all`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["topic".to_string()];
        header.extend(self.columns());
        w.write_record(&header).expect("in-memory write");
        for (t, mut r) in self.rows() {
            r.insert(0, t);
            w.write_record(&r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}
