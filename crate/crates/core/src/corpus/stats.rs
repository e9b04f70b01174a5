//! Per-split corpus statistics (counts and whitespace-token means).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Dataset, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub instances: usize,
    pub abstracts: usize,
    /// Mean whitespace tokens per gold summary; absent when the split is empty.
    pub mean_summary_words: Option<f64>,
    pub mean_abstracts_per_instance: Option<f64>,
    /// Mean whitespace tokens per abstract; absent when there are no abstracts.
    pub mean_abstract_words: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub name: String,
    pub total_instances: usize,
    pub per_split: BTreeMap<Split, SplitStats>,
}

pub fn dataset_stats(dataset: &Dataset) -> StatsReport {
    let mut per_split = BTreeMap::new();
    for split in Split::ALL {
        let instances: Vec<_> = dataset.split(split).collect();
        let n = instances.len();
        let abstracts: usize = instances.iter().map(|i| i.abstracts.len()).sum();
        let summary_words: usize = instances
            .iter()
            .map(|i| i.gold_summary.split_whitespace().count())
            .sum();
        let abstract_words: usize = instances
            .iter()
            .flat_map(|i| i.abstracts.iter())
            .map(|a| a.word_count())
            .sum();
        per_split.insert(
            split,
            SplitStats {
                instances: n,
                abstracts,
                mean_summary_words: (n > 0).then(|| summary_words as f64 / n as f64),
                mean_abstracts_per_instance: (n > 0).then(|| abstracts as f64 / n as f64),
                mean_abstract_words: (abstracts > 0)
                    .then(|| abstract_words as f64 / abstracts as f64),
            },
        );
    }
    StatsReport {
        name: dataset.name.clone(),
        total_instances: dataset.instances.len(),
        per_split,
    }
}

impl StatsReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "dataset {}: {} instances\n",
            self.name, self.total_instances
        ));
        out.push_str(&format!(
            "{:<8} {:>10} {:>10} {:>14} {:>14} {:>14}\n",
            "split", "instances", "abstracts", "words/summary", "abs/instance", "words/abstract"
        ));
        for (split, s) in &self.per_split {
            let fmt_opt = |o: Option<f64>| match o {
                Some(v) => format!("{v:.2}"),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{:<8} {:>10} {:>10} {:>14} {:>14} {:>14}\n",
                split.to_string(),
                s.instances,
                s.abstracts,
                fmt_opt(s.mean_summary_words),
                fmt_opt(s.mean_abstracts_per_instance),
                fmt_opt(s.mean_abstract_words),
            ));
        }
        out
    }
}
