//! Per-epoch records of a clustering run and their CSV / JSON export.
//!
//! CSV columns, in order, are listed in [`CSV_HEADER`]. Missing values
//! (no labels, diagnostics skipped at this epoch, no rewrite yet) are
//! written as empty cells.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvolutionStats;
use crate::error::Result;
use crate::model::{write_atomic, LossBreakdown};

pub const CSV_HEADER: &str = "epoch,lambda_fr,lambda_fr_baseline,lambda_fd,lambda_fd_baseline,\
omega_size,acc_all,acc_omega,acc_complement,nmi,ari,links_total,links_true,links_false,\
links_added_true,links_added_false,links_deleted_true,links_deleted_false,l_total,l_clus,\
l_bce,l_c_self,l_r_self,l_c_clus,gamma,wall_time";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lambda_fr: Option<f64>,
    pub lambda_fr_baseline: Option<f64>,
    pub lambda_fd: Option<f64>,
    pub lambda_fd_baseline: Option<f64>,
    pub omega_size: usize,
    pub acc_all: Option<f64>,
    pub acc_omega: Option<f64>,
    pub acc_complement: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub links: Option<EvolutionStats>,
    pub loss: LossBreakdown,
    /// Seconds since the clustering phase began, excluding diagnostics.
    pub wall_time: f64,
}

fn cell<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EpochRecord {
    fn csv_row(&self) -> String {
        let l = self.links;
        let link = |f: fn(&EvolutionStats) -> usize| cell(l.as_ref().map(f));
        [
            self.epoch.to_string(),
            cell(self.lambda_fr),
            cell(self.lambda_fr_baseline),
            cell(self.lambda_fd),
            cell(self.lambda_fd_baseline),
            self.omega_size.to_string(),
            cell(self.acc_all),
            cell(self.acc_omega),
            cell(self.acc_complement),
            cell(self.nmi),
            cell(self.ari),
            link(|s| s.links_total),
            link(|s| s.links_true),
            link(|s| s.links_false),
            link(|s| s.links_added_true),
            link(|s| s.links_added_false),
            link(|s| s.links_deleted_true),
            link(|s| s.links_deleted_false),
            self.loss.l_total.to_string(),
            cell(self.loss.l_clus),
            self.loss.l_bce.to_string(),
            cell(self.loss.l_c_self),
            cell(self.loss.l_r_self),
            cell(self.loss.l_c_clus),
            self.loss.gamma.to_string(),
            format!("{:.6}", self.wall_time),
        ]
        .join(",")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticTrace {
    pub records: Vec<EpochRecord>,
}

impl DiagnosticTrace {
    pub fn push(&mut self, r: EpochRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.records.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            writeln!(s, "{}", r.csv_row()).expect("write to String");
        }
        s
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }

    /// The series of one optional column, skipping epochs where it is absent.
    pub fn series(&self, f: impl Fn(&EpochRecord) -> Option<f64>) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter_map(|r| f(r).map(|v| (r.epoch, v)))
            .collect()
    }

    pub fn summary(&self) -> TraceSummary {
        let mean = |f: fn(&EpochRecord) -> Option<f64>| {
            let s = self.series(f);
            (!s.is_empty()).then(|| s.iter().map(|x| x.1).sum::<f64>() / s.len() as f64)
        };
        let last = self.records.last();
        TraceSummary {
            epochs: self.records.len(),
            final_acc: last.and_then(|r| r.acc_all),
            final_nmi: last.and_then(|r| r.nmi),
            final_ari: last.and_then(|r| r.ari),
            final_omega_size: last.map(|r| r.omega_size),
            mean_lambda_fr: mean(|r| r.lambda_fr),
            mean_lambda_fr_baseline: mean(|r| r.lambda_fr_baseline),
            mean_lambda_fd: mean(|r| r.lambda_fd),
            mean_lambda_fd_baseline: mean(|r| r.lambda_fd_baseline),
            wall_time: last.map_or(0.0, |r| r.wall_time),
        }
    }
}

/// Compact per-run digest written next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub epochs: usize,
    pub final_acc: Option<f64>,
    pub final_nmi: Option<f64>,
    pub final_ari: Option<f64>,
    pub final_omega_size: Option<usize>,
    pub mean_lambda_fr: Option<f64>,
    pub mean_lambda_fr_baseline: Option<f64>,
    pub mean_lambda_fd: Option<f64>,
    pub mean_lambda_fd_baseline: Option<f64>,
    pub wall_time: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(epoch: usize) -> EpochRecord {
        EpochRecord {
            epoch,
            lambda_fr: Some(0.5),
            lambda_fr_baseline: None,
            lambda_fd: None,
            lambda_fd_baseline: None,
            omega_size: 3,
            acc_all: Some(1.0),
            acc_omega: None,
            acc_complement: None,
            nmi: None,
            ari: None,
            links: None,
            loss: LossBreakdown {
                l_total: 1.0,
                l_clus: None,
                l_bce: 1.0,
                l_c_self: None,
                l_r_self: None,
                l_c_clus: None,
                gamma: 0.0,
            },
            wall_time: 0.25,
        }
    }

    #[test]
    fn every_row_has_the_header_width() {
        let mut t = DiagnosticTrace::default();
        t.push(record(0));
        t.push(record(1));
        let csv = t.to_csv();
        let width = CSV_HEADER.split(',').count();
        assert_eq!(width, 26);
        for line in csv.lines() {
            assert_eq!(line.split(',').count(), width, "{line}");
        }
        let s = t.summary();
        assert_eq!(s.epochs, 2);
        assert_eq!(s.mean_lambda_fr, Some(0.5));
        assert_eq!(s.mean_lambda_fd, None);
    }
}
