//! Fixed-column CSV rendering of result types.
//!
//! Numbers are written with 17 significant digits so that a parsed value
//! is bit-identical to the one written. Missing values are empty cells.

use std::io::{self, Write};

use crate::axioms::AxiomReport;
use crate::experiments::{CurvePoint, RollingResult, SummaryTable, SurfaceGrid};
use crate::measures::{ReturnSeries, RiskReport};

/// Formats `v` with 17 significant digits.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

pub trait Tabular {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;

    fn write_csv<W: Write + ?Sized>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{}", self.header().join(","))?;
        for row in self.rows() {
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

impl Tabular for [RiskReport] {
    fn header(&self) -> Vec<&'static str> {
        vec![
            "alpha",
            "beta",
            "p",
            "mode",
            "n",
            "var",
            "es",
            "sd",
            "sdr",
            "q_alpha",
            "e_alpha",
            "tail_count",
            "degenerate_tail",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                vec![
                    format_number(r.alpha),
                    format_number(r.beta),
                    format_number(r.p),
                    r.mode.to_string(),
                    r.n.to_string(),
                    format_number(r.var),
                    format_number(r.es),
                    format_number(r.sd),
                    format_number(r.sdr),
                    format_number(r.q_alpha),
                    format_number(r.e_alpha),
                    r.tail_count.to_string(),
                    r.degenerate_tail.to_string(),
                ]
            })
            .collect()
    }
}

impl Tabular for SummaryTable {
    fn header(&self) -> Vec<&'static str> {
        vec!["measure", "alpha", "mean", "st_dev", "ratio", "pearson"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.measure.to_string(),
                    format_number(r.alpha),
                    format_number(r.mean),
                    opt(r.st_dev),
                    format_number(r.ratio),
                    opt(r.pearson),
                ]
            })
            .collect()
    }
}

impl Tabular for RollingResult {
    fn header(&self) -> Vec<&'static str> {
        if self.labels.is_some() {
            vec!["index", "label", "return", "var", "es", "sd", "sdr"]
        } else {
            vec!["index", "return", "var", "es", "sd", "sdr"]
        }
    }

    fn rows(&self) -> Vec<Vec<String>> {
        (0..self.len())
            .map(|i| {
                let mut row = vec![self.index[i].to_string()];
                if let Some(labels) = &self.labels {
                    row.push(labels[i].clone());
                }
                row.extend(
                    [
                        self.returns[i],
                        self.var[i],
                        self.es[i],
                        self.sd[i],
                        self.sdr[i],
                    ]
                    .map(format_number),
                );
                row
            })
            .collect()
    }
}

impl Tabular for [CurvePoint] {
    fn header(&self) -> Vec<&'static str> {
        vec!["alpha", "var", "es", "sd", "sdr"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|c| {
                [c.alpha, c.var, c.es, c.sd, c.sdr]
                    .map(format_number)
                    .to_vec()
            })
            .collect()
    }
}

/// Long format, one row per `(alpha, beta)` with β varying fastest.
impl Tabular for SurfaceGrid {
    fn header(&self) -> Vec<&'static str> {
        vec!["alpha", "beta", "sdr"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::with_capacity(self.alphas.len() * self.betas.len());
        for (i, &alpha) in self.alphas.iter().enumerate() {
            for (j, &beta) in self.betas.iter().enumerate() {
                rows.push([alpha, beta, self.sdr[i][j]].map(format_number).to_vec());
            }
        }
        rows
    }
}

impl Tabular for [AxiomReport] {
    fn header(&self) -> Vec<&'static str> {
        vec![
            "suite",
            "axiom",
            "trials",
            "failures",
            "skipped",
            "max_violation",
            "tolerance",
            "gating",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .flat_map(|report| {
                report.entries.iter().map(move |e| {
                    vec![
                        report.suite.clone(),
                        e.name.clone(),
                        e.trials.to_string(),
                        e.failures.to_string(),
                        e.skipped.to_string(),
                        format_number(e.max_violation),
                        format_number(e.tolerance),
                        e.gating.to_string(),
                    ]
                })
            })
            .collect()
    }
}

impl Tabular for ReturnSeries {
    fn header(&self) -> Vec<&'static str> {
        vec!["return"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.values()
            .iter()
            .map(|&v| vec![format_number(v)])
            .collect()
    }
}
