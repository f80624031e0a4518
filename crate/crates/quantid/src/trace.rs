//! Column-oriented text dumps for offline diagnostics.
//!
//! Both files have one header line of whitespace-separated column names
//! followed by one whitespace-separated row per record.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use quantid_core::inference::EmTrace;
use quantid_core::sampler::ChainObserver;

use crate::dataset_io::fmt_f64;

pub const EM_TRACE_COLUMNS: [&str; 10] = [
    "iteration",
    "lambda",
    "beta",
    "sigma2",
    "f1_hat",
    "f2_hat",
    "h_beta",
    "neg2q_before",
    "neg2q_after",
    "rel_change",
];

/// One row per EM iteration. `lambda`, `beta` and `sigma2` are the
/// M-step output of that iteration.
pub fn write_em_trace<W: Write>(mut w: W, trace: &EmTrace) -> io::Result<()> {
    writeln!(w, "{}", EM_TRACE_COLUMNS.join(" "))?;
    for r in trace {
        let vals = [
            r.eta_next.lambda,
            r.eta_next.beta,
            r.eta_next.sigma2,
            r.f1_hat,
            r.f2_hat,
            r.h_beta,
            r.neg2q_before,
            r.neg2q_after,
            r.relative_change,
        ];
        let row: Vec<String> = vals.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{} {}", r.iteration, row.join(" "))?;
    }
    w.flush()
}

/// Records every retained sweep of a chain.
#[derive(Debug, Clone, Default)]
pub struct ChainRecorder {
    pub sweeps: Vec<usize>,
    pub z: Vec<DVector<f64>>,
    /// Empty for the marginal chain.
    pub g: Vec<DVector<f64>>,
}

impl ChainObserver for ChainRecorder {
    fn retained(&mut self, sweep: usize, z: &DVector<f64>, g: Option<&DVector<f64>>) {
        self.sweeps.push(sweep);
        self.z.push(z.clone());
        if let Some(g) = g {
            self.g.push(g.clone());
        }
    }
}

impl ChainRecorder {
    /// For the marginal chain, fills `g` with the conditional means `H z`.
    pub fn fill_conditional_means(&mut self, gain: &DMatrix<f64>) {
        if self.g.is_empty() {
            self.g = self.z.iter().map(|z| gain * z).collect();
        }
    }

    /// Columns `sweep g1..gm`, plus `z1..zN` when `with_z`.
    pub fn write<W: Write>(&self, mut w: W, with_z: bool) -> io::Result<()> {
        let m = self.g.first().map_or(0, |g| g.len());
        let n = self.z.first().map_or(0, |z| z.len());
        let mut head = vec!["sweep".to_string()];
        head.extend((1..=m).map(|i| format!("g{i}")));
        if with_z {
            head.extend((1..=n).map(|i| format!("z{i}")));
        }
        writeln!(w, "{}", head.join(" "))?;
        for (k, sweep) in self.sweeps.iter().enumerate() {
            let mut row = sweep.to_string();
            let g = self.g.get(k).map(|g| g.as_slice()).unwrap_or(&[]);
            let z: &[f64] = if with_z { self.z[k].as_slice() } else { &[] };
            for v in g.iter().chain(z) {
                row.push(' ');
                row.push_str(&fmt_f64(*v));
            }
            writeln!(w, "{row}")?;
        }
        w.flush()
    }
}
