use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::TraceSlot;

/// CSV header of a convergence trace.
pub const TRACE_COLUMNS: [&str; 14] = [
    "iter",
    "L_mce_low",
    "L_mce_high",
    "L_adv_macro",
    "L_adv_micro",
    "d_real_macro",
    "d_fake_macro",
    "d_real_micro",
    "d_fake_micro",
    "L_adv_mid",
    "d_real_mid",
    "d_fake_mid",
    "L_gen",
    "L_dis",
];

/// One training iteration. Adversarial columns are empty for discriminators
/// the variant does not have.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub ce_low: f64,
    pub ce_high: f64,
    /// Generator-side adversarial losses.
    pub adv_macro: Option<f64>,
    pub adv_micro: Option<f64>,
    pub adv_mid: Option<f64>,
    /// Raw discriminator outputs on the real and fake pair.
    pub d_macro: Option<(f64, f64)>,
    pub d_micro: Option<(f64, f64)>,
    pub d_mid: Option<(f64, f64)>,
    pub loss_gen: f64,
    pub loss_dis: Option<f64>,
}

impl TraceRow {
    pub fn scores(&self, slot: TraceSlot) -> Option<(f64, f64)> {
        match slot {
            TraceSlot::Macro => self.d_macro,
            TraceSlot::Micro => self.d_micro,
            TraceSlot::Mid => self.d_mid,
        }
    }

    fn values(&self) -> [Option<f64>; 13] {
        let split = |d: Option<(f64, f64)>| (d.map(|p| p.0), d.map(|p| p.1));
        let (rma, fma) = split(self.d_macro);
        let (rmi, fmi) = split(self.d_micro);
        let (rmd, fmd) = split(self.d_mid);
        [
            Some(self.ce_low),
            Some(self.ce_high),
            self.adv_macro,
            self.adv_micro,
            rma,
            fma,
            rmi,
            fmi,
            self.adv_mid,
            rmd,
            fmd,
            Some(self.loss_gen),
            self.loss_dis,
        ]
    }

    fn from_values(iter: usize, v: [Option<f64>; 13]) -> Result<Self> {
        let need = |i: usize| {
            v[i].ok_or_else(|| {
                Error::InvalidArgument(format!("trace column {} is empty", TRACE_COLUMNS[i + 1]))
            })
        };
        let pair = |a: Option<f64>, b: Option<f64>| a.zip(b);
        Ok(Self {
            iter,
            ce_low: need(0)?,
            ce_high: need(1)?,
            adv_macro: v[2],
            adv_micro: v[3],
            d_macro: pair(v[4], v[5]),
            d_micro: pair(v[6], v[7]),
            adv_mid: v[8],
            d_mid: pair(v[9], v[10]),
            loss_gen: need(11)?,
            loss_dis: v[12],
        })
    }
}

/// Append-only, strictly increasing in `iter`, finite everywhere.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceTrace {
    rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: TraceRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.iter <= last.iter {
                return Err(Error::InvalidArgument(format!(
                    "trace iteration {} does not follow {}",
                    row.iter, last.iter
                )));
            }
        }
        if let Some(i) = row
            .values()
            .iter()
            .position(|v| v.is_some_and(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite(format!(
                "trace column {} at iteration {}",
                TRACE_COLUMNS[i + 1],
                row.iter
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn scores(&self, slot: TraceSlot) -> Vec<(f64, f64)> {
        self.rows.iter().filter_map(|r| r.scores(slot)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_COLUMNS)?;
        for r in &self.rows {
            let mut rec = vec![r.iter.to_string()];
            rec.extend(
                r.values()
                    .iter()
                    .map(|v| v.map(|v| v.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("trace csv", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != TRACE_COLUMNS {
            return Err(Error::InvalidArgument(format!(
                "unexpected trace header {header:?}"
            )));
        }
        let mut trace = Self::new();
        for rec in r.records() {
            let rec = rec?;
            let iter = crate::config::parse_value("iter", &rec[0])?;
            let mut v = [None; 13];
            for (i, slot) in v.iter_mut().enumerate() {
                let field = &rec[i + 1];
                if !field.is_empty() {
                    *slot = Some(crate::config::parse_value(TRACE_COLUMNS[i + 1], field)?);
                }
            }
            trace.push(TraceRow::from_values(iter, v)?)?;
        }
        Ok(trace)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Both outputs settle near 0.5.
    Good,
    /// The discriminator separates real from fake outright.
    Poor,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Good => "good",
            Verdict::Poor => "poor",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

pub const MIN_TRACE_LEN: usize = 10;

/// Classifies `(d_real, d_fake)` pairs by their means over the trailing
/// `tail_fraction` of the sequence.
pub fn classify_pairs(pairs: &[(f64, f64)], tail_fraction: f64, tol: f64) -> Result<Verdict> {
    if pairs.len() < MIN_TRACE_LEN {
        return Err(Error::InvalidArgument(format!(
            "trace has {} discriminator rows, need at least {MIN_TRACE_LEN}",
            pairs.len()
        )));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail fraction {tail_fraction} not in (0, 1]"
        )));
    }
    let n = ((pairs.len() as f64 * tail_fraction).ceil() as usize).clamp(1, pairs.len());
    let tail = &pairs[pairs.len() - n..];
    let real = tail.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let fake = tail.iter().map(|p| p.1).sum::<f64>() / n as f64;
    Ok(if (real - 0.5).abs() <= tol && (fake - 0.5).abs() <= tol {
        Verdict::Good
    } else if real >= 1.0 - tol && fake <= tol {
        Verdict::Poor
    } else {
        Verdict::Indeterminate
    })
}

pub fn classify_convergence(
    trace: &ConvergenceTrace,
    slot: TraceSlot,
    tail_fraction: f64,
    tol: f64,
) -> Result<Verdict> {
    classify_pairs(&trace.scores(slot), tail_fraction, tol)
}
