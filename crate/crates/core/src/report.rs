//! Variant comparison tables and convergence-curve charts.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Sample;
use crate::error::Result;
use crate::metrics::{classify_convergence, ConvergenceTrace, MetricsReport, Verdict};
use crate::models::{build_variant, DiscMode, ModelSet, TraceSlot, VariantKind, VariantSpec};
use crate::tensor::Real;
use crate::training::{evaluate, TrainConfig, Trainer};

/// Trailing share of the trace the convergence verdict averages over.
pub const VERDICT_TAIL: f64 = 0.2;
/// Distance from 0.5 (good) or from 0/1 (poor) the verdict tolerates.
pub const VERDICT_TOL: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscSummary {
    pub slot: TraceSlot,
    pub mode: DiscMode,
    /// Side of the map the discriminator reads.
    pub extent: usize,
    pub fov: usize,
    /// Scalars actually allocated.
    pub params: usize,
    /// Closed-form count from the layer specs.
    pub params_closed_form: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariantRow {
    pub variant: VariantKind,
    pub gen_params: usize,
    pub discs: Vec<DiscSummary>,
    pub metrics: Option<MetricsReport>,
    pub verdict: Option<Verdict>,
}

impl VariantRow {
    pub fn from_models<T: Real>(models: &ModelSet<T>) -> Self {
        let discs = models
            .discs
            .iter()
            .map(|d| DiscSummary {
                slot: d.spec.slot,
                mode: d.spec.mode,
                extent: d.extent,
                fov: d.fov(),
                params: d.disc.store().scalar_count(),
                params_closed_form: d.disc.stack().param_count(),
            })
            .collect();
        Self {
            variant: models.variant.kind,
            gen_params: models.generator.store().scalar_count(),
            discs,
            metrics: None,
            verdict: None,
        }
    }

    /// e.g. `16×16 global, 22×22 local`.
    pub fn fov_label(&self) -> String {
        if self.discs.is_empty() {
            return "-".into();
        }
        self.discs
            .iter()
            .map(|d| {
                let kind = match d.mode {
                    DiscMode::Macro => "global",
                    DiscMode::Micro => "local",
                };
                format!("{0}×{0} {kind}", d.fov)
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn disc_params(&self) -> usize {
        self.discs.iter().map(|d| d.params).sum()
    }
}

/// One row per variant; `traces[i]` belongs to `rows[i]` when trained.
#[derive(Clone, Debug, Default)]
pub struct VariantStudy {
    pub rows: Vec<VariantRow>,
    pub traces: Vec<ConvergenceTrace>,
}

impl VariantStudy {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,fov,gen_params,disc_params,disc_params_closed_form,miou,low_res_miou,ipr_percent,pixel_accuracy,verdict\n");
        for r in &self.rows {
            let closed: usize = r.discs.iter().map(|d| d.params_closed_form).sum();
            let m = |f: fn(&MetricsReport) -> f64| {
                r.metrics
                    .as_ref()
                    .map(|x| f(x).to_string())
                    .unwrap_or_default()
            };
            let _ = writeln!(
                s,
                "{},\"{}\",{},{},{},{},{},{},{},{}",
                r.variant,
                r.fov_label(),
                r.gen_params,
                r.disc_params(),
                closed,
                m(|x| x.miou),
                m(|x| x.low_res_miou),
                m(|x| x.ipr),
                m(|x| x.pixel_accuracy),
                r.verdict.map(|v| v.to_string()).unwrap_or_default()
            );
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<12} {:<36} {:>10} {:>9} {:>7} {:>8} {:>7}  {}\n",
            "variant", "FOV", "G params", "D params", "mIoU", "low mIoU", "IPR %", "convergence"
        );
        for r in &self.rows {
            let pct = |f: fn(&MetricsReport) -> f64| {
                r.metrics
                    .as_ref()
                    .map(|x| format!("{:.2}", 100.0 * f(x)))
                    .unwrap_or_else(|| "-".into())
            };
            let ipr = r
                .metrics
                .as_ref()
                .map(|x| format!("{:.3}", x.ipr))
                .unwrap_or_else(|| "-".into());
            let verdict = match (r.verdict, r.discs.is_empty()) {
                (Some(v), _) => v.to_string(),
                (None, true) => "n/a".into(),
                (None, false) => "-".into(),
            };
            let _ = writeln!(
                s,
                "{:<12} {:<36} {:>10} {:>9} {:>7} {:>8} {:>7}  {}",
                r.variant.to_string(),
                r.fov_label(),
                r.gen_params,
                r.disc_params(),
                pct(|x| x.miou),
                pct(|x| x.low_res_miou),
                ipr,
                verdict
            );
        }
        s
    }
}

/// Parameter counts and FOVs of every variant at `config`'s profile,
/// without training.
pub fn architecture_table(config: &TrainConfig) -> Result<VariantStudy> {
    let mut rows = Vec::new();
    for kind in VariantKind::ALL {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let models = build_variant::<f32, _>(
            &VariantSpec::new(kind),
            &config.generator_config(),
            config.profile.extent(),
            &mut rng,
        )?;
        rows.push(VariantRow::from_models(&models));
    }
    Ok(VariantStudy {
        rows,
        traces: Vec::new(),
    })
}

/// Trains every variant with `base` (only the variant changes) and scores
/// each on `test`.
pub fn run_variant_study<T: Real>(
    base: &TrainConfig,
    train: &[Sample],
    test: &[Sample],
) -> Result<VariantStudy> {
    let mut study = VariantStudy::default();
    for kind in VariantKind::ALL {
        let mut config = base.clone();
        config.variant = kind;
        log::info!("training {kind}");
        let mut trainer = Trainer::<T>::new(config)?;
        trainer.run(train, None)?;
        let mut row = VariantRow::from_models(trainer.models());
        row.metrics = Some(evaluate(
            &trainer.models().generator,
            test,
            &base.scales,
            base.low_res_rule,
        )?);
        if trainer.models().disc(TraceSlot::Macro).is_some() {
            row.verdict = Some(classify_convergence(
                trainer.trace(),
                TraceSlot::Macro,
                VERDICT_TAIL,
                VERDICT_TOL,
            )?);
        }
        study.rows.push(row);
        study.traces.push(trainer.trace().clone());
    }
    Ok(study)
}

const CHART_W: f64 = 820.0;
const PANEL_H: f64 = 240.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 36.0;
const GAP: f64 = 56.0;
const MAX_POINTS: usize = 1500;

struct Series {
    name: &'static str,
    color: &'static str,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

fn thin(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points;
    }
    let step = points.len().div_ceil(MAX_POINTS);
    let last = *points.last().expect("non-empty");
    let mut out: Vec<_> = points.into_iter().step_by(step).collect();
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

fn panel(
    svg: &mut String,
    top: f64,
    title: &str,
    series: &[Series],
    x_max: f64,
    y_range: Option<(f64, f64)>,
) {
    let (y0, y1) = y_range.unwrap_or_else(|| {
        let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
        let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| {
            (a.min(y), b.max(y))
        });
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    });
    let plot_w = CHART_W - MARGIN_L - MARGIN_R;
    let x = |v: f64| MARGIN_L + plot_w * if x_max > 0.0 { v / x_max } else { 0.0 };
    let y = |v: f64| top + PANEL_H * (1.0 - (v - y0) / (y1 - y0));
    let _ = writeln!(
        svg,
        r##"<text x="{MARGIN_L}" y="{:.1}" font-size="14" font-weight="bold">{title}</text>"##,
        top - 10.0
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN_L}" y="{top:.1}" width="{plot_w:.1}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
    );
    for k in 0..=4 {
        let v = y0 + (y1 - y0) * k as f64 / 4.0;
        let py = y(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_L}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"##,
            MARGIN_L + plot_w,
            MARGIN_L - 6.0,
            py + 4.0,
            format_tick(v)
        );
        let xv = x_max * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"##,
            x(xv),
            top + PANEL_H + 16.0,
            xv.round()
        );
    }
    for (i, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(a, b)| format!("{:.1},{:.1}", x(a), y(b)))
            .collect();
        let dash = if s.dashed {
            r#" stroke-dasharray="6 3""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r##"<polyline fill="none" stroke="{}" stroke-width="1.4"{dash} points="{}"/>"##,
            s.color,
            pts.join(" ")
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = CHART_W - MARGIN_R + 12.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}" font-size="12">{}</text>"##,
            lx + 22.0,
            s.color,
            lx + 28.0,
            ly + 4.0,
            s.name
        );
    }
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.3}")
    }
}

/// Two-panel SVG: discriminator outputs on real and fake pairs (top) and
/// the generator loss (bottom), against the iteration.
pub fn curves_svg(trace: &ConvergenceTrace, title: &str) -> String {
    let rows = trace.rows();
    let x_max = rows.last().map(|r| r.iter as f64).unwrap_or(0.0);
    let slots = [
        (
            TraceSlot::Macro,
            ["D(real) macro", "D(fake) macro"],
            "#1f77b4",
        ),
        (
            TraceSlot::Micro,
            ["D(real) micro", "D(fake) micro"],
            "#d62728",
        ),
        (TraceSlot::Mid, ["D(real) mid", "D(fake) mid"], "#2ca02c"),
    ];
    let mut d_series = Vec::new();
    for (slot, names, color) in slots {
        let pts: Vec<(f64, f64, f64)> = rows
            .iter()
            .filter_map(|r| r.scores(slot).map(|(a, b)| (r.iter as f64, a, b)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        d_series.push(Series {
            name: names[0],
            color,
            dashed: false,
            points: thin(pts.iter().map(|p| (p.0, p.1)).collect()),
        });
        d_series.push(Series {
            name: names[1],
            color,
            dashed: true,
            points: thin(pts.iter().map(|p| (p.0, p.2)).collect()),
        });
    }
    let g_series = [Series {
        name: "L_gen",
        color: "#222",
        dashed: false,
        points: thin(rows.iter().map(|r| (r.iter as f64, r.loss_gen)).collect()),
    }];
    let height = MARGIN_T + 2.0 * PANEL_H + GAP + 40.0;
    let mut svg = format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{CHART_W}" height="{height}" viewBox="0 0 {CHART_W} {height}" font-family="sans-serif">
<rect width="100%" height="100%" fill="white"/>
<text x="{:.1}" y="18" font-size="15" text-anchor="middle">{}</text>
"##,
        CHART_W / 2.0,
        escape(title)
    );
    if d_series.is_empty() {
        let _ = writeln!(
            svg,
            r##"<text x="{MARGIN_L}" y="{:.1}" font-size="13">no discriminator in this run</text>"##,
            MARGIN_T + 20.0
        );
    } else {
        panel(
            &mut svg,
            MARGIN_T + 10.0,
            "discriminator output",
            &d_series,
            x_max,
            Some((0.0, 1.0)),
        );
    }
    panel(
        &mut svg,
        MARGIN_T + PANEL_H + GAP,
        "generator loss",
        &g_series,
        x_max,
        None,
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
