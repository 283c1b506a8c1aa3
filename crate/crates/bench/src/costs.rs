//! `srbench cost`: one row per block kind, as aligned text or CSV.

use std::io::Write;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use srblock::cost::{self, asymptotic, reference, BlockKind, BlockSpec, REFERENCE_C, REFERENCE_HW};
use srblock::sr::{DEFAULT_NODES, DEFAULT_RATIO};

/// One CSV row. Column order is the stable schema:
/// `block,h,w,c,flops_mac2,flops_mac1,params,affinity_elems,exact,computation,affinity_class,
/// published_flops,published_convention,published_params,published_flops_tol,flagged`.
///
/// The `published_*` columns are empty for kinds without a published
/// figure, and for every kind when the table is not evaluated at the
/// published setting (`c = 512`, `96 × 96`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub block: String,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub flops_mac2: u64,
    pub flops_mac1: u64,
    pub params: u64,
    pub affinity_elems: u64,
    pub exact: bool,
    pub computation: String,
    pub affinity_class: String,
    pub published_flops: Option<f64>,
    pub published_convention: Option<String>,
    pub published_params: Option<f64>,
    pub published_flops_tol: Option<f64>,
    pub flagged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostArgs {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub ratio: usize,
    pub k: usize,
    pub r_se: usize,
}

impl Default for CostArgs {
    fn default() -> Self {
        CostArgs {
            c: REFERENCE_C,
            h: REFERENCE_HW,
            w: REFERENCE_HW,
            ratio: DEFAULT_RATIO,
            k: DEFAULT_NODES,
            r_se: srblock::baselines::DEFAULT_SE_REDUCTION,
        }
    }
}

impl CostArgs {
    fn at_published_setting(&self) -> bool {
        let d = CostArgs::default();
        (self.c, self.h, self.w, self.ratio, self.k, self.r_se) == (d.c, d.h, d.w, d.ratio, d.k, d.r_se)
    }
}

pub fn rows(args: &CostArgs) -> Result<Vec<CostRow>> {
    if args.c == 0 || args.h == 0 || args.w == 0 {
        return Err(crate::usage("--c, --h and --w must be positive"));
    }
    let published = args.at_published_setting();
    BlockKind::ALL
        .iter()
        .map(|&kind| {
            let desc = BlockSpec {
                ratio: args.ratio,
                k: args.k,
                r_se: args.r_se,
                ..BlockSpec::new(kind, args.c)
            };
            let report = cost::cost(&desc, args.h, args.w).map_err(|e| crate::usage(e.to_string()))?;
            let class = asymptotic(kind);
            let r = reference(kind).filter(|_| published);
            Ok(CostRow {
                block: kind.name().to_string(),
                h: args.h,
                w: args.w,
                c: args.c,
                flops_mac2: report.flops(),
                flops_mac1: report.flops_mac1(),
                params: report.params,
                affinity_elems: report.affinity_memory_elems,
                exact: report.exact,
                computation: class.computation.to_string(),
                affinity_class: class.affinity.to_string(),
                published_flops: r.map(|r| r.flops),
                published_convention: r.map(|r| r.convention.label().to_string()),
                published_params: r.map(|r| r.params),
                published_flops_tol: r.map(|r| r.flops_tol),
                flagged: r.is_some_and(|r| r.flagged),
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[CostRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(text: &str) -> Result<Vec<CostRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

fn giga(v: f64) -> String {
    format!("{:.2}G", v / 1e9)
}

fn mega(v: f64) -> String {
    format!("{:.2}M", v / 1e6)
}

pub fn render_text(rows: &[CostRow]) -> String {
    let mut lines = vec![format!(
        "input {}x{}x{}; FLOPs count one multiply-accumulate as 2 (MAC=2) or 1 (MAC=1)",
        rows.first().map_or(0, |r| r.c),
        rows.first().map_or(0, |r| r.h),
        rows.first().map_or(0, |r| r.w),
    )];
    let header = [
        "block", "FLOPs MAC=2", "FLOPs MAC=1", "params", "affinity", "computation", "affinity class", "published",
    ];
    let mut table: Vec<[String; 8]> = vec![header.map(String::from)];
    for r in rows {
        let published = match (&r.published_flops, &r.published_convention, &r.published_params) {
            (Some(f), Some(conv), Some(p)) => {
                let mut s = format!("{} ({conv}), {}", giga(*f), mega(*p));
                if r.flagged {
                    s.push_str(" [flagged]");
                }
                s
            }
            _ => "-".into(),
        };
        let name = if r.exact { r.block.clone() } else { format!("{}*", r.block) };
        table.push([
            name,
            giga(r.flops_mac2 as f64),
            giga(r.flops_mac1 as f64),
            mega(r.params as f64),
            r.affinity_elems.to_string(),
            r.computation.clone(),
            r.affinity_class.clone(),
            published,
        ]);
    }
    let widths: Vec<usize> = (0..8).map(|i| table.iter().map(|r| r[i].chars().count()).max().unwrap_or(0)).collect();
    for row in &table {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        lines.push(cells.join("  ").trim_end().to_string());
    }
    lines.push("* coarse estimate, no runnable kernel".into());
    lines.push("[flagged] this layout does not reproduce the published figure closely".into());
    lines.join("\n") + "\n"
}
