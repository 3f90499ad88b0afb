//! Report tables and plot data from a completed results store.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluate::{compare_groups, pearson_fisher, AurocReport, GridFilter, GroupContrast, MethodConfig, Z_95};
use crate::inference::CI_MULTIPLIER;
use crate::lagreg::Model;
use crate::store::Store;

/// A named pair of configuration groups.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastSpec {
    pub name: String,
    pub a: GridFilter,
    pub b: GridFilter,
}

fn contrast(name: &str, a: &str, b: &str) -> ContrastSpec {
    ContrastSpec {
        name: name.into(),
        a: a.parse().expect("built-in filter"),
        b: b.parse().expect("built-in filter"),
    }
}

/// Time axis, the differencing and model pairing, and the preferred set
/// against the rest of the grid.
pub fn canonical_contrasts() -> Vec<ContrastSpec> {
    let matched = "diff=yes,model=joint | diff=no,model=indep";
    let preferred = "time=seq,diff=yes,model=joint | time=seq,diff=no,model=indep";
    let complement = "time=real | diff=yes,model=indep | diff=no,model=joint";
    vec![
        contrast("sequence vs real time", "time=seq", "time=real"),
        contrast("joint: differenced vs levels", "model=joint,diff=yes", "model=joint,diff=no"),
        contrast("independent: levels vs differenced", "model=indep,diff=no", "model=indep,diff=yes"),
        contrast(
            "matched vs mismatched differencing and model",
            matched,
            "diff=yes,model=indep | diff=no,model=joint",
        ),
        contrast("preferred set vs complement", preferred, complement),
    ]
}

/// Contrast restricted to the configurations present in `reports`; `None`
/// when either side is empty there.
pub fn run_contrast(spec: &ContrastSpec, reports: &[AurocReport]) -> Result<Option<GroupContrast>> {
    let present: Vec<MethodConfig> = reports.iter().map(|r| r.config).collect();
    let a: Vec<MethodConfig> = present.iter().copied().filter(|c| spec.a.matches(c)).collect();
    let b: Vec<MethodConfig> = present.iter().copied().filter(|c| spec.b.matches(c)).collect();
    if a.is_empty() || b.is_empty() {
        return Ok(None);
    }
    compare_groups(&a, &b, reports).map(Some)
}

/// Rows sorted by descending AUROC against the first gold standard, ties in
/// grid order.
pub fn grid_table(golds: &[String], reports: &[Vec<AurocReport>]) -> String {
    let mut s = String::from("time,binned,normalized,difference,context,estimation");
    for g in golds {
        let _ = write!(s, ",auroc_{g},sd_{g}");
    }
    s.push('\n');
    let mut order: Vec<usize> = (0..reports.first().map_or(0, Vec::len)).collect();
    if let Some(first) = reports.first() {
        order.sort_by(|&i, &j| {
            first[j]
                .auroc
                .total_cmp(&first[i].auroc)
                .then(first[i].config.index().cmp(&first[j].config.index()))
        });
    }
    for i in order {
        s.push_str(&reports[0][i].config.table_columns().join(","));
        for r in reports {
            let _ = write!(s, ",{},{}", r[i].auroc, r[i].sd);
        }
        s.push('\n');
    }
    s
}

fn roc_table(reports: &[Vec<AurocReport>]) -> String {
    let mut s = String::from("gold,config,curve,fpr,tpr\n");
    for r in reports.iter().flatten() {
        for (name, pts) in &r.curves {
            for (f, t) in pts {
                let _ = writeln!(s, "{},{},{name},{f},{t}", r.gold, r.config.key());
            }
        }
    }
    s
}

fn trajectory_table(store: &Store) -> String {
    let f = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
    let mut s = String::from("drug,lab,config,tau,beta,lower,upper\n");
    for c in &store.cells {
        let p = &c.profile;
        for t in 0..p.max_lag() {
            let (b, sd) = (p.beta_hat[t], p.sigma[t]);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                c.pair.drug,
                c.pair.lab,
                c.config.key(),
                t + 1,
                f(b),
                f(b - CI_MULTIPLIER * sd),
                f(b + CI_MULTIPLIER * sd)
            );
        }
    }
    s
}

fn scatter_table(reports: &[Vec<AurocReport>]) -> Result<String> {
    let (a, b) = (&reports[0], &reports[1]);
    let xs: Vec<f64> = a.iter().map(|r| r.auroc).collect();
    let ys: Vec<f64> = b.iter().map(|r| r.auroc).collect();
    let mut s = match pearson_fisher(&xs, &ys) {
        Ok(c) => format!("# pearson r={} ci_low={} ci_high={} n={}\n", c.r, c.ci.0, c.ci.1, c.n),
        Err(Error::InsufficientData(m)) => format!("# pearson undefined: {m}\n"),
        Err(e) => return Err(e),
    };
    let _ = writeln!(
        s,
        "config,auroc_{0},low_{0},high_{0},auroc_{1},low_{1},high_{1}",
        a[0].gold, b[0].gold
    );
    for (ra, rb) in a.iter().zip(b) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            ra.config.key(),
            ra.auroc,
            ra.auroc - Z_95 * ra.sd,
            ra.auroc + Z_95 * ra.sd,
            rb.auroc,
            rb.auroc - Z_95 * rb.sd,
            rb.auroc + Z_95 * rb.sd
        );
    }
    Ok(s)
}

fn contrast_table(reports: &[Vec<AurocReport>]) -> Result<String> {
    let mut s = String::from("gold,contrast,difference,sd,ci_low,ci_high,size_a,size_b\n");
    for r in reports {
        for spec in canonical_contrasts() {
            if let Some(c) = run_contrast(&spec, r)? {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    r[0].gold, spec.name, c.difference, c.sd, c.ci.0, c.ci.1, c.size_a, c.size_b
                );
            }
        }
    }
    Ok(s)
}

/// Interval chart: one row per configuration, sorted like the grid table,
/// with the point AUROC and a 95% interval per gold standard, plus a strip
/// marking which method options are on.
pub fn auroc_chart_svg(reports: &[Vec<AurocReport>]) -> String {
    let rows = reports.first().map_or(0, Vec::len);
    let mut order: Vec<usize> = (0..rows).collect();
    if let Some(first) = reports.first() {
        order.sort_by(|&i, &j| {
            first[j]
                .auroc
                .total_cmp(&first[i].auroc)
                .then(first[i].config.index().cmp(&first[j].config.index()))
        });
    }
    let (row_h, plot_x, plot_w) = (12.0, 110.0, 400.0);
    let height = 40.0 + row_h * rows as f64;
    let x_of = |a: f64| plot_x + plot_w * a.clamp(0.0, 1.0);
    let colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"9\">\n",
        plot_x + plot_w + 20.0
    );
    for (k, label) in ["T", "B", "N", "D", "C", "J"].iter().enumerate() {
        let _ = writeln!(s, "<text x=\"{}\" y=\"14\">{label}</text>", 5.0 + k as f64 * 15.0);
    }
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let x = x_of(tick);
        let _ = writeln!(
            s,
            "<line x1=\"{x}\" y1=\"20\" x2=\"{x}\" y2=\"{height}\" stroke=\"#ddd\"/><text x=\"{}\" y=\"14\">{tick}</text>",
            x - 6.0
        );
    }
    for (row, &i) in order.iter().enumerate() {
        let y = 24.0 + row as f64 * row_h;
        let cfg = reports[0][i].config;
        let flags = [
            cfg.time == crate::evaluate::TimeAxis::Sequence,
            cfg.binned,
            cfg.normalized,
            cfg.differenced,
            cfg.context,
            cfg.model == Model::Joint,
        ];
        for (k, on) in flags.iter().enumerate() {
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{y}\" width=\"13\" height=\"{}\" fill=\"{}\"/>",
                3.0 + k as f64 * 15.0,
                row_h - 2.0,
                if *on { "#d2b48c" } else { "#4a7ab0" }
            );
        }
        for (g, r) in reports.iter().enumerate() {
            let rep = &r[i];
            let cy = y + 3.0 + g as f64 * 4.0;
            let col = colours[g % colours.len()];
            let _ = writeln!(
                s,
                "<line x1=\"{}\" y1=\"{cy}\" x2=\"{}\" y2=\"{cy}\" stroke=\"{col}\"/><circle cx=\"{}\" cy=\"{cy}\" r=\"2\" fill=\"{col}\"/>",
                x_of(rep.auroc - Z_95 * rep.sd),
                x_of(rep.auroc + Z_95 * rep.sd),
                x_of(rep.auroc)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Write every report artifact under `<store>/report/` and return the
/// paths written.
pub fn write_report(store: &Store) -> Result<Vec<PathBuf>> {
    let reports = store.evaluate()?;
    let dir = store.dir.join("report");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let labels: Vec<String> = store.golds.iter().map(|g| g.label.clone()).collect();
    let mut outputs = vec![
        ("grid_table.csv", grid_table(&labels, &reports)),
        ("roc_points.csv", roc_table(&reports)),
        ("trajectories.csv", trajectory_table(store)),
        ("contrasts.csv", contrast_table(&reports)?),
        ("auroc_chart.svg", auroc_chart_svg(&reports)),
    ];
    if reports.len() >= 2 {
        outputs.push(("scatter.csv", scatter_table(&reports)?));
    }
    let mut written = Vec::new();
    for (name, text) in outputs {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}

/// Ad-hoc contrast of two configuration predicates against every gold
/// standard in the store; `None` where a group selects nothing.
pub fn compare(store: &Store, a: &GridFilter, b: &GridFilter) -> Result<Vec<(String, Option<GroupContrast>)>> {
    let spec = ContrastSpec {
        name: "ad hoc".into(),
        a: a.clone(),
        b: b.clone(),
    };
    store
        .evaluate()?
        .iter()
        .zip(&store.golds)
        .map(|(r, g)| Ok((g.label.clone(), run_contrast(&spec, r)?)))
        .collect()
}

/// Load a store and write its report.
pub fn report(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    write_report(&Store::open(dir)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::enumerate_grid;
    use crate::reference::parse_grid_table;

    fn reports(gold: &str, f: impl Fn(&MethodConfig) -> f64) -> Vec<AurocReport> {
        enumerate_grid()
            .into_iter()
            .map(|config| AurocReport {
                config,
                gold: gold.into(),
                auroc: f(&config),
                draws: vec![f(&config); 4],
                sd: 0.0,
                curves: Vec::new(),
            })
            .collect()
    }

    #[test]
    fn table_sorted_and_reparseable() {
        let r = vec![
            reports("expert", |c| c.index() as f64 / 64.0),
            reports("kb", |c| 1.0 - c.index() as f64 / 64.0),
        ];
        let text = grid_table(&["expert".into(), "kb".into()], &r);
        let (labels, rows) = parse_grid_table(&text).unwrap();
        assert_eq!(labels, vec!["expert", "kb"]);
        assert_eq!(rows.len(), 64);
        assert_eq!(rows[0].config.index(), 63);
        assert!(rows.windows(2).all(|w| w[0].scores[0].0 >= w[1].scores[0].0));
    }

    #[test]
    fn canonical_contrasts_cover_grid() {
        let r = reports("g", |c| if c.is_preferred() { 0.9 } else { 0.5 });
        let specs = canonical_contrasts();
        assert_eq!(specs[0].name, "sequence vs real time");
        let pref = run_contrast(&specs[4], &r).unwrap().unwrap();
        assert_eq!((pref.size_a, pref.size_b), (16, 48));
        assert!((pref.difference - 0.4).abs() < 1e-12);
        let time = run_contrast(&specs[0], &r).unwrap().unwrap();
        assert_eq!((time.size_a, time.size_b), (32, 32));
    }
}
