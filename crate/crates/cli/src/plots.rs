//! Plot data for cross-validation sweeps: CSV first, plus plain SVG renderings.

use std::fmt::Write as _;

use chitin::evaluation::ComparisonTable;

/// One sweep point: the table produced at a given coefficient count.
pub struct SweepResult {
    pub n_mfcc: usize,
    pub table: ComparisonTable,
}

/// `n_mfcc,model,condition,test_clip,accuracy`, one row per successful cell.
pub fn boxplot_csv(sweep: &[SweepResult]) -> String {
    let mut s = String::from("n_mfcc,model,condition,test_clip,accuracy\n");
    for r in sweep {
        for f in &r.table.families {
            for c in r.table.cells.iter().filter(|c| c.family == *f) {
                if let Some(a) = c.accuracy {
                    let _ = writeln!(s, "{},{},{},{},{}", r.n_mfcc, f, c.condition_id, c.test_clip, a);
                }
            }
        }
    }
    s
}

/// `n_mfcc,model,average_accuracy`.
pub fn bar_csv(sweep: &[SweepResult]) -> String {
    let mut s = String::from("n_mfcc,model,average_accuracy\n");
    for r in sweep {
        for (f, avg) in r.table.averages() {
            let v = avg.map_or_else(|| "failed".to_string(), |a| a.to_string());
            let _ = writeln!(s, "{},{},{}", r.n_mfcc, f, v);
        }
    }
    s
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

const W: f64 = 760.0;
const H: f64 = 420.0;
const LEFT: f64 = 60.0;
const BOTTOM: f64 = 80.0;
const TOP: f64 = 30.0;

fn y_of(acc: f64) -> f64 {
    TOP + (1.0 - acc) * (H - TOP - BOTTOM)
}

fn frame(title: &str) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        W / 2.0
    );
    for tick in 0..=5 {
        let a = tick as f64 / 5.0;
        let y = y_of(a);
        let _ = writeln!(
            s,
            "<line x1=\"{LEFT}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#ddd\"/><text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{a:.1}</text>",
            W - 10.0,
            LEFT - 6.0,
            y + 4.0
        );
    }
    s
}

/// Groups are `(label, values)`; one box per group.
fn render_boxes(title: &str, groups: &[(String, Vec<f64>)]) -> String {
    let mut s = frame(title);
    let slot = (W - LEFT - 10.0) / groups.len().max(1) as f64;
    for (i, (label, values)) in groups.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let _ = writeln!(
            s,
            "<text transform=\"translate({cx:.1},{:.1}) rotate(-40)\" text-anchor=\"end\">{label}</text>",
            H - BOTTOM + 14.0
        );
        if values.is_empty() {
            continue;
        }
        let mut v = values.clone();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite accuracy"));
        let (lo, q1, med, q3, hi) =
            (v[0], quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75), v[v.len() - 1]);
        let half = (slot * 0.3).min(18.0);
        let _ = writeln!(
            s,
            "<line x1=\"{cx:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
             <rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#9ecae1\" stroke=\"black\"/>\n\
             <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"2\"/>",
            y_of(hi),
            y_of(lo),
            cx - half,
            y_of(q3),
            2.0 * half,
            (y_of(q1) - y_of(q3)).max(0.5),
            cx - half,
            y_of(med),
            cx + half,
            y_of(med)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn render_bars(title: &str, bars: &[(String, f64)]) -> String {
    let mut s = frame(title);
    let slot = (W - LEFT - 10.0) / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let half = (slot * 0.35).min(20.0);
        let _ = writeln!(
            s,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#6baed6\"/>\n\
             <text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{v:.2}</text>\n\
             <text transform=\"translate({cx:.1},{:.1}) rotate(-40)\" text-anchor=\"end\">{label}</text>",
            cx - half,
            y_of(*v),
            2.0 * half,
            y_of(0.0) - y_of(*v),
            y_of(*v) - 4.0,
            H - BOTTOM + 14.0
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn boxplot_svg(sweep: &[SweepResult]) -> String {
    let groups: Vec<(String, Vec<f64>)> = sweep
        .iter()
        .flat_map(|r| {
            r.table.families.iter().map(move |f| {
                let accs = r.table.cells.iter().filter(|c| c.family == *f).filter_map(|c| c.accuracy).collect();
                (format!("{f} @{}", r.n_mfcc), accs)
            })
        })
        .collect();
    render_boxes("Accuracy per condition", &groups)
}

pub fn bar_svg(sweep: &[SweepResult]) -> String {
    let bars: Vec<(String, f64)> = sweep
        .iter()
        .flat_map(|r| r.table.averages().into_iter().map(move |(f, a)| (format!("{f} @{}", r.n_mfcc), a.unwrap_or(0.0))))
        .collect();
    render_bars("Average accuracy", &bars)
}
