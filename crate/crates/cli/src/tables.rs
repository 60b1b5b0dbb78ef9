//! CSV and Markdown tabulation of benchmark results.

use std::collections::BTreeMap;

/// One solver result on one instance.
#[derive(Clone, Debug)]
pub struct BenchCell {
    pub instance: String,
    pub el: u32,
    pub sp: String,
    pub drones: usize,
    pub depot: String,
    pub best_known: Option<f64>,
    pub algo: String,
    pub cost: f64,
    pub gap_pct: Option<f64>,
    pub seconds: f64,
    pub proven: bool,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

/// Long-format CSV: one row per instance and algorithm, followed by
/// Max/Min/Avg summary rows per algorithm over the gap and time
/// columns. Missing reference values leave the gap blank.
pub fn bench_csv(cells: &[BenchCell], algos: &[String]) -> String {
    let mut out = String::from("instance,el,sp,drones,depot,best_known,algo,cost,gap_pct,seconds,proven\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.2},{},{:.2},{}\n",
            c.instance,
            c.el,
            c.sp,
            c.drones,
            c.depot,
            fmt_opt(c.best_known),
            c.algo,
            c.cost,
            fmt_opt(c.gap_pct),
            c.seconds,
            c.proven
        ));
    }
    for algo in algos {
        let gaps: Vec<f64> = cells
            .iter()
            .filter(|c| &c.algo == algo)
            .filter_map(|c| c.gap_pct)
            .collect();
        let secs: Vec<f64> = cells
            .iter()
            .filter(|c| &c.algo == algo)
            .map(|c| c.seconds)
            .collect();
        for (label, g, s) in [
            ("Max", reduce(&gaps, f64::max), reduce(&secs, f64::max)),
            ("Min", reduce(&gaps, f64::min), reduce(&secs, f64::min)),
            ("Avg", mean(&gaps), mean(&secs)),
        ] {
            out.push_str(&format!(
                "{label},,,,,,{algo},,{},{},\n",
                fmt_opt(g),
                fmt_opt(s)
            ));
        }
    }
    out
}

fn reduce(values: &[f64], f: fn(f64, f64) -> f64) -> Option<f64> {
    values.iter().copied().reduce(f)
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Wide Markdown table in the benchmark layout: settings and best
/// known, then cost/gap/seconds per algorithm, and the Max/Min/Avg
/// footer.
pub fn bench_markdown(cells: &[BenchCell], algos: &[String]) -> String {
    // Group by instance, keeping first-seen order.
    let mut order: Vec<String> = Vec::new();
    let mut by_instance: BTreeMap<String, Vec<&BenchCell>> = BTreeMap::new();
    for c in cells {
        if !by_instance.contains_key(&c.instance) {
            order.push(c.instance.clone());
        }
        by_instance.entry(c.instance.clone()).or_default().push(c);
    }

    let mut out = String::from("| el | sp | # | dp | best known |");
    for a in algos {
        out.push_str(&format!(" {a} cost | {a} gap % | {a} sec |"));
    }
    out.push('\n');
    out.push_str("|---|---|---|---|---|");
    for _ in algos {
        out.push_str("---|---|---|");
    }
    out.push('\n');

    for name in &order {
        let group = &by_instance[name];
        let head = group[0];
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |",
            head.el,
            head.sp,
            head.drones,
            head.depot,
            fmt_opt(head.best_known)
        ));
        for a in algos {
            match group.iter().find(|c| &c.algo == a) {
                Some(c) => out.push_str(&format!(
                    " {:.2} | {} | {:.2} |",
                    c.cost,
                    c.gap_pct.map(|g| format!("{g:.2}")).unwrap_or("-".into()),
                    c.seconds
                )),
                None => out.push_str(" - | - | - |"),
            }
        }
        out.push('\n');
    }

    for (label, pick) in [
        ("Max", reduce as fn(&[f64], fn(f64, f64) -> f64) -> Option<f64>),
        ("Min", reduce),
        ("Avg", |v: &[f64], _f: fn(f64, f64) -> f64| mean(v)),
    ] {
        out.push_str(&format!("| {label} | | | | |"));
        for a in algos {
            let gaps: Vec<f64> = cells
                .iter()
                .filter(|c| &c.algo == a)
                .filter_map(|c| c.gap_pct)
                .collect();
            let secs: Vec<f64> = cells
                .iter()
                .filter(|c| &c.algo == a)
                .map(|c| c.seconds)
                .collect();
            let f = if label == "Max" { f64::max } else { f64::min };
            out.push_str(&format!(
                "  | {} | {} |",
                fmt_opt(pick(&gaps, f)),
                fmt_opt(pick(&secs, f))
            ));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(instance: &str, algo: &str, gap: Option<f64>, secs: f64) -> BenchCell {
        BenchCell {
            instance: instance.into(),
            el: 80,
            sp: "2".into(),
            drones: 1,
            depot: "1".into(),
            best_known: gap.map(|_| 100.0),
            algo: algo.into(),
            cost: 105.0,
            gap_pct: gap,
            seconds: secs,
            proven: false,
        }
    }

    #[test]
    fn empty_suite_is_header_only() {
        let csv = bench_csv(&[], &[]);
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("instance,el,sp,drones,depot"));
    }

    #[test]
    fn avg_row_matches_recomputed_mean() {
        let cells = vec![
            cell("a", "fast", Some(4.0), 1.0),
            cell("b", "fast", Some(6.0), 3.0),
            cell("c", "fast", None, 2.0),
        ];
        let csv = bench_csv(&cells, &["fast".into()]);
        let avg_line = csv.lines().find(|l| l.starts_with("Avg")).unwrap();
        let fields: Vec<&str> = avg_line.split(',').collect();
        // Mean gap over present values only; mean seconds over all.
        assert_eq!(fields[8], format!("{:.2}", (4.0 + 6.0) / 2.0));
        assert_eq!(fields[9], format!("{:.2}", (1.0 + 3.0 + 2.0) / 3.0));
        let max_line = csv.lines().find(|l| l.starts_with("Max")).unwrap();
        assert!(max_line.contains("6.00"));
    }

    #[test]
    fn blank_gap_when_reference_missing() {
        let cells = vec![cell("a", "fast", None, 1.0)];
        let csv = bench_csv(&cells, &["fast".into()]);
        let row = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[8], "");
        assert_ne!(fields[7], "");
    }
}
