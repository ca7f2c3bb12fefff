//! Plain-text tables laid out as fold rows plus a `mean ± std` footer.

use std::fmt::Write;

use crate::analysis::{Arm, ComparisonReport, FoldRow};
use crate::bma::{mean_std, LOGLIK_SEMANTICS};

pub fn mean_pm_std(xs: &[f64]) -> String {
    let (m, s) = mean_std(xs);
    format!("{m:.2} ± {s:.2}")
}

fn col<F: Fn(&FoldRow) -> f64>(rows: &[FoldRow], f: F) -> Vec<f64> {
    rows.iter().map(f).collect()
}

/// Single-arm cross-validation table.
pub fn eval_table(title: &str, rows: &[FoldRow]) -> String {
    let mut s = String::new();
    writeln!(s, "{title}").unwrap();
    writeln!(s, "# {LOGLIK_SEMANTICS}").unwrap();
    writeln!(s, "{:<6}{:>18}{:>18}{:>18}{:>8}", "Fold", "Loglikelihood", "Performance, %", "Entropy", "n_test").unwrap();
    for r in rows {
        writeln!(
            s,
            "{:<6}{:>18.2}{:>18.2}{:>18.2}{:>8}",
            r.fold + 1,
            r.max_train_loglik,
            r.performance_pct,
            r.entropy_bits,
            r.n_test
        )
        .unwrap();
    }
    writeln!(
        s,
        "{:<6}{:>18}{:>18}{:>18}",
        "",
        mean_pm_std(&col(rows, |r| r.max_train_loglik)),
        mean_pm_std(&col(rows, |r| r.performance_pct)),
        mean_pm_std(&col(rows, |r| r.entropy_bits))
    )
    .unwrap();
    s
}

/// Original vs selected ensemble, with omitted tree counts.
pub fn selection_table(original: &[FoldRow], selected: &[FoldRow], variable: &str) -> String {
    let mut s = String::new();
    writeln!(s, "Original vs selected ensemble (trees using `{variable}` omitted)").unwrap();
    writeln!(
        s,
        "{:<6}{:>16}{:>10}{:>14}{:>16}{:>10}",
        "Fold", "Orig perf, %", "Entropy", "BDTs omitted", "Sel perf, %", "Entropy"
    )
    .unwrap();
    for (o, c) in original.iter().zip(selected) {
        writeln!(
            s,
            "{:<6}{:>16.2}{:>10.2}{:>14}{:>16.2}{:>10.2}",
            o.fold + 1,
            o.performance_pct,
            o.entropy_bits,
            c.omitted.unwrap_or(0),
            c.performance_pct,
            c.entropy_bits
        )
        .unwrap();
    }
    let omitted: Vec<f64> = selected.iter().map(|c| c.omitted.unwrap_or(0) as f64).collect();
    writeln!(
        s,
        "{:<6}{:>16}{:>10}{:>14}{:>16}{:>10}",
        "",
        mean_pm_std(&col(original, |r| r.performance_pct)),
        format!("{:.2}", mean_std(&col(original, |r| r.entropy_bits)).0),
        format!("{:.0} ± {:.0}", mean_std(&omitted).0, mean_std(&omitted).1),
        mean_pm_std(&col(selected, |r| r.performance_pct)),
        format!("{:.2}", mean_std(&col(selected, |r| r.entropy_bits)).0),
    )
    .unwrap();
    s
}

/// All three comparison tables in one document.
pub fn comparison_tables(r: &ComparisonReport, names: &[String]) -> String {
    let a = &r.arm(Arm::All).folds;
    let b = &r.arm(Arm::Dropped).folds;
    let c = &r.arm(Arm::Selected).folds;
    let d = &r.arm(Arm::DroppedNoise).folds;
    let m = names.len();
    let w = &r.weakest_name;
    let mut s = String::new();
    writeln!(
        s,
        "Weakest variable: {} ({}){}",
        r.weakest + 1,
        w,
        if r.weakest_from_importance { ", chosen as least used in arm (a)" } else { "" }
    )
    .unwrap();
    writeln!(s, "# {}", r.loglik_semantics).unwrap();
    writeln!(s, "# {}", r.noise_timing).unwrap();
    writeln!(s, "# fold sizes: {:?}", r.plan.fold_sizes()).unwrap();
    writeln!(s).unwrap();

    writeln!(s, "Table: maximal loglikelihoods, {m} vs {m}\\{} variables", r.weakest + 1).unwrap();
    writeln!(s, "{:<14}{:>20}{:>20}", "Fold", format!("L_{m}"), format!("L_{m}\\{}", r.weakest + 1)).unwrap();
    for (x, y) in a.iter().zip(b) {
        writeln!(s, "{:<14}{:>20.2}{:>20.2}", x.fold + 1, x.max_train_loglik, y.max_train_loglik).unwrap();
    }
    for (label, f) in [
        ("Loglikelihood", (|r: &FoldRow| r.max_train_loglik) as fn(&FoldRow) -> f64),
        ("Performance, %", |r: &FoldRow| r.performance_pct),
        ("Entropy", |r: &FoldRow| r.entropy_bits),
    ] {
        writeln!(s, "{:<14}{:>20}{:>20}", label, mean_pm_std(&col(a, f)), mean_pm_std(&col(b, f))).unwrap();
    }
    writeln!(s).unwrap();

    s.push_str(&selection_table(a, c, w));
    writeln!(s).unwrap();

    writeln!(s, "Table: {m} variables vs {m}\\{} variables + noise ({})", r.weakest + 1, r.settings.noise_intensity)
        .unwrap();
    writeln!(s, "{:<6}{:>16}{:>10}{:>16}{:>10}", "Fold", "Perf, %", "Entropy", "Perf, %", "Entropy").unwrap();
    for (x, y) in a.iter().zip(d) {
        writeln!(
            s,
            "{:<6}{:>16.2}{:>10.2}{:>16.2}{:>10.2}",
            x.fold + 1,
            x.performance_pct,
            x.entropy_bits,
            y.performance_pct,
            y.entropy_bits
        )
        .unwrap();
    }
    writeln!(
        s,
        "{:<6}{:>16}{:>10}{:>16}{:>10}",
        "",
        mean_pm_std(&col(a, |r| r.performance_pct)),
        format!("{:.1}", mean_std(&col(a, |r| r.entropy_bits)).0),
        mean_pm_std(&col(d, |r| r.performance_pct)),
        format!("{:.1}", mean_std(&col(d, |r| r.entropy_bits)).0),
    )
    .unwrap();
    writeln!(s).unwrap();

    writeln!(s, "Paired deltas vs arm (a), mean ± std over folds").unwrap();
    for delta in &r.deltas {
        writeln!(
            s,
            "  ({}) {:<45} perf {:+.2} ± {:.2}  entropy {:+.2} ± {:.2}",
            delta.arm.letter(),
            delta.arm.describe(),
            delta.performance_mean,
            delta.performance_std,
            delta.entropy_mean,
            delta.entropy_std
        )
        .unwrap();
    }
    s
}
