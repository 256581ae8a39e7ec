//! Human tables (4 decimals) and CSV (17 significant digits).

use std::collections::BTreeMap;
use std::fmt::Write;

use n3body::action::ActionBreakdown;
use n3body::bounds::{LemmaReport, LemmaStatus, ThresholdReport};
use n3body::loops::sci17;
use n3body::solver::MembershipReport;
use n3body::testorbits::CertificateReport;
use n3body::{Complex64, SymmetryParams, Trajectory, WindingTable};

fn lattice_summary(sizes: &[((usize, usize), usize)]) -> String {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for (_, n) in sizes {
        *counts.entry(*n).or_default() += 1;
    }
    counts.iter().map(|(size, pairs)| format!("{pairs}x{size}")).collect::<Vec<_>>().join(" ")
}

pub fn bounds_table(params: &SymmetryParams, reports: &[ThresholdReport]) -> String {
    let mut out = String::new();
    let first = &reports[0];
    writeln!(out, "{params}").unwrap();
    write!(out, "{:<10} {:<5} {:<8} {:<14}", "case", "const", "seed", "lattices").unwrap();
    for r in reports {
        write!(out, " {:>12}", format!("pi={}", r.pi)).unwrap();
    }
    out.push('\n');
    for (k, case) in first.cases.iter().enumerate() {
        write!(
            out,
            "{:<10} {:<5} {:<8} {:<14}",
            case.label,
            case.constant,
            format!("({},{})", case.pair.0, case.pair.1),
            lattice_summary(&case.lattice_sizes)
        )
        .unwrap();
        for r in reports {
            write!(out, " {:>12.4}", r.cases[k].bound).unwrap();
        }
        out.push('\n');
    }
    write!(out, "{:<40}", format!("threshold {}", first.parity.symbol())).unwrap();
    for r in reports {
        write!(out, " {:>12.4}", r.threshold).unwrap();
    }
    out.push('\n');
    writeln!(out, "{}", first.parity.describe()).unwrap();
    out
}

pub fn bounds_csv(reports: &[ThresholdReport]) -> String {
    let mut out = String::from("pi,case,constant,i,j,bound\n");
    for r in reports {
        for c in &r.cases {
            writeln!(out, "{},{},{},{},{},{}", r.pi, c.label, c.constant, c.pair.0, c.pair.1, sci17(c.bound)).unwrap();
        }
        writeln!(out, "{},threshold,{},,,{}", r.pi, r.parity.symbol(), sci17(r.threshold)).unwrap();
    }
    out
}

fn windings_line(params: &SymmetryParams, w: &WindingTable) -> String {
    match w.summary(params) {
        Some((k1, k2)) => format!(
            "main pairs {k1} (expected {}), triple pairs {k2} (expected {})",
            params.k1, params.k2
        ),
        None => {
            let bad: Vec<String> = w
                .entries
                .iter()
                .filter(|e| e.measured != Some(e.expected))
                .map(|e| format!("({},{}):{:?}", e.pair.0, e.pair.1, e.measured))
                .collect();
            format!("mismatch at {}", bad.join(" "))
        }
    }
}

pub fn certificate_table(r: &CertificateReport) -> String {
    let mut out = String::new();
    writeln!(out, "params      {}", r.params).unwrap();
    writeln!(out, "test loop   a={:.4} b={:.4} (M={})", r.a, r.b, r.grid).unwrap();
    writeln!(out, "action      f = {:.4} (kinetic {:.4}, potential {:.4})", r.action, r.kinetic, r.potential).unwrap();
    writeln!(out, "threshold   {} = {:.4} (pi {})", r.threshold_symbol, r.threshold, r.pi).unwrap();
    writeln!(out, "margin      {:.4}", r.margin).unwrap();
    writeln!(out, "windings    {}", windings_line(&r.params, &r.windings)).unwrap();
    let verdict = if r.certified() {
        format!("certified: f < {} and windings match, so the minimizer is collision-free", r.threshold_symbol)
    } else {
        "not certified".to_string()
    };
    writeln!(out, "verdict     {verdict}").unwrap();
    out
}

pub fn certificate_csv(r: &CertificateReport) -> String {
    format!(
        "n,r,d,k1,k2,a,b,grid,action,threshold,margin,certified\n{},{},{},{},{},{},{},{},{},{},{},{}\n",
        r.params.n,
        r.params.r,
        r.params.d,
        r.params.k1,
        r.params.k2,
        sci17(r.a),
        sci17(r.b),
        r.grid,
        sci17(r.action),
        sci17(r.threshold),
        sci17(r.margin),
        r.certified()
    )
}

pub fn lemmas_table(report: &LemmaReport, csv: bool) -> String {
    let mut out = String::new();
    if csv {
        out.push_str("lemma,status,detail\n");
    } else {
        writeln!(out, "N={} r={}", report.n, report.r).unwrap();
    }
    for o in &report.outcomes {
        let (status, detail) = match &o.status {
            LemmaStatus::Pass => ("pass", String::new()),
            LemmaStatus::Fail { witness } => ("FAIL", witness.clone()),
            LemmaStatus::NotApplicable { reason } => ("n/a", reason.clone()),
        };
        if csv {
            writeln!(out, "{},{},\"{}\"", o.name, status, detail.replace('"', "'")).unwrap();
        } else {
            writeln!(out, "{:<11} {:<5} {:<42} {}", o.name, status, o.statement, detail).unwrap();
        }
    }
    out
}

pub fn action_table(b: &ActionBreakdown, grid: usize) -> String {
    let mut out = String::new();
    writeln!(out, "grid       {grid}").unwrap();
    writeln!(out, "kinetic    {:.4}", b.kinetic).unwrap();
    writeln!(out, "potential  {:.4}", b.potential).unwrap();
    writeln!(out, "total      {:.4}", b.total).unwrap();
    writeln!(out, "pairwise   {:.4}", b.pairwise_total()).unwrap();
    out
}

pub fn action_csv(b: &ActionBreakdown) -> String {
    let mut out = String::from("i,j,pair_action\n");
    for (i, j, v) in &b.pairs {
        writeln!(out, "{i},{j},{}", sci17(*v)).unwrap();
    }
    writeln!(out, "kinetic,,{}", sci17(b.kinetic)).unwrap();
    writeln!(out, "potential,,{}", sci17(b.potential)).unwrap();
    writeln!(out, "total,,{}", sci17(b.total)).unwrap();
    out
}

pub fn complex_rows(rows: &[Vec<Complex64>]) -> Vec<Vec<[f64; 2]>> {
    rows.iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect()
}

/// One block per body, closed by repeating the first sample.
pub fn plot_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,body,x,y\n");
    let m = traj.samples();
    for b in 0..traj.bodies() {
        for k in 0..=m {
            let p = traj.positions[b][k % m];
            writeln!(out, "{},{},{},{}", sci17(k as f64 / m as f64), b + 1, sci17(p.re), sci17(p.im)).unwrap();
        }
    }
    out
}

pub fn membership_table(params: &SymmetryParams, r: &MembershipReport, ode: Option<f64>) -> String {
    let mut out = String::new();
    writeln!(out, "params             {params}").unwrap();
    writeln!(out, "windings           {}", windings_line(params, &r.windings)).unwrap();
    writeln!(out, "symmetry residual  {:.3e}", r.symmetry_residual).unwrap();
    writeln!(
        out,
        "min separation     {:.4} (bodies {} and {}, node {})",
        r.min_separation.distance, r.min_separation.pair.0, r.min_separation.pair.1, r.min_separation.index
    )
    .unwrap();
    writeln!(out, "center of mass     {:.3e}", r.com_drift).unwrap();
    match ode {
        Some(v) => writeln!(out, "ode residual       {v:.3e}").unwrap(),
        None => writeln!(out, "ode residual       unavailable (near collision)").unwrap(),
    }
    out
}
