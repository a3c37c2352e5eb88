//! Plateau spread, escape deltas and regime verdicts from a table of cell
//! means, as `experiment analyze` prints them.

use rankprune::analysis::{build_report, regime_verdict, CellStats, ClassMap, Thresholds};

const VARIANTS: [&str; 9] = [
    "V1a",
    "RandomSpline",
    "V1d",
    "V1b",
    "V1",
    "A5",
    "NL_sin",
    "Weier4",
    "PureMag4",
];

fn main() {
    // rows: sparsity, then one mean per variant above
    let table: [(f64, [f64; 9]); 2] = [
        (0.5, [0.90, 0.902, 0.899, 0.901, 0.903, 0.905, 0.900, 0.898, 0.897]),
        (0.7, [0.60, 0.601, 0.600, 0.640, 0.655, 0.671, 0.650, 0.640, 0.630]),
    ];
    let cells: Vec<CellStats> = table
        .iter()
        .flat_map(|(s, means)| VARIANTS.iter().zip(means).map(|(v, m)| CellStats::fixture(*v, *s, *m)))
        .collect();
    let report = build_report(cells, &ClassMap::default());
    print!("{}", report.text_tables());

    let t = Thresholds::default();
    for (a_plateau, a_env, a_raw) in [(0.865, 0.868, 0.851), (0.622, 0.688, 0.693)] {
        let v = regime_verdict(a_env - a_plateau, a_raw - a_env, &t);
        println!("probes ({a_plateau}, {a_env}, {a_raw}) -> {v}");
    }
}
