use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{escape_delta, plateau_stats, regime_verdict, round_delta, wiggle_premium, CellStats, Thresholds, Verdict};

/// A zone label that a run is expected to land in, e.g. from earlier
/// experiments. Disagreements are flagged, never enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedZone {
    pub sparsity: f64,
    pub zone: Verdict,
}

/// Which variants feed which escape delta.
///
/// The anchor is the plateau scorer whose mean is the reference `Pi(S)`.
/// Rank-monotone variants are the anchor plus `kappa0`; they alone feed the
/// plateau statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMap {
    pub anchor: String,
    #[serde(default)]
    pub kappa0: Vec<String>,
    #[serde(default)]
    pub kappa1: Vec<String>,
    #[serde(default)]
    pub kappa2: Vec<String>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub expected_zones: Vec<ExpectedZone>,
}

impl Default for ClassMap {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        ClassMap {
            anchor: "V1a".into(),
            kappa0: v(&["RandomSpline", "V1d"]),
            kappa1: v(&[
                "V1b",
                "V1c",
                "V1",
                "A5_Log6_smooth",
                "Gauss70",
                "Hat70",
                "Cos70",
                "GaussDual",
            ]),
            kappa2: v(&["A5", "A5_Log6", "NL_sin", "Weier4", "PureMag4"]),
            thresholds: Thresholds::default(),
            expected_zones: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauRow {
    pub sparsity: f64,
    pub estimate: f64,
    pub spread: f64,
    pub variants: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassDeltas {
    pub kappa0: Option<f64>,
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
}

/// Best-scoring variant of each class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassBest {
    pub kappa0: Option<String>,
    pub kappa1: Option<String>,
    pub kappa2: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub sparsity: f64,
    /// Anchor mean, the reference every delta is taken against.
    pub plateau: f64,
    pub deltas: ClassDeltas,
    pub best: ClassBest,
    pub wiggle_premium: Option<f64>,
    /// Envelope class gain over the anchor.
    pub delta_env: Option<f64>,
    /// Raw class gain over the envelope class.
    pub delta_raw: Option<f64>,
    pub verdict: Option<Verdict>,
    pub expected: Option<Verdict>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub cells: Vec<CellStats>,
    pub plateau: Vec<PlateauRow>,
    pub regimes: Vec<RegimeReport>,
    pub warnings: Vec<String>,
}

fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits()
}

fn best_of<'a>(cells: &[&'a CellStats]) -> Option<&'a CellStats> {
    cells.iter().copied().reduce(|a, b| if b.mean > a.mean { b } else { a })
}

/// Assembles every statistic the cells support; gaps become warnings.
pub fn build_report(mut cells: Vec<CellStats>, class_map: &ClassMap) -> AnalysisReport {
    let mut variants: Vec<String> = Vec::new();
    for c in &cells {
        if !variants.contains(&c.variant) {
            variants.push(c.variant.clone());
        }
    }
    let mut sparsities: Vec<f64> = cells.iter().map(|c| c.sparsity).collect();
    sparsities.sort_by(f64::total_cmp);
    sparsities.dedup_by(|a, b| same(*a, *b));
    cells.sort_by(|a, b| {
        a.sparsity.total_cmp(&b.sparsity).then_with(|| {
            let pos = |v: &str| variants.iter().position(|x| x == v);
            pos(&a.variant).cmp(&pos(&b.variant))
        })
    });

    let mut warnings = Vec::new();
    for &s in &sparsities {
        for v in &variants {
            if !cells.iter().any(|c| same(c.sparsity, s) && &c.variant == v) {
                warnings.push(format!("missing cell: {v} at S={s}"));
            }
        }
    }

    let t = class_map.thresholds;
    let mut plateau = Vec::new();
    let mut regimes = Vec::new();
    for &s in &sparsities {
        let at: Vec<&CellStats> = cells.iter().filter(|c| same(c.sparsity, s)).collect();
        let class = |names: &[String]| -> Vec<&CellStats> {
            at.iter().copied().filter(|c| names.contains(&c.variant)).collect()
        };
        let anchor = at.iter().copied().find(|c| c.variant == class_map.anchor);

        let mut monotone = class(&class_map.kappa0);
        if let Some(a) = anchor {
            monotone.insert(0, a);
        }
        let owned: Vec<CellStats> = monotone.iter().map(|c| (*c).clone()).collect();
        match plateau_stats(&owned) {
            Ok((estimate, spread)) => plateau.push(PlateauRow {
                sparsity: s,
                estimate,
                spread,
                variants: owned.iter().map(|c| c.variant.clone()).collect(),
            }),
            Err(_) => warnings.push(format!(
                "plateau stats skipped at S={s}: fewer than 2 rank-monotone variants"
            )),
        }

        let Some(anchor) = anchor else {
            warnings.push(format!(
                "regime analysis skipped at S={s}: anchor variant {} missing",
                class_map.anchor
            ));
            continue;
        };
        let pi = anchor.mean;
        let (k0, k1, k2) = (
            class(&class_map.kappa0),
            class(&class_map.kappa1),
            class(&class_map.kappa2),
        );
        let delta = |cs: &[&CellStats]| {
            let owned: Vec<CellStats> = cs.iter().map(|c| (*c).clone()).collect();
            escape_delta(&owned, pi)
        };
        let deltas = ClassDeltas {
            kappa0: delta(&k0),
            kappa1: delta(&k1),
            kappa2: delta(&k2),
        };
        let best = ClassBest {
            kappa0: best_of(&k0).map(|c| c.variant.clone()),
            kappa1: best_of(&k1).map(|c| c.variant.clone()),
            kappa2: best_of(&k2).map(|c| c.variant.clone()),
        };
        let premium = match (deltas.kappa2, deltas.kappa1) {
            (Some(d2), Some(d1)) => Some(wiggle_premium(d2, d1)),
            _ => None,
        };
        let (a_env, a_raw) = (best_of(&k1).map(|c| c.mean), best_of(&k2).map(|c| c.mean));
        let delta_env = a_env.map(|e| e - pi);
        let delta_raw = a_env.zip(a_raw).map(|(e, r)| r - e);
        let verdict = delta_env.zip(delta_raw).map(|(e, r)| regime_verdict(e, r, &t));
        let expected = class_map
            .expected_zones
            .iter()
            .find(|z| same(z.sparsity, s))
            .map(|z| z.zone);

        let mut flags = Vec::new();
        if verdict.is_none() {
            warnings.push(format!(
                "no verdict at S={s}: both the kappa1 and kappa2 classes need cells"
            ));
        }
        if verdict == Some(Verdict::Kappa0) {
            for (name, d) in [("kappa1", deltas.kappa1), ("kappa2", deltas.kappa2)] {
                if let Some(d) = d.filter(|d| round_delta(*d) >= t.t_env) {
                    flags.push(format!(
                        "verdict kappa0, yet the {name} class beats the anchor by {d:+.4} (>= t_env {})",
                        t.t_env
                    ));
                }
            }
        }
        for (name, d, th) in [("delta_env", delta_env, t.t_env), ("delta_raw", delta_raw, t.t_raw)] {
            if let Some(d) = d.filter(|d| round_delta(*d) == th) {
                flags.push(format!(
                    "{name} = {d:.6} sits exactly on its threshold; strict '<' decided the branch"
                ));
            }
        }
        if let (Some(v), Some(e)) = (verdict, expected) {
            if v != e {
                flags.push(format!("verdict {v} disagrees with expected zone {e}"));
            }
        }
        regimes.push(RegimeReport {
            sparsity: s,
            plateau: pi,
            deltas,
            best,
            wiggle_premium: premium,
            delta_env,
            delta_raw,
            verdict,
            expected,
            flags,
        });
    }

    AnalysisReport {
        schema_version: 1,
        cells,
        plateau,
        regimes,
        warnings,
    }
}

/// Left-aligned first column, right-aligned others.
fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let width: Vec<usize> = (0..cols)
        .map(|j| {
            rows.iter()
                .map(|r| r[j].chars().count())
                .chain(std::iter::once(header[j].chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| -> String {
        let mut out = String::new();
        for (j, c) in cells.iter().enumerate() {
            if j > 0 {
                out.push_str("  ");
            }
            let pad = width[j] - c.chars().count();
            if j == 0 {
                out.push_str(c);
                out.push_str(&" ".repeat(pad));
            } else {
                out.push_str(&" ".repeat(pad));
                out.push_str(c);
            }
        }
        out.trim_end().to_string()
    };
    let mut out = line(header);
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

fn signed(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:+.3}"))
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    fn variants(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for c in &self.cells {
            if !v.contains(&c.variant) {
                v.push(c.variant.clone());
            }
        }
        v
    }

    fn sparsities(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.cells.iter().map(|c| c.sparsity).collect();
        s.sort_by(f64::total_cmp);
        s.dedup_by(|a, b| same(*a, *b));
        s
    }

    /// Aligned text tables: accuracy grid, plateau statistics and regimes.
    pub fn text_tables(&self) -> String {
        let variants = self.variants();
        let mut out = String::new();

        out.push_str("Held-out accuracy (mean +- sample std over seeds)\n\n");
        let header: Vec<String> = std::iter::once("S".to_string())
            .chain(variants.iter().cloned())
            .collect();
        let rows: Vec<Vec<String>> = self
            .sparsities()
            .into_iter()
            .map(|s| {
                std::iter::once(format!("{s}"))
                    .chain(variants.iter().map(|v| {
                        self.cells
                            .iter()
                            .find(|c| same(c.sparsity, s) && &c.variant == v)
                            .map_or("-".into(), |c| format!("{:.4}+-{:.4}", c.mean, c.std))
                    }))
                    .collect()
            })
            .collect();
        out.push_str(&table(&header, &rows));

        out.push_str("\nPlateau across rank-monotone scorers\n\n");
        let header: Vec<String> = ["S", "plateau", "spread", "variants"].map(String::from).to_vec();
        let rows: Vec<Vec<String>> = self
            .plateau
            .iter()
            .map(|p| {
                vec![
                    format!("{}", p.sparsity),
                    format!("{:.4}", p.estimate),
                    format!("{:.4}", p.spread),
                    p.variants.join(","),
                ]
            })
            .collect();
        out.push_str(&table(&header, &rows));

        out.push_str("\nEscape deltas and regime verdicts\n\n");
        let header: Vec<String> = [
            "S", "Pi(S)", "d_k0", "d_k1", "d_k2", "premium", "verdict", "expected", "flags",
        ]
        .map(String::from)
        .to_vec();
        let rows: Vec<Vec<String>> = self
            .regimes
            .iter()
            .map(|r| {
                vec![
                    format!("{}", r.sparsity),
                    format!("{:.3}", r.plateau),
                    signed(r.deltas.kappa0),
                    signed(r.deltas.kappa1),
                    signed(r.deltas.kappa2),
                    signed(r.wiggle_premium),
                    r.verdict.map_or("-".into(), |v| v.to_string()),
                    r.expected.map_or("-".into(), |v| v.to_string()),
                    r.flags.len().to_string(),
                ]
            })
            .collect();
        out.push_str(&table(&header, &rows));

        let flagged: Vec<&RegimeReport> = self.regimes.iter().filter(|r| !r.flags.is_empty()).collect();
        if !flagged.is_empty() {
            out.push_str("\nFlagged diagnostics\n\n");
            for r in flagged {
                for f in &r.flags {
                    let _ = writeln!(out, "S={}: {f}", r.sparsity);
                }
            }
        }
        if !self.warnings.is_empty() {
            out.push_str("\nWarnings\n\n");
            for w in &self.warnings {
                let _ = writeln!(out, "{w}");
            }
        }
        out
    }

    /// `sparsity,variant,mean,std`, one row per cell.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("sparsity,variant,mean,std\n");
        for c in &self.cells {
            let _ = writeln!(out, "{},{},{},{}", c.sparsity, c.variant, c.mean, c.std);
        }
        out
    }

    /// Writes `report.json`, `report.txt` and `plot.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let files = [
            ("report.json", self.to_json()),
            ("report.txt", self.text_tables()),
            ("plot.csv", self.plot_csv()),
        ];
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Published 3-decimal means, columns in this order.
    pub(crate) const VARIANTS: [&str; 9] = [
        "Taylor",
        "V1a",
        "RandomSpline",
        "V1b",
        "V1",
        "A5",
        "A5_Log6",
        "NL_sin",
        "PureMag4",
    ];
    pub(crate) const MEANS: [(f64, [f64; 9]); 4] = [
        (0.5, [0.911, 0.927, 0.925, 0.932, 0.932, 0.932, 0.920, 0.926, 0.926]),
        (0.6, [0.757, 0.865, 0.867, 0.858, 0.868, 0.851, 0.857, 0.839, 0.834]),
        (0.7, [0.600, 0.622, 0.627, 0.668, 0.688, 0.693, 0.629, 0.648, 0.580]),
        (0.8, [0.247, 0.377, 0.372, 0.327, 0.356, 0.403, 0.342, 0.355, 0.339]),
    ];

    fn fixture() -> Vec<CellStats> {
        MEANS
            .iter()
            .flat_map(|(s, row)| {
                VARIANTS
                    .iter()
                    .zip(row)
                    .map(move |(v, &m)| CellStats::fixture(*v, *s, m))
            })
            .collect()
    }

    #[test]
    fn reproduces_published_deltas() {
        // (kappa0, kappa1, kappa2, premium)
        let expect = [
            (-0.003, 0.005, 0.005, 0.0),
            (0.001, 0.003, -0.008, -0.011),
            (0.005, 0.066, 0.071, 0.005),
            (-0.005, -0.021, 0.026, 0.047),
        ];
        let report = build_report(fixture(), &ClassMap::default());
        assert_eq!(report.regimes.len(), 4);
        for (r, e) in report.regimes.iter().zip(expect) {
            let close = |a: Option<f64>, b: f64| (a.unwrap() - b).abs() <= 0.001 + 1e-9;
            assert!(close(r.deltas.kappa0, e.0), "{r:?}");
            assert!(close(r.deltas.kappa1, e.1), "{r:?}");
            assert!(close(r.deltas.kappa2, e.2), "{r:?}");
            assert!(close(r.wiggle_premium, e.3), "{r:?}");
        }
        let verdicts: Vec<Verdict> = report.regimes.iter().map(|r| r.verdict.unwrap()).collect();
        assert_eq!(
            verdicts,
            [Verdict::Kappa0, Verdict::Kappa0, Verdict::Kappa2, Verdict::Kappa0]
        );
        assert!(report.regimes[0].flags.is_empty());
        assert!(report.regimes[1].flags.is_empty());
        assert!(!report.regimes[2].flags.is_empty());
        assert!(!report.regimes[3].flags.is_empty());
    }

    #[test]
    fn expected_zone_disagreements_are_flagged() {
        let mut map = ClassMap::default();
        map.expected_zones = [
            (0.5, Verdict::Kappa0),
            (0.6, Verdict::Kappa0),
            (0.7, Verdict::Kappa1),
            (0.8, Verdict::Kappa2),
        ]
        .into_iter()
        .map(|(sparsity, zone)| ExpectedZone { sparsity, zone })
        .collect();
        let report = build_report(fixture(), &map);
        let disagree: Vec<bool> = report
            .regimes
            .iter()
            .map(|r| r.flags.iter().any(|f| f.contains("disagrees")))
            .collect();
        assert_eq!(disagree, [false, false, true, true]);
    }

    #[test]
    fn single_variant_skips_plateau() {
        let report = build_report(vec![CellStats::fixture("V1a", 0.5, 0.9)], &ClassMap::default());
        assert!(report.plateau.is_empty());
        assert!(report.warnings.iter().any(|w| w.contains("plateau stats skipped")));
    }

    #[test]
    fn gaps_are_marked() {
        let mut cells = fixture();
        cells.retain(|c| !(c.variant == "A5" && c.sparsity == 0.7));
        let report = build_report(cells, &ClassMap::default());
        assert!(report.warnings.iter().any(|w| w.contains("missing cell: A5 at S=0.7")));
        let text = report.text_tables();
        assert!(text.contains("Flagged diagnostics"));
    }

    #[test]
    fn outputs_are_pure_and_complete() {
        let a = build_report(fixture(), &ClassMap::default());
        let b = build_report(fixture(), &ClassMap::default());
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.text_tables(), b.text_tables());
        let csv = a.plot_csv();
        assert_eq!(csv.lines().count(), 1 + 36);
        assert!(csv.starts_with("sparsity,variant,mean,std\n0.5,Taylor,0.911,0\n"));
        let back: AnalysisReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(a.write_to(dir.path()).unwrap().len(), 3);
    }
}
