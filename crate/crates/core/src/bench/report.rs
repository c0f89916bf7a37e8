use std::fmt::Write as _;

use crate::bench::ConfusionMatrix;

/// One evaluated (method, offset) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub method: String,
    pub dt_us: u64,
    pub miou: f64,
    pub per_class: Vec<Option<f64>>,
    pub hole_fraction: f64,
    pub confusion: ConfusionMatrix,
    /// Wall-clock time of the run. Not part of the CSV.
    pub runtime_ms: f64,
}

impl BenchRow {
    pub fn new(method: &str, dt_us: u64, confusion: ConfusionMatrix, hole_fraction: f64, runtime_ms: f64) -> Self {
        BenchRow {
            method: method.to_string(),
            dt_us,
            miou: confusion.miou(),
            per_class: confusion.iou(),
            hole_fraction,
            confusion,
            runtime_ms,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub kind: String,
    pub seed: u64,
    pub num_classes: usize,
    /// Scene and option settings the run used, in their file formats.
    pub config: String,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn new(kind: &str, seed: u64, num_classes: usize, config: String) -> Self {
        BenchReport { kind: kind.to_string(), seed, num_classes, config, rows: Vec::new() }
    }

    pub fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method.as_str()) {
                out.push(&r.method);
            }
        }
        out
    }

    pub fn row(&self, method: &str, dt_us: u64) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method && r.dt_us == dt_us)
    }

    /// `(dt_us, miou)` points of one method in row order.
    pub fn curve(&self, method: &str) -> Vec<(u64, f64)> {
        self.rows.iter().filter(|r| r.method == method).map(|r| (r.dt_us, r.miou)).collect()
    }

    /// Confusion summed over every offset of one method.
    pub fn aggregate(&self, method: &str) -> ConfusionMatrix {
        let mut total = ConfusionMatrix::new(self.num_classes);
        for r in self.rows.iter().filter(|r| r.method == method) {
            total.merge(&r.confusion).expect("rows share the class count");
        }
        total
    }

    pub fn runtime_ms(&self) -> f64 {
        self.rows.iter().map(|r| r.runtime_ms).sum()
    }

    /// Comment lines echo the kind, seed and configuration, then one row per
    /// cell. Excluded classes leave their IoU column empty; the confusion
    /// column lists the row-major counts separated by spaces.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# kind={} seed={}", self.kind, self.seed);
        for line in self.config.lines().filter(|l| !l.trim().is_empty()) {
            let _ = writeln!(s, "# {line}");
        }
        s.push_str("method,dt_us,miou,hole_fraction");
        for k in 0..self.num_classes {
            let _ = write!(s, ",iou_{k}");
        }
        s.push_str(",confusion\n");
        for r in &self.rows {
            let _ = write!(s, "{},{},{:.6},{:.6}", r.method, r.dt_us, r.miou, r.hole_fraction);
            for iou in &r.per_class {
                match iou {
                    Some(v) => {
                        let _ = write!(s, ",{v:.6}");
                    }
                    None => s.push(','),
                }
            }
            let counts: Vec<String> = r.confusion.counts().iter().map(u64::to_string).collect();
            let _ = writeln!(s, ",{}", counts.join(" "));
        }
        s
    }

    /// Line chart of mIoU against offset, one polyline per method.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const M: f64 = 50.0;
        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
        let xs: Vec<u64> = self.rows.iter().map(|r| r.dt_us).collect();
        let (x0, x1) = (xs.iter().copied().min().unwrap_or(0) as f64, xs.iter().copied().max().unwrap_or(1) as f64);
        let span = if x1 > x0 { x1 - x0 } else { 1.0 };
        let px = |x: u64| M + (x as f64 - x0) / span * (W - 2.0 * M);
        let py = |y: f64| H - M - y.clamp(0.0, 1.0) * (H - 2.0 * M);

        let mut s = String::new();
        let _ =
            writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<polyline points="{M},{M} {M},{b} {r},{b}" fill="none" stroke="black"/>"#,
            b = H - M,
            r = W - M
        );
        for tick in 0..=4 {
            let y = tick as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">{y:.2}</text>"#,
                M - 6.0,
                py(y) + 4.0
            );
        }
        let mut seen = Vec::new();
        for &x in &xs {
            if seen.contains(&x) {
                continue;
            }
            seen.push(x);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
                px(x),
                H - M + 16.0,
                x / 1000
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">offset (ms)</text>"#,
            W / 2.0,
            H - 10.0
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" font-size="12" transform="rotate(-90 14 {})">mIoU</text>"#,
            H / 2.0,
            H / 2.0
        );
        for (i, m) in self.methods().into_iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> =
                self.curve(m).into_iter().map(|(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ =
                writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "));
            let ly = M + 16.0 * i as f64;
            let _ = writeln!(s, r#"<text x="{}" y="{ly}" font-size="12" fill="{color}">{m}</text>"#, W - M - 140.0);
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::LabelMap;

    fn report() -> BenchReport {
        let gt = LabelMap::new(vec![0, 0, 1, 1], 2, 2, 0, 3).unwrap();
        let pred = LabelMap::new(vec![0, 1, 1, 1], 2, 2, 0, 3).unwrap();
        let mut cm = ConfusionMatrix::new(3);
        cm.add(&pred, &gt).unwrap();
        let mut r = BenchReport::new("test", 7, 3, "dims = 2x2\n".into());
        r.rows.push(BenchRow::new("a", 10_000, cm.clone(), 0.25, 1.5));
        r.rows.push(BenchRow::new("a", 20_000, cm, 0.0, 2.5));
        r
    }

    #[test]
    fn csv_layout() {
        let csv = report().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# kind=test seed=7");
        assert_eq!(lines[2], "method,dt_us,miou,hole_fraction,iou_0,iou_1,iou_2,confusion");
        assert_eq!(lines[3], "a,10000,0.583333,0.250000,0.500000,0.666667,,1 1 0 0 2 0 0 0 0");
    }

    #[test]
    fn aggregate_and_svg() {
        let r = report();
        assert_eq!(r.aggregate("a").total(), 8);
        let svg = r.to_svg();
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    }
}
