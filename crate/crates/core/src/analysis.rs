//! Resource arithmetic: effective distance, plumbing-piece size, logical
//! rate extrapolation, slope fits and overhead tables.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest errors that can cause a logical error through mismatching.
pub fn d_e(d: usize) -> usize {
    d.div_ceil(2)
}

/// Fewest loss events that can cause a logical error.
pub fn min_loss_failures(d: usize, lint: bool) -> usize {
    if lint {
        d.div_ceil(4)
    } else {
        d - 1
    }
}

/// How the edge length `5d/4` is turned into a cell count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Floor,
    Round,
    Ceil,
    /// Keep the fractional edge length.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlumbingPiece {
    pub d: usize,
    /// Edge length in cells.
    pub n: f64,
    /// Qubit-rounds.
    pub volume: f64,
    pub qubits: f64,
}

pub fn plumbing(d: usize, convention: Convention) -> PlumbingPiece {
    let exact = 5.0 * d as f64 / 4.0;
    let n = match convention {
        Convention::Floor => exact.floor(),
        Convention::Round => exact.round(),
        Convention::Ceil => exact.ceil(),
        Convention::Exact => exact,
    };
    PlumbingPiece { d, n, volume: 6.0 * n.powi(3), qubits: 6.0 * n * n }
}

/// Extrapolate the logical rate to `d` from `a` at `d_b - 2` and `b` at `d_b`.
pub fn extrapolate(a: f64, b: f64, d_b: usize, d: usize) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || b <= 0.0 {
        return Err(Error::Domain(format!("rates must be positive, got a = {a}, b = {b}")));
    }
    if b >= a {
        return Err(Error::NonSuppressing { a, b });
    }
    if d < d_b {
        return Err(Error::InvalidParam(format!("target distance {d} is below {d_b}")));
    }
    let steps = ((d - d_b) / 2) as i32;
    Ok(b / (a / b).powi(steps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InvalidParam(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Domain(format!("log-log fit needs positive values, got ({x}, {y})")));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all x values are equal".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, intercept, stderr })
}

/// One row of a simulation results file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub d: usize,
    pub p_comp: f64,
    pub p_loss: f64,
    pub p_lint: f64,
    #[serde(rename = "P_L")]
    pub p_l: f64,
}

/// Read a results CSV; `#` lines carry metadata and are skipped.
pub fn read_curves<R: Read>(r: R) -> Result<Vec<CurvePoint>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let p: CurvePoint = row?;
        if p.d < 3 || p.d.is_multiple_of(2) {
            return Err(Error::InvalidDistance(p.d));
        }
        if !(0.0..=1.0).contains(&p.p_l) || !(0.0..=1.0).contains(&p.p_loss) {
            return Err(Error::Domain(format!("probabilities out of range in row for d = {}", p.d)));
        }
        out.push(p);
    }
    Ok(out)
}

/// Logical rates at several distances for one loss rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LossCurve {
    pub p_loss: f64,
    /// `(d, P_L)` pairs.
    pub points: Vec<(usize, f64)>,
}

/// Group points by loss rate, in increasing order.
pub fn curves_by_loss(points: &[CurvePoint]) -> Vec<LossCurve> {
    let mut groups: BTreeMap<u64, Vec<(usize, f64)>> = BTreeMap::new();
    for p in points {
        groups.entry(p.p_loss.to_bits()).or_default().push((p.d, p.p_l));
    }
    let mut curves: Vec<LossCurve> = groups
        .into_iter()
        .map(|(bits, mut points)| {
            points.sort_by_key(|&(d, _)| d);
            LossCurve { p_loss: f64::from_bits(bits), points }
        })
        .collect();
    curves.sort_by(|a, b| a.p_loss.total_cmp(&b.p_loss));
    curves
}

/// Smallest odd distance reaching `target`, measured or extrapolated from
/// the two largest distances. `None` when the curve does not suppress.
pub fn required_distance(curve: &LossCurve, target: f64) -> Result<Option<usize>> {
    let mut points = curve.points.clone();
    points.sort_by_key(|&(d, _)| d);
    points.dedup_by_key(|p| p.0);
    if let Some(&(d, _)) = points.iter().find(|&&(_, p)| p <= target) {
        return Ok(Some(d));
    }
    let [.., (d_a, a), (d_b, b)] = points[..] else {
        return Err(Error::InvalidParam(format!("p_loss = {}: need two distances", curve.p_loss)));
    };
    if d_b != d_a + 2 {
        return Err(Error::InvalidParam(format!("p_loss = {}: distances {d_a} and {d_b} are not adjacent", curve.p_loss)));
    }
    if b <= 0.0 {
        return Err(Error::Domain(format!("p_loss = {}: P_L must be positive at d = {d_b}", curve.p_loss)));
    }
    if b >= a {
        return Ok(None);
    }
    let mut d = d_b;
    while extrapolate(a, b, d_b, d)? > target {
        d += 2;
    }
    Ok(Some(d))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverheadRow {
    pub p_loss: Option<f64>,
    pub d: Option<usize>,
    pub volume: Option<f64>,
    pub qubits: Option<f64>,
    pub overhead: Option<f64>,
}

impl OverheadRow {
    fn reached(p_loss: Option<f64>, d: usize, baseline: &PlumbingPiece, convention: Convention) -> Self {
        let piece = plumbing(d, convention);
        OverheadRow {
            p_loss,
            d: Some(d),
            volume: Some(piece.volume),
            qubits: Some(piece.qubits),
            overhead: Some(piece.volume / baseline.volume),
        }
    }
}

/// Baseline row first, then one row per curve in increasing loss.
pub fn overhead_table(curves: &[LossCurve], target: f64, baseline_d: usize, convention: Convention) -> Result<Vec<OverheadRow>> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!("target must lie in (0, 1), got {target}")));
    }
    let baseline = plumbing(baseline_d, convention);
    let mut rows = vec![OverheadRow::reached(None, baseline_d, &baseline, convention)];
    let mut sorted: Vec<&LossCurve> = curves.iter().collect();
    sorted.sort_by(|a, b| a.p_loss.total_cmp(&b.p_loss));
    for curve in sorted {
        rows.push(match required_distance(curve, target)? {
            Some(d) => OverheadRow::reached(Some(curve.p_loss), d, &baseline, convention),
            None => OverheadRow { p_loss: Some(curve.p_loss), d: None, volume: None, qubits: None, overhead: None },
        });
    }
    Ok(rows)
}

/// Round to one significant figure.
pub fn one_sig_fig(x: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(x.log10().floor() as i32);
    (x / scale).round() * scale
}

/// `"2x"` style label, or `"-"` when unreachable.
pub fn overhead_label(overhead: Option<f64>) -> String {
    match overhead {
        Some(x) => format!("{}x", one_sig_fig(x.max(1.0))),
        None => "-".into(),
    }
}

/// Scientific notation with two significant figures, as in printed tables.
pub fn sci2(x: f64) -> String {
    format!("{x:.1e}")
}

pub fn write_overhead_csv<W: std::io::Write>(rows: &[OverheadRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["overhead", "p_loss", "d", "V", "q_phys"])?;
    for row in rows {
        let dash = || "-".to_string();
        out.write_record([
            overhead_label(row.overhead),
            row.p_loss.map_or_else(|| "none".into(), sci2),
            row.d.map_or_else(dash, |d| d.to_string()),
            row.volume.map_or_else(dash, sci2),
            row.qubits.map_or_else(dash, sci2),
        ])?;
    }
    out.flush()?;
    Ok(())
}
