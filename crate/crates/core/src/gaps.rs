//! Gap detection in pooled spectra and labelling by ℤ + ℤα mod 1.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dynamics::{dist_to_int, frac, Frequency, TrigPoly};
use crate::error::{Error, Result};
use crate::operators::{ids, IdsTable, OperatorFamily, SpectrumApprox, SpectrumKind};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    /// Left edge. For CMV arcs this lies in [0, 2π) and `right` may exceed 2π.
    pub left: f64,
    pub right: f64,
    /// IDS at the midpoint.
    pub label_value: f64,
    pub label_index: Option<i64>,
    pub label_residual: Option<f64>,
    /// Circular arc (CMV); the midpoint is read mod 2π.
    #[serde(default)]
    pub arc: bool,
}

impl Gap {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn midpoint(&self) -> f64 {
        let m = 0.5 * (self.left + self.right);
        if self.arc {
            m.rem_euclid(TAU)
        } else {
            m
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub alpha: Frequency,
    pub k_max: u32,
    /// (k, frac(kα)) for 0 < |k| ≤ k_max, sorted by value.
    pub labels: Vec<(i64, f64)>,
}

impl LabelSet {
    pub fn new(alpha: Frequency, k_max: u32) -> Self {
        let a = alpha.value();
        let k_max_i = k_max as i64;
        let mut labels: Vec<(i64, f64)> =
            (-k_max_i..=k_max_i).filter(|&k| k != 0).map(|k| (k, frac(k as f64 * a))).collect();
        labels.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        LabelSet { alpha, k_max, labels }
    }

    /// Best k for the label value ℓ and its residual, with distances taken
    /// mod 1 so that k = 0 matches ℓ near 0 or 1. Ties go to the smaller |k|.
    pub fn best(&self, ell: f64) -> (i64, f64) {
        let a = self.alpha.value();
        let mut best = (0i64, dist_to_int(ell));
        for k in 1..=self.k_max as i64 {
            for kk in [k, -k] {
                let r = dist_to_int(ell - kk as f64 * a);
                if r < best.1 {
                    best = (kk, r);
                }
            }
        }
        best
    }
}

/// Default density threshold: two eigenvalues per phase.
pub fn default_density_threshold(spec: &SpectrumApprox) -> f64 {
    if spec.eigenvalues.is_empty() {
        return 0.0;
    }
    2.0 * spec.omega_samples as f64 / spec.eigenvalues.len() as f64
}

/// Maximal intervals of width ≥ `min_width` holding at most
/// `density_threshold × total` eigenvalues.
///
/// Every spacing between consecutive eigenvalues of length at least
/// min_width/(D+1) seeds a candidate; candidates are taken widest first and
/// extended across up to D stray eigenvalues to neighbouring wide spacings.
/// The edges of a returned gap are eigenvalues. For CMV spectra the spacing
/// across θ = 0 is included unless v ≡ 0.
pub fn detect_gaps(spec: &SpectrumApprox, min_width: f64, density_threshold: f64) -> Vec<Gap> {
    detect_gaps_inner(spec, min_width, density_threshold, spec.kind == SpectrumKind::Cmv)
}

fn detect_gaps_inner(spec: &SpectrumApprox, min_width: f64, density_threshold: f64, circular: bool) -> Vec<Gap> {
    let p = &spec.eigenvalues;
    let m = p.len();
    if m < 2 || !(min_width > 0.0) {
        return Vec::new();
    }
    let budget = (density_threshold.max(0.0) * m as f64).floor() as usize;
    let pos = |i: i64| -> f64 {
        let q = i.div_euclid(m as i64);
        let r = i.rem_euclid(m as i64) as usize;
        p[r] + TAU * q as f64
    };
    let n_spacings = if circular { m } else { m - 1 };
    let seed = min_width / (budget + 1) as f64;
    let wide: Vec<i64> = (0..n_spacings as i64).filter(|&i| pos(i + 1) - pos(i) >= seed).collect();
    if wide.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..wide.len()).collect();
    let spacing = |i: i64| pos(i + 1) - pos(i);
    order.sort_by(|&x, &y| spacing(wide[y]).total_cmp(&spacing(wide[x])).then(x.cmp(&y)));
    let w = wide.len();
    let mut used = vec![false; w];
    let mut out = Vec::new();
    for &start in &order {
        if used[start] {
            continue;
        }
        used[start] = true;
        // [lo, hi] in unwrapped positions of `wide`
        let (mut lo, mut hi) = (start as i64, start as i64);
        let at = |j: i64| -> Option<i64> {
            if circular {
                let q = j.div_euclid(w as i64);
                Some(wide[j.rem_euclid(w as i64) as usize] + q * n_spacings as i64)
            } else if j >= 0 && (j as usize) < w {
                Some(wide[j as usize])
            } else {
                None
            }
        };
        let idx = |j: i64| j.rem_euclid(w as i64) as usize;
        loop {
            let first = at(lo).expect("in range");
            let last = at(hi).expect("in range");
            let left = at(lo - 1).filter(|_| !used[idx(lo - 1)] && hi - lo + 2 <= w as i64);
            let right = at(hi + 1).filter(|_| !used[idx(hi + 1)] && hi - lo + 2 <= w as i64);
            let cost_l = left.map(|s| last - s).filter(|&c| c as usize <= budget);
            let cost_r = right.map(|s| s - first).filter(|&c| c as usize <= budget);
            match (cost_l, cost_r) {
                (Some(cl), Some(cr)) if cl <= cr => {
                    lo -= 1;
                    used[idx(lo)] = true;
                }
                (_, Some(_)) => {
                    hi += 1;
                    used[idx(hi)] = true;
                }
                (Some(_), None) => {
                    lo -= 1;
                    used[idx(lo)] = true;
                }
                (None, None) => break,
            }
        }
        let (first, last) = (at(lo).expect("in range"), at(hi).expect("in range"));
        let (mut left, mut right) = (pos(first), pos(last + 1));
        if right - left < min_width {
            continue;
        }
        if circular {
            let shift = (left / TAU).floor() * TAU;
            left -= shift;
            right -= shift;
        }
        let mut g = Gap { left, right, label_value: 0.0, label_index: None, label_residual: None, arc: circular };
        g.label_value = ids(spec, g.midpoint());
        out.push(g);
    }
    out.sort_by(|a, b| a.left.total_cmp(&b.left));
    out
}

/// Attaches ℓ = k(midpoint), the best k and its residual.
pub fn label_gap(g: &Gap, ids: &IdsTable, labels: &LabelSet) -> Gap {
    let ell = ids.value_at(g.midpoint());
    let (k, r) = labels.best(ell);
    Gap { label_value: ell, label_index: Some(k), label_residual: Some(r), ..g.clone() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gaps: Vec<Gap>,
    pub n: usize,
    pub omega_samples: usize,
    pub density_threshold: f64,
    pub min_width: f64,
    pub k_max: u32,
    pub tolerance: f64,
    pub all_labelled: bool,
}

/// Detects and labels the gaps of `spec`.
pub fn gap_report(
    spec: &SpectrumApprox,
    labels: &LabelSet,
    min_width: f64,
    density_threshold: f64,
    tolerance: f64,
) -> GapReport {
    let raw = detect_gaps(spec, min_width, density_threshold);
    assemble(spec, raw, labels, min_width, density_threshold, tolerance)
}

fn assemble(
    spec: &SpectrumApprox,
    raw: Vec<Gap>,
    labels: &LabelSet,
    min_width: f64,
    density_threshold: f64,
    tolerance: f64,
) -> GapReport {
    let mut mids: Vec<f64> = raw.iter().map(Gap::midpoint).collect();
    mids.sort_by(f64::total_cmp);
    let table = IdsTable::from_spectrum(spec, mids);
    let gaps: Vec<Gap> = raw.iter().map(|g| label_gap(g, &table, labels)).collect();
    let all_labelled = gaps.iter().all(|g| g.label_residual.is_some_and(|r| r < tolerance));
    GapReport {
        gaps,
        n: spec.n,
        omega_samples: spec.omega_samples,
        density_threshold,
        min_width,
        k_max: labels.k_max,
        tolerance,
        all_labelled,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelCheckRow {
    pub left: f64,
    pub right: f64,
    pub label_value: f64,
    pub label_index: Option<i64>,
    pub label_residual: Option<f64>,
    pub within_tolerance: bool,
}

/// True iff every gap's residual is below `tolerance`, plus the full table.
pub fn verify_gap_labelling(report: &GapReport, tolerance: f64) -> (bool, Vec<LabelCheckRow>) {
    let rows: Vec<LabelCheckRow> = report
        .gaps
        .iter()
        .map(|g| LabelCheckRow {
            left: g.left,
            right: g.right,
            label_value: g.label_value,
            label_index: g.label_index,
            label_residual: g.label_residual,
            within_tolerance: g.label_residual.is_some_and(|r| r < tolerance),
        })
        .collect();
    (rows.iter().all(|r| r.within_tolerance), rows)
}

/// Truncation and detection policy shared by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSettings {
    pub n: usize,
    pub omega_samples: usize,
    pub min_width: f64,
    /// Fraction of the pooled count; `None` means two eigenvalues per phase.
    pub density_threshold: Option<f64>,
    pub k_max: u32,
    pub tolerance: f64,
    pub boundary_angle: f64,
    pub omega0: f64,
}

impl Default for GapSettings {
    fn default() -> Self {
        GapSettings {
            n: 1000,
            omega_samples: 8,
            min_width: 0.02,
            density_threshold: None,
            k_max: 50,
            tolerance: 5e-3,
            boundary_angle: 0.0,
            omega0: 0.0,
        }
    }
}

/// Spectrum and labelled report of `family` under `settings`.
pub fn family_gap_report(family: &OperatorFamily, settings: &GapSettings) -> Result<(SpectrumApprox, GapReport)> {
    let omega0 = family.base().point(settings.omega0);
    let spec = family.spectrum(&omega0, settings.n, settings.omega_samples, settings.boundary_angle)?;
    let labels = LabelSet::new(family.base().frequency(), settings.k_max);
    let thr = settings.density_threshold.unwrap_or_else(|| default_density_threshold(&spec));
    let circular = spec.kind == SpectrumKind::Cmv && !family.is_free_cmv();
    let raw = detect_gaps_inner(&spec, settings.min_width, thr, circular);
    let report = assemble(&spec, raw, &labels, settings.min_width, thr, settings.tolerance);
    Ok((spec, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpeningRow {
    pub t: f64,
    pub width: f64,
    pub label_value: Option<f64>,
    pub label_index: Option<i64>,
    pub residual: Option<f64>,
}

/// Follows the gap with IDS value nearest frac(kα) along b + t·p (Jacobi) or
/// v·e^{itp} (CMV). A row has width 0 when no detected gap lies within the
/// tolerance of that label.
pub fn gap_opening_experiment(
    family: &OperatorFamily,
    perturbation: &TrigPoly,
    k: i64,
    t_grid: &[f64],
    settings: &GapSettings,
) -> Result<Vec<OpeningRow>> {
    if !t_grid.contains(&0.0) {
        return Err(Error::Precondition("t grid must include 0".into()));
    }
    let target = frac(k as f64 * family.base().frequency().value());
    let rows = par::map(t_grid.len(), |j| -> Result<OpeningRow> {
        let t = t_grid[j];
        let f = family.perturbed(t, perturbation)?;
        let (_, report) = family_gap_report(&f, settings)?;
        let hit = report
            .gaps
            .iter()
            .map(|g| (dist_to_int(g.label_value - target), g))
            .filter(|(d, _)| *d < settings.tolerance)
            .min_by(|a, b| a.0.total_cmp(&b.0));
        Ok(match hit {
            Some((d, g)) => OpeningRow {
                t,
                width: g.width(),
                label_value: Some(g.label_value),
                label_index: g.label_index,
                residual: Some(d),
            },
            None => OpeningRow { t, width: 0.0, label_value: None, label_index: None, residual: None },
        })
    });
    rows.into_iter().collect()
}

/// Synthetic spectrum from explicit values, for detector checks.
pub fn synthetic_spectrum(kind: SpectrumKind, mut values: Vec<f64>, omega_samples: usize) -> SpectrumApprox {
    values.sort_by(f64::total_cmp);
    let n = values.len() / omega_samples.max(1);
    SpectrumApprox {
        kind,
        eigenvalues: values,
        n,
        omega_samples,
        boundary: match kind {
            SpectrumKind::Jacobi => crate::operators::Boundary::Dirichlet,
            SpectrumKind::Cmv => crate::operators::Boundary::DecoupledUnitary { angle: 0.0 },
        },
    }
}
