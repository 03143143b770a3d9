//! Cross-check of the cone-field UH certificate against truncated spectra:
//! a spectral parameter certified UH must carry no eigenvalue density, and
//! one sitting in a dense part of the spectrum must not be certified.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{jacobi_cocycle_map, OperatorFamily, SpectrumApprox, SpectrumKind, SzegoCocycle};
use crate::cocycle::{certify_uniform_hyperbolicity, UhCertificate, Verdict};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JohnsonSettings {
    /// Half-width of the counting window.
    pub eta: f64,
    pub uh_grid: usize,
    pub uh_n_max: usize,
}

impl Default for JohnsonSettings {
    fn default() -> Self {
        JohnsonSettings { eta: 2e-3, uh_grid: 64, uh_n_max: 1024 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JohnsonRow {
    pub energy: f64,
    pub verdict: Verdict,
    pub certificate: UhCertificate,
    /// Pooled eigenvalues within eta.
    pub window_count: usize,
    pub dense: bool,
    pub agree: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct JohnsonReport {
    pub eta: f64,
    /// A window is dense when it holds more than this many eigenvalues.
    pub count_threshold: usize,
    pub rows: Vec<JohnsonRow>,
    pub agreement_rate: f64,
    pub inconclusive_rate: f64,
    /// UH verdicts at dense windows.
    pub contradictions: usize,
}

/// Pooled eigenvalues within `eta` of `x`; CMV windows wrap around 2π.
pub fn window_count(spec: &SpectrumApprox, x: f64, eta: f64) -> usize {
    let p = &spec.eigenvalues;
    let count = |lo: f64, hi: f64| p.partition_point(|&e| e <= hi) - p.partition_point(|&e| e < lo);
    match spec.kind {
        SpectrumKind::Jacobi => count(x - eta, x + eta),
        SpectrumKind::Cmv => {
            let c = x.rem_euclid(TAU);
            let mut n = count((c - eta).max(0.0), (c + eta).min(TAU));
            if c - eta < 0.0 {
                n += count(c - eta + TAU, TAU);
            }
            if c + eta > TAU {
                n += count(0.0, c + eta - TAU);
            }
            n
        }
    }
}

/// Certifies UH at every energy (Jacobi) or angle (CMV) and compares the
/// verdict with the local count in `spec`. Agreement means UH with a sparse
/// window or NotUH with a dense one. A window is dense above one eigenvalue
/// per pooled phase, so isolated boundary states do not count.
pub fn johnson_cross_check(
    family: &OperatorFamily,
    spec: &SpectrumApprox,
    energies: &[f64],
    settings: &JohnsonSettings,
) -> Result<JohnsonReport> {
    if spec.kind != family.kind() {
        return Err(Error::InvalidInput("spectrum kind does not match the family".into()));
    }
    if !(settings.eta > 0.0) {
        return Err(Error::InvalidInput("eta must be positive".into()));
    }
    if settings.uh_grid < 64 {
        return Err(Error::Precondition(format!("UH grid must be at least 64, got {}", settings.uh_grid)));
    }
    if energies.is_empty() {
        return Err(Error::InvalidInput("empty energy grid".into()));
    }
    let threshold = spec.omega_samples;
    let certs: Vec<Result<UhCertificate>> = par::map(energies.len(), |j| {
        let e = energies[j];
        Ok(match family {
            OperatorFamily::Jacobi(f) => {
                certify_uniform_hyperbolicity(&jacobi_cocycle_map(f, e)?, settings.uh_grid, settings.uh_n_max)
            }
            OperatorFamily::Cmv(f) => {
                certify_uniform_hyperbolicity(&SzegoCocycle::at_angle(f, e), settings.uh_grid, settings.uh_n_max)
            }
        })
    });
    let mut rows = Vec::with_capacity(energies.len());
    for (&energy, c) in energies.iter().zip(certs) {
        let certificate = c?;
        let verdict = certificate.verdict;
        let n = window_count(spec, energy, settings.eta);
        let dense = n > threshold;
        let agree = match verdict {
            Verdict::Uh => !dense,
            Verdict::NotUh => dense,
            Verdict::Inconclusive => false,
        };
        rows.push(JohnsonRow { energy, verdict, certificate, window_count: n, dense, agree });
    }
    let total = rows.len() as f64;
    Ok(JohnsonReport {
        eta: settings.eta,
        count_threshold: threshold,
        agreement_rate: rows.iter().filter(|r| r.agree).count() as f64 / total,
        inconclusive_rate: rows.iter().filter(|r| r.verdict == Verdict::Inconclusive).count() as f64 / total,
        contradictions: rows.iter().filter(|r| r.verdict == Verdict::Uh && r.dense).count(),
        rows,
    })
}
