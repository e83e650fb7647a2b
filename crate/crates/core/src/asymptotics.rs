//! Behaviour at infinity: sphere statistics, Harnack ratios on spheres, the
//! almost-maximum-principle envelope, the oscillation recurrence and decay
//! fits, and the `cos(log log r)` counterexample.

use serde::Serialize;

use crate::barrier::envelope_c0;
use crate::error::{domain, precondition, Error, Result};
use crate::mesh::GridFunction;
use crate::operator::OperatorSpec;
use crate::radial::{ExteriorRadialSolution, RadialSolution};
use crate::source::{counterexample_scaled_plaplacian, harnack_k_sphere, SourceTerm};

/// Extremes of `u` on the sphere `|x| = R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphereStats {
    pub radius: f64,
    /// `ln R`; carried separately so radii beyond `f64` range can be used.
    pub log_radius: f64,
    pub m: f64,
    pub big_m: f64,
    pub osc: f64,
    /// `M_R / m_R` when `m_R > 0`.
    pub harnack_ratio: Option<f64>,
}

impl SphereStats {
    pub fn from_values(radius: f64, values: &[f64]) -> Result<Self> {
        Self::from_log_values(radius, radius.ln(), values)
    }

    pub fn from_log_values(radius: f64, log_radius: f64, values: &[f64]) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(domain(format!("no finite samples on the sphere of radius {radius}")));
        }
        let m = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let big_m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(SphereStats {
            radius,
            log_radius,
            m,
            big_m,
            osc: big_m - m,
            harnack_ratio: (m > 0.0).then(|| big_m / m),
        })
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.m + self.big_m)
    }
}

/// Anything that can be sampled on spheres and on exterior regions.
pub trait SphereData {
    /// Radii covered by the data.
    fn radial_domain(&self) -> (f64, f64);
    /// Samples on `|x| = R`.
    fn sphere_values(&self, radius: f64) -> Result<Vec<f64>>;
    /// Samples on `|x| >= R` (including the sphere itself).
    fn tail_values(&self, radius: f64) -> Result<Vec<f64>>;
    /// Limit at infinity when the data carries one.
    fn known_limit(&self) -> Option<f64> {
        None
    }
}

fn check_in(data: &dyn SphereData, radius: f64) -> Result<()> {
    let (a, b) = data.radial_domain();
    let slack = 1e-12 * b.abs().max(1.0);
    if !(radius >= a - slack && radius <= b + slack) {
        return Err(domain(format!("radius {radius} outside [{a}, {b}]")));
    }
    Ok(())
}

/// Rings of samples at increasing radii, each with the same angle count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereSamples {
    pub radii: Vec<f64>,
    pub rings: Vec<Vec<f64>>,
}

impl SphereSamples {
    pub fn new(radii: Vec<f64>, rings: Vec<Vec<f64>>) -> Result<Self> {
        if radii.len() != rings.len() || radii.is_empty() {
            return Err(precondition("need one ring per radius"));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(precondition("radii must increase strictly"));
        }
        let k = rings[0].len();
        if k == 0 || rings.iter().any(|r| r.len() != k) {
            return Err(precondition("rings must share a nonzero size"));
        }
        Ok(SphereSamples { radii, rings })
    }

    pub fn from_grid(u: &GridFunction) -> Self {
        let rings = (0..u.mesh.rings()).map(|i| u.ring(i).to_vec()).collect();
        SphereSamples { radii: u.mesh.radii.clone(), rings }
    }

    fn interpolate(&self, radius: f64) -> Vec<f64> {
        let k = self.radii.partition_point(|r| *r < radius);
        if k < self.radii.len() && (self.radii[k] - radius).abs() <= 1e-12 * radius.abs().max(1.0) {
            return self.rings[k].clone();
        }
        if k == 0 {
            return self.rings[0].clone();
        }
        if k >= self.radii.len() {
            return self.rings[self.radii.len() - 1].clone();
        }
        let (ra, rb) = (self.radii[k - 1], self.radii[k]);
        let w = (radius - ra) / (rb - ra);
        self.rings[k - 1].iter().zip(&self.rings[k]).map(|(a, b)| a + w * (b - a)).collect()
    }
}

impl SphereData for SphereSamples {
    fn radial_domain(&self) -> (f64, f64) {
        (self.radii[0], *self.radii.last().unwrap())
    }

    fn sphere_values(&self, radius: f64) -> Result<Vec<f64>> {
        check_in(self, radius)?;
        Ok(self.interpolate(radius))
    }

    fn tail_values(&self, radius: f64) -> Result<Vec<f64>> {
        let mut out = self.sphere_values(radius)?;
        for (r, ring) in self.radii.iter().zip(&self.rings) {
            if *r > radius {
                out.extend_from_slice(ring);
            }
        }
        Ok(out)
    }
}

impl SphereData for GridFunction {
    fn radial_domain(&self) -> (f64, f64) {
        (self.mesh.r_in(), self.mesh.r_out())
    }

    fn sphere_values(&self, radius: f64) -> Result<Vec<f64>> {
        SphereSamples::from_grid(self).sphere_values(radius)
    }

    fn tail_values(&self, radius: f64) -> Result<Vec<f64>> {
        SphereSamples::from_grid(self).tail_values(radius)
    }
}

impl SphereData for RadialSolution {
    fn radial_domain(&self) -> (f64, f64) {
        (self.r_in, self.r_out)
    }

    fn sphere_values(&self, radius: f64) -> Result<Vec<f64>> {
        check_in(self, radius)?;
        Ok(vec![self.value(radius.clamp(self.r_in, self.r_out))])
    }

    fn tail_values(&self, radius: f64) -> Result<Vec<f64>> {
        check_in(self, radius)?;
        let r0 = radius.clamp(self.r_in, self.r_out);
        let steps = 256;
        Ok((0..=steps).map(|k| self.value(r0 + (self.r_out - r0) * k as f64 / steps as f64)).collect())
    }
}

/// Upper end of the radii sampled for exterior tails (`R 2^TAIL_DOUBLINGS`).
const TAIL_DOUBLINGS: i32 = 40;

impl SphereData for ExteriorRadialSolution {
    fn radial_domain(&self) -> (f64, f64) {
        (self.r_in, f64::INFINITY)
    }

    fn sphere_values(&self, radius: f64) -> Result<Vec<f64>> {
        check_in(self, radius)?;
        Ok(vec![self.value(radius.max(self.r_in))])
    }

    fn tail_values(&self, radius: f64) -> Result<Vec<f64>> {
        check_in(self, radius)?;
        let r0 = radius.max(self.r_in);
        let mut out: Vec<f64> = (0..=8 * TAIL_DOUBLINGS).map(|k| self.value(r0 * (k as f64 / 8.0).exp2())).collect();
        out.push(self.limit);
        Ok(out)
    }

    fn known_limit(&self) -> Option<f64> {
        Some(self.limit)
    }
}

pub fn sphere_stats(u: &dyn SphereData, radius: f64) -> Result<SphereStats> {
    SphereStats::from_values(radius, &u.sphere_values(radius)?)
}

/// One row of the Harnack-on-spheres check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarnackRow {
    pub radius: f64,
    pub m: f64,
    pub big_m: f64,
    /// Correction term: `R^{-eps/(p-1)}` for `p > n`, `K(R)` otherwise.
    pub correction: f64,
    /// `M_R / (m_R + correction)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackReport {
    pub rows: Vec<HarnackRow>,
    /// Smallest constant valid for every `R >= 4`.
    pub fitted_constant: f64,
    /// Whether the second half of the radii needs no larger constant than the first.
    pub stable: bool,
}

/// `sup_{S_R} u <= C (inf_{S_R} u + K)` for nonnegative data; `theta` selects
/// the `p <= n` correction `K(R)`.
pub fn harnack_sphere_check(
    u: &dyn SphereData,
    f: &SourceTerm,
    spec: &OperatorSpec,
    radii: &[f64],
    theta: f64,
) -> Result<HarnackReport> {
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let s = sphere_stats(u, r)?;
        if s.m < 0.0 {
            return Err(precondition(format!("u has negative values on the sphere of radius {r}")));
        }
        let correction = if spec.p > spec.n as f64 {
            match f.decay {
                Some(d) if d.c_f > 0.0 => r.powf(-d.eps / (spec.p - 1.0)),
                Some(_) => 0.0,
                None => return Err(precondition("the p > n branch needs a decay tag")),
            }
        } else {
            harnack_k_sphere(f, spec, r, theta)?
        };
        let denom = s.m + correction;
        let ratio = if denom > 0.0 {
            s.big_m / denom
        } else if s.big_m == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        rows.push(HarnackRow { radius: r, m: s.m, big_m: s.big_m, correction, ratio });
    }
    let valid: Vec<&HarnackRow> = rows.iter().filter(|r| r.radius >= 4.0).collect();
    let fitted_constant = valid.iter().map(|r| r.ratio).fold(1.0f64, f64::max);
    let half = valid.len() / 2;
    let head = valid[..half].iter().map(|r| r.ratio).fold(1.0f64, f64::max);
    let tail = valid[half..].iter().map(|r| r.ratio).fold(1.0f64, f64::max);
    Ok(HarnackReport { rows, fitted_constant, stable: fitted_constant.is_finite() && tail <= head * (1.0 + 1e-9) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub radius: f64,
    pub m: f64,
    pub big_m: f64,
    pub width: f64,
    /// Smallest distance of the tail samples from the envelope edges.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub c0: f64,
    pub rows: Vec<EnvelopeRow>,
    pub min_slack: f64,
    /// `max(0, -min_slack)`.
    pub worst_violation: f64,
    pub violations: usize,
}

/// `m_R - C0 R^{-eps/(p-1)} <= u(x) <= M_R + C0 R^{-eps/(p-1)}` on `|x| >= R`.
pub fn envelope_check(u: &dyn SphereData, f: &SourceTerm, spec: &OperatorSpec, radii: &[f64]) -> Result<EnvelopeReport> {
    if spec.p < spec.n as f64 {
        return Err(precondition("the envelope needs p >= n"));
    }
    let d = f.decay.ok_or_else(|| precondition("the envelope needs a decay tag"))?;
    let c0 = if d.c_f == 0.0 { 0.0 } else { envelope_c0(spec, d) };
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let s = sphere_stats(u, r)?;
        let width = c0 * r.powf(-d.eps / (spec.p - 1.0));
        let slack = u
            .tail_values(r)?
            .iter()
            .map(|v| (v - (s.m - width)).min((s.big_m + width) - v))
            .fold(f64::INFINITY, f64::min);
        rows.push(EnvelopeRow { radius: r, m: s.m, big_m: s.big_m, width, slack });
    }
    let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    let violations = rows.iter().filter(|r| r.slack < -1e-12).count();
    Ok(EnvelopeReport { c0, rows, min_slack, worst_violation: (-min_slack).max(0.0), violations })
}

/// Constants of the oscillation recurrence
/// `osc_{S_2R} u <= C (osc_{S_R} u + K R^{-eps/(p-1)})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscPrediction {
    pub lambda: f64,
    /// Number of balls of radius `lambda R` covering the sphere chain.
    pub balls: u32,
    pub c: f64,
    pub big_c: f64,
    pub k: f64,
    /// Exponent `eps/(p-1)` of the source term.
    pub tail_exponent: f64,
}

impl OscPrediction {
    /// `-log C / log 2`.
    pub fn predicted_beta(&self) -> f64 {
        -self.big_c.log2()
    }

    /// `C^k (osc_{S_1} + K / (C - 2^{-eps/(p-1)}))`, valid when `C > 2^{-eps/(p-1)}`.
    pub fn iterate_bound(&self, osc_1: f64, k: u32) -> Option<f64> {
        let q = (-self.tail_exponent).exp2();
        (self.big_c > q).then(|| self.big_c.powi(k as i32) * (osc_1 + self.k / (self.big_c - q)))
    }

    pub fn step_holds(&self, radius: f64, osc_r: f64, osc_2r: f64) -> bool {
        osc_2r <= self.big_c * (osc_r + self.k * radius.powf(-self.tail_exponent)) * (1.0 + 1e-12) + 1e-15
    }
}

pub fn osc_prediction(spec: &OperatorSpec, f: &SourceTerm) -> Result<OscPrediction> {
    let (p, n) = (spec.p, spec.n as f64);
    if p <= n {
        return Err(precondition("the oscillation recurrence needs p > n"));
    }
    let d = f.decay.ok_or_else(|| precondition("the oscillation recurrence needs a decay tag"))?;
    let alpha = spec.alpha();
    let lambda = 0.5 * (spec.delta / spec.l_up).powf(1.0 / (p - n));
    let balls = (2.0 * std::f64::consts::PI / lambda).ceil() as u32;
    let c = (1.0 - (-alpha).exp2()).powi(balls as i32);
    let c0 = if d.c_f == 0.0 { 0.0 } else { envelope_c0(spec, d) };
    let k = 2.0 * c0 + (d.c_f / (n * spec.l_up)).powf(1.0 / (p - 1.0)) / alpha;
    Ok(OscPrediction { lambda, balls, c, big_c: 1.0 - c, k, tail_exponent: d.eps / (p - 1.0) })
}

/// Which quantity the decay exponent was regressed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitBasis {
    /// `log osc_R` against `log R`.
    Oscillation,
    /// `log |mean_{k+1} - mean_k|` against `log R_k` (radial data).
    MeanDifferences,
    /// Everything constant: `beta = +inf`.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// Measured exponent; `+inf` for constant data.
    pub beta: f64,
    pub basis: FitBasis,
    /// Midpoint of `[m_R, M_R]` at the largest radius.
    pub limit: f64,
    /// `osc_R / 2 + C0 R^{-eps/(p-1)}` at the largest radius.
    pub limit_uncertainty: f64,
    /// RMS residual of the log-log regression.
    pub residual: f64,
    pub beta_positive: bool,
    pub limit_exists: bool,
    /// `-log C_pred / log 2` when the recurrence applies.
    pub predicted_beta: Option<f64>,
    pub predicted_constant: Option<f64>,
    /// The recurrence on consecutive doubling radii, when it applies.
    pub recurrence_holds: Option<bool>,
}

fn regress(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum::<f64>() / k).sqrt();
    (slope, rms)
}

/// Minimum spread ratio above which the sphere means are declared not to settle.
const SPREAD_FACTOR: f64 = 10.0;

pub fn decay_fit(stats: &[SphereStats], spec: &OperatorSpec, f: &SourceTerm) -> Result<DecayFit> {
    if stats.len() < 4 {
        return Err(Error::InsufficientData(format!("need at least 4 radii, got {}", stats.len())));
    }
    if stats.windows(2).any(|w| !(w[1].log_radius > w[0].log_radius)) {
        return Err(precondition("radii must increase strictly"));
    }
    let last = stats.last().unwrap();
    let means: Vec<f64> = stats.iter().map(|s| s.mean()).collect();
    let scale = means.iter().map(|m| m.abs()).fold(1.0f64, f64::max);
    let tiny = 1e-14 * scale;

    let (basis, xs, ys) = if stats.iter().any(|s| s.osc > tiny) {
        let pts: Vec<(f64, f64)> = stats.iter().filter(|s| s.osc > tiny).map(|s| (s.log_radius, s.osc.ln())).collect();
        (FitBasis::Oscillation, pts.iter().map(|p| p.0).collect::<Vec<_>>(), pts.iter().map(|p| p.1).collect::<Vec<_>>())
    } else {
        let pts: Vec<(f64, f64)> = stats
            .windows(2)
            .filter_map(|w| {
                let d = (w[1].mean() - w[0].mean()).abs();
                (d > tiny).then(|| (w[0].log_radius, d.ln()))
            })
            .collect();
        if pts.is_empty() {
            (FitBasis::Constant, vec![], vec![])
        } else {
            (FitBasis::MeanDifferences, pts.iter().map(|p| p.0).collect(), pts.iter().map(|p| p.1).collect())
        }
    };
    let (beta, residual) = match basis {
        FitBasis::Constant => (f64::INFINITY, 0.0),
        _ if xs.len() < 2 => (f64::INFINITY, 0.0),
        _ => {
            let (slope, rms) = regress(&xs, &ys);
            (-slope, rms)
        }
    };

    let decay = f.decay;
    let c0 = match decay {
        Some(d) if d.c_f > 0.0 && spec.p >= spec.n as f64 => envelope_c0(spec, d) * (last.log_radius * -d.eps / (spec.p - 1.0)).exp(),
        _ => 0.0,
    };
    let limit_uncertainty = last.osc / 2.0 + c0;

    // Spread of the means over the upper half against the envelope and the fitted tail.
    let upper = &means[means.len() / 2..];
    let spread = upper.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - upper.iter().cloned().fold(f64::INFINITY, f64::min);
    let fitted_tail = if beta.is_finite() && beta > 0.0 && basis != FitBasis::Constant {
        let x_mid = stats[stats.len() / 2].log_radius;
        let (slope, _) = regress(&xs, &ys);
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let d_mid = (my + slope * (x_mid - mx)).exp();
        let span = (last.log_radius - x_mid).max(f64::MIN_POSITIVE);
        // Sum of a power law over equally spaced log radii in the upper half.
        let steps = (stats.len() - stats.len() / 2) as f64;
        let h = span / steps.max(1.0);
        let q = (-beta * h).exp();
        2.0 * d_mid / (1.0 - q).max(1e-300)
    } else {
        0.0
    };
    let beta_positive = beta > 0.0;
    let limit_exists = beta_positive && spread <= SPREAD_FACTOR * (limit_uncertainty + fitted_tail) + tiny;

    let (predicted_beta, predicted_constant, recurrence_holds) = match osc_prediction(spec, f) {
        Ok(pred) => {
            let mut checked = false;
            let mut holds = true;
            for w in stats.windows(2) {
                if ((w[1].log_radius - w[0].log_radius) - std::f64::consts::LN_2).abs() < 1e-9 {
                    checked = true;
                    holds &= pred.step_holds(w[0].radius, w[0].osc, w[1].osc);
                }
            }
            (Some(pred.predicted_beta()), Some(pred.big_c), checked.then_some(holds))
        }
        Err(_) => (None, None, None),
    };

    Ok(DecayFit {
        beta,
        basis,
        limit: last.mean(),
        limit_uncertainty,
        residual,
        beta_positive,
        limit_exists,
        predicted_beta,
        predicted_constant,
        recurrence_holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleRow {
    pub radius: f64,
    pub u: f64,
    /// `|Delta_p u| (log r)^{p-1} r^p`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub p: f64,
    pub n: usize,
    pub rows: Vec<CounterexampleRow>,
    /// Largest ratio, i.e. the fitted constant of the bound.
    pub fitted_constant: f64,
    /// Max over min of the per-decade maxima of the ratio.
    pub variation: f64,
    pub bounded: bool,
    /// `u` at `r = e^{e^{k pi}}`, `k = 1..`.
    pub extreme_values: Vec<f64>,
    pub alternates: bool,
    pub fit: DecayFit,
}

/// `cos(log log r)` on `r >= 2` given `ln r`.
pub fn counterexample_value(ln_r: f64) -> f64 {
    ln_r.ln().cos()
}

/// Bound ratio sweep over `radii` (all `>= 2`), plus the values at
/// `r = e^{e^{k pi}}` for `k = 1..=extremes`.
pub fn counterexample_suite(p: f64, n: usize, radii: &[f64], extremes: usize) -> Result<CounterexampleReport> {
    let spec = OperatorSpec::plap(p, n)?;
    if radii.iter().any(|r| !(*r >= 2.0)) {
        return Err(precondition("counterexample radii must be at least 2"));
    }
    let rows: Vec<CounterexampleRow> = radii
        .iter()
        .map(|&r| {
            let lr = r.ln();
            CounterexampleRow { radius: r, u: counterexample_value(lr), ratio: counterexample_scaled_plaplacian(p, n, lr).abs() * lr.powf(p - 1.0) }
        })
        .collect();
    let fitted_constant = rows.iter().map(|r| r.ratio).fold(0.0f64, f64::max);
    let mut decades: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
    for row in &rows {
        let e = decades.entry(row.radius.log10().floor() as i64).or_insert(0.0);
        *e = e.max(row.ratio);
    }
    let dmax = decades.values().cloned().fold(0.0f64, f64::max);
    let dmin = decades.values().cloned().fold(f64::INFINITY, f64::min);
    let variation = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
    let log_radii: Vec<f64> = (1..=extremes).map(|k| (k as f64 * std::f64::consts::PI).exp()).collect();
    let extreme_values: Vec<f64> = log_radii.iter().map(|lr| counterexample_value(*lr)).collect();
    let alternates = extreme_values.windows(2).all(|w| (w[0] + w[1]).abs() < 1e-9 && (w[0].abs() - 1.0).abs() < 1e-9);
    let stats: Vec<SphereStats> = log_radii
        .iter()
        .zip(&extreme_values)
        .map(|(lr, v)| SphereStats::from_log_values(lr.exp(), *lr, &[*v]))
        .collect::<Result<_>>()?;
    let fit = decay_fit(&stats, &spec, &SourceTerm::counterexample(p, n))?;
    Ok(CounterexampleReport { p, n, rows, fitted_constant, variation, bounded: variation < 10.0, extreme_values, alternates, fit })
}
