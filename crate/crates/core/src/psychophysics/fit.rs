//! Logistic psychometric curve, JND and Weber fraction.
//!
//! The modeled percentage of "test is higher" answers at test pressure `P`
//! is `100 / (1 + exp(-k (P - P_o)))`. Only the steepness `k` is free; the
//! 75% point lies `ln(3) / k` above the reference.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::records::{Shown, TrialResponse};
use crate::error::{invalid_param, Error, Result};

/// Search interval for the steepness, 1/psi.
pub const K_BOUNDS: (f64, f64) = (0.1, 50.0);

const COARSE_STEP: f64 = 0.01;

pub fn sigmoid_percent(pressure: f64, reference: f64, k: f64) -> f64 {
    100.0 / (1.0 + (-k * (pressure - reference)).exp())
}

/// Just noticeable difference for steepness `k`, psi.
pub fn jnd(k: f64) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid_param(format!("steepness must be positive, got {k}")));
    }
    Ok(3f64.ln() / k)
}

/// JND as a percentage of the reference pressure.
pub fn weber(jnd: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(invalid_param("reference pressure must be positive"));
    }
    Ok(100.0 * jnd / reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressurePoint {
    pub pressure: f64,
    /// Answers calling the test pressure higher.
    pub chose_test: u32,
    pub total: u32,
}

impl PressurePoint {
    pub fn percent(&self) -> f64 {
        100.0 * self.chose_test as f64 / self.total as f64
    }
}

/// Responses grouped by test pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsychometricData {
    pub reference: f64,
    pub points: Vec<PressurePoint>,
}

impl PsychometricData {
    /// Group (test pressure, called-test-higher) observations.
    pub fn from_observations(reference: f64, observations: impl IntoIterator<Item = (f64, bool)>) -> Self {
        let mut groups: BTreeMap<u64, (f64, u32, u32)> = BTreeMap::new();
        for (p, chose) in observations {
            // Non-negative floats order like their bit patterns.
            let e = groups.entry(p.to_bits()).or_insert((p, 0, 0));
            e.1 += chose as u32;
            e.2 += 1;
        }
        let points = groups
            .into_values()
            .map(|(pressure, chose_test, total)| PressurePoint { pressure, chose_test, total })
            .collect();
        PsychometricData { reference, points }
    }

    /// Group pair-trial responses. The test pressure is whichever slot differs
    /// from the reference; for identical pairs it is the second slot.
    pub fn from_pair_responses(reference: f64, responses: &[TrialResponse]) -> Self {
        let obs = responses.iter().filter_map(|r| match r.shown {
            Shown::Pair { first, second } => {
                let (test, test_is_first) =
                    if first != reference && second == reference { (first, true) } else { (second, false) };
                let chose_first = r.answer == super::Answer::First;
                Some((test, chose_first == test_is_first))
            }
            Shown::Triplet { .. } => None,
        });
        Self::from_observations(reference, obs)
    }

    /// Squared error between observed and modeled percentages.
    pub fn sse(&self, k: f64) -> f64 {
        self.points.iter().map(|pt| (pt.percent() - sigmoid_percent(pt.pressure, self.reference, k)).powi(2)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsychometricFit {
    pub k: f64,
    pub reference: f64,
    pub jnd: f64,
    pub weber: f64,
    pub sse: f64,
    pub points: Vec<PressurePoint>,
}

impl PsychometricFit {
    pub fn p75(&self) -> f64 {
        self.reference + self.jnd
    }

    pub fn modeled_percent(&self, pressure: f64) -> f64 {
        sigmoid_percent(pressure, self.reference, self.k)
    }
}

/// Least-squares steepness on per-pressure percentages: a coarse scan of
/// [`K_BOUNDS`] followed by golden-section refinement around the best cell.
pub fn fit_sigmoid(data: &PsychometricData) -> Result<PsychometricFit> {
    let pts = &data.points;
    if pts.iter().any(|p| p.total == 0) {
        return Err(Error::InvalidInput("pressure group without responses".into()));
    }
    if pts.len() < 2 {
        return Err(Error::InvalidInput("need at least two distinct test pressures".into()));
    }
    let first = pts[0].percent();
    if pts.iter().all(|p| p.percent() == first) {
        return Err(Error::Degenerate("all proportions are identical".into()));
    }
    if pts.iter().all(|p| p.pressure == data.reference) {
        return Err(Error::Degenerate("no test pressure differs from the reference".into()));
    }

    let (lo, hi) = K_BOUNDS;
    let n = ((hi - lo) / COARSE_STEP).round() as usize;
    let (best_i, _) = (0..=n)
        .map(|i| (i, data.sse(lo + i as f64 * COARSE_STEP)))
        .fold((0, f64::INFINITY), |acc, (i, e)| if e < acc.1 { (i, e) } else { acc });
    let a = (lo + (best_i as f64 - 1.0) * COARSE_STEP).max(lo);
    let b = (lo + (best_i as f64 + 1.0) * COARSE_STEP).min(hi);
    let k = golden_section(|k| data.sse(k), a, b, 1e-10);

    let jnd = jnd(k)?;
    Ok(PsychometricFit {
        k,
        reference: data.reference,
        jnd,
        weber: weber(jnd, data.reference)?,
        sse: data.sse(k),
        points: pts.clone(),
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psychophysics::TEST_PRESSURES;

    /// Exhaustive scan with step 1e-3; independent of the fitter.
    fn grid_oracle(data: &PsychometricData) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut i = 0;
        loop {
            let k = 0.1 + i as f64 * 1e-3;
            if k > 50.0 {
                break;
            }
            let e = data.sse(k);
            if e < best.0 {
                best = (e, k);
            }
            i += 1;
        }
        best.1
    }

    fn noiseless(k: f64, total: u32) -> PsychometricData {
        // Exact percentages need fractional counts; scale counts instead.
        let points = TEST_PRESSURES
            .iter()
            .map(|&p| {
                let pct = sigmoid_percent(p, 2.0, k);
                PressurePoint { pressure: p, chose_test: (pct / 100.0 * total as f64).round() as u32, total }
            })
            .collect();
        PsychometricData { reference: 2.0, points }
    }

    #[test]
    fn table_values() {
        let j = jnd(4.678).unwrap();
        assert!((j - 0.235).abs() < 5e-4);
        assert!((weber(j, 2.0).unwrap() - 11.74).abs() < 0.01);
        let j = jnd(11.15).unwrap();
        assert!((j - 0.099).abs() < 5e-4);
        assert!((weber(j, 2.0).unwrap() - 4.927).abs() < 0.01);
        let j = jnd(2.478).unwrap();
        assert!((j - 0.443).abs() < 5e-4);
        assert!((weber(j, 2.0).unwrap() - 22.17).abs() < 0.01);
    }

    #[test]
    fn jnd_rejects_nonpositive_steepness() {
        assert!(jnd(0.0).is_err());
        assert!(jnd(-1.0).is_err());
        assert!(jnd(f64::NAN).is_err());
        assert!(weber(0.2, 0.0).is_err());
    }

    #[test]
    fn p75_is_the_75_percent_point() {
        let fit = PsychometricFit {
            k: 4.678,
            reference: 2.0,
            jnd: jnd(4.678).unwrap(),
            weber: 0.0,
            sse: 0.0,
            points: vec![],
        };
        assert!((fit.modeled_percent(fit.p75()) - 75.0).abs() < 1e-9);
        assert_eq!(fit.modeled_percent(2.0), 50.0);
    }

    #[test]
    fn recovers_noiseless_steepness() {
        let data = noiseless(4.678, 1_000_000);
        let fit = fit_sigmoid(&data).unwrap();
        assert!((fit.k - 4.678).abs() / 4.678 < 0.01, "{}", fit.k);
        assert!((fit.k - grid_oracle(&data)).abs() <= 1e-3);
    }

    #[test]
    fn subject_shaped_data_matches_oracle() {
        // Ten answers per pressure, shaped like a single participant's curve.
        let chose = [1, 2, 4, 5, 6, 8, 10];
        let points = TEST_PRESSURES
            .iter()
            .zip(chose)
            .map(|(&p, c)| PressurePoint { pressure: p, chose_test: c, total: 10 })
            .collect();
        let data = PsychometricData { reference: 2.0, points };
        let fit = fit_sigmoid(&data).unwrap();
        let oracle = grid_oracle(&data);
        assert!((fit.k - oracle).abs() <= 0.05 * oracle, "{} vs {oracle}", fit.k);
    }

    #[test]
    fn reference_point_does_not_move_the_fit() {
        let with = noiseless(3.0, 1000);
        let mut without = with.clone();
        without.points.retain(|p| p.pressure != 2.0);
        let mut skewed = with.clone();
        for p in &mut skewed.points {
            if p.pressure == 2.0 {
                p.chose_test = 900;
            }
        }
        let k = fit_sigmoid(&with).unwrap().k;
        assert!((k - fit_sigmoid(&without).unwrap().k).abs() < 1e-6);
        assert!((k - fit_sigmoid(&skewed).unwrap().k).abs() < 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        let flat = PsychometricData::from_observations(2.0, TEST_PRESSURES.iter().map(|&p| (p, true)));
        assert!(matches!(fit_sigmoid(&flat), Err(Error::Degenerate(_))));
        let single = PsychometricData::from_observations(2.0, [(2.5, true), (2.5, false)]);
        assert!(matches!(fit_sigmoid(&single), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn grouping_counts() {
        let d = PsychometricData::from_observations(2.0, [(2.5, true), (1.5, false), (2.5, false), (2.5, true)]);
        assert_eq!(d.points.len(), 2);
        assert_eq!(d.points[0], PressurePoint { pressure: 1.5, chose_test: 0, total: 1 });
        assert_eq!(d.points[1], PressurePoint { pressure: 2.5, chose_test: 2, total: 3 });
    }
}
