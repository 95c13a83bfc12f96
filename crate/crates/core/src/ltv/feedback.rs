//! Synchronizing feedback laws built from the cached transition matrix.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{BoundednessReport, CachedPair, MatFn, MatrixFunction, TransitionCache};
use crate::error::{Result, SyncError};
use crate::ode::Side;
use crate::TimeKind;

/// `L(t) = Φ(t,0)Φᵀ(t,0)Cᵀ(t)` (continuous) or
/// `L(k) = (āc̄)⁻¹ Φ(k+1,0)Φᵀ(k,0)Cᵀ(k)` (discrete).
#[derive(Debug, Clone)]
pub struct FeedbackLaw {
    cache: Arc<TransitionCache>,
    c: MatFn,
    gain: f64,
}

impl FeedbackLaw {
    fn sided(&self, t: f64, side: Side) -> Result<DMatrix<f64>> {
        let ct = self.c.eval_side(t, side)?.transpose();
        let l = match self.cache.kind() {
            TimeKind::Continuous => {
                let phi = self.cache.phi(t)?;
                &phi * phi.transpose() * ct
            }
            TimeKind::Discrete => self.cache.phi(t + 1.0)? * self.cache.phi(t)?.transpose() * ct,
        };
        Ok(l * self.gain)
    }

    pub fn shared(self) -> MatFn {
        Arc::new(self)
    }
}

impl MatrixFunction for FeedbackLaw {
    fn dims(&self) -> (usize, usize) {
        (self.cache.n(), self.c.dims().0)
    }
    fn domain(&self) -> (f64, f64) {
        match self.cache.kind() {
            TimeKind::Continuous => (0.0, self.cache.horizon()),
            TimeKind::Discrete => (0.0, self.cache.horizon() - 1.0),
        }
    }
    fn value(&self, t: f64) -> DMatrix<f64> {
        let (r, c) = self.dims();
        self.sided(t, Side::Right)
            .unwrap_or_else(|_| DMatrix::from_element(r, c, f64::NAN))
    }
    fn value_left(&self, t: f64) -> DMatrix<f64> {
        let (r, c) = self.dims();
        self.sided(t, Side::Left)
            .unwrap_or_else(|_| DMatrix::from_element(r, c, f64::NAN))
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut b = self.cache.a().breakpoints(t0, t1);
        b.extend(self.c.breakpoints(t0, t1));
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

pub fn feedback_law_continuous(pair: &CachedPair) -> Result<FeedbackLaw> {
    if pair.kind() != TimeKind::Continuous {
        return Err(SyncError::Unsupported(
            "continuous feedback law needs a continuous pair".into(),
        ));
    }
    Ok(FeedbackLaw {
        cache: Arc::clone(pair.cache()),
        c: Arc::clone(pair.pair().c()),
        gain: 1.0,
    })
}

pub fn feedback_law_discrete(pair: &CachedPair, report: &BoundednessReport) -> Result<FeedbackLaw> {
    if pair.kind() != TimeKind::Discrete {
        return Err(SyncError::Unsupported(
            "discrete feedback law needs a discrete pair".into(),
        ));
    }
    let scale = report.a_bar * report.c_bar;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(SyncError::NonPositive {
            name: "a_bar * c_bar",
            value: scale,
        });
    }
    Ok(FeedbackLaw {
        cache: Arc::clone(pair.cache()),
        c: Arc::clone(pair.pair().c()),
        gain: 1.0 / scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_norm;
    use crate::ltv::function::{constant, zero, Analytic};
    use crate::ltv::LtvPair;

    #[test]
    fn zero_generator_gives_output_transpose() {
        let c = Analytic::new("c", (1, 2), |t: f64| {
            DMatrix::from_row_slice(1, 2, &[t, 1.0])
        })
        .shared();
        let p = CachedPair::new(
            LtvPair::new(zero(2, 2), c, TimeKind::Continuous).unwrap(),
            1e-2,
            3.0,
        )
        .unwrap();
        let l = feedback_law_continuous(&p).unwrap();
        assert_eq!(l.dims(), (2, 1));
        assert!(
            (l.eval(1.5).unwrap() - DMatrix::from_column_slice(2, 1, &[1.5, 1.0])).amax() < 1e-15
        );
    }

    #[test]
    fn harmonic_law_is_output_transpose() {
        let p = CachedPair::new(LtvPair::harmonic_oscillator(), 1e-3, 20.0).unwrap();
        let l = feedback_law_continuous(&p).unwrap();
        let rep = p.boundedness(0.05).unwrap();
        for &t in &[0.0, 1.234, 19.5] {
            let v = l.eval(t).unwrap();
            assert!((&v - DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).amax() < 1e-9);
            assert!(spectral_norm(&v) <= rep.a_bar * rep.a_bar * rep.c_bar + 1e-9);
        }
    }

    #[test]
    fn discrete_law_scaling() {
        let id = constant(DMatrix::identity(2, 2));
        let p = CachedPair::new(
            LtvPair::new(id.clone(), id, TimeKind::Discrete).unwrap(),
            1.0,
            10.0,
        )
        .unwrap();
        let rep = p.boundedness(1.0).unwrap();
        let l = feedback_law_discrete(&p, &rep).unwrap();
        assert_eq!(l.eval(3.0).unwrap(), DMatrix::identity(2, 2));
        let doubled = BoundednessReport {
            c_bar: 2.0 * rep.c_bar,
            ..rep.clone()
        };
        let half = feedback_law_discrete(&p, &doubled).unwrap();
        assert_eq!(half.eval(3.0).unwrap(), DMatrix::identity(2, 2) * 0.5);
        assert!(l.eval(10.0).is_err());
    }

    #[test]
    fn rotation_law_norm() {
        let p = CachedPair::new(LtvPair::rotation_pair(0.3), 1.0, 50.0).unwrap();
        let mut rep = p.boundedness(1.0).unwrap();
        rep.a_bar = 1.5;
        let l = feedback_law_discrete(&p, &rep).unwrap();
        for k in 0..49 {
            let n = spectral_norm(&l.eval(k as f64).unwrap());
            assert!((n - 1.0 / 1.5).abs() < 1e-12);
        }
    }
}
