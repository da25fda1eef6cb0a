use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurveError {
    #[error("curve needs at least one breakpoint")]
    Empty,
    #[error("curve breakpoints must be strictly increasing in x (at index {0})")]
    NotIncreasing(usize),
    #[error("curve breakpoint {0} is not finite")]
    NotFinite(usize),
    #[error("curve must cover x in [{lo}, {hi}], got [{first}, {last}]")]
    Coverage { lo: f64, hi: f64, first: f64, last: f64 },
    #[error("curve value {value} at index {index} outside [{lo}, {hi}]")]
    ValueRange { index: usize, value: f64, lo: f64, hi: f64 },
}

/// Piecewise-linear function given by `(x, y)` breakpoints.
///
/// Outside the breakpoint range the curve is held at the end values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Curve {
    points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, CurveError> {
        if points.is_empty() {
            return Err(CurveError::Empty);
        }
        for (i, &(x, y)) in points.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(CurveError::NotFinite(i));
            }
            if i > 0 && x <= points[i - 1].0 {
                return Err(CurveError::NotIncreasing(i));
            }
        }
        Ok(Self { points })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            points: vec![(0.0, value), (1.0, value)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pts = &self.points;
        let (x0, y0) = pts[0];
        if x <= x0 {
            return y0;
        }
        let (xn, yn) = pts[pts.len() - 1];
        if x >= xn {
            return yn;
        }
        // first breakpoint strictly to the right of x
        let hi = pts.partition_point(|&(px, _)| px <= x);
        let (xa, ya) = pts[hi - 1];
        let (xb, yb) = pts[hi];
        ya + (yb - ya) * (x - xa) / (xb - xa)
    }

    /// Checks the x-range covers `[lo, hi]` and every y lies in `[ylo, yhi]`.
    pub fn check_domain(&self, lo: f64, hi: f64, ylo: f64, yhi: f64) -> Result<(), CurveError> {
        let first = self.points[0].0;
        let last = self.points[self.points.len() - 1].0;
        if first > lo || last < hi {
            return Err(CurveError::Coverage { lo, hi, first, last });
        }
        for (index, &(_, value)) in self.points.iter().enumerate() {
            if value < ylo || value > yhi {
                return Err(CurveError::ValueRange {
                    index,
                    value,
                    lo: ylo,
                    hi: yhi,
                });
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<(f64, f64)>> for Curve {
    type Error = CurveError;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Curve::new(points)
    }
}

impl From<Curve> for Vec<(f64, f64)> {
    fn from(c: Curve) -> Self {
        c.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_between_breakpoints() {
        let c = Curve::new(vec![(0.0, 1.0), (0.8, 1.0), (1.0, 0.0)]).unwrap();
        assert!((c.eval(0.9) - 0.5).abs() < 1e-12);
        assert_eq!(c.eval(0.5), 1.0);
        assert_eq!(c.eval(1.0), 0.0);
        assert_eq!(c.eval(0.8), 1.0);
    }

    #[test]
    fn holds_end_values_outside_range() {
        let c = Curve::new(vec![(0.2, 0.5), (0.6, 0.9)]).unwrap();
        assert_eq!(c.eval(-1.0), 0.5);
        assert_eq!(c.eval(3.0), 0.9);
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert_eq!(Curve::new(vec![]), Err(CurveError::Empty));
        assert_eq!(
            Curve::new(vec![(0.0, 1.0), (0.0, 0.5)]),
            Err(CurveError::NotIncreasing(1))
        );
        let c = Curve::new(vec![(0.1, 1.0), (1.0, 1.0)]).unwrap();
        assert!(matches!(
            c.check_domain(0.0, 1.0, 0.0, 1.0),
            Err(CurveError::Coverage { .. })
        ));
        let c = Curve::new(vec![(0.0, 1.2), (1.0, 1.0)]).unwrap();
        assert!(matches!(
            c.check_domain(0.0, 1.0, 0.0, 1.0),
            Err(CurveError::ValueRange { index: 0, .. })
        ));
    }

    #[test]
    fn deserializes_from_pairs() {
        let c: Curve = serde_json::from_str("[[0, 1], [0.8, 1], [1, 0]]").unwrap();
        assert_eq!(c.points().len(), 3);
        assert!(serde_json::from_str::<Curve>("[[1, 1], [0, 1]]").is_err());
    }
}
