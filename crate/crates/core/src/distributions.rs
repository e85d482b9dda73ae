//! Private-cost distributions `F` on a finite support `[c_lo, c_hi]`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};

/// Tolerance used when snapping the end knots of a piecewise-linear cdf.
const KNOT_SNAP: f64 = 1e-9;

/// Serializable description of a cost distribution.
///
/// ```json
/// {"kind":"uniform","a":0.25,"b":1.25}
/// {"kind":"power","alpha":20}
/// {"kind":"piecewise_linear","knots":[[0,0],[0.428571,0.4],[0.571429,0.8],[1,1]]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Uniform { a: f64, b: f64 },
    Power { alpha: f64 },
    PiecewiseLinear { knots: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Uniform { a: f64, b: f64 },
    /// `F(c) = c^alpha` on `[0, 1]`.
    Power { alpha: f64 },
    /// Knots `(c_i, F_i)` with strictly increasing `c_i` and `F` running from 0 to 1.
    PiecewiseLinear { c: Vec<f64>, f: Vec<f64> },
}

/// A validated cost distribution. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CostDistribution {
    kind: Kind,
}

impl CostDistribution {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        ensure_finite("a", a)?;
        ensure_finite("b", b)?;
        if a < 0.0 {
            return Err(invalid(format!("lower support bound must be >= 0, got {a}")));
        }
        if a >= b {
            return Err(invalid(format!("uniform needs a < b, got a={a}, b={b}")));
        }
        Ok(Self {
            kind: Kind::Uniform { a, b },
        })
    }

    pub fn power(alpha: f64) -> Result<Self> {
        ensure_finite("alpha", alpha)?;
        if alpha <= 0.0 {
            return Err(invalid(format!("power exponent must be > 0, got {alpha}")));
        }
        Ok(Self {
            kind: Kind::Power { alpha },
        })
    }

    pub fn piecewise_linear(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(invalid("piecewise-linear cdf needs at least two knots"));
        }
        let mut c = Vec::with_capacity(knots.len());
        let mut f = Vec::with_capacity(knots.len());
        for &(ci, fi) in knots {
            ensure_finite("knot cost", ci)?;
            ensure_finite("knot cdf", fi)?;
            c.push(ci);
            f.push(fi);
        }
        if c[0] < 0.0 {
            return Err(invalid(format!("lower support bound must be >= 0, got {}", c[0])));
        }
        if c.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("knot costs must be strictly increasing"));
        }
        if f.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("knot cdf values must be nondecreasing"));
        }
        let last = f.len() - 1;
        if f[0].abs() > KNOT_SNAP || (f[last] - 1.0).abs() > KNOT_SNAP {
            return Err(invalid("piecewise-linear cdf must start at 0 and end at 1"));
        }
        f[0] = 0.0;
        f[last] = 1.0;
        Ok(Self {
            kind: Kind::PiecewiseLinear { c, f },
        })
    }

    pub fn from_spec(spec: &DistributionSpec) -> Result<Self> {
        match spec {
            DistributionSpec::Uniform { a, b } => Self::uniform(*a, *b),
            DistributionSpec::Power { alpha } => Self::power(*alpha),
            DistributionSpec::PiecewiseLinear { knots } => {
                let pairs: Vec<(f64, f64)> = knots.iter().map(|k| (k[0], k[1])).collect();
                Self::piecewise_linear(&pairs)
            }
        }
    }

    pub fn to_spec(&self) -> DistributionSpec {
        match &self.kind {
            Kind::Uniform { a, b } => DistributionSpec::Uniform { a: *a, b: *b },
            Kind::Power { alpha } => DistributionSpec::Power { alpha: *alpha },
            Kind::PiecewiseLinear { c, f } => DistributionSpec::PiecewiseLinear {
                knots: c.iter().zip(f).map(|(&ci, &fi)| [ci, fi]).collect(),
            },
        }
    }

    /// Lower end of the support, `c̲`.
    pub fn lower(&self) -> f64 {
        match &self.kind {
            Kind::Uniform { a, .. } => *a,
            Kind::Power { .. } => 0.0,
            Kind::PiecewiseLinear { c, .. } => c[0],
        }
    }

    /// Upper end of the support, `c̄`.
    pub fn upper(&self) -> f64 {
        match &self.kind {
            Kind::Uniform { b, .. } => *b,
            Kind::Power { .. } => 1.0,
            Kind::PiecewiseLinear { c, .. } => c[c.len() - 1],
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lower(), self.upper())
    }

    pub fn contains(&self, c: f64) -> bool {
        c >= self.lower() && c <= self.upper()
    }

    pub(crate) fn check_support(&self, c: f64) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::OutOfSupport {
                value: c,
                lo: self.lower(),
                hi: self.upper(),
            })
        }
    }

    /// Cumulative distribution function; clamps to 0 below and 1 above the support.
    pub fn cdf(&self, c: f64) -> f64 {
        if c <= self.lower() {
            return 0.0;
        }
        if c >= self.upper() {
            return 1.0;
        }
        match &self.kind {
            Kind::Uniform { a, b } => (c - a) / (b - a),
            Kind::Power { alpha } => c.powf(*alpha),
            Kind::PiecewiseLinear { c: cs, f } => {
                let i = segment_index(cs, c);
                let t = (c - cs[i]) / (cs[i + 1] - cs[i]);
                f[i] + t * (f[i + 1] - f[i])
            }
        }
    }

    /// Density. Kinks of a piecewise-linear cdf take the right-limit slope,
    /// the upper endpoint takes the left-limit slope.
    pub fn pdf(&self, c: f64) -> Result<f64> {
        self.check_support(c)?;
        match &self.kind {
            Kind::Uniform { a, b } => Ok(1.0 / (b - a)),
            Kind::Power { alpha } => {
                if c == 0.0 {
                    if *alpha < 1.0 {
                        return Err(Error::UnboundedDensity(c));
                    }
                    return Ok(if *alpha == 1.0 { 1.0 } else { 0.0 });
                }
                Ok(alpha * c.powf(alpha - 1.0))
            }
            Kind::PiecewiseLinear { c: cs, f } => {
                let i = segment_index(cs, c);
                Ok((f[i + 1] - f[i]) / (cs[i + 1] - cs[i]))
            }
        }
    }

    /// Inverse cdf on `[0, 1]`; flat stretches of a piecewise cdf map to their left end.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.kind {
            Kind::Uniform { a, b } => a + u * (b - a),
            Kind::Power { alpha } => u.powf(1.0 / alpha),
            Kind::PiecewiseLinear { c, f } => {
                if u <= 0.0 {
                    return c[0];
                }
                // first knot with F >= u
                let j = f.partition_point(|&fi| fi < u).max(1).min(f.len() - 1);
                let (f0, f1) = (f[j - 1], f[j]);
                if f1 == f0 {
                    return c[j - 1];
                }
                c[j - 1] + (u - f0) / (f1 - f0) * (c[j] - c[j - 1])
            }
        }
    }

    /// `F(c)/f(c)`. At `c = c̲` the right limit 0 is returned.
    pub fn reverse_hazard_ratio(&self, c: f64) -> Result<f64> {
        self.check_support(c)?;
        if c == self.lower() {
            return Ok(0.0);
        }
        match &self.kind {
            Kind::Uniform { a, .. } => Ok(c - a),
            Kind::Power { alpha } => Ok(c / alpha),
            Kind::PiecewiseLinear { .. } => {
                let dens = self.pdf(c)?;
                if dens <= 0.0 {
                    return Err(Error::ZeroDensity(c));
                }
                Ok(self.cdf(c) / dens)
            }
        }
    }

    /// Grid check that `F/f` is nondecreasing on the support interior.
    pub fn check_assumption4(&self, grid_size: usize) -> Result<MonotonicityReport> {
        if grid_size < 2 {
            return Err(invalid("grid_size must be at least 2"));
        }
        let (lo, hi) = self.support();
        let h = (hi - lo) / (grid_size + 1) as f64;
        let mut prev: Option<(f64, f64)> = None;
        for i in 1..=grid_size {
            let c = lo + h * i as f64;
            let r = match self.reverse_hazard_ratio(c) {
                Ok(r) => r,
                Err(_) => {
                    return Ok(MonotonicityReport {
                        passed: false,
                        grid_size,
                        violation: Some((prev.map_or(c, |p| p.0), c)),
                    })
                }
            };
            if let Some((pc, pr)) = prev {
                if r < pr - 1e-12 * pr.abs().max(1.0) {
                    return Ok(MonotonicityReport {
                        passed: false,
                        grid_size,
                        violation: Some((pc, c)),
                    });
                }
            }
            prev = Some((c, r));
        }
        Ok(MonotonicityReport {
            passed: true,
            grid_size,
            violation: None,
        })
    }

    /// Kink locations of a piecewise-linear cdf (interior knots), empty otherwise.
    pub fn kinks(&self) -> &[f64] {
        match &self.kind {
            Kind::PiecewiseLinear { c, .. } if c.len() > 2 => &c[1..c.len() - 1],
            _ => &[],
        }
    }

    /// Left-limit density at an interior knot, `None` for smooth kinds.
    pub(crate) fn left_slope_at(&self, x: f64) -> Option<f64> {
        match &self.kind {
            Kind::PiecewiseLinear { c, f } => {
                let j = c.iter().position(|&ci| ci == x)?;
                (j > 0).then(|| (f[j] - f[j - 1]) / (c[j] - c[j - 1]))
            }
            _ => None,
        }
    }
}

fn segment_index(cs: &[f64], c: f64) -> usize {
    // last knot with cs[i] <= c, capped so that i + 1 is valid
    let i = cs.partition_point(|&k| k <= c);
    i.saturating_sub(1).min(cs.len() - 2)
}

/// Outcome of [`CostDistribution::check_assumption4`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub passed: bool,
    pub grid_size: usize,
    /// First adjacent grid pair `(c_i, c_{i+1})` where `F/f` decreased.
    pub violation: Option<(f64, f64)>,
}

impl TryFrom<&DistributionSpec> for CostDistribution {
    type Error = Error;

    fn try_from(spec: &DistributionSpec) -> Result<Self> {
        Self::from_spec(spec)
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::kinked;
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn construct_examples() {
        let u = CostDistribution::uniform(0.0, 1.0).unwrap();
        assert_eq!(u.cdf(0.5), 0.5);
        let p = CostDistribution::power(20.0).unwrap();
        assert_eq!(p.support(), (0.0, 1.0));
        assert!(close(p.cdf(0.5), 0.5f64.powi(20), 1e-18));
        let k = kinked();
        assert_eq!(k.support(), (0.0, 1.0));
        assert_eq!(k.kinks().len(), 2);
    }

    #[test]
    fn construct_rejects_bad_parameters() {
        assert!(CostDistribution::uniform(1.0, 1.0).is_err());
        assert!(CostDistribution::uniform(-0.1, 1.0).is_err());
        assert!(CostDistribution::power(0.0).is_err());
        assert!(CostDistribution::power(-2.0).is_err());
        assert!(CostDistribution::power(f64::NAN).is_err());
        assert!(CostDistribution::piecewise_linear(&[(0.0, 0.0), (0.5, 0.7), (0.4, 1.0)]).is_err());
        assert!(CostDistribution::piecewise_linear(&[(0.0, 0.0), (0.5, 0.7), (1.0, 0.6)]).is_err());
        assert!(CostDistribution::piecewise_linear(&[(0.0, 0.1), (1.0, 1.0)]).is_err());
        assert!(CostDistribution::piecewise_linear(&[(-0.5, 0.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn json_spec_round_trip() {
        let text = r#"{"kind":"piecewise_linear","knots":[[0,0],[0.428571,0.4],[0.571429,0.8],[1,1]]}"#;
        let spec: DistributionSpec = serde_json::from_str(text).unwrap();
        let d = CostDistribution::from_spec(&spec).unwrap();
        assert!(close(d.cdf(0.5), 0.6, 1e-5));
        let spec: DistributionSpec = serde_json::from_str(r#"{"kind":"uniform","a":0.25,"b":1.25}"#).unwrap();
        assert_eq!(CostDistribution::from_spec(&spec).unwrap().support(), (0.25, 1.25));
        let spec: DistributionSpec = serde_json::from_str(r#"{"kind":"power","alpha":20}"#).unwrap();
        let d = CostDistribution::try_from(&spec).unwrap();
        assert_eq!(d.to_spec(), spec);
        assert!(serde_json::from_str::<DistributionSpec>(r#"{"kind":"gamma","k":2}"#).is_err());
    }

    #[test]
    fn cdf_examples() {
        let u = CostDistribution::uniform(0.25, 1.25).unwrap();
        assert_eq!(u.cdf(0.25), 0.0);
        assert_eq!(u.cdf(-3.0), 0.0);
        assert_eq!(u.cdf(7.0), 1.0);
        let p = CostDistribution::power(20.0).unwrap();
        assert!(close(p.cdf(0.9151), 0.169_578_624, 1e-8));
        assert!(close(kinked().cdf(0.5), 0.6, 1e-15));
    }

    #[test]
    fn pdf_examples() {
        let u = CostDistribution::uniform(0.0, 1.0).unwrap();
        assert_eq!(u.pdf(0.3).unwrap(), 1.0);
        let p = CostDistribution::power(2.0).unwrap();
        assert!(close(p.pdf(0.5).unwrap(), 1.0, 1e-15));
        let k = kinked();
        assert!(close(k.pdf(0.5).unwrap(), 14.0 / 5.0, 1e-12));
        // right limit at the kink, left limit at the top
        assert!(close(k.pdf(3.0 / 7.0).unwrap(), 14.0 / 5.0, 1e-12));
        assert!(close(k.pdf(1.0).unwrap(), 7.0 / 15.0, 1e-12));
        assert!(close(k.pdf(0.0).unwrap(), 14.0 / 15.0, 1e-12));
        assert!(matches!(u.pdf(1.5), Err(Error::OutOfSupport { .. })));
        assert!(matches!(
            CostDistribution::power(0.5).unwrap().pdf(0.0),
            Err(Error::UnboundedDensity(_))
        ));
    }

    #[test]
    fn reverse_hazard_examples() {
        let u = CostDistribution::uniform(0.0, 1.0).unwrap();
        assert!(close(u.reverse_hazard_ratio(0.37).unwrap(), 0.37, 1e-15));
        let p = CostDistribution::power(3.0).unwrap();
        assert!(close(p.reverse_hazard_ratio(0.6).unwrap(), 0.2, 1e-15));
        let ab = CostDistribution::uniform(0.25, 1.25).unwrap();
        assert!(close(ab.reverse_hazard_ratio(0.75).unwrap(), 0.5, 1e-15));
        assert_eq!(p.reverse_hazard_ratio(0.0).unwrap(), 0.0);
        let flat = CostDistribution::piecewise_linear(&[(0.0, 0.0), (0.4, 0.5), (0.6, 0.5), (1.0, 1.0)]).unwrap();
        assert!(matches!(flat.reverse_hazard_ratio(0.5), Err(Error::ZeroDensity(_))));
    }

    #[test]
    fn assumption4_examples() {
        let u = CostDistribution::uniform(0.0, 1.0).unwrap();
        assert!(u.check_assumption4(100).unwrap().passed);
        assert!(CostDistribution::power(20.0).unwrap().check_assumption4(100).unwrap().passed);
        let report = kinked().check_assumption4(100).unwrap();
        assert!(!report.passed);
        let (a, b) = report.violation.unwrap();
        // F/f drops from ~3/7 to ~1/7 across the first kink
        assert!(a < 3.0 / 7.0 && b >= 3.0 / 7.0);
        assert!(u.check_assumption4(1).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for d in [
            CostDistribution::uniform(0.25, 1.25).unwrap(),
            CostDistribution::power(20.0).unwrap(),
            kinked(),
        ] {
            for i in 0..=50 {
                let u = i as f64 / 50.0;
                assert!(close(d.cdf(d.quantile(u)), u, 1e-12));
            }
        }
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for i in 1..m {
            s += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn density_integrates_to_one() {
        let u = CostDistribution::uniform(0.25, 1.25).unwrap();
        let p = CostDistribution::power(20.0).unwrap();
        for d in [&u, &p] {
            let (lo, hi) = d.support();
            let mass = simpson(|c| d.pdf(c).unwrap(), lo, hi, 20_000);
            assert!(close(mass, 1.0, 1e-9), "mass {mass}");
        }
        // piecewise: integrate each linear piece separately
        let k = kinked();
        let knots = [0.0, 3.0 / 7.0, 4.0 / 7.0, 1.0];
        let mass: f64 = knots
            .windows(2)
            .map(|w| simpson(|c| k.pdf(c.min(w[1] - 1e-15).max(w[0])).unwrap(), w[0], w[1], 2))
            .sum();
        assert!(close(mass, 1.0, 1e-9), "mass {mass}");
    }

    fn any_distribution() -> impl Strategy<Value = CostDistribution> {
        prop_oneof![
            (0.0..2.0f64, 0.1..3.0f64).prop_map(|(a, w)| CostDistribution::uniform(a, a + w).unwrap()),
            (0.2..25.0f64).prop_map(|al| CostDistribution::power(al).unwrap()),
            Just(kinked()),
        ]
    }

    proptest! {
        #[test]
        fn cdf_is_monotone(d in any_distribution(), s in 0.0..1.0f64, t in 0.0..1.0f64) {
            let (lo, hi) = d.support();
            let (x, y) = (lo + s.min(t) * (hi - lo), lo + s.max(t) * (hi - lo));
            prop_assert!(d.cdf(x) <= d.cdf(y));
            prop_assert!((0.0..=1.0).contains(&d.cdf(x)));
        }

        #[test]
        fn reverse_hazard_times_density_is_cdf(d in any_distribution(), s in 0.01..0.99f64) {
            let (lo, hi) = d.support();
            let c = lo + s * (hi - lo);
            let r = d.reverse_hazard_ratio(c).unwrap();
            prop_assert!((r * d.pdf(c).unwrap() - d.cdf(c)).abs() <= 1e-12);
        }
    }
}
