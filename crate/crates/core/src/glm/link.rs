//! Monotone link functions `g` for the generalized linear demand model.

use std::fmt;
use std::sync::Arc;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied link: `g` and its derivative. The inverse is found by
/// bracketing bisection, so `g` must be strictly increasing.
#[derive(Clone)]
pub struct CustomLink {
    name: String,
    g: ScalarFn,
    g_prime: ScalarFn,
}

impl fmt::Debug for CustomLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLink").field("name", &self.name).finish()
    }
}

#[derive(Clone, Debug)]
pub enum LinkKind {
    Identity,
    Logistic,
    Custom(CustomLink),
}

/// A strictly increasing link `g` together with the derivative bounds
/// `g_lower <= g'(z) <= g_upper` on the domain `|z| <= domain_radius`.
#[derive(Clone, Debug)]
pub struct LinkFunction {
    kind: LinkKind,
    g_lower: f64,
    g_upper: f64,
}

const BOUND_GRID: usize = 4001;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LinkFunction {
    pub fn identity() -> Self {
        Self {
            kind: LinkKind::Identity,
            g_lower: 1.0,
            g_upper: 1.0,
        }
    }

    /// Logistic link. `domain_radius` bounds `|x'beta + x'gamma p|`; with
    /// `||theta|| <= theta_bar` and `||(x, px)|| <= 1` it equals `theta_bar`.
    pub fn logistic(domain_radius: f64) -> Self {
        let s = sigmoid(domain_radius.abs());
        Self {
            kind: LinkKind::Logistic,
            g_lower: s * (1.0 - s),
            g_upper: 0.25,
        }
    }

    /// Custom link; derivative bounds are taken from a grid over
    /// `[-domain_radius, domain_radius]`.
    pub fn custom<G, D>(name: impl Into<String>, g: G, g_prime: D, domain_radius: f64) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let r = domain_radius.abs();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..BOUND_GRID {
            let z = -r + 2.0 * r * i as f64 / (BOUND_GRID - 1) as f64;
            let d = g_prime(z);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        Self {
            kind: LinkKind::Custom(CustomLink {
                name: name.into(),
                g: Arc::new(g),
                g_prime: Arc::new(g_prime),
            }),
            g_lower: lo,
            g_upper: hi,
        }
    }

    /// Override the derivative bounds (e.g. on an enlarged sampling domain).
    pub fn with_bounds(mut self, g_lower: f64, g_upper: f64) -> Self {
        self.g_lower = g_lower;
        self.g_upper = g_upper;
        self
    }

    pub fn kind(&self) -> &LinkKind {
        &self.kind
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            LinkKind::Identity => "identity",
            LinkKind::Logistic => "logistic",
            LinkKind::Custom(c) => &c.name,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, LinkKind::Identity)
    }

    pub fn g_lower(&self) -> f64 {
        self.g_lower
    }

    pub fn g_upper(&self) -> f64 {
        self.g_upper
    }

    pub fn g(&self, z: f64) -> f64 {
        match &self.kind {
            LinkKind::Identity => z,
            LinkKind::Logistic => sigmoid(z),
            LinkKind::Custom(c) => (c.g)(z),
        }
    }

    pub fn g_prime(&self, z: f64) -> f64 {
        match &self.kind {
            LinkKind::Identity => 1.0,
            LinkKind::Logistic => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            LinkKind::Custom(c) => (c.g_prime)(z),
        }
    }

    /// `g^{-1}(u)`, or `None` when `u` is outside the range of `g`.
    pub fn inverse(&self, u: f64) -> Option<f64> {
        match &self.kind {
            LinkKind::Identity => Some(u),
            LinkKind::Logistic => {
                if u > 0.0 && u < 1.0 {
                    Some((u / (1.0 - u)).ln())
                } else {
                    None
                }
            }
            LinkKind::Custom(c) => invert_monotone(&*c.g, u),
        }
    }

    /// Weight `h(u) = g'(g^{-1}(u))`.
    pub fn h(&self, u: f64) -> Option<f64> {
        match &self.kind {
            LinkKind::Identity => Some(1.0),
            LinkKind::Logistic => Some(u * (1.0 - u)),
            LinkKind::Custom(c) => invert_monotone(&*c.g, u).map(|z| (c.g_prime)(z)),
        }
    }

    /// True when the range of `g` lies inside `[0, 1]`.
    pub fn has_unit_range(&self) -> bool {
        matches!(self.kind, LinkKind::Logistic)
    }
}

fn invert_monotone(g: &dyn Fn(f64) -> f64, u: f64) -> Option<f64> {
    if !u.is_finite() {
        return None;
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut width = 1.0;
    while g(lo) > u {
        width *= 2.0;
        lo = -width;
        if width > 1e8 {
            return None;
        }
    }
    width = 1.0;
    while g(hi) < u {
        width *= 2.0;
        hi = width;
        if width > 1e8 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_bounds_and_weight() {
        let l = LinkFunction::identity();
        assert_eq!(l.g_lower(), 1.0);
        assert_eq!(l.g_upper(), 1.0);
        assert_eq!(l.h(0.3), Some(1.0));
        assert_eq!(l.h(-7.0), Some(1.0));
    }

    #[test]
    fn logistic_weight_is_u_one_minus_u() {
        let l = LinkFunction::logistic(3.0);
        for &u in &[0.1, 0.5, 0.9] {
            assert!((l.h(u).unwrap() - u * (1.0 - u)).abs() < 1e-15);
            let z = l.inverse(u).unwrap();
            assert!((l.g_prime(z) - u * (1.0 - u)).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_bounds_hold_on_grid() {
        let r = 3.0;
        let links = [
            LinkFunction::logistic(r),
            LinkFunction::custom("cubic", |z| z + 0.1 * z * z * z, |z| 1.0 + 0.3 * z * z, r),
        ];
        for l in &links {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=1000 {
                let z = -r + 2.0 * r * i as f64 / 1000.0;
                let d = l.g_prime(z);
                assert!(d >= l.g_lower() - 1e-12 && d <= l.g_upper() + 1e-12);
                let v = l.g(z);
                assert!(v > prev, "{} not increasing at {z}", l.name());
                prev = v;
            }
        }
    }

    #[test]
    fn custom_inverse_round_trips() {
        let l = LinkFunction::custom("cubic", |z| z + 0.1 * z * z * z, |z| 1.0 + 0.3 * z * z, 2.0);
        for &z in &[-5.0, -0.3, 0.0, 1.7, 40.0] {
            let u = l.g(z);
            assert!((l.inverse(u).unwrap() - z).abs() < 1e-9 * (1.0 + z.abs()));
        }
    }

    #[test]
    fn logistic_inverse_outside_range() {
        let l = LinkFunction::logistic(1.0);
        assert!(l.inverse(1.0).is_none());
        assert!(l.inverse(-0.1).is_none());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
    }
}
