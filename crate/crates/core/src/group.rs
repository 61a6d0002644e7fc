//! Arithmetic and metric structure of the Heisenberg group `H^n`.
//!
//! A point is a pair `(z, u)` with `z` in `R^{2n}` (read as `n` complex
//! pairs `(x_1, y_1, ..., x_n, y_n)`) and a vertical coordinate `u`. The
//! product is
//!
//! ```text
//! (z, u)(z', u') = (z + z', u + u' + 2 Im(z . conj z'))
//! Im(z . conj z') = sum_i (y_i x'_i - x_i y'_i)
//! ```
//!
//! The homogeneous norm `|xi| = (|z|^4 + u^2)^{1/4}` is subadditive and
//! symmetric, and scales linearly under the parabolic dilation
//! `delta_r(z, u) = (r z, r^2 u)`.
//!
//! Coordinates are stored as interleaved reals rather than a complex type
//! so the same layout serves `n > 1` and batch evaluation.

use crate::error::{Error, Result};

/// A point `(z, u)` of `H^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint {
    z: Vec<f64>,
    u: f64,
}

impl GroupPoint {
    /// Builds a point from interleaved coordinates `(x_1, y_1, ..., x_n, y_n)`.
    ///
    /// Rejects empty or odd-length `z` and non-finite components.
    pub fn new(z: Vec<f64>, u: f64) -> Result<Self> {
        if z.is_empty() || z.len() % 2 != 0 {
            return Err(Error::invalid(
                "z",
                z.len() as f64,
                "must have 2n entries for some n >= 1",
            ));
        }
        if !u.is_finite() || z.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(
                "coords",
                f64::NAN,
                "all components must be finite",
            ));
        }
        Ok(GroupPoint { z, u })
    }

    /// The identity element `(0, 0)` of `H^n`.
    pub fn identity(n: usize) -> Self {
        GroupPoint {
            z: vec![0.0; 2 * n],
            u: 0.0,
        }
    }

    /// Convenience constructor for `H^1`.
    pub fn h1(x: f64, y: f64, u: f64) -> Self {
        GroupPoint { z: vec![x, y], u }
    }

    pub fn n(&self) -> usize {
        self.z.len() / 2
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    /// Euclidean norm squared of the horizontal part.
    pub fn z_norm_sq(&self) -> f64 {
        self.z.iter().map(|c| c * c).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.u == 0.0 && self.z.iter().all(|&c| c == 0.0)
    }

    fn check_same_n(&self, other: &GroupPoint) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: other.n(),
            });
        }
        Ok(())
    }
}

/// `sum_i (y_i x'_i - x_i y'_i)` for interleaved coordinate slices.
#[inline]
pub fn im_z_conj(z: &[f64], zp: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in (0..z.len()).step_by(2) {
        acc += z[i + 1] * zp[i] - z[i] * zp[i + 1];
    }
    acc
}

/// Reduced coordinates `(|z|^2, u)` of the left increment `a^{-1} b`, from
/// interleaved slices. Allocation-free for Monte Carlo hot paths.
#[inline]
pub fn left_increment_parts(za: &[f64], ua: f64, zb: &[f64], ub: f64) -> (f64, f64) {
    let mut z_sq = 0.0;
    for (p, q) in za.iter().zip(zb) {
        let d = q - p;
        z_sq += d * d;
    }
    let u = ub - ua - 2.0 * im_z_conj(za, zb);
    (z_sq, u)
}

/// Group product `a * b`.
pub fn multiply(a: &GroupPoint, b: &GroupPoint) -> Result<GroupPoint> {
    a.check_same_n(b)?;
    let z = a.z.iter().zip(&b.z).map(|(p, q)| p + q).collect();
    let u = a.u + b.u + 2.0 * im_z_conj(&a.z, &b.z);
    Ok(GroupPoint { z, u })
}

/// Group inverse `(-z, -u)`; exact (component negation).
pub fn inverse(a: &GroupPoint) -> GroupPoint {
    GroupPoint {
        z: a.z.iter().map(|c| -c).collect(),
        u: -a.u,
    }
}

/// Homogeneous norm `(|z|^4 + u^2)^{1/4}`.
pub fn homogeneous_norm(a: &GroupPoint) -> f64 {
    hom_norm_parts(a.z_norm_sq(), a.u)
}

/// Homogeneous norm from `|z|^2` and `u` directly.
#[inline]
pub fn hom_norm_parts(z_sq: f64, u: f64) -> f64 {
    // hypot keeps |z|^4 + u^2 from overflowing prematurely.
    f64::hypot(z_sq, u).sqrt()
}

/// Canonical left-invariant distance `|a^{-1} b|`.
///
/// This is the convention every increment in the sampler and the cylinder
/// measure uses; see [`distance_right`] for the `|a b^{-1}|` variant.
pub fn distance(a: &GroupPoint, b: &GroupPoint) -> Result<f64> {
    Ok(homogeneous_norm(&multiply(&inverse(a), b)?))
}

/// Right-invariant variant `|a b^{-1}|`.
pub fn distance_right(a: &GroupPoint, b: &GroupPoint) -> Result<f64> {
    Ok(homogeneous_norm(&multiply(a, &inverse(b))?))
}

/// Parabolic dilation `delta_r(z, u) = (r z, r^2 u)`, a group automorphism.
pub fn dilate(r: f64, a: &GroupPoint) -> Result<GroupPoint> {
    if !(r > 0.0) {
        return Err(Error::invalid("r", r, "dilation factor must be positive"));
    }
    Ok(GroupPoint {
        z: a.z.iter().map(|c| r * c).collect(),
        u: r * r * a.u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_point<R: Rng>(r: &mut R, n: usize, scale: f64) -> GroupPoint {
        let z = (0..2 * n).map(|_| r.random_range(-scale..scale)).collect();
        GroupPoint::new(z, r.random_range(-scale..scale)).unwrap()
    }

    #[test]
    fn product_of_axis_points() {
        let a = GroupPoint::h1(1.0, 0.0, 0.0);
        let b = GroupPoint::h1(0.0, 1.0, 0.0);
        let ab = multiply(&a, &b).unwrap();
        assert_eq!(ab.z(), &[1.0, 1.0]);
        assert_eq!(ab.u(), -2.0);
        // Non-commutativity witness: the opposite order flips the sign of u.
        let ba = multiply(&b, &a).unwrap();
        assert_eq!(ba.u(), 2.0);
        assert_ne!(ab, ba);
    }

    #[test]
    fn identity_is_neutral() {
        let mut r = rng(1);
        for _ in 0..32 {
            let a = random_point(&mut r, 2, 3.0);
            let e = GroupPoint::identity(2);
            assert_eq!(multiply(&a, &e).unwrap(), a);
            assert_eq!(multiply(&e, &a).unwrap(), a);
        }
    }

    #[test]
    fn inverse_cancels_exactly() {
        // The Im term cancels by antisymmetry, so a * a^{-1} is the identity
        // without rounding.
        let mut r = rng(2);
        for _ in 0..64 {
            let a = random_point(&mut r, 1, 50.0);
            let prod = multiply(&a, &inverse(&a)).unwrap();
            assert!(prod.is_identity(), "got {prod:?}");
            let prod = multiply(&inverse(&a), &a).unwrap();
            assert!(prod.is_identity(), "got {prod:?}");
        }
    }

    #[test]
    fn inverse_examples() {
        let a = GroupPoint::h1(1.0, 2.0, 3.0);
        assert_eq!(inverse(&a), GroupPoint::h1(-1.0, -2.0, -3.0));
        let e = GroupPoint::identity(1);
        assert_eq!(inverse(&e), e);
        assert_eq!(inverse(&inverse(&a)), a);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(homogeneous_norm(&GroupPoint::h1(1.0, 0.0, 0.0)), 1.0);
        // (|z|^4 + u^2)^{1/4} at z = 0 is |u|^{1/2}.
        assert_eq!(homogeneous_norm(&GroupPoint::h1(0.0, 0.0, 4.0)), 2.0);
        assert_eq!(homogeneous_norm(&GroupPoint::h1(0.0, 0.0, 16.0)), 4.0);
        let v = homogeneous_norm(&GroupPoint::h1(1.0, 0.0, 1.0));
        assert!((v - 2f64.powf(0.25)).abs() < 1e-15);
        assert_eq!(homogeneous_norm(&GroupPoint::identity(3)), 0.0);
    }

    #[test]
    fn distance_examples() {
        let mut r = rng(3);
        let a = random_point(&mut r, 1, 2.0);
        assert_eq!(distance(&a, &a).unwrap(), 0.0);
        let e = GroupPoint::identity(1);
        assert_eq!(distance(&e, &a).unwrap(), homogeneous_norm(&a));
        // The two conventions differ on non-commuting pairs.
        let p = GroupPoint::h1(1.0, 0.0, 0.0);
        let q = GroupPoint::h1(0.0, 1.0, 0.0);
        let left = distance(&p, &q).unwrap();
        let right = distance_right(&p, &q).unwrap();
        assert!((left - (4.0f64 + 4.0).powf(0.25)).abs() < 1e-15);
        assert_eq!(left, right); // |(-p)q| = |pq^{-1}| here by symmetry of the example
        let q2 = GroupPoint::h1(0.5, 1.0, 0.25);
        assert_ne!(distance(&p, &q2).unwrap(), distance_right(&p, &q2).unwrap());
    }

    #[test]
    fn triangle_inequality_on_random_triples() {
        let mut r = rng(4);
        for _ in 0..100_000 {
            let a = random_point(&mut r, 1, 4.0);
            let b = random_point(&mut r, 1, 4.0);
            let c = random_point(&mut r, 1, 4.0);
            let ac = distance(&a, &c).unwrap();
            let ab = distance(&a, &b).unwrap();
            let bc = distance(&b, &c).unwrap();
            // Tiny slack for rounding in the two shorter legs.
            assert!(
                ac <= ab + bc + 1e-12 * (1.0 + ab + bc),
                "triangle violated: {ac} > {ab} + {bc}"
            );
        }
    }

    #[test]
    fn left_invariance_is_exact_in_law() {
        // |(ga)^{-1}(gb)| = |a^{-1}b|: algebraically exact; floating point
        // introduces rounding through the Im terms, so compare tightly but
        // not bitwise.
        let mut r = rng(5);
        for _ in 0..10_000 {
            let g = random_point(&mut r, 1, 3.0);
            let a = random_point(&mut r, 1, 3.0);
            let b = random_point(&mut r, 1, 3.0);
            let d0 = distance(&a, &b).unwrap();
            let d1 = distance(&multiply(&g, &a).unwrap(), &multiply(&g, &b).unwrap()).unwrap();
            assert!((d0 - d1).abs() <= 1e-12 * (1.0 + d0), "{d0} vs {d1}");
        }
    }

    #[test]
    fn dilate_examples() {
        let a = GroupPoint::h1(1.0, 0.0, 3.0);
        assert_eq!(dilate(2.0, &a).unwrap(), GroupPoint::h1(2.0, 0.0, 12.0));
        assert_eq!(dilate(1.0, &a).unwrap(), a);
        assert!(dilate(0.0, &a).is_err());
        assert!(dilate(-1.0, &a).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = GroupPoint::identity(1);
        let b = GroupPoint::identity(2);
        assert!(matches!(
            multiply(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(distance(&a, &b).is_err());
    }

    #[test]
    fn constructor_rejects_bad_coordinates() {
        assert!(GroupPoint::new(vec![], 0.0).is_err());
        assert!(GroupPoint::new(vec![1.0], 0.0).is_err());
        assert!(GroupPoint::new(vec![1.0, f64::NAN], 0.0).is_err());
        assert!(GroupPoint::new(vec![1.0, 2.0], f64::INFINITY).is_err());
    }

    #[test]
    fn associativity_within_rounding() {
        // Associativity is exact in exact arithmetic; in f64 the u component
        // accumulates a few roundings through the Im terms. Compare against
        // a forward-error bound of 4 ulps of the accumulated magnitude.
        let mut r = rng(6);
        for _ in 0..100_000 {
            let a = random_point(&mut r, 1, 3.0);
            let b = random_point(&mut r, 1, 3.0);
            let c = random_point(&mut r, 1, 3.0);
            let lhs = multiply(&multiply(&a, &b).unwrap(), &c).unwrap();
            let rhs = multiply(&a, &multiply(&b, &c).unwrap()).unwrap();
            for (p, q) in lhs.z().iter().zip(rhs.z()) {
                // (a+b)+c vs a+(b+c): one rounding step apart.
                assert!((p - q).abs() <= 2.0 * f64::EPSILON * (1.0 + q.abs()));
            }
            let mag = a.u.abs()
                + b.u.abs()
                + c.u.abs()
                + 2.0 * (im_z_conj(a.z(), b.z()).abs() + im_z_conj(b.z(), c.z()).abs())
                + 2.0 * (im_z_conj(a.z(), c.z()).abs() + 4.0 * 9.0);
            let tol = 4.0 * f64::EPSILON * mag;
            assert!(
                (lhs.u() - rhs.u()).abs() <= tol,
                "u mismatch: {} vs {} (tol {tol:.3e})",
                lhs.u(),
                rhs.u()
            );
        }
    }

    proptest! {
        #[test]
        fn norm_symmetric(x in -5.0..5.0f64, y in -5.0..5.0f64, u in -25.0..25.0f64) {
            let a = GroupPoint::h1(x, y, u);
            prop_assert_eq!(homogeneous_norm(&a), homogeneous_norm(&inverse(&a)));
        }

        #[test]
        fn norm_homogeneous_under_dilation(
            x in -5.0..5.0f64, y in -5.0..5.0f64, u in -25.0..25.0f64, r in 0.1..10.0f64
        ) {
            let a = GroupPoint::h1(x, y, u);
            let lhs = homogeneous_norm(&dilate(r, &a).unwrap());
            let rhs = r * homogeneous_norm(&a);
            prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + rhs));
        }

        #[test]
        fn norm_subadditive(
            x1 in -5.0..5.0f64, y1 in -5.0..5.0f64, u1 in -25.0..25.0f64,
            x2 in -5.0..5.0f64, y2 in -5.0..5.0f64, u2 in -25.0..25.0f64
        ) {
            let a = GroupPoint::h1(x1, y1, u1);
            let b = GroupPoint::h1(x2, y2, u2);
            let prod = multiply(&a, &b).unwrap();
            let bound = homogeneous_norm(&a) + homogeneous_norm(&b);
            prop_assert!(homogeneous_norm(&prod) <= bound + 1e-12 * (1.0 + bound));
        }

        #[test]
        fn dilation_is_automorphism(
            x1 in -3.0..3.0f64, y1 in -3.0..3.0f64, u1 in -9.0..9.0f64,
            x2 in -3.0..3.0f64, y2 in -3.0..3.0f64, u2 in -9.0..9.0f64,
            r in 0.1..4.0f64
        ) {
            let a = GroupPoint::h1(x1, y1, u1);
            let b = GroupPoint::h1(x2, y2, u2);
            let lhs = dilate(r, &multiply(&a, &b).unwrap()).unwrap();
            let rhs = multiply(&dilate(r, &a).unwrap(), &dilate(r, &b).unwrap()).unwrap();
            for (p, q) in lhs.z().iter().zip(rhs.z()) {
                prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
            }
            prop_assert!((lhs.u() - rhs.u()).abs() <= 1e-11 * (1.0 + rhs.u().abs()));
        }
    }
}
