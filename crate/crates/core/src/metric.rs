//! Exact (non-random) metric algebra.
//!
//! [`Metric4`] is a symmetric 4x4 tensor `g_{μν}` with signature
//! `diag(1, 1, 1, -1)` (indices 0..3 carry the coordinates x¹, x², x³, x⁴ = t).
//! Entries can be real ([`Scalar`]), complex (the diagnostic phase metrics) or
//! exact rationals; determinants and superposition only need ring operations.

use std::fmt::Debug;
use std::ops::Neg;

use num_complex::Complex;
use num_traits::{Num, Zero};

use crate::{Error, Result, Scalar};

/// Ring element a metric entry can be built from.
pub trait Entry: Copy + Num + Neg<Output = Self> + Debug {}

impl<E: Copy + Num + Neg<Output = E> + Debug> Entry for E {}

/// Determinant of a general 4x4 matrix by Laplace expansion in 2x2 minors.
pub fn det4<E: Entry>(m: &[[E; 4]; 4]) -> E {
    let (s, c) = minors(m);
    s[0] * c[5] - s[1] * c[4] + s[2] * c[3] + s[3] * c[2] - s[4] * c[1] + s[5] * c[0]
}

/// 2x2 minors of the top two rows (`s`) and bottom two rows (`c`).
fn minors<E: Entry>(m: &[[E; 4]; 4]) -> ([E; 6], [E; 6]) {
    let s = [
        m[0][0] * m[1][1] - m[1][0] * m[0][1],
        m[0][0] * m[1][2] - m[1][0] * m[0][2],
        m[0][0] * m[1][3] - m[1][0] * m[0][3],
        m[0][1] * m[1][2] - m[1][1] * m[0][2],
        m[0][1] * m[1][3] - m[1][1] * m[0][3],
        m[0][2] * m[1][3] - m[1][2] * m[0][3],
    ];
    let c = [
        m[2][0] * m[3][1] - m[3][0] * m[2][1],
        m[2][0] * m[3][2] - m[3][0] * m[2][2],
        m[2][0] * m[3][3] - m[3][0] * m[2][3],
        m[2][1] * m[3][2] - m[3][1] * m[2][2],
        m[2][1] * m[3][3] - m[3][1] * m[2][3],
        m[2][2] * m[3][3] - m[3][2] * m[2][3],
    ];
    (s, c)
}

/// Adjugate and determinant of a 4x4 matrix; `inverse = adj / det`.
pub fn adjugate4<E: Entry>(m: &[[E; 4]; 4]) -> ([[E; 4]; 4], E) {
    let (s, c) = minors(m);
    let det = s[0] * c[5] - s[1] * c[4] + s[2] * c[3] + s[3] * c[2] - s[4] * c[1] + s[5] * c[0];
    let adj = [
        [
            m[1][1] * c[5] - m[1][2] * c[4] + m[1][3] * c[3],
            -m[0][1] * c[5] + m[0][2] * c[4] - m[0][3] * c[3],
            m[3][1] * s[5] - m[3][2] * s[4] + m[3][3] * s[3],
            -m[2][1] * s[5] + m[2][2] * s[4] - m[2][3] * s[3],
        ],
        [
            -m[1][0] * c[5] + m[1][2] * c[2] - m[1][3] * c[1],
            m[0][0] * c[5] - m[0][2] * c[2] + m[0][3] * c[1],
            -m[3][0] * s[5] + m[3][2] * s[2] - m[3][3] * s[1],
            m[2][0] * s[5] - m[2][2] * s[2] + m[2][3] * s[1],
        ],
        [
            m[1][0] * c[4] - m[1][1] * c[2] + m[1][3] * c[0],
            -m[0][0] * c[4] + m[0][1] * c[2] - m[0][3] * c[0],
            m[3][0] * s[4] - m[3][1] * s[2] + m[3][3] * s[0],
            -m[2][0] * s[4] + m[2][1] * s[2] - m[2][3] * s[0],
        ],
        [
            -m[1][0] * c[3] + m[1][1] * c[1] - m[1][2] * c[0],
            m[0][0] * c[3] - m[0][1] * c[1] + m[0][2] * c[0],
            -m[3][0] * s[3] + m[3][1] * s[1] - m[3][2] * s[0],
            m[2][0] * s[3] - m[2][1] * s[1] + m[2][2] * s[0],
        ],
    ];
    (adj, det)
}

/// Plain 4x4 matrix product.
pub fn matmul4<E: Entry>(a: &[[E; 4]; 4], b: &[[E; 4]; 4]) -> [[E; 4]; 4] {
    let mut out = [[E::zero(); 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..4).fold(E::zero(), |acc, k| acc + a[i][k] * b[k][j]);
        }
    }
    out
}

pub fn transpose4<E: Entry>(m: &[[E; 4]; 4]) -> [[E; 4]; 4] {
    let mut out = *m;
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = m[j][i];
        }
    }
    out
}

/// Symmetric 4x4 metric tensor at a venue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metric4<E> {
    entries: [[E; 4]; 4],
}

impl<E: Entry + PartialEq> Metric4<E> {
    /// Builds a metric, rejecting input that is not exactly symmetric.
    pub fn from_rows(entries: [[E; 4]; 4]) -> Result<Self> {
        for i in 0..4 {
            for j in (i + 1)..4 {
                if entries[i][j] != entries[j][i] {
                    return Err(Error::Asymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { entries })
    }
}

impl<E: Entry> Metric4<E> {
    /// Builds a metric from a matrix that is symmetric up to rounding by
    /// averaging it with its transpose.
    pub fn symmetrized(entries: [[E; 4]; 4]) -> Self {
        let two = E::one() + E::one();
        let mut out = entries;
        for i in 0..4 {
            for j in (i + 1)..4 {
                let avg = (entries[i][j] + entries[j][i]) / two;
                out[i][j] = avg;
                out[j][i] = avg;
            }
        }
        Self { entries: out }
    }

    pub fn diag(d: [E; 4]) -> Self {
        let mut entries = [[E::zero(); 4]; 4];
        for (i, v) in d.into_iter().enumerate() {
            entries[i][i] = v;
        }
        Self { entries }
    }

    /// Flat-space metric `diag(1, 1, 1, -1)`.
    pub fn minkowski() -> Self {
        Self::diag([E::one(), E::one(), E::one(), -E::one()])
    }

    pub fn entries(&self) -> &[[E; 4]; 4] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, mu: usize, nu: usize) -> E {
        self.entries[mu][nu]
    }

    pub fn determinant(&self) -> E {
        det4(&self.entries)
    }

    /// Linear superposition `½(g₁ + g₂)` of two physical situations.
    pub fn superpose(&self, other: &Self) -> Self {
        let two = E::one() + E::one();
        let mut entries = self.entries;
        for (row, orow) in entries.iter_mut().zip(&other.entries) {
            for (a, &b) in row.iter_mut().zip(orow) {
                *a = (*a + b) / two;
            }
        }
        Self { entries }
    }

    pub fn scaled(&self, factor: E) -> Self {
        let mut entries = self.entries;
        entries.iter_mut().flatten().for_each(|v| *v = *v * factor);
        Self { entries }
    }

    /// Entrywise mean of a non-empty set of metrics.
    pub fn mean<'a, I>(metrics: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a Self>,
        E: 'a,
    {
        let mut acc = [[E::zero(); 4]; 4];
        let mut count = E::zero();
        let mut any = false;
        for g in metrics {
            any = true;
            count = count + E::one();
            for (row, grow) in acc.iter_mut().zip(&g.entries) {
                for (a, &b) in row.iter_mut().zip(grow) {
                    *a = *a + b;
                }
            }
        }
        any.then(|| {
            acc.iter_mut().flatten().for_each(|v| *v = *v / count);
            Self { entries: acc }
        })
    }
}

impl<T: Scalar> Metric4<T> {
    /// `√(−det g)`, the differential volume element taken as the position
    /// probability density.
    pub fn volume_element(&self) -> Result<T> {
        let det = self.determinant();
        if det > T::zero() {
            return Err(Error::NonLorentzian {
                det: det.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok((-det).sqrt())
    }

    /// Inverse metric `g^{μν}`; fails when `|det g| < 1e-9`.
    pub fn inverse(&self) -> Result<Self> {
        let (adj, det) = adjugate4(&self.entries);
        if det.abs() < T::lit(1e-9) || !det.is_finite() {
            return Err(Error::SingularMetric {
                det: det.to_f64().unwrap_or(f64::NAN),
            });
        }
        let inv = det.recip();
        let mut entries = adj;
        entries.iter_mut().flatten().for_each(|v| *v = *v * inv);
        Ok(Self::symmetrized(entries))
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().flatten().all(|v| v.is_finite())
    }

    pub fn to_complex(&self) -> Metric4<Complex<T>> {
        let mut entries = [[Complex::zero(); 4]; 4];
        for (row, src) in entries.iter_mut().zip(&self.entries) {
            for (c, &r) in row.iter_mut().zip(src) {
                *c = Complex::new(r, T::zero());
            }
        }
        Metric4 { entries }
    }
}

impl<T: Scalar> Metric4<Complex<T>> {
    /// Largest absolute imaginary part over all entries.
    pub fn imaginary_residue(&self) -> T {
        self.entries
            .iter()
            .flatten()
            .fold(T::zero(), |acc, z| acc.max(z.im.abs()))
    }

    /// Drops the imaginary parts once they are below [`Scalar::exact_tol`].
    pub fn to_real(&self) -> Result<Metric4<T>> {
        let residue = self.imaginary_residue();
        if residue > T::exact_tol() {
            return Err(Error::ComplexResidue {
                residue: residue.to_f64().unwrap_or(f64::NAN),
            });
        }
        let mut entries = [[T::zero(); 4]; 4];
        for (row, src) in entries.iter_mut().zip(&self.entries) {
            for (r, z) in row.iter_mut().zip(src) {
                *r = z.re;
            }
        }
        Ok(Metric4::symmetrized(entries))
    }

    /// Volume element of a diagnostic metric. The determinant must be real
    /// and non-positive to within [`Scalar::exact_tol`].
    pub fn diagnostic_volume_element(&self) -> Result<T> {
        let det = self.determinant();
        let tol = T::exact_tol();
        if det.im.abs() > tol {
            return Err(Error::ComplexResidue {
                residue: det.im.abs().to_f64().unwrap_or(f64::NAN),
            });
        }
        if det.re > tol {
            return Err(Error::NonLorentzian {
                det: det.re.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok((-det.re).max(T::zero()).sqrt())
    }
}

/// `diag(1, 1, e^{iα}, −e^{−iα})`: the averaged metric of a particle moving
/// along x³ with phase α. Unit volume element for every α.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseMetric<T> {
    pub alpha: T,
}

impl<T: Scalar> PhaseMetric<T> {
    pub fn new(alpha: T) -> Self {
        Self { alpha }
    }

    pub fn expand(&self) -> Metric4<Complex<T>> {
        let a = Complex::from_polar(T::one(), self.alpha);
        let b = Complex::from_polar(T::one(), -self.alpha);
        Metric4::diag([Complex::new(T::one(), T::zero()), Complex::new(T::one(), T::zero()), a, -b])
    }
}

/// The fixed complex change of coordinates that takes a phase metric into a
/// real metric with a rotoreflection block:
/// identity on (x¹, x²) and `[[−i/√2, 1/√2], [1/√2, −i/√2]]` on (x³, x⁴).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WTransform;

impl WTransform {
    pub fn matrix<T: Scalar>(&self) -> [[Complex<T>; 4]; 4] {
        let zero = Complex::zero();
        let one = Complex::new(T::one(), T::zero());
        let r = T::FRAC_1_SQRT_2();
        let diag = Complex::new(T::zero(), -r);
        let off = Complex::new(r, T::zero());
        [
            [one, zero, zero, zero],
            [zero, one, zero, zero],
            [zero, zero, diag, off],
            [zero, zero, off, diag],
        ]
    }

    /// `det W`; equals −1, so only `(det W)² = 1` is preserved by `WᵗGW`.
    pub fn determinant<T: Scalar>(&self) -> Complex<T> {
        det4(&self.matrix())
    }

    /// Congruence `G' = WᵗGW`.
    pub fn apply<T: Scalar>(&self, g: &Metric4<Complex<T>>) -> Metric4<Complex<T>> {
        let w = self.matrix();
        let wt = transpose4(&w);
        Metric4::symmetrized(matmul4(&matmul4(&wt, g.entries()), &w))
    }
}

/// Probability density of the superposed phase metrics,
/// `√(−det(½(G^{s1}(α) + G^{s2}(β))))`, evaluated through the determinant.
/// Equals `|cos((α − β)/2)|`.
pub fn interference_density<T: Scalar>(alpha: T, beta: T) -> T {
    let g3 = PhaseMetric::new(alpha)
        .expand()
        .superpose(&PhaseMetric::new(beta).expand());
    g3.diagnostic_volume_element()
        .expect("superposed phase metrics have a real non-positive determinant")
}

/// Real form `WᵗG^{s1}(α)W`: identity on the upper-left block and the
/// rotoreflection `[[−cos α, sin α], [sin α, cos α]]` on the lower-right.
pub fn rotoreflect<T: Scalar>(alpha: T) -> Result<Metric4<T>> {
    WTransform.apply(&PhaseMetric::new(alpha).expand()).to_real()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_rational::Rational64;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// Leibniz permutation sum; independent of the minor expansion.
    fn leibniz(m: &[[f64; 4]; 4]) -> f64 {
        let mut total = 0.0;
        let mut perm = [0usize, 1, 2, 3];
        fn permute(k: usize, perm: &mut [usize; 4], m: &[[f64; 4]; 4], total: &mut f64) {
            if k == 4 {
                let mut inversions = 0;
                for i in 0..4 {
                    for j in (i + 1)..4 {
                        if perm[i] > perm[j] {
                            inversions += 1;
                        }
                    }
                }
                let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
                *total += sign * (0..4).map(|i| m[i][perm[i]]).product::<f64>();
                return;
            }
            for i in k..4 {
                perm.swap(k, i);
                permute(k + 1, perm, m, total);
                perm.swap(k, i);
            }
        }
        permute(0, &mut perm, m, &mut total);
        total
    }

    #[test]
    fn minkowski_basics() {
        let eta = Metric4::<f64>::minkowski();
        assert_eq!(eta.determinant(), -1.0);
        assert_eq!(eta.volume_element().unwrap(), 1.0);
        assert_eq!(eta.superpose(&eta), eta);
    }

    #[test]
    fn volume_element_examples() {
        let g = Metric4::diag([1.0, 1.0, 2.0, -0.5]);
        assert_eq!(g.volume_element().unwrap(), 1.0);
        let euclid = Metric4::diag([1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(euclid.volume_element(), Err(Error::NonLorentzian { .. })));
    }

    #[test]
    fn from_rows_rejects_asymmetry() {
        let mut rows = *Metric4::<f64>::minkowski().entries();
        rows[0][2] = 0.5;
        assert_eq!(Metric4::from_rows(rows), Err(Error::Asymmetric { row: 0, col: 2 }));
        rows[2][0] = 0.5;
        assert!(Metric4::from_rows(rows).is_ok());
    }

    #[test]
    fn phase_metric_has_unit_determinant_magnitude() {
        for k in 0..64 {
            let alpha = k as f64 * 0.1;
            let det = PhaseMetric::new(alpha).expand().determinant();
            assert_abs_diff_eq!(det.re, -1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(det.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn superposed_phase_metrics() {
        let (alpha, beta) = (0.3f64, 1.7);
        let g3 = PhaseMetric::new(alpha).expand().superpose(&PhaseMetric::new(beta).expand());
        let expect33 = (Complex::from_polar(1.0, alpha) + Complex::from_polar(1.0, beta)) / 2.0;
        let expect44 = -(Complex::from_polar(1.0, -alpha) + Complex::from_polar(1.0, -beta)) / 2.0;
        assert_abs_diff_eq!((g3.get(2, 2) - expect33).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((g3.get(3, 3) - expect44).norm(), 0.0, epsilon = 1e-15);
        assert_eq!(g3.get(0, 0), Complex::new(1.0, 0.0));
        // closed form −(2 + 2cos(α−β))/4
        let det = g3.determinant();
        assert_abs_diff_eq!(det.re, -(2.0 + 2.0 * (alpha - beta).cos()) / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn destructive_interference_gives_zero_determinant() {
        let g = PhaseMetric::new(PI).expand().superpose(&PhaseMetric::new(0.0).expand());
        assert_abs_diff_eq!(g.determinant().norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn interference_density_examples() {
        assert_abs_diff_eq!(interference_density(0.4, 0.4), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(interference_density(PI, 0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(interference_density(FRAC_PI_2, 0.0), 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn interference_density_in_single_precision() {
        assert!((interference_density(1.0f32, 1.0) - 1.0).abs() < 1e-6);
        assert!((interference_density(std::f32::consts::FRAC_PI_2, 0.0) - 0.5f32.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn w_transform_determinant_is_minus_one() {
        let d = WTransform.determinant::<f64>();
        assert_abs_diff_eq!(d.re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rotoreflect_examples() {
        let g0 = rotoreflect(0.0).unwrap();
        assert_abs_diff_eq!(g0.get(2, 2), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g0.get(2, 3), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g0.get(3, 3), 1.0, epsilon = 1e-15);
        let g = rotoreflect(FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(g.get(2, 2), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.get(2, 3), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.get(3, 2), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.get(3, 3), 0.0, epsilon = 1e-15);
        assert_eq!(g.get(0, 0), 1.0);
        assert_eq!(g.get(1, 1), 1.0);
    }

    #[test]
    fn complex_residue_is_rejected() {
        let g = PhaseMetric::new(0.7).expand();
        assert!(matches!(g.to_real(), Err(Error::ComplexResidue { .. })));
    }

    #[test]
    fn inverse_of_diagonal() {
        let g = Metric4::diag([1.0, 1.0, 2.0, -0.5]);
        let inv = g.inverse().unwrap();
        assert_eq!(inv, Metric4::diag([1.0, 1.0, 0.5, -2.0]));
        let singular = Metric4::diag([1.0, 0.0, 1.0, -1.0]);
        assert!(matches!(singular.inverse(), Err(Error::SingularMetric { .. })));
    }

    #[test]
    fn rational_halving_scales_determinant_by_sixteenth() {
        let r = |n: i64, d: i64| Rational64::new(n, d);
        let a = [
            [r(3, 1), r(1, 2), r(-2, 3), r(0, 1)],
            [r(1, 5), r(-1, 1), r(4, 1), r(2, 7)],
            [r(5, 3), r(0, 1), r(1, 1), r(-3, 2)],
            [r(1, 1), r(2, 1), r(-1, 4), r(6, 5)],
        ];
        let half = a.map(|row| row.map(|v| v / r(2, 1)));
        assert_eq!(det4(&half), det4(&a) / r(16, 1));
        let sym = Metric4::<Rational64>::minkowski();
        assert_eq!(sym.scaled(r(1, 2)).determinant(), r(-1, 16));
    }

    fn matrix() -> impl Strategy<Value = [[f64; 4]; 4]> {
        proptest::array::uniform4(proptest::array::uniform4(-3.0f64..3.0))
    }

    proptest! {
        #[test]
        fn det4_matches_leibniz(m in matrix()) {
            let d = det4(&m);
            prop_assert!((d - leibniz(&m)).abs() < 1e-10 * (1.0 + d.abs()));
        }

        #[test]
        fn halving_scales_det_by_sixteenth(m in matrix()) {
            let half = m.map(|row| row.map(|v| v * 0.5));
            let lhs = leibniz(&half);
            prop_assert!((det4(&half) - lhs).abs() < 1e-10);
            prop_assert!((lhs - det4(&m) / 16.0).abs() < 1e-10);
        }

        #[test]
        fn adjugate_inverts(m in matrix()) {
            let (adj, det) = adjugate4(&m);
            prop_assume!(det.abs() > 1e-3);
            let prod = matmul4(&m, &adj);
            for i in 0..4 {
                for j in 0..4 {
                    let expect = if i == j { det } else { 0.0 };
                    prop_assert!((prod[i][j] - expect).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn interference_depends_on_phase_difference(a in 0.0..(2.0 * PI), b in 0.0..(2.0 * PI)) {
            let d = interference_density(a, b);
            prop_assert!((d - ((a - b) / 2.0).cos().abs()).abs() < 1e-12);
            prop_assert!((d - interference_density(b, a)).abs() < 1e-15);
            let shifted = interference_density(a + 2.0 * PI, b);
            prop_assert!((d - shifted).abs() < 1e-12);
        }

        #[test]
        fn rotoreflection_is_real_symmetric_reflection(alpha in -10.0f64..10.0) {
            let g = rotoreflect(alpha).unwrap();
            prop_assert!((g.determinant() + 1.0).abs() < 1e-12);
            let e = g.entries();
            let block_det = e[2][2] * e[3][3] - e[2][3] * e[3][2];
            prop_assert!((block_det + 1.0).abs() < 1e-12);
            prop_assert!((e[2][2] + alpha.cos()).abs() < 1e-12);
            prop_assert!((e[2][3] - alpha.sin()).abs() < 1e-12);
            prop_assert!((e[3][3] - alpha.cos()).abs() < 1e-12);
            for i in 0..4 { for j in 0..4 { prop_assert_eq!(e[i][j], e[j][i]); } }
        }

        #[test]
        fn self_superposition_keeps_volume(d in proptest::array::uniform3(0.5f64..2.0), t in 0.5f64..2.0, off in -0.2f64..0.2) {
            let mut rows = *Metric4::diag([d[0], d[1], d[2], -t]).entries();
            rows[0][1] = off;
            rows[1][0] = off;
            let g = Metric4::from_rows(rows).unwrap();
            prop_assume!(g.determinant() < 0.0);
            prop_assert_eq!(g.superpose(&g).volume_element().unwrap(), g.volume_element().unwrap());
        }
    }
}
