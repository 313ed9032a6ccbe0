//! Stationary kernels, the induced kernel metric and Gram assembly.
//!
//! The kernel metric `d_k(a, a') = sqrt(2 (k(a, a) - k(a, a')))` gives the
//! continuity bound `|h(a) - h(a')| <= ||h||_k d_k(a, a')` for every `h` in the
//! RKHS of `k`, which is what the safe-set construction relies on.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative jitter added to Gram diagonals inside factorization routines.
pub const GRAM_JITTER: f64 = 1e-10;

/// Radicands of the kernel metric below `-METRIC_TOLERANCE * output_scale`
/// are reported as an invalid kernel configuration; smaller negatives are
/// roundoff and clamp to zero.
const METRIC_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Matern32,
    SquaredExponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
struct KernelSpec {
    family: KernelFamily,
    lengthscale: f64,
    #[serde(default = "unit")]
    output_scale: f64,
}

fn unit() -> f64 {
    1.0
}

/// A stationary kernel `k(a, a') = s * phi(|a - a'| / l)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec")]
pub struct Kernel {
    family: KernelFamily,
    lengthscale: f64,
    output_scale: f64,
}

impl TryFrom<KernelSpec> for Kernel {
    type Error = Error;

    fn try_from(spec: KernelSpec) -> Result<Self> {
        Kernel::new(spec.family, spec.lengthscale, spec.output_scale)
    }
}

impl Kernel {
    pub fn new(family: KernelFamily, lengthscale: f64, output_scale: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::param(
                "lengthscale",
                format!("must be positive, got {lengthscale}"),
            ));
        }
        if !(output_scale > 0.0 && output_scale.is_finite()) {
            return Err(Error::param(
                "output_scale",
                format!("must be positive, got {output_scale}"),
            ));
        }
        Ok(Self {
            family,
            lengthscale,
            output_scale,
        })
    }

    /// Unit-scale Matérn-3/2 kernel.
    pub fn matern32(lengthscale: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern32, lengthscale, 1.0)
    }

    pub fn squared_exponential(lengthscale: f64) -> Result<Self> {
        Self::new(KernelFamily::SquaredExponential, lengthscale, 1.0)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    /// Kernel value as a function of Euclidean distance.
    pub fn of_distance(&self, r: f64) -> f64 {
        let s = self.output_scale;
        match self.family {
            KernelFamily::Matern32 => {
                let z = 3f64.sqrt() * r / self.lengthscale;
                s * (1.0 + z) * (-z).exp()
            }
            KernelFamily::SquaredExponential => {
                let z = r / self.lengthscale;
                s * (-0.5 * z * z).exp()
            }
        }
    }

    pub fn evaluate(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_dims(a.len(), b.len())?;
        Ok(self.of_distance(euclidean(a, b)))
    }

    /// `d_k(a, b) = sqrt(2 (k(a, a) - k(a, b)))`.
    pub fn kernel_metric(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_dims(a.len(), b.len())?;
        self.metric_of_distance(euclidean(a, b))
    }

    fn metric_of_distance(&self, r: f64) -> Result<f64> {
        let radicand = 2.0 * (self.output_scale - self.of_distance(r));
        if radicand < 0.0 {
            if radicand < -METRIC_TOLERANCE * self.output_scale {
                return Err(Error::NegativeRadicand(radicand));
            }
            return Ok(0.0);
        }
        Ok(radicand.sqrt())
    }

    /// Gram matrix `K[s][u] = k(x_s, x_u)`; no jitter is applied.
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let first = points
            .first()
            .ok_or_else(|| Error::param("points", "gram of an empty point list"))?;
        let dim = first.len();
        for p in points {
            check_dims(dim, p.len())?;
        }
        let n = points.len();
        let mut k = DMatrix::zeros(n, n);
        for s in 0..n {
            k[(s, s)] = self.output_scale;
            for u in 0..s {
                let v = self.of_distance(euclidean(&points[s], &points[u]));
                k[(s, u)] = v;
                k[(u, s)] = v;
            }
        }
        Ok(k)
    }

    /// Cross-covariance `K[s][u] = k(rows_s, cols_u)`.
    pub fn cross(&self, rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let mut k = DMatrix::zeros(rows.len(), cols.len());
        for (s, a) in rows.iter().enumerate() {
            for (u, b) in cols.iter().enumerate() {
                k[(s, u)] = self.evaluate(a, b)?;
            }
        }
        Ok(k)
    }

    /// Absolute jitter for factorizing a bare Gram matrix of this kernel.
    pub fn jitter(&self) -> f64 {
        GRAM_JITTER * self.output_scale
    }
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A finite, index-addressable set of candidate parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    points: Vec<Vec<f64>>,
    bounds: Vec<(f64, f64)>,
}

impl Domain {
    /// Uniform grid with `resolution[d]` points spanning `bounds[d]`
    /// (endpoints included). The last dimension varies fastest.
    pub fn grid(bounds: &[(f64, f64)], resolution: &[usize]) -> Result<Self> {
        check_dims(bounds.len(), resolution.len())?;
        if bounds.is_empty() {
            return Err(Error::param("bounds", "domain needs at least one dimension"));
        }
        for &(lo, hi) in bounds {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::param("bounds", format!("invalid interval [{lo}, {hi}]")));
            }
        }
        if resolution.contains(&0) {
            return Err(Error::param("resolution", "every dimension needs at least one point"));
        }
        let axes: Vec<Vec<f64>> = bounds
            .iter()
            .zip(resolution)
            .map(|(&(lo, hi), &r)| {
                if r == 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    let step = (hi - lo) / (r - 1) as f64;
                    (0..r)
                        .map(|j| if j + 1 == r { hi } else { lo + step * j as f64 })
                        .collect()
                }
            })
            .collect();
        for (axis, &(lo, hi)) in axes.iter().zip(bounds) {
            if axis.len() > 1 && lo == hi {
                return Err(Error::param("resolution", "degenerate axis would repeat points"));
            }
        }
        let total: usize = resolution.iter().product();
        let mut points = Vec::with_capacity(total);
        let mut idx = vec![0usize; axes.len()];
        for _ in 0..total {
            points.push(idx.iter().zip(&axes).map(|(&j, axis)| axis[j]).collect());
            for d in (0..axes.len()).rev() {
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(Self {
            points,
            bounds: bounds.to_vec(),
        })
    }

    pub fn from_points(points: Vec<Vec<f64>>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::param("points", "domain must be non-empty"));
        }
        for p in &points {
            check_dims(bounds.len(), p.len())?;
            for (x, &(lo, hi)) in p.iter().zip(&bounds) {
                if !(x.is_finite() && *x >= lo && *x <= hi) {
                    return Err(Error::param("points", format!("{x} outside [{lo}, {hi}]")));
                }
            }
        }
        for (s, p) in points.iter().enumerate() {
            if points[..s].contains(p) {
                return Err(Error::param("points", format!("duplicate point at index {s}")));
            }
        }
        Ok(Self { points, bounds })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.points[index]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        a.len() == self.dim() && a.iter().zip(&self.bounds).all(|(x, &(lo, hi))| *x >= lo && *x <= hi)
    }

    /// Index of the grid point nearest to `a` (lowest index on ties).
    pub fn nearest(&self, a: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (s, p) in self.points.iter().enumerate() {
            let d = euclidean(p, a);
            if d < best.1 {
                best = (s, d);
            }
        }
        best.0
    }
}

/// Dense table of pairwise kernel metrics over a domain.
#[derive(Clone, Debug)]
pub struct MetricTable {
    n: usize,
    values: Vec<f64>,
}

impl MetricTable {
    pub fn new(kernel: &Kernel, domain: &Domain) -> Result<Self> {
        let n = domain.len();
        let mut values = vec![0.0; n * n];
        for s in 0..n {
            for u in 0..s {
                let d = kernel.kernel_metric(domain.point(s), domain.point(u))?;
                values[s * n + u] = d;
                values[u * n + s] = d;
            }
        }
        Ok(Self { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matern(r: f64, l: f64) -> f64 {
        // closed form written out independently of `of_distance`
        let s3 = 3f64.sqrt();
        (1.0 + s3 * r / l) * (-s3 * r / l).exp()
    }

    #[test]
    fn zero_distance_is_output_scale() {
        let k = Kernel::matern32(0.37).unwrap();
        assert_eq!(k.evaluate(&[0.2, -0.4], &[0.2, -0.4]).unwrap(), 1.0);
        let k = Kernel::new(KernelFamily::Matern32, 0.1, 2.5).unwrap();
        assert_eq!(k.evaluate(&[1.0], &[1.0]).unwrap(), 2.5);
    }

    #[test]
    fn matern_at_one_lengthscale() {
        let k = Kernel::matern32(0.1).unwrap();
        let v = k.evaluate(&[0.0], &[0.1]).unwrap();
        assert_abs_diff_eq!(v, 0.483_357_724_596_507_6, epsilon = 1e-12);
        assert_abs_diff_eq!(v, matern(0.1, 0.1), epsilon = 1e-15);
    }

    #[test]
    fn matern_decays() {
        let k = Kernel::matern32(0.1).unwrap();
        assert!(k.evaluate(&[0.0], &[10.0]).unwrap() < 1e-30);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Kernel::matern32(0.0).is_err());
        assert!(Kernel::matern32(-1.0).is_err());
        let k = Kernel::matern32(0.1).unwrap();
        assert!(matches!(
            k.evaluate(&[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(k.gram(&[]).is_err());
        assert!(k.gram(&[vec![0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn deserialize_validates() {
        let ok: Kernel = serde_json::from_str(r#"{"family":"matern32","lengthscale":0.1}"#).unwrap();
        assert_eq!(ok.output_scale(), 1.0);
        assert!(serde_json::from_str::<Kernel>(r#"{"family":"matern32","lengthscale":-1}"#).is_err());
    }

    #[test]
    fn metric_values() {
        let k = Kernel::matern32(0.1).unwrap();
        assert_eq!(k.kernel_metric(&[0.3], &[0.3]).unwrap(), 0.0);
        let d = k.kernel_metric(&[0.0], &[0.1]).unwrap();
        assert_abs_diff_eq!(d, 1.016_506_050_551_094_7, epsilon = 1e-12);
        assert!(k.kernel_metric(&[0.0], &[50.0]).unwrap() <= 2f64.sqrt());
    }

    #[test]
    fn gram_small_cases() {
        let k = Kernel::matern32(0.1).unwrap();
        assert_eq!(k.gram(&[vec![0.4]]).unwrap(), DMatrix::from_element(1, 1, 1.0));
        let g = k.gram(&[vec![0.4], vec![0.4]]).unwrap();
        assert_eq!(g, DMatrix::from_element(2, 2, 1.0));
        let g = k.gram(&[vec![0.0], vec![0.1]]).unwrap();
        assert_abs_diff_eq!(g[(0, 1)], 0.483_357_724_596_507_6, epsilon = 1e-12);
        assert_eq!(g[(0, 1)], g[(1, 0)]);
    }

    #[test]
    fn gram_is_psd_on_random_fixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for fixture in 0..100 {
            let family = if fixture % 2 == 0 {
                KernelFamily::Matern32
            } else {
                KernelFamily::SquaredExponential
            };
            let k = Kernel::new(family, rng.gen_range(0.05..1.0), 1.0).unwrap();
            let m = rng.gen_range(1..30);
            let dim = rng.gen_range(1..4);
            let pts: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let g = k.gram(&pts).unwrap() + DMatrix::identity(m, m) * k.jitter();
            assert!(g.cholesky().is_some(), "fixture {fixture} not PSD");
        }
    }

    #[test]
    fn grid_layout() {
        let d = Domain::grid(&[(-1.0, 1.0)], &[5]).unwrap();
        assert_eq!(d.points(), &[vec![-1.0], vec![-0.5], vec![0.0], vec![0.5], vec![1.0]]);
        let d = Domain::grid(&[(0.0, 1.0), (0.0, 2.0)], &[2, 3]).unwrap();
        assert_eq!(d.len(), 6);
        assert_eq!(d.point(1), &[0.0, 1.0]);
        assert_eq!(d.point(3), &[1.0, 0.0]);
        assert!(d.points().iter().all(|p| d.contains(p)));
        assert_eq!(Domain::grid(&[(0.0, 1.0)], &[1]).unwrap().point(0), &[0.5]);
    }

    #[test]
    fn domain_rejects_invalid() {
        assert!(Domain::from_points(vec![], vec![(0.0, 1.0)]).is_err());
        assert!(Domain::from_points(vec![vec![2.0]], vec![(0.0, 1.0)]).is_err());
        assert!(Domain::from_points(vec![vec![0.5], vec![0.5]], vec![(0.0, 1.0)]).is_err());
        assert!(Domain::grid(&[(1.0, 0.0)], &[3]).is_err());
        assert!(Domain::grid(&[(0.0, 0.0)], &[3]).is_err());
    }

    proptest! {
        #[test]
        fn metric_symmetric_and_bounded(
            a in prop::collection::vec(-2.0f64..2.0, 2),
            b in prop::collection::vec(-2.0f64..2.0, 2),
            l in 0.05f64..2.0,
        ) {
            let k = Kernel::matern32(l).unwrap();
            let dab = k.kernel_metric(&a, &b).unwrap();
            let dba = k.kernel_metric(&b, &a).unwrap();
            prop_assert_eq!(dab, dba);
            prop_assert_eq!(k.kernel_metric(&a, &a).unwrap(), 0.0);
            prop_assert!(dab >= 0.0 && dab <= 2f64.sqrt() + 1e-15);
            prop_assert_eq!(k.evaluate(&a, &b).unwrap(), k.evaluate(&b, &a).unwrap());
        }

        #[test]
        fn translation_invariant(
            a in prop::collection::vec(-2.0f64..2.0, 3),
            b in prop::collection::vec(-2.0f64..2.0, 3),
            v in prop::collection::vec(-5.0f64..5.0, 3),
            se in any::<bool>(),
        ) {
            let k = if se { Kernel::squared_exponential(0.3) } else { Kernel::matern32(0.3) }.unwrap();
            let shift = |p: &[f64]| p.iter().zip(&v).map(|(x, y)| x + y).collect::<Vec<_>>();
            let lhs = k.evaluate(&a, &b).unwrap();
            let rhs = k.evaluate(&shift(&a), &shift(&b)).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }
}
