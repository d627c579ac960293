//! Softmax and its sparse alpha-entmax generalization, plus the
//! Jacobian-transpose products used by backpropagation.
//!
//! `entmax(z, alpha)` maps scores onto the probability simplex. `alpha = 1`
//! is softmax (dense support), `alpha = 2` is sparsemax (exact sort-based
//! projection), and other `alpha > 1` values are solved by bisection on the
//! threshold `tau` of
//!
//! ```text
//! sum_j max((alpha-1) * z_j - tau, 0)^(1/(alpha-1)) = 1
//! ```
//!
//! with the bracket `tau in [max_j((alpha-1) z_j) - 1, max_j((alpha-1) z_j)]`.
//! Larger `alpha` zeroes more coordinates, which is what lets attention gates
//! deactivate fields outright.
//!
//! Two representation choices make the analytic invariants hold exactly in
//! floating point, not just approximately:
//! - every path first subtracts `max(z)`, so shifted inputs that are exactly
//!   representable produce bit-identical outputs (translation invariance);
//! - all reductions run over the values sorted in descending order and the
//!   results are scattered back, so permuting the input permutes the output
//!   bit-for-bit (permutation equivariance).

use crate::error::{Error, Result};

const BISECT_MAX_ITERS: usize = 64;
const BISECT_SUM_TOL: f64 = 1e-12;

/// A point of the probability simplex: nonnegative entries summing to one
/// with nonempty support.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    /// Validate the simplex invariants on an arbitrary vector.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Argument("simplex vector cannot be empty".into()));
        }
        if p.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::Numeric("simplex entries must be >= 0".into()));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Numeric(format!("simplex sum {sum} != 1")));
        }
        if p.iter().all(|&x| x == 0.0) {
            return Err(Error::Numeric("simplex support is empty".into()));
        }
        Ok(SimplexVector(p))
    }

    fn new_unchecked(p: Vec<f64>) -> Self {
        SimplexVector(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&x| x > 0.0).count()
    }
}

/// Indices of `z` in descending value order. Ties keep equal values adjacent;
/// which tied index comes first is irrelevant because equal inputs map to
/// equal outputs.
fn descending_order(z: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..z.len()).collect();
    idx.sort_by(|&a, &b| z[b].partial_cmp(&z[a]).expect("finite scores"));
    idx
}

fn validate_scores(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::Argument("empty score vector".into()));
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("scores must be finite".into()));
    }
    Ok(())
}

/// Dense softmax with max-subtraction.
pub fn softmax(z: &[f64]) -> Result<SimplexVector> {
    validate_scores(z)?;
    let order = descending_order(z);
    let zmax = z[order[0]];
    let mut exps = vec![0.0; z.len()];
    let mut denom = 0.0;
    for &i in &order {
        let e = (z[i] - zmax).exp();
        exps[i] = e;
        denom += e;
    }
    let mut p = exps;
    for x in &mut p {
        *x /= denom;
    }
    Ok(SimplexVector::new_unchecked(p))
}

/// The entmax map for `alpha >= 1`.
pub fn entmax(z: &[f64], alpha: f64) -> Result<SimplexVector> {
    Ok(entmax_with_margin(z, alpha)?.0)
}

/// Entmax plus the distance (in score units) from any coordinate to the
/// support threshold. A small margin means a tiny perturbation of `z` can
/// change the support, i.e. the map is near a kink; gradient checks use
/// this to keep away from non-differentiable points. Softmax has no kinks,
/// so `alpha = 1` reports an infinite margin.
pub fn entmax_with_margin(z: &[f64], alpha: f64) -> Result<(SimplexVector, f64)> {
    if !(alpha >= 1.0) {
        return Err(Error::Argument(format!(
            "entmax requires alpha >= 1, got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return Ok((softmax(z)?, f64::INFINITY));
    }
    validate_scores(z)?;
    if alpha == 2.0 {
        sparsemax_impl(z)
    } else {
        bisect_impl(z, alpha)
    }
}

/// Exact sparsemax (`alpha = 2`) via the sort-based simplex projection.
pub fn sparsemax_sorted(z: &[f64]) -> Result<SimplexVector> {
    validate_scores(z)?;
    Ok(sparsemax_impl(z)?.0)
}

fn sparsemax_impl(z: &[f64]) -> Result<(SimplexVector, f64)> {
    let order = descending_order(z);
    let zmax = z[order[0]];
    // Shifted values in descending order.
    let zs: Vec<f64> = order.iter().map(|&i| z[i] - zmax).collect();
    let mut cumsum = 0.0;
    let mut k = 0;
    let mut tau = 0.0;
    for (j, &v) in zs.iter().enumerate() {
        cumsum += v;
        let kk = (j + 1) as f64;
        if 1.0 + kk * v > cumsum {
            k = j + 1;
            tau = (cumsum - 1.0) / kk;
        }
    }
    debug_assert!(k >= 1);
    let mut p = vec![0.0; z.len()];
    let mut sum = 0.0;
    let mut margin = f64::INFINITY;
    for (j, &i) in order.iter().enumerate() {
        let t = zs[j] - tau;
        margin = margin.min(t.abs());
        let v = t.max(0.0);
        p[i] = v;
        sum += v;
    }
    for x in &mut p {
        *x /= sum;
    }
    Ok((SimplexVector::new_unchecked(p), margin))
}

/// Bisection path, valid for any `alpha > 1`. Exposed so the sparsemax
/// sort-based route can be cross-checked against it.
pub fn entmax_bisect(z: &[f64], alpha: f64) -> Result<SimplexVector> {
    if !(alpha > 1.0) {
        return Err(Error::Argument(format!(
            "entmax_bisect requires alpha > 1, got {alpha}"
        )));
    }
    validate_scores(z)?;
    Ok(bisect_impl(z, alpha)?.0)
}

fn bisect_impl(z: &[f64], alpha: f64) -> Result<(SimplexVector, f64)> {
    let order = descending_order(z);
    let zmax = z[order[0]];
    let exponent = 1.0 / (alpha - 1.0);
    // Transformed scores, descending, with max at exactly 0.
    let zp: Vec<f64> = order.iter().map(|&i| (alpha - 1.0) * (z[i] - zmax)).collect();

    let sum_at = |tau: f64| -> f64 {
        let mut s = 0.0;
        for &v in &zp {
            let t = v - tau;
            if t <= 0.0 {
                break; // descending order: everything after is also clipped
            }
            s += t.powf(exponent);
        }
        s
    };

    let (mut lo, mut hi) = (-1.0, 0.0);
    let mut tau = -0.5;
    for _ in 0..BISECT_MAX_ITERS {
        tau = 0.5 * (lo + hi);
        let s = sum_at(tau);
        if (s - 1.0).abs() < BISECT_SUM_TOL {
            break;
        }
        if s > 1.0 {
            lo = tau;
        } else {
            hi = tau;
        }
    }
    let final_sum = sum_at(tau);
    if !final_sum.is_finite() || (final_sum - 1.0).abs() > 1e-6 {
        return Err(Error::Numeric(format!(
            "entmax bisection did not converge (alpha={alpha}, residual sum={final_sum})"
        )));
    }

    let mut p = vec![0.0; z.len()];
    let mut sum = 0.0;
    let mut margin = f64::INFINITY;
    for (j, &i) in order.iter().enumerate() {
        let t = zp[j] - tau;
        margin = margin.min(t.abs() / (alpha - 1.0));
        let v = if t > 0.0 { t.powf(exponent) } else { 0.0 };
        p[i] = v;
        sum += v;
    }
    for x in &mut p {
        *x /= sum;
    }
    Ok((SimplexVector::new_unchecked(p), margin))
}

/// Jacobian-transpose product of the entmax map at output `p`:
/// `J^T d` with `J = diag(s) - s s^T / sum(s)` where `s_i = p_i^(2-alpha)`
/// on the support and 0 elsewhere. For `alpha = 1` this is the softmax
/// Jacobian. At support-change points this is the Jacobian of the current
/// support (the standard subgradient choice).
pub fn entmax_jvp(p: &[f64], alpha: f64, dout: &[f64]) -> Result<Vec<f64>> {
    if p.len() != dout.len() {
        return Err(Error::Shape(format!(
            "entmax_jvp: p has {} entries, dout has {}",
            p.len(),
            dout.len()
        )));
    }
    let mut s = vec![0.0; p.len()];
    let mut s_sum = 0.0;
    let mut sd_sum = 0.0;
    for i in 0..p.len() {
        if p[i] > 0.0 {
            let w = p[i].powf(2.0 - alpha);
            s[i] = w;
            s_sum += w;
            sd_sum += w * dout[i];
        }
    }
    let kappa = sd_sum / s_sum;
    let out = s
        .iter()
        .zip(dout.iter())
        .map(|(&w, &d)| if w > 0.0 { w * (d - kappa) } else { 0.0 })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Prng;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn softmax_symmetry() {
        let p = softmax(&[0.0, 0.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_matches_naive_oracle() {
        let z = [1.0f64, 2.0, 3.0];
        let exps: Vec<f64> = z.iter().map(|x| x.exp()).collect();
        let denom: f64 = exps.iter().sum();
        let naive: Vec<f64> = exps.iter().map(|e| e / denom).collect();
        let p = softmax(&z).unwrap();
        assert_close(p.as_slice(), &naive, 1e-12);
    }

    #[test]
    fn softmax_translation_invariance_exact() {
        // Dyadic inputs plus integer shifts are exactly representable, so the
        // outputs must be bit-identical.
        let mut rng = Prng::new(31);
        for _ in 0..200 {
            let z: Vec<f64> = (0..5)
                .map(|_| (rng.index(8193) as f64 - 4096.0) / 1024.0)
                .collect();
            let c = rng.index(201) as f64 - 100.0;
            let shifted: Vec<f64> = z.iter().map(|x| x + c).collect();
            assert_eq!(softmax(&z).unwrap(), softmax(&shifted).unwrap());
        }
    }

    #[test]
    fn sparsemax_hand_case() {
        // z = [2, 0]: threshold tau = 1 zeroes the second coordinate.
        let p = entmax(&[2.0, 0.0], 2.0).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn alpha_one_reduces_to_softmax() {
        let mut rng = Prng::new(5);
        for _ in 0..100 {
            let z: Vec<f64> = (0..6).map(|_| rng.uniform(-4.0, 4.0)).collect();
            let a = entmax(&z, 1.0).unwrap();
            let b = softmax(&z).unwrap();
            assert_close(a.as_slice(), b.as_slice(), 1e-9);
        }
    }

    #[test]
    fn symmetric_input_gives_uniform_output() {
        let p = entmax(&[0.0, 0.0, 0.0], 1.5).unwrap();
        assert_close(p.as_slice(), &[1.0 / 3.0; 3], 1e-12);
    }

    #[test]
    fn bisect_agrees_with_sorted_sparsemax() {
        let mut rng = Prng::new(99);
        for _ in 0..500 {
            let d = 2 + rng.index(7);
            let z: Vec<f64> = (0..d).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let a = sparsemax_sorted(&z).unwrap();
            let b = entmax_bisect(&z, 2.0).unwrap();
            assert_close(a.as_slice(), b.as_slice(), 1e-8);
        }
    }

    #[test]
    fn permutation_equivariance_exact() {
        let mut rng = Prng::new(17);
        for &alpha in &[1.0, 1.3, 1.5, 2.0, 2.5] {
            for _ in 0..100 {
                let d = 2 + rng.index(6);
                let z: Vec<f64> = (0..d).map(|_| rng.uniform(-3.0, 3.0)).collect();
                let mut perm: Vec<usize> = (0..d).collect();
                rng.shuffle(&mut perm);
                let zp: Vec<f64> = perm.iter().map(|&i| z[i]).collect();
                let p = entmax(&z, alpha).unwrap();
                let pp = entmax(&zp, alpha).unwrap();
                for (j, &i) in perm.iter().enumerate() {
                    assert_eq!(pp.as_slice()[j].to_bits(), p.as_slice()[i].to_bits());
                }
            }
        }
    }

    #[test]
    fn outputs_satisfy_simplex_invariants() {
        let mut rng = Prng::new(4242);
        for &alpha in &[1.0, 1.3, 1.5, 1.7, 2.0, 2.5] {
            for _ in 0..200 {
                let d = 1 + rng.index(8);
                let z: Vec<f64> = (0..d).map(|_| rng.uniform(-10.0, 10.0)).collect();
                let p = entmax(&z, alpha).unwrap();
                SimplexVector::new(p.into_vec()).unwrap();
            }
        }
    }

    #[test]
    fn support_shrinks_with_alpha_on_average() {
        let mut rng = Prng::new(2024);
        let alphas = [1.0, 1.3, 1.5, 1.7, 2.0, 2.5];
        let mut means = Vec::new();
        for &alpha in &alphas {
            let mut total = 0usize;
            let mut rng_local = rng.clone();
            for _ in 0..1000 {
                let z: Vec<f64> = (0..8).map(|_| rng_local.uniform(-2.0, 2.0)).collect();
                total += entmax(&z, alpha).unwrap().support_size();
            }
            means.push(total as f64 / 1000.0);
            let _ = rng.next_u64();
        }
        for w in means.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9,
                "mean support must be non-increasing in alpha: {means:?}"
            );
        }
    }

    #[test]
    fn jvp_of_constant_direction_is_zero() {
        let p = entmax(&[1.0, -0.5, 0.2, 0.0], 1.5).unwrap();
        let d = entmax_jvp(p.as_slice(), 1.5, &[3.7; 4]).unwrap();
        for x in d {
            assert!(x.abs() < 1e-12);
        }
    }

    #[test]
    fn jvp_matches_finite_differences_softmax() {
        let mut rng = Prng::new(8);
        for _ in 0..50 {
            let d = 2 + rng.index(5);
            let z: Vec<f64> = (0..d).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let dout: Vec<f64> = (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let p = softmax(&z).unwrap();
            let got = entmax_jvp(p.as_slice(), 1.0, &dout).unwrap();
            // d/dz_j of <dout, softmax(z)> via central differences.
            let h = 1e-6;
            for j in 0..d {
                let mut zp = z.clone();
                zp[j] += h;
                let up: f64 = softmax(&zp)
                    .unwrap()
                    .as_slice()
                    .iter()
                    .zip(&dout)
                    .map(|(a, b)| a * b)
                    .sum();
                zp[j] = z[j] - h;
                let down: f64 = softmax(&zp)
                    .unwrap()
                    .as_slice()
                    .iter()
                    .zip(&dout)
                    .map(|(a, b)| a * b)
                    .sum();
                let fd = (up - down) / (2.0 * h);
                assert!((got[j] - fd).abs() < 1e-6, "coord {j}: {} vs {fd}", got[j]);
            }
        }
    }

    #[test]
    fn jvp_matches_finite_differences_sparse_alpha_with_stable_support() {
        let alpha = 1.7;
        let h = 1e-6;
        let mut rng = Prng::new(64);
        let mut tested = 0;
        'outer: for _ in 0..200 {
            let d = 3 + rng.index(4);
            let z: Vec<f64> = (0..d).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let p = entmax(&z, alpha).unwrap();
            let base_support: Vec<bool> = p.as_slice().iter().map(|&x| x > 0.0).collect();
            // Only test where the support survives +-h in any coordinate.
            for j in 0..d {
                for s in [h, -h] {
                    let mut zp = z.clone();
                    zp[j] += s;
                    let q = entmax(&zp, alpha).unwrap();
                    let sup: Vec<bool> = q.as_slice().iter().map(|&x| x > 0.0).collect();
                    if sup != base_support {
                        continue 'outer;
                    }
                }
            }
            let dout: Vec<f64> = (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let got = entmax_jvp(p.as_slice(), alpha, &dout).unwrap();
            for j in 0..d {
                let mut zp = z.clone();
                zp[j] += h;
                let up: f64 = entmax(&zp, alpha)
                    .unwrap()
                    .as_slice()
                    .iter()
                    .zip(&dout)
                    .map(|(a, b)| a * b)
                    .sum();
                zp[j] = z[j] - h;
                let down: f64 = entmax(&zp, alpha)
                    .unwrap()
                    .as_slice()
                    .iter()
                    .zip(&dout)
                    .map(|(a, b)| a * b)
                    .sum();
                let fd = (up - down) / (2.0 * h);
                assert!((got[j] - fd).abs() < 1e-5, "coord {j}: {} vs {fd}", got[j]);
            }
            tested += 1;
        }
        assert!(tested >= 20, "too few support-stable cases: {tested}");
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(matches!(softmax(&[]), Err(Error::Argument(_))));
        assert!(matches!(entmax(&[1.0], 0.5), Err(Error::Argument(_))));
        assert!(matches!(
            entmax(&[f64::NAN, 1.0], 1.5),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            entmax_jvp(&[0.5, 0.5], 1.0, &[1.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn single_element_is_certain() {
        for &alpha in &[1.0, 1.5, 2.0, 3.0] {
            let p = entmax(&[4.2], alpha).unwrap();
            assert_eq!(p.as_slice(), &[1.0]);
        }
    }
}
