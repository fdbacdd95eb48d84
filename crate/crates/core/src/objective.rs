//! The quartic loss `f(x) = ¼‖G(x)G(x)ᵀ − M‖²_F` in expanded, matrix-free form.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::generator::GenerativeNetwork;
use crate::linalg::{frobenius_sq, norm};
use crate::spiked::TargetOperator;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub value: f64,
    /// Whether `‖M‖²_F/4` is included.
    pub include_constant: bool,
}

fn check_shapes<T: TargetOperator + ?Sized>(
    net: &GenerativeNetwork,
    target: &T,
    x: ArrayView1<f64>,
) -> Result<()> {
    check_len("latent point", net.latent_dim(), x.len())?;
    check_len("target dimension", net.output_dim(), target.dim())
}

fn quartic(g: &Array1<f64>, mg: &Array1<f64>) -> f64 {
    let gg = g.dot(g);
    0.25 * (gg * gg - 2.0 * g.dot(mg))
}

/// `¼(‖g‖⁴ − 2gᵀMg [+ ‖M‖²_F])` with `g = G(x)`.
pub fn loss<T: TargetOperator + ?Sized>(
    net: &GenerativeNetwork,
    target: &T,
    x: ArrayView1<f64>,
    include_constant: bool,
) -> Result<LossValue> {
    check_shapes(net, target, x)?;
    let g = net.forward(x)?;
    let mut value = quartic(&g, &target.apply(g.view()));
    if include_constant {
        value += 0.25 * target.frobenius_sq();
    }
    Ok(LossValue {
        value,
        include_constant,
    })
}

/// `Λ_xᵀ(‖g‖²g − Mg)`, the gradient wherever `f` is differentiable and the
/// mask-selected element of the Clarke subdifferential elsewhere.
pub fn gradient<T: TargetOperator + ?Sized>(
    net: &GenerativeNetwork,
    target: &T,
    x: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    Ok(loss_and_gradient(net, target, x)?.1)
}

/// Loss without the constant and the gradient, sharing one forward pass and one `M` product.
pub fn loss_and_gradient<T: TargetOperator + ?Sized>(
    net: &GenerativeNetwork,
    target: &T,
    x: ArrayView1<f64>,
) -> Result<(LossValue, Array1<f64>)> {
    check_shapes(net, target, x)?;
    let (g, pattern) = net.forward_with_pattern(x)?;
    let mg = target.apply(g.view());
    let value = quartic(&g, &mg);
    let mut r = &g * g.dot(&g);
    r -= &mg;
    let grad = net.lambda_rmatvec(&pattern, r.view())?;
    Ok((
        LossValue {
            value,
            include_constant: false,
        },
        grad,
    ))
}

/// Default central-difference step at `x`.
pub fn default_fd_step(x: ArrayView1<f64>) -> f64 {
    1e-6 * (1.0 + norm(x))
}

/// Checks that every pre-activation at `x` clears `10·h·‖row‖·Π_{l<i}‖W_l‖_F`,
/// a bound on how far a step of length `h` can move it.
pub fn smoothness_guard(net: &GenerativeNetwork, x: ArrayView1<f64>, h: f64) -> Result<()> {
    let pre = net.pre_activations(x)?;
    let mut lipschitz = 1.0;
    for (layer, (w, z)) in net.weights().iter().zip(&pre).enumerate() {
        for (unit, (row, &value)) in w.rows().into_iter().zip(z).enumerate() {
            let margin = 10.0 * h * norm(row) * lipschitz;
            if value.abs() < margin {
                return Err(Error::SmoothnessGuardViolated {
                    layer: layer + 1,
                    unit,
                    value,
                    margin,
                });
            }
        }
        lipschitz *= frobenius_sq(w.view()).sqrt();
    }
    Ok(())
}

/// Central-difference gradient of the loss (constant excluded).
pub fn fd_gradient<T: TargetOperator + ?Sized>(
    net: &GenerativeNetwork,
    target: &T,
    x: ArrayView1<f64>,
    h: f64,
) -> Result<Array1<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    check_shapes(net, target, x)?;
    smoothness_guard(net, x, h)?;
    let mut probe = x.to_owned();
    let mut out = Array1::zeros(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = loss(net, target, probe.view(), false)?.value;
        probe[i] = x[i] - h;
        let minus = loss(net, target, probe.view(), false)?.value;
        probe[i] = x[i];
        out[i] = (plus - minus) / (2.0 * h);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{sample_gaussian_network, VarianceMode};
    use crate::spiked::{sample_wigner, RankOneTarget};
    use ndarray::{array, Array2};

    fn identity_net() -> GenerativeNetwork {
        // d = 1, W = [I; -I] so G(x) = (relu(x), relu(-x)) and positive x is a smooth region.
        let mut w = Array2::zeros((4, 2));
        w[[0, 0]] = 1.0;
        w[[1, 1]] = 1.0;
        w[[2, 0]] = -1.0;
        w[[3, 1]] = -1.0;
        GenerativeNetwork::from_weights(vec![w], VarianceMode::Theory).unwrap()
    }

    #[test]
    fn exact_fit_and_origin() {
        let net = sample_gaussian_network(&[3, 20, 60], VarianceMode::Experiment, 1).unwrap();
        let x = array![0.4, -1.0, 0.7];
        let y = net.forward(x.view()).unwrap();
        let target = sample_wigner(y.view(), 0.0, 0).unwrap();
        let y4 = y.dot(&y).powi(2);
        assert!(loss(&net, &target, x.view(), true).unwrap().value.abs() <= 1e-10 * y4);
        let g = gradient(&net, &target, x.view()).unwrap();
        assert!(norm(g.view()) <= 1e-10 * norm(x.view()).powi(3));

        let zero = Array1::zeros(3);
        assert_eq!(
            gradient(&net, &target, zero.view()).unwrap(),
            Array1::<f64>::zeros(3)
        );
        let at0 = loss(&net, &target, zero.view(), true).unwrap().value;
        assert!((at0 - 0.25 * target.frobenius_sq()).abs() < 1e-12 * target.frobenius_sq());
    }

    #[test]
    fn constant_offset_is_exact() {
        let net = sample_gaussian_network(&[3, 20, 60], VarianceMode::Theory, 2).unwrap();
        let y = net.forward(array![1.0, 0.5, -0.2].view()).unwrap();
        let target = sample_wigner(y.view(), 0.5, 1).unwrap();
        let x = array![-0.3, 0.8, 1.1];
        let with = loss(&net, &target, x.view(), true).unwrap();
        let without = loss(&net, &target, x.view(), false).unwrap();
        assert!(with.include_constant && !without.include_constant);
        let c = 0.25 * target.frobenius_sq();
        assert!(((with.value - without.value) - c).abs() <= 1e-10 * c);
    }

    #[test]
    fn quadratic_stub_central_difference_is_second_order() {
        let net = identity_net();
        let target = RankOneTarget::new(array![1.0, 2.0, 0.0, 0.0]);
        let x = array![0.7, 0.4];
        let analytic = gradient(&net, &target, x.view()).unwrap();
        let e1 = norm((&fd_gradient(&net, &target, x.view(), 1e-2).unwrap() - &analytic).view());
        let e2 = norm((&fd_gradient(&net, &target, x.view(), 5e-3).unwrap() - &analytic).view());
        assert!(e1 > 0.0 && e2 < e1 / 3.0, "{e1} {e2}");
    }

    #[test]
    fn guard_rejects_zero_preactivation() {
        let net = identity_net();
        let target = RankOneTarget::new(array![1.0, 2.0, 0.0, 0.0]);
        let x = array![0.7, 0.0];
        assert!(matches!(
            fd_gradient(&net, &target, x.view(), 1e-6),
            Err(Error::SmoothnessGuardViolated {
                layer: 1,
                unit: 1,
                ..
            })
        ));
        assert!(fd_gradient(&net, &target, x.view(), 0.0).is_err());
    }

    #[test]
    fn dimension_checks() {
        let net = identity_net();
        let short = RankOneTarget::new(array![1.0, 2.0]);
        assert!(loss(&net, &short, array![1.0, 1.0].view(), false).is_err());
        let target = RankOneTarget::new(array![1.0, 2.0, 0.0, 0.0]);
        assert!(gradient(&net, &target, array![1.0].view()).is_err());
    }
}
