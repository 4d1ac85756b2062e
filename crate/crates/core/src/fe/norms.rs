use super::basis::Tabulation;
use super::quadrature::QuadratureRule;
use super::space::{FeFunction, FeSpace};
use crate::mesh::Point;

/// `(‖u_h − u‖_{L²}, |u_h − u|_{H¹})` by element quadrature.
pub fn error_norms<U, G>(u_h: &FeFunction<'_>, exact: U, exact_grad: G, rule: &QuadratureRule) -> (f64, f64)
where
    U: Fn(Point) -> f64,
    G: Fn(Point) -> [f64; 2],
{
    let space = u_h.space();
    let mesh = space.mesh();
    let h = mesh.element_size();
    let tab = Tabulation::new(space.order(), rule, h);
    let c = u_h.coefficients();
    let (mut l2, mut h1) = (0.0, 0.0);
    for e in 0..mesh.num_elements() {
        let dofs = space.element_dofs(e);
        let o = mesh.element_origin(e);
        for q in 0..tab.num_points() {
            let r = tab.points[q];
            let x = [o[0] + r[0] * h[0], o[1] + r[1] * h[1]];
            let mut v = 0.0;
            let mut g = [0.0, 0.0];
            for (a, &d) in dofs.iter().enumerate() {
                v += c[d] * tab.values[q][a];
                g[0] += c[d] * tab.gradients[q][a][0];
                g[1] += c[d] * tab.gradients[q][a][1];
            }
            let ge = exact_grad(x);
            let w = tab.weights[q];
            l2 += w * (v - exact(x)).powi(2);
            h1 += w * ((g[0] - ge[0]).powi(2) + (g[1] - ge[1]).powi(2));
        }
    }
    (l2.sqrt(), h1.sqrt())
}

/// `(‖u‖_{L²}, |u|_{H¹})` of a continuous function by quadrature on the space's mesh.
pub fn function_norms<U, G>(space: &FeSpace, u: U, grad: G, rule: &QuadratureRule) -> (f64, f64)
where
    U: Fn(Point) -> f64,
    G: Fn(Point) -> [f64; 2],
{
    error_norms(&FeFunction::zeros(space), u, grad, rule)
}
