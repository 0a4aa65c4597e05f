//! Dense layer kernels. Parameters: `W` (`out x in`, row-major) then `b`.

use super::layer::LayerSpec;

pub(crate) fn forward(spec: &LayerSpec, params: &[f64], x: &[f64], y: &mut [f64]) {
    let (n_in, n_out) = (spec.in_dim, spec.out_dim);
    let act = spec.activation.expect("dense activation");
    let (w, b) = params.split_at(n_in * n_out);
    for o in 0..n_out {
        let row = &w[o * n_in..(o + 1) * n_in];
        let z = b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        y[o] = act.apply(z);
    }
}

/// Accumulates parameter gradients into `grad` and, when requested, writes
/// the input gradient into `dx`. `y` is the layer's forward output.
pub(crate) fn backward(
    spec: &LayerSpec,
    params: &[f64],
    x: &[f64],
    y: &[f64],
    dy: &[f64],
    grad: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let (n_in, n_out) = (spec.in_dim, spec.out_dim);
    let act = spec.activation.expect("dense activation");
    let (gw, gb) = grad.split_at_mut(n_in * n_out);
    let w = &params[..n_in * n_out];
    let mut dx = dx;
    if let Some(dx) = dx.as_deref_mut() {
        dx.iter_mut().for_each(|v| *v = 0.0);
    }
    for o in 0..n_out {
        let dz = dy[o] * act.derivative_from_output(y[o]);
        if dz == 0.0 {
            continue;
        }
        gb[o] += dz;
        let grow = &mut gw[o * n_in..(o + 1) * n_in];
        for (g, xi) in grow.iter_mut().zip(x) {
            *g += dz * xi;
        }
        if let Some(dx) = dx.as_deref_mut() {
            for (d, wi) in dx.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                *d += dz * wi;
            }
        }
    }
}
