//! Finite-difference checks over every tensor of a [`ParamStore`].

use super::{Graph, ParamStore};
use crate::autodiff::gradcheck::{relative_error, GradReport};
use crate::autodiff::Var;
use crate::error::{Error, Result};

/// Compares tape gradients of the scalar built by `f` with central
/// differences, perturbing every element of every parameter in `store`.
/// Inputs can be checked too by registering them as parameters.
pub fn check_params<F>(store: &ParamStore, step: f64, f: F) -> Result<GradReport>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(s);
        let root = f(&mut g)?;
        g.value(root)
            .item()
            .ok_or_else(|| Error::Contract("gradient check root must be scalar".into()))
    };
    let analytic = {
        let mut g = Graph::new(store);
        let root = f(&mut g)?;
        let mut grads = g.tape.backward(root)?;
        g.param_grads(&mut grads)
    };

    let mut probe = store.clone();
    let mut relative_errors = Vec::with_capacity(store.len());
    for (k, id) in store.ids().enumerate() {
        let n = store.get(id).numel();
        let a = analytic[k]
            .as_ref()
            .map(|t| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; n]);
        let mut numeric = Vec::with_capacity(n);
        for i in 0..n {
            let orig = store.get(id).data()[i];
            probe.get_mut(id).data_mut()[i] = orig + step;
            let plus = eval(&probe)?;
            probe.get_mut(id).data_mut()[i] = orig - step;
            let minus = eval(&probe)?;
            probe.get_mut(id).data_mut()[i] = orig;
            numeric.push((plus - minus) / (2.0 * step));
        }
        relative_errors.push(relative_error(&a, &numeric));
    }
    Ok(GradReport { relative_errors })
}
