use crate::autodiff::{ActivationKind, Var};
use crate::error::{Error, Result};

use super::params::{Graph, Initializer, ParamId, ParamStore};

/// `activation(x W + b)` with `W: [in x out]`, `b: [out]`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub activation: ActivationKind,
    input: usize,
    output: usize,
}

impl Dense {
    pub fn new(
        store: &mut ParamStore,
        init: &mut Initializer,
        group: &str,
        name: &str,
        input: usize,
        output: usize,
        activation: ActivationKind,
    ) -> Self {
        let weight = store.add(group, format!("{name}.weight"), init.uniform(&[input, output], input));
        let bias = store.add(group, format!("{name}.bias"), init.uniform(&[output], input));
        Dense {
            weight,
            bias,
            activation,
            input,
            output,
        }
    }

    pub fn input_width(&self) -> usize {
        self.input
    }

    pub fn output_width(&self) -> usize {
        self.output
    }

    pub fn param_count(&self) -> usize {
        self.input * self.output + self.output
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let width = g.value(x).dims().last().copied().unwrap_or(1);
        if width != self.input {
            return Err(Error::Contract(format!(
                "dense layer expects width {}, got {}",
                self.input,
                g.tape.shape(x)
            )));
        }
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let xw = g.tape.matmul(x, w)?;
        let z = g.tape.add_row(xw, b)?;
        Ok(g.tape.activation(z, self.activation))
    }
}

/// Stack of ReLU hidden layers ending in a single linear output unit.
#[derive(Clone, Debug)]
pub struct Tower {
    layers: Vec<Dense>,
}

impl Tower {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, group: &str, input: usize, hidden: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input;
        for (i, &h) in hidden.iter().enumerate() {
            layers.push(Dense::new(
                store,
                init,
                group,
                &format!("hidden{i}"),
                width,
                h,
                ActivationKind::Relu,
            ));
            width = h;
        }
        layers.push(Dense::new(
            store,
            init,
            group,
            "out",
            width,
            1,
            ActivationKind::Identity,
        ));
        Tower { layers }
    }

    /// Stack of layers with explicit activations, no extra output unit.
    pub fn mlp(
        store: &mut ParamStore,
        init: &mut Initializer,
        group: &str,
        prefix: &str,
        input: usize,
        widths: &[usize],
        activation: ActivationKind,
    ) -> Self {
        let mut layers = Vec::with_capacity(widths.len());
        let mut width = input;
        for (i, &h) in widths.iter().enumerate() {
            layers.push(Dense::new(
                store,
                init,
                group,
                &format!("{prefix}.layer{i}"),
                width,
                h,
                activation,
            ));
            width = h;
        }
        Tower { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, Dense::output_width)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn forward(&self, g: &mut Graph, mut x: Var) -> Result<Var> {
        for layer in &self.layers {
            x = layer.forward(g, x)?;
        }
        Ok(x)
    }
}
