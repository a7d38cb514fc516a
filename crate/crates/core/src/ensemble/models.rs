use rand::Rng;

use crate::neuro::{
    mean_pool, mean_pool_backward, relu, relu_backward, ChebCache, ChebConv, Dense, Mat,
    ScaledLaplacian, Tensor,
};
use crate::{Error, Real, Result};

/// MLP input width.
pub const MLP_INPUT: usize = 28;
/// MLP hidden widths.
pub const MLP_HIDDEN: [usize; 2] = [64, 32];
/// Graph node feature width: x, y, z, curvature.
pub const NODE_FEATURES: usize = 4;
/// Graph convolution width and shared latent width.
pub const LATENT: usize = 25;
/// Number of graph convolutions.
pub const GNN_LAYERS: usize = 5;
/// Output classes.
pub const CLASSES: usize = 2;

/// Three dense layers, rectifier after the first two.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T> {
    pub fc1: Dense<T>,
    pub fc2: Dense<T>,
    /// Classification head, or latent projection inside the ensemble.
    pub fc3: Dense<T>,
}

#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    x: Mat<T>,
    z1: Mat<T>,
    h1: Mat<T>,
    z2: Mat<T>,
    /// Body output.
    pub h2: Mat<T>,
}

impl<T: Real> MlpCache<T> {
    /// Smallest rectifier input magnitude; finite differences are exact only away from the kink.
    pub fn relu_margin(&self) -> f64 {
        min_abs(self.z1.data.iter().chain(&self.z2.data))
    }
}

fn min_abs<'a, T: Real>(v: impl Iterator<Item = &'a T>) -> f64 {
    v.map(|x| crate::scalar::to_f64(x.abs()))
        .fold(f64::INFINITY, f64::min)
}

impl<T: Real> MlpModel<T> {
    pub fn new(n_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            fc1: Dense::new(MLP_INPUT, MLP_HIDDEN[0], rng),
            fc2: Dense::new(MLP_HIDDEN[0], MLP_HIDDEN[1], rng),
            fc3: Dense::new(MLP_HIDDEN[1], n_out, rng),
        }
    }

    pub fn body(&self, x: &Mat<T>) -> Result<MlpCache<T>> {
        let z1 = self.fc1.forward(x)?;
        let h1 = relu(&z1);
        let z2 = self.fc2.forward(&h1)?;
        let h2 = relu(&z2);
        Ok(MlpCache {
            x: x.clone(),
            z1,
            h1,
            z2,
            h2,
        })
    }

    pub fn body_backward(&mut self, c: &MlpCache<T>, dh2: &Mat<T>) {
        let dz2 = relu_backward(&c.z2, dh2);
        let dh1 = self.fc2.backward(&c.h1, &dz2);
        let dz1 = relu_backward(&c.z1, &dh1);
        self.fc1.backward(&c.x, &dz1);
    }

    pub fn forward(&self, x: &Mat<T>) -> Result<Mat<T>> {
        self.fc3.forward(&self.body(x)?.h2)
    }

    /// Forward and backward for one batch of rows; `dlogits` maps logits to their gradient.
    pub fn train_step(
        &mut self,
        x: &Mat<T>,
        dlogits: impl FnOnce(&Mat<T>) -> Result<Mat<T>>,
    ) -> Result<()> {
        let c = self.body(x)?;
        let logits = self.fc3.forward(&c.h2)?;
        let g = dlogits(&logits)?;
        let dh2 = self.fc3.backward(&c.h2, &g);
        self.body_backward(&c, &dh2);
        Ok(())
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = Vec::new();
        for (name, layer) in [("fc1", &self.fc1), ("fc2", &self.fc2), ("fc3", &self.fc3)] {
            v.push((format!("{name}.weight"), &layer.weight));
            v.push((format!("{name}.bias"), &layer.bias));
        }
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v: Vec<&mut Tensor<T>> = Vec::new();
        for layer in [&mut self.fc1, &mut self.fc2, &mut self.fc3] {
            v.extend(layer.params_mut());
        }
        v
    }

    pub fn body_params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v: Vec<&mut Tensor<T>> = Vec::new();
        for layer in [&mut self.fc1, &mut self.fc2] {
            v.extend(layer.params_mut());
        }
        v
    }
}

/// Five Chebyshev convolutions, rectifier between them, mean pooling and a dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel<T> {
    pub convs: Vec<ChebConv<T>>,
    /// Classification head, or latent projection inside the ensemble.
    pub head: Dense<T>,
}

#[derive(Debug, Clone)]
pub struct GnnCache<T> {
    convs: Vec<ChebCache<T>>,
    pre: Vec<Mat<T>>,
    rows: usize,
    /// Body output, one row.
    pub pooled: Mat<T>,
}

impl<T: Real> GnnCache<T> {
    /// Smallest rectifier input magnitude.
    pub fn relu_margin(&self) -> f64 {
        min_abs(self.pre.iter().flat_map(|m| m.data.iter()))
    }
}

impl<T: Real> GnnModel<T> {
    pub fn new(n_out: usize, rng: &mut impl Rng) -> Self {
        let convs = (0..GNN_LAYERS)
            .map(|k| ChebConv::new(if k == 0 { NODE_FEATURES } else { LATENT }, LATENT, rng))
            .collect();
        Self {
            convs,
            head: Dense::new(LATENT, n_out, rng),
        }
    }

    pub fn body(&self, lap: &ScaledLaplacian<T>, x: &Mat<T>) -> Result<GnnCache<T>> {
        if x.rows == 0 {
            return Err(Error::Shape("graph without nodes".into()));
        }
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.convs.len());
        let mut pre = Vec::with_capacity(self.convs.len());
        let last = self.convs.len() - 1;
        for (k, conv) in self.convs.iter().enumerate() {
            let (y, c) = conv.forward(lap, h)?;
            caches.push(c);
            if k < last {
                h = relu(&y);
                pre.push(y);
            } else {
                h = y;
            }
        }
        let pooled = mean_pool(&h)?;
        Ok(GnnCache {
            convs: caches,
            pre,
            rows: x.rows,
            pooled,
        })
    }

    pub fn body_backward(
        &mut self,
        lap: &ScaledLaplacian<T>,
        c: &GnnCache<T>,
        dpooled: &Mat<T>,
    ) -> Result<()> {
        let mut dh = mean_pool_backward(c.rows, dpooled);
        let last = self.convs.len() - 1;
        for k in (0..self.convs.len()).rev() {
            if k < last {
                dh = relu_backward(&c.pre[k], &dh);
            }
            dh = self.convs[k].backward(lap, &c.convs[k], &dh)?;
        }
        Ok(())
    }

    pub fn forward(&self, lap: &ScaledLaplacian<T>, x: &Mat<T>) -> Result<Mat<T>> {
        self.head.forward(&self.body(lap, x)?.pooled)
    }

    pub fn train_step(
        &mut self,
        lap: &ScaledLaplacian<T>,
        x: &Mat<T>,
        dlogits: impl FnOnce(&Mat<T>) -> Result<Mat<T>>,
    ) -> Result<()> {
        let c = self.body(lap, x)?;
        let logits = self.head.forward(&c.pooled)?;
        let g = dlogits(&logits)?;
        let dp = self.head.backward(&c.pooled, &g);
        self.body_backward(lap, &c, &dp)
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = Vec::new();
        for (k, c) in self.convs.iter().enumerate() {
            v.push((format!("conv{k}.w0"), &c.w0));
            v.push((format!("conv{k}.w1"), &c.w1));
            v.push((format!("conv{k}.bias"), &c.bias));
        }
        v.push(("head.weight".into(), &self.head.weight));
        v.push(("head.bias".into(), &self.head.bias));
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v: Vec<&mut Tensor<T>> =
            self.convs.iter_mut().flat_map(|c| c.params_mut()).collect();
        v.extend(self.head.params_mut());
        v
    }

    pub fn body_params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.convs.iter_mut().flat_map(|c| c.params_mut()).collect()
    }
}

/// MLP and GNN bodies projected into a shared latent space, summed, then classified.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel<T> {
    /// `fc3` is the 32→25 projection.
    pub mlp: MlpModel<T>,
    /// `head` is the 25→25 projection.
    pub gnn: GnnModel<T>,
    pub classifier: Dense<T>,
}

/// Body outputs of one record; enough to run the shared layers.
#[derive(Debug, Clone)]
pub struct BodyOutputs<T> {
    pub mlp: Mat<T>,
    pub gnn: Mat<T>,
}

impl<T: Real> EnsembleModel<T> {
    /// Keeps the trained bodies and attaches fresh projections and classifier.
    pub fn from_bodies(mlp: &MlpModel<T>, gnn: &GnnModel<T>, rng: &mut impl Rng) -> Self {
        let mut m = mlp.clone();
        m.fc3 = Dense::new(MLP_HIDDEN[1], LATENT, rng);
        let mut g = gnn.clone();
        g.head = Dense::new(LATENT, LATENT, rng);
        Self {
            mlp: m,
            gnn: g,
            classifier: Dense::new(LATENT, CLASSES, rng),
        }
    }

    pub fn new(rng: &mut impl Rng) -> Self {
        let mlp = MlpModel::new(LATENT, rng);
        let gnn = GnnModel::new(LATENT, rng);
        Self::from_bodies(&mlp, &gnn, rng)
    }

    pub fn bodies(
        &self,
        x: &Mat<T>,
        lap: &ScaledLaplacian<T>,
        nodes: &Mat<T>,
    ) -> Result<BodyOutputs<T>> {
        Ok(BodyOutputs {
            mlp: self.mlp.body(x)?.h2,
            gnn: self.gnn.body(lap, nodes)?.pooled,
        })
    }

    /// Shared layers only.
    pub fn head_forward(&self, b: &BodyOutputs<T>) -> Result<Mat<T>> {
        let mut z = self.mlp.fc3.forward(&b.mlp)?;
        let zg = self.gnn.head.forward(&b.gnn)?;
        for (a, c) in z.data.iter_mut().zip(zg.data) {
            *a += c;
        }
        self.classifier.forward(&z)
    }

    pub fn forward(&self, x: &Mat<T>, lap: &ScaledLaplacian<T>, nodes: &Mat<T>) -> Result<Mat<T>> {
        self.head_forward(&self.bodies(x, lap, nodes)?)
    }

    /// Backward through the shared layers only; returns gradients w.r.t. the body outputs.
    pub fn head_step(
        &mut self,
        b: &BodyOutputs<T>,
        dlogits: impl FnOnce(&Mat<T>) -> Result<Mat<T>>,
    ) -> Result<BodyOutputs<T>> {
        let mut z = self.mlp.fc3.forward(&b.mlp)?;
        let zg = self.gnn.head.forward(&b.gnn)?;
        for (a, c) in z.data.iter_mut().zip(zg.data) {
            *a += c;
        }
        let logits = self.classifier.forward(&z)?;
        let g = dlogits(&logits)?;
        let dz = self.classifier.backward(&z, &g);
        Ok(BodyOutputs {
            mlp: self.mlp.fc3.backward(&b.mlp, &dz),
            gnn: self.gnn.head.backward(&b.gnn, &dz),
        })
    }

    /// Full forward and backward.
    pub fn train_step(
        &mut self,
        x: &Mat<T>,
        lap: &ScaledLaplacian<T>,
        nodes: &Mat<T>,
        dlogits: impl FnOnce(&Mat<T>) -> Result<Mat<T>>,
    ) -> Result<()> {
        let mc = self.mlp.body(x)?;
        let gc = self.gnn.body(lap, nodes)?;
        let b = BodyOutputs {
            mlp: mc.h2.clone(),
            gnn: gc.pooled.clone(),
        };
        let db = self.head_step(&b, dlogits)?;
        self.mlp.body_backward(&mc, &db.mlp);
        self.gnn.body_backward(lap, &gc, &db.gnn)
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v: Vec<(String, &Tensor<T>)> = self
            .mlp
            .named_params()
            .into_iter()
            .map(|(n, t)| (format!("mlp.{n}"), t))
            .collect();
        v.extend(
            self.gnn
                .named_params()
                .into_iter()
                .map(|(n, t)| (format!("gnn.{n}"), t)),
        );
        v.push(("classifier.weight".into(), &self.classifier.weight));
        v.push(("classifier.bias".into(), &self.classifier.bias));
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = self.mlp.params_mut();
        v.extend(self.gnn.params_mut());
        v.extend(self.classifier.params_mut());
        v
    }

    /// Projections and classifier.
    pub fn head_params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v: Vec<&mut Tensor<T>> = Vec::new();
        v.extend(self.mlp.fc3.params_mut());
        v.extend(self.gnn.head.params_mut());
        v.extend(self.classifier.params_mut());
        v
    }
}

/// Total scalar parameters.
pub fn parameter_count<T: Real>(params: &[(String, &Tensor<T>)]) -> usize {
    params.iter().map(|(_, t)| t.len()).sum()
}

/// Copies `src` into `dst` (listed under `names`), checking names and shapes.
pub(crate) fn assign_params<T: Real>(
    names: &[String],
    dst: Vec<&mut Tensor<T>>,
    src: &[(String, Tensor<T>)],
) -> Result<()> {
    if dst.len() != src.len() || names.len() != src.len() {
        return Err(Error::Format(format!(
            "expected {} tensors, found {}",
            dst.len(),
            src.len()
        )));
    }
    for ((name, d), (sname, s)) in names.iter().zip(dst).zip(src) {
        if name != sname || d.shape != s.shape {
            return Err(Error::Format(format!(
                "tensor {sname} {:?} does not match {name} {:?}",
                s.shape, d.shape
            )));
        }
        d.values.clone_from(&s.values);
    }
    Ok(())
}
