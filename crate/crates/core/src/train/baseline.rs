//! Two-layer perceptron fitting the normalized learning signal from the
//! answer entity (one-hot) and the question's token counts.

use rand::Rng;

use crate::kg::EntityId;
use crate::model::tensor::axpy;
use crate::model::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineNet {
    num_entities: usize,
    /// hidden x (num_entities + vocab_size)
    pub w1: Matrix,
    /// 1 x hidden
    pub b1: Matrix,
    /// 1 x hidden
    pub w2: Matrix,
    /// 1 x 1
    pub b2: Matrix,
}

/// Cached activations of one forward pass.
struct Hidden {
    act: Vec<f64>,
}

impl BaselineNet {
    pub fn zeros(num_entities: usize, vocab_size: usize, hidden: usize) -> Self {
        Self {
            num_entities,
            w1: Matrix::zeros(hidden, num_entities + vocab_size),
            b1: Matrix::zeros(1, hidden),
            w2: Matrix::zeros(1, hidden),
            b2: Matrix::zeros(1, 1),
        }
    }

    /// Random first layer, zero output layer: the initial prediction is 0.
    pub fn init<R: Rng + ?Sized>(num_entities: usize, vocab_size: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(num_entities, vocab_size, hidden);
        net.w1 = Matrix::uniform(hidden, num_entities + vocab_size, scale, rng);
        net
    }

    pub fn from_blocks(num_entities: usize, w1: Matrix, b1: Matrix, w2: Matrix, b2: Matrix) -> Self {
        Self { num_entities, w1, b1, w2, b2 }
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn input_width(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn blocks(&self) -> Vec<(&'static str, &Matrix)> {
        vec![("baseline.w1", &self.w1), ("baseline.b1", &self.b1), ("baseline.w2", &self.w2), ("baseline.b2", &self.b2)]
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        vec![
            ("baseline.w1", &mut self.w1),
            ("baseline.b1", &mut self.b1),
            ("baseline.w2", &mut self.w2),
            ("baseline.b2", &mut self.b2),
        ]
    }

    fn hidden_forward(&self, q: &[usize], answer: EntityId) -> Hidden {
        let h = self.hidden();
        let mut pre = self.b1.as_slice().to_vec();
        for (k, p) in pre.iter_mut().enumerate() {
            let row = self.w1.row(k);
            *p += row[answer.0];
            for &t in q {
                *p += row[self.num_entities + t];
            }
        }
        debug_assert_eq!(pre.len(), h);
        Hidden { act: pre.iter().map(|x| x.tanh()).collect() }
    }

    pub fn predict(&self, q: &[usize], answer: EntityId) -> f64 {
        let hid = self.hidden_forward(q, answer);
        self.b2.get(0, 0) + hid.act.iter().zip(self.w2.as_slice()).map(|(a, w)| a * w).sum::<f64>()
    }

    /// Square loss `(b(q, a) - target)^2` and its gradient, shaped like `self`.
    pub fn loss_and_grad(&self, q: &[usize], answer: EntityId, target: f64) -> (f64, BaselineNet) {
        let hid = self.hidden_forward(q, answer);
        let pred = self.b2.get(0, 0) + hid.act.iter().zip(self.w2.as_slice()).map(|(a, w)| a * w).sum::<f64>();
        let err = pred - target;
        let dpred = 2.0 * err;
        let mut grad = Self::zeros(self.num_entities, self.input_width() - self.num_entities, self.hidden());
        grad.b2.as_mut_slice()[0] = dpred;
        axpy(dpred, &hid.act, grad.w2.as_mut_slice());
        for k in 0..self.hidden() {
            let dpre = dpred * self.w2.get(0, k) * (1.0 - hid.act[k] * hid.act[k]);
            if dpre == 0.0 {
                continue;
            }
            grad.b1.as_mut_slice()[k] += dpre;
            let row = grad.w1.row_mut(k);
            row[answer.0] += dpre;
            for &t in q {
                row[self.num_entities + t] += dpre;
            }
        }
        (err * err, grad)
    }

    /// One gradient step on the square loss. Returns the prediction made
    /// before the update.
    pub fn step(&mut self, q: &[usize], answer: EntityId, target: f64, lr: f64) -> f64 {
        let pred = self.predict(q, answer);
        let (_, grad) = self.loss_and_grad(q, answer, target);
        let src = grad.blocks();
        for ((_, dst), (_, g)) in self.blocks_mut().into_iter().zip(src) {
            dst.add_scaled(-lr, g);
        }
        pred
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_net_predicts_zero() {
        let net = BaselineNet::zeros(3, 5, 4);
        assert_eq!(net.predict(&[1, 2], EntityId(1)), 0.0);
        let mut r = rng::substream(1, "t");
        let net = BaselineNet::init(3, 5, 4, 0.1, &mut r);
        assert_eq!(net.predict(&[1, 2], EntityId(1)), 0.0);
    }

    #[test]
    fn converges_to_repeated_target() {
        let mut r = rng::substream(7, "t");
        let mut net = BaselineNet::init(4, 6, 8, 0.08, &mut r);
        let q = [1, 3, 3];
        let mut last = f64::INFINITY;
        for i in 0..400 {
            net.step(&q, EntityId(2), 1.5, 0.05);
            let loss = (net.predict(&q, EntityId(2)) - 1.5).powi(2);
            if i > 50 {
                assert!(loss <= last + 1e-15, "loss increased at step {i}");
            }
            last = loss;
        }
        assert!((net.predict(&q, EntityId(2)) - 1.5).abs() < 1e-3);
    }
}
