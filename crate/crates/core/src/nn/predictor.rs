use serde::{Deserialize, Serialize};

use super::net::NeuralNet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::NodeId;

/// Neighbor readings over the temporal window: row `k` is neighbor `k`,
/// column `j` is time `t - j`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborWindow<T> {
    pub neighbor_ids: Vec<NodeId>,
    pub values: Matrix<T>,
}

impl<T: Scalar> NeighborWindow<T> {
    pub fn new(neighbor_ids: Vec<NodeId>, values: Matrix<T>) -> Result<Self> {
        if values.rows() != neighbor_ids.len() {
            return Err(Error::dim("window rows", neighbor_ids.len(), values.rows()));
        }
        Ok(Self {
            neighbor_ids,
            values,
        })
    }

    pub fn neighbor_count(&self) -> usize {
        self.values.rows()
    }

    pub fn len(&self) -> usize {
        self.values.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.cols() == 0
    }

    /// Neighbor-major, newest first: `[n0(t), n0(t-1), …, n1(t), …]`.
    pub fn flatten(&self) -> Vec<T> {
        self.values.as_slice().to_vec()
    }
}

/// A trained net bound to one monitored node and its ordered neighbor list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborPredictor<T> {
    pub node_id: NodeId,
    pub neighbor_ids: Vec<NodeId>,
    pub window_len: usize,
    pub net: NeuralNet<T>,
}

impl<T: Scalar> NeighborPredictor<T> {
    pub fn new(
        node_id: NodeId,
        neighbor_ids: Vec<NodeId>,
        window_len: usize,
        net: NeuralNet<T>,
    ) -> Result<Self> {
        let expected = neighbor_ids.len() * window_len;
        if net.spec().input_size() != expected {
            return Err(Error::Topology(format!(
                "net input width {} does not match {} neighbors x {} instants",
                net.spec().input_size(),
                neighbor_ids.len(),
                window_len
            )));
        }
        Ok(Self {
            node_id,
            neighbor_ids,
            window_len,
            net,
        })
    }

    pub fn predict(&self, window: &NeighborWindow<T>) -> Result<T> {
        if window.neighbor_ids != self.neighbor_ids {
            return Err(Error::Topology(format!(
                "node {}: window neighbors {:?} differ from training order {:?}",
                self.node_id, window.neighbor_ids, self.neighbor_ids
            )));
        }
        if window.len() != self.window_len {
            return Err(Error::dim("window length", self.window_len, window.len()));
        }
        self.net.predict_raw(&window.flatten())
    }
}

/// `|measured - predicted|`
pub fn nn_error<T: Scalar>(measured: T, predicted: T) -> Result<T> {
    if !measured.is_finite() || !predicted.is_finite() {
        return Err(Error::NumericInput("NN error"));
    }
    Ok((measured - predicted).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetTopologySpec;

    #[test]
    fn error_is_absolute_difference() {
        assert_eq!(nn_error(22.0, 22.0).unwrap(), 0.0);
        assert_eq!(nn_error(25.0, 22.0).unwrap(), 3.0);
        assert_eq!(nn_error(22.0, 25.0).unwrap(), 3.0);
        assert!(nn_error(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn flatten_is_neighbor_major_newest_first() {
        let w = NeighborWindow::new(
            vec![3, 7],
            Matrix::from_row_major(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(w.flatten(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!((w.neighbor_count(), w.len()), (2, 3));
    }

    #[test]
    fn eight_by_three_window_into_case_study_net() {
        let ids: Vec<NodeId> = (0..8).collect();
        let net = NeuralNet::<f64>::random(NetTopologySpec::new(24, &[48, 24]), 5).unwrap();
        let p = NeighborPredictor::new(99, ids.clone(), 3, net).unwrap();
        let w = NeighborWindow::new(ids, Matrix::from_row_major(8, 3, vec![22.0; 24]).unwrap())
            .unwrap();
        assert!(p.predict(&w).unwrap().is_finite());
    }

    #[test]
    fn neighbor_order_mismatch_is_topology_error() {
        let net = NeuralNet::<f64>::random(NetTopologySpec::new(4, &[3]), 5).unwrap();
        let p = NeighborPredictor::new(0, vec![1, 2], 2, net.clone()).unwrap();
        let w = NeighborWindow::new(vec![2, 1], Matrix::zeros(2, 2)).unwrap();
        assert!(matches!(p.predict(&w), Err(Error::Topology(_))));
        assert!(matches!(
            NeighborPredictor::new(0, vec![1, 2, 3], 2, net),
            Err(Error::Topology(_))
        ));
    }
}
