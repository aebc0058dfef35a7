//! Forward models: maps from parameter space to data space, in linear matrix
//! form or as general differentiable maps.

use std::sync::Arc;

use crate::coords::Diffeo;
use crate::error::{AuditError, Result};
use crate::scalar::Scalar;

type FwdFn<F> = Arc<dyn Fn(&[F]) -> Vec<F> + Send + Sync>;

#[derive(Clone)]
pub struct ForwardModel<F: Scalar> {
    pub m_dim: usize,
    pub d_dim: usize,
    map: FwdFn<F>,
    /// Row-major matrix when the model is linear; `map` then agrees with
    /// matrix·m to 1e-12.
    pub linear_matrix: Option<Vec<Vec<F>>>,
    name: String,
}

impl<F: Scalar> std::fmt::Debug for ForwardModel<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForwardModel")
            .field("name", &self.name)
            .field("m_dim", &self.m_dim)
            .field("d_dim", &self.d_dim)
            .field("linear", &self.linear_matrix.is_some())
            .finish()
    }
}

impl<F: Scalar> ForwardModel<F> {
    pub fn new(
        m_dim: usize,
        d_dim: usize,
        name: impl Into<String>,
        map: FwdFn<F>,
    ) -> Self {
        ForwardModel {
            m_dim,
            d_dim,
            map,
            linear_matrix: None,
            name: name.into(),
        }
    }

    pub fn from_matrix(name: impl Into<String>, rows: Vec<Vec<F>>) -> Self {
        let d_dim = rows.len();
        let m_dim = rows[0].len();
        let rows2 = rows.clone();
        let map: FwdFn<F> = Arc::new(move |m: &[F]| {
            rows2
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(m)
                        .fold(F::zero(), |acc, (&a, &x)| acc + a * x)
                })
                .collect()
        });
        ForwardModel {
            m_dim,
            d_dim,
            map,
            linear_matrix: Some(rows),
            name: name.into(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, m: &[F]) -> Vec<F> {
        (self.map)(m)
    }

    /// Post-compose with a data-space reparameterization: m ↦ t(g(m)).
    pub fn then(&self, t: &Diffeo<F>) -> Result<ForwardModel<F>> {
        if t.dim() != self.d_dim {
            return Err(AuditError::DimensionMismatch {
                expected: self.d_dim,
                got: t.dim(),
            });
        }
        let g = Arc::clone(&self.map);
        let name = format!("{}∘{}", t.name(), self.name);
        let t = t.clone();
        let map: FwdFn<F> = Arc::new(move |m: &[F]| {
            let d = g(m);
            t.apply(&d).unwrap_or_else(|_| vec![F::nan(); d.len()])
        });
        Ok(ForwardModel::new(self.m_dim, self.d_dim, name, map))
    }

    /// Pre-compose with a model-space reparameterization: m' ↦ g(t⁻¹(m')).
    pub fn after_inverse(&self, t: &Diffeo<F>) -> Result<ForwardModel<F>> {
        if t.dim() != self.m_dim {
            return Err(AuditError::DimensionMismatch {
                expected: self.m_dim,
                got: t.dim(),
            });
        }
        let g = Arc::clone(&self.map);
        let name = format!("{}∘{}⁻¹", self.name, t.name());
        let t = t.clone();
        let d_dim = self.d_dim;
        let map: FwdFn<F> = Arc::new(move |m: &[F]| match t.apply_inverse(m) {
            Ok(orig) => g(&orig),
            Err(_) => vec![F::nan(); d_dim],
        });
        Ok(ForwardModel::new(self.m_dim, self.d_dim, name, map))
    }
}
