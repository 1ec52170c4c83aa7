//! The Hamiltonian family `H_s(t) = H_0(t) + H'(t)`.

mod field;
mod schedule;
mod tensor;

pub use field::FieldProfile;
pub use schedule::Schedule;
pub use tensor::{heisenberg_tensor, CouplingTensor, TensorKey};

use crate::algebra::{Axis, OperatorExpr, SpinFactor, SpinSystem, Term};
use crate::error::{Error, Result};
use crate::C64;

/// One `λ_n(t)·H_n` contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionComponent {
    pub tensor: CouplingTensor,
    pub schedule: Schedule,
}

/// `H'(t) = Σ_n λ_n(t) H_n`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionSpec {
    pub components: Vec<InteractionComponent>,
}

impl InteractionSpec {
    pub fn none() -> Self {
        InteractionSpec::default()
    }

    pub fn single(tensor: CouplingTensor, schedule: Schedule) -> Self {
        InteractionSpec {
            components: vec![InteractionComponent { tensor, schedule }],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.components.iter().all(|c| c.tensor.is_empty())
    }

    pub fn is_time_independent(&self) -> bool {
        self.components.iter().all(|c| c.schedule.is_constant())
    }

    pub fn validate(&self, sys: &SpinSystem) -> Result<()> {
        for c in &self.components {
            c.tensor.check_sites(sys)?;
        }
        Ok(())
    }
}

/// Spin system, field and internal interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub system: SpinSystem,
    pub field: FieldProfile,
    pub interaction: InteractionSpec,
}

impl ModelSpec {
    pub fn new(system: SpinSystem, field: FieldProfile, interaction: InteractionSpec) -> Result<Self> {
        interaction.validate(&system)?;
        field.validate()?;
        Ok(ModelSpec {
            system,
            field,
            interaction,
        })
    }

    /// Same system and field, no internal interaction.
    pub fn dipole_only(&self) -> ModelSpec {
        ModelSpec {
            system: self.system.clone(),
            field: self.field.clone(),
            interaction: InteractionSpec::none(),
        }
    }
}

/// `H_0(t) = Σ_i Σ_α B^α(t) S_i^α`.
pub fn build_dipole(field: &FieldProfile, sys: &SpinSystem, t: f64) -> Result<OperatorExpr> {
    let b = field.eval(t)?;
    Ok(OperatorExpr::vector_dot_total_spin([b.x, b.y, b.z], sys.n_sites()))
}

/// `Σ_n λ_n(t) Σ Q_{i…}^{α…} S_{i₁}^{α₁}⋯S_{i_{2n}}^{α_{2n}}`, factors in tensor index order.
pub fn build_interaction(spec: &InteractionSpec, t: f64) -> Result<OperatorExpr> {
    let mut terms = Vec::new();
    for c in &spec.components {
        let lambda = c.schedule.eval(t)?;
        if lambda == 0.0 {
            continue;
        }
        for (key, &q) in c.tensor.entries() {
            let factors = key
                .sites
                .iter()
                .zip(&key.axes)
                .map(|(&i, &a)| SpinFactor::new(i, a))
                .collect();
            terms.push(Term::new(C64::new(lambda * q, 0.0), factors));
        }
    }
    Ok(OperatorExpr::from_terms(terms).canonicalized())
}

/// `H_s(t) = H_0(t) + H'(t)`.
pub fn build_total(model: &ModelSpec, t: f64) -> Result<OperatorExpr> {
    let h0 = build_dipole(&model.field, &model.system, t)?;
    let hp = build_interaction(&model.interaction, t)?;
    Ok((h0 + hp).canonicalized())
}

/// `Σ_i S_i^α` for the three axes.
pub fn total_spin_components(sys: &SpinSystem) -> [OperatorExpr; 3] {
    Axis::ALL.map(|a| OperatorExpr::total_spin(sys.n_sites(), a))
}

pub(crate) fn ensure_same_system(a: &SpinSystem, b: &SpinSystem) -> Result<()> {
    if a != b {
        return Err(Error::domain("models are defined on different spin systems"));
    }
    Ok(())
}
