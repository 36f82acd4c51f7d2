//! The transform tree: task spaces linked by differentiable maps, a forward
//! state pass, and a backward pass pulling term specs to the root in four
//! separate channels (energy, policy, forcing, execution energy).

use nalgebra::{DMatrix, DVector};

use crate::error::{FabricError, Result};
use crate::geometry::{FabricTerm, TaskMap, TermKind};
use crate::spec_algebra::{pullback_spec, resolve_policy, sum_specs, SpecValue, TaskMapEval};

pub type NodeId = usize;

#[derive(Debug, Clone)]
struct TreeNode {
    parent: Option<NodeId>,
    edge: Option<TaskMap>,
    dim: usize,
    terms: Vec<FabricTerm>,
}

/// Tree of task spaces; node 0 is the root (configuration space).
#[derive(Debug, Clone)]
pub struct TransformTree {
    nodes: Vec<TreeNode>,
}

impl TransformTree {
    pub fn new(root_dim: usize) -> Self {
        Self {
            nodes: vec![TreeNode {
                parent: None,
                edge: None,
                dim: root_dim,
                terms: Vec::new(),
            }],
        }
    }

    pub const ROOT: NodeId = 0;

    pub fn root_dim(&self) -> usize {
        self.nodes[0].dim
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_dim(&self, id: NodeId) -> Result<usize> {
        self.node(id).map(|n| n.dim)
    }

    fn node(&self, id: NodeId) -> Result<&TreeNode> {
        self.nodes.get(id).ok_or(FabricError::UnknownNode { id })
    }

    /// Registers a child space under `parent` reached through `edge`.
    pub fn add_node(&mut self, parent: NodeId, edge: TaskMap) -> Result<NodeId> {
        let parent_dim = self.node(parent)?.dim;
        if edge.parent_dim() != parent_dim {
            return Err(FabricError::DimensionMismatch {
                context: "TransformTree::add_node edge",
                expected: parent_dim,
                got: edge.parent_dim(),
            });
        }
        let dim = edge.child_dim();
        self.nodes.push(TreeNode {
            parent: Some(parent),
            edge: Some(edge),
            dim,
            terms: Vec::new(),
        });
        Ok(self.nodes.len() - 1)
    }

    /// Attaches a term under `parent`, creating the node for its task space.
    pub fn attach_term(&mut self, parent: NodeId, term: FabricTerm) -> Result<NodeId> {
        let id = self.add_node(parent, term.task_map.clone())?;
        self.nodes[id].terms.push(term);
        Ok(id)
    }

    /// Populates every node with its state from the root out to the leaves.
    pub fn forward(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<ForwardPass> {
        if q.len() != self.root_dim() || qdot.len() != self.root_dim() {
            return Err(FabricError::DimensionMismatch {
                context: "TransformTree::forward",
                expected: self.root_dim(),
                got: q.len().max(qdot.len()),
            });
        }
        let mut states: Vec<NodeState> = Vec::with_capacity(self.nodes.len());
        states.push(NodeState {
            x: q.clone(),
            xdot: qdot.clone(),
            edge_eval: None,
        });
        for (id, node) in self.nodes.iter().enumerate().skip(1) {
            let parent = node.parent.expect("non-root nodes have parents");
            let edge = node.edge.as_ref().expect("non-root nodes have edges");
            let parent_state = &states[parent];
            let eval = edge
                .evaluate(&parent_state.x, &parent_state.xdot)
                .map_err(|e| annotate_node(e, id, &node.terms))?;
            if edge.requires_positive() && eval.x()[0] <= 0.0 {
                return Err(annotate_node(
                    FabricError::BarrierViolation {
                        what: format!("node {id}"),
                        value: eval.x()[0],
                    },
                    id,
                    &node.terms,
                ));
            }
            let xdot = eval.map_velocity(&parent_state.xdot);
            states.push(NodeState {
                x: eval.x().clone(),
                xdot,
                edge_eval: Some(eval),
            });
        }
        Ok(ForwardPass { states })
    }

    /// Evaluates every attached term in its node space, pulls the specs back
    /// edge-by-edge to the root and sums them per channel. Forcing terms
    /// contribute their energy specs to the energy channel alongside the
    /// forcing force.
    pub fn backward(&self, fwd: &ForwardPass) -> Result<RootResolution> {
        let n = self.root_dim();
        let mut res = RootResolution {
            energy: SpecValue::zeros(n),
            policy: SpecValue::zeros(n),
            forcing: SpecValue::zeros(n),
            exec_energy: SpecValue::zeros(n),
            fabric_energy_value: 0.0,
            exec_energy_value: 0.0,
            potential_value: 0.0,
        };
        for (id, node) in self.nodes.iter().enumerate() {
            for term in &node.terms {
                let state = &fwd.states[id];
                let eval = term
                    .energy
                    .evaluate(&state.x, &state.xdot)
                    .map_err(|e| annotate_node(e, id, &node.terms))?;
                let energy_spec =
                    SpecValue::new(eval.tensor.clone(), eval.curvature_force.clone())?;
                match &term.kind {
                    TermKind::Geometric { .. } => {
                        let pi = term
                            .policy(&state.x, &state.xdot)?
                            .expect("geometric terms have policies");
                        let policy_spec =
                            SpecValue::from_parts(eval.tensor.clone(), -(&eval.tensor * pi));
                        res.policy = sum_specs(&res.policy, &self.pull_to_root(fwd, id, policy_spec)?)?;
                        res.energy = sum_specs(&res.energy, &self.pull_to_root(fwd, id, energy_spec)?)?;
                        res.fabric_energy_value += eval.energy;
                    }
                    TermKind::Forcing { .. } => {
                        let force = term
                            .forcing_force(&state.x)?
                            .expect("forcing terms have forces");
                        let forcing_spec = SpecValue::from_parts(eval.tensor.clone(), force);
                        res.forcing =
                            sum_specs(&res.forcing, &self.pull_to_root(fwd, id, forcing_spec)?)?;
                        res.energy = sum_specs(&res.energy, &self.pull_to_root(fwd, id, energy_spec)?)?;
                        res.fabric_energy_value += eval.energy;
                        res.potential_value += term.effective_potential(&state.x)?;
                    }
                    TermKind::ExecutionEnergy => {
                        res.exec_energy =
                            sum_specs(&res.exec_energy, &self.pull_to_root(fwd, id, energy_spec)?)?;
                        res.exec_energy_value += eval.energy;
                    }
                }
            }
        }
        Ok(res)
    }

    fn pull_to_root(&self, fwd: &ForwardPass, node: NodeId, spec: SpecValue) -> Result<SpecValue> {
        let mut spec = spec;
        let mut id = node;
        while let Some(parent) = self.nodes[id].parent {
            let eval = fwd.states[id]
                .edge_eval
                .as_ref()
                .expect("non-root nodes have edge evaluations");
            spec = pullback_spec(&spec, eval)?;
            id = parent;
        }
        Ok(spec)
    }

    /// Smallest value among positive-domain maps, the margin to barrier
    /// violation; obstacle-style maps only when `obstacles_only`.
    pub fn min_barrier_value(&self, fwd: &ForwardPass, obstacles_only: bool) -> f64 {
        let mut min = f64::INFINITY;
        for (id, node) in self.nodes.iter().enumerate() {
            if let Some(edge) = &node.edge {
                let relevant = if obstacles_only {
                    edge.is_obstacle_distance()
                } else {
                    edge.requires_positive()
                };
                if relevant {
                    min = min.min(fwd.states[id].x[0]);
                }
            }
        }
        min
    }
}

fn annotate_node(err: FabricError, id: NodeId, terms: &[FabricTerm]) -> FabricError {
    match err {
        FabricError::BarrierViolation { what, value } => {
            let label = terms
                .first()
                .map(|t| t.name.as_str())
                .unwrap_or("unnamed");
            FabricError::BarrierViolation {
                what: format!("{what} (node {id}, term {label})"),
                value,
            }
        }
        other => other,
    }
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub x: DVector<f64>,
    pub xdot: DVector<f64>,
    /// Evaluation of the edge from the parent (`None` at the root).
    pub edge_eval: Option<TaskMapEval>,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub states: Vec<NodeState>,
}

/// The four pulled-back channel results at the root, with the scalar
/// energy/potential tallies used for trajectory records.
#[derive(Debug, Clone)]
pub struct RootResolution {
    pub energy: SpecValue,
    pub policy: SpecValue,
    pub forcing: SpecValue,
    pub exec_energy: SpecValue,
    pub fabric_energy_value: f64,
    pub exec_energy_value: f64,
    pub potential_value: f64,
}

/// Root equation pieces: the fabric metric, the geometric policy and the
/// forcing acceleration a_ψ = −(M + ridge·I)⁻¹·f_ψ.
#[derive(Debug, Clone)]
pub struct RootState {
    pub metric: DMatrix<f64>,
    pub pi0: DVector<f64>,
    pub a_psi: DVector<f64>,
}

pub fn resolve_root(res: &RootResolution, ridge: f64) -> RootState {
    let metric = res.energy.metric().clone();
    let pi0 = resolve_policy(&res.policy, ridge).acceleration;
    let a_psi = resolve_policy(
        &SpecValue::from_parts(metric.clone(), res.forcing.force().clone()),
        ridge,
    )
    .acceleration;
    RootState {
        metric,
        pi0,
        a_psi,
    }
}
