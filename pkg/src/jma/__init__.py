"""Minimum-norm targeted adversarial perturbations through a Jacobian-induced metric."""

from .attack import AttackConfig, AttackResult, StepSolution, jma_attack, jma_step, lots_attack, metrics
from .encoding import (
    Codebook,
    ConstraintSystem,
    build_constraints,
    build_constraints_multilabel,
    decode,
    hadamard_codebook,
    multilabel_codebook,
    onehot_codebook,
)
from .errors import (
    AlreadyTarget,
    ConfigMismatch,
    DegenerateDiagonal,
    Infeasible,
    InvalidOrder,
    JMAError,
    RankDeficient,
    SchemaMismatch,
)
from .model import LayeredNet, fd_jacobian, forward_logits, jacobian_logits, make_net, train
from .nnls import NnlsSolution, nnls_solve

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackResult",
    "StepSolution",
    "jma_attack",
    "jma_step",
    "lots_attack",
    "metrics",
    "Codebook",
    "ConstraintSystem",
    "build_constraints",
    "build_constraints_multilabel",
    "decode",
    "hadamard_codebook",
    "multilabel_codebook",
    "onehot_codebook",
    "AlreadyTarget",
    "ConfigMismatch",
    "DegenerateDiagonal",
    "Infeasible",
    "InvalidOrder",
    "JMAError",
    "RankDeficient",
    "SchemaMismatch",
    "LayeredNet",
    "fd_jacobian",
    "forward_logits",
    "jacobian_logits",
    "make_net",
    "train",
    "NnlsSolution",
    "nnls_solve",
]
