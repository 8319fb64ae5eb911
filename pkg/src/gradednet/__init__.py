"""Neural networks over graded vector spaces."""
from .grading import (
    Grade, GradeError, GradingSignature, SignatureError, SignatureReport, VariantMismatch,
    grade_add, parse_grade, render_grade, validate_signature,
)
from .gspace import (
    DomainError, GradedVector, SignatureMismatch, direct_sum, inner_product, scalar_action,
    tensor_component_dims,
)
from .gmap import (
    BlockKernel, GradedLinearMap, check_graded, check_module_hom, compose,
)
from .norms import (
    LossWeights, euclidean_norm, graded_loss, graded_loss_gradient, homogeneous_norm,
    weighted_norm,
)
from .network import (
    ActivationKind, DenseBaseline, GradedLayer, GradedNetwork, TrainingDiverged, graded_relu,
    parameter_count, relu_derivative, train,
)

__version__ = "0.1.0"
