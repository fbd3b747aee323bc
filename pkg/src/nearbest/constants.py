from enum import Enum

class PieceKind(str, Enum):
    SEGMENT       = "segment"
    CIRCULAR_ARC  = "circular_arc"

class Side(int, Enum):
    LEFT  = 1   # left bank when walking the arc from its start to its end
    RIGHT = 2

class Mode(str, Enum):
    BESTAPPROX = "bestapprox"
    THEOREM1   = "theorem1"
    THEOREM2   = "theorem2"

class RateModel(str, Enum):
    GEOMETRIC  = "geometric"
    STRETCHED  = "stretched"
    POWERLAW   = "powerlaw"

class LemniscateRegion(str, Enum):
    INSIDE   = "inside"
    ON       = "on"
    OUTSIDE  = "outside"

class KernelForm(str, Enum):
    FABER     = "faber"
    MONOMIAL  = "monomial"
    FACTORED  = "factored"

class WedgeLabel(str, Enum):
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    B1 = "B1"
    B2 = "B2"
    UNCLASSIFIED = "unclassified"

VALID_MODES = [m.value for m in Mode]
VALID_RATE_MODELS = [m.value for m in RateModel]

CONFIG_SCHEMA_VERSION = 1
CSV_SCHEMA = "nearbest-run/1"
POLYNOMIAL_SCHEMA = "nearbest-polynomial/1"

# Numerical defaults
ERROR_FLOOR          = 1e-13    # rows below this are excluded from rate fits
MAP_TOLERANCE        = 1e-8
LAWSON_TOLERANCE     = 1e-8
LAWSON_MAX_ITER      = 500
LAWSON_BRACKET       = 0.05     # relative bracket width counted as converged
QUADRATURE_ORDER     = 16
INNER_GAP            = 1e-12    # smallest |Φ|-1 reached by the inner dyadic panels
NODES_PER_DEGREE     = 20
CLUSTER_RATIO        = 0.7
CLUSTER_LEVELS       = tuple(range(12, 24))
ADMISSIBILITY_SAMPLES = 2048
RHO_SAMPLES          = 512
RAY_SAMPLES          = 128
MAX_KAPPA            = 64
MAX_LAMBDA           = 2.0
MONOMIAL_DEGREE_LIMIT = 200
