from .operators import (
    OPERATORS,
    OperatorSpec,
    ParamOutOfRange,
    ParamSpec,
    UnknownOperator,
    apply_procedural,
    get_operator,
    params_in_range,
)
from .routing import (
    DEFAULT_PROXIES,
    PROCEDURAL,
    AllToolsFailed,
    Executor,
    GenerativeEditor,
    RoutingTable,
    SimExecutionFailed,
    apply_generative,
)
