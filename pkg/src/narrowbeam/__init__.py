"""Group-wise narrow beam design and group-wise sparse channel estimation for
partially connected hybrid UPA receivers."""

from .array import (
    ChannelRealization,
    PathParams,
    UpaGeometry,
    VerticalPrior,
    array_response,
    array_response_sin,
    channel_from_paths,
    received_signal,
    sample_channel,
)
from .beams import (
    AnalogBeamMatrix,
    GroupingPattern,
    SubIntervalPartition,
    build_group_beam_matrix,
    narrow_beam,
    random_beam_matrix,
    wide_beam_matrix,
)
from .eda import EdaConfig, build_problem, exhaustive_optimum, run_eda
from .estimator import (
    DynamicGrid,
    EstimatorConfig,
    OverDenseError,
    PosteriorState,
    SparsePriorConfig,
    gw_scvbi,
    nmse,
    omp,
    omp_estimate,
    scvbi_full,
)
from .metrics import SidelobeRegion, crb_delta, fim, horizontal_af, isl, srl, vertical_af

__version__ = "0.1.0"
