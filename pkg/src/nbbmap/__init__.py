"""Block-space thread maps for NBB embedded fractals.

Quick start::

    >>> from nbbmap import SIERPINSKI, BlockGeometry, lambda_map
    >>> geom = BlockGeometry.from_level(SIERPINSKI, 2)
    >>> lambda_map(SIERPINSKI, geom, (1, 1))
    (0, 3)
"""

from .blockmap import (
    BlockGeometry,
    IntraBlockStrategy,
    LevelOffset,
    beta,
    lambda_array,
    lambda_inverse,
    lambda_inverse_array,
    lambda_map,
    level_offsets,
    map_thread,
    sierpinski_arith_hash,
)
from .codec import compact_load, compact_store, load_compact, save_compact
from .errors import (
    CapacityError,
    ConfigError,
    DomainError,
    LaunchError,
    NBBError,
    RangeError,
    ResourceError,
    ShapeError,
)
from .estimators import CompactCodec, LambdaMap
from .fractal import (
    BUILTIN_SPECS,
    CARPET,
    SIERPINSKI,
    VICSEK,
    FractalSpec,
    enumerate_cells,
    get_spec,
    hausdorff,
    is_member,
    load_spec,
    member_mask,
    orthotope_dims,
    parse_spec,
    scale_level,
    volume,
)
from .mma import encode_variant1, encode_variant2, encode_variant3, mma_eval
from .sim import (
    Backend,
    DispatchConfig,
    Grid,
    Mode,
    WorkReport,
    launch,
    run_ca,
    run_reduction,
    run_single_write,
    work_quotient,
)

__version__ = "0.1.0"
