"""Privacy-preserving accumulation-token system.

Clients hold balance-carrying tokens committed under Pedersen
multi-commitments on a 2-cycle of elliptic curves, blind-signed by the
issuer, and accumulated in a curve-tree whose root is public.  Collection
and spending refresh the token unlinkably while a double-spend tag makes
serial reuse self-incriminating.
"""

from .params import (
    CycleParams,
    GeneratorSet,
    find_toy_cycle,
    medium_cycle,
    secp256k1_cycle,
    toy_cycle,
)
from .groups import Curve, Point, derive_generators, msm, point_decode, point_encode, scalar_mul
from .pedersen import Opening, blind_pair, commit, rerandomize
from .transcript import Transcript
from .core import (
    ClientState,
    DTag,
    DTagDB,
    IssuerState,
    OverspendError,
    ProtocolAbort,
    SpendRecord,
    Token,
    detect_double_spend,
    run_collection,
    run_issuance,
    run_spend,
    setup,
    token_cap_check,
)

__version__ = "0.1.0"
